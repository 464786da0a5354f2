"""Shared generators and independent oracles for the test suite.

The oracles here are deliberately naive (full enumeration, direct
integration) and never call the code paths they are used to check.
"""

import itertools

import numpy as np
import pytest

from kwrob import DiscretePMF, EqualRevenue, Uniform, check_regular


def q1q2_enumerate(qs):
    """Pr[>=1], Pr[>=2] for independent Bernoulli events, by enumerating
    all 2^n outcomes."""
    n = len(qs)
    q1 = q2 = 0.0
    for bits in itertools.product([0, 1], repeat=n):
        p = 1.0
        for b, q in zip(bits, qs):
            p *= q if b else (1.0 - q)
        c = sum(bits)
        if c >= 1:
            q1 += p
        if c >= 2:
            q2 += p
    return q1, q2


def table_q1q2_enumerate(table, tau):
    q1 = q2 = 0.0
    for values, mass in table.cells():
        c = sum(v >= tau for v in values)
        if c >= 1:
            q1 += mass
        if c >= 2:
            q2 += mass
    return q1, q2


def table_revenue_enumerate(table, payment_fn):
    return sum(mass * payment_fn(values) for values, mass in table.cells())


def random_regular_discrete(rng, max_pts=4, lo=0.1, hi=10.0):
    """Rejection-sample a discrete marginal whose revenue-quantile polyline
    is concave."""
    for _ in range(2000):
        k = int(rng.integers(2, max_pts + 1))
        pts = np.unique(np.round(np.sort(rng.uniform(lo, hi, size=k)), 3))
        if len(pts) < 2:
            continue
        w = rng.dirichlet(np.ones(len(pts)))
        w = np.round(w, 6)
        w[-1] = 1.0 - w[:-1].sum()
        if np.any(w <= 0):
            continue
        m = DiscretePMF(pts.tolist(), w.tolist())
        if check_regular(m):
            return m
    raise RuntimeError("failed to sample a regular discrete marginal")


def random_discrete(rng, max_pts=4, lo=0.1, hi=10.0):
    for _ in range(100):
        k = int(rng.integers(2, max_pts + 1))
        pts = np.unique(np.round(np.sort(rng.uniform(lo, hi, size=k)), 3))
        if len(pts) < 2:
            continue
        w = rng.dirichlet(np.ones(len(pts)))
        w = np.round(w, 6)
        w[-1] = 1.0 - w[:-1].sum()
        if np.any(w <= 0):
            continue
        return DiscretePMF(pts.tolist(), w.tolist())
    raise RuntimeError


def random_scaled_regular_family(rng, n_max=5):
    """Random regular parametric marginals rescaled so the expected number
    of bidders strictly above 1 is at most 1 (the normalization the tail
    bounds assume)."""
    n = int(rng.integers(2, n_max + 1))
    ms = []
    for _ in range(n):
        if rng.random() < 0.5:
            lo = float(rng.uniform(0.05, 1.0))
            hi = lo * float(rng.uniform(1.5, 20.0))
            ms.append(EqualRevenue(lo, hi))
        else:
            lo = float(rng.uniform(0.0, 1.0))
            hi = lo + float(rng.uniform(0.5, 10.0))
            ms.append(Uniform(lo, hi))

    def above(v):
        return sum(m.quantile_q(v) for m in ms)

    lo_v = min(m.support[0] for m in ms)
    hi_v = max(m.support[1] for m in ms)
    a, b = lo_v - 1.0, hi_v + 1.0
    for _ in range(100):
        mid = 0.5 * (a + b)
        if above(mid) >= 1.0:
            a = mid
        else:
            b = mid
    scale = 1.0 / max(a, 1e-9)

    def rescale(m):
        if isinstance(m, EqualRevenue):
            return EqualRevenue(m.lo * scale, m.hi * scale)
        return Uniform(m.lo * scale, m.hi * scale)

    return [rescale(m) for m in ms]


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
