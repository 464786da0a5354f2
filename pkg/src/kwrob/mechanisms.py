"""Truthful single-item auction rules.

Two mechanisms:

* AnonymousReserve(r) - second-price auction with reserve r; the high
  bidder at or above r wins and pays max(r, second-highest value).
* Myerson(marginals, tie_break) - allocate to the highest nonnegative
  (ironed) virtual value; the winner pays the threshold bid, the infimum of
  bids that would still win against the realized competitors.

Tie-breaking is part of the mechanism: "highest_value" breaks virtual-value
ties toward the larger value (then lower index), "lex" toward the lower
index.  With equal-revenue marginals the whole support shares one virtual
value, so the tie rule decides essentially every auction and the two
policies genuinely differ.

Threshold payments are computed in closed form from each marginal's
virtual-value inverse rather than by numeric search; for value-tie wins the
threshold is the infimum (the competitor's value), matching the second-price
rule even when the tie itself would resolve against the winner.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .marginals import DiscretePMF, DomainError, Marginal

HIGHEST_VALUE = "highest_value"
LEX = "lex"


@dataclass(frozen=True)
class Outcome:
    winner: int | None
    payment: float

    def __post_init__(self):
        if self.winner is None and self.payment != 0.0:
            raise DomainError("no winner implies zero payment")


@dataclass(frozen=True)
class AnonymousReserve:
    r: float

    def __post_init__(self):
        if not np.isfinite(self.r) or self.r < 0:
            raise DomainError("reserve must be finite and nonnegative")


@dataclass(frozen=True)
class Myerson:
    marginals: tuple
    tie_break: str = HIGHEST_VALUE

    def __init__(self, marginals, tie_break=HIGHEST_VALUE):
        if tie_break not in (HIGHEST_VALUE, LEX):
            raise DomainError(f"unknown tie_break {tie_break!r}")
        object.__setattr__(self, "marginals", tuple(marginals))
        object.__setattr__(self, "tie_break", tie_break)


Mechanism = AnonymousReserve | Myerson


def run_ar(r: float, values) -> Outcome:
    """Second-price auction with anonymous reserve.  Exact value ties go to
    the lowest index; revenue does not depend on that choice."""
    values = np.asarray(values, dtype=float)
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise DomainError("values must be finite and nonnegative")
    eligible = values >= r
    if not eligible.any():
        return Outcome(None, 0.0)
    winner = int(np.argmax(values))  # argmax returns the first max
    others = np.delete(values, winner)
    second = float(others.max()) if others.size else 0.0
    return Outcome(winner, max(r, second))


def ironed_phi(m: Marginal, v: float) -> float:
    """Virtual value, ironed when the marginal is a discrete pmf."""
    if isinstance(m, DiscretePMF):
        return m.ironed_virtual_value(v)
    return m.virtual_value(v)


def _key(mech: Myerson, i: int, phi: float, v: float):
    if mech.tie_break == HIGHEST_VALUE:
        return (phi, v, -i)
    return (phi, -i)


def threshold_payment(mech: Myerson, i: int, best_key, tie_break=None) -> float:
    """inf over bids b of bidder i that still win against the realized
    competitors, where best_key is the strongest competing key among
    eligible competitors (None when there is none).

    Routes to the win: strictly beat the competing virtual value, or match
    it and win the tie.  For highest_value the tie route's infimum is the
    competitor's value itself (whether or not the tie resolves for i); for
    lex it exists only when i has the smaller index.  Eligibility
    (virtual value >= 0) floors everything.
    """
    tie_break = tie_break or mech.tie_break
    m = mech.marginals[i]
    t0 = m.phi_geq_inv(0.0)
    if t0 is None:
        raise DomainError(f"marginal {i} never reaches nonnegative virtual value")
    if best_key is None:
        return t0
    phi_star = best_key[0]
    candidates = []
    t_strict = m.phi_gt_inv(phi_star)
    if t_strict is not None:
        candidates.append(t_strict)
    t_geq = m.phi_geq_inv(phi_star)
    if t_geq is not None:
        if tie_break == HIGHEST_VALUE:
            candidates.append(max(t_geq, best_key[1]))
        elif i < -best_key[-1]:
            candidates.append(t_geq)
    if not candidates:
        return np.inf
    return max(t0, min(candidates))


def run_myerson(mech: Myerson, values) -> Outcome:
    values = np.asarray(values, dtype=float)
    n = len(mech.marginals)
    if values.shape != (n,):
        raise DomainError(f"expected {n} values, got shape {values.shape}")
    keys = []
    for i, (m, v) in enumerate(zip(mech.marginals, values)):
        lo, hi = m.support
        if not (lo - 1e-9 <= v <= hi + 1e-9):
            raise DomainError(f"value {v} of bidder {i} outside support [{lo}, {hi}]")
        phi = ironed_phi(m, v)
        if phi >= 0.0:
            keys.append((_key(mech, i, phi, v), i))
    if not keys:
        return Outcome(None, 0.0)
    keys.sort(reverse=True)
    winner = keys[0][1]
    best_other = keys[1][0] if len(keys) > 1 else None
    pay = threshold_payment(mech, winner, best_other)
    if pay > values[winner] + 1e-9:
        raise AssertionError(
            f"threshold {pay} above the winning value {values[winner]}"
        )
    return Outcome(winner, min(pay, values[winner]))


def run_mechanism(mech: Mechanism, values) -> Outcome:
    if isinstance(mech, AnonymousReserve):
        return run_ar(mech.r, values)
    return run_myerson(mech, values)


def myerson_iid_equals_ar(marginal: Marginal, values) -> bool:
    """With i.i.d. regular bidders and highest-value tie-breaking, the
    optimal mechanism is the second-price auction at the monopoly
    reserve; check the two outcomes coincide on this value vector."""
    n = len(values)
    mech = Myerson([marginal] * n, HIGHEST_VALUE)
    a = run_myerson(mech, values)
    b = run_ar(marginal.monopoly_reserve(), values)
    if a.winner != b.winner:
        return False
    return abs(a.payment - b.payment) <= 1e-9 * max(1.0, abs(b.payment))
