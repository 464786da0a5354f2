"""Joint priors over bidder values.

Three representations:

* ProductPrior      - mutually independent marginals.
* MixturePrior      - a finite mixture of branches; within a branch the
                      per-bidder components are independent.  A branch may
                      carry a RandomIndexSlot ("pick one bidder uniformly at
                      random, give it the chosen component, everyone else in
                      the slot the unchosen one"), which is how the
                      adversarial pairwise-independent constructions are
                      encoded without expanding n sub-branches.
* TablePrior        - explicit finite-support joint pmf.

Everything needed downstream (threshold probabilities, discretization,
independence checks, sampling) is computed branch-wise in closed form; no
construction is ever verified by sampling.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .marginals import (
    DiscretePMF,
    DomainError,
    EqualRevenue,
    Marginal,
    ShiftedEqualRevenue,
    Uniform,
)

TABLE_CELL_CAP = 100_000
KWISE_TOL = 1e-10


# ---------------------------------------------------------------------------
# Branch components


@dataclass(frozen=True)
class FullMarginal:
    marginal: Marginal

    def quantile_q(self, tau):
        return self.marginal.quantile_q(tau)

    def atom_mass(self, x):
        return self.marginal.atom_mass(x)

    @property
    def support(self):
        return self.marginal.support

    def cutoffs(self):
        return []

    def sample(self, rng, size):
        u = 1.0 - rng.random(size)
        return self.marginal.ppf_upper(u)


@dataclass(frozen=True)
class ConditionalBelow:
    """Marginal conditioned on v < cutoff (atom at the cutoff excluded)."""

    marginal: Marginal
    cutoff: float

    def __post_init__(self):
        if self.marginal.quantile_q(self.cutoff) >= 1.0:
            raise DomainError("conditioning event v < cutoff has zero probability")

    @property
    def _qc(self):
        return self.marginal.quantile_q(self.cutoff)

    def quantile_q(self, tau):
        qc = self._qc
        if tau > self.cutoff:
            return 0.0
        return (self.marginal.quantile_q(tau) - qc) / (1.0 - qc)

    def atom_mass(self, x):
        if x >= self.cutoff - 1e-15 * max(1.0, abs(self.cutoff)):
            return 0.0
        return self.marginal.atom_mass(x) / (1.0 - self._qc)

    @property
    def support(self):
        lo, hi = self.marginal.support
        return (lo, min(hi, self.cutoff))

    def cutoffs(self):
        return [self.cutoff]

    def sample(self, rng, size):
        qc = self._qc
        u = 1.0 - rng.random(size)  # in (0, 1]
        return self.marginal.ppf_upper(qc + u * (1.0 - qc))


@dataclass(frozen=True)
class ConditionalAtLeast:
    """Marginal conditioned on v >= cutoff (atom at the cutoff included)."""

    marginal: Marginal
    cutoff: float

    def __post_init__(self):
        if self.marginal.quantile_q(self.cutoff) <= 0.0:
            raise DomainError("conditioning event v >= cutoff has zero probability")

    @property
    def _qc(self):
        return self.marginal.quantile_q(self.cutoff)

    def quantile_q(self, tau):
        if tau <= self.cutoff:
            return 1.0
        return self.marginal.quantile_q(tau) / self._qc

    def atom_mass(self, x):
        if x < self.cutoff - 1e-15 * max(1.0, abs(self.cutoff)):
            return 0.0
        return self.marginal.atom_mass(x) / self._qc

    @property
    def support(self):
        lo, hi = self.marginal.support
        return (max(lo, self.cutoff), hi)

    def cutoffs(self):
        return [self.cutoff]

    def sample(self, rng, size):
        u = 1.0 - rng.random(size)
        return self.marginal.ppf_upper(u * self._qc)


@dataclass(frozen=True)
class FixedValue:
    value: float

    def quantile_q(self, tau):
        return 1.0 if tau <= self.value else 0.0

    def atom_mass(self, x):
        return 1.0 if abs(x - self.value) <= 1e-15 * max(1.0, abs(self.value)) else 0.0

    @property
    def support(self):
        return (self.value, self.value)

    def cutoffs(self):
        return [self.value]

    def sample(self, rng, size):
        return np.full(size, self.value)


Component = FullMarginal | ConditionalBelow | ConditionalAtLeast | FixedValue


def component_cell_mass(comp: Component, cell) -> float:
    """Exact probability of a grid cell.  cell = (lo, hi, singleton)."""
    lo, hi, singleton = cell
    if singleton:
        return comp.atom_mass(lo)
    return comp.quantile_q(lo) - comp.quantile_q(hi)


@dataclass(frozen=True)
class RandomIndexSlot:
    """One index in `indices` is drawn uniformly; it receives chosen[j],
    every other slot member receives unchosen[j]."""

    indices: tuple
    chosen: tuple  # component per slot position
    unchosen: tuple

    def __post_init__(self):
        if not (len(self.indices) == len(self.chosen) == len(self.unchosen)):
            raise DomainError("slot arrays must be aligned")

    def position(self, bidder):
        return self.indices.index(bidder)


@dataclass(frozen=True)
class Branch:
    weight: float
    components: tuple  # per bidder; None for slot members
    slot: RandomIndexSlot | None = None

    def __post_init__(self):
        slot_set = set(self.slot.indices) if self.slot else set()
        for i, comp in enumerate(self.components):
            if (comp is None) != (i in slot_set):
                raise DomainError(
                    f"bidder {i}: component must be None exactly when in the slot"
                )

    def subset_prob(self, bidders, probs_plain, probs_chosen):
        """Probability that every bidder in `bidders` lands in its event,
        where probs_plain[i] is the event probability under bidder i's
        plain/unchosen component and probs_chosen[i] under its chosen
        component (slot members only).  Exact closed form."""
        slot_set = set(self.slot.indices) if self.slot else set()
        in_slot = [i for i in bidders if i in slot_set]
        out_prob = 1.0
        for i in bidders:
            if i not in slot_set:
                out_prob *= probs_plain[i]
        if not self.slot:
            return out_prob
        k = len(self.slot.indices)
        un_prod = 1.0
        for i in in_slot:
            un_prod *= probs_plain[i]
        total = (k - len(in_slot)) * un_prod
        for m in in_slot:
            term = probs_chosen[m]
            for i in in_slot:
                if i != m:
                    term *= probs_plain[i]
            total += term
        return out_prob * total / k

    def bidder_event_prob(self, i, prob_plain, prob_chosen):
        """Single-bidder marginal event probability within this branch."""
        if self.slot and i in self.slot.indices:
            k = len(self.slot.indices)
            return (prob_chosen + (k - 1) * prob_plain) / k
        return prob_plain

    def component_pair(self, i):
        """(plain_or_unchosen, chosen_or_None) component for bidder i."""
        if self.slot and i in self.slot.indices:
            j = self.slot.position(i)
            return self.slot.unchosen[j], self.slot.chosen[j]
        return self.components[i], None


# ---------------------------------------------------------------------------
# Priors


@dataclass(frozen=True)
class ProductPrior:
    marginals: tuple

    def __init__(self, marginals):
        if len(marginals) < 1:
            raise DomainError("need at least one marginal")
        object.__setattr__(self, "marginals", tuple(marginals))

    @property
    def n_bidders(self):
        return len(self.marginals)


@dataclass(frozen=True)
class MixturePrior:
    marginals: tuple
    branches: tuple

    def __init__(self, marginals, branches):
        marginals = tuple(marginals)
        branches = tuple(branches)
        total = sum(b.weight for b in branches)
        if abs(total - 1.0) > 1e-12:
            raise DomainError(f"branch weights sum to {total}, not 1")
        if any(b.weight < 0 for b in branches):
            raise DomainError("branch weights must be nonnegative")
        for b in branches:
            if len(b.components) != len(marginals):
                raise DomainError("each branch needs one component slot per bidder")
        object.__setattr__(self, "marginals", marginals)
        object.__setattr__(self, "branches", branches)

    @property
    def n_bidders(self):
        return len(self.marginals)

    def marginal_quantile(self, i, tau):
        """Pr[v_i >= tau] implied by the mixture (closed form)."""
        total = 0.0
        for b in self.branches:
            plain, chosen = b.component_pair(i)
            qp = plain.quantile_q(tau)
            qc = chosen.quantile_q(tau) if chosen is not None else 0.0
            total += b.weight * b.bidder_event_prob(i, qp, qc)
        return total

    def marginal_atom(self, i, x):
        total = 0.0
        for b in self.branches:
            plain, chosen = b.component_pair(i)
            ap = plain.atom_mass(x)
            ac = chosen.atom_mass(x) if chosen is not None else 0.0
            total += b.weight * b.bidder_event_prob(i, ap, ac)
        return total


class TablePrior:
    """Explicit joint pmf on a finite product support."""

    def __init__(self, supports, pmf):
        self.supports = tuple(tuple(float(v) for v in s) for s in supports)
        pmf = np.asarray(pmf, dtype=float)
        shape = tuple(len(s) for s in self.supports)
        if pmf.shape != shape:
            pmf = pmf.reshape(shape)
        if pmf.size > TABLE_CELL_CAP:
            raise DomainError(f"table has {pmf.size} cells, cap is {TABLE_CELL_CAP}")
        if np.any(pmf < -1e-15):
            raise DomainError("pmf must be nonnegative")
        if abs(float(pmf.sum()) - 1.0) > 1e-12:
            raise DomainError(f"pmf sums to {pmf.sum()}, not 1")
        self.pmf = pmf
        for s in self.supports:
            if any(b <= a for a, b in zip(s, s[1:])):
                raise DomainError("supports must be strictly ascending")

    @property
    def n_bidders(self):
        return len(self.supports)

    def marginal_masses(self, i):
        axes = tuple(j for j in range(self.n_bidders) if j != i)
        return self.pmf.sum(axis=axes)

    def cells(self):
        """Iterate (value tuple, mass) over all cells."""
        for idx in np.ndindex(self.pmf.shape):
            yield tuple(self.supports[j][idx[j]] for j in range(self.n_bidders)), float(
                self.pmf[idx]
            )

    def to_marginals(self):
        """Per-bidder DiscretePMF of the table's own marginals."""
        out = []
        for i in range(self.n_bidders):
            masses = self.marginal_masses(i)
            keep = masses > 0
            pts = [v for v, k in zip(self.supports[i], keep) if k]
            ms = masses[keep]
            out.append(DiscretePMF(pts, (ms / ms.sum()).tolist()))
        return out


JointPrior = ProductPrior | MixturePrior | TablePrior


def product_prior(marginals) -> ProductPrior:
    return ProductPrior(marginals)


def _as_mixture(prior: ProductPrior) -> MixturePrior:
    comps = tuple(FullMarginal(m) for m in prior.marginals)
    return MixturePrior(prior.marginals, (Branch(1.0, comps),))


# ---------------------------------------------------------------------------
# Adversarial constructions


def myerson_counterexample(n: int, eps: float) -> MixturePrior:
    """Pairwise-independent prior on n+1 bidders under which the optimal
    (virtual-value-maximising) mechanism collapses to O(1) revenue while the
    product prior with the same marginals yields Omega(n).

    Marginals: bidders 0..n-1 equal-revenue on [1/n, 1]; bidder n a
    shifted equal-revenue on [n + eps, n^2 + eps].
    """
    if n < 2:
        raise DomainError("need n >= 2")
    if eps <= 0:
        raise DomainError("need eps > 0")
    small = EqualRevenue(1.0 / n, 1.0)
    big = ShiftedEqualRevenue(float(n), float(n * n), eps)
    marginals = tuple([small] * n + [big])
    top = n * n + eps
    below_one = ConditionalBelow(small, 1.0)

    b1 = Branch(
        1.0 / n**2,
        tuple([FixedValue(1.0)] * n + [FixedValue(top)]),
    )
    b2 = Branch(
        1.0 / n - 1.0 / n**2,
        tuple([below_one] * n + [FixedValue(top)]),
    )
    slot = RandomIndexSlot(
        indices=tuple(range(n)),
        chosen=tuple([FixedValue(1.0)] * n),
        unchosen=tuple([below_one] * n),
    )
    b3 = Branch(
        1.0 - 1.0 / n,
        tuple([None] * n + [ConditionalBelow(big, top)]),
        slot=slot,
    )
    return MixturePrior(marginals, (b1, b2, b3))


def uniform_q2_counterexample(n: int) -> MixturePrior:
    """Pairwise-independent prior on n+1 Uniform[0,1] bidders whose
    probability of two bidders clearing (n-1)/n is 1/n^2, versus a constant
    under the product prior."""
    if n < 2:
        raise DomainError("need n >= 2")
    uni = Uniform(0.0, 1.0)
    cut = (n - 1.0) / n
    marginals = tuple([uni] * (n + 1))
    high = ConditionalAtLeast(uni, cut)
    low = ConditionalBelow(uni, cut)

    b1 = Branch(1.0 / n**2, tuple([high] * (n + 1)))
    slot = RandomIndexSlot(
        indices=tuple(range(n + 1)),
        chosen=tuple([high] * (n + 1)),
        unchosen=tuple([low] * (n + 1)),
    )
    b2 = Branch(1.0 - 1.0 / n**2, tuple([None] * (n + 1)), slot=slot)
    return MixturePrior(marginals, (b1, b2))


# ---------------------------------------------------------------------------
# Sampling


def sample(prior: JointPrior, seed, size=None) -> np.ndarray:
    """Draw from the prior; deterministic for a fixed seed.  Returns an
    (size, n) matrix, or a single length-n vector when size is None."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    m = 1 if size is None else int(size)
    if isinstance(prior, ProductPrior):
        cols = [comp.sample(rng, m) for comp in (FullMarginal(mg) for mg in prior.marginals)]
        out = np.column_stack(cols)
    elif isinstance(prior, TablePrior):
        flat = prior.pmf.ravel()
        idx = rng.choice(flat.size, size=m, p=flat / flat.sum())
        multi = np.unravel_index(idx, prior.pmf.shape)
        out = np.column_stack(
            [np.asarray(prior.supports[j])[multi[j]] for j in range(prior.n_bidders)]
        )
    else:
        n = prior.n_bidders
        weights = np.array([b.weight for b in prior.branches])
        branch_idx = rng.choice(len(weights), size=m, p=weights / weights.sum())
        out = np.empty((m, n))
        for bi, branch in enumerate(prior.branches):
            rows = np.nonzero(branch_idx == bi)[0]
            if rows.size == 0:
                continue
            if branch.slot:
                pick = rng.integers(0, len(branch.slot.indices), size=rows.size)
            for i in range(n):
                plain, chosen = branch.component_pair(i)
                vals = plain.sample(rng, rows.size)
                if chosen is not None:
                    mine = pick == branch.slot.position(i)
                    if np.any(mine):
                        vals = np.where(mine, chosen.sample(rng, rows.size), vals)
                out[rows, i] = vals
    return out[0] if size is None else out


# ---------------------------------------------------------------------------
# Grids and discretization


def _bidder_components(prior: MixturePrior, i):
    comps = []
    for b in prior.branches:
        plain, chosen = b.component_pair(i)
        comps.append(plain)
        if chosen is not None:
            comps.append(chosen)
    return comps


def natural_grids(prior: JointPrior):
    """Per-bidder grid boundaries: support endpoints, every marginal atom,
    and every branch cutoff / fixed value.  Exact discretization of the
    shipped constructions needs nothing finer."""
    if isinstance(prior, TablePrior):
        return [sorted(s) for s in prior.supports]
    mix = _as_mixture(prior) if isinstance(prior, ProductPrior) else prior
    grids = []
    for i, mg in enumerate(mix.marginals):
        lo, hi = mg.support
        pts = {lo, hi}
        pts.update(mg.atoms())
        for comp in _bidder_components(mix, i):
            pts.update(comp.cutoffs())
        grids.append(sorted(pts))
    return grids


def _grid_cells(grid):
    """Cells for one bidder: half-open [b_j, b_{j+1}) plus a singleton at the
    top boundary.  cell = (lo, hi, singleton)."""
    cells = [(a, b, False) for a, b in zip(grid, grid[1:])]
    cells.append((grid[-1], grid[-1], True))
    return cells


def _check_grid(prior_mix: MixturePrior, grids):
    for i, mg in enumerate(prior_mix.marginals):
        g = set(grids[i])
        lo, hi = mg.support
        if min(grids[i]) > lo + 1e-12 or max(grids[i]) < hi - 1e-12:
            raise DomainError(f"grid for bidder {i} does not cover the support")
        for a in mg.atoms():
            if not any(abs(a - x) <= 1e-12 * max(1.0, abs(a)) for x in g):
                raise DomainError(f"grid for bidder {i} misses atom at {a}")
        for comp in _bidder_components(prior_mix, i):
            for c in comp.cutoffs():
                if not any(abs(c - x) <= 1e-12 * max(1.0, abs(c)) for x in g):
                    raise DomainError(f"grid for bidder {i} misses cutoff {c}")


def _kept_cells(mix: MixturePrior, grids):
    """Per bidder: list of cells with positive mixture-marginal mass, plus
    the vector of those masses."""
    kept, masses = [], []
    for i in range(mix.n_bidders):
        cells = _grid_cells(grids[i])
        cmass = []
        for cell in cells:
            if cell[2]:
                cmass.append(mix.marginal_atom(i, cell[0]))
            else:
                cmass.append(
                    mix.marginal_quantile(i, cell[0]) - mix.marginal_quantile(i, cell[1])
                )
        keep = [c for c, w in zip(cells, cmass) if w > 1e-15]
        kept.append(keep)
        masses.append(np.array([w for w in cmass if w > 1e-15]))
    return kept, masses


def discretize(prior: JointPrior, grids=None) -> TablePrior:
    """Exact finite table of the prior on the given grids (closed-form cell
    masses per branch, no sampling).  The cell representative is the cell's
    lower endpoint; the top grid boundary becomes a singleton cell so atoms
    stay separated."""
    if isinstance(prior, TablePrior):
        return prior
    mix = _as_mixture(prior) if isinstance(prior, ProductPrior) else prior
    if grids is None:
        grids = natural_grids(mix)
    _check_grid(mix, grids)
    kept, _ = _kept_cells(mix, grids)
    shape = tuple(len(c) for c in kept)
    if math.prod(shape) > TABLE_CELL_CAP:
        raise DomainError(f"discretization would need {math.prod(shape)} cells")
    n = mix.n_bidders
    pmf = np.zeros(shape)
    for branch in mix.branches:
        plain_vecs, chosen_vecs = [], []
        for i in range(n):
            plain, chosen = branch.component_pair(i)
            plain_vecs.append(np.array([component_cell_mass(plain, c) for c in kept[i]]))
            chosen_vecs.append(
                np.array([component_cell_mass(chosen, c) for c in kept[i]])
                if chosen is not None
                else None
            )

        def outer(vectors):
            out = vectors[0]
            for v in vectors[1:]:
                out = np.multiply.outer(out, v)
            return out

        if branch.slot is None:
            pmf += branch.weight * outer(plain_vecs)
        else:
            k = len(branch.slot.indices)
            acc = np.zeros(shape)
            for m_idx in branch.slot.indices:
                vecs = [
                    chosen_vecs[i] if i == m_idx else plain_vecs[i] for i in range(n)
                ]
                acc += outer(vecs)
            pmf += branch.weight * acc / k
    supports = [tuple(c[0] for c in kc) for kc in kept]
    return TablePrior(supports, pmf)


# ---------------------------------------------------------------------------
# Threshold probabilities


def q1q2_from_qvec(qs) -> tuple:
    """(Pr[at least one above], Pr[at least two above]) for independent
    events with probabilities qs; certain events handled by factoring."""
    qs = np.asarray(qs, dtype=float)
    ones = qs >= 1.0 - 1e-15
    n_ones = int(ones.sum())
    if n_ones >= 2:
        return 1.0, 1.0
    rest = qs[~ones]
    rest = rest[rest > 0.0]
    log_prod = np.prod(1.0 - rest)
    q1_rest = 1.0 - log_prod
    ratio = rest / (1.0 - rest)
    q2_rest = 1.0 - log_prod * (1.0 + float(ratio.sum()))
    if n_ones == 1:
        return 1.0, q1_rest
    return float(q1_rest), float(max(q2_rest, 0.0))


def threshold_probs(prior: JointPrior, tau: float) -> tuple:
    """Exact (Q1, Q2) = Pr[>=1 value >= tau], Pr[>=2 values >= tau]."""
    if isinstance(prior, ProductPrior):
        return q1q2_from_qvec([m.quantile_q(tau) for m in prior.marginals])
    if isinstance(prior, TablePrior):
        counts = np.zeros(prior.pmf.shape, dtype=int)
        for j, s in enumerate(prior.supports):
            above = (np.asarray(s) >= tau).astype(int)
            shape = [1] * prior.n_bidders
            shape[j] = len(s)
            counts = counts + above.reshape(shape)
        q1 = float(prior.pmf[counts >= 1].sum())
        q2 = float(prior.pmf[counts >= 2].sum())
        return q1, q2
    q1 = q2 = 0.0
    n = prior.n_bidders
    for branch in prior.branches:
        pairs = [branch.component_pair(i) for i in range(n)]
        q_plain = np.array([p.quantile_q(tau) for p, _ in pairs])
        if branch.slot is None:
            b1, b2 = q1q2_from_qvec(q_plain)
        else:
            k = len(branch.slot.indices)
            b1 = b2 = 0.0
            for m_idx in branch.slot.indices:
                qs = q_plain.copy()
                qs[m_idx] = pairs[m_idx][1].quantile_q(tau)
                t1, t2 = q1q2_from_qvec(qs)
                b1 += t1 / k
                b2 += t2 / k
        q1 += branch.weight * b1
        q2 += branch.weight * b2
    return q1, q2


# ---------------------------------------------------------------------------
# k-wise independence verification


@dataclass
class KwiseViolation:
    bidders: tuple
    cells: tuple  # cell representative values
    joint: float
    product: float
    deviation: float


@dataclass
class KwiseReport:
    k: int
    max_deviation: float
    passed: bool
    violations: list
    n_checked: int
    tolerance: float = KWISE_TOL


_MAX_RECORDED = 50


def _bidder_class_key(mix: MixturePrior, i):
    parts = [mix.marginals[i]]
    for bi, b in enumerate(mix.branches):
        if b.slot and i in b.slot.indices:
            j = b.slot.position(i)
            parts.append((bi, "slot", b.slot.chosen[j], b.slot.unchosen[j]))
        else:
            parts.append((bi, b.components[i]))
    return tuple(parts)


def verify_kwise(prior: JointPrior, k: int, grids=None) -> KwiseReport:
    """Check |Pr_joint - prod Pr_marginal| over every bidder subset of size
    <= k and every grid-cell combination.

    Exchangeable bidders (identical marginal and identical per-branch
    components) are grouped, so the check is exhaustive over subsets while
    the work is exhaustive only over equivalence classes; the shipped
    constructions have two classes regardless of n.
    """
    if isinstance(prior, TablePrior):
        return _verify_kwise_table(prior, k)
    mix = _as_mixture(prior) if isinstance(prior, ProductPrior) else prior
    n = mix.n_bidders
    if not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= {n}, got k={k}")
    if grids is None:
        grids = natural_grids(mix)
    _check_grid(mix, grids)
    kept, kept_mass = _kept_cells(mix, grids)

    classes = {}
    for i in range(n):
        classes.setdefault(_bidder_class_key(mix, i), []).append(i)
    class_members = list(classes.values())

    max_dev = 0.0
    violations = []
    n_checked = 0
    for size in range(1, k + 1):
        for combo in itertools.combinations_with_replacement(
            range(len(class_members)), size
        ):
            counts = {c: combo.count(c) for c in set(combo)}
            if any(counts[c] > len(class_members[c]) for c in counts):
                continue
            reps = []
            for c in set(combo):
                reps.extend(class_members[c][: counts[c]])
            reps = tuple(sorted(reps))
            multiplicity = 1
            for c in counts:
                multiplicity *= math.comb(len(class_members[c]), counts[c])
            for cell_idx in itertools.product(*[range(len(kept[i])) for i in reps]):
                plain = {}
                chosen = {}
                prod = 1.0
                for i, ci in zip(reps, cell_idx):
                    cell = kept[i][ci]
                    prod *= kept_mass[i][ci]
                    plain[i], chosen[i] = _cell_probs_for(mix, i, cell)
                joint = 0.0
                for bi, b in enumerate(mix.branches):
                    p_plain = {i: plain[i][bi] for i in reps}
                    p_chosen = {i: chosen[i][bi] for i in reps}
                    joint += b.weight * b.subset_prob(reps, p_plain, p_chosen)
                dev = abs(joint - prod)
                n_checked += multiplicity
                if dev > max_dev:
                    max_dev = dev
                if dev > KWISE_TOL and len(violations) < _MAX_RECORDED:
                    violations.append(
                        KwiseViolation(
                            reps,
                            tuple(kept[i][ci][0] for i, ci in zip(reps, cell_idx)),
                            joint,
                            prod,
                            dev,
                        )
                    )
    return KwiseReport(k, max_dev, max_dev <= KWISE_TOL, violations, n_checked)


def _cell_probs_for(mix: MixturePrior, i, cell):
    """Per-branch (plain, chosen) probabilities of bidder i's cell."""
    plains, chosens = [], []
    for b in mix.branches:
        plain, chosen = b.component_pair(i)
        plains.append(component_cell_mass(plain, cell))
        chosens.append(component_cell_mass(chosen, cell) if chosen is not None else 0.0)
    return plains, chosens


def _verify_kwise_table(table: TablePrior, k: int) -> KwiseReport:
    n = table.n_bidders
    if not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= {n}, got k={k}")
    marg = [table.marginal_masses(i) for i in range(n)]
    max_dev = 0.0
    violations = []
    n_checked = 0
    for size in range(1, k + 1):
        for subset in itertools.combinations(range(n), size):
            axes = tuple(j for j in range(n) if j not in subset)
            joint = table.pmf.sum(axis=axes) if axes else table.pmf
            prod = marg[subset[0]]
            for i in subset[1:]:
                prod = np.multiply.outer(prod, marg[i])
            dev = np.abs(joint - prod)
            n_checked += dev.size
            local = float(dev.max())
            if local > max_dev:
                max_dev = local
            if local > KWISE_TOL:
                for idx in zip(*np.nonzero(dev > KWISE_TOL)):
                    if len(violations) >= _MAX_RECORDED:
                        break
                    violations.append(
                        KwiseViolation(
                            subset,
                            tuple(table.supports[i][j] for i, j in zip(subset, idx)),
                            float(joint[idx]),
                            float(prod[idx]),
                            float(dev[idx]),
                        )
                    )
    return KwiseReport(k, max_dev, max_dev <= KWISE_TOL, violations, n_checked)
