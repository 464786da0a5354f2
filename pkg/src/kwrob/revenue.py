"""Expected-revenue evaluation.

Exact paths:

* tables        - enumerate support cells.
* products      - per-bidder independent distributions; AR revenue via the
                  identity AR(r) = r Q1(r) + integral of Q2 above r, the
                  optimal mechanism via an exact sweep over the global
                  "competing key" grid (see _myerson_product_revenue).
* mixtures      - branch-wise: within a branch the components are
                  independent, so each branch reduces to a product instance.

Monte Carlo is block-seeded and bit-for-bit reproducible for a fixed
(seed, block size).  The ex-ante relaxation quantities (threshold level,
per-bidder prices/probabilities/revenues) and the associated robustness
predicates live here as well.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .marginals import DiscretePMF, DomainError, Marginal, revenue_at_quantile
from .mechanisms import (
    HIGHEST_VALUE,
    AnonymousReserve,
    Mechanism,
    Myerson,
    ironed_phi,
    run_mechanism,
    threshold_payment,
)
from .priors import (
    Branch,
    JointPrior,
    MixturePrior,
    ProductPrior,
    TablePrior,
    _as_mixture,
    _grid_cells,
    component_cell_mass,
    natural_grids,
    q1q2_from_qvec,
    sample,
    threshold_probs,
)
from .quadrature import integrate

Z_95 = 1.959963984540054  # two-sided 95% normal quantile


@dataclass(frozen=True)
class RevenueEstimate:
    mean: float
    half_width_95: float
    n_samples: int
    exact: bool

    def to_dict(self):
        return {
            "mean": self.mean,
            "half_width_95": self.half_width_95,
            "n_samples": self.n_samples,
            "exact": self.exact,
        }


# ---------------------------------------------------------------------------
# Exact revenue


def revenue_exact_table(table: TablePrior, mech: Mechanism) -> RevenueEstimate:
    total = 0.0
    for values, mass in table.cells():
        if mass == 0.0:
            continue
        total += mass * run_mechanism(mech, values).payment
    return RevenueEstimate(total, 0.0, 0, True)


def _ar_product_revenue(dists, r):
    """Exact AR(r) revenue for independent discrete per-bidder value
    distributions [(values, probs), ...]."""
    points = sorted({v for vals, _ in dists for v in vals if v > r})

    def qvec(tau):
        return [float(probs[np.asarray(vals) >= tau].sum()) for vals, probs in dists]

    q1_r, _ = q1q2_from_qvec(qvec(r))
    total = r * q1_r
    prev = r
    for t in points:
        _, q2 = q1q2_from_qvec(qvec(t))
        total += (t - prev) * q2
        prev = t
    return total


def _myerson_product_revenue(mech: Myerson, dists):
    """Exact expected revenue of the virtual-value mechanism when bidder i's
    value is drawn independently from the discrete distribution dists[i]
    (which need not equal the marginal the mechanism was designed for -
    that is the whole point when evaluating adversarial mixtures).

    Sweep: sort every (bidder, support value) pair by its allocation key.
    Conditional on the strongest competing key kappa, bidder i wins iff its
    own key beats kappa and then pays the threshold t_i(kappa), which is a
    deterministic function of kappa.  Independence turns the expectation
    into a sum over the key grid weighted by leave-one-out products of
    per-bidder key CDFs.
    """
    n = len(dists)
    entries = []  # (key, bidder, prob)
    bottom = np.zeros(n)  # Pr[ineligible]
    for i, (vals, probs) in enumerate(dists):
        m = mech.marginals[i]
        for v, p in zip(vals, probs):
            if p == 0.0:
                continue
            phi = ironed_phi(m, float(v))
            if phi < 0.0:
                bottom[i] += p
            else:
                if mech.tie_break == HIGHEST_VALUE:
                    key = (phi, float(v), -i)
                else:
                    key = (phi, -i)
                entries.append((key, i, p))
    entries.sort(key=lambda e: e[0])
    # equal keys can only arise within one bidder (the index is part of the
    # key): e.g. an ironed-flat discrete marginal under lex tie-breaking.
    # Merge them so the key grid is strictly increasing.
    merged = []
    for key, i, p in entries:
        if merged and merged[-1][0] == key:
            merged[-1][2] += p
        else:
            merged.append([key, i, p])
    entries = [(k, i, p) for k, i, p in merged]
    N = len(entries)
    if N == 0:
        return 0.0

    # C[i, t] = Pr[bidder i's key is ineligible or <= key_t]
    C = np.tile(bottom[:, None], (1, N))
    bump = np.zeros((n, N))
    for t, (_, i, p) in enumerate(entries):
        bump[i, t] = p
    C += np.cumsum(bump, axis=1)

    # leave-one-out products over bidders, per key column
    prefix = np.ones((n + 1, N))
    for i in range(n):
        prefix[i + 1] = prefix[i] * C[i]
    suffix = np.ones((n + 1, N))
    for i in range(n - 1, -1, -1):
        suffix[i] = suffix[i + 1] * C[i]
    loo = prefix[:n] * suffix[1:]  # loo[i, t] = prod_{j != i} C[j, t]

    bot_prefix = np.ones(n + 1)
    for i in range(n):
        bot_prefix[i + 1] = bot_prefix[i] * bottom[i]
    bot_suffix = np.ones(n + 1)
    for i in range(n - 1, -1, -1):
        bot_suffix[i] = bot_suffix[i + 1] * bottom[i]
    loo_bottom = bot_prefix[:n] * bot_suffix[1:]  # no eligible competitor

    total = 0.0
    for i in range(n):
        win_none = 1.0 - bottom[i]  # Pr[bidder i is eligible at all]
        if loo_bottom[i] > 0.0 and win_none > 0.0:
            t0 = threshold_payment(mech, i, None)
            total += loo_bottom[i] * t0 * win_none
        prev = loo_bottom[i]
        for t in range(N):
            p_eq = loo[i, t] - prev
            prev = loo[i, t]
            if p_eq <= 1e-18:
                continue
            win = 1.0 - C[i, t]
            if win <= 0.0:
                continue
            thr = threshold_payment(mech, i, entries[t][0])
            if not math.isfinite(thr):
                continue
            total += p_eq * thr * win
    return total


def _branch_dists(mix: MixturePrior, branch: Branch, grids, chosen_idx=None):
    """Per-bidder (values, probs) after discretizing the branch components
    on the grids; chosen_idx picks the slot member that gets the chosen
    component."""
    dists = []
    for i in range(mix.n_bidders):
        plain, chosen = branch.component_pair(i)
        comp = chosen if (chosen is not None and i == chosen_idx) else plain
        cells = _grid_cells(grids[i])
        vals, probs = [], []
        for cell in cells:
            w = component_cell_mass(comp, cell)
            if w > 1e-18:
                vals.append(cell[0])
                probs.append(w)
        dists.append((np.array(vals), np.array(probs)))
    return dists


def _slot_members_identical(mix: MixturePrior, branch: Branch):
    slot = branch.slot
    keys = {
        (mix.marginals[i], slot.chosen[j], slot.unchosen[j])
        for j, i in enumerate(slot.indices)
    }
    return len(keys) == 1


def revenue_exact(prior: JointPrior, mech: Mechanism, grids=None) -> RevenueEstimate:
    """Exact expected revenue.

    AR on product/mixture priors is exact for the continuous prior (closed
    form Q1/Q2 plus the revenue integral).  The optimal mechanism on
    product/mixture priors is evaluated exactly on the grid discretization
    (cell representatives at lower endpoints); on the shipped constructions
    the two coincide because virtual values are constant within cells.
    """
    if isinstance(prior, TablePrior):
        return revenue_exact_table(prior, mech)
    mix = _as_mixture(prior) if isinstance(prior, ProductPrior) else prior
    if grids is None:
        grids = natural_grids(mix)

    if isinstance(mech, AnonymousReserve):
        hi = max(m.support[1] for m in mix.marginals)
        breaks = sorted({b for g in grids for b in g})

        def q2(tau):
            return threshold_probs(mix, tau)[1]

        q1_r = threshold_probs(mix, mech.r)[0]
        tail = integrate(q2, mech.r, hi, abs_tol=1e-10, breakpoints=breaks)
        return RevenueEstimate(mech.r * q1_r + tail, 0.0, 0, True)

    total = 0.0
    for branch in mix.branches:
        if branch.weight == 0.0:
            continue
        if branch.slot is None:
            rev = _myerson_product_revenue(mech, _branch_dists(mix, branch, grids))
        elif _slot_members_identical(mix, branch):
            idx = branch.slot.indices[0]
            rev = _myerson_product_revenue(
                mech, _branch_dists(mix, branch, grids, chosen_idx=idx)
            )
        else:
            k = len(branch.slot.indices)
            rev = (
                sum(
                    _myerson_product_revenue(
                        mech, _branch_dists(mix, branch, grids, chosen_idx=idx)
                    )
                    for idx in branch.slot.indices
                )
                / k
            )
        total += branch.weight * rev
    return RevenueEstimate(total, 0.0, 0, True)


def posted_price_lower_bound(marginals) -> float:
    """max_i r*_i q_i(r*_i): selling to one bidder at their monopoly reserve
    is a truthful mechanism, so this lower-bounds the optimal revenue under
    the independent prior."""
    return max(m.monopoly_reserve() * m.quantile_q(m.monopoly_reserve()) for m in marginals)


# ---------------------------------------------------------------------------
# Monte Carlo


def _ar_payments(r, V):
    if V.shape[1] == 1:
        v = V[:, 0]
        return np.where(v >= r, r, 0.0)
    part = np.partition(V, V.shape[1] - 2, axis=1)
    top = part[:, -1]
    second = part[:, -2]
    return np.where(top >= r, np.maximum(r, second), 0.0)


def _myerson_payments(mech: Myerson, V):
    """Vectorised batch evaluation: track the best and second-best
    allocation keys per row, then apply the per-marginal threshold formulas
    to the winners."""
    rows, n = V.shape
    NEG = -np.inf
    b_phi = np.full(rows, NEG)
    b_val = np.zeros(rows)
    b_idx = np.full(rows, -1)
    s_phi = np.full(rows, NEG)
    s_val = np.zeros(rows)
    s_idx = np.full(rows, -1)
    phis = np.empty((rows, n))
    for i, m in enumerate(mech.marginals):
        phi = np.where(
            np.asarray(m.virtual_value_vec(V[:, i]), dtype=float) >= 0.0,
            m.virtual_value_vec(V[:, i]),
            NEG,
        )
        phis[:, i] = phi
        v = V[:, i]
        if mech.tie_break == HIGHEST_VALUE:
            beats_best = (phi > b_phi) | ((phi == b_phi) & (v > b_val) & (phi > NEG))
            beats_second = (phi > s_phi) | ((phi == s_phi) & (v > s_val) & (phi > NEG))
        else:
            beats_best = phi > b_phi
            beats_second = phi > s_phi
        # demote old best where the newcomer takes over
        s_phi = np.where(beats_best, b_phi, np.where(beats_second, phi, s_phi))
        s_val = np.where(beats_best, b_val, np.where(beats_second, v, s_val))
        s_idx = np.where(beats_best, b_idx, np.where(beats_second, i, s_idx))
        b_phi = np.where(beats_best, phi, b_phi)
        b_val = np.where(beats_best, v, b_val)
        b_idx = np.where(beats_best, i, b_idx)

    pay = np.zeros(rows)
    for i, m in enumerate(mech.marginals):
        mask = b_idx == i
        if not mask.any():
            continue
        t0 = m.phi_geq_inv(0.0)
        phi_star = s_phi[mask]
        has_comp = phi_star > NEG
        t_strict = _phi_gt_inv_vec(m, phi_star)
        t_geq = _phi_geq_inv_vec(m, phi_star)
        if mech.tie_break == HIGHEST_VALUE:
            t_tie = np.maximum(t_geq, s_val[mask])
        else:
            t_tie = np.where(i < s_idx[mask], t_geq, np.inf)
        thr = np.maximum(t0, np.minimum(t_strict, t_tie))
        pay[mask] = np.where(has_comp, thr, t0)
    return pay


def _phi_geq_inv_vec(m: Marginal, y):
    out = np.array([m.phi_geq_inv(float(x)) for x in np.atleast_1d(y)], dtype=object)
    return np.array([np.inf if v is None else v for v in out], dtype=float)


def _phi_gt_inv_vec(m: Marginal, y):
    out = np.array([m.phi_gt_inv(float(x)) for x in np.atleast_1d(y)], dtype=object)
    return np.array([np.inf if v is None else v for v in out], dtype=float)


def mechanism_payments(mech: Mechanism, V) -> np.ndarray:
    V = np.asarray(V, dtype=float)
    if isinstance(mech, AnonymousReserve):
        return _ar_payments(mech.r, V)
    return _myerson_payments(mech, V)


def revenue_mc(
    prior: JointPrior,
    mech: Mechanism,
    n_samples: int,
    seed: int,
    block_size: int = 1 << 16,
    threads: int = 1,
) -> RevenueEstimate:
    """Monte Carlo revenue with a 95% normal CI.  Blocks get independent
    generators seeded by (seed, block index); sums are reduced in block
    order, so results are bit-for-bit reproducible for a fixed seed and
    block size regardless of thread count."""
    if n_samples < 1:
        raise DomainError("n_samples must be >= 1")
    n_blocks = (n_samples + block_size - 1) // block_size

    def one_block(b):
        m = min(block_size, n_samples - b * block_size)
        rng = np.random.default_rng([seed, b])
        V = sample(prior, rng, size=m)
        pays = mechanism_payments(mech, V)
        return float(pays.sum()), float((pays * pays).sum())

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_block, range(n_blocks)))
    else:
        results = [one_block(b) for b in range(n_blocks)]
    s = sum(r[0] for r in results)
    ss = sum(r[1] for r in results)
    mean = s / n_samples
    var = max(ss / n_samples - mean * mean, 0.0)
    sd = math.sqrt(var * n_samples / max(n_samples - 1, 1))
    return RevenueEstimate(mean, Z_95 * sd / math.sqrt(n_samples), n_samples, False)


# ---------------------------------------------------------------------------
# Independent-prior threshold probabilities (closed forms)


def q1_ind(marginals, tau: float) -> float:
    return q1q2_from_qvec([m.quantile_q(tau) for m in marginals])[0]


def q2_ind(marginals, tau: float) -> float:
    return q1q2_from_qvec([m.quantile_q(tau) for m in marginals])[1]


def q2_ind_from_q(qs) -> float:
    return q1q2_from_qvec(qs)[1]


def ar_revenue_integral(r, q1, q2, hi, breakpoints=(), abs_tol=1e-9) -> float:
    """AR revenue from its integral representation: r Q1(r) plus the
    integral of Q2 over [r, hi]."""
    head = r * q1(r)
    if r >= hi:
        return head
    return head + integrate(q2, r, hi, abs_tol=abs_tol, breakpoints=breakpoints)


# ---------------------------------------------------------------------------
# Ex-ante relaxation quantities


@dataclass(frozen=True)
class ExAnteSummary:
    tau_ex: float
    v_bar: tuple
    q: tuple
    rev: tuple
    r_ex: float
    s0: float
    budget: float

    @property
    def total_rev(self):
        return float(sum(self.rev))


def _phi_mass_at(m: Marginal, nu: float) -> float:
    return sum(w for lvl, w in m.phi_levels() if abs(lvl - nu) <= 1e-12 * max(1.0, abs(lvl), abs(nu)))


def _snap(x, candidates, tol):
    for c in candidates:
        if abs(x - c) <= tol * max(1.0, abs(c)):
            return c
    return x


def ex_ante_level(marginals, budget: float = 0.5) -> ExAnteSummary:
    """Virtual-value level of the ex-ante relaxation that sells `budget`
    units in expectation.

    tau_ex = inf{nu : sum_i Pr[phi_i(v_i) >= nu] <= budget}.  When a
    probability atom at the critical level makes the sum jump across the
    budget, the atoms are scaled by a common factor so the selling
    probabilities add up to the budget exactly (randomized demotion of the
    borderline types).  Selling never goes below the monopoly reserves: for
    tau_ex < 0 the relaxation simply keeps the budget slack, since serving
    negative virtual values only loses revenue.
    """
    if not 0.0 < budget <= 1.0:
        raise DomainError("budget must be in (0, 1]")
    marginals = list(marginals)

    def S(nu):
        return sum(m.prob_phi_geq(nu) for m in marginals)

    levels = sorted({lvl for m in marginals for lvl, _ in m.phi_levels()})
    lo = min([m.virtual_value(m.support[0]) if not isinstance(m, DiscretePMF) else m.ironed.phi[0] for m in marginals] + levels + [0.0]) - 1.0
    hi = max(m.support[1] for m in marginals) + 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if S(mid) <= budget:
            hi = mid
        else:
            lo = mid
    tau_ex = _snap(hi, levels, 1e-9)
    if S(tau_ex) > budget + 1e-12 and tau_ex not in levels:
        tau_ex = hi  # keep the bisection point when no atom explains the jump

    lam = max(tau_ex, 0.0)
    q_at = [m.prob_phi_geq(lam) for m in marginals]
    if tau_ex >= 0.0 and S(lam) > budget + 1e-12:
        q_above = [m.prob_phi_geq(lam) - _phi_mass_at(m, lam) for m in marginals]
        atom = [a - b for a, b in zip(q_at, q_above)]
        total_atom = sum(atom)
        theta = (budget - sum(q_above)) / total_atom if total_atom > 0 else 0.0
        qs = [a + theta * b for a, b in zip(q_above, atom)]
    else:
        qs = q_at
    v_bar = []
    for m in marginals:
        v = m.phi_geq_inv(lam)
        v_bar.append(m.support[1] if v is None else v)
    # rev_i is the ex-ante revenue extracted from bidder i at quantity q_i:
    # the hull value of the revenue-quantile curve.  On continuous regular
    # marginals (and at top atoms) it equals v_bar_i * q_i; with interior
    # atoms the hull chord prices the demotion lottery correctly where the
    # single posted price v_bar_i would undervalue it.
    revs = [revenue_at_quantile(m, q) for m, q in zip(marginals, qs)]

    # r_ex = sup{v : sum_i q_i(v) >= 1};  s0 = expected count strictly above
    atoms = sorted({a for m in marginals for a in m.atoms()})

    def G(v):
        return sum(m.quantile_q(v) for m in marginals)

    glo = min(m.support[0] for m in marginals) - 1.0
    ghi = max(m.support[1] for m in marginals) + 1.0
    for _ in range(200):
        mid = 0.5 * (glo + ghi)
        if G(mid) >= 1.0:
            glo = mid
        else:
            ghi = mid
    r_ex = _snap(glo, atoms + [m.support[0] for m in marginals] + [m.support[1] for m in marginals], 1e-9)
    if G(r_ex) < 1.0 - 1e-12:
        r_ex = glo
    s0 = sum(m.quantile_q(r_ex) - m.atom_mass(r_ex) for m in marginals)
    return ExAnteSummary(tau_ex, tuple(v_bar), tuple(qs), tuple(revs), r_ex, s0, budget)


# ---------------------------------------------------------------------------
# Robustness predicates for the optimal mechanism under 3-wise priors


@dataclass
class ThreeWiseReport:
    myer_adv: float
    myer_ind: float
    relax_lhs: float  # 2 * sum_i rev_i
    relax_ok: bool
    case: str
    case_constant: float
    case_ok: bool
    global_constant: float
    global_ok: bool
    summary: ExAnteSummary


CASE_CONSTANTS = {"case1": 2.0, "case2.1": 32.0, "case2.2a": 64.0, "case2.2b": 64.0 / 3.0}
GLOBAL_CONSTANT = 64.0


def myerson_ind_revenue(marginals, grids=None) -> float:
    """Exact optimal revenue under the mutually independent prior.

    Discrete marginals go through the product sweep.  Identical regular
    continuous marginals use the equivalence with the reserve auction at the
    monopoly price (exact via the revenue integral).  Anything else needs an
    explicit discretization from the caller.
    """
    marginals = list(marginals)
    if all(isinstance(m, DiscretePMF) for m in marginals):
        mech = Myerson(marginals, HIGHEST_VALUE)
        return revenue_exact(ProductPrior(marginals), mech, grids=grids).mean
    first = marginals[0]
    if all(m == first for m in marginals):
        from .marginals import check_regular

        if not check_regular(first):
            raise DomainError("identical continuous marginals must be regular")
        prior = ProductPrior(marginals)
        return revenue_exact(prior, AnonymousReserve(first.monopoly_reserve())).mean
    raise DomainError(
        "exact independent optimum needs discrete marginals or identical "
        "regular ones; discretize first"
    )


def check_3wise_inequalities(marginals, prior: JointPrior, grids=None) -> ThreeWiseReport:
    """Evaluate, exactly, the chain certifying 3-wise robustness of the
    optimal mechanism on this instance: the ex-ante relaxation upper bound
    (2 sum rev_i >= optimal independent revenue), the per-case constant
    (cases split on the budget level's sign, the largest selling
    probability, and its revenue share), and the global factor 64."""
    from .priors import verify_kwise

    marginals = list(marginals)
    if not isinstance(prior, ProductPrior):
        report = verify_kwise(prior, k=min(3, _n_bidders(prior)), grids=grids)
        if not report.passed:
            raise DomainError(
                f"prior is not 3-wise independent (max deviation {report.max_deviation})"
            )
    myer_ind = myerson_ind_revenue(marginals, grids=grids)
    if isinstance(prior, ProductPrior):
        myer_adv = myer_ind
    else:
        mech = Myerson(marginals, HIGHEST_VALUE)
        myer_adv = revenue_exact(prior, mech, grids=grids).mean
    ea = ex_ante_level(marginals, 0.5)

    relax_lhs = 2.0 * ea.total_rev
    relax_ok = relax_lhs >= myer_ind - 1e-9

    if ea.tau_ex <= 0.0:
        case = "case1"
    else:
        imax = max(range(len(marginals)), key=lambda i: ea.q[i])
        if ea.q[imax] <= 0.25:
            case = "case2.1"
        elif ea.rev[imax] <= 0.5 * ea.total_rev:
            case = "case2.2a"
        else:
            case = "case2.2b"
    c = CASE_CONSTANTS[case]
    case_ok = c * myer_adv >= myer_ind - 1e-9
    global_ok = GLOBAL_CONSTANT * myer_adv >= myer_ind - 1e-9
    return ThreeWiseReport(
        myer_adv,
        myer_ind,
        relax_lhs,
        relax_ok,
        case,
        c,
        case_ok,
        GLOBAL_CONSTANT,
        global_ok,
        ea,
    )


def _n_bidders(prior: JointPrior) -> int:
    return prior.n_bidders
