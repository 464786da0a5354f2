"""JSON instance schema and CSV emitters.

Schema (wire format consumed by the CLI):

marginal   {"type": "equal_revenue", "lo": .., "hi": ..}
           {"type": "shifted_er", "lo": .., "hi": .., "eps": ..}
           {"type": "uniform", "lo": .., "hi": ..}
           {"type": "discrete", "points": [..], "masses": [..]}
prior      {"type": "product", "marginals": [..]}
           {"type": "myerson_counterexample", "n": .., "eps": ..}
           {"type": "uniform_q2", "n": ..}
           {"type": "table", "supports": [[..], ..], "pmf": [..]}
mechanism  {"type": "ar", "r": ..}
           {"type": "myerson", "tie_break": "highest_value" | "lex"}

Floats are emitted with 17 significant digits and LF line endings so that
re-running a command is byte-identical.
"""

from __future__ import annotations

import json

import numpy as np

from .marginals import DiscretePMF, DomainError, EqualRevenue, ShiftedEqualRevenue, Uniform
from .mechanisms import HIGHEST_VALUE, AnonymousReserve, Myerson
from .priors import (
    MixturePrior,
    ProductPrior,
    TablePrior,
    myerson_counterexample,
    uniform_q2_counterexample,
)


class ConfigError(ValueError):
    pass


def _need(obj, key, where):
    if key not in obj:
        raise ConfigError(f"{where}: missing field {key!r}")
    return obj[key]


def marginal_from_dict(d, where="marginal"):
    kind = _need(d, "type", where)
    try:
        if kind == "equal_revenue":
            return EqualRevenue(float(_need(d, "lo", where)), float(_need(d, "hi", where)))
        if kind == "shifted_er":
            return ShiftedEqualRevenue(
                float(_need(d, "lo", where)),
                float(_need(d, "hi", where)),
                float(_need(d, "eps", where)),
            )
        if kind == "uniform":
            return Uniform(float(_need(d, "lo", where)), float(_need(d, "hi", where)))
        if kind == "discrete":
            return DiscretePMF(_need(d, "points", where), _need(d, "masses", where))
    except DomainError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    raise ConfigError(f"{where}: unknown marginal type {kind!r}")


def marginal_to_dict(m):
    if isinstance(m, EqualRevenue):
        return {"type": "equal_revenue", "lo": m.lo, "hi": m.hi}
    if isinstance(m, ShiftedEqualRevenue):
        return {"type": "shifted_er", "lo": m.lo, "hi": m.hi, "eps": m.shift}
    if isinstance(m, Uniform):
        return {"type": "uniform", "lo": m.lo, "hi": m.hi}
    return {"type": "discrete", "points": list(m.points), "masses": list(m.masses)}


def prior_from_dict(d, marginals=None, where="prior"):
    kind = _need(d, "type", where)
    if kind == "product":
        ms = marginals or [marginal_from_dict(x, where) for x in _need(d, "marginals", where)]
        return ProductPrior(ms)
    if kind == "myerson_counterexample":
        return myerson_counterexample(int(_need(d, "n", where)), float(d.get("eps", 1e-6)))
    if kind == "uniform_q2":
        return uniform_q2_counterexample(int(_need(d, "n", where)))
    if kind == "table":
        return TablePrior(_need(d, "supports", where), np.asarray(_need(d, "pmf", where)))
    raise ConfigError(f"{where}: unknown prior type {kind!r}")


def mechanism_from_dict(d, marginals, where="mechanism"):
    kind = _need(d, "type", where)
    if kind == "ar":
        return AnonymousReserve(float(_need(d, "r", where)))
    if kind == "myerson":
        if marginals is None:
            raise ConfigError(f"{where}: myerson mechanism needs instance marginals")
        return Myerson(marginals, d.get("tie_break", HIGHEST_VALUE))
    raise ConfigError(f"{where}: unknown mechanism type {kind!r}")


def prior_marginals(prior):
    if isinstance(prior, (ProductPrior, MixturePrior)):
        return list(prior.marginals)
    return prior.to_marginals()


# ---------------------------------------------------------------------------
# Deterministic emitters


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(x) if not isinstance(x, str) else x for x in row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def dump_json(obj, path=None) -> str:
    def default(o):
        if isinstance(o, np.bool_):
            return bool(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(f"not serializable: {type(o)}")

    text = json.dumps(obj, sort_keys=True, indent=2, default=default)
    if path is not None:
        with open(path, "w", newline="\n") as fh:
            fh.write(text + "\n")
    return text


def table_to_csv(table: TablePrior, path):
    n = table.n_bidders
    header = [f"v{i+1}" for i in range(n)] + ["mass"]
    rows = [list(values) + [mass] for values, mass in table.cells()]
    write_csv(path, header, rows)


def table_from_csv(path) -> TablePrior:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    header = lines[0].split(",")
    n = len(header) - 1
    cells = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != n + 1:
            raise ConfigError(f"bad table row: {ln!r}")
        cells.append(([float(x) for x in parts[:n]], float(parts[n])))
    supports = [sorted({vals[i] for vals, _ in cells}) for i in range(n)]
    index = [{v: j for j, v in enumerate(s)} for s in supports]
    pmf = np.zeros([len(s) for s in supports])
    for vals, mass in cells:
        pmf[tuple(index[i][vals[i]] for i in range(n))] += mass
    return TablePrior(supports, pmf)
