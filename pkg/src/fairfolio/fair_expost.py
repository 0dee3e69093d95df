"""Deterministic minmax-fair product selection.

Two solvers:

* ``minmax_tuple_dp`` lifts the weighted-regret DP to whole vectors of group
  regrets.  Vectors are ceiling-rounded onto the net ``{0, a, 2a, ...}`` with
  ``a = epsilon / p`` and stored as integer multi-indices, one witness per key.
  Cost grows like ``(B p / epsilon)^g``, so it is meant for a handful of groups.
* ``interval_minmax`` handles groups that occupy disjoint threshold intervals.
  A greedy decision procedure answers "can every group stay below kappa?" and
  a binary search on kappa drives it.
"""
from __future__ import annotations

import json
import math
from typing import NamedTuple, Optional

import numpy as np

from . import kernels
from .errors import CapabilityError, ParameterError
from .regret import Grouping, Population, ProductSet, group_regrets

MAX_GROUPS = 4
KAPPA_TOL = 1e-12
_ROUND_TOL = 1e-9  # relative to the net spacing


class ExPostResult(NamedTuple):
    products: ProductSet
    value: float
    regrets: np.ndarray
    method: str
    epsilon: float
    rounded: Optional[np.ndarray] = None
    kappa_trace: tuple = ()
    frontier: Optional[dict] = None  # final rounded keys -> witness indices (tuple DP only)

    def to_json(self) -> str:
        return json.dumps(
            {
                "products": list(self.products.risks),
                "value": self.value,
                "method": self.method,
                "epsilon": self.epsilon,
                "kappa_trace": [list(k) for k in self.kappa_trace],
            }
        )


class Decision(NamedTuple):
    feasible: bool
    products: Optional[ProductSet] = None


def _check_eps(epsilon):
    if not (epsilon > 0) or not math.isfinite(epsilon):
        raise ParameterError(f"epsilon must be positive and finite, got {epsilon!r}")
    return float(epsilon)


def _check_p(p):
    if int(p) != p or p < 1:
        raise ParameterError("p must be a positive integer")
    return int(p)


def _group_prefix(pop, grouping):
    """Per-group prefix sums of ``1/|G_k|`` and ``r_i/|G_k|`` (row 0 is zero)."""
    n, g = pop.n, grouping.g
    onehot = np.zeros((n, g))
    onehot[np.arange(n), grouping.assignment] = 1.0 / grouping.sizes[grouping.assignment]
    W = np.zeros((n + 1, g))
    WR = np.zeros((n + 1, g))
    W[1:] = np.cumsum(onehot, axis=0)
    WR[1:] = np.cumsum(onehot * pop.returns[:, None], axis=0)
    return W, WR


def minmax_tuple_dp(
    pop: Population,
    grouping: Grouping,
    p: int,
    epsilon: float,
    B: float | None = None,
    force: bool = False,
) -> ExPostResult:
    """Products whose max group regret is within ``epsilon`` of the best possible.

    ``F[k][q]`` maps rounded regret vectors of the first ``k`` consumers using
    ``q`` products to a witness index tuple.  The cash-only vectors ``F[k][0]``
    are kept exact, so a final vector has been rounded at most ``p`` times.
    """
    grouping.check(pop)
    eps = _check_eps(epsilon)
    p = _check_p(p)
    g = grouping.g
    if g > MAX_GROUPS and not force:
        raise CapabilityError(f"{g} groups exceed the guard of {MAX_GROUPS}; pass force=True to run anyway")
    B = pop.B if B is None else float(B)
    if B < pop.returns.max():
        raise ParameterError(f"B={B} is below the largest bespoke return")
    n = pop.n
    p = min(p, n)
    alpha = eps / p
    r = pop.returns
    W, WR = _group_prefix(pop, grouping)

    def up(x):
        return tuple(int(v) for v in np.ceil(x / alpha - _ROUND_TOL))

    # F[k][q]: dict rounded-index tuple -> witness (ascending 0-based indices)
    F = [[None] * (p + 1) for _ in range(n + 1)]
    for k in range(n + 1):
        F[k][0] = WR[k]  # exact cash-only vector
    for q in range(1, p + 1):
        for k in range(q, n + 1):
            layer = {}
            for z in range(q, k + 1):
                seg = (WR[k] - WR[z - 1]) - r[z - 1] * (W[k] - W[z - 1])
                if q == 1:
                    key = up(F[z - 1][0] + seg)
                    if key not in layer:
                        layer[key] = (z - 1,)
                    continue
                step = np.ceil(seg / alpha - _ROUND_TOL).astype(np.int64)
                for prev, wit in F[z - 1][q - 1].items():
                    key = tuple(a + int(b) for a, b in zip(prev, step))
                    if key not in layer:
                        layer[key] = wit + (z - 1,)
            F[k][q] = layer

    best_key, best_wit = None, ()
    best_max = math.inf
    for q in range(1, p + 1):
        for key, wit in F[n][q].items():
            m = max(key)
            if m < best_max:
                best_key, best_wit, best_max = key, wit, m
    cash_key = up(F[n][0])
    if max(cash_key) < best_max:
        best_key, best_wit = cash_key, ()
    products = pop.products(list(best_wit))
    regrets = group_regrets(pop, grouping, products)
    frontier = {cash_key: ()}
    for q in range(1, p + 1):
        frontier.update(F[n][q])
    return ExPostResult(
        products,
        float(regrets.max()),
        regrets,
        "tuple_dp",
        eps,
        np.asarray(best_key, dtype=np.float64) * alpha,
        (),
        frontier,
    )


def rounded_path(pop: Population, grouping: Grouping, indices, alpha: float) -> tuple:
    """Net key the tuple DP assigns to products at the given consumer indices.

    Replays the DP's recursion for one fixed product set: exact cash block
    first, then one ceiling per product.
    """
    idx = sorted(set(int(i) for i in indices))
    W, WR = _group_prefix(pop, grouping)
    r = pop.returns
    n = pop.n
    if not idx:
        return tuple(int(v) for v in np.ceil(WR[n] / alpha - _ROUND_TOL))
    ends = idx[1:] + [n]
    z, k = idx[0] + 1, ends[0]
    first = WR[z - 1] + (WR[k] - WR[z - 1]) - r[z - 1] * (W[k] - W[z - 1])
    key = np.ceil(first / alpha - _ROUND_TOL).astype(np.int64)
    for j, k in zip(idx[1:], ends[1:]):
        z = j + 1
        seg = (WR[k] - WR[z - 1]) - r[z - 1] * (W[k] - W[z - 1])
        key = key + np.ceil(seg / alpha - _ROUND_TOL).astype(np.int64)
    return tuple(int(v) for v in key)


# ---------------------------------------------------------------------------
# interval groups


def efficient_sat_set(pop: Population, members, budget: int, default_risk: float, kappa: float):
    """Efficient product set for one interval group, or ``None`` when none exists.

    ``members`` is the ``(start, stop)`` index range of the group.  Consumers
    may always fall back on the product at ``default_risk`` (cash when 0).
    Among sets of at most ``budget`` thresholds whose group-average regret is
    at most ``kappa``, returns one with the fewest products and, among those,
    the highest top product.  Indices are global and ascending.
    """
    start, stop = members
    m = stop - start
    if m <= 0:
        raise ParameterError("empty consumer range")
    if default_risk > 0.0:
        (base,) = pop.product_at([default_risk]).returns
    else:
        base = 0.0
    if default_risk > pop.taus[start]:
        raise ParameterError("default product is riskier than the group's lowest threshold")
    r = pop.returns[start:stop]
    w = np.full(m, 1.0 / m)
    budget = min(int(budget), m)
    T, Z = kernels.dp_table(r, w, budget, base)
    if T[m, 0] <= kappa + KAPPA_TOL:
        return []
    W = np.concatenate(([0.0], np.cumsum(w)))
    WR = np.concatenate(([0.0], np.cumsum(w * r)))
    for q in range(1, budget + 1):
        for z in range(m, q - 1, -1):
            cost = T[z - 1, q - 1] + ((WR[m] - WR[z - 1]) - r[z - 1] * (W[m] - W[z - 1]))
            if cost <= kappa + KAPPA_TOL:
                below = kernels.reconstruct(Z, z - 1, q - 1)
                return [start + j for j in below] + [start + z - 1]
    return None


def interval_decision(pop: Population, grouping: Grouping, p: int, kappa: float) -> Decision:
    """Greedy feasibility check for target ``kappa`` over interval groups."""
    p = _check_p(p)
    bounds = sorted(grouping.interval_bounds(pop))
    chosen: list[int] = []
    for start, stop in bounds:
        x = pop.taus[chosen[-1]] if chosen else 0.0
        sel = efficient_sat_set(pop, (start, stop), p - len(chosen), x, kappa)
        if sel is None:
            return Decision(False)
        chosen.extend(sel)
    return Decision(True, pop.products(chosen))


def interval_minmax(
    pop: Population,
    grouping: Grouping,
    p: int,
    epsilon: float,
    B: float | None = None,
) -> ExPostResult:
    """Binary search on the regret target using ``interval_decision``.

    Runs ``ceil(log2(B / epsilon))`` halvings of ``[0, B]`` and keeps the
    products found at the feasible upper end.
    """
    eps = _check_eps(epsilon)
    p = _check_p(p)
    grouping.interval_bounds(pop)
    B = pop.B if B is None else float(B)
    if B < pop.returns.max():
        raise ParameterError(f"B={B} is below the largest bespoke return")
    lo, hi = 0.0, B
    top = interval_decision(pop, grouping, p, hi)
    products = top.products
    trace = [(hi, True)]
    iters = max(0, math.ceil(math.log2(B / eps))) if B > 0 else 0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        dec = interval_decision(pop, grouping, p, mid)
        trace.append((mid, dec.feasible))
        if dec.feasible:
            hi, products = mid, dec.products
        else:
            lo = mid
    regrets = group_regrets(pop, grouping, products)
    return ExPostResult(products, float(regrets.max()), regrets, "interval", eps, None, tuple(trace))
