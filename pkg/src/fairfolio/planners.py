"""Population-level product selection.

* ``dp_min_regret``: exact weighted-regret minimization over consumer thresholds.
* ``greedy_products``: greedy maximization of the (submodular) average return.
* ``single_product_alpha`` / ``dp_two_sided``: the two-sided regret variant in
  which consumers may accept a riskier product at a linear penalty ``alpha``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy import integrate

from . import kernels
from .errors import DimensionError, ParameterError
from .regret import Population, ProductSet, average_return


class Plan(NamedTuple):
    products: ProductSet
    value: float


class AlphaPlan(NamedTuple):
    product: float
    value: float
    exact: bool = True


class TwoSidedPlan(NamedTuple):
    products: ProductSet
    value: float
    segments: tuple = ()
    exact: bool = True


@dataclass(frozen=True)
class DpTable:
    values: np.ndarray  # (n+1) x (p+1)
    argmins: np.ndarray  # 1-based z of the highest product, 0 where undefined


def _weights(pop, w):
    if w is None:
        return np.full(pop.n, 1.0 / pop.n)
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if w.shape != (pop.n,):
        raise DimensionError(f"weights have length {w.shape[0]}, population has {pop.n}")
    if np.any(w < 0):
        raise ParameterError("weights must be non-negative")
    return w


def _check_p(p):
    if int(p) != p or p <= 0:
        raise ParameterError(f"number of products must be a positive integer, got {p!r}")
    return int(p)


def dp_table(pop: Population, w=None, p: int = 1, base_return: float = 0.0) -> DpTable:
    w = _weights(pop, w)
    T, Z = kernels.dp_table(pop.returns, w, min(int(p), pop.n), base_return)
    return DpTable(T, Z)


def dp_min_regret(pop: Population, w=None, p: int = 1) -> Plan:
    """Exact minimum weighted regret with ``p`` products on consumer thresholds.

    ``w=None`` means uniform weights ``1/n`` (average regret).  ``p`` larger
    than ``n`` is clipped; duplicate thresholds collapse, so the returned set
    may hold fewer than ``p`` products.
    """
    p = min(_check_p(p), pop.n)
    table = dp_table(pop, w, p)
    idx = kernels.reconstruct(table.argmins, pop.n, p)
    return Plan(pop.products(idx), float(table.values[pop.n, p]))


def greedy_products(pop: Population, w=None, p: int = 1) -> Plan:
    """Greedy selection by largest marginal gain in average return.

    Ties go to the lower-risk candidate; stops early once no candidate helps.
    """
    p = _check_p(p)
    w = _weights(pop, w)
    cand_tau, first = np.unique(pop.taus, return_index=True)
    cand_ret = pop.returns[first]
    eligible = pop.taus[None, :] >= cand_tau[:, None]  # candidates x consumers
    best = np.zeros(pop.n)
    chosen = []
    for _ in range(min(p, len(cand_tau))):
        gains = (np.maximum(cand_ret[:, None] - best[None, :], 0.0) * eligible) @ w
        if chosen:
            gains[chosen] = -np.inf
        j = int(np.argmax(gains))
        if not gains[j] > 0.0:
            break
        chosen.append(j)
        best = np.where(eligible[j], np.maximum(best, cand_ret[j]), best)
    products = ProductSet(cand_tau[chosen], cand_ret[chosen])
    value = float(w @ pop.returns) - average_return(pop, products, w)
    return Plan(products, value)


# ---------------------------------------------------------------------------
# two-sided regret


def _return_fn(pop, curve, curve_derivative):
    """Return function for off-grid products.

    Prefers an explicit ``curve``; otherwise integrates the derivative from the
    nearest threshold at or below ``c``.
    """
    if curve is not None:
        return lambda c: float(curve(c))
    if curve_derivative is None:
        return None

    def r(c):
        j = int(np.searchsorted(pop.taus, c, side="right")) - 1
        if j < 0:
            # below every threshold: integrate down from the first one
            val, _ = integrate.quad(curve_derivative, c, pop.taus[0], limit=200)
            return float(pop.returns[0] - val)
        if pop.taus[j] == c:
            return float(pop.returns[j])
        val, _ = integrate.quad(curve_derivative, pop.taus[j], c, limit=200)
        return float(pop.returns[j] + val)

    return r


def _forced_cost(taus, rets, w, alpha, c, rc):
    """sum_i w_i * regret_alpha(tau_i, c) with every consumer on product ``c``."""
    above = taus < c
    if math.isinf(alpha):
        if np.any(above & (w > 0)):
            return math.inf
        return float(w @ (rets - rc))
    below = ~above
    return float(w[below] @ (rets[below] - rc) + alpha * (w[above] @ (c - taus[above])))


def _critical_point(lo, hi, w_lo, w_hi, alpha, drv):
    # derivative of the forced cost on (lo, hi): alpha*w_lo - r'(c)*w_hi, non-decreasing
    def h(c):
        return alpha * w_lo - float(drv(c)) * w_hi

    span = hi - lo
    a = lo + 1e-12 * span
    b = hi - 1e-12 * span
    ha, hb = h(a), h(b)
    if not (ha < 0.0 < hb):
        return None
    for _ in range(200):
        mid = 0.5 * (a + b)
        if h(mid) < 0.0:
            a = mid
        else:
            b = mid
        if b - a <= 1e-15 * max(1.0, abs(b)):
            break
    return 0.5 * (a + b)


def _forced_single(taus, rets, w, alpha, drv, r):
    """Best single product for a block of consumers who must all use it."""
    n = len(taus)
    best_c, best_v = float(taus[0]), math.inf
    for j in range(n):
        v = _forced_cost(taus, rets, w, alpha, taus[j], rets[j])
        if v < best_v:
            best_c, best_v = float(taus[j]), v
    exact = drv is not None or math.isinf(alpha)
    if drv is not None and not math.isinf(alpha):
        cw = np.cumsum(w)
        total = cw[-1]
        for i in range(n - 1):
            if not taus[i] < taus[i + 1]:
                continue
            w_lo = cw[i]
            w_hi = total - cw[i]
            if w_hi <= 0.0:
                continue
            c = _critical_point(taus[i], taus[i + 1], w_lo, w_hi, alpha, drv)
            if c is None:
                continue
            v = _forced_cost(taus, rets, w, alpha, c, r(c))
            if v < best_v:
                best_c, best_v = c, v
    return best_c, best_v, exact


def single_product_alpha(
    pop: Population,
    w=None,
    alpha: float = math.inf,
    curve_derivative: Optional[Callable] = None,
    curve: Optional[Callable] = None,
    cash: bool = False,
) -> AlphaPlan:
    """Minimize the weighted two-sided regret with one product placed anywhere.

    Candidates are every threshold plus, inside each gap between consecutive
    thresholds, the point where the derivative of the (convex) objective
    vanishes.  Without ``curve_derivative`` only thresholds are checked and the
    result is flagged ``exact=False``.

    With ``cash=True`` consumers may fall back to cash, which makes the
    ``alpha = inf`` case coincide with the one-sided single-product optimum.
    """
    if not alpha > 0:
        raise ParameterError("alpha must be positive")
    w = _weights(pop, w)
    r = _return_fn(pop, curve, curve_derivative)
    if curve_derivative is not None and r is None:
        raise ParameterError("an off-grid return function is required")
    taus, rets = pop.taus, pop.returns
    if not cash:
        c, v, exact = _forced_single(taus, rets, w, alpha, curve_derivative, r)
        return AlphaPlan(c, v, exact)
    prefix = np.concatenate(([0.0], np.cumsum(w * rets)))
    best = AlphaPlan(0.0, float(prefix[-1]), curve_derivative is not None or math.isinf(alpha))
    for j in range(pop.n):
        c, v, exact = _forced_single(taus[j:], rets[j:], w[j:], alpha, curve_derivative, r)
        v += prefix[j]
        if v < best.value:
            best = AlphaPlan(c, v, exact)
    return best


def segment_costs(pop, w, alpha, curve_derivative=None, curve=None):
    """Forced single-product optimum for every block ``[z, k]`` (0-based, inclusive)."""
    w = _weights(pop, w)
    r = _return_fn(pop, curve, curve_derivative)
    n = pop.n
    cost = np.full((n, n), math.inf)
    where = np.zeros((n, n))
    for z in range(n):
        for k in range(z, n):
            c, v, _ = _forced_single(
                pop.taus[z : k + 1], pop.returns[z : k + 1], w[z : k + 1], alpha, curve_derivative, r
            )
            cost[z, k] = v
            where[z, k] = c
    return cost, where


def dp_two_sided(
    pop: Population,
    w=None,
    p: int = 1,
    alpha: float = math.inf,
    curve_derivative: Optional[Callable] = None,
    curve: Optional[Callable] = None,
) -> TwoSidedPlan:
    """Exact two-sided weighted regret with ``p`` products placed anywhere.

    Consumers are split into contiguous blocks, each served by its own optimal
    product; consumers below the first block hold cash.
    """
    p = _check_p(p)
    if not alpha > 0:
        raise ParameterError("alpha must be positive")
    w = _weights(pop, w)
    r = _return_fn(pop, curve, curve_derivative)
    n = pop.n
    cost, where = segment_costs(pop, w, alpha, curve_derivative, curve)
    T = np.zeros((n + 1, p + 1))
    Z = np.zeros((n + 1, p + 1), dtype=np.int64)
    T[1:, 0] = np.cumsum(w * pop.returns)
    for q in range(1, p + 1):
        for k in range(1, n + 1):
            best, arg = math.inf, 0
            for z in range(1, k + 1):
                v = T[z - 1, q - 1] + cost[z - 1, k - 1]
                if v < best:
                    best, arg = v, z
            T[k, q] = best
            Z[k, q] = arg
    segments = []
    k, q = n, p
    while q > 0 and k > 0:
        z = int(Z[k, q])
        segments.append((z - 1, k - 1, float(where[z - 1, k - 1]), float(cost[z - 1, k - 1])))
        k, q = z - 1, q - 1
    segments.reverse()
    risks = [s[2] for s in segments]
    rets = [_product_return(pop, c, r) for c in risks]
    exact = curve_derivative is not None or math.isinf(alpha)
    return TwoSidedPlan(ProductSet(risks, rets), float(T[n, p]), tuple(segments), exact)


def _product_return(pop, c, r):
    j = int(np.searchsorted(pop.taus, c))
    if j < pop.n and pop.taus[j] == c:
        return float(pop.returns[j])
    return float(r(c))
