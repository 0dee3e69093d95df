"""Ex-ante minmax fairness through no-regret dynamics.

The designer and an adversary over groups play a zero-sum game.  Each round
the adversary's mixture over groups becomes a weighting of consumers, the
designer best-responds with the exact weighted-regret DP, and the adversary
moves weight towards the groups that were hurt most.  The time-average of the
designer's plays approximately minimizes the largest expected group regret.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DistributionError, GroupingError, ParameterError
from .planners import dp_table
from .regret import Grouping, Population, ProductSet, group_regrets

STEP_MULTIPLIERS = (1, 10, 100, 1000, 10000)


@dataclass(frozen=True)
class ProductDistribution:
    support: tuple
    probs: np.ndarray

    def __post_init__(self):
        support = tuple(self.support)
        probs = np.asarray(self.probs, dtype=np.float64).reshape(-1)
        if not support:
            raise DistributionError("distribution has empty support")
        if len(support) != len(probs):
            raise DistributionError("support and probabilities differ in length")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise DistributionError("probabilities must be non-negative and sum to 1")
        if len({c.risks for c in support}) != len(support):
            raise DistributionError("support entries must be distinct")
        probs.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def point_mass(cls, products: ProductSet):
        return cls((products,), np.ones(1))

    def union(self) -> ProductSet:
        out = ProductSet()
        for c in self.support:
            out = out.union(c)
        return out

    def to_json(self) -> str:
        return json.dumps(
            {"support": [list(c.risks) for c in self.support], "probs": [float(x) for x in self.probs]}
        )


@dataclass
class GameTrace:
    D: np.ndarray  # T x g adversary mixtures (before each round's update)
    u: np.ndarray  # T x g normalized group losses
    products: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        g = self.D.shape[1]
        writer.writerow(["t", *(f"D_{k + 1}" for k in range(g)), *(f"u_{k + 1}" for k in range(g)), "products"])
        for t in range(self.D.shape[0]):
            writer.writerow(
                [
                    t + 1,
                    *(f"{x:.17g}" for x in self.D[t]),
                    *(f"{x:.17g}" for x in self.u[t]),
                    " ".join(f"{x:.17g}" for x in self.products[t].risks),
                ]
            )
        return buf.getvalue()


def mw_beta(g: int, T: int) -> float:
    """Multiplicative-weights discount ``1 / (1 + sqrt(2 ln g / T))``."""
    return 1.0 / (1.0 + math.sqrt(2.0 * math.log(g) / T))


def regret_bound(B: float, g: int, T: int) -> float:
    """Additive approximation guarantee ``B (sqrt(2 ln g / T) + ln g / T)``."""
    return B * (math.sqrt(2.0 * math.log(g) / T) + math.log(g) / T)


def run_dynamics(
    pop: Population,
    grouping: Grouping,
    p: int,
    T: int,
    B: float | None = None,
    step_multiplier: float = 1.0,
):
    """Play ``T`` rounds; return ``(ProductDistribution, GameTrace)``.

    Group losses are normalized by ``B`` (default: the population's bound).
    The adversary's weights live in log space and are shifted by their maximum
    every round, so they never overflow or underflow.
    """
    grouping.check(pop)
    if int(T) != T or T < 1:
        raise ParameterError("T must be a positive integer")
    if int(p) != p or p < 1:
        raise ParameterError("p must be a positive integer")
    if not step_multiplier > 0:
        raise ParameterError("step multiplier must be positive")
    B = pop.B if B is None else float(B)
    if B < pop.returns.max():
        raise ParameterError(f"B={B} is below the largest bespoke return {pop.returns.max()}")
    T = int(T)
    g = grouping.g
    p = min(int(p), pop.n)
    eta = -math.log(mw_beta(g, T)) * step_multiplier
    inv_size = 1.0 / grouping.sizes
    assign = grouping.assignment

    log_d = np.zeros(g)
    Ds = np.empty((T, g))
    us = np.empty((T, g))
    plays = []
    counts: dict[tuple, int] = {}
    sets: dict[tuple, ProductSet] = {}
    for t in range(T):
        d = np.exp(log_d - log_d.max())
        d /= d.sum()
        Ds[t] = d
        w = (d * inv_size)[assign]
        table = dp_table(pop, w, p)
        idx = tuple(kernels.reconstruct(table.argmins, pop.n, p))
        c = sets.get(idx)
        if c is None:
            c = sets[idx] = pop.products(list(idx))
        counts[idx] = counts.get(idx, 0) + 1
        plays.append(c)
        u = group_regrets(pop, grouping, c) / B if B > 0 else np.zeros(g)
        us[t] = u
        # the adversary maximizes regret, so high-loss groups gain weight
        log_d = log_d + eta * u
        log_d -= log_d.max()

    merged: dict[tuple, float] = {}
    for idx, k in counts.items():
        key = sets[idx].risks
        merged[key] = merged.get(key, 0) + k
    support = []
    probs = []
    for idx, k in counts.items():
        key = sets[idx].risks
        if key in merged:
            support.append(sets[idx])
            probs.append(merged.pop(key) / T)
    return ProductDistribution(tuple(support), np.array(probs)), GameTrace(Ds, us, plays)


def exante_group_regrets(dist: ProductDistribution, pop: Population, grouping: Grouping) -> np.ndarray:
    if not isinstance(dist, ProductDistribution) or not dist.support:
        raise DistributionError("invalid distribution")
    out = np.zeros(grouping.g)
    for c, q in zip(dist.support, dist.probs):
        out += q * group_regrets(pop, grouping, c)
    return out


def sparsify(union_products, target_count: int, pop: Population | None = None, grouping: Grouping | None = None):
    """Shrink a product set to ``target_count`` by repeatedly removing the
    higher member of the closest adjacent pair (leftmost pair on ties).

    Returns ``(products, noop)`` where ``noop`` flags that nothing was removed
    because the input was already small enough.
    """
    if int(target_count) != target_count or target_count < 1:
        raise ParameterError("target count must be a positive integer")
    if not isinstance(union_products, ProductSet):
        if pop is None:
            raise ParameterError("a population is needed to attach returns to raw risks")
        union_products = pop.product_at(sorted(union_products))
    risks = list(union_products.risks)
    rets = list(union_products.returns)
    if len(risks) <= target_count:
        return union_products, True
    while len(risks) > target_count:
        gaps = np.diff(risks)
        j = int(np.argmin(gaps))
        del risks[j + 1]
        del rets[j + 1]
    return ProductSet(risks, rets), False
