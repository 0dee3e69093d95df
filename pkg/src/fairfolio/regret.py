"""Consumers, groups, products and the regret functionals built on them."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, FormatError, GroupingError, ParameterError

INF = math.inf


@dataclass(frozen=True)
class Population:
    """Consumers sorted by risk threshold, with their bespoke returns.

    ``B`` defaults to the largest bespoke return; a looser bound may be passed.
    """

    taus: np.ndarray
    returns: np.ndarray
    B: float | None = None

    def __post_init__(self):
        taus = np.array(self.taus, dtype=np.float64).reshape(-1)
        rets = np.array(self.returns, dtype=np.float64).reshape(-1)
        if taus.shape != rets.shape:
            raise DimensionError("taus and returns must have the same length")
        if len(taus) == 0:
            raise ParameterError("population is empty")
        if np.any(np.diff(taus) < 0):
            raise ParameterError("taus must be sorted ascending")
        if np.any(np.diff(rets) < 0):
            raise ParameterError("returns must be non-decreasing in tau")
        if np.any((np.diff(taus) == 0) & (np.diff(rets) != 0)):
            raise ParameterError("equal thresholds must carry equal returns")
        if np.any(rets < 0):
            raise ParameterError("returns must be >= 0")
        B = float(rets.max()) if self.B is None else float(self.B)
        if B < rets.max():
            raise ParameterError(f"B={B} is below the largest return {rets.max()}")
        taus.setflags(write=False)
        rets.setflags(write=False)
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "returns", rets)
        object.__setattr__(self, "B", B)

    @classmethod
    def from_curve(cls, taus, curve, B=None):
        taus = np.sort(np.asarray(taus, dtype=np.float64))
        return cls(taus, curve(taus), B)

    @property
    def n(self) -> int:
        return len(self.taus)

    def with_bound(self, B):
        return Population(self.taus, self.returns, B)

    def products(self, indices) -> "ProductSet":
        """ProductSet placed at the thresholds of the given consumer indices."""
        idx = np.unique(np.asarray(indices, dtype=np.int64))
        if len(idx) and (idx[0] < 0 or idx[-1] >= self.n):
            raise IndexError("consumer index out of range")
        return ProductSet(self.taus[idx], self.returns[idx])

    def product_at(self, risks) -> "ProductSet":
        """ProductSet from risk values that must coincide with consumer thresholds."""
        risks = np.asarray(risks, dtype=np.float64).reshape(-1)
        pos = np.searchsorted(self.taus, risks)
        ok = (pos < self.n) & (self.taus[np.minimum(pos, self.n - 1)] == risks)
        if not np.all(ok):
            raise ParameterError("product risks must be consumer thresholds")
        return self.products(pos)


@dataclass(frozen=True)
class Grouping:
    """Group index per consumer (aligned with the sorted population)."""

    assignment: np.ndarray
    g: int | None = None

    def __post_init__(self):
        a = np.array(self.assignment, dtype=np.int64).reshape(-1)
        g = int(a.max()) + 1 if self.g is None else int(self.g)
        if len(a) == 0:
            raise GroupingError("empty assignment")
        if a.min() < 0 or a.max() >= g:
            raise GroupingError("group index out of range")
        sizes = np.bincount(a, minlength=g)
        if np.any(sizes == 0):
            raise GroupingError(f"empty group(s): {np.flatnonzero(sizes == 0).tolist()}")
        a.setflags(write=False)
        sizes.setflags(write=False)
        object.__setattr__(self, "assignment", a)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "sizes", sizes)

    @classmethod
    def single(cls, n):
        return cls(np.zeros(n, dtype=np.int64), 1)

    def members(self, k) -> np.ndarray:
        return np.flatnonzero(self.assignment == k)

    def check(self, pop: Population):
        if len(self.assignment) != pop.n:
            raise DimensionError(f"grouping covers {len(self.assignment)} consumers, population has {pop.n}")

    def weights(self, mix=None) -> np.ndarray:
        """Consumer weights ``sum_k mix_k 1{i in G_k} / |G_k|`` (uniform mix by default)."""
        mix = np.full(self.g, 1.0 / self.g) if mix is None else np.asarray(mix, dtype=np.float64)
        return (mix / self.sizes)[self.assignment]

    def is_interval(self, pop: Population) -> bool:
        try:
            self.interval_bounds(pop)
        except GroupingError:
            return False
        return True

    def interval_bounds(self, pop: Population):
        """Consumer index ranges ``[(start, stop), ...]`` of contiguous interval groups.

        Groups must occupy contiguous ascending blocks with strictly increasing
        thresholds between consecutive blocks.
        """
        self.check(pop)
        a = self.assignment
        bounds = []
        start = 0
        for i in range(1, len(a) + 1):
            if i == len(a) or a[i] != a[start]:
                bounds.append((start, i))
                start = i
        labels = [a[s] for s, _ in bounds]
        if len(set(labels)) != len(labels):
            raise GroupingError("groups are not contiguous intervals of thresholds")
        for (s0, e0), (s1, _) in zip(bounds, bounds[1:]):
            if not pop.taus[e0 - 1] < pop.taus[s1]:
                raise GroupingError("adjacent interval groups share a boundary threshold")
        order = np.argsort(labels)
        return [bounds[j] for j in order]


@dataclass(frozen=True)
class ProductSet:
    """Sorted product risks and their returns.  Cash (risk 0, return 0) is implicit."""

    risks: tuple = ()
    returns: tuple = ()

    def __post_init__(self):
        risks = np.asarray(self.risks, dtype=np.float64).reshape(-1)
        rets = np.asarray(self.returns, dtype=np.float64).reshape(-1)
        if risks.shape != rets.shape:
            raise DimensionError("risks and returns must have the same length")
        order = np.argsort(risks, kind="stable")
        risks, rets = risks[order], rets[order]
        keep = np.ones(len(risks), dtype=bool)
        keep[1:] = risks[1:] != risks[:-1]
        object.__setattr__(self, "risks", tuple(float(x) for x in risks[keep]))
        object.__setattr__(self, "returns", tuple(float(x) for x in rets[keep]))

    def __len__(self):
        return len(self.risks)

    def __iter__(self):
        return iter(self.risks)

    def union(self, other: "ProductSet") -> "ProductSet":
        return ProductSet(self.risks + other.risks, self.returns + other.returns)

    def intersection(self, other: "ProductSet") -> "ProductSet":
        common = set(self.risks) & set(other.risks)
        pairs = [(c, r) for c, r in zip(self.risks, self.returns) if c in common]
        return ProductSet(tuple(c for c, _ in pairs), tuple(r for _, r in pairs))

    @property
    def max_risk(self) -> float:
        return self.risks[-1] if self.risks else 0.0


def best_returns(pop: Population, c: ProductSet) -> np.ndarray:
    """Best return available to each consumer: products with risk <= tau, plus cash."""
    if len(c) == 0:
        return np.zeros(pop.n)
    risks = np.asarray(c.risks)
    best = np.maximum.accumulate(np.maximum(np.asarray(c.returns), 0.0))
    pos = np.searchsorted(risks, pop.taus, side="right") - 1
    out = np.zeros(pop.n)
    ok = pos >= 0
    out[ok] = best[pos[ok]]
    return out


def consumer_regrets(pop: Population, c: ProductSet) -> np.ndarray:
    return np.maximum(pop.returns - best_returns(pop, c), 0.0)


def consumer_regret(pop: Population, c: ProductSet, i: int) -> float:
    if not -pop.n <= i < pop.n:
        raise IndexError(f"consumer index {i} out of range for n={pop.n}")
    return float(consumer_regrets(pop, c)[i])


def _check_weights(pop, w):
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if w.shape != (pop.n,):
        raise DimensionError(f"weights have length {w.shape[0]}, population has {pop.n}")
    if np.any(w < 0):
        raise ParameterError("weights must be non-negative")
    return w


def population_regret(pop: Population, c: ProductSet, w=None) -> float:
    """Average regret (``w is None``) or un-normalized weighted regret."""
    reg = consumer_regrets(pop, c)
    if w is None:
        return float(reg.mean())
    return float(_check_weights(pop, w) @ reg)


def average_return(pop: Population, c: ProductSet, w=None) -> float:
    """The set function ``f_S(c)``: (weighted) average best available return."""
    best = best_returns(pop, c)
    if w is None:
        return float(best.mean())
    return float(_check_weights(pop, w) @ best)


def group_regrets(pop: Population, grouping: Grouping, c: ProductSet) -> np.ndarray:
    grouping.check(pop)
    reg = consumer_regrets(pop, c)
    return np.bincount(grouping.assignment, weights=reg, minlength=grouping.g) / grouping.sizes


def max_group_regret(pop, grouping, c) -> float:
    return float(group_regrets(pop, grouping, c).max())


def alpha_regret(pop: Population, i: int, c_value: float, alpha: float, r=None) -> float:
    """Two-sided regret of consumer ``i`` for a single product at risk ``c_value``.

    Below the threshold the consumer loses ``r(tau) - r(c)``; above it she pays
    ``alpha * (c - tau)``.  ``alpha = inf`` makes products above the threshold
    ineligible (the value is ``inf``).  ``r`` is a return function used for
    off-grid products; on-grid products are looked up in the population.
    """
    if c_value < 0:
        raise ParameterError("product risk must be >= 0")
    if not alpha > 0:
        raise ParameterError("alpha must be positive")
    if not -pop.n <= i < pop.n:
        raise IndexError(f"consumer index {i} out of range for n={pop.n}")
    tau = pop.taus[i]
    if c_value > tau:
        return INF if math.isinf(alpha) else float(alpha * (c_value - tau))
    return float(pop.returns[i] - _return_at(pop, c_value, r))


def _return_at(pop, c, r):
    if c == 0.0:
        return 0.0
    j = np.searchsorted(pop.taus, c)
    if j < pop.n and pop.taus[j] == c:
        return float(pop.returns[j])
    if r is None:
        raise ParameterError(f"no return function given for off-grid product {c}")
    return float(r(c))


def alpha_regrets(pop: Population, risks, alpha: float, r=None) -> np.ndarray:
    """Per-consumer two-sided regret against a product list (cash included)."""
    risks = np.asarray(risks, dtype=np.float64).reshape(-1)
    reg = pop.returns.copy()  # cash
    for c in risks:
        rc = _return_at(pop, float(c), r)
        below = pop.taus >= c
        cand = np.where(below, pop.returns - rc, INF if math.isinf(alpha) else alpha * (c - pop.taus))
        reg = np.minimum(reg, cand)
    return reg


# ---------------------------------------------------------------------------
# CSV interface: tau,group[,return]


def read_population_csv(text: str, curve=None, B=None):
    """Parse ``tau,group[,return]`` rows into a sorted Population and Grouping.

    Without a ``return`` column, returns come from evaluating ``curve`` at each
    threshold.  Group labels are numbered in order of first appearance along
    ascending risk.
    """
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if not rows:
        raise FormatError("empty population file")
    header = [h.strip().lower() for h in rows[0]]
    if header[:2] != ["tau", "group"]:
        raise FormatError("population CSV must start with columns tau,group", row=1)
    has_ret = len(header) > 2 and header[2] == "return"
    taus, labels, rets = [], [], []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise FormatError(f"expected {len(header)} cells, found {len(row)}", row=i)
        try:
            taus.append(float(row[0]))
        except ValueError:
            raise FormatError(f"non-numeric tau {row[0]!r}", row=i, column=1) from None
        labels.append(row[1].strip())
        if has_ret:
            try:
                rets.append(float(row[2]))
            except ValueError:
                raise FormatError(f"non-numeric return {row[2]!r}", row=i, column=3) from None
    taus = np.asarray(taus)
    order = np.argsort(taus, kind="stable")
    taus = taus[order]
    labels = [labels[j] for j in order]
    if has_ret:
        returns = np.asarray(rets)[order]
    elif curve is not None:
        returns = np.asarray(curve(taus), dtype=np.float64)
    else:
        raise FormatError("no return column and no return curve supplied")
    names = list(dict.fromkeys(labels))
    assignment = np.array([names.index(x) for x in labels])
    return Population(taus, returns, B), Grouping(assignment, len(names)), names


def write_population_csv(pop: Population, grouping: Grouping, names=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["tau", "group", "return"])
    for t, k, r in zip(pop.taus, grouping.assignment, pop.returns):
        writer.writerow([repr(float(t)), names[k] if names else int(k), repr(float(r))])
    return buf.getvalue()
