"""Brute-force reference solvers and adversarial instance generators.

Everything here enumerates all ``C(n, p)`` threshold subsets, so it is exact
but only usable on small instances.  The test suite treats these as ground
truth for the DP, greedy, dynamics and ex-post solvers.
"""
from __future__ import annotations

import itertools
import json
import math
from typing import NamedTuple, Optional

import numpy as np

from .errors import CapabilityError, ParameterError
from .regret import Grouping, Population, ProductSet

MAX_SUBSETS = 1_000_000
MAX_GRID_GROUPS = 3
MAX_GRID_STEP = 1e-2
_CHUNK_CELLS = 4_000_000


class OracleReport(NamedTuple):
    value: float
    witness: object = None
    enumerated_count: int = 0
    slack: float = 0.0

    def to_json(self) -> str:
        w = self.witness
        if isinstance(w, ProductSet):
            w = list(w.risks)
        elif isinstance(w, np.ndarray):
            w = [float(x) for x in w]
        return json.dumps(
            {"value": self.value, "witness": w, "enumerated_count": self.enumerated_count, "slack": self.slack}
        )


def _subsets(n, p):
    p = min(int(p), n)
    if int(p) < 1:
        raise ParameterError("p must be a positive integer")
    count = math.comb(n, p)
    if count > MAX_SUBSETS:
        raise CapabilityError(f"C({n},{p}) = {count} subsets exceeds the guard of {MAX_SUBSETS}")
    return p, count


def _regret_chunks(pop, p):
    """Yield ``(combos, regrets)`` with consumer regrets for blocks of subsets."""
    n = pop.n
    taus, rets = pop.taus, pop.returns
    block = max(1, _CHUNK_CELLS // max(1, p * n))
    it = itertools.combinations(range(n), p)
    while True:
        combos = np.array(list(itertools.islice(it, block)), dtype=np.int64).reshape(-1, p)
        if len(combos) == 0:
            return
        avail = taus[combos][:, :, None] <= taus[None, None, :]
        best = np.where(avail, rets[combos][:, :, None], 0.0).max(axis=1)
        yield combos, rets[None, :] - best


def _group_matrix(grouping):
    n = len(grouping.assignment)
    M = np.zeros((n, grouping.g))
    M[np.arange(n), grouping.assignment] = 1.0 / grouping.sizes[grouping.assignment]
    return M


def regret_matrix(pop: Population, grouping: Grouping, p: int):
    """All ``p``-subsets with their group-regret vectors: ``(combos, K x g matrix)``."""
    grouping.check(pop)
    p, _ = _subsets(pop.n, p)
    M = _group_matrix(grouping)
    combos, mats = [], []
    for c, reg in _regret_chunks(pop, p):
        combos.append(c)
        mats.append(reg @ M)
    return np.vstack(combos), np.vstack(mats)


def exhaustive_min_regret(pop: Population, w=None, p: int = 1) -> OracleReport:
    """Exact minimum weighted regret over all ``p``-subsets (uniform ``1/n`` by default)."""
    p, count = _subsets(pop.n, p)
    w = np.full(pop.n, 1.0 / pop.n) if w is None else np.asarray(w, dtype=np.float64)
    best, witness = math.inf, None
    for combos, reg in _regret_chunks(pop, p):
        vals = reg @ w
        j = int(np.argmin(vals))
        if vals[j] < best:
            best, witness = float(vals[j]), combos[j]
    return OracleReport(best, pop.products(witness), count)


def exhaustive_minmax_det(pop: Population, grouping: Grouping, p: int) -> OracleReport:
    """Exact smallest achievable maximum group regret with one product set."""
    grouping.check(pop)
    p, count = _subsets(pop.n, p)
    M = _group_matrix(grouping)
    best, witness = math.inf, None
    for combos, reg in _regret_chunks(pop, p):
        vals = (reg @ M).max(axis=1)
        j = int(np.argmin(vals))
        if vals[j] < best:
            best, witness = float(vals[j]), combos[j]
    return OracleReport(best, pop.products(witness), count)


def simplex_grid(g: int, step: float) -> np.ndarray:
    m = int(round(1.0 / step))
    if g == 1:
        return np.ones((1, 1))
    if g == 2:
        i = np.arange(m + 1)
        return np.column_stack((i, m - i)) / m
    rows = [(i, j, m - i - j) for i in range(m + 1) for j in range(m + 1 - i)]
    return np.array(rows, dtype=np.float64) / m


def game_value_grid(pop: Population, grouping: Grouping, p: int, grid_step: float = 1e-3) -> OracleReport:
    """Value of the designer-vs-adversary game, approximated on a mixture grid.

    The adversary picks a mixture over groups from a grid of spacing
    ``grid_step``; the designer answers with the best ``p``-subset.  By the
    minimax theorem the exact value lies within ``slack = B g grid_step`` of
    the reported number.  The witness is the maximizing mixture.
    """
    g = grouping.g
    if g > MAX_GRID_GROUPS:
        raise CapabilityError(f"grid oracle supports at most {MAX_GRID_GROUPS} groups, got {g}")
    if not (0 < grid_step <= MAX_GRID_STEP):
        raise CapabilityError(f"grid step must lie in (0, {MAX_GRID_STEP}], got {grid_step}")
    _, R = regret_matrix(pop, grouping, p)
    grid = simplex_grid(g, grid_step)
    block = max(1, _CHUNK_CELLS // max(1, R.shape[0]))
    best, arg = -math.inf, None
    for s in range(0, len(grid), block):
        vals = (grid[s : s + block] @ R.T).min(axis=1)
        j = int(np.argmax(vals))
        if vals[j] > best:
            best, arg = float(vals[j]), grid[s + j]
    return OracleReport(best, arg, R.shape[0], pop.B * g * grid_step)


def make_separation_instance(g: int, p: int):
    """Instance where randomization beats every deterministic product set.

    Consumers sit at returns ``1..p+1`` (threshold equal to return) split into
    ``g`` near-equal consecutive groups.  With more groups than values, extra
    consumers at the top value form their own groups.
    """
    if int(g) != g or int(p) != p or g < 1 or p < 1:
        raise ParameterError("g and p must be positive integers")
    g, p = int(g), int(p)
    values = np.arange(1, p + 2, dtype=np.float64)
    parts = np.array_split(np.arange(p + 1), min(g, p + 1))
    assign = np.empty(p + 1, dtype=np.int64)
    for k, part in enumerate(parts):
        assign[part] = k
    extra = g - len(parts)
    if extra > 0:
        values = np.concatenate((values, np.full(extra, float(p + 1))))
        assign = np.concatenate((assign, np.arange(len(parts), g)))
    return Population(values, values), Grouping(assign, g)


def check_separation(g: int, p: int, grid_step: float = 1e-3) -> dict:
    pop, grouping = make_separation_instance(g, p)
    det = exhaustive_minmax_det(pop, grouping, p)
    out = {
        "g": g,
        "p": p,
        "det": det.value,
        "det_expected": 1.0 / math.ceil((p + 1) / g),
        "rand_bound": 1.0 / (p + 1),
    }
    if g <= MAX_GRID_GROUPS:
        rand = game_value_grid(pop, grouping, p, grid_step)
        out["rand"] = rand.value
        out["slack"] = rand.slack
    return out


def make_pop_vs_group_instance(n: int, r1: float, r2: float):
    """One consumer at return ``r1`` (group 1) and ``n - 1`` at ``r2`` (group 2).

    With one product the population optimum serves the crowd at ``r2``, while
    the group optimum serves the lone consumer at ``r1``.
    """
    gap = r2 - r1
    if not (0 < gap < r1):
        raise ParameterError("need 0 < r2 - r1 < r1")
    if int(n) != n or not (n - 1 > r1 / gap):
        raise ParameterError("need n - 1 > r1 / (r2 - r1)")
    n = int(n)
    taus = np.array([r1] + [r2] * (n - 1), dtype=np.float64)
    return Population(taus, taus.copy()), Grouping(np.array([0] + [1] * (n - 1)), 2)
