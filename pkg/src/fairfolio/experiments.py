"""Consumer samplers, sample-size bounds and the two desk-scale experiments.

Random draws use numpy's PCG64 generator (``numpy.random.default_rng``).  Each
trial gets its own child stream spawned from ``SeedSequence(seed)``, so results
do not depend on how trials are scheduled across workers.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .errors import CapabilityError, ParameterError
from .fair_exante import run_dynamics, sparsify
from .frontier import ReturnCurve, build_curve
from .market_io import add_cash_asset, estimate_universe, read_return_csv, synthetic_universe
from .oracles import MAX_SUBSETS, exhaustive_minmax_det
from .planners import dp_min_regret, greedy_products
from .regret import Grouping, Population, group_regrets, population_regret

RNG_NAME = "numpy.random.PCG64"
TRUNCATION = "resample"


@dataclass(frozen=True)
class MixtureSpec:
    means: tuple
    stddevs: tuple
    weights: tuple

    def __post_init__(self):
        m = np.asarray(self.means, dtype=np.float64)
        s = np.asarray(self.stddevs, dtype=np.float64)
        w = np.asarray(self.weights, dtype=np.float64)
        if not (m.ndim == s.ndim == w.ndim == 1) or not (len(m) == len(s) == len(w) >= 1):
            raise ParameterError("means, stddevs and weights must be equal-length non-empty lists")
        if np.any(s <= 0) or not np.all(np.isfinite(s)):
            raise ParameterError("stddevs must be positive")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ParameterError("weights must be non-negative and sum to 1")
        if np.any(m + 8 * s <= 0):
            raise ParameterError("component has almost no mass above 0")
        for name, arr in (("means", m), ("stddevs", s), ("weights", w)):
            object.__setattr__(self, name, tuple(float(x) for x in arr))

    @property
    def g(self) -> int:
        return len(self.means)


PAPER_MIXTURE = MixtureSpec((0.02, 0.03, 0.04), (0.002, 0.003, 0.004), (1 / 3, 1 / 3, 1 / 3))


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 10
    n_consumers: int = 50
    p: int = 5
    slack: int = 4
    T: int = 500
    trials: int = 100
    test_size: int = 5000
    train_sizes: tuple = tuple(range(25, 501, 25))
    universe: str = "synthetic"  # "synthetic" or a path to a daily-returns CSV
    n_assets: int = 50
    mixture: MixtureSpec = PAPER_MIXTURE
    step_multiplier: float = 1.0
    bound: str = "tight"  # "tight": max return; "loose": sum of returns
    exhaustive: bool = False
    curve_points: int = 401
    jobs: int = 1

    def __post_init__(self):
        for name in ("n_consumers", "p", "T", "trials", "test_size", "n_assets", "curve_points", "jobs"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ParameterError(f"{name} must be a positive integer, got {v!r}")
        if int(self.slack) != self.slack or self.slack < 0:
            raise ParameterError("slack must be a non-negative integer")
        if not self.train_sizes or any(int(n) != n or n < 1 for n in self.train_sizes):
            raise ParameterError("train sizes must be positive integers")
        if self.bound not in ("tight", "loose"):
            raise ParameterError("bound must be 'tight' or 'loose'")
        if not self.step_multiplier > 0:
            raise ParameterError("step multiplier must be positive")
        object.__setattr__(self, "train_sizes", tuple(int(n) for n in self.train_sizes))

    def to_dict(self):
        d = asdict(self)
        d["mixture"] = asdict(self.mixture)
        d["train_sizes"] = list(self.train_sizes)
        return d


# ---------------------------------------------------------------------------
# sampling


def sample_mixture(spec: MixtureSpec, n: int, seed=None, rng=None):
    """Draw ``n`` thresholds from a Gaussian mixture truncated at 0.

    Negative draws are redrawn from the same component.  Returns sorted
    thresholds and a ``Grouping`` whose labels follow component order, with
    components that received no consumer dropped.
    """
    if int(n) != n or n < 1:
        raise ParameterError("n must be a positive integer")
    rng = np.random.default_rng(seed) if rng is None else rng
    comp = rng.choice(spec.g, size=int(n), p=np.asarray(spec.weights))
    mean = np.asarray(spec.means)[comp]
    sd = np.asarray(spec.stddevs)[comp]
    tau = rng.normal(mean, sd)
    bad = tau < 0
    while np.any(bad):
        tau[bad] = rng.normal(mean[bad], sd[bad])
        bad = tau < 0
    order = np.lexsort((comp, tau))
    tau, comp = tau[order], comp[order]
    present = np.unique(comp)
    labels = np.searchsorted(present, comp)
    return tau, Grouping(labels, len(present))


def _ceil(x):
    # guard against values like 400.00000000000006 from log round-off
    return int(math.ceil(x * (1.0 - 1e-12)))


def sample_bound_no_fairness(B: float, epsilon: float, delta: float) -> int:
    """Consumers needed so empirical regret is within ``epsilon`` w.p. ``1 - delta``."""
    if not (B > 0 and epsilon > 0 and 0 < delta < 1):
        raise ParameterError("need B > 0, epsilon > 0, 0 < delta < 1")
    return _ceil(2.0 * B * B * math.log(4.0 / delta) / epsilon**2)


def sample_bound_fairness(B: float, epsilon: float, delta: float, g: int, pi_min: float) -> int:
    """Consumers needed so every group's empirical regret generalizes."""
    if not (B > 0 and epsilon > 0 and 0 < delta < 1):
        raise ParameterError("need B > 0, epsilon > 0, 0 < delta < 1")
    if int(g) != g or g < 1:
        raise ParameterError("g must be a positive integer")
    if not (0 < pi_min <= 1.0 / g + 1e-15):
        raise ParameterError("need 0 < pi_min <= 1/g")
    inner = 4.0 * B * B * math.log(8.0 * g / delta) / epsilon**2 + math.log(2.0 * g / delta)
    return _ceil(2.0 / pi_min * inner)


# ---------------------------------------------------------------------------
# harness plumbing


def _universe(config):
    if config.universe == "synthetic":
        return synthetic_universe(config.n_assets, seed=config.seed)
    uni = estimate_universe(read_return_csv(config.universe))
    return uni if uni.has_cash else add_cash_asset(uni)


def experiment_curve(config) -> ReturnCurve:
    """Dense return curve covering every threshold the mixture can plausibly draw."""
    spec = config.mixture
    top = max(m + 12 * s for m, s in zip(spec.means, spec.stddevs))
    return build_curve(_universe(config), np.linspace(0.0, top, config.curve_points))


def _population(curve, taus):
    # draws beyond the grid (vanishingly rare) take the curve's last value
    return Population(taus, curve(np.minimum(taus, curve.taus[-1])))


def _bound(config, pop):
    return float(pop.returns.sum()) if config.bound == "loose" else pop.B


def _row(method, pop, grouping, products, **extra):
    gr = group_regrets(pop, grouping, products)
    row = dict(extra)
    row.update(
        method=method,
        n_products=len(products),
        population_regret=population_regret(pop, products),
        max_group_regret=float(gr.max()),
        mean_group_regret=float(gr.mean()),
        products=" ".join(f"{x:.17g}" for x in products.risks),
    )
    return row


def _map(fn, args, jobs):
    if jobs <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, args))


# ---------------------------------------------------------------------------
# experiment 1: algorithm comparison


def _perf_trial(args):
    config, curve, trial, seq = args
    rng = np.random.default_rng(seq)
    taus, grouping = sample_mixture(config.mixture, config.n_consumers, rng=rng)
    pop = _population(curve, taus)
    B = _bound(config, pop)
    rows, timing = [], {}

    t0 = time.perf_counter()
    dist, _ = run_dynamics(pop, grouping, config.p, config.T, B, config.step_multiplier)
    union = dist.union()
    timing["nr"] = time.perf_counter() - t0
    rows.append(_row("nr", pop, grouping, union, trial=trial))
    for s in range(config.slack + 1):
        t0 = time.perf_counter()
        sparse, _ = sparsify(union, config.p + s)
        timing[f"nr_s{s}"] = timing["nr"] + time.perf_counter() - t0
        rows.append(_row(f"nr_s{s}", pop, grouping, sparse, trial=trial))
    t0 = time.perf_counter()
    rows.append(_row("dp", pop, grouping, dp_min_regret(pop, None, config.p).products, trial=trial))
    timing["dp"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    rows.append(_row("greedy", pop, grouping, greedy_products(pop, None, config.p).products, trial=trial))
    timing["greedy"] = time.perf_counter() - t0
    if config.exhaustive:
        t0 = time.perf_counter()
        rep = exhaustive_minmax_det(pop, grouping, config.p)
        timing["exhaustive"] = time.perf_counter() - t0
        rows.append(_row("exhaustive", pop, grouping, rep.witness, trial=trial))
    return rows, timing


def run_perf_experiment(config: ExperimentConfig):
    """Per-trial regrets of every method; returns ``(rows, metadata)``."""
    if config.exhaustive and math.comb(config.n_consumers, min(config.p, config.n_consumers)) > MAX_SUBSETS:
        raise CapabilityError(
            f"method 'exhaustive' needs C({config.n_consumers},{config.p}) <= {MAX_SUBSETS}; reduce n_consumers"
        )
    curve = experiment_curve(config)
    seqs = np.random.SeedSequence(config.seed).spawn(config.trials)
    out = _map(_perf_trial, [(config, curve, t, seqs[t]) for t in range(config.trials)], config.jobs)
    rows = [r for trial_rows, _ in out for r in trial_rows]
    timing = {}
    for _, tm in out:
        for k, v in tm.items():
            timing.setdefault(k, []).append(v)
    meta = _metadata("perf", config)
    meta["mean_seconds"] = {k: float(np.mean(v)) for k, v in timing.items()}
    return rows, meta


def summarize(rows, by=("method",), columns=("population_regret", "max_group_regret", "mean_group_regret")):
    """Mean and standard error of each column, grouped by the ``by`` keys."""
    groups: dict = {}
    for r in rows:
        groups.setdefault(tuple(r[k] for k in by), []).append(r)
    out = []
    for key, rs in groups.items():
        row = dict(zip(by, key))
        row["count"] = len(rs)
        for c in columns:
            v = np.array([r[c] for r in rs], dtype=np.float64)
            row[c] = float(v.mean())
            row[c + "_se"] = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
        out.append(row)
    return out


# ---------------------------------------------------------------------------
# experiment 2: generalization


def _gen_trial(args):
    config, curve, trial, seq, test = args
    test_pop, test_grouping = test
    rng = np.random.default_rng(seq)
    rows = []
    k = config.p + config.slack
    for n in config.train_sizes:
        taus, grouping = sample_mixture(config.mixture, n, rng=rng)
        pop = _population(curve, taus)
        dist, _ = run_dynamics(pop, grouping, config.p, config.T, _bound(config, pop), config.step_multiplier)
        products, _ = sparsify(dist.union(), k)
        train = _row("nr_sparse", pop, grouping, products, trial=trial, n=n)
        test_gr = group_regrets(test_pop, test_grouping, products)
        train.update(
            test_population_regret=population_regret(test_pop, products),
            test_max_group_regret=float(test_gr.max()),
            test_mean_group_regret=float(test_gr.mean()),
        )
        rows.append(train)
    return rows


def run_generalization_experiment(config: ExperimentConfig):
    """Train/test regret of sparsified dynamics across train sizes; ``(rows, metadata)``."""
    curve = experiment_curve(config)
    root = np.random.SeedSequence(config.seed)
    test_seq, *seqs = root.spawn(config.trials + 1)
    taus, grouping = sample_mixture(config.mixture, config.test_size, rng=np.random.default_rng(test_seq))
    test = (_population(curve, taus), grouping)
    args = [(config, curve, t, seqs[t], test) for t in range(config.trials)]
    rows = [r for trial_rows in _map(_gen_trial, args, config.jobs) for r in trial_rows]
    rows.sort(key=lambda r: (r["trial"], r["n"]))
    meta = _metadata("generalization", config)
    meta["gap_slope"] = gap_slope(rows)
    return rows, meta


def learning_curve(rows, column="population_regret"):
    """Average train and test value per train size: ``(sizes, train, test)``."""
    sizes = sorted({r["n"] for r in rows})
    train = np.array([np.mean([r[column] for r in rows if r["n"] == n]) for n in sizes])
    test = np.array([np.mean([r["test_" + column] for r in rows if r["n"] == n]) for n in sizes])
    return np.array(sizes, dtype=np.float64), train, test


def gap_slope(rows, column="population_regret") -> float:
    """Least-squares slope of log(test - train) against log(n)."""
    sizes, train, test = learning_curve(rows, column)
    gap = test - train
    ok = gap > 0
    if ok.sum() < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log(sizes[ok]), np.log(gap[ok]), 1)
    return float(slope)


# ---------------------------------------------------------------------------
# output


def _metadata(kind, config):
    return {
        "experiment": kind,
        "config": config.to_dict(),
        "rng": RNG_NAME,
        "truncation": TRUNCATION,
        "seed_override": os.environ.get("FAIRFOLIO_SEED"),
    }


def rows_to_csv(rows) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    fields = list(rows[0].keys())
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def write_outputs(rows, meta, outdir, kind, seed):
    """Write ``<kind>_seed<seed>.csv`` and its JSON sidecar; returns both paths."""
    os.makedirs(outdir, exist_ok=True)
    stem = os.path.join(outdir, f"{kind}_seed{seed}")
    with open(stem + ".csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(rows_to_csv(rows))
    with open(stem + ".json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    return stem + ".csv", stem + ".json"
