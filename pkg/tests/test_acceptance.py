"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line; the lines are printed together in the
pytest terminal summary (see conftest.py) and also echoed to stdout.
"""
import math

import numpy as np
import pytest

from fairfolio.experiments import (
    ExperimentConfig,
    gap_slope,
    run_generalization_experiment,
    sample_bound_fairness,
    sample_bound_no_fairness,
)
from fairfolio.fair_exante import exante_group_regrets, regret_bound, run_dynamics
from fairfolio.fair_expost import interval_minmax
from fairfolio.frontier import build_curve
from fairfolio.market_io import AssetUniverse, add_cash_asset
from fairfolio.oracles import (
    check_separation,
    exhaustive_min_regret,
    exhaustive_minmax_det,
    game_value_grid,
)
from fairfolio.planners import dp_min_regret, dp_two_sided, greedy_products, single_product_alpha
from fairfolio.regret import Grouping, Population, average_return

from conftest import ACCEPTANCE, random_grouping, random_population
from test_fair_exante import union_dominates
from test_fair_expost import random_interval_instance, sandwich_ok
from test_planners import _forced, concave_instance
from test_regret import submodularity_holds


def record(num, title, ok, detail=""):
    line = f"criterion {num:>2} {'PASS' if ok else 'FAIL'}  {title}" + (f"  ({detail})" if detail else "")
    ACCEPTANCE[num] = line
    print(line)
    assert ok, line


def shared_instances():
    rng = np.random.default_rng(2024)
    out = []
    for _ in range(200):
        n = int(rng.integers(1, 13))
        p = int(rng.integers(1, 4))
        out.append((random_population(rng, n), p))
    return out


def test_c01_dp_exactness():
    worst = 0.0
    for pop, p in shared_instances():
        worst = max(worst, abs(dp_min_regret(pop, None, p).value - exhaustive_min_regret(pop, None, p).value))
    record(1, "DP equals exhaustive oracle on 200 instances", worst <= 1e-12, f"max |diff| = {worst:.2e}")


def test_c02_greedy_guarantee():
    worst = math.inf
    for pop, p in shared_instances():
        f_opt = pop.returns.mean() - exhaustive_min_regret(pop, None, p).value
        f_greedy = average_return(pop, greedy_products(pop, None, p).products)
        worst = min(worst, f_greedy - (1 - 1 / math.e) * f_opt)
    line4 = Population([1, 2, 3, 4], [1, 2, 3, 4])
    example = greedy_products(line4, None, 2).value
    ok = worst >= -1e-12 and abs(example - 0.5) <= 1e-12
    record(2, "greedy (1-1/e) guarantee and worked example", ok, f"min margin {worst:.3g}, example {example}")


def test_c03_frontier_closed_form():
    rng = np.random.default_rng(3)
    worst, shape_ok = 0.0, True
    for _ in range(100):
        mu, sd = rng.uniform(0.01, 0.3), rng.uniform(0.05, 0.6)
        uni = add_cash_asset(AssetUniverse(("R",), [mu], [[sd * sd]]))
        taus = np.sort(np.concatenate(([0.0], rng.uniform(0.0, 1.5 * sd, 6))))
        curve = build_curve(uni, taus)
        expect = mu * np.minimum(1.0, curve.taus / sd)
        worst = max(worst, float(np.max(np.abs(curve.returns - expect))))
        t, r = curve.taus, curve.returns
        shape_ok &= bool(np.all(np.diff(r) >= 0))
        for i in range(len(t) - 2):
            lam = (t[i + 2] - t[i + 1]) / (t[i + 2] - t[i])
            shape_ok &= bool(r[i + 1] >= lam * r[i] + (1 - lam) * r[i + 2] - 1e-9)
    ok = worst <= 1e-6 and shape_ok
    record(3, "frontier matches cash+risky closed form", ok, f"max err {worst:.2e}, shape ok {shape_ok}")


def test_c04_exante_certificate():
    rng = np.random.default_rng(4)
    T = 2000
    worst = -math.inf
    for _ in range(50):
        n = int(rng.integers(2, 11))
        g = int(rng.integers(1, 4))
        p = int(rng.integers(1, 3))
        pop = random_population(rng, n)
        gr = random_grouping(rng, n, g)
        dist, _ = run_dynamics(pop, gr, p, T)
        got = exante_group_regrets(dist, pop, gr).max()
        limit = game_value_grid(pop, gr, p, 1e-3).value + regret_bound(pop.B, gr.g, T) + 2e-3
        worst = max(worst, got - limit)
    record(4, "dynamics output within the no-regret certificate", worst <= 0.0, f"max excess {worst:.3g}")


def test_c05_separation():
    details, ok = [], True
    for g, p in ((2, 4), (3, 5), (2, 1)):
        res = check_separation(g, p, 1e-3)
        exact = 1.0 / math.ceil((p + 1) / g)
        ok &= abs(res["det"] - exact) <= 1e-12
        ok &= res["rand"] <= 1.0 / (p + 1) + res["slack"]
        details.append(f"({g},{p}) det {res['det']:.4f} rand {res['rand']:.4f}")
    record(5, "deterministic vs randomized separation", bool(ok), "; ".join(details))


def test_c06_blow_up():
    rng = np.random.default_rng(6)
    worst = -math.inf
    for _ in range(100):
        n = int(rng.integers(1, 10))
        g = int(rng.integers(1, 4))
        p = int(rng.integers(1, 3))
        pop = random_population(rng, n)
        gr = random_grouping(rng, n, g)
        det = exhaustive_minmax_det(pop, gr, gr.g * p).value
        rand = game_value_grid(pop, gr, p, 1e-3)
        worst = max(worst, det - (rand.value + rand.slack))
    record(6, "g*p deterministic products match the randomized value", worst <= 0.0, f"max excess {worst:.3g}")


def test_c07_tuple_dp():
    rng = np.random.default_rng(7)
    fails = sum(not sandwich_ok(rng, 0.01) for _ in range(100))
    record(7, "tuple DP within epsilon, coordinatewise sandwich", fails == 0, f"{fails} failures of 100")


def test_c08_interval():
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 13))
        pop, gr = random_interval_instance(rng, n, int(rng.integers(1, 5)))
        p = int(rng.integers(1, 4))
        worst = max(worst, abs(interval_minmax(pop, gr, p, 1e-6).value - exhaustive_minmax_det(pop, gr, p).value))
    ex = interval_minmax(Population([1, 2, 3, 4], [1, 2, 3, 4]), Grouping([0, 0, 1, 1]), 2, 1e-6)
    ok = worst <= 1e-6 and ex.value == 0.5 and ex.products.risks == (2.0, 4.0)
    record(8, "interval algorithm matches oracle and worked example", ok, f"max |diff| {worst:.2e}")


def test_c09_two_sided():
    worst_inf = 0.0
    for pop, p in shared_instances():
        worst_inf = max(worst_inf, abs(dp_two_sided(pop, None, p, math.inf).value - dp_min_regret(pop, None, p).value))
    ex = single_product_alpha(Population([1, 2], [1, 2]), None, 0.5, curve_derivative=lambda c: 1.0)
    ex_ok = ex.product == 2.0 and abs(ex.value - 0.25) <= 1e-12
    rng = np.random.default_rng(9)
    worst_grid = 0.0
    for _ in range(50):
        pop, r, drv = concave_instance(rng, int(rng.integers(2, 7)))
        alpha = rng.uniform(0.2, 3.0)
        plan = single_product_alpha(pop, None, alpha, drv, curve=r)
        grid = np.linspace(pop.taus[0], pop.taus[-1], 10_000)
        best = min(np.mean(_forced(pop, alpha, c, r)) for c in grid)
        worst_grid = max(worst_grid, abs(plan.value - best))
    ok = worst_inf <= 1e-12 and ex_ok and worst_grid <= 1e-4
    record(9, "two-sided regret", ok, f"inf-alpha diff {worst_inf:.1e}, grid diff {worst_grid:.1e}")


def test_c10_bounds():
    a = sample_bound_no_fairness(1, 0.1, 0.05)
    b = sample_bound_fairness(1, 0.1, 0.05, 2, 0.5)
    mono = (
        sample_bound_no_fairness(1, 0.05, 0.05) > a > sample_bound_no_fairness(1, 0.2, 0.05)
        and sample_bound_no_fairness(1, 0.1, 0.01) > a > sample_bound_no_fairness(1, 0.1, 0.1)
        and sample_bound_no_fairness(2, 0.1, 0.05) > a
        and sample_bound_fairness(1, 0.1, 0.05, 3, 0.3) > b
        and sample_bound_fairness(1, 0.1, 0.05, 2, 0.25) > b
    )
    record(10, "sample-size bound calculators", a == 877 and b == 9247 and mono, f"{a}, {b}, monotone {mono}")


@pytest.mark.slow
def test_c11_generalization():
    cfg = ExperimentConfig(p=5, slack=4, trials=30, test_size=2000)
    rows, meta = run_generalization_experiment(cfg)
    slope = gap_slope(rows)
    ok = -0.75 <= slope <= -0.25
    sizes = f"{cfg.train_sizes[0]}..{cfg.train_sizes[-1]}"
    record(11, "train-test gap shrinks like n^-1/2", ok, f"slope {slope:.3f} over n={sizes}")


def test_c12_property_suites():
    rng = np.random.default_rng(12)
    sub = sum(submodularity_holds(rng) for _ in range(200))
    dom = sum(bool(union_dominates(rng)) for _ in range(200))
    record(12, "submodularity and union dominance", sub == 200 and dom == 200, f"{sub}/200, {dom}/200")
