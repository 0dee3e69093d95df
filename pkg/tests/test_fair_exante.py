import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairfolio.errors import DistributionError, ParameterError
from fairfolio.fair_exante import (
    ProductDistribution,
    exante_group_regrets,
    mw_beta,
    regret_bound,
    run_dynamics,
    sparsify,
)
from fairfolio.oracles import game_value_grid
from fairfolio.planners import dp_min_regret
from fairfolio.regret import Grouping, Population, ProductSet, group_regrets

from conftest import random_grouping, random_population


def test_beta_value():
    assert mw_beta(2, 500) == pytest.approx(0.94998, abs=5e-6)


def test_single_group_is_point_mass(line4):
    dist, trace = run_dynamics(line4, Grouping.single(4), 2, 50)
    assert len(dist.support) == 1 and dist.probs.tolist() == [1.0]
    assert np.all(trace.D == 1.0)
    assert dist.support[0] == dp_min_regret(line4, None, 2).products


def test_two_singletons_certificate(two_singletons):
    pop, gr = two_singletons
    dist, trace = run_dynamics(pop, gr, 1, 2000, B=2.0)
    worst = exante_group_regrets(dist, pop, gr).max()
    assert worst <= 0.5 + regret_bound(2.0, 2, 2000)
    assert worst <= 0.5267
    assert regret_bound(1.0, 2, 2000) == pytest.approx(0.02666, abs=5e-5)


def test_bound_below_max_return(two_singletons):
    pop, gr = two_singletons
    with pytest.raises(ParameterError):
        run_dynamics(pop, gr, 1, 10, B=1.0)
    with pytest.raises(ParameterError):
        run_dynamics(pop, gr, 1, 0)
    with pytest.raises(ParameterError):
        run_dynamics(pop, gr, 1, 10, step_multiplier=0)


def test_trace_invariants_and_export():
    rng = np.random.default_rng(1)
    pop = random_population(rng, 9)
    gr = random_grouping(rng, 9, 3)
    dist, trace = run_dynamics(pop, gr, 2, 200, step_multiplier=100)
    assert np.all(np.abs(trace.D.sum(axis=1) - 1) <= 1e-12)
    assert np.all((trace.u >= 0) & (trace.u <= 1))
    assert abs(dist.probs.sum() - 1) <= 1e-12
    lines = trace.to_csv().splitlines()
    assert lines[0] == "t,D_1,D_2,D_3,u_1,u_2,u_3,products"
    assert len(lines) == 201
    data = json.loads(dist.to_json())
    assert set(data) == {"support", "probs"} and len(data["support"]) == len(dist.support)


def test_large_multiplier_no_underflow():
    pop = Population([1, 2, 3], [1, 2, 3])
    gr = Grouping([0, 1, 2])
    _, trace = run_dynamics(pop, gr, 1, 300, step_multiplier=10000)
    assert np.all(np.isfinite(trace.D))
    assert np.all(np.abs(trace.D.sum(axis=1) - 1) <= 1e-12)


def test_determinism():
    rng = np.random.default_rng(4)
    pop = random_population(rng, 10)
    gr = random_grouping(rng, 10, 3)
    d1, t1 = run_dynamics(pop, gr, 2, 150)
    d2, t2 = run_dynamics(pop, gr, 2, 150)
    assert t1.to_csv() == t2.to_csv()
    assert d1.to_json() == d2.to_json()


def test_exante_examples(two_singletons):
    pop, gr = two_singletons
    c1, c2 = pop.product_at([1]), pop.product_at([2])
    point = ProductDistribution.point_mass(c1)
    np.testing.assert_array_equal(exante_group_regrets(point, pop, gr), group_regrets(pop, gr, c1))
    half = ProductDistribution((c1, c2), [0.5, 0.5])
    np.testing.assert_allclose(exante_group_regrets(half, pop, gr), [0.5, 0.5])


def test_distribution_validation():
    c = ProductSet([1], [1])
    with pytest.raises(DistributionError):
        ProductDistribution((), [])
    with pytest.raises(DistributionError):
        ProductDistribution((c, c), [0.5, 0.5])
    with pytest.raises(DistributionError):
        ProductDistribution((c,), [0.9])


def test_sparsify_examples():
    c = ProductSet([1.0, 1.01, 2.0], [1, 1, 2])
    out, noop = sparsify(c, 2)
    assert out.risks == (1.0, 2.0) and not noop
    out, _ = sparsify(ProductSet([1, 2, 3], [1, 2, 3]), 2)
    assert out.risks == (1.0, 3.0)
    out, noop = sparsify(c, 5)
    assert out is c and noop
    with pytest.raises(ParameterError):
        sparsify(c, 0)


def test_sparsify_raw_risks(line4):
    out, _ = sparsify([1, 2, 4], 2, line4)
    assert out.risks == (1.0, 4.0) and out.returns == (1.0, 4.0)


def certificate_holds(rng):
    n = int(rng.integers(2, 11))
    g = int(rng.integers(1, 4))
    p = int(rng.integers(1, 3))
    pop = random_population(rng, n)
    gr = random_grouping(rng, n, g)
    T = 2000
    dist, _ = run_dynamics(pop, gr, p, T)
    worst = exante_group_regrets(dist, pop, gr).max()
    oracle = game_value_grid(pop, gr, p, 1e-3)
    return worst <= oracle.value + regret_bound(pop.B, gr.g, T) + oracle.slack


def test_certificate_small_sample():
    rng = np.random.default_rng(12)
    assert all(certificate_holds(rng) for _ in range(5))


def union_dominates(rng):
    n = int(rng.integers(2, 11))
    pop = random_population(rng, n)
    gr = random_grouping(rng, n, int(rng.integers(1, 4)))
    dist, _ = run_dynamics(pop, gr, int(rng.integers(1, 3)), 60)
    return np.all(group_regrets(pop, gr, dist.union()) <= exante_group_regrets(dist, pop, gr) + 1e-12)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_union_dominance_property(seed):
    assert union_dominates(np.random.default_rng(seed))
