"""Regret-minimizing financial product design with group fairness."""

__version__ = "0.1.0"

from ._accel import backend
from .errors import (
    CapabilityError,
    DimensionError,
    DistributionError,
    DuplicateAssetError,
    EmptySeriesError,
    FairfolioError,
    FormatError,
    GroupingError,
    InfeasibleRiskError,
    InsufficientDataError,
    ModelError,
    ParameterError,
)
from .market_io import (
    AssetUniverse,
    ReturnSeries,
    add_cash_asset,
    estimate_universe,
    parse_return_csv,
    read_return_csv,
    synthetic_universe,
)
from .frontier import ReturnCurve, bespoke_return, build_curve
from .regret import (
    Grouping,
    Population,
    ProductSet,
    alpha_regret,
    average_return,
    consumer_regret,
    consumer_regrets,
    group_regrets,
    max_group_regret,
    population_regret,
    read_population_csv,
    write_population_csv,
)
from .planners import dp_min_regret, dp_two_sided, greedy_products, single_product_alpha
from .fair_exante import ProductDistribution, GameTrace, exante_group_regrets, run_dynamics, sparsify
from .fair_expost import efficient_sat_set, interval_decision, interval_minmax, minmax_tuple_dp
from .oracles import (
    OracleReport,
    exhaustive_min_regret,
    exhaustive_minmax_det,
    game_value_grid,
    make_pop_vs_group_instance,
    make_separation_instance,
)
from .experiments import (
    ExperimentConfig,
    MixtureSpec,
    run_generalization_experiment,
    run_perf_experiment,
    sample_bound_fairness,
    sample_bound_no_fairness,
    sample_mixture,
)
