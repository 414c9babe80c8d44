"""matchlab: minimum-cost matchings of random planar point sets.

A laboratory for the squared-distance matching cost of random
configurations: exact solvers with dual certificates, a hierarchical
median-split heuristic with local-search polish, a hazard-rate
distribution family for the cost statistics, dyadic merge dynamics with an
autoregressive surrogate, and seeded experiment drivers behind a CLI.
"""

from ._version import __version__
from .geometry import (
    Metric,
    PointSet,
    SampleKind,
    Transform,
    cost_matrix,
    euclidean_identity_residual,
    marginal_quantile_transform,
    matching_cost,
    pair_cost,
    replication_stream,
    sample,
)
from .assignment import (
    Matching,
    brute_force,
    improve_two_swap,
    solve_exact,
    solve_exact_dense,
    verify_duals,
)
from .ajtai import AjtaiResult, BitLabeling, build_labels, label_expectation, match_ajtai, median_bits
from .hazard import (
    CalibrationResult,
    FitResult,
    HazardParams,
    calibrate_cutpoints,
    cumulative_hazard,
    density,
    fit_mle,
    ks_statistic,
    pit,
    quantile,
    quantile_from_exponential,
    sample as sample_hazard,
    std_density,
    tail,
)
from .dyadic import (
    ARModel,
    ChainModel,
    CrossLink,
    DyadicRecord,
    MeanLawFit,
    QuadSets,
    RecursionFit,
    build_chain_model,
    evolve,
    fit_ar_model,
    fit_cross_level,
    fit_mean_law,
    fit_recursion,
    make_quad,
    merged_cost,
    model_vs_data,
    restricted_dispersion,
    run_chain,
    simulate_ar,
    six_distances,
)
from .pricemap import PriceMap, PriceMapRun, compute_price_map, write_ppm
from .experiments import ExperimentConfig

__all__ = [name for name in dir() if not name.startswith("_")]
