"""Binary-tree price processes, bubble-ratio estimation, cross-sectional
regressions, and the position/velocity dispersion bound, with Monte Carlo
and quadrature verification throughout."""

from .data_io import PricePanel, UniverseSnapshot, align, load_prices, load_universe
from .errors import (
    BubbleTreeError,
    DataError,
    DegreesOfFreedomError,
    DomainError,
    InvalidParameterError,
    RankError,
    UndefinedKappaError,
)
from .kappa import (
    KappaReport,
    KappaSummary,
    ReturnPanel,
    benchmark_adjust,
    benchmark_weights,
    compute_returns,
    demean_cross_section,
    density,
    estimate_kappa,
    kappa_report,
    summarize,
)
from .regress import (
    DesignMatrix,
    RegressionResult,
    build_design,
    filter_universe,
    ols,
    universe_variables,
)
from .tree import (
    EnsembleStats,
    PricePath,
    TreeParams,
    WalkPath,
    atm_call_price,
    dividends_expected,
    dividends_most_probable,
    drift_lower_bound,
    drift_nu,
    effective_drift,
    exact_loss_probability,
    exact_median_price,
    expected_price,
    mc_ensemble,
    most_probable_price,
    mu_for_drift,
    sample_terminal_prices,
    sample_terminal_walks,
    simulate_returns,
    simulate_walk,
    step_probability,
    walk_mean_variance,
    walk_to_prices,
)
from .uncertainty import (
    DensityGrid,
    SaturationResult,
    commutator_series,
    commutator_step,
    density_from_points,
    density_from_spec,
    gaussian_density,
    laplace_density,
    logistic_density,
    mixture_density,
    plateau_density,
    saturation_check,
    sigma_v,
    sigma_x,
    uncertainty_product,
    velocity_field,
    velocity_mean,
)

__version__ = "0.1.0"
