//! Independent numerical oracles: quadrature ground truth, sample distances,
//! the modified Gaussian integral and envelope checks.

mod distances;
mod envelopes;
mod integrals;
mod quadrature;

pub use distances::{
    default_bins, distance_report, kolmogorov_survival, ks_one_sample, ks_two_sample, tv_from_probs, tv_hist,
    w2_quantile, DistanceReport, KsResult, TvReport, TAIL_MASS,
};
pub use envelopes::{acceptance_probability_oracle, sandwich_suite, AcceptanceOracle, SandwichReport, SANDWICH_TOL};
pub use integrals::{
    boundary_a, check_prop_key_bound, integrate_adaptive, log_modified_gaussian_integral,
    modified_gaussian_integral, prop_key_grid, wendel_check, PropKeyPoint, PropKeyReport, WendelPoint,
    WendelReport, PROP_KEY_RTOL,
};
pub use quadrature::{AxisGrid, QuadOptions, QuadratureDensity, DEFAULT_RISE};
