//! Monte Carlo exit times and exit places of the position component.
//!
//! The quantities of interest are `ε log E τ`, which approaches
//! `inf_{∂G} V` as `ε → 0`, and the distribution of the exit point, which
//! concentrates where `V` is smallest on `∂G`.

mod domain;
mod oracle;
mod run;
mod stats;

pub use domain::ExitDomain;
pub use oracle::{heat_mode_mean_exit_time, ou_mean_exit_time};
pub use run::{run_exit, run_replicas, ExitProblem, ExitRecord, DEFAULT_MAX_STEPS};
pub use stats::{
    estimate_exit_scaling, exit_place_histogram, ks_two_sample, level_seed, place_report, Cap,
    CapReport, DirectionHistogram, ExitPlaceReport, ExitStats, KsTest, Pole, MAX_CENSORED_FRACTION,
};
