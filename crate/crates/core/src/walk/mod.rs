//! Walk simulation, exit detection and exact lattice oracles.

pub mod fuk_nagaev;
pub mod lattice;
pub mod path;
pub mod simulate;

pub use fuk_nagaev::{fuk_nagaev_bound, fuk_nagaev_bound_with_tail};
pub use lattice::{
    survival_curve_exact, survival_probability_exact, GuidedSampler, LatticeModel, Purpose,
};
pub use path::{PathSample, PathView, ScaledPath};
pub use simulate::{
    simulate_path, simulate_replica, survival_probability_mc, SurvivalEstimate, SurvivalMethod,
};
