//! Random walks conditioned to stay in cones: harmonic functions, conditioned
//! samplers, limiting processes and statistical checks of the invariance
//! principles.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::too_many_arguments,
    clippy::type_complexity
)]

pub mod conditioned;
pub mod cone;
pub mod error;
pub mod exec;
pub mod harmonic;
pub mod increments;
pub mod point;
pub mod reference;
pub mod rng;
pub mod stats;
pub mod walk;

pub use cone::{ConeKind, ConeSpec, RadialLaw};
pub use error::{Error, Result};
pub use increments::{LatticeSupport, StepDistribution, StepKind};
pub use point::Point;
