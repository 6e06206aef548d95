//! Minimal controllability time for systems `ẏ = F(y) + B u` under a bounded
//! convex state constraint.

pub mod cli;
pub mod drift;
pub mod geometry;
pub mod min_time;
pub mod quadrature;
pub mod rate;
pub mod scenario;
pub mod search;
pub mod simulate;
pub mod synthesis;
pub mod system;

pub use drift::{DriftError, DriftField};
pub use geometry::{Basis, ConvexBody, GeometryError, Matrix, Slice, Vector};
pub use min_time::{min_time_codim1, min_time_lower_bound, travel_time_bound, LowerBound, MinTimeError, SolverConfig, TimeResult, TimeStatus};
pub use rate::{min_rate, rate_profile, slice_rate, RateConfig, RateMode, RateQuery, Segment};
pub use simulate::{simulate, ControlLaw, SimError, SimOptions, Trajectory};
pub use synthesis::{empirical_min_time, synthesize_control, SynthesisConfig, SynthesisError};
pub use system::{ControlSystem, SystemError};
