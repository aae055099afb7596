//! Irregular repetition slotted ALOHA under the collision channel.
//!
//! - [`degree`]: repetition-degree distributions `Λ(x)` and sampling.
//! - [`frame`]: random frame realizations and the SIC peeling decoder.
//! - [`density`]: density evolution, the load threshold `g*` and `γ`.
//! - [`scaling`]: finite-length frame-error and packet-loss predictions.
//! - [`floor`]: dominant-term error-floor estimate.
//! - [`harness`]: seeded, parallel Monte Carlo sweeps and CSV output.

pub mod degree;
pub mod density;
pub mod error;
pub mod floor;
pub mod frame;
pub mod harness;
pub mod scaling;

pub use degree::{DegreeDistribution, EdgeDistribution};
pub use density::{
    asymptotic_plp, bp_threshold, compute_gamma, de_fixed_point, DeState, ThresholdResult,
};
pub use error::{IrsaError, Result};
pub use floor::{floor_estimate, FloorEstimate};
pub use frame::{
    exact_fer_small, generate_frame, sic_decode, Activity, ActivityModel, ActiveUser,
    DecodeOutcome, FrameGraph,
};
pub use harness::{run_point, run_sweep, seed_stream, ExperimentConfig, SweepRow};
pub use scaling::{builtin_params, fep_predict, plp_predict, q_tail, ScalingParams};
