//! Delayed implicit-Lyapunov sliding-mode control of perturbed integrator chains.
//!
//! The crate covers the implicit Lyapunov function and its dilation, LMI gain
//! certificates and ISS constants, the controller family, a seeded fixed-step
//! simulator and trajectory analysis.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod controllers;
pub mod error;
pub mod gains;
pub mod ilf;
pub mod linalg;
pub mod presets;
pub mod sim;

pub use analysis::{
    decay_window, decrease_rate_monitor, hyperexp_diagnostic, identification_error, razumikhin_monitor,
    steady_state_bound, total_variation, IdentificationQuality, MonitorReport, MonitorSettings, RunMetrics,
};
pub use controllers::{ControlLaw, ControlOutput, ControllerConfig, ControllerKind, ControllerSettings, DelayBuffer};
pub use error::{Error, Result};
pub use gains::{
    compute_iss_constants, find_gammas, verify_lmi, GainSet, Gammas, IssGains, LmiReport, DEFAULT_EIG_TOL,
};
pub use ilf::{dilation_apply, eval_q, solve_ilf, DilationWeights, IlfSolverSettings, ImplicitLyapunov};
pub use sim::{run_scenario, ScenarioConfig, SignalSpec, Trajectory, Waveform, PRNG_ID};
