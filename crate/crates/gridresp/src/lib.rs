//! Swing-equation grid dynamics: modal impulse responses and their
//! recovery from ambient measurement correlations.
//!
//! The crate models a network of synchronous machines as a linear
//! second-order system, computes its impulse responses in closed form
//! through a modal decomposition, simulates ambient operation under
//! stochastic load fluctuations, and recovers the same impulse
//! responses from cross-correlations of the simulated measurements.
//! An evaluation layer scores recovered curves against the analytic
//! ones and extracts engineering quantities: frequency nadirs,
//! disturbance propagation speed, oscillation frequency and damping.
//!
//! The `examples/` directory is the front door; each example is a
//! small runnable study of one capability:
//!
//! * `synthetic_case` builds and prints a random network case.
//! * `modal_impulse` diagonalizes a case and tabulates impulse curves.
//! * `simulate_vs_analytic` checks the time stepper against closed form.
//! * `ambient_correlation` compares measured and analytic correlations.
//! * `recover_response` runs the full correlation-to-response pipeline.
//! * `mode_estimation` reads oscillation frequency and damping off a
//!   recovered curve.
//! * `nadir_propagation` times disturbance arrival along a chain.
//! * `frequency_degradation` shows what filtered frequency measurements
//!   do to recovery, and the angle-based remedy.
//!
//! A thin `gridresp` binary wraps the same operations for scripting;
//! see the crate README.

pub mod cli;
pub mod error;
pub mod evaluate;
pub mod filter;
pub mod grid;
pub mod io;
pub mod modal;
pub mod recovery;
pub mod response;
pub mod sim;
pub mod trace;

pub use error::{Error, Result};
pub use evaluate::{log_decrement, nadir, normalized_mse, propagation_speed, ModeEstimate, Nadir};
pub use grid::{make_synthetic_case, parse_case, GridCase, Line, OutputSpec, Topology};
pub use modal::{
    decompose, mass_stiffness_eigs, mode_constants, ModalDecomposition, ModeConstants,
};
pub use recovery::{cross_correlate, differentiate, recover, RecoveryConfig, Scaling};
pub use response::{ImpulseResponse, ResponseKind};
pub use sim::{
    degrade_frequency, discretize, map_outputs, simulate_ambient, simulate_impulse, AmbientConfig,
    InputMode,
};
pub use trace::{Channel, ChannelKind, SignalTrace};
