//! trackguard: early-stage fault-type diagnosis for two-channel
//! track-circuit signals.
//!
//! The crate covers the full experimental loop on synthetic data:
//!
//! * [`signalgen`] — labeled two-channel experiment synthesis (nominal
//!   baseline plus a catalog of anomaly classes with progressive,
//!   intermittent, or step degradation) and the experiment CSV format.
//! * [`preprocess`] — denoising, overlapping sliding windows, and
//!   per-window normalization that removes installation-dependent scale.
//! * [`classifier`] — a small from-scratch feedforward network trained
//!   with seeded minibatch SGD.
//! * [`conformal`] — split conformal prediction sets with empty-set
//!   novelty signaling and coverage diagnostics.
//! * [`evaluation`] — confusion matrices, coverage/set-size reports, and
//!   the earliness-of-detection benchmark against an amplitude-threshold
//!   monitor.
//! * [`config`] / [`pipeline`] — TOML-driven end-to-end runs backing the
//!   `trackguard` command-line tool.
//!
//! Every stage is deterministic for a fixed seed. Start with the runnable
//! programs under `examples/` — each demonstrates one capability
//! end-to-end.

pub mod classifier;
pub mod config;
pub mod conformal;
pub mod error;
pub mod evaluation;
pub mod pipeline;
pub mod preprocess;
pub mod seed;
pub mod signalgen;

pub use error::{Error, Result};
pub use preprocess::{PreprocessConfig, PulseWindow};
pub use signalgen::{GeneratorConfig, Label, PhaseMarkers, SignalRecord};
