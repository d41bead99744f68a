//! Streaming mean estimation and trajectory extraction for multi-frame
//! distributed acoustic sensing (DAS) signals.
//!
//! A DAS interrogator emits several frames per second, each frame holding one
//! amplitude per distance point along the fiber. This crate estimates the mean
//! amplitude function of such a stream in constant memory: every incoming frame
//! is reduced to kernel-weighted moment statistics at a ladder of candidate
//! bandwidths, and only those statistics (not the raw frames) are kept. The
//! resulting per-second mean curves form a waterfall from which vehicle
//! trajectories are tracked line by line.
//!
//! Module map:
//!
//! * [`model`] — frames, grids, curves and their validation rules.
//! * [`lpr`] — the local linear estimator: kernel, per-frame moment
//!   statistics, weighted least-squares solve, rule-of-thumb bandwidth.
//! * [`online`] — the constant-memory streaming estimator with variable
//!   bandwidth selection and binary checkpoints.
//! * [`baselines`] — scalar Kalman filtering and Haar wavelet denoising,
//!   the classical comparison methods.
//! * [`trajectory`] — entry detection and line-by-line vehicle tracking on
//!   waterfall matrices, plus extraction quality metrics.
//! * [`synth`] — seeded synthetic stream/waterfall generators with ground
//!   truth, and the scenario file schema.
//! * [`io`] — frame stream files (binary and CSV), curve/waterfall/track CSV.

pub mod baselines;
pub mod io;
pub mod lpr;
pub mod model;
pub mod online;
pub mod synth;
pub mod trajectory;
