//! Pipeline orchestration shared by the `dasflow` binary and its tests:
//! streaming estimation runners with checkpoint resume, the baseline
//! denoising runners, and the benchmark harness.

pub mod bench;
pub mod pipeline;
