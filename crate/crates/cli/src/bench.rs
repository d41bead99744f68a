//! Benchmark harness: run one scenario through the online estimator, the
//! full-data estimator, and the two filter baselines; report RMSE against
//! the known truth, wall time, retained state size and per-frame online
//! update times.

use anyhow::{anyhow, Result};
use serde::Serialize;
use std::time::Instant;

use dasflow::baselines::{
    kalman_denoise_frames, wavelet_denoise_frames, ThresholdRule, WaveletParams,
};
use dasflow::lpr;
use dasflow::model::regular_grid;
use dasflow::online::{OnlineConfig, OnlineState};
use dasflow::synth::{self, generate_stream, ScenarioFile};

#[derive(Debug, Clone, Serialize)]
pub struct BenchEntry {
    pub method: String,
    pub rmse: f64,
    pub total_seconds: f64,
    /// Bytes the method must keep resident to continue processing.
    pub state_bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub frames: usize,
    pub entries: Vec<BenchEntry>,
    /// Median per-ingest time around the 10th frame, microseconds.
    pub online_per_frame_us_early: f64,
    /// Median per-ingest time over the last ten frames, microseconds.
    pub online_per_frame_us_late: f64,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "method,rmse,total_seconds,state_bytes,per_frame_us_early,per_frame_us_late\n",
        );
        for e in &self.entries {
            if e.method == "online" {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    e.method,
                    e.rmse,
                    e.total_seconds,
                    e.state_bytes,
                    self.online_per_frame_us_early,
                    self.online_per_frame_us_late
                ));
            } else {
                out.push_str(&format!(
                    "{},{},{},{},,\n",
                    e.method, e.rmse, e.total_seconds, e.state_bytes
                ));
            }
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.entries
            .iter()
            .all(|e| e.rmse.is_finite() && e.total_seconds.is_finite())
            && self.online_per_frame_us_early.is_finite()
            && self.online_per_frame_us_late.is_finite()
    }

    pub fn entry(&self, method: &str) -> Option<&BenchEntry> {
        self.entries.iter().find(|e| e.method == method)
    }
}

pub struct BenchConfig {
    pub grid_points: usize,
    pub ladder: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            grid_points: 100,
            ladder: 5,
        }
    }
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if values.is_empty() {
        f64::NAN
    } else {
        values[values.len() / 2]
    }
}

pub fn run_bench(
    file: &ScenarioFile,
    bench_config: &BenchConfig,
    frames_override: Option<usize>,
    seed_override: Option<u64>,
) -> Result<BenchReport> {
    let stream_config = file.stream_config();
    let mut scenario = file.mean_scenario();
    if let Some(seed) = seed_override {
        scenario.seed = seed;
    }
    let frame_count = frames_override.unwrap_or(file.stream.frames);
    let (frames, truth_native) = generate_stream(&scenario, &stream_config, frame_count)?;
    let grid = regular_grid(&stream_config, bench_config.grid_points)?;
    let truth_eval = scenario.mean.curve_on(&grid);
    let d = stream_config.points_per_frame;

    let mut entries = Vec::new();

    // online: per-frame ingest timings
    let start = Instant::now();
    let mut state = OnlineState::init(
        grid.clone(),
        OnlineConfig::with_ladder(bench_config.ladder),
        &frames[0],
    )?;
    let mut ingest_us = Vec::with_capacity(frames.len());
    for frame in &frames {
        let t = Instant::now();
        state.ingest_frame(frame)?;
        ingest_us.push(t.elapsed().as_secs_f64() * 1e6);
    }
    let online_curve = state.query_mean()?;
    let online_time = start.elapsed().as_secs_f64();
    entries.push(BenchEntry {
        method: "online".into(),
        rmse: synth::rmse(&online_curve, &truth_eval)?,
        total_seconds: online_time,
        state_bytes: state.state_size() as u64,
    });
    let early_window: Vec<f64> = ingest_us
        .iter()
        .copied()
        .skip(5)
        .take(10.min(ingest_us.len()))
        .collect();
    let late_window: Vec<f64> = ingest_us
        .iter()
        .copied()
        .skip(ingest_us.len().saturating_sub(10))
        .collect();
    let online_per_frame_us_early = median(if early_window.is_empty() {
        ingest_us.clone()
    } else {
        early_window
    });
    let online_per_frame_us_late = median(late_window);

    // batch: full recompute at the final rule-of-thumb bandwidth; it must
    // retain every raw frame to do so
    let start = Instant::now();
    let (_, pilot) = lpr::rot_bandwidth(&frames[..1], d as u64)?;
    let h = pilot.bandwidth_for((frames.len() * d) as u64);
    let batch_curve = lpr::batch_estimate(&frames, &grid, h)?;
    entries.push(BenchEntry {
        method: "batch".into(),
        rmse: synth::rmse(&batch_curve, &truth_eval)?,
        total_seconds: start.elapsed().as_secs_f64(),
        state_bytes: (frames.len() * d * 8 + d * 8) as u64,
    });

    // kalman: one scalar filter per distance point
    let start = Instant::now();
    let kalman_curve = kalman_denoise_frames(&frames)?;
    entries.push(BenchEntry {
        method: "kalman".into(),
        rmse: synth::rmse(&kalman_curve, &truth_native)?,
        total_seconds: start.elapsed().as_secs_f64(),
        state_bytes: (d * 16) as u64,
    });

    // wavelet: stateless across frames, one frame buffer resident
    let levels = max_levels(d).min(4);
    if levels == 0 {
        return Err(anyhow!("frame too short for wavelet analysis"));
    }
    let start = Instant::now();
    let wavelet_curve = wavelet_denoise_frames(
        &frames,
        WaveletParams {
            levels,
            threshold: ThresholdRule::Universal,
        },
    )?;
    entries.push(BenchEntry {
        method: "wavelet".into(),
        rmse: synth::rmse(&wavelet_curve, &truth_native)?,
        total_seconds: start.elapsed().as_secs_f64(),
        state_bytes: (d * 8) as u64,
    });

    Ok(BenchReport {
        frames: frames.len(),
        entries,
        online_per_frame_us_early,
        online_per_frame_us_late,
    })
}

fn max_levels(len: usize) -> usize {
    let mut levels = 0;
    let mut n = len;
    while n >= 2 {
        levels += 1;
        n /= 2;
    }
    levels
}
