//! Browser demo bindings: three interactive operations over JSON strings so
//! the same functions are unit-testable natively and callable from the
//! static page in `www/`.
//!
//! Build for the web with `wasm-pack build --release --target web
//! --out-dir www/pkg` and serve the `www/` directory.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::wasm_bindgen;

use dasflow::baselines::{
    kalman_denoise_frames, wavelet_denoise_frames, ThresholdRule, WaveletParams,
};
use dasflow::lpr;
use dasflow::model::{EvalGrid, StreamConfig};
use dasflow::online::{OnlineConfig, OnlineState};
use dasflow::synth::{
    generate_stream, generate_waterfall, rmse, GaussBump, MeanFn, MeanScenario, VehicleSpec,
};
use dasflow::trajectory::{extract_trajectories, match_trajectories, smooth_rows, TrackerConfig};

fn demo_mean() -> MeanFn {
    MeanFn::Sum {
        parts: vec![
            MeanFn::Constant { value: 2.0 },
            MeanFn::Sine {
                amplitude: 1.0,
                period: 40.0,
                phase: 0.3,
            },
            MeanFn::Bumps {
                bumps: vec![
                    GaussBump {
                        center: 20.0,
                        width: 4.0,
                        height: 1.5,
                    },
                    GaussBump {
                        center: 60.0,
                        width: 5.0,
                        height: -1.0,
                    },
                ],
            },
        ],
    }
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

fn err_json(message: impl std::fmt::Display) -> String {
    serde_json::json!({ "error": message.to_string() }).to_string()
}

// ---------------------------------------------------------------------------
// operation 1: streaming mean estimation vs the baselines
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(default)]
struct EstimateParams {
    seed: u64,
    frames: usize,
    points: usize,
    noise_sigma: f64,
    process_amp: f64,
    ladder: usize,
}

impl Default for EstimateParams {
    fn default() -> Self {
        EstimateParams {
            seed: 1,
            frames: 60,
            points: 200,
            noise_sigma: 0.3,
            process_amp: 0.1,
            ladder: 5,
        }
    }
}

#[derive(Serialize)]
struct EstimateOut {
    grid: Vec<f64>,
    truth: Vec<f64>,
    last_frame: Vec<f64>,
    online: Vec<f64>,
    batch: Vec<f64>,
    kalman: Vec<f64>,
    wavelet: Vec<f64>,
    rmse: RmseOut,
    bandwidth: f64,
}

#[derive(Serialize)]
struct RmseOut {
    online: f64,
    batch: f64,
    kalman: f64,
    wavelet: f64,
}

/// Generate a noisy multi-frame stream and estimate its mean with every
/// method; curves share the native coordinate grid for plotting.
#[wasm_bindgen]
pub fn estimate_demo(params_json: &str) -> String {
    match estimate_demo_impl(params_json) {
        Ok(s) => s,
        Err(e) => err_json(e),
    }
}

fn estimate_demo_impl(params_json: &str) -> Result<String, Box<dyn std::error::Error>> {
    let p: EstimateParams = serde_json::from_str(params_json)?;
    if p.frames == 0 || p.points < 16 || p.points > 2000 || p.frames > 2000 {
        return Err("frames in 1..=2000 and points in 16..=2000 required".into());
    }
    let config = StreamConfig {
        points_per_frame: p.points,
        point_spacing: 0.4,
        fps: 3,
        distance_origin: 0.0,
        allow_negative: true,
    };
    let scenario = MeanScenario {
        mean: demo_mean(),
        noise_sigma: p.noise_sigma,
        process_amp: p.process_amp,
        seed: p.seed,
    };
    let (frames, truth) = generate_stream(&scenario, &config, p.frames)?;
    let grid = EvalGrid::new(config.coordinates())?;

    let mut state = OnlineState::init(
        grid.clone(),
        OnlineConfig::with_ladder(p.ladder.clamp(1, 32)),
        &frames[0],
    )?;
    for frame in &frames {
        state.ingest_frame(frame)?;
    }
    let online = state.query_mean()?;
    let bandwidth = state.current_bandwidth()?;

    let (_, pilot) = lpr::rot_bandwidth(&frames[..1], p.points as u64)?;
    let h = pilot.bandwidth_for((p.frames * p.points) as u64);
    let batch = lpr::batch_estimate(&frames, &grid, h)?;
    let kalman = kalman_denoise_frames(&frames)?;
    let levels = (p.points.ilog2() as usize).clamp(1, 4);
    let wavelet = wavelet_denoise_frames(
        &frames,
        WaveletParams {
            levels,
            threshold: ThresholdRule::Universal,
        },
    )?;

    let rmse_out = RmseOut {
        online: rmse(&online, &truth)?,
        batch: rmse(&batch, &truth)?,
        kalman: rmse(&kalman, &truth)?,
        wavelet: rmse(&wavelet, &truth)?,
    };
    let dense = |c: &dasflow::model::MeanCurve| -> Vec<f64> {
        c.interpolated_values()
            .unwrap_or_else(|| c.values.clone())
            .into_iter()
            .map(round3)
            .collect()
    };
    let out = EstimateOut {
        grid: grid.points().iter().map(|&x| round3(x)).collect(),
        truth: dense(&truth),
        last_frame: frames
            .last()
            .unwrap()
            .amplitudes
            .iter()
            .map(|&v| round3(v))
            .collect(),
        online: dense(&online),
        batch: dense(&batch),
        kalman: dense(&kalman),
        wavelet: dense(&wavelet),
        rmse: rmse_out,
        bandwidth,
    };
    Ok(serde_json::to_string(&out)?)
}

// ---------------------------------------------------------------------------
// operation 2: waterfall denoising and trajectory extraction
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(default)]
struct WaterfallParams {
    seed: u64,
    vehicles: usize,
    rows: usize,
    cols: usize,
    noise_sigma: f64,
    amplitude: f64,
    smooth: bool,
}

impl Default for WaterfallParams {
    fn default() -> Self {
        WaterfallParams {
            seed: 0,
            vehicles: 8,
            rows: 200,
            cols: 400,
            noise_sigma: 1.0,
            amplitude: 5.0,
            smooth: true,
        }
    }
}

#[derive(Serialize)]
struct TrackOut {
    points: Vec<(usize, usize)>,
    velocity_mps: Option<f64>,
}

#[derive(Serialize)]
struct WaterfallOut {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    tracks: Vec<TrackOut>,
    truth: Vec<TrackOut>,
    metrics: dasflow::trajectory::MatchReport,
}

/// Generate a vehicle waterfall, optionally denoise it, extract trajectories
/// and score them against the ground truth.
#[wasm_bindgen]
pub fn waterfall_demo(params_json: &str) -> String {
    match waterfall_demo_impl(params_json) {
        Ok(s) => s,
        Err(e) => err_json(e),
    }
}

fn waterfall_demo_impl(params_json: &str) -> Result<String, Box<dyn std::error::Error>> {
    let p: WaterfallParams = serde_json::from_str(params_json)?;
    if p.rows < 10 || p.rows > 400 || p.cols < 50 || p.cols > 900 {
        return Err("rows in 10..=400 and cols in 50..=900 required".into());
    }
    if p.vehicles == 0 || p.vehicles > 40 {
        return Err("vehicles in 1..=40 required".into());
    }
    let config = StreamConfig {
        points_per_frame: p.cols,
        point_spacing: 10.0,
        fps: 3,
        distance_origin: 0.0,
        allow_negative: false,
    };
    let usable = p.rows.saturating_sub(20).max(1);
    let vehicles: Vec<VehicleSpec> = (0..p.vehicles)
        .map(|i| VehicleSpec {
            entry_row: 4 + i * usable / p.vehicles,
            velocity_mps: 35.0 - 10.0 * i as f64 / p.vehicles.max(2) as f64,
            amplitude: p.amplitude,
            width_cols: 2.0,
        })
        .collect();
    let (raw, truth) = generate_waterfall(&vehicles, p.rows, &config, p.noise_sigma, p.seed)?;
    let shown = if p.smooth {
        smooth_rows(&raw, 30.0)
    } else {
        raw.clone()
    };
    let tracker = TrackerConfig {
        peak_threshold: 2.4 * p.noise_sigma.max(0.1),
        v_init_min: 15.0,
        v_init_max: 50.0,
        cof: 0.3,
        fit_window: 5,
        min_track_len: 3,
    };
    let extracted = extract_trajectories(&shown, &tracker)?;
    let metrics = match_trajectories(&extracted, &truth, 5);
    let to_out = |set: &dasflow::trajectory::TrajectorySet| -> Vec<TrackOut> {
        set.tracks
            .iter()
            .map(|t| TrackOut {
                points: t.points.clone(),
                velocity_mps: t.velocity_mps.map(round3),
            })
            .collect()
    };
    let out = WaterfallOut {
        rows: shown.rows(),
        cols: shown.cols(),
        values: shown.values().iter().map(|&v| round3(v)).collect(),
        tracks: to_out(&extracted),
        truth: to_out(&truth),
        metrics,
    };
    Ok(serde_json::to_string(&out)?)
}

// ---------------------------------------------------------------------------
// operation 3: the candidate bandwidth ladder over time
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(default)]
struct BandwidthParams {
    seed: u64,
    frames: usize,
    points: usize,
    ladder: usize,
    noise_sigma: f64,
}

impl Default for BandwidthParams {
    fn default() -> Self {
        BandwidthParams {
            seed: 3,
            frames: 400,
            points: 200,
            ladder: 5,
            noise_sigma: 0.3,
        }
    }
}

#[derive(Serialize)]
struct BandwidthOut {
    bandwidth: Vec<f64>,
    etas: Vec<f64>,
    centroids: Vec<f64>,
    state_bytes: usize,
    h_floor: f64,
    interval_len: f64,
}

/// Stream frames and record how the bandwidth schedule, the candidate
/// ladder and the centroids evolve, plus the (constant) state size.
#[wasm_bindgen]
pub fn bandwidth_demo(params_json: &str) -> String {
    match bandwidth_demo_impl(params_json) {
        Ok(s) => s,
        Err(e) => err_json(e),
    }
}

fn bandwidth_demo_impl(params_json: &str) -> Result<String, Box<dyn std::error::Error>> {
    let p: BandwidthParams = serde_json::from_str(params_json)?;
    if p.frames == 0 || p.frames > 5000 || p.points < 16 || p.points > 2000 {
        return Err("frames in 1..=5000 and points in 16..=2000 required".into());
    }
    let config = StreamConfig {
        points_per_frame: p.points,
        point_spacing: 0.4,
        fps: 3,
        distance_origin: 0.0,
        allow_negative: true,
    };
    let scenario = MeanScenario {
        mean: demo_mean(),
        noise_sigma: p.noise_sigma,
        process_amp: 0.05,
        seed: p.seed,
    };
    let (frames, _) = generate_stream(&scenario, &config, p.frames)?;
    let grid = EvalGrid::new(config.coordinates())?;
    let mut state = OnlineState::init(
        grid,
        OnlineConfig::with_ladder(p.ladder.clamp(1, 32)),
        &frames[0],
    )?;
    let mut bandwidth = Vec::with_capacity(p.frames);
    for frame in &frames {
        state.ingest_frame(frame)?;
        bandwidth.push(state.current_bandwidth()?);
    }
    let ladder = state.ladder()?;
    let out = BandwidthOut {
        bandwidth,
        etas: ladder.etas,
        centroids: ladder.centroids,
        state_bytes: state.state_size(),
        h_floor: state.pilot().h_floor,
        interval_len: state.pilot().interval_len,
    };
    Ok(serde_json::to_string(&out)?)
}
