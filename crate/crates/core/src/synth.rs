//! Seeded synthetic data with known ground truth: multi-frame streams around
//! a chosen mean function, and waterfalls with vehicle stripes. Used by the
//! benchmarks, the test suites and the demo — the desk-scale stand-in for
//! field recordings.

use crate::model::{EvalGrid, FrameRecord, MeanCurve, StreamConfig};
use crate::trajectory::{Track, TrajectorySet, Waterfall};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    BadScenario(&'static str),
    #[error("curves live on different grids")]
    GridMismatch,
    #[error("no grid point is supported in both curves")]
    NoSupportedPoints,
    #[error("scenario file: {0}")]
    BadFile(String),
}

/// One Gaussian component of a bump mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussBump {
    pub center: f64,
    pub width: f64,
    pub height: f64,
}

/// Named mean function families. `Sum` composes parts pointwise, e.g. a sine
/// with bumps on top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeanFn {
    Constant {
        value: f64,
    },
    Linear {
        intercept: f64,
        slope: f64,
    },
    Sine {
        amplitude: f64,
        period: f64,
        phase: f64,
    },
    Bumps {
        bumps: Vec<GaussBump>,
    },
    Sum {
        parts: Vec<MeanFn>,
    },
}

impl MeanFn {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            MeanFn::Constant { value } => *value,
            MeanFn::Linear { intercept, slope } => intercept + slope * x,
            MeanFn::Sine {
                amplitude,
                period,
                phase,
            } => amplitude * (2.0 * std::f64::consts::PI * x / period + phase).sin(),
            MeanFn::Bumps { bumps } => bumps
                .iter()
                .map(|b| {
                    let z = (x - b.center) / b.width;
                    b.height * (-0.5 * z * z).exp()
                })
                .sum(),
            MeanFn::Sum { parts } => parts.iter().map(|p| p.eval(x)).sum(),
        }
    }

    /// The true mean evaluated on a grid (fully supported).
    pub fn curve_on(&self, grid: &EvalGrid) -> MeanCurve {
        let values: Vec<f64> = grid.points().iter().map(|&x| self.eval(x)).collect();
        let support = vec![true; grid.len()];
        MeanCurve::new(grid.clone(), values, support).expect("lengths match")
    }
}

/// Stream generation recipe: mean function, white-noise level, amplitude of
/// the smooth per-frame stochastic component, and the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanScenario {
    pub mean: MeanFn,
    pub noise_sigma: f64,
    #[serde(default)]
    pub process_amp: f64,
    #[serde(default)]
    pub seed: u64,
}

impl MeanScenario {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.noise_sigma < 0.0 || self.noise_sigma.is_nan() {
            return Err(SynthError::BadScenario("noise_sigma must be >= 0"));
        }
        if self.process_amp < 0.0 || self.process_amp.is_nan() {
            return Err(SynthError::BadScenario("process_amp must be >= 0"));
        }
        Ok(())
    }
}

fn frame_rng(seed: u64, frame: u64) -> ChaCha8Rng {
    // independent per-frame streams derived from (seed, frame)
    ChaCha8Rng::seed_from_u64(seed ^ (frame.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Draw `frames` observation frames `Y = mu(X) + Phi_f(X) + eps` and return
/// them with the true mean on the native coordinates.
///
/// `Phi_f` is a smooth mean-zero per-frame perturbation
/// `amp (Z1 sin(2 pi x / |X|) + Z2 cos(2 pi x / |X|))` with fresh standard
/// Gaussians per frame; `eps` is i.i.d. Gaussian noise. Deterministic in
/// (seed, frame index).
pub fn generate_stream(
    scenario: &MeanScenario,
    config: &StreamConfig,
    frames: usize,
) -> Result<(Vec<FrameRecord>, MeanCurve), SynthError> {
    scenario.validate()?;
    if frames < 1 {
        return Err(SynthError::BadScenario("frames must be >= 1"));
    }
    let coords = config.coordinates();
    let span = config.span_m();
    let omega = 2.0 * std::f64::consts::PI / span;
    let mut out = Vec::with_capacity(frames);
    for k in 0..frames {
        let mut rng = frame_rng(scenario.seed, k as u64);
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let amplitudes: Vec<f64> = coords
            .iter()
            .map(|&x| {
                let process =
                    scenario.process_amp * (z1 * (omega * x).sin() + z2 * (omega * x).cos());
                let eps: f64 = rng.sample(StandardNormal);
                scenario.mean.eval(x) + process + scenario.noise_sigma * eps
            })
            .collect();
        out.push(FrameRecord {
            second: (k as u32) / config.fps,
            frame_index: (k as u32) % config.fps + 1,
            coordinates: coords.clone(),
            amplitudes,
        });
    }
    let grid = EvalGrid::new(coords).expect("config has >= 2 points");
    let truth = scenario.mean.curve_on(&grid);
    Ok((out, truth))
}

/// One synthetic vehicle: a Gaussian-cross-section stripe along
/// `col(row) = (row - entry_row) * velocity * row_period / col_spacing`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleSpec {
    pub entry_row: usize,
    pub velocity_mps: f64,
    /// Peak stripe amplitude.
    pub amplitude: f64,
    /// Gaussian cross-section width in columns.
    pub width_cols: f64,
}

impl VehicleSpec {
    fn validate(&self, rows: usize) -> Result<(), SynthError> {
        if self.velocity_mps <= 0.0 || self.velocity_mps.is_nan() {
            return Err(SynthError::BadScenario("vehicle velocity must be > 0"));
        }
        if self.amplitude <= 0.0 || self.amplitude.is_nan() {
            return Err(SynthError::BadScenario("vehicle amplitude must be > 0"));
        }
        if self.width_cols <= 0.0 || self.width_cols.is_nan() {
            return Err(SynthError::BadScenario("vehicle width must be > 0"));
        }
        if self.entry_row >= rows {
            return Err(SynthError::BadScenario("vehicle enters after the last row"));
        }
        Ok(())
    }
}

/// Waterfall rows are one second each; columns reuse the stream's point
/// spacing. Stripes add up, Gaussian background noise is added on top and
/// the result is clamped at zero (amplitudes are non-negative). Truth
/// keypoints are the rounded line positions under the same boundary rule as
/// the tracker: nothing on the last row or column.
pub fn generate_waterfall(
    vehicles: &[VehicleSpec],
    rows: usize,
    config: &StreamConfig,
    noise_sigma: f64,
    seed: u64,
) -> Result<(Waterfall, TrajectorySet), SynthError> {
    if rows < 2 {
        return Err(SynthError::BadScenario("waterfall needs >= 2 rows"));
    }
    if noise_sigma < 0.0 || noise_sigma.is_nan() {
        return Err(SynthError::BadScenario("noise_sigma must be >= 0"));
    }
    let cols = config.points_per_frame;
    let row_period = 1.0;
    let slope_of = |v: &VehicleSpec| v.velocity_mps * row_period / config.point_spacing;

    let mut values = vec![0.0f64; rows * cols];
    if noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in values.iter_mut() {
            let eps: f64 = rng.sample(StandardNormal);
            *v = noise_sigma * eps;
        }
    }
    let mut tracks = Vec::with_capacity(vehicles.len());
    for vehicle in vehicles {
        vehicle.validate(rows)?;
        let slope = slope_of(vehicle);
        let reach = 4.0 * vehicle.width_cols;
        for row in vehicle.entry_row..rows {
            let center = (row - vehicle.entry_row) as f64 * slope;
            if center - reach > (cols - 1) as f64 {
                break;
            }
            let j_lo = ((center - reach).ceil().max(0.0)) as usize;
            let j_hi = ((center + reach).floor().min((cols - 1) as f64)) as usize;
            for j in j_lo..=j_hi {
                let z = (j as f64 - center) / vehicle.width_cols;
                values[row * cols + j] += vehicle.amplitude * (-0.5 * z * z).exp();
            }
        }

        let mut points = vec![(vehicle.entry_row, 0usize)];
        for row in vehicle.entry_row + 1..rows.saturating_sub(1) {
            let col = ((row - vehicle.entry_row) as f64 * slope).round() as usize;
            if col + 1 >= cols {
                break;
            }
            points.push((row, col));
        }
        tracks.push(Track {
            points,
            velocity_mps: Some(vehicle.velocity_mps),
        });
    }
    for v in values.iter_mut() {
        *v = v.max(0.0);
    }
    let waterfall = Waterfall::new(values, rows, cols, row_period, config.point_spacing)
        .expect("validated shape and clamped values");
    let truth = TrajectorySet { tracks };
    debug_assert!(truth.is_valid());
    Ok((waterfall, truth))
}

/// Root mean squared difference over grid points supported in both curves.
pub fn rmse(curve: &MeanCurve, truth: &MeanCurve) -> Result<f64, SynthError> {
    if curve.grid.points() != truth.grid.points() {
        return Err(SynthError::GridMismatch);
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in 0..curve.values.len() {
        if curve.support[i] && truth.support[i] {
            let d = curve.values[i] - truth.values[i];
            sum += d * d;
            n += 1;
        }
    }
    if n == 0 {
        return Err(SynthError::NoSupportedPoints);
    }
    Ok((sum / n as f64).sqrt())
}

/// Checked-in scenario file: a `[stream]` section plus an optional
/// `[waterfall]` section for trajectory experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub stream: StreamScenario,
    #[serde(default)]
    pub waterfall: Option<WaterfallScenario>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamScenario {
    #[serde(default = "default_points")]
    pub points_per_frame: usize,
    #[serde(default = "default_spacing")]
    pub point_spacing: f64,
    #[serde(default = "default_fps")]
    pub fps: u32,
    #[serde(default)]
    pub distance_origin: f64,
    /// Synthetic streams carry signed noise, so this defaults to true.
    #[serde(default = "default_true")]
    pub allow_negative: bool,
    #[serde(default = "default_frames")]
    pub frames: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub process_amp: f64,
    pub mean: MeanFn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaterfallScenario {
    pub rows: usize,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    pub vehicles: Vec<VehicleSpec>,
}

fn default_points() -> usize {
    200
}
fn default_spacing() -> f64 {
    0.4
}
fn default_fps() -> u32 {
    3
}
fn default_frames() -> usize {
    200
}
fn default_true() -> bool {
    true
}

impl ScenarioFile {
    pub fn from_toml(text: &str) -> Result<Self, SynthError> {
        toml::from_str(text).map_err(|e| SynthError::BadFile(e.to_string()))
    }

    pub fn stream_config(&self) -> StreamConfig {
        StreamConfig {
            points_per_frame: self.stream.points_per_frame,
            point_spacing: self.stream.point_spacing,
            fps: self.stream.fps,
            distance_origin: self.stream.distance_origin,
            allow_negative: self.stream.allow_negative,
        }
    }

    pub fn mean_scenario(&self) -> MeanScenario {
        MeanScenario {
            mean: self.stream.mean.clone(),
            noise_sigma: self.stream.noise_sigma,
            process_amp: self.stream.process_amp,
            seed: self.stream.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small_config(d: usize) -> StreamConfig {
        StreamConfig {
            points_per_frame: d,
            point_spacing: 0.4,
            fps: 3,
            distance_origin: 0.0,
            allow_negative: true,
        }
    }

    #[test]
    fn noiseless_stream_equals_mean() {
        let scenario = MeanScenario {
            mean: MeanFn::Sine {
                amplitude: 1.0,
                period: 20.0,
                phase: 0.0,
            },
            noise_sigma: 0.0,
            process_amp: 0.0,
            seed: 1,
        };
        let cfg = small_config(64);
        let (frames, truth) = generate_stream(&scenario, &cfg, 5).unwrap();
        for frame in &frames {
            for (y, t) in frame.amplitudes.iter().zip(&truth.values) {
                assert_abs_diff_eq!(*y, *t, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn same_seed_same_stream() {
        let scenario = MeanScenario {
            mean: MeanFn::Constant { value: 3.0 },
            noise_sigma: 0.5,
            process_amp: 0.2,
            seed: 99,
        };
        let cfg = small_config(32);
        let (a, _) = generate_stream(&scenario, &cfg, 7).unwrap();
        let (b, _) = generate_stream(&scenario, &cfg, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noise_variance_matches_sigma() {
        let sigma = 0.7;
        let scenario = MeanScenario {
            mean: MeanFn::Constant { value: 5.0 },
            noise_sigma: sigma,
            process_amp: 0.0,
            seed: 12,
        };
        let cfg = small_config(4);
        let (frames, _) = generate_stream(&scenario, &cfg, 10_000).unwrap();
        // sample variance at a fixed distance point across frames
        let ys: Vec<f64> = frames.iter().map(|f| f.amplitudes[2]).collect();
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (ys.len() - 1) as f64;
        assert!(
            (var - sigma * sigma).abs() < 0.05 * sigma * sigma,
            "var {var} vs sigma^2 {}",
            sigma * sigma
        );
    }

    #[test]
    fn clean_waterfall_argmax_follows_truth() {
        let cfg = small_config(80);
        let vehicles = vec![VehicleSpec {
            entry_row: 2,
            velocity_mps: 0.8, // slope 2 cols/row at 0.4 m spacing
            amplitude: 6.0,
            width_cols: 1.5,
        }];
        let (w, truth) = generate_waterfall(&vehicles, 25, &cfg, 0.0, 3).unwrap();
        assert_eq!(truth.len(), 1);
        for &(row, col) in &truth.tracks[0].points {
            let arg = w
                .row(row)
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(arg, col, "row {row}");
        }
    }

    #[test]
    fn empty_vehicle_list_is_pure_noise() {
        let cfg = small_config(16);
        let (w, truth) = generate_waterfall(&[], 10, &cfg, 1.0, 5).unwrap();
        assert!(truth.is_empty());
        assert!(w.values().iter().all(|&v| v >= 0.0));
        assert!(w.values().iter().any(|&v| v > 0.0));
    }

    #[test]
    fn waterfall_composition_is_additive_without_noise() {
        let cfg = small_config(60);
        let a = VehicleSpec {
            entry_row: 1,
            velocity_mps: 0.8,
            amplitude: 4.0,
            width_cols: 2.0,
        };
        let b = VehicleSpec {
            entry_row: 8,
            velocity_mps: 1.2,
            amplitude: 3.0,
            width_cols: 1.0,
        };
        let (wa, _) = generate_waterfall(std::slice::from_ref(&a), 20, &cfg, 0.0, 0).unwrap();
        let (wb, _) = generate_waterfall(std::slice::from_ref(&b), 20, &cfg, 0.0, 0).unwrap();
        let (wab, _) = generate_waterfall(&[a, b], 20, &cfg, 0.0, 0).unwrap();
        for i in 0..wab.values().len() {
            assert_abs_diff_eq!(
                wab.values()[i],
                wa.values()[i] + wb.values()[i],
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn truth_tracks_satisfy_invariants() {
        let cfg = small_config(100);
        let vehicles: Vec<VehicleSpec> = (0..5)
            .map(|k| VehicleSpec {
                entry_row: 3 * k,
                velocity_mps: 0.5 + 0.2 * k as f64,
                amplitude: 5.0,
                width_cols: 2.0,
            })
            .collect();
        let (_, truth) = generate_waterfall(&vehicles, 40, &cfg, 0.5, 11).unwrap();
        assert!(truth.is_valid());
        assert_eq!(truth.len(), 5);
    }

    #[test]
    fn rmse_examples() {
        let grid = EvalGrid::new(vec![0.0, 1.0, 2.0]).unwrap();
        let a = MeanCurve::new(grid.clone(), vec![1.0, 2.0, 3.0], vec![true; 3]).unwrap();
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        let b = MeanCurve::new(grid.clone(), vec![2.5, 3.5, 4.5], vec![true; 3]).unwrap();
        assert_abs_diff_eq!(rmse(&a, &b).unwrap(), 1.5, epsilon = 1e-15);
        let other = EvalGrid::new(vec![0.0, 1.0, 2.5]).unwrap();
        let c = MeanCurve::new(other, vec![0.0; 3], vec![true; 3]).unwrap();
        assert_eq!(rmse(&a, &c), Err(SynthError::GridMismatch));
        let unsupported = MeanCurve::new(grid, vec![f64::NAN; 3], vec![false; 3]).unwrap();
        assert_eq!(rmse(&a, &unsupported), Err(SynthError::NoSupportedPoints));
    }

    #[test]
    fn rmse_matches_brute_force_on_random_pair() {
        let grid = EvalGrid::new((0..40).map(|i| i as f64).collect()).unwrap();
        let va: Vec<f64> = (0..40).map(|i| ((i * 31 + 7) % 13) as f64 * 0.1).collect();
        let vb: Vec<f64> = (0..40).map(|i| ((i * 17 + 3) % 11) as f64 * 0.2).collect();
        let mut support = vec![true; 40];
        support[5] = false;
        support[20] = false;
        let a = MeanCurve::new(grid.clone(), va.clone(), support.clone()).unwrap();
        let b = MeanCurve::new(grid, vb.clone(), vec![true; 40]).unwrap();
        let mut sum = 0.0;
        let mut n = 0;
        for i in 0..40 {
            if support[i] {
                sum += (va[i] - vb[i]) * (va[i] - vb[i]);
                n += 1;
            }
        }
        let expect = (sum / n as f64).sqrt();
        assert_abs_diff_eq!(rmse(&a, &b).unwrap(), expect, epsilon = 1e-12);
    }

    #[test]
    fn scenario_file_roundtrip() {
        let text = r#"
[stream]
points_per_frame = 120
point_spacing = 0.4
fps = 3
frames = 60
seed = 7
noise_sigma = 0.2
process_amp = 0.05

[stream.mean]
kind = "sum"

[[stream.mean.parts]]
kind = "sine"
amplitude = 1.0
period = 40.0
phase = 0.0

[[stream.mean.parts]]
kind = "bumps"
bumps = [{ center = 20.0, width = 3.0, height = 2.0 }]

[waterfall]
rows = 50
noise_sigma = 1.0
seed = 3
vehicles = [
    { entry_row = 5, velocity_mps = 20.0, amplitude = 5.0, width_cols = 2.0 },
]
"#;
        let file = ScenarioFile::from_toml(text).unwrap();
        assert_eq!(file.stream.points_per_frame, 120);
        assert_eq!(file.stream_config().fps, 3);
        let scenario = file.mean_scenario();
        assert_eq!(scenario.seed, 7);
        match &scenario.mean {
            MeanFn::Sum { parts } => assert_eq!(parts.len(), 2),
            other => panic!("unexpected mean: {other:?}"),
        }
        let wf = file.waterfall.unwrap();
        assert_eq!(wf.rows, 50);
        assert_eq!(wf.vehicles.len(), 1);
    }

    #[test]
    fn scenario_file_rejects_garbage() {
        assert!(matches!(
            ScenarioFile::from_toml("not toml at all ["),
            Err(SynthError::BadFile(_))
        ));
    }
}
