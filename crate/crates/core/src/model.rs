//! Domain types shared by every stage of the pipeline: stream configuration,
//! frames, evaluation grids and mean curves.
//!
//! All distances are meters end to end; bandwidths are meters too. Amplitudes
//! are stored as f64 internally even though the wire format is f32 — the
//! least-squares accumulations sum thousands of terms and need the headroom.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid stream config: {0}")]
    BadConfig(&'static str),
    #[error("frame has {coords} coordinates but {amps} amplitudes")]
    LengthMismatch { coords: usize, amps: usize },
    #[error("frame has {got} points but the stream is configured for {want}")]
    PointCountMismatch { got: usize, want: usize },
    #[error("coordinates non-increasing at index {0}")]
    NonIncreasingCoordinate(usize),
    #[error("non-finite coordinate at index {0}")]
    NonFiniteCoordinate(usize),
    #[error("non-finite amplitude at index {0}")]
    NonFiniteAmplitude(usize),
    #[error("negative amplitude at index {0}")]
    NegativeAmplitude(usize),
    #[error("evaluation grid needs at least 2 points, got {0}")]
    GridTooSmall(usize),
    #[error("grid points non-increasing at index {0}")]
    GridNonIncreasing(usize),
    #[error("curve has {values} values but {flags} support flags for {grid} grid points")]
    CurveShapeMismatch {
        grid: usize,
        values: usize,
        flags: usize,
    },
}

/// Acquisition geometry of one DAS stream.
///
/// `allow_negative` relaxes the amplitude sign check for pre-normalized data;
/// raw interrogator amplitudes are non-negative and rejected otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamConfig {
    /// Number of distance points per frame (D).
    pub points_per_frame: usize,
    /// Meters between consecutive distance points.
    pub point_spacing: f64,
    /// Frames emitted per second.
    pub fps: u32,
    /// Distance coordinate of the first point, meters.
    pub distance_origin: f64,
    /// Accept negative amplitudes (pre-normalized data).
    pub allow_negative: bool,
}

impl Default for StreamConfig {
    /// The reference rig: 800 points at 0.4 m, 3 frames per second.
    fn default() -> Self {
        StreamConfig {
            points_per_frame: 800,
            point_spacing: 0.4,
            fps: 3,
            distance_origin: 0.0,
            allow_negative: false,
        }
    }
}

impl StreamConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.points_per_frame < 2 {
            return Err(ModelError::BadConfig("points_per_frame must be >= 2"));
        }
        if self.point_spacing <= 0.0 || !self.point_spacing.is_finite() {
            return Err(ModelError::BadConfig("point_spacing must be > 0"));
        }
        if self.fps < 1 {
            return Err(ModelError::BadConfig("fps must be >= 1"));
        }
        if !self.distance_origin.is_finite() {
            return Err(ModelError::BadConfig("distance_origin must be finite"));
        }
        Ok(())
    }

    /// Length of the covered distance interval, meters.
    pub fn span_m(&self) -> f64 {
        (self.points_per_frame - 1) as f64 * self.point_spacing
    }

    /// The regular coordinate vector `origin + d * spacing`.
    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.points_per_frame)
            .map(|d| self.distance_origin + d as f64 * self.point_spacing)
            .collect()
    }
}

/// One frame: D amplitude observations at known, strictly increasing
/// distance coordinates. Irregular grids are allowed; the coordinates are
/// carried explicitly rather than derived from the config.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub second: u32,
    /// 1-based frame index within the second.
    pub frame_index: u32,
    pub coordinates: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

impl FrameRecord {
    /// Frame on the config's regular coordinates.
    pub fn on_regular_grid(
        second: u32,
        frame_index: u32,
        config: &StreamConfig,
        amplitudes: Vec<f64>,
    ) -> Self {
        FrameRecord {
            second,
            frame_index,
            coordinates: config.coordinates(),
            amplitudes,
        }
    }

    pub fn len(&self) -> usize {
        self.coordinates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coordinates.is_empty()
    }
}

/// Check every frame invariant against the stream config. The frame is not
/// modified; an `Err` names the first offending entry.
pub fn validate_frame(frame: &FrameRecord, config: &StreamConfig) -> Result<(), ModelError> {
    if frame.coordinates.len() != frame.amplitudes.len() {
        return Err(ModelError::LengthMismatch {
            coords: frame.coordinates.len(),
            amps: frame.amplitudes.len(),
        });
    }
    if frame.coordinates.len() != config.points_per_frame {
        return Err(ModelError::PointCountMismatch {
            got: frame.coordinates.len(),
            want: config.points_per_frame,
        });
    }
    for (i, &x) in frame.coordinates.iter().enumerate() {
        if !x.is_finite() {
            return Err(ModelError::NonFiniteCoordinate(i));
        }
        if i > 0 && x <= frame.coordinates[i - 1] {
            return Err(ModelError::NonIncreasingCoordinate(i));
        }
    }
    for (i, &y) in frame.amplitudes.iter().enumerate() {
        if !y.is_finite() {
            return Err(ModelError::NonFiniteAmplitude(i));
        }
        if y < 0.0 && !config.allow_negative {
            return Err(ModelError::NegativeAmplitude(i));
        }
    }
    Ok(())
}

/// Strictly increasing evaluation distances for mean curves.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalGrid {
    points: Vec<f64>,
}

impl EvalGrid {
    pub fn new(points: Vec<f64>) -> Result<Self, ModelError> {
        if points.len() < 2 {
            return Err(ModelError::GridTooSmall(points.len()));
        }
        for (i, &x) in points.iter().enumerate() {
            if !x.is_finite() {
                return Err(ModelError::NonFiniteCoordinate(i));
            }
            if i > 0 && x <= points[i - 1] {
                return Err(ModelError::GridNonIncreasing(i));
            }
        }
        Ok(EvalGrid { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.points[0]
    }

    pub fn max(&self) -> f64 {
        *self.points.last().unwrap()
    }
}

/// G equally spaced evaluation points spanning the configured distance
/// interval. The last point is the exact interval endpoint so the grid never
/// leaves the stream's span.
pub fn regular_grid(config: &StreamConfig, g: usize) -> Result<EvalGrid, ModelError> {
    if g < 2 {
        return Err(ModelError::GridTooSmall(g));
    }
    let span = config.span_m();
    let step = span / (g - 1) as f64;
    let mut points: Vec<f64> = (0..g - 1)
        .map(|i| config.distance_origin + i as f64 * step)
        .collect();
    points.push(config.distance_origin + span);
    EvalGrid::new(points)
}

/// A mean function estimate on an evaluation grid. `support[i]` is false where
/// the local system was degenerate; `values[i]` is NaN there.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanCurve {
    pub grid: EvalGrid,
    pub values: Vec<f64>,
    pub support: Vec<bool>,
}

impl MeanCurve {
    pub fn new(grid: EvalGrid, values: Vec<f64>, support: Vec<bool>) -> Result<Self, ModelError> {
        if values.len() != grid.len() || support.len() != grid.len() {
            return Err(ModelError::CurveShapeMismatch {
                grid: grid.len(),
                values: values.len(),
                flags: support.len(),
            });
        }
        Ok(MeanCurve {
            grid,
            values,
            support,
        })
    }

    pub fn supported_count(&self) -> usize {
        self.support.iter().filter(|&&s| s).count()
    }

    /// Dense value vector with unsupported points filled by linear
    /// interpolation from the nearest supported neighbors (edge points copy
    /// the nearest supported value). Returns None if nothing is supported.
    pub fn interpolated_values(&self) -> Option<Vec<f64>> {
        if self.supported_count() == 0 {
            return None;
        }
        let xs = self.grid.points();
        let mut out = self.values.clone();
        let supported: Vec<usize> = (0..out.len()).filter(|&i| self.support[i]).collect();
        for i in 0..out.len() {
            if self.support[i] {
                continue;
            }
            let next = supported.iter().find(|&&j| j > i);
            let prev = supported.iter().rev().find(|&&j| j < i);
            out[i] = match (prev, next) {
                (Some(&a), Some(&b)) => {
                    let t = (xs[i] - xs[a]) / (xs[b] - xs[a]);
                    self.values[a] + t * (self.values[b] - self.values[a])
                }
                (Some(&a), None) => self.values[a],
                (None, Some(&b)) => self.values[b],
                (None, None) => unreachable!(),
            };
        }
        Some(out)
    }
}
