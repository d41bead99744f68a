//! Classical comparison denoisers: a scalar random-walk Kalman filter applied
//! across frames (time axis) and Haar wavelet soft-threshold denoising
//! applied along distance within each frame. Both follow the same protocol —
//! filter the multi-frame data first, then average.

use crate::model::{EvalGrid, FrameRecord, MeanCurve};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("empty series")]
    EmptySeries,
    #[error("no frames")]
    NoFrames,
    #[error("frame {frame} coordinates differ from the first frame")]
    MismatchedCoordinates { frame: usize },
    #[error("{levels} decomposition levels too deep for series of length {len}")]
    LevelsTooDeep { levels: usize, len: usize },
    #[error("decomposition needs at least one level")]
    ZeroLevels,
}

/// Random-walk Kalman parameters: state = signal level, prediction adds `q`,
/// update weighs measurement noise `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanParams {
    pub process_var: f64,
    pub measurement_var: f64,
    pub init_var: f64,
}

impl KalmanParams {
    /// Minimal data-driven choice: `r` is half the variance of first
    /// differences across frames (the difference of two i.i.d. noises has
    /// variance `2 sigma^2`), `q = r/10`, `p0 = r`. `r` is floored at 1e-12
    /// so identical frames stay valid.
    pub fn estimate(frames: &[FrameRecord]) -> Result<Self, BaselineError> {
        check_common_coordinates(frames)?;
        let d = frames[0].len();
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut n = 0u64;
        for pair in frames.windows(2) {
            for k in 0..d {
                let diff = pair[1].amplitudes[k] - pair[0].amplitudes[k];
                sum += diff;
                sum_sq += diff * diff;
                n += 1;
            }
        }
        let var = if n > 1 {
            let mean = sum / n as f64;
            ((sum_sq - sum * mean) / (n - 1) as f64).max(0.0)
        } else {
            0.0
        };
        let r = (var / 2.0).max(1e-12);
        Ok(KalmanParams {
            process_var: r / 10.0,
            measurement_var: r,
            init_var: r,
        })
    }
}

/// One scalar predict/update filter, initialized at the first observation.
#[derive(Debug, Clone, Copy)]
pub struct ScalarKalman {
    params: KalmanParams,
    state: Option<(f64, f64)>,
}

impl ScalarKalman {
    pub fn new(params: KalmanParams) -> Self {
        ScalarKalman {
            params,
            state: None,
        }
    }

    /// Filtered value after observing `z`.
    pub fn update(&mut self, z: f64) -> f64 {
        match self.state {
            None => {
                self.state = Some((z, self.params.init_var));
                z
            }
            Some((x, p)) => {
                let p_pred = p + self.params.process_var;
                let gain = p_pred / (p_pred + self.params.measurement_var);
                let x_new = x + gain * (z - x);
                self.state = Some((x_new, (1.0 - gain) * p_pred));
                x_new
            }
        }
    }

    pub fn value(&self) -> Option<f64> {
        self.state.map(|(x, _)| x)
    }

    pub fn variance(&self) -> Option<f64> {
        self.state.map(|(_, p)| p)
    }
}

/// Filter a series with the scalar recursion; output length equals input.
pub fn kalman_filter_series(
    series: &[f64],
    params: KalmanParams,
) -> Result<Vec<f64>, BaselineError> {
    if series.is_empty() {
        return Err(BaselineError::EmptySeries);
    }
    let mut filter = ScalarKalman::new(params);
    Ok(series.iter().map(|&z| filter.update(z)).collect())
}

fn check_common_coordinates(frames: &[FrameRecord]) -> Result<(), BaselineError> {
    if frames.is_empty() {
        return Err(BaselineError::NoFrames);
    }
    let first = &frames[0].coordinates;
    for (i, f) in frames.iter().enumerate().skip(1) {
        if f.coordinates != *first {
            return Err(BaselineError::MismatchedCoordinates { frame: i });
        }
    }
    Ok(())
}

/// Per distance point: filter the across-frame series, then average the
/// filtered values. Returned on the frames' native coordinates.
pub fn kalman_denoise_frames(frames: &[FrameRecord]) -> Result<MeanCurve, BaselineError> {
    let params = KalmanParams::estimate(frames)?;
    let d = frames[0].len();
    let f_count = frames.len() as f64;
    let mut values = Vec::with_capacity(d);
    for k in 0..d {
        let mut filter = ScalarKalman::new(params);
        let mut acc = 0.0;
        for frame in frames {
            acc += filter.update(frame.amplitudes[k]);
        }
        values.push(acc / f_count);
    }
    let grid = EvalGrid::new(frames[0].coordinates.clone()).expect("validated frame coordinates");
    let support = vec![true; d];
    Ok(MeanCurve::new(grid, values, support).expect("lengths match"))
}

/// Wavelet decomposition depth and detail thresholding rule. Soft
/// thresholding only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveletParams {
    pub levels: usize,
    pub threshold: ThresholdRule,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdRule {
    /// `lambda = sigma_hat sqrt(2 ln n)` with `sigma_hat` from the median
    /// absolute finest detail.
    Universal,
    Fixed(f64),
}

/// Orthonormal Haar analysis pyramid. `details[0]` is the finest level;
/// `lens` records the pre-pad length at each level so reconstruction can
/// drop padding.
#[derive(Debug, Clone, PartialEq)]
pub struct HaarPyramid {
    pub approx: Vec<f64>,
    pub details: Vec<Vec<f64>>,
    lens: Vec<usize>,
}

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Forward Haar transform: `approx = (a+b)/sqrt2`, `detail = (a-b)/sqrt2`,
/// recursing on the approximation. Odd lengths are padded by edge
/// replication before each level.
pub fn haar_dwt(series: &[f64], levels: usize) -> Result<HaarPyramid, BaselineError> {
    if levels == 0 {
        return Err(BaselineError::ZeroLevels);
    }
    if series.is_empty() || series.len() < (1usize << levels) {
        return Err(BaselineError::LevelsTooDeep {
            levels,
            len: series.len(),
        });
    }
    let mut current = series.to_vec();
    let mut details = Vec::with_capacity(levels);
    let mut lens = Vec::with_capacity(levels);
    for _ in 0..levels {
        lens.push(current.len());
        if current.len() % 2 == 1 {
            current.push(*current.last().unwrap());
        }
        let half = current.len() / 2;
        let mut approx = Vec::with_capacity(half);
        let mut detail = Vec::with_capacity(half);
        for i in 0..half {
            let a = current[2 * i];
            let b = current[2 * i + 1];
            approx.push((a + b) / SQRT2);
            detail.push((a - b) / SQRT2);
        }
        details.push(detail);
        current = approx;
    }
    Ok(HaarPyramid {
        approx: current,
        details,
        lens,
    })
}

/// Inverse of [`haar_dwt`]; exact up to floating-point rounding.
pub fn haar_idwt(pyramid: &HaarPyramid) -> Vec<f64> {
    let mut current = pyramid.approx.clone();
    for (detail, &len) in pyramid.details.iter().rev().zip(pyramid.lens.iter().rev()) {
        let mut next = Vec::with_capacity(2 * current.len());
        for (a, d) in current.iter().zip(detail) {
            next.push((a + d) / SQRT2);
            next.push((a - d) / SQRT2);
        }
        next.truncate(len);
        current = next;
    }
    current
}

/// Soft threshold: shrink magnitudes by `lambda`, preserving sign.
#[inline]
pub fn soft_threshold(value: f64, lambda: f64) -> f64 {
    value.signum() * (value.abs() - lambda).max(0.0)
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Denoise one series: analyze, soft-threshold every detail level,
/// reconstruct.
pub fn wavelet_denoise_series(
    series: &[f64],
    params: WaveletParams,
) -> Result<Vec<f64>, BaselineError> {
    let mut pyramid = haar_dwt(series, params.levels)?;
    let lambda = match params.threshold {
        ThresholdRule::Fixed(v) => v,
        ThresholdRule::Universal => {
            let sigma = median(pyramid.details[0].iter().map(|d| d.abs()).collect()) / 0.6745;
            sigma * (2.0 * (series.len() as f64).ln()).sqrt()
        }
    };
    for detail in &mut pyramid.details {
        for d in detail.iter_mut() {
            *d = soft_threshold(*d, lambda);
        }
    }
    Ok(haar_idwt(&pyramid))
}

/// Per frame: denoise along distance, then average the denoised frames.
pub fn wavelet_denoise_frames(
    frames: &[FrameRecord],
    params: WaveletParams,
) -> Result<MeanCurve, BaselineError> {
    check_common_coordinates(frames)?;
    let d = frames[0].len();
    let mut acc = vec![0.0f64; d];
    for frame in frames {
        let denoised = wavelet_denoise_series(&frame.amplitudes, params)?;
        for (a, v) in acc.iter_mut().zip(&denoised) {
            *a += v;
        }
    }
    let f_count = frames.len() as f64;
    for a in acc.iter_mut() {
        *a /= f_count;
    }
    let grid = EvalGrid::new(frames[0].coordinates.clone()).expect("validated frame coordinates");
    let support = vec![true; d];
    Ok(MeanCurve::new(grid, acc, support).expect("lengths match"))
}
