//! Local linear regression on frames: the Epanechnikov kernel, per-frame
//! moment statistics, the 2x2 weighted least-squares solve and the
//! rule-of-thumb bandwidth pilot.
//!
//! The estimator at an evaluation point x fits `y ~ b0 + b1 (X - x)` by
//! kernel-weighted least squares and reports b0. Everything a frame
//! contributes to that fit is captured by one 2x2 moment matrix P and one
//! 2-vector Q per evaluation point; P and Q are additive across frames at a
//! fixed bandwidth, which is what the streaming layer exploits.
//!
//! Summation order is fixed (frames outer, distances inner, ascending) so
//! accumulation is bit-reproducible.

use crate::model::{EvalGrid, FrameRecord, MeanCurve};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LprError {
    #[error("estimation needs at least one frame")]
    EmptyStream,
    #[error("bandwidth pilot needs >= 5 distinct coordinates, got {0}")]
    TooFewDistinctCoordinates(usize),
}

/// Epanechnikov kernel: `0.75 (1 - u^2)` inside `|u| < 1`, 0 outside.
#[inline]
pub fn epanechnikov(u: f64) -> f64 {
    if u.abs() < 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

/// Scaled kernel weight `K((x_i - x_eval)/h) / h`.
///
/// Panics if `h <= 0`; bandwidths are produced internally and a non-positive
/// one is a programming error, not a data error.
#[inline]
pub fn kernel_weight(x_i: f64, x_eval: f64, h: f64) -> f64 {
    assert!(h > 0.0, "bandwidth must be positive, got {h}");
    epanechnikov((x_i - x_eval) / h) / h
}

/// Kernel-weighted moments of one evaluation point: the symmetric 2x2 matrix
/// `P = sum w [1, dx; dx, dx^2]` and the vector `Q = sum w [y, dx*y]` with
/// `dx = X_d - x`. Additive across frames at fixed bandwidth.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GridStatPair {
    pub p00: f64,
    pub p01: f64,
    pub p11: f64,
    pub q0: f64,
    pub q1: f64,
}

impl GridStatPair {
    #[inline]
    pub fn add_assign(&mut self, other: &GridStatPair) {
        self.p00 += other.p00;
        self.p01 += other.p01;
        self.p11 += other.p11;
        self.q0 += other.q0;
        self.q1 += other.q1;
    }

    /// Smallest eigenvalue of the symmetric matrix P.
    pub fn min_eigenvalue(&self) -> f64 {
        let mean = 0.5 * (self.p00 + self.p11);
        let half_diff = 0.5 * (self.p00 - self.p11);
        mean - (half_diff * half_diff + self.p01 * self.p01).sqrt()
    }
}

/// Solve `P b = Q` and return `(b0, true)`, or `(NaN, false)` when P is
/// singular under the scale-aware tolerance `|det P| <= 1e-12 (1 + tr P)^2`.
/// Degeneracy is a flag, not an error: one bad grid point must not abort a
/// whole curve.
pub fn solve_mean(stats: &GridStatPair) -> (f64, bool) {
    let det = stats.p00 * stats.p11 - stats.p01 * stats.p01;
    let trace = stats.p00 + stats.p11;
    let tol = 1e-12 * (1.0 + trace) * (1.0 + trace);
    if det.abs() <= tol {
        (f64::NAN, false)
    } else {
        ((stats.p11 * stats.q0 - stats.p01 * stats.q1) / det, true)
    }
}

/// Moment statistics of one frame at every grid point, bandwidth `h`.
///
/// Coordinates are strictly increasing, so only the index window with
/// `|X_d - x| < h` is visited; terms outside have zero weight.
pub fn frame_stats(frame: &FrameRecord, grid: &EvalGrid, h: f64) -> Vec<GridStatPair> {
    assert!(h > 0.0, "bandwidth must be positive, got {h}");
    let xs = &frame.coordinates;
    let ys = &frame.amplitudes;
    grid.points()
        .iter()
        .map(|&x| {
            let lo = xs.partition_point(|&v| v <= x - h);
            let hi = xs.partition_point(|&v| v < x + h);
            let mut acc = GridStatPair::default();
            for d in lo..hi {
                let w = kernel_weight(xs[d], x, h);
                let dx = xs[d] - x;
                acc.p00 += w;
                acc.p01 += w * dx;
                acc.p11 += w * dx * dx;
                acc.q0 += w * ys[d];
                acc.q1 += w * dx * ys[d];
            }
            acc
        })
        .collect()
}

/// Accumulate `frame_stats` over all frames, then solve per grid point.
pub fn batch_estimate(
    frames: &[FrameRecord],
    grid: &EvalGrid,
    h: f64,
) -> Result<MeanCurve, LprError> {
    if frames.is_empty() {
        return Err(LprError::EmptyStream);
    }
    let mut acc = vec![GridStatPair::default(); grid.len()];
    for frame in frames {
        let stats = frame_stats(frame, grid, h);
        for (a, s) in acc.iter_mut().zip(&stats) {
            a.add_assign(s);
        }
    }
    Ok(curve_from_stats(grid.clone(), &acc))
}

/// Solve accumulated statistics into a mean curve.
pub fn curve_from_stats(grid: EvalGrid, stats: &[GridStatPair]) -> MeanCurve {
    let mut values = Vec::with_capacity(stats.len());
    let mut support = Vec::with_capacity(stats.len());
    for s in stats {
        let (v, ok) = solve_mean(s);
        values.push(v);
        support.push(ok);
    }
    MeanCurve::new(grid, values, support).expect("stats length matches grid")
}

/// Data-driven quantities behind the rule-of-thumb bandwidth
/// `h = C n^{-1/5}` with `C = (R(K) sigma^2 |X| / (mu2(K)^2 theta22))^{1/5}`.
///
/// For the Epanechnikov kernel `R(K) = 3/5` and `mu2(K) = 1/5`. The noise
/// variance comes from a second-difference estimator (immune to smooth-trend
/// lack of fit); the curvature integral `theta22 = int (mu'')^2` comes from a
/// global quartic fit. Bandwidths are clamped to `[h_floor, |X|]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthPilot {
    /// Estimated noise variance.
    pub sigma2_hat: f64,
    /// Estimated curvature integral, floored at 1e-12.
    pub roughness_hat: f64,
    /// Length of the covered distance interval, meters.
    pub interval_len: f64,
    /// Points per frame (D), the per-frame sample-size factor.
    pub points_per_frame: usize,
    /// Lower bandwidth clamp: twice the largest coordinate gap.
    pub h_floor: f64,
}

/// Epanechnikov roughness `int K^2 = 3/5`.
const KERNEL_ROUGHNESS: f64 = 0.6;
/// Epanechnikov second moment `int u^2 K = 1/5`.
const KERNEL_SECOND_MOMENT: f64 = 0.2;
const ROUGHNESS_FLOOR: f64 = 1e-12;

impl BandwidthPilot {
    /// The sample-size-free constant C of `h = C n^{-1/5}`.
    pub fn constant(&self) -> f64 {
        let num = KERNEL_ROUGHNESS * self.sigma2_hat * self.interval_len;
        let den = KERNEL_SECOND_MOMENT * KERNEL_SECOND_MOMENT * self.roughness_hat;
        (num / den).powf(0.2)
    }

    /// Bandwidth for a total sample size of `n` observations, clamped to
    /// `[h_floor, |X|]`.
    pub fn bandwidth_for(&self, n: u64) -> f64 {
        let raw = self.constant() * (n as f64).powf(-0.2);
        let lo = self.h_floor.min(self.interval_len);
        raw.clamp(lo, self.interval_len)
    }
}

/// Rule-of-thumb bandwidth from pilot frames, for a stream that will total
/// `n_total` observations. Returns the clamped bandwidth and the reusable
/// pilot quantities.
pub fn rot_bandwidth(
    pilot_frames: &[FrameRecord],
    n_total: u64,
) -> Result<(f64, BandwidthPilot), LprError> {
    let pilot = fit_pilot(pilot_frames)?;
    Ok((pilot.bandwidth_for(n_total), pilot))
}

fn fit_pilot(frames: &[FrameRecord]) -> Result<BandwidthPilot, LprError> {
    if frames.is_empty() {
        return Err(LprError::EmptyStream);
    }
    let mut coords: Vec<f64> = frames
        .iter()
        .flat_map(|f| f.coordinates.iter().copied())
        .collect();
    coords.sort_by(|a, b| a.partial_cmp(b).unwrap());
    coords.dedup();
    if coords.len() < 5 {
        return Err(LprError::TooFewDistinctCoordinates(coords.len()));
    }
    let x_min = coords[0];
    let x_max = *coords.last().unwrap();
    let interval_len = x_max - x_min;

    let mut max_gap: f64 = 0.0;
    for frame in frames {
        for w in frame.coordinates.windows(2) {
            max_gap = max_gap.max(w[1] - w[0]);
        }
    }

    // Second-difference noise variance (pooled over frames). The centered
    // second difference of a linear trend is zero, so smooth structure leaks
    // only at O(spacing^2).
    let mut ss = 0.0;
    let mut count = 0usize;
    for frame in frames {
        let y = &frame.amplitudes;
        for d in 1..y.len().saturating_sub(1) {
            let delta = 0.5 * y[d - 1] - y[d] + 0.5 * y[d + 1];
            ss += delta * delta;
            count += 1;
        }
    }
    let sigma2_hat = if count > 0 {
        ss / (1.5 * count as f64)
    } else {
        0.0
    };

    // Global quartic fit in the normalized coordinate t in [-1, 1]; its
    // second derivative gives the curvature integral in closed form.
    let center = 0.5 * (x_min + x_max);
    let radius = 0.5 * interval_len;
    let mut gram = [[0.0f64; 5]; 5];
    let mut rhs = [0.0f64; 5];
    for frame in frames {
        for (&x, &y) in frame.coordinates.iter().zip(&frame.amplitudes) {
            let t = (x - center) / radius;
            let mut basis = [0.0f64; 5];
            let mut tp = 1.0;
            for b in &mut basis {
                *b = tp;
                tp *= t;
            }
            for i in 0..5 {
                for j in 0..5 {
                    gram[i][j] += basis[i] * basis[j];
                }
                rhs[i] += basis[i] * y;
            }
        }
    }
    let beta = solve5(gram, rhs).ok_or(LprError::TooFewDistinctCoordinates(coords.len()))?;

    // mu''(x) = q''(t)/radius^2 with q''(t) = a + b t + c t^2; integrating
    // its square over x in [x_min, x_max] (dx = radius dt, odd terms vanish):
    let a = 2.0 * beta[2];
    let b = 6.0 * beta[3];
    let c = 12.0 * beta[4];
    let integral_t = 2.0 * a * a + (4.0 / 3.0) * a * c + (2.0 / 3.0) * b * b + 0.4 * c * c;
    let roughness_hat = (integral_t / radius.powi(3)).max(ROUGHNESS_FLOOR);

    Ok(BandwidthPilot {
        sigma2_hat,
        roughness_hat,
        interval_len,
        points_per_frame: frames[0].len(),
        h_floor: 2.0 * max_gap,
    })
}

/// Dense 5x5 solve by Gaussian elimination with partial pivoting. Returns
/// None when the system is numerically singular.
#[allow(clippy::needless_range_loop)]
fn solve5(mut m: [[f64; 5]; 5], mut rhs: [f64; 5]) -> Option<[f64; 5]> {
    for col in 0..5 {
        let mut pivot = col;
        for row in col + 1..5 {
            if m[row][col].abs() > m[pivot][col].abs() {
                pivot = row;
            }
        }
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..5 {
            let factor = m[row][col] / m[col][col];
            for k in col..5 {
                m[row][k] -= factor * m[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = [0.0f64; 5];
    for col in (0..5).rev() {
        let mut acc = rhs[col];
        for k in col + 1..5 {
            acc -= m[col][k] * x[k];
        }
        x[col] = acc / m[col][col];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}
