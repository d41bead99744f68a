//! Vehicle entry detection and line-by-line trajectory tracking on waterfall
//! matrices (rows = seconds, columns = distance points).
//!
//! A vehicle entering the sensed section produces a peak in the first
//! waterfall column; from that entry row the tracker walks down one row at a
//! time, searching a velocity-bounded column window for the next amplitude
//! maximum. The window comes from a degree-1 fit over the most recent
//! keypoints, widened by the confidence fraction `cof` and bounded by the
//! configured velocity interval (speed-limit prior) so a degenerate early fit
//! can neither collapse nor run away.

use crate::lpr;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TrajectoryError {
    #[error("waterfall needs at least 2x2 values, got {rows}x{cols}")]
    TooSmall { rows: usize, cols: usize },
    #[error("waterfall has {got} values for {rows}x{cols}")]
    ShapeMismatch {
        got: usize,
        rows: usize,
        cols: usize,
    },
    #[error("non-finite or negative value at row {row}, col {col}")]
    BadValue { row: usize, col: usize },
    #[error("invalid tracker config: {0}")]
    BadConfig(&'static str),
    #[error("peak search needs a series of length >= 3, got {0}")]
    SeriesTooShort(usize),
    #[error("velocity fit needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("velocity fit needs at least 2 distinct rows")]
    DegenerateRows,
}

/// Dense seconds x distance matrix of preprocessed, non-negative amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct Waterfall {
    values: Vec<f64>,
    rows: usize,
    cols: usize,
    /// Seconds per row.
    pub row_period: f64,
    /// Meters per column.
    pub col_spacing: f64,
}

impl Waterfall {
    pub fn new(
        values: Vec<f64>,
        rows: usize,
        cols: usize,
        row_period: f64,
        col_spacing: f64,
    ) -> Result<Self, TrajectoryError> {
        if rows < 2 || cols < 2 {
            return Err(TrajectoryError::TooSmall { rows, cols });
        }
        if values.len() != rows * cols {
            return Err(TrajectoryError::ShapeMismatch {
                got: values.len(),
                rows,
                cols,
            });
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(TrajectoryError::BadValue {
                    row: i / cols,
                    col: i % cols,
                });
            }
        }
        Ok(Waterfall {
            values,
            rows,
            cols,
            row_period,
            col_spacing,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.value(r, col)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Tracking parameters. Velocity bounds are meters/second; defaults cover
/// 60-120 km/h.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    /// Entry peaks below this amplitude are ignored (scenario-dependent).
    pub peak_threshold: f64,
    pub v_init_min: f64,
    pub v_init_max: f64,
    /// Fractional half-width of the velocity confidence interval, in (0, 1).
    pub cof: f64,
    /// Number of recent keypoints in the velocity fit.
    pub fit_window: usize,
    /// Tracks shorter than this are discarded.
    pub min_track_len: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            peak_threshold: 1.0,
            v_init_min: 60.0 / 3.6,
            v_init_max: 120.0 / 3.6,
            cof: 0.3,
            fit_window: 5,
            min_track_len: 3,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), TrajectoryError> {
        if self.v_init_min <= 0.0 || self.v_init_min.is_nan() || self.v_init_max <= self.v_init_min {
            return Err(TrajectoryError::BadConfig(
                "need 0 < v_init_min < v_init_max",
            ));
        }
        if !(self.cof > 0.0 && self.cof < 1.0) {
            return Err(TrajectoryError::BadConfig("cof must be in (0, 1)"));
        }
        if self.fit_window < 2 {
            return Err(TrajectoryError::BadConfig("fit_window must be >= 2"));
        }
        if self.min_track_len < 1 {
            return Err(TrajectoryError::BadConfig("min_track_len must be >= 1"));
        }
        Ok(())
    }
}

/// One tracked vehicle: keypoints (row, col) with rows increasing by 1 and
/// columns non-decreasing, plus the full-track fitted velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub points: Vec<(usize, usize)>,
    /// Least-squares velocity over all keypoints; None for length-1 tracks.
    pub velocity_mps: Option<f64>,
}

impl Track {
    pub fn entry_row(&self) -> usize {
        self.points[0].0
    }

    fn check(&self) -> bool {
        !self.points.is_empty()
            && self.points[0].1 == 0
            && self
                .points
                .windows(2)
                .all(|w| w[1].0 == w[0].0 + 1 && w[1].1 >= w[0].1)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectorySet {
    pub tracks: Vec<Track>,
}

impl TrajectorySet {
    /// All structural invariants: first column 0, rows +1, columns
    /// non-decreasing.
    pub fn is_valid(&self) -> bool {
        self.tracks.iter().all(Track::check)
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }
}

/// Discrete local maxima above `threshold`: strictly greater than the left
/// neighbor, at least the right one (so a plateau reports its first index),
/// sorted ascending.
pub fn find_peaks(series: &[f64], threshold: f64) -> Result<Vec<usize>, TrajectoryError> {
    if series.len() < 3 {
        return Err(TrajectoryError::SeriesTooShort(series.len()));
    }
    Ok((1..series.len() - 1)
        .filter(|&i| {
            series[i] > series[i - 1] && series[i] >= series[i + 1] && series[i] > threshold
        })
        .collect())
}

/// Least-squares slope of column vs row over the last `window` keypoints,
/// scaled to meters/second.
pub fn fit_velocity(
    points: &[(usize, usize)],
    w: &Waterfall,
    window: usize,
) -> Result<f64, TrajectoryError> {
    if points.len() < 2 {
        return Err(TrajectoryError::TooFewPoints(points.len()));
    }
    let tail = &points[points.len().saturating_sub(window.max(2))..];
    let slope = ls_slope(tail)?;
    Ok(slope * w.col_spacing / w.row_period)
}

/// Slope in columns per row.
fn ls_slope(points: &[(usize, usize)]) -> Result<f64, TrajectoryError> {
    if points.len() < 2 {
        return Err(TrajectoryError::TooFewPoints(points.len()));
    }
    let n = points.len() as f64;
    let mean_r = points.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let mean_c = points.iter().map(|p| p.1 as f64).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(r, c) in points {
        let dr = r as f64 - mean_r;
        sxx += dr * dr;
        sxy += dr * (c as f64 - mean_c);
    }
    if sxx == 0.0 {
        return Err(TrajectoryError::DegenerateRows);
    }
    Ok(sxy / sxx)
}

/// Track one vehicle from its entry row at the first column.
///
/// The first step searches the column window implied by the configured
/// velocity interval; afterwards the window comes from the fitted velocity
/// over the last `fit_window` keypoints, clamped into the configured interval
/// and widened to `[(1-cof) v, (1+cof) v]`. Window bounds round outward.
/// A keypoint landing on the last row or last column means the vehicle has
/// left the section: tracking breaks without appending it.
pub fn track_vehicle(w: &Waterfall, entry_row: usize, config: &TrackerConfig) -> Track {
    let cols_per_velocity = w.row_period / w.col_spacing;
    let mut points = vec![(entry_row, 0usize)];
    let mut row = entry_row + 1;
    while row < w.rows() {
        let (lo, hi) = if points.len() == 1 {
            (
                (config.v_init_min * cols_per_velocity).floor() as usize,
                (config.v_init_max * cols_per_velocity).ceil() as usize,
            )
        } else {
            let fitted = fit_velocity(&points, w, config.fit_window)
                .expect("track has >= 2 points with distinct rows");
            let v = fitted.clamp(config.v_init_min, config.v_init_max);
            let v_cols = v * cols_per_velocity;
            (
                ((1.0 - config.cof) * v_cols).floor() as usize,
                ((1.0 + config.cof) * v_cols).ceil() as usize,
            )
        };
        let prev_col = points.last().unwrap().1;
        let start = prev_col + lo;
        if start >= w.cols() {
            break;
        }
        let end = (prev_col + hi).min(w.cols() - 1);
        let slice = w.row(row);
        let mut best = start;
        for c in start + 1..=end {
            if slice[c] > slice[best] {
                best = c;
            }
        }
        if row + 1 >= w.rows() || best + 1 >= w.cols() {
            break;
        }
        points.push((row, best));
        row += 1;
    }
    let velocity_mps = if points.len() >= 2 {
        Some(fit_velocity(&points, w, points.len()).expect("two or more distinct rows"))
    } else {
        None
    };
    Track {
        points,
        velocity_mps,
    }
}

/// Full extraction: entry peaks on the first column, one track per entry,
/// short tracks discarded.
pub fn extract_trajectories(
    w: &Waterfall,
    config: &TrackerConfig,
) -> Result<TrajectorySet, TrajectoryError> {
    config.validate()?;
    let entries = find_peaks(&w.column(0), config.peak_threshold)?;
    let tracks: Vec<Track> = entries
        .into_iter()
        .map(|k| track_vehicle(w, k, config))
        .filter(|t| t.points.len() >= config.min_track_len)
        .collect();
    let set = TrajectorySet { tracks };
    debug_assert!(set.is_valid());
    Ok(set)
}

/// Extraction quality against ground truth, using the vehicle-count
/// convention: `total` extracted tracks, `correct` matched within tolerance,
/// `missing` unmatched truth, `wrong` unmatched extractions,
/// `accuracy = correct / |truth|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchReport {
    pub total: usize,
    pub correct: usize,
    pub missing: usize,
    pub wrong: usize,
    pub accuracy: f64,
}

/// Greedy one-to-one matching by entry-row proximity; a matched pair counts
/// as correct when the mean absolute column error over overlapping rows is
/// within `tol_cols`.
pub fn match_trajectories(
    extracted: &TrajectorySet,
    truth: &TrajectorySet,
    tol_cols: usize,
) -> MatchReport {
    let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
    for (ei, e) in extracted.tracks.iter().enumerate() {
        for (ti, t) in truth.tracks.iter().enumerate() {
            let gap = e.entry_row().abs_diff(t.entry_row());
            pairs.push((gap, ei, ti));
        }
    }
    pairs.sort();
    let mut e_used = vec![false; extracted.len()];
    let mut t_used = vec![false; truth.len()];
    let mut correct = 0usize;
    for (_, ei, ti) in pairs {
        if e_used[ei] || t_used[ti] {
            continue;
        }
        e_used[ei] = true;
        t_used[ti] = true;
        if within_tolerance(&extracted.tracks[ei], &truth.tracks[ti], tol_cols) {
            correct += 1;
        }
    }
    let total = extracted.len();
    let accuracy = if truth.is_empty() {
        if total == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        correct as f64 / truth.len() as f64
    };
    MatchReport {
        total,
        correct,
        missing: truth.len() - correct.min(truth.len()),
        wrong: total - correct,
        accuracy,
    }
}

fn within_tolerance(extracted: &Track, truth: &Track, tol_cols: usize) -> bool {
    // walk both row-sorted point lists; rows present in only one track are
    // outside the overlap and do not contribute
    let mut err = 0.0;
    let mut overlap = 0usize;
    let mut ti = 0;
    for &(row, col) in &extracted.points {
        while ti < truth.points.len() && truth.points[ti].0 < row {
            ti += 1;
        }
        if ti == truth.points.len() {
            break;
        }
        if truth.points[ti].0 == row {
            err += (col as f64 - truth.points[ti].1 as f64).abs();
            overlap += 1;
        }
    }
    overlap > 0 && err / overlap as f64 <= tol_cols as f64
}

/// Kernel moving average of every row at bandwidth `h` (meters) — the
/// preprocessing step applied to raw waterfalls before extraction.
///
/// Local-constant weights stay positive at the matrix edges, so the first
/// column (where entry peaks are searched) gets genuine noise reduction
/// instead of the boundary extrapolation a local-linear fit would do, and
/// the output stays in the non-negative amplitude domain. Symmetric weights
/// keep interior stripe maxima on their cells.
pub fn smooth_rows(w: &Waterfall, h: f64) -> Waterfall {
    assert!(h > 0.0, "bandwidth must be positive, got {h}");
    let cols = w.cols();
    let coords: Vec<f64> = (0..cols).map(|j| j as f64 * w.col_spacing).collect();
    let reach = (h / w.col_spacing).ceil() as usize;
    let mut values = Vec::with_capacity(w.rows() * cols);
    for r in 0..w.rows() {
        let row = w.row(r);
        for j in 0..cols {
            let lo = j.saturating_sub(reach);
            let hi = (j + reach).min(cols - 1);
            let mut num = 0.0;
            let mut den = 0.0;
            for k in lo..=hi {
                let weight = lpr::epanechnikov((coords[k] - coords[j]) / h);
                num += weight * row[k];
                den += weight;
            }
            values.push(if den > 0.0 { num / den } else { row[j] });
        }
    }
    Waterfall::new(values, w.rows(), cols, w.row_period, w.col_spacing).expect("shape preserved")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn waterfall_from(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Waterfall {
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                values.push(f(r, c));
            }
        }
        Waterfall::new(values, rows, cols, 1.0, 1.0).unwrap()
    }

    /// Clean stripe: amplitude 10 at col = slope*(row-entry), 0 elsewhere.
    fn stripe(rows: usize, cols: usize, entry: usize, slope: usize) -> Waterfall {
        waterfall_from(rows, cols, |r, c| {
            if r >= entry && c == slope * (r - entry) {
                10.0
            } else {
                0.0
            }
        })
    }

    fn config_for_slope(slope: f64) -> TrackerConfig {
        TrackerConfig {
            peak_threshold: 1.0,
            v_init_min: 0.5 * slope,
            v_init_max: 2.0 * slope,
            cof: 0.3,
            fit_window: 5,
            min_track_len: 3,
        }
    }

    #[test]
    fn peak_examples() {
        assert_eq!(
            find_peaks(&[0.0, 1.0, 0.0, 2.0, 0.0], 0.5).unwrap(),
            vec![1, 3]
        );
        assert_eq!(
            find_peaks(&[1.0, 1.0, 1.0, 1.0], 0.0).unwrap(),
            Vec::<usize>::new()
        );
        assert_eq!(find_peaks(&[0.0, 3.0, 3.0, 0.0], 1.0).unwrap(), vec![1]);
        assert_eq!(
            find_peaks(&[1.0, 2.0], 0.0),
            Err(TrajectoryError::SeriesTooShort(2))
        );
    }

    #[test]
    fn clean_stripe_is_tracked_exactly() {
        let w = stripe(20, 50, 0, 2);
        let track = track_vehicle(&w, 0, &config_for_slope(2.0));
        // every row except the excluded last one
        assert_eq!(track.points.len(), 19);
        for (i, &(r, c)) in track.points.iter().enumerate() {
            assert_eq!(r, i);
            assert_eq!(c, 2 * i);
        }
        // slope 2 cols/row at 1 m cols and 1 s rows
        assert_abs_diff_eq!(track.velocity_mps.unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn stripe_exiting_right_edge_stops_at_boundary() {
        let w = stripe(30, 20, 0, 2);
        let track = track_vehicle(&w, 0, &config_for_slope(2.0));
        let last = *track.points.last().unwrap();
        assert!(last.1 < 20);
        assert!(track.points.len() < 30);
        assert_eq!(last.1, 18);
    }

    #[test]
    fn entry_at_last_row_gives_short_track() {
        let w = stripe(5, 10, 4, 1);
        let track = track_vehicle(&w, 4, &config_for_slope(1.0));
        assert_eq!(track.points, vec![(4, 0)]);
        assert!(track.velocity_mps.is_none());
    }

    #[test]
    fn velocity_fit_examples() {
        let w = Waterfall::new(vec![0.0; 9 * 30], 9, 30, 1.0, 0.4).unwrap();
        let v = fit_velocity(&[(0, 0), (1, 10), (2, 20)], &w, 5).unwrap();
        assert_abs_diff_eq!(v, 4.0, epsilon = 1e-12);
        let v = fit_velocity(&[(3, 4), (4, 7)], &w, 5).unwrap();
        assert_abs_diff_eq!(v, 3.0 * 0.4, epsilon = 1e-12);
        assert_eq!(
            fit_velocity(&[(0, 0)], &w, 5),
            Err(TrajectoryError::TooFewPoints(1))
        );
    }

    #[test]
    fn extraction_on_zero_waterfall_is_empty() {
        let w = waterfall_from(10, 10, |_, _| 0.0);
        let set = extract_trajectories(&w, &config_for_slope(1.0)).unwrap();
        assert!(set.is_empty());
    }

    #[test]
    fn extraction_recovers_one_stripe() {
        let w = stripe(20, 60, 3, 2);
        let set = extract_trajectories(&w, &config_for_slope(2.0)).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.tracks[0].entry_row(), 3);
        assert!(set.is_valid());
    }

    #[test]
    fn windows_never_move_left() {
        // a stalled stripe: the brightest later cells sit left of the window,
        // yet columns must stay non-decreasing
        let w = waterfall_from(12, 30, |r, c| {
            if c == 0 {
                5.0
            } else if r >= 2 && c == r {
                3.0
            } else {
                0.0
            }
        });
        let track = track_vehicle(&w, 0, &config_for_slope(1.0));
        for pair in track.points.windows(2) {
            assert!(pair[1].1 >= pair[0].1);
        }
    }

    #[test]
    fn matching_identical_sets_is_perfect() {
        let w = stripe(20, 60, 3, 2);
        let set = extract_trajectories(&w, &config_for_slope(2.0)).unwrap();
        let report = match_trajectories(&set, &set, 0);
        assert_eq!(report.total, 1);
        assert_eq!(report.correct, 1);
        assert_eq!(report.missing, 0);
        assert_eq!(report.wrong, 0);
        assert_abs_diff_eq!(report.accuracy, 1.0, epsilon = 0.0);
    }

    #[test]
    fn matching_empty_extraction() {
        let w = stripe(20, 60, 3, 2);
        let truth = extract_trajectories(&w, &config_for_slope(2.0)).unwrap();
        let report = match_trajectories(&TrajectorySet::default(), &truth, 5);
        assert_eq!(report.correct, 0);
        assert_eq!(report.missing, 1);
        assert_eq!(report.accuracy, 0.0);
    }

    #[test]
    fn table_convention_17_of_21() {
        // 21 truth tracks; 17 extracted copies, no extras
        let mk = |entry: usize| Track {
            points: (0..5).map(|i| (entry + i, 3 * i)).collect(),
            velocity_mps: Some(3.0),
        };
        let truth = TrajectorySet {
            tracks: (0..21).map(|v| mk(10 * v)).collect(),
        };
        let extracted = TrajectorySet {
            tracks: (0..17).map(|v| mk(10 * v)).collect(),
        };
        let report = match_trajectories(&extracted, &truth, 5);
        assert_eq!(report.total, 17);
        assert_eq!(report.correct, 17);
        assert_eq!(report.missing, 4);
        assert_eq!(report.wrong, 0);
        assert_abs_diff_eq!(report.accuracy, 17.0 / 21.0, epsilon = 1e-12);
    }

    #[test]
    fn smoothing_preserves_shape_and_domain() {
        let w = waterfall_from(6, 40, |r, c| {
            5.0 * (-((c as f64 - 20.0) / 3.0).powi(2)).exp() + 0.2 * ((r + c) % 2) as f64
        });
        let s = smooth_rows(&w, 3.0);
        assert_eq!(s.rows(), 6);
        assert_eq!(s.cols(), 40);
        assert!(s.values().iter().all(|&v| v >= 0.0 && v.is_finite()));
        // peak stays at the stripe center cell
        for r in 0..6 {
            let row = s.row(r);
            let arg = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(arg, 20);
        }
    }

    #[test]
    fn rejects_bad_waterfalls() {
        assert!(matches!(
            Waterfall::new(vec![0.0; 4], 1, 4, 1.0, 1.0),
            Err(TrajectoryError::TooSmall { .. })
        ));
        assert!(matches!(
            Waterfall::new(vec![0.0; 5], 2, 3, 1.0, 1.0),
            Err(TrajectoryError::ShapeMismatch { .. })
        ));
        assert!(matches!(
            Waterfall::new(vec![0.0, 0.0, -1.0, 0.0], 2, 2, 1.0, 1.0),
            Err(TrajectoryError::BadValue { row: 1, col: 0 })
        ));
    }
}
