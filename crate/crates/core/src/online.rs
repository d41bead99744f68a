//! Constant-memory streaming mean estimation with variable bandwidth
//! selection.
//!
//! The batch estimator needs all frames because its bandwidth shrinks as data
//! accumulates, so statistics gathered at an old bandwidth never exactly match
//! a later one. The streaming estimator keeps L parallel accumulations
//! instead: each frame is summarized at a ladder of L candidate bandwidths,
//! and every ladder rung merges into whichever stored accumulation
//! (identified by its centroid, the running average of bandwidths merged into
//! it) is closest. Rung 1 always carries the current bandwidth, so querying
//! rung 1 yields the mean estimate.
//!
//! State is L centroids plus L x G moment pairs — its size depends on
//! (L, G) only, never on how many frames were ingested.
//!
//! Concurrency: single writer. `ingest_frame` must be called sequentially in
//! frame order; reads (`query_mean`, `state_size`, accessors) may run
//! concurrently with each other but not with an in-flight ingest.

use crate::lpr::{self, BandwidthPilot, GridStatPair};
use crate::model::{EvalGrid, FrameRecord, MeanCurve};
use thiserror::Error;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"OVBS";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const MAX_LADDER: usize = 32;

#[derive(Debug, Error, PartialEq)]
pub enum OnlineError {
    #[error("ladder size must be in 1..={MAX_LADDER}, got {0}")]
    BadLadderSize(usize),
    #[error("no frames ingested yet")]
    NoFrames,
    #[error("frame has {got} points, estimator expects {want}")]
    PointCountMismatch { got: usize, want: usize },
    #[error("grid [{grid_min}, {grid_max}] not covered by frame span [{frame_min}, {frame_max}]")]
    FrameGridMismatch {
        grid_min: f64,
        grid_max: f64,
        frame_min: f64,
        frame_max: f64,
    },
    #[error(transparent)]
    Pilot(#[from] lpr::LprError),
    #[error("bad checkpoint magic")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("checkpoint truncated: wanted {want} bytes, got {got}")]
    Truncated { want: usize, got: usize },
    #[error("checkpoint is for {ckpt} grid points, caller supplied {grid}")]
    GridShapeMismatch { ckpt: usize, grid: usize },
}

/// Ladder size and the optional variance refresh policy.
///
/// With `refresh_every = Some(r)`, the pilot's noise variance is re-estimated
/// from running residuals every `r` frames. Off by default so the bandwidth
/// decays on the exact `n^{-1/5}` schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnlineConfig {
    pub ladder_size: usize,
    pub refresh_every: Option<u64>,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        OnlineConfig {
            ladder_size: 5,
            refresh_every: None,
        }
    }
}

impl OnlineConfig {
    pub fn with_ladder(ladder_size: usize) -> Self {
        OnlineConfig {
            ladder_size,
            ..Default::default()
        }
    }
}

/// The candidate bandwidths of the current frame and the persistent centroids
/// they are matched against.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateLadder {
    /// Current-frame candidates, strictly decreasing; `etas[0]` is the
    /// current bandwidth.
    pub etas: Vec<f64>,
    /// Running weighted averages of all candidates merged into each rung.
    pub centroids: Vec<f64>,
}

/// The L candidate bandwidths `((L-l+1)/L)^{1/5} h` for rung l = 1..=L.
pub fn candidate_bandwidths(h: f64, ladder_size: usize) -> Vec<f64> {
    assert!(h > 0.0, "bandwidth must be positive, got {h}");
    assert!(ladder_size >= 1, "ladder must have at least one rung");
    let l = ladder_size as f64;
    (1..=ladder_size)
        .map(|rung| ((l - rung as f64 + 1.0) / l).powf(0.2) * h)
        .collect()
}

/// Index of the centroid nearest to `eta`; ties break to the lowest index.
pub fn match_centroid(eta: f64, centroids: &[f64]) -> usize {
    assert!(!centroids.is_empty(), "centroid list must be non-empty");
    let mut best = 0;
    let mut best_dist = (eta - centroids[0]).abs();
    for (i, &c) in centroids.iter().enumerate().skip(1) {
        let d = (eta - c).abs();
        if d < best_dist {
            best = i;
            best_dist = d;
        }
    }
    best
}

/// Running mean/second-moment accumulator for the optional variance refresh.
#[derive(Debug, Clone, Default, PartialEq)]
struct ResidualStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl ResidualStats {
    fn push(&mut self, v: f64) {
        self.count += 1;
        let delta = v - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (v - self.mean);
    }

    fn variance(&self) -> Option<f64> {
        if self.count > 1 {
            Some(self.m2 / (self.count - 1) as f64)
        } else {
            None
        }
    }
}

/// Complete persistent state of the streaming estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineState {
    frame_count: u64,
    grid: EvalGrid,
    centroids: Vec<f64>,
    /// `layers[l][g]`: accumulated statistics of rung l at grid point g.
    layers: Vec<Vec<GridStatPair>>,
    pilot: BandwidthPilot,
    config: OnlineConfig,
    residuals: ResidualStats,
}

impl OnlineState {
    /// Fresh state with the bandwidth pilot fitted on `pilot_frame`. The
    /// pilot frame is only measured here — the caller still ingests it as
    /// frame 1.
    pub fn init(
        grid: EvalGrid,
        config: OnlineConfig,
        pilot_frame: &FrameRecord,
    ) -> Result<Self, OnlineError> {
        let (_, pilot) =
            lpr::rot_bandwidth(std::slice::from_ref(pilot_frame), pilot_frame.len() as u64)?;
        Self::with_pilot(grid, config, pilot)
    }

    /// Fresh state from an explicit pilot (e.g. calibrated offline).
    pub fn with_pilot(
        grid: EvalGrid,
        config: OnlineConfig,
        pilot: BandwidthPilot,
    ) -> Result<Self, OnlineError> {
        if !(1..=MAX_LADDER).contains(&config.ladder_size) {
            return Err(OnlineError::BadLadderSize(config.ladder_size));
        }
        let g = grid.len();
        Ok(OnlineState {
            frame_count: 0,
            centroids: vec![0.0; config.ladder_size],
            layers: vec![vec![GridStatPair::default(); g]; config.ladder_size],
            grid,
            pilot,
            config,
            residuals: ResidualStats::default(),
        })
    }

    pub fn frame_count(&self) -> u64 {
        self.frame_count
    }

    pub fn grid(&self) -> &EvalGrid {
        &self.grid
    }

    pub fn pilot(&self) -> &BandwidthPilot {
        &self.pilot
    }

    pub fn config(&self) -> &OnlineConfig {
        &self.config
    }

    pub fn centroids(&self) -> &[f64] {
        &self.centroids
    }

    /// Statistics of one rung (for inspection and tests).
    pub fn layer(&self, rung: usize) -> &[GridStatPair] {
        &self.layers[rung]
    }

    /// Current bandwidth `C (f D)^{-1/5}`, clamped. Errors before the first
    /// ingest.
    pub fn current_bandwidth(&self) -> Result<f64, OnlineError> {
        if self.frame_count == 0 {
            return Err(OnlineError::NoFrames);
        }
        Ok(self.bandwidth_at(self.frame_count))
    }

    fn bandwidth_at(&self, f: u64) -> f64 {
        self.pilot
            .bandwidth_for(f * self.pilot.points_per_frame as u64)
    }

    /// Current candidate ladder (recomputed) plus the stored centroids.
    pub fn ladder(&self) -> Result<CandidateLadder, OnlineError> {
        Ok(CandidateLadder {
            etas: candidate_bandwidths(self.current_bandwidth()?, self.config.ladder_size),
            centroids: self.centroids.clone(),
        })
    }

    /// Fold one frame into the state.
    ///
    /// Advances the frame counter, recomputes the candidate ladder at the new
    /// bandwidth, matches every rung against the previous centroids and adds
    /// the frame's statistics on top of the matched accumulations. All rungs
    /// read the pre-update layers (snapshot semantics), so two rungs matching
    /// the same centroid both extend the same historical accumulation.
    pub fn ingest_frame(&mut self, frame: &FrameRecord) -> Result<(), OnlineError> {
        if frame.len() != self.pilot.points_per_frame {
            return Err(OnlineError::PointCountMismatch {
                got: frame.len(),
                want: self.pilot.points_per_frame,
            });
        }
        let frame_min = frame.coordinates[0];
        let frame_max = *frame.coordinates.last().unwrap();
        if self.grid.min() < frame_min || self.grid.max() > frame_max {
            return Err(OnlineError::FrameGridMismatch {
                grid_min: self.grid.min(),
                grid_max: self.grid.max(),
                frame_min,
                frame_max,
            });
        }

        let f = self.frame_count + 1;
        let h = self.bandwidth_at(f);
        let etas = candidate_bandwidths(h, self.config.ladder_size);

        let mut new_layers = Vec::with_capacity(self.config.ladder_size);
        let mut new_centroids = Vec::with_capacity(self.config.ladder_size);
        let inv_f = 1.0 / f as f64;
        for &eta in &etas {
            let j = match_centroid(eta, &self.centroids);
            let mut layer = lpr::frame_stats(frame, &self.grid, eta);
            for (acc, prev) in layer.iter_mut().zip(&self.layers[j]) {
                acc.add_assign(prev);
            }
            new_layers.push(layer);
            new_centroids.push((1.0 - inv_f) * self.centroids[j] + inv_f * eta);
        }
        self.layers = new_layers;
        self.centroids = new_centroids;
        self.frame_count = f;

        if let Some(every) = self.config.refresh_every {
            self.accumulate_residuals(frame);
            if every > 0 && f.is_multiple_of(every) {
                if let Some(var) = self.residuals.variance() {
                    self.pilot.sigma2_hat = var;
                }
            }
        }
        Ok(())
    }

    fn accumulate_residuals(&mut self, frame: &FrameRecord) {
        let curve = match self.query_mean() {
            Ok(c) => c,
            Err(_) => return,
        };
        let dense = match curve.interpolated_values() {
            Some(d) => d,
            None => return,
        };
        let gx = self.grid.points();
        for (&x, &y) in frame.coordinates.iter().zip(&frame.amplitudes) {
            // linear interpolation of the current estimate at the data point
            let k = gx.partition_point(|&g| g < x).min(gx.len() - 1).max(1);
            let (x0, x1) = (gx[k - 1], gx[k]);
            let t = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
            let fit = dense[k - 1] + t * (dense[k] - dense[k - 1]);
            self.residuals.push(y - fit);
        }
    }

    /// Mean curve from rung 1 (the current-bandwidth accumulation).
    /// Read-only: repeated queries between ingests return identical curves.
    pub fn query_mean(&self) -> Result<MeanCurve, OnlineError> {
        if self.frame_count == 0 {
            return Err(OnlineError::NoFrames);
        }
        Ok(lpr::curve_from_stats(self.grid.clone(), &self.layers[0]))
    }

    /// Serialized size in bytes; a function of (L, G) only.
    pub fn state_size(&self) -> usize {
        self.to_bytes().len()
    }

    /// Versioned checkpoint: magic, version, L, G, f, pilot fields,
    /// centroids, then L x G (P, Q) pairs as little-endian f64 in row-major
    /// rung/grid order (P written as its four row-major entries).
    pub fn to_bytes(&self) -> Vec<u8> {
        let l = self.config.ladder_size;
        let g = self.grid.len();
        let mut out = Vec::with_capacity(60 + 8 * l + 48 * l * g);
        out.extend_from_slice(&CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(l as u32).to_le_bytes());
        out.extend_from_slice(&(g as u32).to_le_bytes());
        out.extend_from_slice(&self.frame_count.to_le_bytes());
        out.extend_from_slice(&self.pilot.sigma2_hat.to_le_bytes());
        out.extend_from_slice(&self.pilot.roughness_hat.to_le_bytes());
        out.extend_from_slice(&self.pilot.interval_len.to_le_bytes());
        out.extend_from_slice(&(self.pilot.points_per_frame as u32).to_le_bytes());
        out.extend_from_slice(&self.pilot.h_floor.to_le_bytes());
        for &c in &self.centroids {
            out.extend_from_slice(&c.to_le_bytes());
        }
        for layer in &self.layers {
            for s in layer {
                out.extend_from_slice(&s.p00.to_le_bytes());
                out.extend_from_slice(&s.p01.to_le_bytes());
                out.extend_from_slice(&s.p01.to_le_bytes());
                out.extend_from_slice(&s.p11.to_le_bytes());
                out.extend_from_slice(&s.q0.to_le_bytes());
                out.extend_from_slice(&s.q1.to_le_bytes());
            }
        }
        out
    }

    /// Restore from a checkpoint. The evaluation grid is not part of the
    /// blob; the caller supplies it and its length is checked against G. The
    /// ladder size is structural and comes from the blob; only the refresh
    /// policy is taken from `config`.
    pub fn from_bytes(
        bytes: &[u8],
        grid: EvalGrid,
        config: OnlineConfig,
    ) -> Result<Self, OnlineError> {
        let mut r = Cursor::new(bytes);
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(OnlineError::BadMagic);
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(OnlineError::BadVersion(version));
        }
        let l = r.u32()? as usize;
        if !(1..=MAX_LADDER).contains(&l) {
            return Err(OnlineError::BadLadderSize(l));
        }
        let g = r.u32()? as usize;
        if g != grid.len() {
            return Err(OnlineError::GridShapeMismatch {
                ckpt: g,
                grid: grid.len(),
            });
        }
        let frame_count = r.u64()?;
        let pilot = BandwidthPilot {
            sigma2_hat: r.f64()?,
            roughness_hat: r.f64()?,
            interval_len: r.f64()?,
            points_per_frame: r.u32()? as usize,
            h_floor: r.f64()?,
        };
        let mut centroids = Vec::with_capacity(l);
        for _ in 0..l {
            centroids.push(r.f64()?);
        }
        let mut layers = Vec::with_capacity(l);
        for _ in 0..l {
            let mut layer = Vec::with_capacity(g);
            for _ in 0..g {
                let p00 = r.f64()?;
                let p01 = r.f64()?;
                let _p10 = r.f64()?;
                let p11 = r.f64()?;
                let q0 = r.f64()?;
                let q1 = r.f64()?;
                layer.push(GridStatPair {
                    p00,
                    p01,
                    p11,
                    q0,
                    q1,
                });
            }
            layers.push(layer);
        }
        Ok(OnlineState {
            frame_count,
            grid,
            centroids,
            layers,
            pilot,
            config: OnlineConfig {
                ladder_size: l,
                refresh_every: config.refresh_every,
            },
            residuals: ResidualStats::default(),
        })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Cursor { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], OnlineError> {
        if self.pos + n > self.bytes.len() {
            return Err(OnlineError::Truncated {
                want: self.pos + n,
                got: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, OnlineError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, OnlineError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, OnlineError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
