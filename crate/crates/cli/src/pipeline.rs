//! Streaming runners behind the `estimate` and `denoise` subcommands.
//!
//! The online runner holds exactly one frame plus the estimator state in
//! memory, emits one curve row per completed second, and can persist/resume
//! its state through the binary checkpoint format.

use anyhow::{anyhow, Context, Result};
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use dasflow::baselines::{
    wavelet_denoise_series, KalmanParams, ScalarKalman, ThresholdRule, WaveletParams,
};
use dasflow::io::{
    is_binary_stream, BinFrameReader, CsvFrameReader, CurveCsvWriter, IoError, StreamHeader,
};
use dasflow::lpr;
use dasflow::model::{
    regular_grid, validate_frame, EvalGrid, FrameRecord, MeanCurve, StreamConfig,
};
use dasflow::online::{OnlineConfig, OnlineState};

/// A frame file opened for sequential reading, format-sniffed (binary
/// streams start with the magic bytes). CSV streams carry no geometry, so
/// spacing and fps come from the caller.
pub struct FrameSource {
    header: StreamHeader,
    iter: Box<dyn Iterator<Item = Result<FrameRecord, IoError>>>,
}

impl FrameSource {
    pub fn open(path: &Path, csv_spacing: f64, csv_fps: u32) -> Result<Self> {
        let file = fs::File::open(path).with_context(|| format!("open {}", path.display()))?;
        let mut reader = BufReader::new(file);
        if is_binary_stream(&mut reader)? {
            let inner = BinFrameReader::new(reader)?;
            let header = inner.header().clone();
            Ok(FrameSource {
                header,
                iter: Box::new(inner),
            })
        } else {
            let inner = CsvFrameReader::new(reader, csv_spacing)?;
            let header = StreamHeader {
                points_per_frame: inner.points_per_frame(),
                point_spacing: csv_spacing,
                fps: csv_fps,
                frame_count: 0,
            };
            Ok(FrameSource {
                header,
                iter: Box::new(inner),
            })
        }
    }

    pub fn header(&self) -> &StreamHeader {
        &self.header
    }

    /// Wire formats carry no distance origin; it is fixed at zero.
    pub fn stream_config(&self, allow_negative: bool) -> StreamConfig {
        StreamConfig {
            points_per_frame: self.header.points_per_frame,
            point_spacing: self.header.point_spacing,
            fps: self.header.fps,
            distance_origin: 0.0,
            allow_negative,
        }
    }
}

impl Iterator for FrameSource {
    type Item = Result<FrameRecord, IoError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.iter.next()
    }
}

pub struct OnlineArgs {
    pub grid_points: usize,
    pub ladder: usize,
    pub refresh_every: Option<u64>,
    pub checkpoint: Option<PathBuf>,
    pub allow_negative: bool,
}

impl Default for OnlineArgs {
    fn default() -> Self {
        OnlineArgs {
            grid_points: 200,
            ladder: 5,
            refresh_every: None,
            checkpoint: None,
            allow_negative: true,
        }
    }
}

/// Stream every frame through the online estimator, emitting one curve row
/// per completed second. If the checkpoint path exists it is resumed from;
/// the final state is written back there either way. Returns the final state.
pub fn run_online_estimate<W: Write>(
    mut source: FrameSource,
    args: &OnlineArgs,
    out: Option<W>,
) -> Result<OnlineState> {
    let config = source.stream_config(args.allow_negative);
    config.validate()?;
    let grid = regular_grid(&config, args.grid_points)?;
    let online_config = OnlineConfig {
        ladder_size: args.ladder,
        refresh_every: args.refresh_every,
    };
    let mut state: Option<OnlineState> = match &args.checkpoint {
        Some(path) if path.exists() => {
            let bytes =
                fs::read(path).with_context(|| format!("read checkpoint {}", path.display()))?;
            Some(OnlineState::from_bytes(
                &bytes,
                grid.clone(),
                online_config,
            )?)
        }
        _ => None,
    };
    let mut writer = match out {
        Some(w) => Some(CurveCsvWriter::new(w, &grid)?),
        None => None,
    };
    let mut current_second: Option<u32> = None;
    for frame in &mut source {
        let frame = frame?;
        validate_frame(&frame, &config)?;
        let st = match state.as_mut() {
            Some(st) => st,
            None => state.insert(OnlineState::init(grid.clone(), online_config, &frame)?),
        };
        if let Some(w) = writer.as_mut() {
            if let Some(cur) = current_second {
                if frame.second > cur {
                    w.write_row(cur, &st.query_mean()?)?;
                }
            }
        }
        st.ingest_frame(&frame)?;
        current_second = Some(frame.second);
    }
    let state = state.ok_or_else(|| anyhow!("stream contained no frames"))?;
    if let (Some(w), Some(cur)) = (writer.as_mut(), current_second) {
        w.write_row(cur, &state.query_mean()?)?;
    }
    if let Some(w) = writer {
        w.finish()?;
    }
    if let Some(path) = &args.checkpoint {
        fs::write(path, state.to_bytes())
            .with_context(|| format!("write checkpoint {}", path.display()))?;
    }
    Ok(state)
}

/// Full-data estimate recomputed at every second boundary with the
/// rule-of-thumb bandwidth for the data seen so far. Keeps all frames in
/// memory and costs O(seconds^2) overall — that is the point of comparison.
pub fn run_batch_estimate<W: Write>(
    mut source: FrameSource,
    grid_points: usize,
    allow_negative: bool,
    out: Option<W>,
) -> Result<MeanCurve> {
    let config = source.stream_config(allow_negative);
    config.validate()?;
    let grid = regular_grid(&config, grid_points)?;
    let mut writer = match out {
        Some(w) => Some(CurveCsvWriter::new(w, &grid)?),
        None => None,
    };
    let mut frames: Vec<FrameRecord> = Vec::new();
    let mut pilot: Option<lpr::BandwidthPilot> = None;
    let mut current_second: Option<u32> = None;
    for frame in &mut source {
        let frame = frame?;
        validate_frame(&frame, &config)?;
        if pilot.is_none() {
            pilot = Some(lpr::rot_bandwidth(std::slice::from_ref(&frame), frame.len() as u64)?.1);
        }
        if let Some(cur) = current_second {
            if frame.second > cur {
                if let Some(w) = writer.as_mut() {
                    let curve = batch_curve(&frames, &grid, pilot.as_ref().unwrap())?;
                    w.write_row(cur, &curve)?;
                }
            }
        }
        current_second = Some(frame.second);
        frames.push(frame);
    }
    if frames.is_empty() {
        return Err(anyhow!("stream contained no frames"));
    }
    let curve = batch_curve(&frames, &grid, pilot.as_ref().unwrap())?;
    if let (Some(w), Some(cur)) = (writer.as_mut(), current_second) {
        w.write_row(cur, &curve)?;
    }
    if let Some(w) = writer {
        w.finish()?;
    }
    Ok(curve)
}

fn batch_curve(
    frames: &[FrameRecord],
    grid: &EvalGrid,
    pilot: &lpr::BandwidthPilot,
) -> Result<MeanCurve> {
    let n = frames.iter().map(|f| f.len() as u64).sum::<u64>();
    let h = pilot.bandwidth_for(n);
    Ok(lpr::batch_estimate(frames, grid, h)?)
}

pub enum DenoiseMethod {
    Kalman,
    Wavelet {
        levels: usize,
        threshold: ThresholdRule,
    },
}

/// Filter the stream with a classical method and emit one averaged curve row
/// per second on the native coordinates. The Kalman state persists across
/// the whole stream (one scalar filter per distance point); the wavelet
/// denoises each frame independently.
pub fn run_denoise<W: Write>(
    mut source: FrameSource,
    method: DenoiseMethod,
    allow_negative: bool,
    out: Option<W>,
) -> Result<MeanCurve> {
    let config = source.stream_config(allow_negative);
    config.validate()?;
    let d = config.points_per_frame;
    let grid = EvalGrid::new(config.coordinates())?;
    let mut writer = match out {
        Some(w) => Some(CurveCsvWriter::new(w, &grid)?),
        None => None,
    };

    let mut filters: Option<Vec<ScalarKalman>> = None;
    let mut pending: Vec<FrameRecord> = Vec::new();
    let mut second_sum = vec![0.0f64; d];
    let mut second_count = 0u32;
    let mut total_sum = vec![0.0f64; d];
    let mut total_count = 0u64;
    let mut current_second: Option<u32> = None;

    let flush = |writer: &mut Option<CurveCsvWriter<W>>,
                 second: u32,
                 sum: &mut Vec<f64>,
                 count: &mut u32,
                 grid: &EvalGrid|
     -> Result<()> {
        if *count > 0 {
            let values: Vec<f64> = sum.iter().map(|s| s / *count as f64).collect();
            let curve = MeanCurve::new(grid.clone(), values, vec![true; grid.len()])?;
            if let Some(w) = writer.as_mut() {
                w.write_row(second, &curve)?;
            }
        }
        sum.iter_mut().for_each(|s| *s = 0.0);
        *count = 0;
        Ok(())
    };

    let process = |frame: &FrameRecord,
                   filters: &mut Option<Vec<ScalarKalman>>,
                   second_sum: &mut Vec<f64>,
                   total_sum: &mut Vec<f64>|
     -> Result<()> {
        let filtered: Vec<f64> = match &method {
            DenoiseMethod::Kalman => {
                let banks = filters
                    .as_mut()
                    .expect("params estimated before processing");
                frame
                    .amplitudes
                    .iter()
                    .zip(banks.iter_mut())
                    .map(|(&y, f)| f.update(y))
                    .collect()
            }
            DenoiseMethod::Wavelet { levels, threshold } => wavelet_denoise_series(
                &frame.amplitudes,
                WaveletParams {
                    levels: *levels,
                    threshold: *threshold,
                },
            )?,
        };
        for ((s, t), v) in second_sum
            .iter_mut()
            .zip(total_sum.iter_mut())
            .zip(&filtered)
        {
            *s += v;
            *t += v;
        }
        Ok(())
    };

    for frame in &mut source {
        let frame = frame?;
        validate_frame(&frame, &config)?;
        if matches!(method, DenoiseMethod::Kalman) && filters.is_none() {
            pending.push(frame);
            if pending.len() < 2 {
                continue;
            }
            // two frames are enough for the first-difference variance
            let params = KalmanParams::estimate(&pending)?;
            filters = Some(vec![ScalarKalman::new(params); d]);
            for f in std::mem::take(&mut pending) {
                if let Some(cur) = current_second {
                    if f.second > cur {
                        flush(&mut writer, cur, &mut second_sum, &mut second_count, &grid)?;
                    }
                }
                process(&f, &mut filters, &mut second_sum, &mut total_sum)?;
                second_count += 1;
                total_count += 1;
                current_second = Some(f.second);
            }
            continue;
        }
        if let Some(cur) = current_second {
            if frame.second > cur {
                flush(&mut writer, cur, &mut second_sum, &mut second_count, &grid)?;
            }
        }
        process(&frame, &mut filters, &mut second_sum, &mut total_sum)?;
        second_count += 1;
        total_count += 1;
        current_second = Some(frame.second);
    }
    // a one-frame Kalman stream never left the pending buffer
    if !pending.is_empty() {
        let params = KalmanParams::estimate(&pending)?;
        filters = Some(vec![ScalarKalman::new(params); d]);
        for f in std::mem::take(&mut pending) {
            process(&f, &mut filters, &mut second_sum, &mut total_sum)?;
            second_count += 1;
            total_count += 1;
            current_second = Some(f.second);
        }
    }
    let cur = current_second.ok_or_else(|| anyhow!("stream contained no frames"))?;
    flush(&mut writer, cur, &mut second_sum, &mut second_count, &grid)?;
    if let Some(w) = writer {
        w.finish()?;
    }
    let values: Vec<f64> = total_sum.iter().map(|s| s / total_count as f64).collect();
    Ok(MeanCurve::new(
        grid.clone(),
        values,
        vec![true; grid.len()],
    )?)
}
