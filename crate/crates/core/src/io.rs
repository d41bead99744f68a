//! File formats: binary and CSV frame streams, per-second mean-curve CSV,
//! waterfall CSV and trajectory CSV.
//!
//! Binary frame stream layout (all little-endian): magic `DAS1`, u32 version,
//! u32 D, f64 point spacing (m), u32 fps, u64 frame count (0 = unbounded),
//! then per frame u32 second, u32 frame index, D x f32 amplitudes. The wire
//! format carries no distance origin: readers reconstruct coordinates as
//! `j * spacing`. The CSV alternative has the header row
//! `second,frame,a_0,...,a_{D-1}` with amplitudes at the same f32 precision,
//! so both formats parse to identical frames.

use crate::model::{EvalGrid, FrameRecord, MeanCurve};
use crate::trajectory::{Track, TrajectorySet, Waterfall};
use std::io::{BufRead, Read, Write};
use thiserror::Error;

pub const FRAME_MAGIC: [u8; 4] = *b"DAS1";
pub const FRAME_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported format version {0}")]
    BadVersion(u32),
    #[error("truncated payload")]
    Truncated,
    #[error("frame has {got} points, header declares {want}")]
    PointCountMismatch { got: usize, want: usize },
    #[error("frames out of order at (second {second}, frame {frame})")]
    OutOfOrder { second: u32, frame: u32 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("shape error: {0}")]
    Shape(String),
}

/// Declared stream geometry of a frame file.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamHeader {
    pub points_per_frame: usize,
    pub point_spacing: f64,
    pub fps: u32,
    /// 0 means unbounded (stream until EOF).
    pub frame_count: u64,
}

impl StreamHeader {
    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.points_per_frame)
            .map(|j| j as f64 * self.point_spacing)
            .collect()
    }
}

// ---------------------------------------------------------------------------
// binary frame streams
// ---------------------------------------------------------------------------

pub struct BinFrameWriter<W: Write> {
    inner: W,
    d: usize,
}

impl<W: Write> BinFrameWriter<W> {
    pub fn new(mut inner: W, header: &StreamHeader) -> Result<Self, IoError> {
        inner.write_all(&FRAME_MAGIC)?;
        inner.write_all(&FRAME_VERSION.to_le_bytes())?;
        inner.write_all(&(header.points_per_frame as u32).to_le_bytes())?;
        inner.write_all(&header.point_spacing.to_le_bytes())?;
        inner.write_all(&header.fps.to_le_bytes())?;
        inner.write_all(&header.frame_count.to_le_bytes())?;
        Ok(BinFrameWriter {
            inner,
            d: header.points_per_frame,
        })
    }

    pub fn write_frame(&mut self, frame: &FrameRecord) -> Result<(), IoError> {
        if frame.len() != self.d {
            return Err(IoError::PointCountMismatch {
                got: frame.len(),
                want: self.d,
            });
        }
        self.inner.write_all(&frame.second.to_le_bytes())?;
        self.inner.write_all(&frame.frame_index.to_le_bytes())?;
        for &y in &frame.amplitudes {
            self.inner.write_all(&(y as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, IoError> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

pub struct BinFrameReader<R: Read> {
    inner: R,
    header: StreamHeader,
    coords: Vec<f64>,
    frames_read: u64,
    last: Option<(u32, u32)>,
    done: bool,
}

impl<R: Read> BinFrameReader<R> {
    pub fn new(mut inner: R) -> Result<Self, IoError> {
        let mut magic = [0u8; 4];
        inner
            .read_exact(&mut magic)
            .map_err(|_| IoError::Truncated)?;
        if magic != FRAME_MAGIC {
            return Err(IoError::BadMagic);
        }
        let version = read_u32(&mut inner)?;
        if version != FRAME_VERSION {
            return Err(IoError::BadVersion(version));
        }
        let d = read_u32(&mut inner)? as usize;
        let point_spacing = read_f64(&mut inner)?;
        let fps = read_u32(&mut inner)?;
        let frame_count = read_u64(&mut inner)?;
        let header = StreamHeader {
            points_per_frame: d,
            point_spacing,
            fps,
            frame_count,
        };
        let coords = header.coordinates();
        Ok(BinFrameReader {
            inner,
            header,
            coords,
            frames_read: 0,
            last: None,
            done: false,
        })
    }

    pub fn header(&self) -> &StreamHeader {
        &self.header
    }

    fn read_frame(&mut self) -> Result<Option<FrameRecord>, IoError> {
        if self.done || (self.header.frame_count > 0 && self.frames_read >= self.header.frame_count)
        {
            self.done = true;
            return Ok(None);
        }
        let mut first = [0u8; 4];
        match read_exact_or_eof(&mut self.inner, &mut first)? {
            ReadOutcome::Eof => {
                if self.header.frame_count > 0 {
                    return Err(IoError::Truncated);
                }
                self.done = true;
                return Ok(None);
            }
            ReadOutcome::Full => {}
        }
        let second = u32::from_le_bytes(first);
        let frame_index = read_u32(&mut self.inner).map_err(|_| IoError::Truncated)?;
        let mut amplitudes = Vec::with_capacity(self.header.points_per_frame);
        let mut buf = [0u8; 4];
        for _ in 0..self.header.points_per_frame {
            self.inner
                .read_exact(&mut buf)
                .map_err(|_| IoError::Truncated)?;
            amplitudes.push(f32::from_le_bytes(buf) as f64);
        }
        if let Some(last) = self.last {
            if (second, frame_index) <= last {
                return Err(IoError::OutOfOrder {
                    second,
                    frame: frame_index,
                });
            }
        }
        self.last = Some((second, frame_index));
        self.frames_read += 1;
        Ok(Some(FrameRecord {
            second,
            frame_index,
            coordinates: self.coords.clone(),
            amplitudes,
        }))
    }
}

impl<R: Read> Iterator for BinFrameReader<R> {
    type Item = Result<FrameRecord, IoError>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.read_frame() {
            Ok(Some(frame)) => Some(Ok(frame)),
            Ok(None) => None,
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

enum ReadOutcome {
    Full,
    Eof,
}

fn read_exact_or_eof<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<ReadOutcome, IoError> {
    let mut filled = 0;
    while filled < buf.len() {
        let n = r.read(&mut buf[filled..])?;
        if n == 0 {
            if filled == 0 {
                return Ok(ReadOutcome::Eof);
            }
            return Err(IoError::Truncated);
        }
        filled += n;
    }
    Ok(ReadOutcome::Full)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, IoError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(|_| IoError::Truncated)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, IoError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf).map_err(|_| IoError::Truncated)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64, IoError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf).map_err(|_| IoError::Truncated)?;
    Ok(f64::from_le_bytes(buf))
}

// ---------------------------------------------------------------------------
// CSV frame streams
// ---------------------------------------------------------------------------

pub struct CsvFrameWriter<W: Write> {
    inner: W,
    d: usize,
}

impl<W: Write> CsvFrameWriter<W> {
    pub fn new(mut inner: W, points_per_frame: usize) -> Result<Self, IoError> {
        write!(inner, "second,frame")?;
        for j in 0..points_per_frame {
            write!(inner, ",a_{j}")?;
        }
        writeln!(inner)?;
        Ok(CsvFrameWriter {
            inner,
            d: points_per_frame,
        })
    }

    pub fn write_frame(&mut self, frame: &FrameRecord) -> Result<(), IoError> {
        if frame.len() != self.d {
            return Err(IoError::PointCountMismatch {
                got: frame.len(),
                want: self.d,
            });
        }
        write!(self.inner, "{},{}", frame.second, frame.frame_index)?;
        for &y in &frame.amplitudes {
            // same precision as the binary format
            write!(self.inner, ",{}", y as f32)?;
        }
        writeln!(self.inner)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, IoError> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Streaming CSV frame reader; coordinates are rebuilt from `point_spacing`.
pub struct CsvFrameReader<R: Read> {
    records: csv::StringRecordsIntoIter<R>,
    d: usize,
    coords: Vec<f64>,
    last: Option<(u32, u32)>,
    point_spacing: f64,
}

impl<R: Read> CsvFrameReader<R> {
    pub fn new(reader: R, point_spacing: f64) -> Result<Self, IoError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 3 || &headers[0] != "second" || &headers[1] != "frame" {
            return Err(IoError::Parse(
                "expected header second,frame,a_0,...".into(),
            ));
        }
        let d = headers.len() - 2;
        Ok(CsvFrameReader {
            records: rdr.into_records(),
            d,
            coords: (0..d).map(|j| j as f64 * point_spacing).collect(),
            last: None,
            point_spacing,
        })
    }

    pub fn points_per_frame(&self) -> usize {
        self.d
    }

    pub fn point_spacing(&self) -> f64 {
        self.point_spacing
    }

    fn parse_record(&mut self, record: csv::StringRecord) -> Result<FrameRecord, IoError> {
        if record.len() != self.d + 2 {
            return Err(IoError::PointCountMismatch {
                got: record.len().saturating_sub(2),
                want: self.d,
            });
        }
        let second = parse::<u32>(&record[0])?;
        let frame_index = parse::<u32>(&record[1])?;
        if let Some(l) = self.last {
            if (second, frame_index) <= l {
                return Err(IoError::OutOfOrder {
                    second,
                    frame: frame_index,
                });
            }
        }
        self.last = Some((second, frame_index));
        let mut amplitudes = Vec::with_capacity(self.d);
        for j in 0..self.d {
            amplitudes.push(parse::<f32>(&record[j + 2])? as f64);
        }
        Ok(FrameRecord {
            second,
            frame_index,
            coordinates: self.coords.clone(),
            amplitudes,
        })
    }
}

impl<R: Read> Iterator for CsvFrameReader<R> {
    type Item = Result<FrameRecord, IoError>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.records.next()? {
            Ok(record) => Some(self.parse_record(record)),
            Err(e) => Some(Err(e.into())),
        }
    }
}

/// Read a whole CSV frame stream into memory.
pub fn read_frames_csv<R: Read>(
    reader: R,
    point_spacing: f64,
) -> Result<Vec<FrameRecord>, IoError> {
    CsvFrameReader::new(reader, point_spacing)?.collect()
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T, IoError> {
    s.trim()
        .parse()
        .map_err(|_| IoError::Parse(format!("bad field {s:?}")))
}

// ---------------------------------------------------------------------------
// per-second curves and waterfalls
// ---------------------------------------------------------------------------

/// Writes one curve row per second; columns are the grid coordinates.
/// Unsupported grid points are written as NaN.
pub struct CurveCsvWriter<W: Write> {
    inner: W,
    g: usize,
}

impl<W: Write> CurveCsvWriter<W> {
    pub fn new(mut inner: W, grid: &EvalGrid) -> Result<Self, IoError> {
        write!(inner, "second")?;
        for x in grid.points() {
            write!(inner, ",{x}")?;
        }
        writeln!(inner)?;
        Ok(CurveCsvWriter {
            inner,
            g: grid.len(),
        })
    }

    pub fn write_row(&mut self, second: u32, curve: &MeanCurve) -> Result<(), IoError> {
        if curve.values.len() != self.g {
            return Err(IoError::Shape(format!(
                "curve has {} values, header has {}",
                curve.values.len(),
                self.g
            )));
        }
        write!(self.inner, "{second}")?;
        for (v, s) in curve.values.iter().zip(&curve.support) {
            if *s {
                write!(self.inner, ",{v}")?;
            } else {
                write!(self.inner, ",NaN")?;
            }
        }
        writeln!(self.inner)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, IoError> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Parsed curve file: the grid coordinates and one value row per second
/// (NaN where the estimate was unsupported).
pub struct CurveTable {
    pub grid: Vec<f64>,
    pub rows: Vec<(u32, Vec<f64>)>,
}

pub fn read_curves_csv<R: Read>(reader: R) -> Result<CurveTable, IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || &headers[0] != "second" {
        return Err(IoError::Parse("expected header second,<x...>".into()));
    }
    let grid: Vec<f64> = headers
        .iter()
        .skip(1)
        .map(parse::<f64>)
        .collect::<Result<_, _>>()?;
    if grid.len() < 2 {
        return Err(IoError::Shape("curve file needs >= 2 grid columns".into()));
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        if record.len() != grid.len() + 1 {
            return Err(IoError::Shape(format!(
                "row has {} fields, expected {}",
                record.len(),
                grid.len() + 1
            )));
        }
        let second = parse::<u32>(&record[0])?;
        let values: Vec<f64> = record
            .iter()
            .skip(1)
            .map(parse::<f64>)
            .collect::<Result<_, _>>()?;
        rows.push((second, values));
    }
    Ok(CurveTable { grid, rows })
}

impl CurveTable {
    /// Assemble a waterfall: seconds must be contiguous, the grid uniform.
    /// NaN cells are linearly interpolated within their row and negative
    /// values clamped to zero.
    pub fn into_waterfall(self) -> Result<Waterfall, IoError> {
        if self.rows.len() < 2 {
            return Err(IoError::Shape("waterfall needs >= 2 rows".into()));
        }
        let col_spacing = self.grid[1] - self.grid[0];
        for w in self.grid.windows(2) {
            let step = w[1] - w[0];
            if step <= 0.0 || (step - col_spacing).abs() > 1e-9 * col_spacing.abs().max(1.0) {
                return Err(IoError::Shape("grid columns are not uniform".into()));
            }
        }
        let first = self.rows[0].0;
        let grid = EvalGrid::new(self.grid).map_err(|e| IoError::Shape(e.to_string()))?;
        let mut values = Vec::with_capacity(self.rows.len() * grid.len());
        for (i, (second, row)) in self.rows.iter().enumerate() {
            if *second != first + i as u32 {
                return Err(IoError::Shape(format!(
                    "seconds not contiguous at row {i} (second {second})"
                )));
            }
            let support: Vec<bool> = row.iter().map(|v| v.is_finite()).collect();
            let curve = MeanCurve::new(grid.clone(), row.clone(), support)
                .map_err(|e| IoError::Shape(e.to_string()))?;
            let dense = curve
                .interpolated_values()
                .ok_or_else(|| IoError::Shape(format!("row {i} has no finite values")))?;
            values.extend(dense.into_iter().map(|v| v.max(0.0)));
        }
        let rows = self.rows.len();
        let cols = grid.len();
        Waterfall::new(values, rows, cols, 1.0, col_spacing)
            .map_err(|e| IoError::Shape(e.to_string()))
    }
}

pub fn write_waterfall_csv<W: Write>(mut writer: W, w: &Waterfall) -> Result<(), IoError> {
    write!(writer, "second")?;
    for j in 0..w.cols() {
        write!(writer, ",{}", j as f64 * w.col_spacing)?;
    }
    writeln!(writer)?;
    for r in 0..w.rows() {
        write!(writer, "{r}")?;
        for v in w.row(r) {
            write!(writer, ",{v}")?;
        }
        writeln!(writer)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_waterfall_csv<R: Read>(reader: R) -> Result<Waterfall, IoError> {
    read_curves_csv(reader)?.into_waterfall()
}

// ---------------------------------------------------------------------------
// trajectory CSV
// ---------------------------------------------------------------------------

/// Columns: vehicle_id,row,col,velocity_mps. The velocity repeats on every
/// keypoint row of its track; an empty field means no fitted velocity.
pub fn write_tracks_csv<W: Write>(mut writer: W, set: &TrajectorySet) -> Result<(), IoError> {
    writeln!(writer, "vehicle_id,row,col,velocity_mps")?;
    for (id, track) in set.tracks.iter().enumerate() {
        for &(row, col) in &track.points {
            match track.velocity_mps {
                Some(v) => writeln!(writer, "{id},{row},{col},{v}")?,
                None => writeln!(writer, "{id},{row},{col},")?,
            }
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn read_tracks_csv<R: Read>(reader: R) -> Result<TrajectorySet, IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expect = ["vehicle_id", "row", "col", "velocity_mps"];
    if headers.len() != 4 || headers.iter().zip(expect).any(|(a, b)| a != b) {
        return Err(IoError::Parse(
            "expected header vehicle_id,row,col,velocity_mps".into(),
        ));
    }
    let mut tracks: Vec<Track> = Vec::new();
    let mut current_id: Option<u64> = None;
    for record in rdr.records() {
        let record = record?;
        let id = parse::<u64>(&record[0])?;
        let row = parse::<usize>(&record[1])?;
        let col = parse::<usize>(&record[2])?;
        let velocity = if record[3].trim().is_empty() {
            None
        } else {
            Some(parse::<f64>(&record[3])?)
        };
        if current_id != Some(id) {
            tracks.push(Track {
                points: Vec::new(),
                velocity_mps: velocity,
            });
            current_id = Some(id);
        }
        tracks.last_mut().unwrap().points.push((row, col));
    }
    Ok(TrajectorySet { tracks })
}

/// Sniff the stream format: binary streams start with the magic bytes.
pub fn is_binary_stream<R: BufRead>(reader: &mut R) -> Result<bool, IoError> {
    let buf = reader.fill_buf()?;
    Ok(buf.len() >= 4 && buf[..4] == FRAME_MAGIC)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StreamConfig;
    use crate::synth::{generate_stream, MeanFn, MeanScenario};

    fn sample_frames(n: usize) -> (StreamHeader, Vec<FrameRecord>) {
        let cfg = StreamConfig {
            points_per_frame: 12,
            point_spacing: 0.4,
            fps: 3,
            distance_origin: 0.0,
            allow_negative: true,
        };
        let scenario = MeanScenario {
            mean: MeanFn::Sine {
                amplitude: 2.0,
                period: 3.0,
                phase: 0.5,
            },
            noise_sigma: 0.4,
            process_amp: 0.1,
            seed: 5,
        };
        let (frames, _) = generate_stream(&scenario, &cfg, n).unwrap();
        let header = StreamHeader {
            points_per_frame: 12,
            point_spacing: 0.4,
            fps: 3,
            frame_count: n as u64,
        };
        (header, frames)
    }

    fn quantized(frames: &[FrameRecord]) -> Vec<FrameRecord> {
        frames
            .iter()
            .map(|f| FrameRecord {
                second: f.second,
                frame_index: f.frame_index,
                coordinates: (0..f.len()).map(|j| j as f64 * 0.4).collect(),
                amplitudes: f.amplitudes.iter().map(|&y| y as f32 as f64).collect(),
            })
            .collect()
    }

    #[test]
    fn binary_roundtrip_at_f32_precision() {
        let (header, frames) = sample_frames(10);
        let mut writer = BinFrameWriter::new(Vec::new(), &header).unwrap();
        for f in &frames {
            writer.write_frame(f).unwrap();
        }
        let bytes = writer.finish().unwrap();
        let reader = BinFrameReader::new(&bytes[..]).unwrap();
        assert_eq!(reader.header(), &header);
        let back: Vec<FrameRecord> = reader.map(|r| r.unwrap()).collect();
        assert_eq!(back, quantized(&frames));
    }

    #[test]
    fn corrupt_magic_is_rejected() {
        let (header, frames) = sample_frames(2);
        let mut writer = BinFrameWriter::new(Vec::new(), &header).unwrap();
        for f in &frames {
            writer.write_frame(f).unwrap();
        }
        let mut bytes = writer.finish().unwrap();
        bytes[0] = b'X';
        assert!(matches!(
            BinFrameReader::new(&bytes[..]),
            Err(IoError::BadMagic)
        ));
    }

    #[test]
    fn truncated_payload_is_detected() {
        let (header, frames) = sample_frames(3);
        let mut writer = BinFrameWriter::new(Vec::new(), &header).unwrap();
        for f in &frames {
            writer.write_frame(f).unwrap();
        }
        let bytes = writer.finish().unwrap();
        let cut = &bytes[..bytes.len() - 7];
        let reader = BinFrameReader::new(cut).unwrap();
        let result: Result<Vec<_>, _> = reader.collect();
        assert!(matches!(result, Err(IoError::Truncated)));
    }

    #[test]
    fn csv_and_binary_parse_to_equal_frames() {
        let (header, frames) = sample_frames(6);
        let mut bin = BinFrameWriter::new(Vec::new(), &header).unwrap();
        let mut csv_w = CsvFrameWriter::new(Vec::new(), header.points_per_frame).unwrap();
        for f in &frames {
            bin.write_frame(f).unwrap();
            csv_w.write_frame(f).unwrap();
        }
        let bin_bytes = bin.finish().unwrap();
        let csv_bytes = csv_w.finish().unwrap();
        let from_bin: Vec<FrameRecord> = BinFrameReader::new(&bin_bytes[..])
            .unwrap()
            .map(|r| r.unwrap())
            .collect();
        let from_csv = read_frames_csv(&csv_bytes[..], header.point_spacing).unwrap();
        assert_eq!(from_bin, from_csv);
    }

    #[test]
    fn out_of_order_frames_rejected() {
        let (header, mut frames) = sample_frames(3);
        frames.swap(0, 2);
        let mut writer = BinFrameWriter::new(Vec::new(), &header).unwrap();
        for f in &frames {
            writer.write_frame(f).unwrap();
        }
        let bytes = writer.finish().unwrap();
        let result: Result<Vec<_>, _> = BinFrameReader::new(&bytes[..]).unwrap().collect();
        assert!(matches!(result, Err(IoError::OutOfOrder { .. })));
    }

    #[test]
    fn curve_csv_roundtrip_with_nan() {
        let grid = EvalGrid::new(vec![0.0, 0.5, 1.0, 1.5]).unwrap();
        let mut writer = CurveCsvWriter::new(Vec::new(), &grid).unwrap();
        let c0 = MeanCurve::new(
            grid.clone(),
            vec![1.0, f64::NAN, 3.0, 4.0],
            vec![true, false, true, true],
        )
        .unwrap();
        let c1 = MeanCurve::new(grid.clone(), vec![2.0; 4], vec![true; 4]).unwrap();
        writer.write_row(0, &c0).unwrap();
        writer.write_row(1, &c1).unwrap();
        let bytes = writer.finish().unwrap();
        let table = read_curves_csv(&bytes[..]).unwrap();
        assert_eq!(table.grid, grid.points());
        assert_eq!(table.rows.len(), 2);
        assert!(table.rows[0].1[1].is_nan());
        assert_eq!(table.rows[0].1[2], 3.0);
        let w = table.into_waterfall().unwrap();
        assert_eq!(w.rows(), 2);
        assert_eq!(w.value(0, 1), 2.0); // interpolated between 1 and 3
    }

    #[test]
    fn waterfall_csv_roundtrip() {
        let values: Vec<f64> = (0..12).map(|i| i as f64 * 0.5).collect();
        let w = Waterfall::new(values, 3, 4, 1.0, 0.4).unwrap();
        let mut bytes = Vec::new();
        write_waterfall_csv(&mut bytes, &w).unwrap();
        let back = read_waterfall_csv(&bytes[..]).unwrap();
        assert_eq!(back.rows(), 3);
        assert_eq!(back.cols(), 4);
        assert_eq!(back.values(), w.values());
        assert!((back.col_spacing - 0.4).abs() < 1e-12);
    }

    #[test]
    fn tracks_csv_roundtrip() {
        let set = TrajectorySet {
            tracks: vec![
                Track {
                    points: vec![(2, 0), (3, 4), (4, 9)],
                    velocity_mps: Some(25.0),
                },
                Track {
                    points: vec![(7, 0)],
                    velocity_mps: None,
                },
            ],
        };
        let mut bytes = Vec::new();
        write_tracks_csv(&mut bytes, &set).unwrap();
        let back = read_tracks_csv(&bytes[..]).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn format_sniffing() {
        let (header, frames) = sample_frames(1);
        let mut writer = BinFrameWriter::new(Vec::new(), &header).unwrap();
        writer.write_frame(&frames[0]).unwrap();
        let bytes = writer.finish().unwrap();
        let mut cursor = std::io::BufReader::new(&bytes[..]);
        assert!(is_binary_stream(&mut cursor).unwrap());
        let text = b"second,frame,a_0\n0,1,2.5\n";
        let mut cursor = std::io::BufReader::new(&text[..]);
        assert!(!is_binary_stream(&mut cursor).unwrap());
    }
}
