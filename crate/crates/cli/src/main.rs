use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use dasflow::baselines::ThresholdRule;
use dasflow::io::{
    read_tracks_csv, read_waterfall_csv, write_tracks_csv, write_waterfall_csv, BinFrameWriter,
    CsvFrameWriter, CurveCsvWriter, StreamHeader,
};
use dasflow::model::EvalGrid;
use dasflow::synth::{generate_stream, generate_waterfall, ScenarioFile};
use dasflow::trajectory::{extract_trajectories, match_trajectories, smooth_rows, TrackerConfig};

use dasflow_cli::bench::{run_bench, BenchConfig};
use dasflow_cli::pipeline::{
    run_batch_estimate, run_denoise, run_online_estimate, DenoiseMethod, FrameSource, OnlineArgs,
};

/// Streaming mean estimation and trajectory extraction for multi-frame
/// fiber sensing data.
#[derive(Parser)]
#[command(name = "dasflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Bin,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimateMode {
    Online,
    Batch,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Kalman,
    Wavelet,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic frame stream (and optionally a waterfall) from a
    /// scenario file, with ground truth.
    Generate {
        /// Scenario TOML file.
        #[arg(long)]
        scenario: PathBuf,
        /// Output stream file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "bin")]
        format: Format,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the true mean curve here (CSV).
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Write the scenario's waterfall here (CSV; needs a `[waterfall]`
        /// section).
        #[arg(long)]
        waterfall_out: Option<PathBuf>,
        /// Write the waterfall's true trajectories here (CSV).
        #[arg(long)]
        truth_tracks: Option<PathBuf>,
    },
    /// Estimate the per-second mean curve of a stream.
    Estimate {
        /// Input stream (binary or CSV, sniffed).
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "online")]
        mode: EstimateMode,
        /// Output curve CSV (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        grid_points: usize,
        /// Candidate bandwidth ladder size.
        #[arg(long, default_value_t = 5)]
        ladder: usize,
        /// Online state checkpoint: resumed from when present, written on
        /// completion.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Re-estimate the noise variance from running residuals every N
        /// frames (off by default).
        #[arg(long)]
        refresh_every: Option<u64>,
        /// Reject negative amplitudes at ingestion.
        #[arg(long)]
        strict_positive: bool,
        /// Point spacing in meters for CSV inputs (binary headers carry it).
        #[arg(long, default_value_t = 0.4)]
        csv_spacing: f64,
        /// Frames per second for CSV inputs.
        #[arg(long, default_value_t = 3)]
        csv_fps: u32,
    },
    /// Denoise a stream with a classical filter, averaged per second.
    Denoise {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Wavelet decomposition depth.
        #[arg(long, default_value_t = 4)]
        levels: usize,
        /// "universal" or a fixed numeric threshold.
        #[arg(long, default_value = "universal")]
        threshold: String,
        #[arg(long)]
        strict_positive: bool,
        #[arg(long, default_value_t = 0.4)]
        csv_spacing: f64,
        #[arg(long, default_value_t = 3)]
        csv_fps: u32,
    },
    /// Assemble per-second curves into a dense waterfall matrix.
    Waterfall {
        /// Input curve CSV (from `estimate` or `denoise`).
        #[arg(long)]
        curves: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract vehicle trajectories from a waterfall.
    Extract {
        #[arg(long)]
        waterfall: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Entry peaks below this amplitude are ignored.
        #[arg(long, default_value_t = 1.0)]
        peak_threshold: f64,
        /// Velocity confidence fraction in (0, 1).
        #[arg(long, default_value_t = 0.3)]
        cof: f64,
        /// Velocity interval lower bound, m/s.
        #[arg(long, default_value_t = 60.0 / 3.6)]
        v_min: f64,
        /// Velocity interval upper bound, m/s.
        #[arg(long, default_value_t = 120.0 / 3.6)]
        v_max: f64,
        #[arg(long, default_value_t = 5)]
        fit_window: usize,
        #[arg(long, default_value_t = 3)]
        min_track_len: usize,
        /// Smooth each row at this bandwidth (meters) before extraction;
        /// use on raw, un-denoised waterfalls.
        #[arg(long)]
        smooth: Option<f64>,
    },
    /// Compare extracted trajectories against ground truth.
    Evaluate {
        #[arg(long)]
        extracted: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Mean column error tolerance for a correct match.
        #[arg(long, default_value_t = 5)]
        tol_cols: usize,
        /// Also write the metrics as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run every method on a scenario and report RMSE, timing and state
    /// sizes.
    Bench {
        #[arg(long)]
        scenario: PathBuf,
        /// Output CSV (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        grid_points: usize,
        #[arg(long, default_value_t = 5)]
        ladder: usize,
        /// Override the scenario frame count.
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate {
            scenario,
            out,
            format,
            seed,
            truth,
            waterfall_out,
            truth_tracks,
        } => generate(
            &scenario,
            &out,
            format,
            seed,
            truth.as_deref(),
            waterfall_out.as_deref(),
            truth_tracks.as_deref(),
        ),
        Command::Estimate {
            input,
            mode,
            out,
            grid_points,
            ladder,
            checkpoint,
            refresh_every,
            strict_positive,
            csv_spacing,
            csv_fps,
        } => {
            let source = FrameSource::open(&input, csv_spacing, csv_fps)?;
            let writer = open_out(out.as_deref())?;
            match mode {
                EstimateMode::Online => {
                    let args = OnlineArgs {
                        grid_points,
                        ladder,
                        refresh_every,
                        checkpoint,
                        allow_negative: !strict_positive,
                    };
                    run_online_estimate(source, &args, Some(writer))?;
                }
                EstimateMode::Batch => {
                    run_batch_estimate(source, grid_points, !strict_positive, Some(writer))?;
                }
            }
            Ok(())
        }
        Command::Denoise {
            input,
            method,
            out,
            levels,
            threshold,
            strict_positive,
            csv_spacing,
            csv_fps,
        } => {
            let source = FrameSource::open(&input, csv_spacing, csv_fps)?;
            let writer = open_out(out.as_deref())?;
            let method = match method {
                Method::Kalman => DenoiseMethod::Kalman,
                Method::Wavelet => DenoiseMethod::Wavelet {
                    levels,
                    threshold: parse_threshold(&threshold)?,
                },
            };
            run_denoise(source, method, !strict_positive, Some(writer))?;
            Ok(())
        }
        Command::Waterfall { curves, out } => {
            let table = dasflow::io::read_curves_csv(open_in(&curves)?)?;
            let waterfall = table.into_waterfall()?;
            write_waterfall_csv(open_out(Some(&out))?, &waterfall)?;
            Ok(())
        }
        Command::Extract {
            waterfall,
            out,
            peak_threshold,
            cof,
            v_min,
            v_max,
            fit_window,
            min_track_len,
            smooth,
        } => {
            let mut w = read_waterfall_csv(open_in(&waterfall)?)?;
            if let Some(h) = smooth {
                if h <= 0.0 || h.is_nan() {
                    bail!("--smooth must be positive");
                }
                w = smooth_rows(&w, h);
            }
            let config = TrackerConfig {
                peak_threshold,
                v_init_min: v_min,
                v_init_max: v_max,
                cof,
                fit_window,
                min_track_len,
            };
            let tracks = extract_trajectories(&w, &config)?;
            write_tracks_csv(open_out(Some(&out))?, &tracks)?;
            Ok(())
        }
        Command::Evaluate {
            extracted,
            truth,
            tol_cols,
            json,
        } => {
            let extracted_set = read_tracks_csv(open_in(&extracted)?)?;
            let truth_set = read_tracks_csv(open_in(&truth)?)?;
            // matching indexes keypoints by row offset, so malformed files
            // must be rejected up front
            if !extracted_set.is_valid() {
                bail!("{}: tracks violate the track invariants", extracted.display());
            }
            if !truth_set.is_valid() {
                bail!("{}: tracks violate the track invariants", truth.display());
            }
            let report = match_trajectories(&extracted_set, &truth_set, tol_cols);
            println!("total,correct,missing,wrong,accuracy");
            println!(
                "{},{},{},{},{:.4}",
                report.total, report.correct, report.missing, report.wrong, report.accuracy
            );
            if let Some(path) = json {
                fs::write(&path, serde_json::to_string_pretty(&report)?)
                    .with_context(|| format!("write {}", path.display()))?;
            }
            Ok(())
        }
        Command::Bench {
            scenario,
            out,
            json,
            grid_points,
            ladder,
            frames,
            seed,
        } => {
            let file = load_scenario(&scenario)?;
            let config = BenchConfig {
                grid_points,
                ladder,
            };
            let report = run_bench(&file, &config, frames, seed)?;
            let csv = report.to_csv();
            match out {
                Some(path) => {
                    fs::write(&path, csv).with_context(|| format!("write {}", path.display()))?
                }
                None => print!("{csv}"),
            }
            if let Some(path) = json {
                fs::write(&path, serde_json::to_string_pretty(&report)?)
                    .with_context(|| format!("write {}", path.display()))?;
            }
            Ok(())
        }
    }
}

fn load_scenario(path: &Path) -> Result<ScenarioFile> {
    let text =
        fs::read_to_string(path).with_context(|| format!("read scenario {}", path.display()))?;
    Ok(ScenarioFile::from_toml(&text)?)
}

fn open_in(path: &Path) -> Result<fs::File> {
    fs::File::open(path).with_context(|| format!("open {}", path.display()))
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            fs::File::create(p).with_context(|| format!("create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout())),
    })
}

fn parse_threshold(text: &str) -> Result<ThresholdRule> {
    if text.eq_ignore_ascii_case("universal") {
        Ok(ThresholdRule::Universal)
    } else {
        let value: f64 = text
            .parse()
            .map_err(|_| anyhow!("threshold must be \"universal\" or a number, got {text:?}"))?;
        Ok(ThresholdRule::Fixed(value))
    }
}

#[allow(clippy::too_many_arguments)]
fn generate(
    scenario_path: &Path,
    out: &Path,
    format: Format,
    seed: Option<u64>,
    truth: Option<&Path>,
    waterfall_out: Option<&Path>,
    truth_tracks: Option<&Path>,
) -> Result<()> {
    let file = load_scenario(scenario_path)?;
    let config = file.stream_config();
    config.validate()?;
    let mut scenario = file.mean_scenario();
    if let Some(s) = seed {
        scenario.seed = s;
    }
    let (frames, truth_curve) = generate_stream(&scenario, &config, file.stream.frames)?;

    let header = StreamHeader {
        points_per_frame: config.points_per_frame,
        point_spacing: config.point_spacing,
        fps: config.fps,
        frame_count: frames.len() as u64,
    };
    match format {
        Format::Bin => {
            let mut writer = BinFrameWriter::new(open_out(Some(out))?, &header)?;
            for frame in &frames {
                writer.write_frame(frame)?;
            }
            writer.finish()?;
        }
        Format::Csv => {
            let mut writer = CsvFrameWriter::new(open_out(Some(out))?, config.points_per_frame)?;
            for frame in &frames {
                writer.write_frame(frame)?;
            }
            writer.finish()?;
        }
    }

    if let Some(path) = truth {
        let grid = EvalGrid::new(config.coordinates())?;
        let mut writer = CurveCsvWriter::new(open_out(Some(path))?, &grid)?;
        writer.write_row(0, &truth_curve)?;
        writer.finish()?;
    }

    if waterfall_out.is_some() || truth_tracks.is_some() {
        let wf = file
            .waterfall
            .as_ref()
            .ok_or_else(|| anyhow!("scenario has no [waterfall] section"))?;
        let (waterfall, tracks) =
            generate_waterfall(&wf.vehicles, wf.rows, &config, wf.noise_sigma, wf.seed)?;
        if let Some(path) = waterfall_out {
            write_waterfall_csv(open_out(Some(path))?, &waterfall)?;
        }
        if let Some(path) = truth_tracks {
            write_tracks_csv(open_out(Some(path))?, &tracks)?;
        }
    }
    Ok(())
}
