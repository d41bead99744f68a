//! Independent oracles for the local linear estimator: brute-force moment
//! sums, a pooled weighted-regression solve on a different parameterization,
//! and the closed-form optimal bandwidth for a sine mean.

use dasflow::lpr::{batch_estimate, epanechnikov, frame_stats, rot_bandwidth, GridStatPair};
use dasflow::model::{regular_grid, EvalGrid, FrameRecord, StreamConfig};
use dasflow::synth::{generate_stream, MeanFn, MeanScenario};

fn config(d: usize, spacing: f64) -> StreamConfig {
    StreamConfig {
        points_per_frame: d,
        point_spacing: spacing,
        fps: 3,
        distance_origin: 0.0,
        allow_negative: true,
    }
}

/// Kernel reimplemented locally so the oracle shares nothing with the
/// library path.
fn oracle_weight(x_d: f64, x: f64, h: f64) -> f64 {
    let u = (x_d - x) / h;
    if u.abs() < 1.0 {
        0.75 * (1.0 - u * u) / h
    } else {
        0.0
    }
}

/// Term-by-term double loop over every distance point, no windowing.
fn oracle_frame_stats(frame: &FrameRecord, grid: &EvalGrid, h: f64) -> Vec<GridStatPair> {
    grid.points()
        .iter()
        .map(|&x| {
            let mut s = GridStatPair::default();
            for (&xd, &y) in frame.coordinates.iter().zip(&frame.amplitudes) {
                let w = oracle_weight(xd, x, h);
                let dx = xd - x;
                s.p00 += w;
                s.p01 += w * dx;
                s.p11 += w * dx * dx;
                s.q0 += w * y;
                s.q1 += w * dx * y;
            }
            s
        })
        .collect()
}

#[test]
fn frame_stats_matches_brute_force() {
    // the five-point hand case plus noisy frames at several bandwidths
    let cfg = config(5, 1.0);
    let grid = regular_grid(&cfg, 5).unwrap();
    let frame = FrameRecord::on_regular_grid(0, 1, &cfg, vec![1.0, 3.0, 2.0, 5.0, 4.0]);
    for h in [2.0, 0.9, 3.7] {
        let got = frame_stats(&frame, &grid, h);
        let want = oracle_frame_stats(&frame, &grid, h);
        for (g, w) in got.iter().zip(&want) {
            assert!((g.p00 - w.p00).abs() <= 1e-12);
            assert!((g.p01 - w.p01).abs() <= 1e-12);
            assert!((g.p11 - w.p11).abs() <= 1e-12);
            assert!((g.q0 - w.q0).abs() <= 1e-12);
            assert!((g.q1 - w.q1).abs() <= 1e-12);
        }
    }

    let cfg = config(120, 0.4);
    let scenario = MeanScenario {
        mean: MeanFn::Sine {
            amplitude: 1.0,
            period: 17.0,
            phase: 0.4,
        },
        noise_sigma: 0.3,
        process_amp: 0.0,
        seed: 21,
    };
    let (frames, _) = generate_stream(&scenario, &cfg, 3).unwrap();
    let grid = regular_grid(&cfg, 37).unwrap();
    for frame in &frames {
        let got = frame_stats(frame, &grid, 1.7);
        let want = oracle_frame_stats(frame, &grid, 1.7);
        for (g, w) in got.iter().zip(&want) {
            assert!((g.p00 - w.p00).abs() <= 1e-12);
            assert!((g.q1 - w.q1).abs() <= 1e-12);
        }
    }
}

/// Pooled weighted least squares in the raw coordinate (y ~ c0 + c1 X),
/// evaluated back at x — an algebraically different route to the same mean.
fn oracle_pooled_wls(frames: &[FrameRecord], x: f64, h: f64) -> Option<f64> {
    let mut sw = 0.0;
    let mut sx = 0.0;
    let mut sxx = 0.0;
    let mut sy = 0.0;
    let mut sxy = 0.0;
    for frame in frames {
        for (&xd, &y) in frame.coordinates.iter().zip(&frame.amplitudes) {
            let w = oracle_weight(xd, x, h);
            sw += w;
            sx += w * xd;
            sxx += w * xd * xd;
            sy += w * y;
            sxy += w * xd * y;
        }
    }
    let det = sw * sxx - sx * sx;
    if det.abs() < 1e-9 {
        return None;
    }
    let slope = (sw * sxy - sx * sy) / det;
    let intercept = (sy - slope * sx) / sw;
    Some(intercept + slope * x)
}

#[test]
fn batch_estimate_matches_pooled_wls_solve() {
    for seed in 0..5u64 {
        let cfg = config(90, 0.4);
        let scenario = MeanScenario {
            mean: MeanFn::Sum {
                parts: vec![
                    MeanFn::Sine {
                        amplitude: 1.2,
                        period: 12.0,
                        phase: 0.1 * seed as f64,
                    },
                    MeanFn::Linear {
                        intercept: 2.0,
                        slope: 0.05,
                    },
                ],
            },
            noise_sigma: 0.25,
            process_amp: 0.1,
            seed,
        };
        let (frames, _) = generate_stream(&scenario, &cfg, 50).unwrap();
        let grid = regular_grid(&cfg, 41).unwrap();
        let h = 2.3;
        let curve = batch_estimate(&frames, &grid, h).unwrap();
        for (i, &x) in grid.points().iter().enumerate() {
            match (curve.support[i], oracle_pooled_wls(&frames, x, h)) {
                (true, Some(want)) => {
                    assert!(
                        (curve.values[i] - want).abs() <= 1e-9,
                        "seed {seed} x {x}: {} vs {want}",
                        curve.values[i]
                    );
                }
                (false, None) => {}
                (got, want) => panic!("support disagreement at x {x}: {got} vs {want:?}"),
            }
        }
    }
}

#[test]
fn accumulated_stats_equal_batch_exactly() {
    let cfg = config(70, 0.5);
    let scenario = MeanScenario {
        mean: MeanFn::Constant { value: 4.0 },
        noise_sigma: 0.5,
        process_amp: 0.2,
        seed: 8,
    };
    let (frames, _) = generate_stream(&scenario, &cfg, 6).unwrap();
    let grid = regular_grid(&cfg, 19).unwrap();
    let h = 1.9;
    // accumulate in the fixed order: frames outer, distances inner
    let mut acc = vec![GridStatPair::default(); grid.len()];
    for frame in &frames {
        for (a, s) in acc.iter_mut().zip(frame_stats(frame, &grid, h)) {
            a.add_assign(&s);
        }
    }
    let direct = batch_estimate(&frames, &grid, h).unwrap();
    let from_acc = dasflow::lpr::curve_from_stats(grid, &acc);
    // identical summation order: bitwise equality
    for i in 0..direct.values.len() {
        assert_eq!(direct.support[i], from_acc.support[i]);
        if direct.support[i] {
            assert_eq!(direct.values[i].to_bits(), from_acc.values[i].to_bits());
        }
    }
}

#[test]
fn kernel_mass_and_symmetry() {
    // trapezoid rule over [-1, 1] at step 1e-4
    let step = 1e-4;
    let n = (2.0 / step) as usize;
    let mut mass = 0.0;
    for i in 0..=n {
        let u = -1.0 + i as f64 * step;
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        mass += w * epanechnikov(u) * step;
    }
    assert!((mass - 1.0).abs() < 1e-6, "kernel mass {mass}");
    for i in 0..2000 {
        let u = -2.0 + i as f64 * 0.002;
        assert_eq!(epanechnikov(u), epanechnikov(-u));
    }
}

#[test]
fn rot_bandwidth_within_factor_two_of_sine_optimum() {
    // mu(x) = sin(2 pi x / 160) sampled on [0, 319.6] at 0.4 m, sigma = 0.2
    let cfg = config(800, 0.4);
    let scenario = MeanScenario {
        mean: MeanFn::Sine {
            amplitude: 1.0,
            period: 160.0,
            phase: 0.0,
        },
        noise_sigma: 0.2,
        process_amp: 0.0,
        seed: 17,
    };
    let (frames, _) = generate_stream(&scenario, &cfg, 1).unwrap();
    let n_total = 800u64;
    let (h, pilot) = rot_bandwidth(&frames, n_total).unwrap();

    // closed form: integral of (mu'')^2 over the sampled span
    let a = 2.0 * std::f64::consts::PI / 160.0;
    let span = cfg.span_m();
    let theta22 = a.powi(4) * (span / 2.0 - (2.0 * a * span).sin() / (4.0 * a));
    let sigma2 = 0.2 * 0.2;
    let c_star = (0.6 * sigma2 * span / (0.04 * theta22)).powf(0.2);
    let h_star = c_star * (n_total as f64).powf(-0.2);

    assert!(h > pilot.h_floor && h < pilot.interval_len, "clamped h {h}");
    let ratio = h / h_star;
    assert!(
        ratio > 0.5 && ratio < 2.0,
        "h {h} vs optimal {h_star}: ratio {ratio}"
    );
}
