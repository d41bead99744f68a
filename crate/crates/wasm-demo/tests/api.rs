//! Native tests of the demo's JSON surface.

use dasflow_demo::{bandwidth_demo, estimate_demo, waterfall_demo};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).expect("valid json")
}

#[test]
fn estimate_demo_returns_all_curves() {
    let out = parse(&estimate_demo(
        r#"{"seed": 4, "frames": 30, "points": 120}"#,
    ));
    assert!(out.get("error").is_none(), "{out}");
    let grid = out["grid"].as_array().unwrap();
    assert_eq!(grid.len(), 120);
    for key in [
        "truth",
        "online",
        "batch",
        "kalman",
        "wavelet",
        "last_frame",
    ] {
        let curve = out[key].as_array().unwrap();
        assert_eq!(curve.len(), 120, "{key}");
        assert!(curve.iter().all(|v| v.as_f64().unwrap().is_finite()));
    }
    assert!(out["rmse"]["online"].as_f64().unwrap() > 0.0);
    assert!(out["bandwidth"].as_f64().unwrap() > 0.0);
}

#[test]
fn estimate_demo_defaults_work() {
    let out = parse(&estimate_demo("{}"));
    assert!(out.get("error").is_none(), "{out}");
    assert_eq!(out["grid"].as_array().unwrap().len(), 200);
}

#[test]
fn estimate_demo_rejects_bad_params() {
    let out = parse(&estimate_demo(r#"{"frames": 0}"#));
    assert!(out["error"].as_str().unwrap().contains("frames"));
    let out = parse(&estimate_demo("not json"));
    assert!(out.get("error").is_some());
}

#[test]
fn waterfall_demo_extracts_tracks() {
    let out = parse(&waterfall_demo(
        r#"{"seed": 1, "vehicles": 5, "rows": 120, "cols": 300}"#,
    ));
    assert!(out.get("error").is_none(), "{out}");
    assert_eq!(out["rows"].as_u64().unwrap(), 120);
    assert_eq!(out["cols"].as_u64().unwrap(), 300);
    assert_eq!(
        out["values"].as_array().unwrap().len(),
        120 * 300,
        "row-major matrix"
    );
    assert_eq!(out["truth"].as_array().unwrap().len(), 5);
    let accuracy = out["metrics"]["accuracy"].as_f64().unwrap();
    assert!(accuracy >= 0.8, "accuracy {accuracy}");
}

#[test]
fn waterfall_demo_clean_is_perfect() {
    let out = parse(&waterfall_demo(
        r#"{"seed": 2, "vehicles": 4, "rows": 100, "cols": 300, "noise_sigma": 0.0, "smooth": false}"#,
    ));
    assert!(out.get("error").is_none(), "{out}");
    assert_eq!(out["metrics"]["accuracy"].as_f64().unwrap(), 1.0);
    assert_eq!(out["metrics"]["wrong"].as_u64().unwrap(), 0);
}

#[test]
fn bandwidth_demo_reports_shrinking_schedule() {
    let out = parse(&bandwidth_demo(
        r#"{"seed": 9, "frames": 200, "ladder": 5}"#,
    ));
    assert!(out.get("error").is_none(), "{out}");
    let h = out["bandwidth"].as_array().unwrap();
    assert_eq!(h.len(), 200);
    let first = h[0].as_f64().unwrap();
    let last = h[199].as_f64().unwrap();
    assert!(last <= first);
    assert_eq!(out["etas"].as_array().unwrap().len(), 5);
    assert_eq!(out["centroids"].as_array().unwrap().len(), 5);
    assert!(out["state_bytes"].as_u64().unwrap() > 0);
}
