mod common;

use std::fs;

use common::*;

fn write_config(dir: &std::path::Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn stderr(o: &std::process::Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn neumann_swap_reports_unit_lambda() {
    let tmp = tempfile::tempdir().unwrap();
    let o = nlpe(&["spectrum"], &config_path("neumann_constant"), tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let s = read_json(&tmp.path().join("spectrum.json"));
    assert!((s["lambda_principal"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    let alpha = s["birman_schwinger"]["alpha_star"].as_f64().unwrap();
    assert!((alpha - 1.0).abs() < 1e-6);
    let csv = fs::read_to_string(tmp.path().join("eigenfunction.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "node,x1,component,psi");
}

#[test]
fn negative_period_exits_with_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config_path("neumann_constant")).unwrap();
    let bad = text.replace("period = 1.0", "period = -1.0");
    assert_ne!(bad, text);
    let o = nlpe(&["spectrum"], &write_config(tmp.path(), &bad), tmp.path());
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.starts_with("ERROR:") && err.contains("coupling.period"), "{err}");
}

#[test]
fn missing_config_file_exits_with_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = nlpe(&["spectrum"], &tmp.path().join("absent.toml"), tmp.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn competitive_coupling_fails_validation() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config_path("neumann_constant")).unwrap();
    let bad = text.replace(r#"["0", "1"]"#, r#"["0", "-1"]"#);
    assert_ne!(bad, text);
    let o = nlpe(&["criteria"], &write_config(tmp.path(), &bad), tmp.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("cooperative"));
}

#[test]
fn convergence_above_the_state_cap_exits_with_code_four() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config_path("smooth_k1")).unwrap();
    let capped = text.replace("eigen_mesh = 4", "eigen_mesh = 4\nmax_state_dim = 64");
    let o = nlpe(&["convergence"], &write_config(tmp.path(), &capped), tmp.path());
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn criteria_writes_json_and_text() {
    let tmp = tempfile::tempdir().unwrap();
    let o = nlpe(&["criteria"], &config_path("periodic_constant"), tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let r = read_json(&tmp.path().join("criteria.json"));
    assert_eq!(r["existence"]["verdict"], "exists");
    assert!((r["lambda_principal"].as_f64().unwrap() - 0.5).abs() < 1e-8);
    let text = fs::read_to_string(tmp.path().join("criteria.txt")).unwrap();
    assert!(text.contains("existence"));
}

#[test]
fn floquet_map_lists_every_node() {
    let tmp = tempfile::tempdir().unwrap();
    let o = nlpe(&["floquet-map"], &config_path("periodic_k2"), tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("floquet_map.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "node,x1,lambda,h,kernel_mass");
    let summary = read_json(&tmp.path().join("floquet_map.json"));
    let max_h = summary["max_h"].as_f64().unwrap();
    let hs: Vec<f64> = lines.map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert!(!hs.is_empty());
    assert_eq!(hs.iter().cloned().fold(f64::NEG_INFINITY, f64::max), max_h);
}

#[test]
fn convergence_writes_rows_and_orders() {
    let tmp = tempfile::tempdir().unwrap();
    let o = nlpe(&["convergence", "--levels", "3"], &config_path("smooth_k1"), tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let c = read_json(&tmp.path().join("convergence.json"));
    assert_eq!(c["rows"].as_array().unwrap().len(), 6);
    let csv = fs::read_to_string(tmp.path().join("convergence.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "kind,level,resolution,time_steps,lambda,difference,order");
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn repeated_runs_are_bit_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        let o = nlpe(&["spectrum", "--seed", "7"], &config_path("periodic_k2"), dir);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for name in ["spectrum.json", "eigenfunction.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
    }
    let threads = tempfile::tempdir().unwrap();
    let o = nlpe(&["spectrum", "--seed", "7", "--threads", "1"], &config_path("periodic_k2"), threads.path());
    assert!(o.status.success());
    assert_eq!(
        fs::read(a.path().join("spectrum.json")).unwrap(),
        fs::read(threads.path().join("spectrum.json")).unwrap()
    );
}

#[test]
fn dense_oracle_reproduces_the_committed_fixture() {
    let fresh = dense_oracle();
    let committed = load_fixture();
    assert_eq!(fresh.nodes, committed.nodes);
    assert!((fresh.lambda - committed.lambda).abs() < 1e-12);
    assert!(max_abs_diff(&fresh.eigenfunction, &committed.eigenfunction) < 1e-10);
    assert!(fresh.eigenfunction.iter().all(|v| *v > 0.0));
}

/// Rewrites the fixture: `cargo test -p nlpe-cli --test cli -- --ignored`.
#[test]
#[ignore]
fn regenerate_dense_oracle_fixture() {
    let mut text = serde_json::to_string_pretty(&dense_oracle()).unwrap();
    text.push('\n');
    fs::write(fixture_path(), text).unwrap();
}
