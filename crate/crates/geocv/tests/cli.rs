use geocv::io::{read_fit, read_sloo};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn geocv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geocv")).args(args).env_remove("GEOCV_THREADS").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

/// Synthetic data plus a config with a spatial and a non-spatial model.
fn setup(dir: &Path, formulas: &[&str]) -> PathBuf {
    let data = dir.join("data.csv");
    let o = geocv(&["synth", "--out", data.to_str().unwrap(), "--seed", "4", "--n", "60", "--range", "0.4", "--beta", "1,0.5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let list: Vec<String> = formulas.iter().map(|f| format!("\"{f}\"")).collect();
    let cfg = format!(
        r#"[data]
path = "data.csv"
x = "x"
y = "y"

[model]
formulas = [{}]

[mesh]
max_edge_inner = 0.25
max_edge_outer = 0.5
cutoff = 0.01

[sloo]
ss = 6
rad = "auto"
seed = 3

[report]
grid = [20, 20]

[output]
dir = "out"
"#,
        list.join(", ")
    );
    let path = dir.join("run.cfg");
    std::fs::write(&path, cfg).unwrap();
    path
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> =
        std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    v.sort();
    v
}

#[test]
fn exit_codes() {
    let o = geocv(&["fit", "--no-such-flag"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert!(o.stdout.is_empty());
    assert_eq!(code(&geocv(&[])), 1);
    assert_eq!(code(&geocv(&["frobnicate"])), 1);
    assert_eq!(code(&geocv(&["--help"])), 0);
    let o = geocv(&["fit", "--config", "/definitely/missing.cfg"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "[data]\npath = 1\n").unwrap();
    assert_eq!(code(&geocv(&["mesh", "--config", bad.to_str().unwrap()])), 2);
}

#[test]
fn non_spatial_fit_has_no_spatial_panels() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), &["response ~ x1"]);
    let o = geocv(&["fit", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = files(&dir.path().join("out"));
    assert!(out.contains(&"fit_1.csv".to_string()) && out.contains(&"calibration_1.csv".to_string()));
    assert!(out.contains(&"model1_pit_histogram.svg".to_string()));
    assert!(!out.iter().any(|f| f.contains("random_effect") || f.contains("field") || f.contains("log_kappa")));
    assert!(!out.contains(&"mesh.csv".to_string()));
    let manifest = std::fs::read_to_string(dir.path().join("out/manifest_fit.toml")).unwrap();
    assert!(manifest.contains("command = \"fit\"") && manifest.contains("\"fit_1.csv\" = "));
}

#[test]
fn auto_radius_matches_serialized_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), &["response ~ x1 + spatial", "response ~ x1"]);
    for cmd in ["fit", "sloo"] {
        let o = geocv(&[cmd, "--config", cfg.to_str().unwrap(), "--threads", "2"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let out = dir.path().join("out");
    let fit = read_fit(&out.join("fit_1.csv")).unwrap();
    let result = read_sloo(&out.join("sloo_result.csv")).unwrap();
    assert_eq!(result.iterations.len(), 6);
    assert_eq!(result.metrics.len(), 2);

    let mut rdr = csv::Reader::from_path(dir.path().join("data.csv")).unwrap();
    let pts: Vec<(f64, f64)> = rdr.records().map(|r| {
        let r = r.unwrap();
        (r[0].parse().unwrap(), r[1].parse().unwrap())
    }).collect();
    let mut maxd: f64 = 0.0;
    for a in &pts {
        for b in &pts {
            maxd = maxd.max((a.0 - b.0).hypot(a.1 - b.1));
        }
    }
    let expected = fit.spde.unwrap().range.min(maxd / 4.0);
    assert!((result.radius - expected).abs() <= 1e-6 * expected, "{} vs {expected}", result.radius);

    let o = geocv(&["report", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let names = files(&out);
    for f in ["manifest_report.toml", "sloo_map.svg", "sloo_obs_pred.svg", "model1_field.svg", "model2_fixed_x1.svg"] {
        assert!(names.contains(&f.to_string()), "{f}");
    }
}

#[test]
fn sloo_is_thread_independent_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), &["response ~ x1 + spatial", "response ~ x1"]);
    let run = |out: &str, threads: &str| {
        let o = geocv(&["sloo", "--config", cfg.to_str().unwrap(), "--out", out, "--threads", threads]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    };
    let dirs = ["t1", "t8", "again"].map(|d| dir.path().join(d));
    run(dirs[0].to_str().unwrap(), "1");
    run(dirs[1].to_str().unwrap(), "8");
    run(dirs[2].to_str().unwrap(), "1");
    let names = files(&dirs[0]);
    assert_eq!(names, files(&dirs[1]));
    for f in &names {
        let a = std::fs::read(dirs[0].join(f)).unwrap();
        assert_eq!(a, std::fs::read(dirs[1].join(f)).unwrap(), "{f}");
        assert_eq!(a, std::fs::read(dirs[2].join(f)).unwrap(), "{f}");
    }
    let o = Command::new(env!("CARGO_BIN_EXE_geocv"))
        .args(["sloo", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("env").to_str().unwrap()])
        .env("GEOCV_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("3 threads"));
    assert_eq!(std::fs::read(dir.path().join("env/sloo_result.csv")).unwrap(), std::fs::read(dirs[0].join("sloo_result.csv")).unwrap());
}

#[test]
fn overrides_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), &["response ~ x1"]);
    let o = geocv(&["sloo", "--config", cfg.to_str().unwrap(), "--ss", "4", "--rad", "0.05", "--seed", "8", "--threads", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_sloo(&dir.path().join("out/sloo_result.csv")).unwrap();
    assert_eq!((r.iterations.len(), r.radius, r.seed), (4, 0.05, 8));
    let m = std::fs::read_to_string(dir.path().join("out/manifest_sloo.toml")).unwrap();
    assert!(m.contains("overrides = [\"ss=4\", \"rad=0.05\", \"seed=8\"]"), "{m}");
    assert_eq!(code(&geocv(&["sloo", "--config", cfg.to_str().unwrap(), "--rad", "near"])), 2);
}
