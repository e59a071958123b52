use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use epnozzle::io::{read_rows, BackgroundRow, FieldRow, PerturbationRow, SweepCsvRow, ThresholdRow};
use epnozzle::{find_threshold_e, GasParams, InletState, NozzleGeometry, SolveReport};
use epnozzle_cli::commands::{BackgroundSummary, ResidualStudy, SolveDiagnostics, RESIDUAL_COLUMNS};
use serde_json::{json, Value};
use tempfile::TempDir;

fn base_config() -> Value {
    json!({
        "gas": { "gamma": 2.0, "b0": 1.0 },
        "geometry": { "r1": 1.0, "r2": 2.0, "theta0": 0.5 },
        "inlet": { "rho0": 1.0, "u0": 0.5, "p0": 1.0, "e0": -3.0 },
        "background_nodes": 1001,
        "grid": { "nr": 21, "nt": 17 },
        "coercivity_trials": 10
    })
}

struct Run {
    dir: TempDir,
    out: PathBuf,
    output: Output,
}

impl Run {
    fn code(&self) -> i32 {
        self.output.status.code().expect("exit code")
    }

    fn stderr(&self) -> String {
        String::from_utf8_lossy(&self.output.stderr).into_owned()
    }

    fn file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn json<T: serde::de::DeserializeOwned>(&self, name: &str) -> T {
        serde_json::from_slice(&fs::read(self.file(name)).unwrap()).unwrap()
    }

    fn csv<T: serde::de::DeserializeOwned>(&self, name: &str) -> Vec<T> {
        read_rows(fs::File::open(self.file(name)).unwrap()).unwrap()
    }
}

fn run_in(dir: TempDir, cmd: &str, config: &str, extra: &[&str]) -> Run {
    let cfg = dir.path().join("config.json");
    fs::write(&cfg, config).unwrap();
    let out = dir.path().join("out");
    let output = Command::new(env!("CARGO_BIN_EXE_epnozzle"))
        .arg(cmd)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(extra)
        .output()
        .unwrap();
    Run { dir, out, output }
}

fn run(cmd: &str, config: &Value, extra: &[&str]) -> Run {
    run_in(TempDir::new().unwrap(), cmd, &config.to_string(), extra)
}

fn bumps(a: f64) -> Value {
    json!({ "v_en": a, "phi_en": a, "k_en": a, "s_en": a, "phi_ex": a, "p_ex": a, "b": a })
}

#[test]
fn background_writes_csv_and_summary() {
    let r = run("background", &base_config(), &[]);
    assert_eq!(r.code(), 0, "{}", r.stderr());
    let text = fs::read_to_string(r.file("background.csv")).unwrap();
    assert_eq!(text.lines().count(), 1002);
    assert!(text.starts_with("r,msq,e,rho,u,p,phi\n"));
    assert!(!text.contains('\r'));
    let rows: Vec<BackgroundRow> = r.csv("background.csv");
    assert_eq!(rows[0].msq, 0.125);
    let s: BackgroundSummary = r.json("background.json");
    assert!(s.lemma_condition && s.msq_strictly_decreasing);
    assert_eq!(s.j0, 1.0);
    assert!(s.msq_max < 1.0);
}

#[test]
fn supersonic_inlet_is_a_config_error() {
    let mut cfg = base_config();
    cfg["inlet"]["u0"] = json!(2.0);
    let r = run("background", &cfg, &[]);
    assert_eq!(r.code(), 1);
    assert!(r.stderr().contains("M0^2"), "{}", r.stderr());
}

#[test]
fn malformed_config_is_a_config_error() {
    let r = run_in(TempDir::new().unwrap(), "background", "{ \"gas\": ", &[]);
    assert_eq!(r.code(), 1);
    let mut cfg = base_config();
    cfg["gas"]["gamma"] = json!(0.9);
    assert_eq!(run("background", &cfg, &[]).code(), 1);
    cfg = base_config();
    cfg["profiles"] = json!({ "k_en": "missing.csv" });
    let r = run("solve", &cfg, &[]);
    assert_eq!(r.code(), 1);
    assert!(r.stderr().contains("k_en"));
}

#[test]
fn missing_config_flag_is_a_config_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_epnozzle")).arg("background").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn long_nozzle_integrates_without_the_sufficient_condition() {
    let mut cfg = base_config();
    cfg["geometry"]["r2"] = json!(5.0);
    let r = run("background", &cfg, &[]);
    assert_eq!(r.code(), 0, "{}", r.stderr());
    let s: BackgroundSummary = r.json("background.json");
    assert!(!s.lemma_condition);
    assert!(s.msq_strictly_decreasing);
}

#[test]
fn strong_entrance_field_is_a_breakdown() {
    let mut cfg = base_config();
    cfg["inlet"]["e0"] = json!(0.5);
    let r = run("background", &cfg, &[]);
    assert_eq!(r.code(), 2);
    assert!(r.stderr().contains("subsonic"), "{}", r.stderr());
}

#[test]
fn zero_amplitudes_reproduce_the_background() {
    let r = run("solve", &base_config(), &[]);
    assert_eq!(r.code(), 0, "{}", r.stderr());
    let pert: Vec<PerturbationRow> = r.csv("perturbation.csv");
    assert_eq!(pert.len(), 21 * 17);
    assert!(pert.iter().all(|p| [p.u, p.v, p.phi, p.s, p.k].iter().all(|&x| x == 0.0)));
    let fields: Vec<FieldRow> = r.csv("fields.csv");
    for row in fields.chunks(17) {
        assert!(row.iter().all(|f| f.rho == row[0].rho && f.u == row[0].u && f.phi == row[0].phi && f.v == 0.0));
    }
    let rep: SolveReport = r.json("solve_report.json");
    assert!(rep.converged);
    assert_eq!(rep.sigma_p, 0.0);
}

#[test]
fn small_bumps_converge_geometrically() {
    let mut cfg = base_config();
    cfg["amplitudes"] = bumps(2.5e-4);
    let r = run("solve", &cfg, &[]);
    assert_eq!(r.code(), 0, "{}", r.stderr());
    let rep: SolveReport = r.json("solve_report.json");
    assert!(rep.converged && rep.iterations >= 3);
    assert!(rep.ratios.iter().all(|&q| q < 0.5), "{:?}", rep.ratios);
    let diag: SolveDiagnostics = r.json("diagnostics.json");
    assert!(diag.coercivity.unwrap().min_rayleigh_quotient > 0.0);
    assert!(diag.conservation.wall_normal_velocity == 0.0);
    let res: epnozzle::ResidualReport = r.json("residual_report.json");
    assert_eq!(Some(res), rep.residuals);
}

#[test]
fn large_bumps_diverge() {
    let mut cfg = base_config();
    cfg["amplitudes"] = bumps(4e-3);
    let r = run("solve", &cfg, &["--grid", "51x41"]);
    assert_eq!(r.code(), 3, "{}", r.stderr());
    assert!(r.stderr().contains("diverged"));
}

#[test]
fn outputs_are_deterministic() {
    let mut cfg = base_config();
    cfg["amplitudes"] = bumps(2.5e-4);
    let a = run("solve", &cfg, &[]);
    let b = run("solve", &cfg, &["--jobs", "2"]);
    for name in ["fields.csv", "perturbation.csv", "solve_report.json", "diagnostics.json"] {
        assert_eq!(fs::read(a.file(name)).unwrap(), fs::read(b.file(name)).unwrap(), "{name}");
    }
}

#[test]
fn grid_flag_overrides_the_config() {
    let r = run("solve", &base_config(), &["--grid", "11x9"]);
    assert_eq!(r.code(), 0, "{}", r.stderr());
    assert_eq!(r.csv::<FieldRow>("fields.csv").len(), 99);
    assert_eq!(run("solve", &base_config(), &["--grid", "11"]).code(), 1);
}

#[test]
fn single_lattice_point_matches_a_direct_bisection() {
    let mut cfg = base_config();
    cfg["threshold"] = json!({ "gammas": [2.0], "ratios": [2.0], "bracket": [-3.0, 0.5], "tol": 1e-5, "nodes": 401 });
    let r = run("sweep-threshold", &cfg, &[]);
    assert_eq!(r.code(), 0, "{}", r.stderr());
    let rows: Vec<ThresholdRow> = r.csv("threshold.csv");
    assert_eq!(rows.len(), 1);
    let direct = find_threshold_e(
        GasParams::new(2.0, 1.0).unwrap(),
        NozzleGeometry::new(1.0, 2.0, 0.5).unwrap(),
        InletState { rho0: 1.0, u0: 0.5, p0: 1.0, e0: -3.0 },
        (-3.0, 0.5),
        1e-5,
        401,
    )
    .unwrap();
    assert_eq!(rows[0].e_star, Some(direct.e_star));
    assert_eq!(rows[0].failure, Some(direct.failure));
}

#[test]
fn threshold_is_monotone_in_the_radius_ratio() {
    let mut cfg = base_config();
    let ratios = [1.5, 1.75, 2.0, 2.25, 2.5];
    cfg["threshold"] =
        json!({ "gammas": [1.4, 2.0, 3.0], "ratios": ratios, "bracket": [-8.0, 0.5], "tol": 1e-5, "nodes": 401 });
    let r = run("sweep-threshold", &cfg, &["--jobs", "3"]);
    assert_eq!(r.code(), 0, "{}", r.stderr());
    let rows: Vec<ThresholdRow> = r.csv("threshold.csv");
    assert_eq!(rows.len(), 15);
    for chunk in rows.chunks(ratios.len()) {
        let e: Vec<f64> = chunk.iter().map(|r| r.e_star.expect("threshold found")).collect();
        let up = e.windows(2).all(|w| w[1] > w[0]);
        let down = e.windows(2).all(|w| w[1] < w[0]);
        assert!(up || down, "gamma {}: {e:?}", chunk[0].gamma);
    }
}

#[test]
fn empty_lattice_is_a_config_error() {
    let r = run("sweep-threshold", &base_config(), &[]);
    assert_eq!(r.code(), 1);
    assert!(r.stderr().contains("empty"));
}

#[test]
fn sigma_sweep_always_has_a_zero_row() {
    let mut cfg = base_config();
    cfg["sweep"] = json!({ "amplitudes": [1e-4, 2e-4] });
    let r = run("sweep-sigma", &cfg, &[]);
    assert_eq!(r.code(), 0, "{}", r.stderr());
    let rows: Vec<SweepCsvRow> = r.csv("sweep.csv");
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0].amplitude, 0.0);
    assert_eq!(rows[0].sigma_p, 0.0);
    assert!(rows[0].norm <= 1e-10);
    for row in &rows[1..] {
        let q = row.ratio.expect("nonzero sigma");
        assert!(q > 0.1 && q < 1.0, "{q}");
    }
    assert!(rows[1].sigma_p < rows[2].sigma_p);
    let table: epnozzle::SweepTable = r.json("sweep.json");
    assert!(table.linear_regime);
}

#[test]
fn malformed_amplitude_lists_are_config_errors() {
    let mut cfg = base_config();
    cfg["sweep"] = json!({ "amplitudes": ["big"] });
    assert_eq!(run("sweep-sigma", &cfg, &[]).code(), 1);
    cfg["sweep"] = json!({ "amplitudes": [1e-4, -1e-4] });
    assert_eq!(run("sweep-sigma", &cfg, &[]).code(), 1);
}

#[test]
fn residual_study_has_one_row_per_level() {
    let mut cfg = base_config();
    cfg["amplitudes"] = bumps(2.5e-4);
    cfg["residuals"] = json!({ "levels": [{ "nr": 11, "nt": 9 }, { "nr": 21, "nt": 17 }, { "nr": 41, "nt": 33 }] });
    let r = run("residuals", &cfg, &[]);
    assert_eq!(r.code(), 0, "{}", r.stderr());
    let text = fs::read_to_string(r.file("residuals.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), RESIDUAL_COLUMNS.join(","));
    assert_eq!(text.lines().count(), 4);
    let study: ResidualStudy = r.json("residuals.json");
    assert_eq!(study.levels.len(), 3);
    assert_eq!(study.orders.len(), 5);
    assert!(study.orders.iter().all(|o| o.l2.len() == 2 && o.l2.iter().all(|&q| q > 1.0)), "{:?}", study.orders);
}

fn write_profile(dir: &Path, name: &str, f: impl Fn(f64) -> f64) -> PathBuf {
    let path = dir.join(name);
    let mut text = String::from("theta,value\n");
    for k in 0..=40 {
        let t = -0.5 + k as f64 * 0.025;
        text.push_str(&format!("{t:.17e},{:.17e}\n", f(t)));
    }
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn tabulated_profiles_match_the_analytic_bumps() {
    let dir = TempDir::new().unwrap();
    let pi = std::f64::consts::PI;
    write_profile(dir.path(), "v_en.csv", |t| 2.5e-4 * (pi * t / 0.5).sin());
    let mut cfg = base_config();
    cfg["amplitudes"] = json!({ "v_en": 2.5e-4 });
    let analytic = run("solve", &cfg, &[]);
    cfg["amplitudes"] = json!({});
    cfg["profiles"] = json!({ "v_en": "v_en.csv" });
    let tabulated = run_in(dir, "solve", &cfg.to_string(), &[]);
    assert_eq!(tabulated.code(), 0, "{}", tabulated.stderr());
    let (a, b): (Vec<PerturbationRow>, Vec<PerturbationRow>) =
        (analytic.csv("perturbation.csv"), tabulated.csv("perturbation.csv"));
    let scale = a.iter().map(|p| p.v.abs()).fold(0.0, f64::max);
    let diff = a.iter().zip(&b).map(|(p, q)| (p.v - q.v).abs()).fold(0.0, f64::max);
    assert!(diff < 0.02 * scale, "{diff:e} vs {scale:e}");
    assert!(tabulated.dir.path().join("v_en.csv").exists());
}
