//! The subcommands. Each writes its outputs into `out` and returns an error
//! whose kind decides the exit code.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use epnozzle::io::{
    write_background_csv, write_fields_csv, write_json, write_perturbation_csv, write_sweep_csv, write_table,
    write_threshold_csv, ThresholdRow,
};
use epnozzle::{
    check_lemma_condition, coercivity_check, conservation_report, find_threshold_e, fixed_point_solve,
    integrate_background, nonlinear_residual, stability_sweep, BackgroundState, Error, GasParams, NozzleGeometry,
    ResidualReport, Result, TotalFields,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{GridSize, RunConfig};

fn create(out: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(out.join(name))?))
}

fn background(cfg: &RunConfig) -> Result<BackgroundState> {
    integrate_background(cfg.gas, cfg.geometry, cfg.inlet, cfg.background_nodes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSummary {
    pub nodes: usize,
    pub j0: f64,
    pub s0: f64,
    pub k0: f64,
    pub mu0: f64,
    pub msq_min: f64,
    pub msq_max: f64,
    pub msq_strictly_decreasing: bool,
    /// Whether `ln(r2 / r1)` satisfies the sufficient existence condition.
    pub lemma_condition: bool,
    pub mass_flux_defect: f64,
    pub bernoulli_defect: f64,
}

pub fn cmd_background(cfg: &RunConfig, out: &Path) -> Result<()> {
    let bg = background(cfg)?;
    let (msq_min, msq_max) = bg.mach_range();
    let summary = BackgroundSummary {
        nodes: bg.nr(),
        j0: bg.j0,
        s0: bg.s0,
        k0: bg.k0,
        mu0: bg.mu0,
        msq_min,
        msq_max,
        msq_strictly_decreasing: bg.is_strictly_decreasing_mach(),
        lemma_condition: check_lemma_condition(&cfg.gas, &cfg.geometry),
        mass_flux_defect: bg.mass_flux_defect(),
        bernoulli_defect: bg.bernoulli_defect(),
    };
    write_background_csv(&bg, create(out, "background.csv")?)?;
    write_json(&summary, create(out, "background.json")?)?;
    log::info!("background: M^2 in [{msq_min:.6}, {msq_max:.6}], lemma condition {}", summary.lemma_condition);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoercivitySummary {
    pub trials: usize,
    pub seed: u64,
    pub min_rayleigh_quotient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub grid: GridSize,
    pub conservation: epnozzle::diagnostics::ConservationReport,
    pub coercivity: Option<CoercivitySummary>,
}

fn not_converged(iterations: usize) -> Error {
    Error::Divergence { iteration: iterations, reason: format!("no convergence within {iterations} iterations") }
}

pub fn cmd_solve(cfg: &RunConfig, out: &Path, seed: u64) -> Result<()> {
    let bg = background(cfg)?;
    let grid = cfg.grid.grid(cfg.geometry)?;
    let bd = cfg.boundary_data(&bg, &grid)?;
    let (pert, report) = fixed_point_solve(&bd, &bg, &grid, &cfg.iteration)?;
    let fields = pert.total_fields(&bd, &bg, &grid)?;
    let coercivity = (cfg.coercivity_trials > 0)
        .then(|| coercivity_check(&bg, &grid, cfg.coercivity_trials, seed))
        .transpose()?
        .map(|q| CoercivitySummary { trials: cfg.coercivity_trials, seed, min_rayleigh_quotient: q });
    let diag =
        SolveDiagnostics { grid: cfg.grid, conservation: conservation_report(&fields, &bd, &bg, &grid)?, coercivity };
    write_fields_csv(&fields, &grid, cfg.gas.gamma, create(out, "fields.csv")?)?;
    write_perturbation_csv(&pert, &grid, create(out, "perturbation.csv")?)?;
    write_json(&report, create(out, "solve_report.json")?)?;
    if let Some(res) = &report.residuals {
        write_json(res, create(out, "residual_report.json")?)?;
    }
    write_json(&diag, create(out, "diagnostics.json")?)?;
    log::info!(
        "solve: {} iterations, sigma_p = {:.3e}, |V| = {:.3e}",
        report.iterations,
        report.sigma_p,
        report.final_norm()
    );
    if report.converged {
        Ok(())
    } else {
        Err(not_converged(report.iterations))
    }
}

pub fn cmd_sweep_threshold(cfg: &RunConfig, out: &Path) -> Result<()> {
    let t = &cfg.threshold;
    if t.gammas.is_empty() || t.ratios.is_empty() {
        return Err(Error::InvalidParameter("threshold lattice is empty: give gammas and ratios".into()));
    }
    let mut lattice = Vec::with_capacity(t.gammas.len() * t.ratios.len());
    for &gamma in &t.gammas {
        for &ratio in &t.ratios {
            let gas = GasParams::new(gamma, cfg.gas.b0)?;
            let geom = NozzleGeometry::new(cfg.geometry.r1, cfg.geometry.r1 * ratio, cfg.geometry.theta0)?;
            cfg.inlet.validate(&gas)?;
            lattice.push((gas, geom));
        }
    }
    let rows: Vec<ThresholdRow> = lattice
        .par_iter()
        .map(|&(gas, geom)| {
            let lemma_condition = check_lemma_condition(&gas, &geom);
            let base = ThresholdRow {
                gamma: gas.gamma,
                r1: geom.r1,
                r2: geom.r2,
                e_star: None,
                lo: None,
                hi: None,
                failure: None,
                evaluations: 0,
                lemma_condition,
                error: None,
            };
            match find_threshold_e(gas, geom, cfg.inlet, t.bracket, t.tol, t.nodes) {
                Ok(r) => ThresholdRow {
                    e_star: Some(r.e_star),
                    lo: Some(r.lo),
                    hi: Some(r.hi),
                    failure: Some(r.failure),
                    evaluations: r.evaluations,
                    ..base
                },
                Err(e) => ThresholdRow { error: Some(e.to_string()), ..base },
            }
        })
        .collect();
    write_threshold_csv(&rows, create(out, "threshold.csv")?)?;
    Ok(())
}

pub fn cmd_sweep_sigma(cfg: &RunConfig, out: &Path) -> Result<()> {
    let mut amps = cfg.sweep.amplitudes.clone();
    if amps.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
        return Err(Error::InvalidParameter(format!("sweep amplitudes must be finite and >= 0, got {amps:?}")));
    }
    if !amps.contains(&0.0) {
        amps.insert(0, 0.0);
    }
    amps.sort_by(f64::total_cmp);
    amps.dedup();
    let bg = background(cfg)?;
    let grid = cfg.grid.grid(cfg.geometry)?;
    let table = stability_sweep(&amps, &cfg.sweep.base, &bg, &grid, &cfg.iteration);
    write_sweep_csv(&table, create(out, "sweep.csv")?)?;
    write_json(&table, create(out, "sweep.json")?)?;
    log::info!("sweep: |V|/sigma_p varies by {:.2}%", 100.0 * table.ratio_variation);
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualLevel {
    pub grid: GridSize,
    pub iterations: usize,
    pub solution: ResidualReport,
    pub background: ResidualReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualOrders {
    pub equation: String,
    /// Observed orders between consecutive levels.
    pub max: Vec<f64>,
    pub l2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualStudy {
    pub levels: Vec<ResidualLevel>,
    pub orders: Vec<ResidualOrders>,
}

pub const RESIDUAL_COLUMNS: [&str; 14] = [
    "nr",
    "nt",
    "dr",
    "dtheta",
    "continuity_max",
    "continuity_l2",
    "poisson_max",
    "poisson_l2",
    "vorticity_max",
    "vorticity_l2",
    "bernoulli_transport_max",
    "bernoulli_transport_l2",
    "entropy_transport_max",
    "entropy_transport_l2",
];

/// Solves on every level and reports residual norms of the converged
/// solution and of the background on the same grid.
pub fn cmd_residuals(cfg: &RunConfig, out: &Path) -> Result<()> {
    let levels = &cfg.residuals.levels;
    if levels.is_empty() {
        return Err(Error::InvalidParameter("residual study needs at least one grid level".into()));
    }
    let bg = background(cfg)?;
    let mut study = Vec::with_capacity(levels.len());
    for &size in levels {
        let grid = size.grid(cfg.geometry)?;
        let bd = cfg.boundary_data(&bg, &grid)?;
        let (_, rep) = fixed_point_solve(&bd, &bg, &grid, &cfg.iteration)?;
        if !rep.converged {
            return Err(not_converged(rep.iterations));
        }
        let solution = rep.residuals.expect("residuals are set on return");
        let background = nonlinear_residual(&TotalFields::background(&bg, &grid)?, &bg, &grid)?;
        log::info!("residuals at {}x{}: {} iterations", size.nr, size.nt, rep.iterations);
        study.push(ResidualLevel { grid: size, iterations: rep.iterations, solution, background });
    }
    let orders = (0..5)
        .map(|k| {
            let norms: Vec<_> = study.iter().map(|l| l.solution.entries()[k].1).collect();
            let order = |f: fn(&epnozzle::diagnostics::Norms) -> f64| {
                norms.windows(2).map(|w| (f(&w[0]) / f(&w[1])).log2()).collect()
            };
            ResidualOrders { equation: study[0].solution.entries()[k].0.to_string(), max: order(|n| n.max), l2: order(|n| n.l2) }
        })
        .collect();
    let rows = study.iter().map(|l| {
        let r = &l.solution;
        let mut row = vec![l.grid.nr as f64, l.grid.nt as f64, r.dr, r.dtheta];
        row.extend(r.entries().iter().flat_map(|(_, n)| [n.max, n.l2]));
        row
    });
    write_table(create(out, "residuals.csv")?, &RESIDUAL_COLUMNS, rows)?;
    write_json(&ResidualStudy { levels: study, orders }, create(out, "residuals.json")?)?;
    Ok(())
}

/// Maps an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::SonicBreakdown { .. }
        | Error::VacuumBreakdown { .. }
        | Error::NonPositiveEnthalpy { .. }
        | Error::SonicDegenerate { .. }
        | Error::SingularSystem(_) => 2,
        Error::Divergence { .. } | Error::Stagnation { .. } | Error::NonConvergedLinearSolve { .. } => 3,
        _ => 1,
    }
}

/// Creates the output directory.
pub fn prepare_output(out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    Ok(())
}

