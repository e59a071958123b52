//! Plot-ready CSV (long format, 17 significant digits, LF line endings)
//! and JSON export.

use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::background::{BackgroundState, ThresholdFailure};
use crate::diagnostics::{SweepTable, TotalFields};
use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::iteration::PerturbationState;

/// `x` with 17 significant digits, enough for an exact round trip.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Csv(e.to_string())
}

/// Writes a header and rows of floats.
pub fn write_table<W: Write>(w: W, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut out = writer(w);
    out.write_record(header).map_err(csv_err)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::ShapeMismatch(format!("row has {} fields, header {}", row.len(), header.len())));
        }
        out.write_record(row.iter().map(|&x| fmt17(x))).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Rows of a headed CSV deserialized by column name.
pub fn read_rows<T: DeserializeOwned, R: Read>(r: R) -> Result<Vec<T>> {
    csv::Reader::from_reader(r).deserialize().collect::<std::result::Result<Vec<T>, _>>().map_err(csv_err)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundRow {
    pub r: f64,
    pub msq: f64,
    pub e: f64,
    pub rho: f64,
    pub u: f64,
    pub p: f64,
    pub phi: f64,
}

pub fn write_background_csv<W: Write>(bg: &BackgroundState, w: W) -> Result<()> {
    write_table(
        w,
        &["r", "msq", "e", "rho", "u", "p", "phi"],
        (0..bg.nr()).map(|i| vec![bg.r[i], bg.msq[i], bg.e[i], bg.rho[i], bg.u[i], bg.p[i], bg.phi[i]]),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
pub struct FieldRow {
    #[serde(rename = "r")]
    pub r: f64,
    #[serde(rename = "theta")]
    pub theta: f64,
    #[serde(rename = "rho")]
    pub rho: f64,
    pub u: f64,
    pub v: f64,
    pub p: f64,
    pub phi: f64,
    pub s: f64,
    pub k: f64,
    pub mach: f64,
}

/// Columns `r, theta, rho, U, V, P, Phi, S, K, Mach`, one row per node.
pub fn write_fields_csv<W: Write>(f: &TotalFields, grid: &Grid2D, gamma: f64, w: W) -> Result<()> {
    let rows = (0..grid.nr).flat_map(|i| (0..grid.nt).map(move |j| (i, j))).map(|(i, j)| {
        let (rho, u, v, s) = (f.rho.at(i, j), f.u.at(i, j), f.v.at(i, j), f.s.at(i, j));
        let csq = crate::gas::sound_speed_sq(s, rho, gamma);
        vec![
            grid.r(i),
            grid.theta(j),
            rho,
            u,
            v,
            f.p.at(i, j),
            f.phi.at(i, j),
            s,
            f.k.at(i, j),
            ((u * u + v * v) / csq).sqrt(),
        ]
    });
    write_table(w, &["r", "theta", "rho", "U", "V", "P", "Phi", "S", "K", "Mach"], rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRow {
    pub r: f64,
    pub theta: f64,
    #[serde(rename = "U")]
    pub u: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "Phi")]
    pub phi: f64,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "K")]
    pub k: f64,
}

/// Columns `r, theta, U, V, Phi, S, K` of the perturbation.
pub fn write_perturbation_csv<W: Write>(v: &PerturbationState, grid: &Grid2D, w: W) -> Result<()> {
    let rows = (0..grid.nr).flat_map(|i| (0..grid.nt).map(move |j| (i, j))).map(|(i, j)| {
        vec![grid.r(i), grid.theta(j), v.u.at(i, j), v.v.at(i, j), v.phi.at(i, j), v.s.at(i, j), v.k.at(i, j)]
    });
    write_table(w, &["r", "theta", "U", "V", "Phi", "S", "K"], rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCsvRow {
    pub amplitude: f64,
    pub sigma_p: f64,
    pub norm: f64,
    pub ratio: Option<f64>,
    pub iterations: usize,
    pub contraction: Option<f64>,
    pub error: Option<String>,
}

pub fn write_sweep_csv<W: Write>(t: &SweepTable, w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["amplitude", "sigma_p", "norm", "ratio", "iterations", "contraction", "error"]).map_err(csv_err)?;
    let opt = |x: Option<f64>| x.map(fmt17).unwrap_or_default();
    for r in &t.rows {
        out.write_record([
            fmt17(r.amplitude),
            fmt17(r.sigma_p),
            fmt17(r.norm),
            opt(r.ratio),
            r.iterations.to_string(),
            opt(r.contraction),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// One lattice point of a threshold sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub gamma: f64,
    pub r1: f64,
    pub r2: f64,
    pub e_star: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub failure: Option<ThresholdFailure>,
    pub evaluations: usize,
    pub lemma_condition: bool,
    pub error: Option<String>,
}

pub fn write_threshold_csv<W: Write>(rows: &[ThresholdRow], w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["gamma", "r1", "r2", "e_star", "lo", "hi", "failure", "evaluations", "lemma_condition", "error"])
        .map_err(csv_err)?;
    let opt = |x: Option<f64>| x.map(fmt17).unwrap_or_default();
    for r in rows {
        out.write_record([
            fmt17(r.gamma),
            fmt17(r.r1),
            fmt17(r.r2),
            opt(r.e_star),
            opt(r.lo),
            opt(r.hi),
            r.failure.map(|f| format!("{f:?}")).unwrap_or_default(),
            r.evaluations.to_string(),
            r.lemma_condition.to_string(),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize, W: Write>(value: &T, mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}
