//! JSON run configuration.

use std::fs;
use std::path::{Path, PathBuf};

use epnozzle::io::read_rows;
use epnozzle::profile::CubicSpline;
use epnozzle::{
    make_bump_boundary_data, BackgroundState, BoundaryData, BumpAmplitudes, Error, FixedPointConfig, GasParams,
    Grid2D, InletState, NozzleGeometry, Profile, Result,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSize {
    pub nr: usize,
    pub nt: usize,
}

impl Default for GridSize {
    fn default() -> Self {
        Self { nr: 51, nt: 41 }
    }
}

impl GridSize {
    /// Parses `NRxNT`.
    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected NRxNT, got '{s}'"))?;
        let nr = a.trim().parse().map_err(|_| format!("bad radial size '{a}'"))?;
        let nt = b.trim().parse().map_err(|_| format!("bad angular size '{b}'"))?;
        Ok(Self { nr, nt })
    }

    pub fn grid(&self, geom: NozzleGeometry) -> Result<Grid2D> {
        Grid2D::new(self.nr, self.nt, geom)
    }

    /// The same sector with every cell halved.
    pub fn refined(&self) -> Self {
        Self { nr: 2 * self.nr - 1, nt: 2 * self.nt - 1 }
    }
}

/// Tabulated total boundary profiles, each a CSV with columns `theta,value`.
/// Paths are relative to the configuration file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileFiles {
    pub v_en: Option<PathBuf>,
    pub phi_en: Option<PathBuf>,
    pub k_en: Option<PathBuf>,
    pub s_en: Option<PathBuf>,
    pub phi_ex: Option<PathBuf>,
    pub p_ex: Option<PathBuf>,
}

impl ProfileFiles {
    fn entries_mut(&mut self) -> [&mut Option<PathBuf>; 6] {
        [&mut self.v_en, &mut self.phi_en, &mut self.k_en, &mut self.s_en, &mut self.phi_ex, &mut self.p_ex]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdConfig {
    pub gammas: Vec<f64>,
    /// Values of `r2 / r1`; `r1` is taken from the geometry block.
    pub ratios: Vec<f64>,
    pub bracket: (f64, f64),
    pub tol: f64,
    pub nodes: usize,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self { gammas: Vec::new(), ratios: Vec::new(), bracket: (-3.0, 0.5), tol: 1e-6, nodes: 1001 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub amplitudes: Vec<f64>,
    /// Shape of the data; amplitude `a` uses `base * a`.
    pub base: BumpAmplitudes,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { amplitudes: vec![0.0, 2.5e-4, 5e-4, 1e-3], base: BumpAmplitudes::uniform(1.0) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResidualConfig {
    pub levels: Vec<GridSize>,
}

impl Default for ResidualConfig {
    fn default() -> Self {
        let g = GridSize::default();
        Self { levels: vec![g, g.refined(), g.refined().refined()] }
    }
}

fn default_background_nodes() -> usize {
    2001
}

fn default_trials() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub gas: GasParams,
    pub geometry: NozzleGeometry,
    pub inlet: InletState,
    #[serde(default = "default_background_nodes")]
    pub background_nodes: usize,
    #[serde(default)]
    pub grid: GridSize,
    #[serde(default)]
    pub amplitudes: BumpAmplitudes,
    #[serde(default)]
    pub profiles: ProfileFiles,
    #[serde(default)]
    pub iteration: FixedPointConfig,
    #[serde(default)]
    pub threshold: ThresholdConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub residuals: ResidualConfig,
    #[serde(default = "default_trials")]
    pub coercivity_trials: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

impl RunConfig {
    /// Reads, resolves profile paths against the file's directory and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in cfg.profiles.entries_mut().into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.gas.validate()?;
        self.geometry.validate()?;
        self.inlet.validate(&self.gas)?;
        if self.background_nodes < 3 {
            return Err(invalid(format!("background_nodes must be at least 3, got {}", self.background_nodes)));
        }
        for g in std::iter::once(&self.grid).chain(&self.residuals.levels) {
            g.grid(self.geometry)?;
        }
        if !self.amplitudes.is_finite() || !self.sweep.base.is_finite() {
            return Err(invalid("amplitudes must be finite"));
        }
        self.iteration.validate()?;
        for (name, p) in [
            ("v_en", &self.profiles.v_en),
            ("phi_en", &self.profiles.phi_en),
            ("k_en", &self.profiles.k_en),
            ("s_en", &self.profiles.s_en),
            ("phi_ex", &self.profiles.phi_ex),
            ("p_ex", &self.profiles.p_ex),
        ] {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(invalid(format!("profile file for {name} not found: {}", p.display())));
                }
            }
        }
        Ok(())
    }

    /// Bump data from `amplitudes`, with any tabulated profiles substituted.
    pub fn boundary_data(&self, bg: &BackgroundState, grid: &Grid2D) -> Result<BoundaryData> {
        let mut bd = make_bump_boundary_data(&self.amplitudes, bg, grid);
        let p = &self.profiles;
        if let Some(f) = &p.v_en {
            bd.v_en = read_profile(f, true)?;
        }
        for (path, slot) in [
            (&p.phi_en, &mut bd.phi_en),
            (&p.k_en, &mut bd.k_en),
            (&p.s_en, &mut bd.s_en),
            (&p.phi_ex, &mut bd.phi_ex),
            (&p.p_ex, &mut bd.p_ex),
        ] {
            if let Some(f) = path {
                *slot = read_profile(f, false)?;
            }
        }
        Ok(bd)
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
struct ProfileRow {
    theta: f64,
    value: f64,
}

/// Spline through a `theta,value` table. Profiles that must vanish at the
/// walls get one-sided end slopes; the others get zero end slopes.
pub fn read_profile(path: &Path, free_slopes: bool) -> Result<Profile> {
    let rows: Vec<ProfileRow> = read_rows(fs::File::open(path)?)?;
    let (x, y): (Vec<f64>, Vec<f64>) = rows.iter().map(|r| (r.theta, r.value)).unzip();
    if !free_slopes {
        return Profile::from_samples(x, y);
    }
    let n = x.len();
    if n < 3 {
        return Err(invalid(format!("{}: need at least three samples", path.display())));
    }
    let slope = |a: usize, b: usize| (y[b] - y[a]) / (x[b] - x[a]);
    let (left, right) = (slope(0, 1), slope(n - 2, n - 1));
    Ok(Profile::Spline(CubicSpline::clamped(x, y, left, right)?))
}
