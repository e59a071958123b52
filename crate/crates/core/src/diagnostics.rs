//! Residuals of the full nonlinear system, conservation checks and the
//! amplitude sweep of the stability estimate.

use serde::{Deserialize, Serialize};

use crate::background::BackgroundState;
use crate::error::{Error, Result};
use crate::gas::{density_from_bernoulli, pressure};
use crate::grid::{simpson_weights, Field2D, Grid2D};
use crate::iteration::{fixed_point_solve, make_bump_boundary_data, BoundaryData, BumpAmplitudes, FixedPointConfig, PerturbationState};
use crate::par::map_indices;
use crate::transport::{trace_characteristic, FieldSlope};

/// Physical fields on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TotalFields {
    pub rho: Field2D,
    pub u: Field2D,
    pub v: Field2D,
    pub p: Field2D,
    pub phi: Field2D,
    pub s: Field2D,
    pub k: Field2D,
    pub b: Field2D,
}

impl TotalFields {
    pub fn from_perturbation(pert: &PerturbationState, b: &Field2D, bg: &BackgroundState, grid: &Grid2D) -> Result<Self> {
        for f in pert.components() {
            f.check_shape(grid)?;
        }
        b.check_shape(grid)?;
        let gamma = bg.gas.gamma;
        let rows = (0..grid.nr).map(|i| bg.sample(grid.r(i))).collect::<Result<Vec<_>>>()?;
        let u = Field2D::from_fn(grid, |i, j| rows[i].u + pert.u.at(i, j));
        let phi = Field2D::from_fn(grid, |i, j| rows[i].phi + pert.phi.at(i, j));
        let s = pert.s.map(|v| bg.s0 + v);
        let k = pert.k.map(|v| bg.k0 + v);
        let rho = Field2D::try_from_fn(grid, |i, j| {
            density_from_bernoulli(s.at(i, j), k.at(i, j), u.at(i, j), pert.v.at(i, j), phi.at(i, j), gamma)
        })?;
        let p = Field2D::from_fn(grid, |i, j| pressure(s.at(i, j), rho.at(i, j), gamma));
        Ok(Self { rho, u, v: pert.v.clone(), p, phi, s, k, b: b.clone() })
    }

    /// The unperturbed flow.
    pub fn background(bg: &BackgroundState, grid: &Grid2D) -> Result<Self> {
        let b = Field2D::from_fn(grid, |_, _| bg.gas.b0);
        Self::from_perturbation(&PerturbationState::zeros(grid), &b, bg, grid)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub max: f64,
    /// `sqrt(sum r^2 dr dtheta)` over interior nodes.
    pub l2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub continuity: Norms,
    pub poisson: Norms,
    pub vorticity: Norms,
    pub bernoulli_transport: Norms,
    pub entropy_transport: Norms,
    pub dr: f64,
    pub dtheta: f64,
}

impl ResidualReport {
    pub fn entries(&self) -> [(&'static str, Norms); 5] {
        [
            ("continuity", self.continuity),
            ("poisson", self.poisson),
            ("vorticity", self.vorticity),
            ("bernoulli_transport", self.bernoulli_transport),
            ("entropy_transport", self.entropy_transport),
        ]
    }
}

/// Central-difference residuals at interior nodes of
///
/// ```text
/// (hat_r rho U)_r + (rho V)_theta = 0
/// (hat_r Phi_r)_r + Phi_thetatheta / hat_r = hat_r (rho - b)
/// (hat_r V)_r - U_theta = (T S_theta - K_theta) / U,  T = e^S rho^(gamma-1) / (gamma-1)
/// U K_r + V K_theta / hat_r = 0
/// U S_r + V S_theta / hat_r = 0
/// ```
pub fn nonlinear_residual(f: &TotalFields, bg: &BackgroundState, grid: &Grid2D) -> Result<ResidualReport> {
    for x in [&f.rho, &f.u, &f.v, &f.p, &f.phi, &f.s, &f.k, &f.b] {
        x.check_shape(grid)?;
    }
    let gamma = bg.gas.gamma;
    let (dr, dt) = (grid.dr(), grid.dtheta());
    let (nr, nt) = (grid.nr, grid.nt);
    let cr = |q: &Field2D, i: usize, j: usize| (q.at(i + 1, j) - q.at(i - 1, j)) / (2.0 * dr);
    let ct = |q: &Field2D, i: usize, j: usize| (q.at(i, j + 1) - q.at(i, j - 1)) / (2.0 * dt);
    let mass_r = Field2D::from_fn(grid, |i, j| grid.hat_r(i) * f.rho.at(i, j) * f.u.at(i, j));
    let mass_t = Field2D::from_fn(grid, |i, j| f.rho.at(i, j) * f.v.at(i, j));
    let swirl = Field2D::from_fn(grid, |i, j| grid.hat_r(i) * f.v.at(i, j));
    let rows = map_indices(nr - 2, |m| {
        let i = m + 1;
        let hr = grid.hat_r(i);
        let (hp, hm) = (grid.geom.r2 - (i as f64 + 0.5) * dr, grid.geom.r2 - (i as f64 - 0.5) * dr);
        let mut out = [0.0; 5].map(|_| Vec::with_capacity(nt - 2));
        for j in 1..nt - 1 {
            let (u, v) = (f.u.at(i, j), f.v.at(i, j));
            out[0].push(cr(&mass_r, i, j) + ct(&mass_t, i, j));
            let ph = |a: usize, b: usize| f.phi.at(a, b);
            let lap = (hp * (ph(i + 1, j) - ph(i, j)) - hm * (ph(i, j) - ph(i - 1, j))) / (dr * dr)
                + (ph(i, j + 1) - 2.0 * ph(i, j) + ph(i, j - 1)) / (dt * dt * hr);
            out[1].push(lap - hr * (f.rho.at(i, j) - f.b.at(i, j)));
            let temp = f.s.at(i, j).exp() * f.rho.at(i, j).powf(gamma - 1.0) / (gamma - 1.0);
            out[2].push(cr(&swirl, i, j) - ct(&f.u, i, j) - (temp * ct(&f.s, i, j) - ct(&f.k, i, j)) / u);
            out[3].push(u * cr(&f.k, i, j) + v * ct(&f.k, i, j) / hr);
            out[4].push(u * cr(&f.s, i, j) + v * ct(&f.s, i, j) / hr);
        }
        out
    });
    let mut norms = [Norms::default(); 5];
    for row in &rows {
        for (n, vals) in norms.iter_mut().zip(row) {
            for &x in vals {
                if !x.is_finite() {
                    return Err(Error::InvalidParameter("non-finite residual".into()));
                }
                n.max = n.max.max(x.abs());
                n.l2 += x * x;
            }
        }
    }
    for n in &mut norms {
        n.l2 = (n.l2 * dr * dt).sqrt();
    }
    let [continuity, poisson, vorticity, bernoulli_transport, entropy_transport] = norms;
    Ok(ResidualReport { continuity, poisson, vorticity, bernoulli_transport, entropy_transport, dr, dtheta: dt })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    /// `max_i |Q(r_i) - Q(0)| / |Q(0)|`, `Q(r) = int hat_r rho U dtheta`.
    pub mass_flux_drift: f64,
    /// Largest change of `S` along traced streamlines.
    pub entropy_drift: f64,
    /// Largest change of `K` along traced streamlines.
    pub bernoulli_drift: f64,
    pub wall_normal_velocity: f64,
    /// One-sided `Phi_theta` on the walls.
    pub wall_potential_slope: f64,
}

/// Mass flux through every cross-section, invariance of `S` and `K` along
/// streamlines traced back to the entrance, and the wall conditions.
pub fn conservation_report(f: &TotalFields, bd: &BoundaryData, bg: &BackgroundState, grid: &Grid2D) -> Result<ConservationReport> {
    let w = simpson_weights(grid.nt, grid.dtheta());
    let flux: Vec<f64> = (0..grid.nr)
        .map(|i| (0..grid.nt).map(|j| w[j] * grid.hat_r(i) * f.rho.at(i, j) * f.u.at(i, j)).sum())
        .collect();
    let mass_flux_drift = flux.iter().map(|q| (q - flux[0]).abs()).fold(0.0, f64::max) / flux[0].abs();

    let ubar: Vec<f64> = (0..grid.nr).map(|i| bg.sample(grid.r(i)).map(|s| s.u)).collect::<Result<_>>()?;
    let du = Field2D::from_fn(grid, |i, j| f.u.at(i, j) - ubar[i]);
    let slope = FieldSlope::new(grid, &du, &f.v, bg)?;
    let drifts = map_indices(grid.nr, |i| -> Result<(f64, f64)> {
        let mut d = (0.0f64, 0.0f64);
        for j in 0..grid.nt {
            let foot = trace_characteristic(|s, e| slope.slope(s, e), grid.r(i), grid.theta(j), grid.geom.theta0, grid.dr(), false)?;
            d.0 = d.0.max((f.s.at(i, j) - bd.s_en.value(foot.theta_foot)).abs());
            d.1 = d.1.max((f.k.at(i, j) - bd.k_en.value(foot.theta_foot)).abs());
        }
        Ok(d)
    });
    let (mut entropy_drift, mut bernoulli_drift) = (0.0f64, 0.0f64);
    for d in drifts {
        let d = d?;
        entropy_drift = entropy_drift.max(d.0);
        bernoulli_drift = bernoulli_drift.max(d.1);
    }

    let phi_t = f.phi.d_dtheta(grid.dtheta());
    let (mut wall_normal_velocity, mut wall_potential_slope) = (0.0f64, 0.0f64);
    for i in 0..grid.nr {
        for j in [0, grid.nt - 1] {
            wall_normal_velocity = wall_normal_velocity.max(f.v.at(i, j).abs());
            wall_potential_slope = wall_potential_slope.max(phi_t.at(i, j).abs());
        }
    }
    Ok(ConservationReport { mass_flux_drift, entropy_drift, bernoulli_drift, wall_normal_velocity, wall_potential_slope })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub amplitude: f64,
    pub sigma_p: f64,
    pub norm: f64,
    /// `|V| / sigma_p`; absent when `sigma_p = 0`.
    pub ratio: Option<f64>,
    pub iterations: usize,
    pub contraction: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// `(max - min) / min` of `|V| / sigma_p` over the successful rows.
    pub ratio_variation: f64,
    /// Whether the variation is at most 25%.
    pub linear_regime: bool,
}

/// Bump data `base * a` for each amplitude, solved independently. Failed
/// rows are recorded and the sweep continues.
pub fn stability_sweep(
    amplitudes: &[f64],
    base: &BumpAmplitudes,
    bg: &BackgroundState,
    grid: &Grid2D,
    config: &FixedPointConfig,
) -> SweepTable {
    let rows = map_indices(amplitudes.len(), |n| {
        let a = amplitudes[n];
        let bd = make_bump_boundary_data(&base.scaled(a), bg, grid);
        match fixed_point_solve(&bd, bg, grid, config) {
            Ok((v, rep)) => {
                let norm = v.norm(grid);
                SweepRow {
                    amplitude: a,
                    sigma_p: rep.sigma_p,
                    norm,
                    ratio: (rep.sigma_p > 0.0).then(|| norm / rep.sigma_p),
                    iterations: rep.iterations,
                    contraction: rep.terminal_ratio(100.0 * rep.tolerance),
                    error: None,
                }
            }
            Err(e) => SweepRow {
                amplitude: a,
                sigma_p: crate::iteration::compute_sigma(&bd, bg, grid),
                norm: f64::NAN,
                ratio: None,
                iterations: 0,
                contraction: None,
                error: Some(e.to_string()),
            },
        }
    });
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    let ratio_variation = if ratios.is_empty() {
        0.0
    } else {
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().copied().fold(0.0, f64::max);
        (hi - lo) / lo
    };
    SweepTable { rows, ratio_variation, linear_regime: ratio_variation <= 0.25 }
}
