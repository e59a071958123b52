//! Nonlinear right-hand sides and the fixed-point map
//! `V# -> [transport -> remainders -> curl correction -> potentials -> V]`.

use serde::{Deserialize, Serialize};

use crate::background::{BackgroundSample, BackgroundState};
use crate::coefficients::{CoefficientTable, LinearCoefficients};
use crate::diagnostics::{nonlinear_residual, ResidualReport, TotalFields};
use crate::elliptic::{recover_velocity, AuxPoissonSolver, EllipticSolveReport, Lift, PotentialSystemSolver};
use crate::error::{Error, Result};
use crate::gas::density_from_bernoulli;
use crate::grid::{diff_line, Field2D, Grid2D};
use crate::par::map_indices;
use crate::profile::{cos2_bump, sine_bump, Profile};
use crate::transport::{FieldSlope, FootMap};

/// Tolerance of the discrete wall-compatibility check.
const COMPATIBILITY_TOL: f64 = 1e-10;

/// Entrance and exit data plus the background charge.
#[derive(Debug, Clone)]
pub struct BoundaryData {
    pub v_en: Profile,
    pub phi_en: Profile,
    pub k_en: Profile,
    pub s_en: Profile,
    pub phi_ex: Profile,
    pub p_ex: Profile,
    pub b: Field2D,
}

impl BoundaryData {
    /// Unperturbed data: the background traces and `b = b0`.
    pub fn background(bg: &BackgroundState, grid: &Grid2D) -> Self {
        make_bump_boundary_data(&BumpAmplitudes::default(), bg, grid)
    }

    /// `V_en(+-theta0) = 0` and zero wall slopes of the other profiles.
    pub fn check_compatibility(&self, grid: &Grid2D) -> Result<()> {
        let t0 = grid.geom.theta0;
        self.b.check_shape(grid)?;
        for t in [-t0, t0] {
            let mut worst = self.v_en.value(t).abs();
            for p in [&self.phi_en, &self.k_en, &self.s_en, &self.phi_ex, &self.p_ex] {
                worst = worst.max(p.derivative(t).abs());
            }
            if worst > COMPATIBILITY_TOL {
                return Err(Error::InvalidParameter(format!(
                    "boundary data violate the wall compatibility conditions at theta = {t} (defect {worst:e})"
                )));
            }
        }
        Ok(())
    }
}

/// Amplitudes of the smooth test perturbations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BumpAmplitudes {
    pub v_en: f64,
    pub phi_en: f64,
    pub k_en: f64,
    pub s_en: f64,
    pub phi_ex: f64,
    pub p_ex: f64,
    pub b: f64,
}

impl BumpAmplitudes {
    /// Every amplitude equal to `a`.
    pub fn uniform(a: f64) -> Self {
        Self { v_en: a, phi_en: a, k_en: a, s_en: a, phi_ex: a, p_ex: a, b: a }
    }

    pub fn scaled(&self, f: f64) -> Self {
        Self {
            v_en: f * self.v_en,
            phi_en: f * self.phi_en,
            k_en: f * self.k_en,
            s_en: f * self.s_en,
            phi_ex: f * self.phi_ex,
            p_ex: f * self.p_ex,
            b: f * self.b,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.v_en, self.phi_en, self.k_en, self.s_en, self.phi_ex, self.p_ex, self.b].iter().all(|v| v.is_finite())
    }
}

/// Background traces plus `cos^2` bumps (a sine for `V_en`), and
/// `b = b0 + a_b sin(pi r / R) cos^2(pi theta / (2 theta0))`. All data are
/// even in `theta` except the odd `V_en`.
pub fn make_bump_boundary_data(amp: &BumpAmplitudes, bg: &BackgroundState, grid: &Grid2D) -> BoundaryData {
    let t0 = grid.geom.theta0;
    let last = bg.nr() - 1;
    let big_r = grid.geom.length();
    let b0 = bg.gas.b0;
    BoundaryData {
        v_en: sine_bump(amp.v_en, t0),
        phi_en: cos2_bump(bg.phi[0], amp.phi_en, t0),
        k_en: cos2_bump(bg.k0, amp.k_en, t0),
        s_en: cos2_bump(bg.s0, amp.s_en, t0),
        phi_ex: cos2_bump(bg.phi[last], amp.phi_ex, t0),
        p_ex: cos2_bump(bg.p[last], amp.p_ex, t0),
        b: Field2D::from_fn(grid, |i, j| {
            let c = (std::f64::consts::PI * grid.theta(j) / (2.0 * t0)).cos();
            b0 + amp.b * (std::f64::consts::PI * grid.r(i) / big_r).sin() * c * c
        }),
    }
}

/// Sup norms of values, first and second difference quotients of the six
/// profile deviations on the grid angles, plus `sup |b - b0|`.
pub fn compute_sigma(bd: &BoundaryData, bg: &BackgroundState, grid: &Grid2D) -> f64 {
    let last = bg.nr() - 1;
    let th = grid.thetas();
    let h = grid.dtheta();
    let deviation = |p: &Profile, trace: f64| -> f64 {
        let d: Vec<f64> = th.iter().map(|&t| p.value(t) - trace).collect();
        let sup = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0f64, |m, v| m.max(v.abs()));
        sup(&mut d.iter().copied())
            + sup(&mut d.windows(2).map(|w| (w[1] - w[0]) / h))
            + sup(&mut d.windows(3).map(|w| (w[2] - 2.0 * w[1] + w[0]) / (h * h)))
    };
    deviation(&bd.v_en, 0.0)
        + deviation(&bd.phi_en, bg.phi[0])
        + deviation(&bd.k_en, bg.k0)
        + deviation(&bd.s_en, bg.s0)
        + deviation(&bd.phi_ex, bg.phi[last])
        + deviation(&bd.p_ex, bg.p[last])
        + bd.b.data.iter().fold(0.0f64, |m, v| m.max((v - bg.gas.b0).abs()))
}

/// `V = (U', V', Phi', S', K')`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationState {
    pub u: Field2D,
    pub v: Field2D,
    pub phi: Field2D,
    pub s: Field2D,
    pub k: Field2D,
}

impl PerturbationState {
    pub fn zeros(grid: &Grid2D) -> Self {
        let z = Field2D::zeros(grid);
        Self { u: z.clone(), v: z.clone(), phi: z.clone(), s: z.clone(), k: z }
    }

    pub fn components(&self) -> [&Field2D; 5] {
        [&self.u, &self.v, &self.phi, &self.s, &self.k]
    }

    /// Sum of the discrete `C^1` norms of the five components.
    pub fn norm(&self, grid: &Grid2D) -> f64 {
        self.components().iter().map(|f| f.c1_norm(grid)).sum()
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64 + Copy) -> Self {
        Self {
            u: self.u.zip_map(&other.u, f),
            v: self.v.zip_map(&other.v, f),
            phi: self.phi.zip_map(&other.phi, f),
            s: self.s.zip_map(&other.s, f),
            k: self.k.zip_map(&other.k, f),
        }
    }

    /// Background plus perturbation, with the density from the Bernoulli law.
    pub fn total_fields(&self, bd: &BoundaryData, bg: &BackgroundState, grid: &Grid2D) -> Result<TotalFields> {
        TotalFields::from_perturbation(self, &bd.b, bg, grid)
    }
}

/// Nonlinear remainders on the grid and the exit/entrance lift profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct Remainders {
    pub f1: Field2D,
    pub f2: Field2D,
    pub f3: Field2D,
    pub f4: Field2D,
    /// Exit normal velocity perturbation at the grid angles.
    pub h: Vec<f64>,
    /// `int_{-theta0}^{theta} r2 V_en`.
    pub g: Vec<f64>,
}

/// Transported perturbations and their angular derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Transported {
    pub s: Field2D,
    pub k: Field2D,
    pub s_theta: Field2D,
    pub k_theta: Field2D,
}

/// Background and coefficients at the grid radii.
#[derive(Debug, Clone)]
struct Rows {
    bg: Vec<BackgroundSample>,
    coef: Vec<LinearCoefficients>,
}

/// `int_{-theta0}^{theta_j} r2 V_en`, Simpson on each cell with the
/// midpoint value taken from the profile.
fn entrance_lift(v_en: &Profile, grid: &Grid2D) -> Vec<f64> {
    let r2 = grid.geom.r2;
    let h = grid.dtheta();
    let mut g = vec![0.0; grid.nt];
    for j in 1..grid.nt {
        let (a, b) = (grid.theta(j - 1), grid.theta(j));
        let cell = h / 6.0 * (v_en.value(a) + 4.0 * v_en.value(0.5 * (a + b)) + v_en.value(b));
        g[j] = g[j - 1] + r2 * cell;
    }
    g
}

/// The fixed-point map for given data, with both elliptic operators
/// factorized once.
pub struct IterationMap<'a> {
    bg: &'a BackgroundState,
    bd: &'a BoundaryData,
    grid: Grid2D,
    rows: Rows,
    aux: AuxPoissonSolver,
    potential: PotentialSystemSolver,
    g: Vec<f64>,
    /// `r2 V_en` at the grid angles.
    g_prime: Vec<f64>,
    phi_star: Field2D,
    /// `d_r(hat_r Phi*_r) + Phi*_thetatheta / hat_r`.
    phi_star_lap: Field2D,
}

impl std::fmt::Debug for IterationMap<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IterationMap").field("grid", &self.grid).finish_non_exhaustive()
    }
}

/// Diagnostics of one application of the map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapReport {
    pub aux: EllipticSolveReport,
    pub potential: EllipticSolveReport,
    /// Largest nonlinear remainder in the max norm.
    pub remainder: f64,
}

impl<'a> IterationMap<'a> {
    pub fn new(bg: &'a BackgroundState, bd: &'a BoundaryData, grid: &Grid2D) -> Result<Self> {
        bd.check_compatibility(grid)?;
        let coeffs = CoefficientTable::new(bg, grid.nr)?;
        let rows = Rows {
            bg: (0..grid.nr).map(|i| bg.sample(grid.r(i))).collect::<Result<_>>()?,
            coef: coeffs.nodes.clone(),
        };
        let potential = PotentialSystemSolver::with_coefficients(grid, coeffs)?;
        let aux = AuxPoissonSolver::new(grid)?;
        let big_r = grid.geom.length();
        let (phi0, phi_r) = (bg.phi[0], bg.phi[bg.nr() - 1]);
        let en: Vec<_> = grid.thetas().iter().map(|&t| bd.phi_en.jet(t)).collect();
        let ex: Vec<_> = grid.thetas().iter().map(|&t| bd.phi_ex.jet(t)).collect();
        let phi_star = Field2D::from_fn(grid, |i, j| {
            let x = grid.r(i) / big_r;
            (1.0 - x) * (en[j][0] - phi0) + x * (ex[j][0] - phi_r)
        });
        let phi_star_lap = Field2D::from_fn(grid, |i, j| {
            let x = grid.r(i) / big_r;
            let slope = ((ex[j][0] - phi_r) - (en[j][0] - phi0)) / big_r;
            -slope + ((1.0 - x) * en[j][2] + x * ex[j][2]) / grid.hat_r(i)
        });
        Ok(Self {
            bg,
            bd,
            grid: *grid,
            rows,
            aux,
            potential,
            g: entrance_lift(&bd.v_en, grid),
            g_prime: grid.thetas().iter().map(|&t| grid.geom.r2 * bd.v_en.value(t)).collect(),
            phi_star,
            phi_star_lap,
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// Entropy and pseudo-Bernoulli perturbations carried along the
    /// characteristics of `(U#, V#)`.
    pub fn transport(&self, sharp: &PerturbationState) -> Result<Transported> {
        let slope = FieldSlope::new(&self.grid, &sharp.u, &sharp.v, self.bg)?;
        let feet = FootMap::compute(&self.grid, &slope)?;
        let foot_t = feet.feet.d_dtheta(self.grid.dtheta());
        // chain rule, so that the cancellation in `profile - offset` is
        // never differenced
        let slope_of = |p: &Profile| feet.feet.zip_map(&foot_t, |t, dt| p.derivative(t) * dt);
        Ok(Transported {
            s: feet.evaluate(&self.bd.s_en, self.bg.s0),
            k: feet.evaluate(&self.bd.k_en, self.bg.k0),
            s_theta: slope_of(&self.bd.s_en),
            k_theta: slope_of(&self.bd.k_en),
        })
    }

    /// Nonlinear remainders at `V#` with the transported `(S', K')`.
    pub fn assemble_rhs(&self, sharp: &PerturbationState, tr: &Transported) -> Result<Remainders> {
        let g = &self.grid;
        let (nr, nt) = (g.nr, g.nt);
        let gamma = self.bg.gas.gamma;
        let (s0, k0, b0) = (self.bg.s0, self.bg.k0, self.bg.gas.b0);
        let (s, k) = (&tr.s, &tr.k);
        for f in [s, k, &tr.s_theta, &tr.k_theta] {
            f.check_shape(g)?;
        }
        let (s_t, k_t) = (&tr.s_theta, &tr.k_theta);
        let rows = map_indices(nr, |i| -> Result<[Vec<f64>; 4]> {
            let b = &self.rows.bg[i];
            let c = &self.rows.coef[i];
            let hr = c.hat_r;
            let hbar = density_from_bernoulli(s0, k0, b.u, 0.0, b.phi, gamma)?;
            let mut out = [vec![0.0; nt], vec![0.0; nt], vec![0.0; nt], vec![0.0; nt]];
            for j in 0..nt {
                let (du, v, dphi) = (sharp.u.at(i, j), sharp.v.at(i, j), sharp.phi.at(i, j));
                let u = b.u + du;
                let stot = s0 + s.at(i, j);
                let h = density_from_bernoulli(stot, k0 + k.at(i, j), u, v, b.phi + dphi, gamma)?;
                out[0][j] = -(hr * h * u - hr * hbar * b.u) + c.cap_a11 * du + c.b1 * dphi;
                out[1][j] = hbar * v - h * v;
                out[2][j] = hr * (h - hbar - (self.bd.b.at(i, j) - b0)) + c.c1 * du + c.c2 * dphi;
                let temp = stot.exp() * h.powf(gamma - 1.0) / (gamma - 1.0);
                out[3][j] = (temp * s_t.at(i, j) - k_t.at(i, j)) / u;
            }
            Ok(out)
        });
        let mut f = [Vec::with_capacity(g.len()), Vec::with_capacity(g.len()), Vec::with_capacity(g.len()), Vec::with_capacity(g.len())];
        for row in rows {
            let row = row?;
            for (dst, src) in f.iter_mut().zip(row) {
                dst.extend(src);
            }
        }
        let [f1, f2, f3, f4] = f.map(|data| Field2D { nr, nt, data });
        Ok(Remainders { f1, f2, f3, f4, h: self.exit_velocity(sharp, s, k)?, g: self.g.clone() })
    }

    /// `U'` on the exit implied by the Bernoulli law and the exit data.
    fn exit_velocity(&self, sharp: &PerturbationState, s: &Field2D, k: &Field2D) -> Result<Vec<f64>> {
        let g = &self.grid;
        let last = g.nr - 1;
        let b = &self.rows.bg[last];
        let gamma = self.bg.gas.gamma;
        let c = gamma / (gamma - 1.0);
        let e = 1.0 - 1.0 / gamma;
        let reference = b.phi - c * (self.bg.s0 / gamma).exp() * b.p.powf(e);
        (0..g.nt)
            .map(|j| {
                let t = g.theta(j);
                let p_ex = self.bd.p_ex.value(t);
                if !(p_ex > 0.0) {
                    return Err(Error::InvalidParameter(format!("exit pressure must be positive, got {p_ex}")));
                }
                let stot = self.bg.s0 + s.at(last, j);
                let data = self.bd.phi_ex.value(t) - c * (stot / gamma).exp() * p_ex.powf(e);
                let (du, v) = (sharp.u.at(last, j), sharp.v.at(last, j));
                Ok((k.at(last, j) + data - reference) / b.u - (du * du + v * v) / (2.0 * b.u))
            })
            .collect()
    }

    /// Curl-corrected, homogenized data `(F1, F2, F3)` from the remainders
    /// and the auxiliary potential.
    pub fn homogenize(&self, rem: &Remainders, aux_phi: &Field2D) -> (Field2D, Field2D, Field2D) {
        let g = &self.grid;
        let phi_r = aux_phi.d_dr(g.dr());
        let phi_t = aux_phi.d_dtheta(g.dtheta());
        let mut h_prime = vec![0.0; g.nt];
        diff_line(&rem.h, g.dtheta(), &mut h_prime);
        let c = &self.rows.coef;
        let ps = &self.phi_star;
        let f1 = Field2D::from_fn(g, |i, j| {
            rem.f1.at(i, j) + c[i].cap_a11 * phi_t.at(i, j) - c[i].a11 * rem.h[j] - c[i].b1 * ps.at(i, j)
        });
        let f2 = Field2D::from_fn(g, |i, j| {
            rem.f2.at(i, j) - c[i].cap_a22 * phi_r.at(i, j) - c[i].a22 * (g.r(i) * h_prime[j] + self.g_prime[j])
        });
        let f3 = Field2D::from_fn(g, |i, j| {
            rem.f3.at(i, j) + c[i].c1 * phi_t.at(i, j)
                - self.phi_star_lap.at(i, j)
                - c[i].c1 * rem.h[j]
                - c[i].c2 * ps.at(i, j)
        });
        (f1, f2, f3)
    }

    /// One application of the map.
    pub fn apply(&self, sharp: &PerturbationState) -> Result<(PerturbationState, MapReport)> {
        let tr = self.transport(sharp)?;
        let rem = self.assemble_rhs(sharp, &tr)?;
        let (aux_phi, aux) = self.aux.solve(&rem.f4)?;
        let (f1, f2, f3) = self.homogenize(&rem, &aux_phi);
        let (varphi, psi, potential) = self.potential.solve(&f1, &f2, &f3)?;
        let lift = Lift { h: rem.h.clone(), g: rem.g.clone(), phi_star: self.phi_star.clone() };
        let (u, v, phi) = recover_velocity(&varphi, &psi, &aux_phi, &lift, &self.grid)?;
        let remainder = [&rem.f1, &rem.f2, &rem.f3, &rem.f4].iter().map(|f| f.max_abs()).fold(0.0, f64::max);
        Ok((PerturbationState { u, v, phi, s: tr.s, k: tr.k }, MapReport { aux, potential, remainder }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedPointConfig {
    /// Calibration constant in `delta = 2 C sigma_p`.
    pub c_cal: f64,
    /// Increment tolerance relative to `max(sigma_p, eps)`.
    pub tol: f64,
    pub max_iter: usize,
    /// `V <- (1 - w) V + w T(V)`; 1 is the plain map.
    pub relaxation: f64,
    /// Largest admissible `sigma_p`.
    pub sigma_cap: f64,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self { c_cal: 10.0, tol: 1e-8, max_iter: 50, relaxation: 1.0, sigma_cap: 1.0 }
    }
}

impl FixedPointConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_cal > 0.0 && self.tol > 0.0 && self.max_iter > 0 && self.sigma_cap > 0.0) {
            return Err(Error::InvalidParameter("fixed-point settings must be positive".into()));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::InvalidParameter(format!("relaxation must lie in (0, 1], got {}", self.relaxation)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// `C^1` norms of `V^{k+1} - V^k`.
    pub increments: Vec<f64>,
    /// Successive increment ratios.
    pub ratios: Vec<f64>,
    /// `C^1` norms of the iterates.
    pub norms: Vec<f64>,
    pub sigma_p: f64,
    pub delta: f64,
    pub tolerance: f64,
    pub converged: bool,
    /// Largest remainder at the last iterate.
    pub remainder: f64,
    pub linear_residual: f64,
    pub residuals: Option<ResidualReport>,
}

impl SolveReport {
    /// Last ratio computed from increments above `floor`.
    pub fn terminal_ratio(&self, floor: f64) -> Option<f64> {
        self.increments.windows(2).filter(|w| w[1] > floor).map(|w| w[1] / w[0]).last()
    }

    pub fn final_norm(&self) -> f64 {
        self.norms.last().copied().unwrap_or(0.0)
    }
}

/// Consecutive non-contracting steps tolerated before giving up.
const MAX_EXPANSIONS: usize = 3;

/// `V^0 = 0`, `V^{k+1} = T(V^k)` until the increment drops below
/// `tol max(sigma_p, eps)`.
pub fn fixed_point_solve(
    bd: &BoundaryData,
    bg: &BackgroundState,
    grid: &Grid2D,
    config: &FixedPointConfig,
) -> Result<(PerturbationState, SolveReport)> {
    config.validate()?;
    let sigma_p = compute_sigma(bd, bg, grid);
    if sigma_p > config.sigma_cap {
        return Err(Error::InvalidParameter(format!("sigma_p = {sigma_p} exceeds the cap {}", config.sigma_cap)));
    }
    let map = IterationMap::new(bg, bd, grid)?;
    let delta = 2.0 * config.c_cal * sigma_p;
    let tolerance = config.tol * sigma_p.max(f64::EPSILON);
    let mut report = SolveReport {
        iterations: 0,
        increments: Vec::new(),
        ratios: Vec::new(),
        norms: Vec::new(),
        sigma_p,
        delta,
        tolerance,
        converged: false,
        remainder: 0.0,
        linear_residual: 0.0,
        residuals: None,
    };
    let mut state = PerturbationState::zeros(grid);
    let mut expansions = 0;
    for it in 1..=config.max_iter {
        let (mapped, mrep) = map.apply(&state)?;
        let w = config.relaxation;
        let next = if w == 1.0 { mapped } else { state.zip_map(&mapped, |a, b| (1.0 - w) * a + w * b) };
        let inc = next.zip_map(&state, |a, b| a - b).norm(grid);
        let norm = next.norm(grid);
        report.iterations = it;
        report.remainder = mrep.remainder;
        report.linear_residual = mrep.aux.residual.max(mrep.potential.residual);
        if let Some(&prev) = report.increments.last() {
            let ratio = if prev > 0.0 { inc / prev } else { 0.0 };
            report.ratios.push(ratio);
            expansions = if ratio >= 1.0 && inc > tolerance { expansions + 1 } else { 0 };
        }
        report.increments.push(inc);
        report.norms.push(norm);
        log::debug!("iteration {it}: |dV| = {inc:.3e}, |V| = {norm:.3e}");
        if norm > delta {
            return Err(Error::Divergence {
                iteration: it,
                reason: format!("iterate left the ball: |V| = {norm:e} > delta = {delta:e}"),
            });
        }
        if expansions >= MAX_EXPANSIONS {
            return Err(Error::Divergence {
                iteration: it,
                reason: format!("{MAX_EXPANSIONS} consecutive increment ratios >= 1"),
            });
        }
        state = next;
        if inc <= tolerance {
            report.converged = true;
            break;
        }
    }
    if !report.converged {
        log::warn!("fixed point not converged after {} iterations", report.iterations);
    }
    report.residuals = Some(nonlinear_residual(&state.total_fields(bd, bg, grid)?, bg, grid)?);
    Ok((state, report))
}
