//! Elliptic solves: the auxiliary curl-correction problem and the coupled
//! `(varphi, Psi)` system, both discretized through their weak forms on
//! node-centred control volumes (half cells along the boundary).
//!
//! Face coefficients live at `r_{i+1/2}`; the Dirichlet unknowns are
//! eliminated symmetrically (identity row, zeroed column), which is exact
//! because all essential data are homogeneous.

use std::io::Write;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::background::BackgroundState;
use crate::coefficients::CoefficientTable;
use crate::error::{Error, Result};
use crate::grid::{Field2D, Grid2D};

/// Relative residual demanded of every linear solve.
pub const LINEAR_TOLERANCE: f64 = 1e-11;
const MAX_REFINEMENT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticSolveReport {
    /// Always a direct factorization; `refinement_steps` counts the extra
    /// residual corrections.
    pub factorized: bool,
    pub refinement_steps: usize,
    /// `||b - A x|| / ||b||` in the max norm (0 for a zero right-hand side).
    pub residual: f64,
    /// Largest defect of the boundary conditions, with Neumann conditions
    /// measured by one-sided differences.
    pub bc_defect: f64,
}

/// Assembled sparse matrix with its LU factors.
pub struct SparseSystem {
    n: usize,
    /// Merged entries sorted by `(row, col)`.
    entries: Vec<(usize, usize, f64)>,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

impl std::fmt::Debug for SparseSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseSystem").field("n", &self.n).field("nnz", &self.entries.len()).finish()
    }
}

impl SparseSystem {
    /// Sums duplicate entries, drops exact zeros and factorizes.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            if r >= n || c >= n || !v.is_finite() {
                return Err(Error::SingularSystem(format!("bad entry ({r}, {c}) = {v} for size {n}")));
            }
            match entries.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => entries.push((r, c, v)),
            }
        }
        entries.retain(|e| e.2 != 0.0);
        let trip: Vec<Triplet<usize, usize, f64>> = entries.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
            .map_err(|e| Error::SingularSystem(format!("{e:?}")))?;
        let lu = mat.sp_lu().map_err(|e| Error::SingularSystem(format!("{e:?}")))?;
        Ok(Self { n, entries, lu })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        y
    }

    /// Direct solve plus iterative refinement with residuals accumulated
    /// in double-double arithmetic. Refinement continues while it still
    /// changes the solution, and must reach a relative residual of at most
    /// [`LINEAR_TOLERANCE`].
    pub fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, usize, f64)> {
        if b.len() != self.n {
            return Err(Error::ShapeMismatch(format!("rhs has {} entries, system {}", b.len(), self.n)));
        }
        let bnorm = max_norm(b);
        if bnorm == 0.0 {
            return Ok((vec![0.0; self.n], 0, 0.0));
        }
        let mut x = self.apply_inverse(b);
        let mut steps = 0;
        loop {
            let r = self.residual(b, &x);
            let rel = max_norm(&r) / bnorm;
            if !rel.is_finite() {
                return Err(Error::SingularSystem("non-finite solution".into()));
            }
            if steps == MAX_REFINEMENT {
                return if rel <= LINEAR_TOLERANCE {
                    Ok((x, steps, rel))
                } else {
                    Err(Error::NonConvergedLinearSolve { residual: rel, tolerance: LINEAR_TOLERANCE })
                };
            }
            let dx = self.apply_inverse(&r);
            let settled = max_norm(&dx) <= f64::EPSILON * max_norm(&x);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
            steps += 1;
            if settled && rel <= LINEAR_TOLERANCE {
                let rel = max_norm(&self.residual(b, &x)) / bnorm;
                return Ok((x, steps, rel));
            }
        }
    }

    /// `b - A x`, each row summed with error-free transformations.
    fn residual(&self, b: &[f64], x: &[f64]) -> Vec<f64> {
        let mut out = b.to_vec();
        let mut k = 0;
        while k < self.entries.len() {
            let row = self.entries[k].0;
            let (mut s, mut c) = (b[row], 0.0);
            while k < self.entries.len() && self.entries[k].0 == row {
                let (_, col, a) = self.entries[k];
                let p = a * x[col];
                let e = a.mul_add(x[col], -p);
                let t = s - p;
                let z = t - s;
                c += (s - (t - z)) + (-p - z) - e;
                s = t;
                k += 1;
            }
            out[row] = s + c;
        }
        out
    }

    fn apply_inverse(&self, b: &[f64]) -> Vec<f64> {
        let mut rhs = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_in_place(rhs.as_mut());
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }

    /// `row col value` lines, zero-based.
    pub fn write_coo(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "% {} {} {}", self.n, self.n, self.entries.len())?;
        for &(r, c, v) in &self.entries {
            writeln!(w, "{r} {c} {v:.17e}")?;
        }
        Ok(())
    }
}

/// Trapezoid-type weights: 1/2 at the two end nodes, 1 inside.
fn end_weight(k: usize, n: usize) -> f64 {
    if k == 0 || k + 1 == n {
        0.5
    } else {
        1.0
    }
}

/// Adds the symmetric stiffness `k (u_q - u_p)(v_q - v_p)` restricted to the
/// free rows and columns.
fn stiffness(t: &mut Vec<(usize, usize, f64)>, free: &impl Fn(usize) -> bool, p: usize, q: usize, k: f64) {
    for (a, b) in [(p, q), (q, p)] {
        if free(a) {
            t.push((a, a, k));
            if free(b) {
                t.push((a, b, -k));
            }
        }
    }
}

/// `d_r(hat_r phi_r) + phi_thetatheta = f4` with `phi_r = 0` at the
/// entrance and `phi = 0` on the exit and both walls.
pub struct AuxPoissonSolver {
    grid: Grid2D,
    system: SparseSystem,
}

impl std::fmt::Debug for AuxPoissonSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AuxPoissonSolver").field("grid", &self.grid).field("system", &self.system).finish()
    }
}

impl AuxPoissonSolver {
    pub fn new(grid: &Grid2D) -> Result<Self> {
        let (nr, nt) = (grid.nr, grid.nt);
        let (dr, dt) = (grid.dr(), grid.dtheta());
        let dirichlet = |i: usize, j: usize| i + 1 == nr || j == 0 || j + 1 == nt;
        let free = |k: usize| !dirichlet(k / nt, k % nt);
        let mut t = Vec::with_capacity(10 * grid.len());
        for i in 0..nr {
            for j in 0..nt {
                let p = grid.idx(i, j);
                if dirichlet(i, j) {
                    t.push((p, p, 1.0));
                }
                if i + 1 < nr {
                    let hat_r = grid.geom.r2 - (i as f64 + 0.5) * dr;
                    stiffness(&mut t, &free, p, grid.idx(i + 1, j), hat_r * end_weight(j, nt) * dt / dr);
                }
                if j + 1 < nt {
                    stiffness(&mut t, &free, p, grid.idx(i, j + 1), end_weight(i, nr) * dr / dt);
                }
            }
        }
        Ok(Self { grid: *grid, system: SparseSystem::from_triplets(grid.len(), t)? })
    }

    pub fn system(&self) -> &SparseSystem {
        &self.system
    }

    pub fn solve(&self, f4: &Field2D) -> Result<(Field2D, EllipticSolveReport)> {
        let g = &self.grid;
        f4.check_shape(g)?;
        let (nr, nt) = (g.nr, g.nt);
        let (dr, dt) = (g.dr(), g.dtheta());
        let mut b = vec![0.0; g.len()];
        for i in 0..nr - 1 {
            for j in 1..nt - 1 {
                b[g.idx(i, j)] = -f4.at(i, j) * end_weight(i, nr) * dr * end_weight(j, nt) * dt;
            }
        }
        let (x, steps, residual) = self.system.solve(&b)?;
        let phi = Field2D { nr, nt, data: x };
        let mut bc: f64 = 0.0;
        let d = phi.d_dr(dr);
        for j in 0..nt {
            bc = bc.max(phi.at(nr - 1, j).abs()).max(d.at(0, j).abs());
        }
        for i in 0..nr {
            bc = bc.max(phi.at(i, 0).abs()).max(phi.at(i, nt - 1).abs());
        }
        Ok((phi, EllipticSolveReport { factorized: true, refinement_steps: steps, residual, bc_defect: bc }))
    }
}

/// Coupled system for `(varphi, Psi)`:
///
/// ```text
/// d_r(a11 varphi_r) + d_theta(a22 varphi_theta) + d_r(b1 Psi) = d_r F1 + d_theta F2
/// d_r(hat_r Psi_r) + Psi_thetatheta / hat_r + c1 varphi_r + c2 Psi = F3
/// ```
///
/// with `varphi = Psi = 0` at the entrance, `varphi_r = 0 = Psi` at the exit
/// and homogeneous Neumann conditions on the walls. Unknowns are interleaved,
/// `2 (i nt + j) + {0: varphi, 1: Psi}`.
pub struct PotentialSystemSolver {
    grid: Grid2D,
    coeffs: CoefficientTable,
    system: SparseSystem,
}

impl std::fmt::Debug for PotentialSystemSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PotentialSystemSolver").field("grid", &self.grid).field("system", &self.system).finish()
    }
}

#[inline]
fn dof(grid: &Grid2D, i: usize, j: usize, c: usize) -> usize {
    2 * grid.idx(i, j) + c
}

fn potential_dirichlet(grid: &Grid2D, k: usize) -> bool {
    let (node, c) = (k / 2, k % 2);
    let i = node / grid.nt;
    i == 0 || (c == 1 && i + 1 == grid.nr)
}

/// Entries of the discrete bilinear form on all unknowns (no boundary
/// treatment), as `(test, trial, value)`.
fn potential_form(grid: &Grid2D, coeffs: &CoefficientTable) -> Vec<(usize, usize, f64)> {
    let (nr, nt) = (grid.nr, grid.nt);
    let (dr, dt) = (grid.dr(), grid.dtheta());
    let mut t = Vec::with_capacity(30 * grid.len());
    let all = |_: usize| true;
    for i in 0..nr {
        let cn = &coeffs.nodes[i];
        for j in 0..nt {
            let (wr, wt) = (end_weight(i, nr), end_weight(j, nt));
            let (pf, ps) = (dof(grid, i, j, 0), dof(grid, i, j, 1));
            t.push((ps, ps, -cn.c2 * wr * wt * dr * dt));
            if i + 1 < nr {
                let cf = &coeffs.faces[i];
                let (qf, qs) = (dof(grid, i + 1, j, 0), dof(grid, i + 1, j, 1));
                stiffness(&mut t, &all, pf, qf, cf.a11 * wt * dt / dr);
                stiffness(&mut t, &all, ps, qs, cf.hat_r * wt * dt / dr);
                // b1 Psi_face xi_r: rows xi_p (-), xi_q (+), columns Psi_p, Psi_q
                let kb = 0.5 * cf.b1 * wt * dt;
                for col in [ps, qs] {
                    t.push((pf, col, -kb));
                    t.push((qf, col, kb));
                }
                // -c1 varphi_r omega_face: rows omega_p, omega_q
                let kc = 0.5 * cf.c1 * wt * dt;
                for row in [ps, qs] {
                    t.push((row, qf, -kc));
                    t.push((row, pf, kc));
                }
            }
            if j + 1 < nt {
                let (qf, qs) = (dof(grid, i, j + 1, 0), dof(grid, i, j + 1, 1));
                stiffness(&mut t, &all, pf, qf, cn.a22 * wr * dr / dt);
                stiffness(&mut t, &all, ps, qs, wr * dr / (dt * cn.hat_r));
            }
        }
    }
    t
}

impl PotentialSystemSolver {
    pub fn new(bg: &BackgroundState, grid: &Grid2D) -> Result<Self> {
        let coeffs = CoefficientTable::new(bg, grid.nr)?;
        Self::with_coefficients(grid, coeffs)
    }

    pub fn with_coefficients(grid: &Grid2D, coeffs: CoefficientTable) -> Result<Self> {
        if coeffs.nodes.len() != grid.nr || coeffs.faces.len() + 1 != grid.nr {
            return Err(Error::ShapeMismatch("coefficient table does not match the grid".into()));
        }
        let n = 2 * grid.len();
        let mut t: Vec<(usize, usize, f64)> = potential_form(grid, &coeffs)
            .into_iter()
            .filter(|&(r, c, _)| !potential_dirichlet(grid, r) && !potential_dirichlet(grid, c))
            .collect();
        t.extend((0..n).filter(|&k| potential_dirichlet(grid, k)).map(|k| (k, k, 1.0)));
        Ok(Self { grid: *grid, coeffs, system: SparseSystem::from_triplets(n, t)? })
    }

    pub fn coefficients(&self) -> &CoefficientTable {
        &self.coeffs
    }

    pub fn system(&self) -> &SparseSystem {
        &self.system
    }

    /// Discrete right-hand side `<(F1, F2, F3), (xi, omega)>`.
    pub fn load_vector(&self, f1: &Field2D, f2: &Field2D, f3: &Field2D) -> Result<Vec<f64>> {
        let g = &self.grid;
        for f in [f1, f2, f3] {
            f.check_shape(g)?;
        }
        let (nr, nt) = (g.nr, g.nt);
        let (dr, dt) = (g.dr(), g.dtheta());
        let mut b = vec![0.0; 2 * g.len()];
        for i in 0..nr {
            for j in 0..nt {
                let (wr, wt) = (end_weight(i, nr), end_weight(j, nt));
                let (p, ps) = (dof(g, i, j, 0), dof(g, i, j, 1));
                b[ps] -= f3.at(i, j) * wr * wt * dr * dt;
                if i + 1 < nr {
                    let face = 0.5 * (f1.at(i, j) + f1.at(i + 1, j)) * wt * dt;
                    b[p] -= face;
                    b[dof(g, i + 1, j, 0)] += face;
                }
                if j + 1 < nt {
                    let face = 0.5 * (f2.at(i, j) + f2.at(i, j + 1)) * wr * dr;
                    b[p] -= face;
                    b[dof(g, i, j + 1, 0)] += face;
                }
            }
        }
        for j in 0..nt {
            b[dof(g, nr - 1, j, 0)] -= f1.at(nr - 1, j) * end_weight(j, nt) * dt;
        }
        for i in 0..nr {
            let wr = end_weight(i, nr) * dr;
            b[dof(g, i, nt - 1, 0)] -= f2.at(i, nt - 1) * wr;
            b[dof(g, i, 0, 0)] += f2.at(i, 0) * wr;
        }
        for (k, v) in b.iter_mut().enumerate() {
            if potential_dirichlet(g, k) {
                *v = 0.0;
            }
        }
        Ok(b)
    }

    pub fn solve(&self, f1: &Field2D, f2: &Field2D, f3: &Field2D) -> Result<(Field2D, Field2D, EllipticSolveReport)> {
        let b = self.load_vector(f1, f2, f3)?;
        let (x, steps, residual) = self.system.solve(&b)?;
        let g = &self.grid;
        let varphi = Field2D { nr: g.nr, nt: g.nt, data: x.iter().step_by(2).copied().collect() };
        let psi = Field2D { nr: g.nr, nt: g.nt, data: x.iter().skip(1).step_by(2).copied().collect() };
        let mut bc: f64 = 0.0;
        let dphi_r = varphi.d_dr(g.dr());
        let dphi_t = varphi.d_dtheta(g.dtheta());
        let dpsi_t = psi.d_dtheta(g.dtheta());
        for j in 0..g.nt {
            bc = bc.max(varphi.at(0, j).abs()).max(psi.at(0, j).abs());
            bc = bc.max(psi.at(g.nr - 1, j).abs()).max(dphi_r.at(g.nr - 1, j).abs());
        }
        for i in 0..g.nr {
            for j in [0, g.nt - 1] {
                bc = bc.max(dphi_t.at(i, j).abs()).max(dpsi_t.at(i, j).abs());
            }
        }
        Ok((varphi, psi, EllipticSolveReport { factorized: true, refinement_steps: steps, residual, bc_defect: bc }))
    }

    /// Bilinear form `L[(u), (v)]` on interleaved vectors.
    pub fn bilinear_form(&self, trial: &[f64], test: &[f64]) -> f64 {
        let mut s = 0.0;
        for (r, c, v) in potential_form(&self.grid, &self.coeffs) {
            s += test[r] * v * trial[c];
        }
        s
    }
}

/// Minimum Rayleigh quotient `L[v, v] / |v|^2` of the weak form over
/// `trials` random vectors vanishing on the essential boundary.
pub fn coercivity_check(bg: &BackgroundState, grid: &Grid2D, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::InvalidParameter("coercivity check needs at least one trial".into()));
    }
    let coeffs = CoefficientTable::new(bg, grid.nr)?;
    let form = potential_form(grid, &coeffs);
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let n = 2 * grid.len();
    let mut worst = f64::INFINITY;
    for _ in 0..trials {
        let v: Vec<f64> =
            (0..n).map(|k| if potential_dirichlet(grid, k) { 0.0 } else { rng.random_range(-1.0..1.0) }).collect();
        let norm: f64 = v.iter().map(|x| x * x).sum();
        if norm == 0.0 {
            continue;
        }
        let q: f64 = form.iter().map(|&(r, c, a)| v[r] * a * v[c]).sum();
        worst = worst.min(q / norm);
    }
    Ok(worst)
}

/// Boundary lift of the potential problem: `psi = varphi + r h + g` and
/// `Phi' = Psi + Phi*`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lift {
    /// Exit normal velocity `h(theta)`.
    pub h: Vec<f64>,
    /// `g(theta) = int r2 V_en`.
    pub g: Vec<f64>,
    pub phi_star: Field2D,
}

/// Velocity and potential perturbations from the potentials:
/// `U' = psi_r - phi_theta`, `V' = psi_theta / hat_r + phi_r`,
/// `Phi' = Psi + Phi*`. `V'` is set to zero on the walls.
pub fn recover_velocity(
    varphi: &Field2D,
    psi_pot: &Field2D,
    phi: &Field2D,
    lift: &Lift,
    grid: &Grid2D,
) -> Result<(Field2D, Field2D, Field2D)> {
    for f in [varphi, psi_pot, phi, &lift.phi_star] {
        f.check_shape(grid)?;
    }
    if lift.h.len() != grid.nt || lift.g.len() != grid.nt {
        return Err(Error::ShapeMismatch("lift profiles must have nt samples".into()));
    }
    let psi = Field2D::from_fn(grid, |i, j| varphi.at(i, j) + grid.r(i) * lift.h[j] + lift.g[j]);
    let (dr, dt) = (grid.dr(), grid.dtheta());
    let psi_r = psi.d_dr(dr);
    let psi_t = psi.d_dtheta(dt);
    let phi_r = phi.d_dr(dr);
    let phi_t = phi.d_dtheta(dt);
    let u = psi_r.sub(&phi_t);
    let mut v = Field2D::from_fn(grid, |i, j| psi_t.at(i, j) / grid.hat_r(i) + phi_r.at(i, j));
    for i in 0..grid.nr {
        v.set(i, 0, 0.0);
        v.set(i, grid.nt - 1, 0.0);
    }
    let check_phi = psi_pot.zip_map(&lift.phi_star, |a, b| a + b);
    Ok((u, v, check_phi))
}
