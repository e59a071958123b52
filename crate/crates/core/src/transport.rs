//! Transport of entropy and pseudo-Bernoulli perturbations.
//!
//! Both satisfy `(d_r + V#/(hat_r (Ubar + U#)) d_theta) q = 0`, so each node
//! takes the entrance value at the foot of its characteristic.

use crate::background::BackgroundState;
use crate::error::{Error, Result};
use crate::grid::{Field2D, Grid2D};
use crate::par::map_indices;
use crate::profile::Profile;

/// Stagnation guard relative to `min Ubar`.
pub const STAGNATION_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicFoot {
    /// Entrance angle `eta(0; r, theta)`.
    pub theta_foot: f64,
    /// `(s, eta(s))` from `s = r` down to `s = 0`, when requested.
    pub path: Option<Vec<(f64, f64)>>,
}

/// Backward RK4 for `d eta / ds = slope(s, eta)` from `(r, theta)` to
/// `s = 0`, with steps of at most `step`. `eta` is clamped to
/// `[-theta0, theta0]` after every stage.
pub fn trace_characteristic<F>(
    slope: F,
    r: f64,
    theta: f64,
    theta0: f64,
    step: f64,
    record_path: bool,
) -> Result<CharacteristicFoot>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    if !(step > 0.0) || !(r >= 0.0) {
        return Err(Error::InvalidParameter(format!("need r >= 0 and step > 0, got r = {r}, step = {step}")));
    }
    let n = (r / step).ceil() as usize;
    let mut path = record_path.then(|| Vec::with_capacity(n + 1));
    let clamp = |x: f64| x.clamp(-theta0, theta0);
    let mut eta = clamp(theta);
    if let Some(p) = path.as_mut() {
        p.push((r, eta));
    }
    if n == 0 {
        return Ok(CharacteristicFoot { theta_foot: eta, path });
    }
    let h = r / n as f64;
    for k in (0..n).rev() {
        let s = (k + 1) as f64 * h;
        let mid = s - 0.5 * h;
        let k1 = slope(s, eta)?;
        let k2 = slope(mid, clamp(eta - 0.5 * h * k1))?;
        let k3 = slope(mid, clamp(eta - 0.5 * h * k2))?;
        let k4 = slope(k as f64 * h, clamp(eta - h * k3))?;
        eta = clamp(eta - h / 6.0 * (k1 + 2.0 * (k2 + k3) + k4));
        if let Some(p) = path.as_mut() {
            p.push((k as f64 * h, eta));
        }
    }
    Ok(CharacteristicFoot { theta_foot: eta, path })
}

/// Slope `V#/(hat_r (Ubar + U#))` with bilinear interpolation of the
/// perturbation fields.
#[derive(Debug, Clone)]
pub struct FieldSlope<'a> {
    grid: Grid2D,
    u: &'a Field2D,
    v: &'a Field2D,
    bg: &'a BackgroundState,
    /// `Ubar` at `r = k dr / 2`, `k = 0..2 nr - 1`.
    ubar_half: Vec<f64>,
    eps_stag: f64,
}

impl<'a> FieldSlope<'a> {
    pub fn new(grid: &Grid2D, u: &'a Field2D, v: &'a Field2D, bg: &'a BackgroundState) -> Result<Self> {
        u.check_shape(grid)?;
        v.check_shape(grid)?;
        let half = 0.5 * grid.dr();
        let ubar_half = (0..2 * grid.nr - 1)
            .map(|k| bg.sample((k as f64 * half).min(grid.geom.length())).map(|s| s.u))
            .collect::<Result<Vec<_>>>()?;
        let umin = bg.u.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Self { grid: *grid, u, v, bg, ubar_half, eps_stag: STAGNATION_FRACTION * umin })
    }

    fn ubar(&self, s: f64) -> Result<f64> {
        let t = s / (0.5 * self.grid.dr());
        let k = t.round();
        if (t - k).abs() < 1e-9 && (k as usize) < self.ubar_half.len() {
            Ok(self.ubar_half[k as usize])
        } else {
            Ok(self.bg.sample(s)?.u)
        }
    }

    /// Bilinear interpolation of `(U#, V#)` at `(s, eta)`.
    pub fn interpolate(&self, s: f64, eta: f64) -> (f64, f64) {
        let g = &self.grid;
        let x = (s / g.dr()).clamp(0.0, (g.nr - 1) as f64);
        let y = ((eta + g.geom.theta0) / g.dtheta()).clamp(0.0, (g.nt - 1) as f64);
        let i = (x.floor() as usize).min(g.nr - 2);
        let j = (y.floor() as usize).min(g.nt - 2);
        let (a, b) = (x - i as f64, y - j as f64);
        let bil = |f: &Field2D| {
            let f00 = f.at(i, j);
            let f01 = f.at(i, j + 1);
            let f10 = f.at(i + 1, j);
            let f11 = f.at(i + 1, j + 1);
            (1.0 - a) * ((1.0 - b) * f00 + b * f01) + a * ((1.0 - b) * f10 + b * f11)
        };
        (bil(self.u), bil(self.v))
    }

    pub fn slope(&self, s: f64, eta: f64) -> Result<f64> {
        let (du, v) = self.interpolate(s, eta);
        let speed = self.ubar(s)? + du;
        if !(speed.abs() >= self.eps_stag) {
            return Err(Error::Stagnation { r: s, theta: eta, speed });
        }
        Ok(v / ((self.grid.geom.r2 - s) * speed))
    }
}

/// Feet of the characteristics through every grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct FootMap {
    pub feet: Field2D,
}

impl FootMap {
    pub fn compute(grid: &Grid2D, slope: &FieldSlope<'_>) -> Result<Self> {
        let rows = map_indices(grid.nr, |i| -> Result<Vec<f64>> {
            (0..grid.nt)
                .map(|j| {
                    trace_characteristic(
                        |s, e| slope.slope(s, e),
                        grid.r(i),
                        grid.theta(j),
                        grid.geom.theta0,
                        grid.dr(),
                        false,
                    )
                    .map(|f| f.theta_foot)
                })
                .collect()
        });
        let mut data = Vec::with_capacity(grid.len());
        for row in rows {
            data.extend(row?);
        }
        Ok(Self { feet: Field2D { nr: grid.nr, nt: grid.nt, data } })
    }

    /// Vertical characteristics: every foot is the node's own angle.
    pub fn identity(grid: &Grid2D) -> Self {
        Self { feet: Field2D::from_fn(grid, |_, j| grid.theta(j)) }
    }

    /// `profile(foot) - offset` at every node.
    pub fn evaluate(&self, profile: &Profile, offset: f64) -> Field2D {
        self.feet.map(|t| profile.value(t) - offset)
    }
}

/// Transported perturbation `profile(eta(0; r, theta)) - offset`.
pub fn transport_scalar(
    profile: &Profile,
    offset: f64,
    u_sharp: &Field2D,
    v_sharp: &Field2D,
    bg: &BackgroundState,
    grid: &Grid2D,
) -> Result<Field2D> {
    let slope = FieldSlope::new(grid, u_sharp, v_sharp, bg)?;
    Ok(FootMap::compute(grid, &slope)?.evaluate(profile, offset))
}

/// Discrete `U q_r + V q_theta / hat_r` at interior nodes, with the full
/// velocity `(Ubar + U', V')`.
pub fn advection_residual(
    q: &Field2D,
    u_pert: &Field2D,
    v_pert: &Field2D,
    bg: &BackgroundState,
    grid: &Grid2D,
) -> Result<f64> {
    let (dr, dt) = (grid.dr(), grid.dtheta());
    let mut worst: f64 = 0.0;
    for i in 1..grid.nr - 1 {
        let ubar = bg.sample(grid.r(i))?.u;
        for j in 1..grid.nt - 1 {
            let qr = (q.at(i + 1, j) - q.at(i - 1, j)) / (2.0 * dr);
            let qt = (q.at(i, j + 1) - q.at(i, j - 1)) / (2.0 * dt);
            let res = (ubar + u_pert.at(i, j)) * qr + v_pert.at(i, j) * qt / grid.hat_r(i);
            worst = worst.max(res.abs());
        }
    }
    Ok(worst)
}
