//! Uniform polar grid on `[0, R] x [-theta0, theta0]` and node-based fields.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gas::NozzleGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub nr: usize,
    pub nt: usize,
    pub geom: NozzleGeometry,
}

impl Grid2D {
    /// At least four nodes per direction are needed by the boundary
    /// difference stencils.
    pub fn new(nr: usize, nt: usize, geom: NozzleGeometry) -> Result<Self> {
        if nr < 4 || nt < 4 {
            return Err(Error::InvalidParameter(format!("grid needs at least 4x4 nodes, got {nr}x{nt}")));
        }
        geom.validate()?;
        Ok(Self { nr, nt, geom })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nr * self.nt
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn dr(&self) -> f64 {
        self.geom.length() / (self.nr - 1) as f64
    }

    #[inline]
    pub fn dtheta(&self) -> f64 {
        2.0 * self.geom.theta0 / (self.nt - 1) as f64
    }

    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        if i + 1 == self.nr {
            self.geom.length()
        } else {
            i as f64 * self.dr()
        }
    }

    /// Symmetric about zero: `theta(nt - 1 - j) == -theta(j)` exactly.
    #[inline]
    pub fn theta(&self, j: usize) -> f64 {
        let half = (self.nt - 1) as f64 / 2.0;
        (j as f64 - half) * self.dtheta()
    }

    #[inline]
    pub fn hat_r(&self, i: usize) -> f64 {
        self.geom.r2 - self.r(i)
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.nt + j
    }

    pub fn thetas(&self) -> Vec<f64> {
        (0..self.nt).map(|j| self.theta(j)).collect()
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.nr).map(|i| self.r(i)).collect()
    }

    /// `(nr - 1) * 2^-k + 1` nodes, if that division is exact.
    pub fn coarsened(&self, k: u32) -> Option<Self> {
        let f = 1usize << k;
        if (self.nr - 1) % f != 0 || (self.nt - 1) % f != 0 {
            return None;
        }
        Self::new((self.nr - 1) / f + 1, (self.nt - 1) / f + 1, self.geom).ok()
    }

    pub fn refined(&self) -> Self {
        Self { nr: 2 * self.nr - 1, nt: 2 * self.nt - 1, geom: self.geom }
    }
}

/// Values at grid nodes, row-major in `r` (index `i * nt + j`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field2D {
    pub nr: usize,
    pub nt: usize,
    pub data: Vec<f64>,
}

impl Field2D {
    pub fn zeros(grid: &Grid2D) -> Self {
        Self { nr: grid.nr, nt: grid.nt, data: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: &Grid2D, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for i in 0..grid.nr {
            for j in 0..grid.nt {
                data.push(f(i, j));
            }
        }
        Self { nr: grid.nr, nt: grid.nt, data }
    }

    pub fn try_from_fn(grid: &Grid2D, mut f: impl FnMut(usize, usize) -> Result<f64>) -> Result<Self> {
        let mut data = Vec::with_capacity(grid.len());
        for i in 0..grid.nr {
            for j in 0..grid.nt {
                data.push(f(i, j)?);
            }
        }
        Ok(Self { nr: grid.nr, nt: grid.nt, data })
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.nt + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.nt + j] = v;
    }

    pub fn check_shape(&self, grid: &Grid2D) -> Result<()> {
        if self.nr != grid.nr || self.nt != grid.nt || self.data.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "field is {}x{}, grid is {}x{}",
                self.nr, self.nt, grid.nr, grid.nt
            )));
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { nr: self.nr, nt: self.nt, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.data.len(), other.data.len());
        Self {
            nr: self.nr,
            nt: self.nt,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    /// `v[k]` for `k = 0..n`, stride `stride`, starting at `start`.
    fn line(&self, start: usize, stride: usize, n: usize) -> impl Iterator<Item = f64> + '_ {
        (0..n).map(move |k| self.data[start + k * stride])
    }

    /// Second-order `d/dr`; see [`diff_line`] for the boundary rows.
    pub fn d_dr(&self, dr: f64) -> Self {
        let mut out = Self { nr: self.nr, nt: self.nt, data: vec![0.0; self.data.len()] };
        let mut buf = vec![0.0; self.nr];
        let mut line = Vec::with_capacity(self.nr);
        for j in 0..self.nt {
            line.clear();
            line.extend(self.line(j, self.nt, self.nr));
            diff_line(&line, dr, &mut buf);
            for (i, v) in buf.iter().enumerate() {
                out.data[i * self.nt + j] = *v;
            }
        }
        out
    }

    pub fn d_dtheta(&self, dtheta: f64) -> Self {
        let mut out = Self { nr: self.nr, nt: self.nt, data: vec![0.0; self.data.len()] };
        for i in 0..self.nr {
            let row = &self.data[i * self.nt..(i + 1) * self.nt];
            diff_line(row, dtheta, &mut out.data[i * self.nt..(i + 1) * self.nt]);
        }
        out
    }

    /// Discrete `C^1` surrogate `max|u| + max|D_r u| + max|D_theta u|`.
    pub fn c1_norm(&self, grid: &Grid2D) -> f64 {
        self.max_abs() + self.d_dr(grid.dr()).max_abs() + self.d_dtheta(grid.dtheta()).max_abs()
    }

    /// `(nr - 1) / 2^k + 1`-point restriction by injection.
    pub fn restrict(&self, k: u32) -> Option<Self> {
        let f = 1usize << k;
        if (self.nr - 1) % f != 0 || (self.nt - 1) % f != 0 {
            return None;
        }
        let (nr, nt) = ((self.nr - 1) / f + 1, (self.nt - 1) / f + 1);
        let mut data = Vec::with_capacity(nr * nt);
        for i in 0..nr {
            for j in 0..nt {
                data.push(self.at(i * f, j * f));
            }
        }
        Some(Self { nr, nt, data })
    }
}

/// Central differences inside; at the ends, the central formula with a
/// cubically extrapolated ghost value, `(-4u0 + 7u1 - 4u2 + u3) / (2h)`.
/// Its leading error term matches the interior one, so quantities built
/// from these derivatives stay smooth up to the boundary.
pub fn diff_line(u: &[f64], h: f64, out: &mut [f64]) {
    let n = u.len();
    debug_assert!(n >= 4 && out.len() == n);
    let inv = 0.5 / h;
    for k in 1..n - 1 {
        out[k] = (u[k + 1] - u[k - 1]) * inv;
    }
    // written in differences so that constants differentiate to exactly zero
    out[0] = (4.0 * (u[1] - u[0]) + 3.0 * (u[1] - u[2]) - (u[2] - u[3])) * inv;
    out[n - 1] = (4.0 * (u[n - 1] - u[n - 2]) + 3.0 * (u[n - 3] - u[n - 2]) - (u[n - 4] - u[n - 3])) * inv;
}

/// Composite Simpson weights on `n` uniform points. For even `n` the last
/// interval uses the three-point quadratic rule.
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; n];
    if n == 1 {
        return w;
    }
    if n == 2 {
        w[0] = 0.5 * h;
        w[1] = 0.5 * h;
        return w;
    }
    let m = if n % 2 == 1 { n } else { n - 1 };
    for k in 0..m {
        w[k] += h / 3.0
            * if k == 0 || k == m - 1 {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
    }
    if m < n {
        w[n - 3] += -h / 12.0;
        w[n - 2] += 8.0 * h / 12.0;
        w[n - 1] += 5.0 * h / 12.0;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(nr: usize, nt: usize) -> Grid2D {
        Grid2D::new(nr, nt, NozzleGeometry::new(1.0, 2.0, 0.5).unwrap()).unwrap()
    }

    #[test]
    fn nodes_cover_the_domain() {
        let g = grid(11, 9);
        assert_eq!(g.r(0), 0.0);
        assert_eq!(g.r(10), 1.0);
        assert_eq!(g.theta(0), -0.5);
        assert_eq!(g.theta(8), 0.5);
        for j in 0..9 {
            assert_eq!(g.theta(8 - j), -g.theta(j));
        }
        assert_eq!(g.hat_r(0), 2.0);
        assert!(Grid2D::new(3, 9, g.geom).is_err());
    }

    #[test]
    fn differences_are_exact_for_cubics() {
        let g = grid(9, 7);
        let f = Field2D::from_fn(&g, |i, j| {
            let (r, t) = (g.r(i), g.theta(j));
            r * r * r - 2.0 * r * t + t * t * t
        });
        let dr = f.d_dr(g.dr());
        let dt = f.d_dtheta(g.dtheta());
        for i in 0..g.nr {
            for j in 0..g.nt {
                let (r, t) = (g.r(i), g.theta(j));
                // central differences carry h^2 u'''/6 for cubics
                let er = 3.0 * r * r - 2.0 * t + g.dr() * g.dr();
                let et = -2.0 * r + 3.0 * t * t + g.dtheta() * g.dtheta();
                assert_relative_eq!(dr.at(i, j), er, epsilon = 1e-12);
                assert_relative_eq!(dt.at(i, j), et, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn boundary_difference_is_second_order() {
        let err = |n: usize| {
            let h = 1.0 / (n - 1) as f64;
            let u: Vec<f64> = (0..n).map(|k| (k as f64 * h).exp()).collect();
            let mut d = vec![0.0; n];
            diff_line(&u, h, &mut d);
            (d[0] - 1.0).abs().max((d[n - 1] - 1f64.exp()).abs())
        };
        let order = (err(21) / err(41)).log2();
        assert!((1.8..2.2).contains(&order), "order {order}");
    }

    #[test]
    fn simpson_weights_integrate_cubics() {
        for n in [5usize, 6, 9, 10] {
            let h = 1.0 / (n - 1) as f64;
            let w = simpson_weights(n, h);
            let s: f64 = (0..n).map(|k| w[k] * (k as f64 * h).powi(2)).sum();
            assert_relative_eq!(s, 1.0 / 3.0, epsilon = 1e-14);
        }
        let w = simpson_weights(7, 0.1);
        let s: f64 = (0..7).map(|k| w[k] * (k as f64 * 0.1).powi(3)).sum();
        assert_relative_eq!(s, 0.6f64.powi(4) / 4.0, epsilon = 1e-14);
    }

    #[test]
    fn restriction_picks_coarse_nodes() {
        let g = grid(9, 9);
        let f = Field2D::from_fn(&g, |i, j| (10 * i + j) as f64);
        let c = f.restrict(1).unwrap();
        assert_eq!((c.nr, c.nt), (5, 5));
        assert_eq!(c.at(2, 1), 42.0);
        assert!(f.restrict(4).is_none());
        assert_eq!(g.coarsened(1).unwrap().nr, 5);
    }
}
