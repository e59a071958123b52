//! Coefficients of the linearized continuity and Poisson equations.
//!
//! Continuity is `(hat_r rho U)_r + (rho V)_theta = 0`. Linearizing the
//! Bernoulli density about the background gives
//!
//! ```text
//! d_r(A11 U' + b1 Phi') + d_theta(A22 V') = d_r f1 + d_theta f2
//! d_r(hat_r Phi'_r) + Phi'_thetatheta / hat_r + c1 U' + c2 Phi' = f3
//! ```
//!
//! and after writing `(U', hat_r V') = grad psi` the angular coefficient
//! becomes `a22 = A22 / hat_r`.

use serde::{Deserialize, Serialize};

use crate::background::BackgroundState;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearCoefficients {
    pub hat_r: f64,
    /// `hat_r rho (1 - M^2)`.
    pub cap_a11: f64,
    /// `rho`, multiplying the angular velocity in the continuity flux.
    pub cap_a22: f64,
    pub b1: f64,
    pub c1: f64,
    /// `-hat_r rho / c^2`.
    pub c2: f64,
    pub a11: f64,
    /// `rho / hat_r`, multiplying `psi_theta`.
    pub a22: f64,
}

/// Coefficients at `r`; fails with `OutOfDomain` outside `[0, R]`.
pub fn linear_coefficients(bg: &BackgroundState, r: f64) -> Result<LinearCoefficients> {
    let s = bg.sample(r)?;
    let hr = s.hat_r;
    let msq = s.u * s.u / s.csq;
    let a11 = hr * s.rho * (1.0 - msq);
    let coupling = electric_coupling(hr, s.rho, s.u, s.csq);
    Ok(LinearCoefficients {
        hat_r: hr,
        cap_a11: a11,
        cap_a22: s.rho,
        b1: coupling,
        c1: coupling,
        c2: -hr * s.rho / s.csq,
        a11,
        a22: s.rho / hr,
    })
}

/// `hat_r rho U / c^2`, shared by the potential term of the continuity
/// equation and the velocity term of the Poisson equation.
#[inline]
fn electric_coupling(hat_r: f64, rho: f64, u: f64, csq: f64) -> f64 {
    hat_r * rho * u / csq
}

/// Coefficients at every node and at every midpoint `r_{i+1/2}` of a
/// uniform radial grid with `nr` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    pub nodes: Vec<LinearCoefficients>,
    pub faces: Vec<LinearCoefficients>,
}

impl CoefficientTable {
    pub fn new(bg: &BackgroundState, nr: usize) -> Result<Self> {
        let length = bg.length();
        let h = length / (nr - 1) as f64;
        let nodes = (0..nr)
            .map(|i| linear_coefficients(bg, if i + 1 == nr { length } else { i as f64 * h }))
            .collect::<Result<Vec<_>>>()?;
        let faces = (0..nr - 1)
            .map(|i| linear_coefficients(bg, (i as f64 + 0.5) * h))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { nodes, faces })
    }

    /// Smallest of `a11, a22` over nodes and faces.
    pub fn ellipticity(&self) -> f64 {
        self.nodes.iter().chain(&self.faces).map(|c| c.a11.min(c.a22)).fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::integrate_background;
    use crate::error::Error;
    use crate::gas::{GasParams, InletState, NozzleGeometry};
    use approx::assert_relative_eq;

    fn background() -> BackgroundState {
        integrate_background(
            GasParams::new(2.0, 1.0).unwrap(),
            NozzleGeometry::new(1.0, 2.0, 0.5).unwrap(),
            InletState { rho0: 1.0, u0: 0.5, p0: 1.0, e0: -3.0 },
            101,
        )
        .unwrap()
    }

    #[test]
    fn entrance_values() {
        let bg = background();
        let c = linear_coefficients(&bg, 0.0).unwrap();
        assert_eq!(c.cap_a22, 1.0);
        assert_eq!(c.a22, 0.5);
        // M0^2 = 1/8, c0^2 = 2
        assert_relative_eq!(c.a11, 2.0 * (1.0 - 0.125), epsilon = 1e-14);
        assert_relative_eq!(c.b1, 2.0 * 0.5 / 2.0, epsilon = 1e-14);
        assert_relative_eq!(c.c2, -1.0, epsilon = 1e-14);
    }

    #[test]
    fn coupling_terms_agree_and_operator_is_elliptic() {
        let bg = background();
        let t = CoefficientTable::new(&bg, 57).unwrap();
        for c in t.nodes.iter().chain(&t.faces) {
            assert_eq!(c.b1.to_bits(), c.c1.to_bits());
            assert!(c.a11 > 0.0 && c.a22 > 0.0 && c.c2 < 0.0);
            assert_eq!(c.a11, c.cap_a11);
        }
        assert!(t.ellipticity() > 0.0);
    }

    #[test]
    fn outside_the_nozzle_is_rejected() {
        let bg = background();
        assert!(matches!(linear_coefficients(&bg, 1.01), Err(Error::OutOfDomain { .. })));
        assert!(matches!(linear_coefficients(&bg, -0.01), Err(Error::OutOfDomain { .. })));
    }
}
