//! Problem definition: gas law, nozzle geometry, inlet state and the
//! thermodynamic closures of an ideal polytropic gas.
//!
//! Entropy is always carried as `S = ln(P / rho^gamma)`, so that
//! `P = e^S rho^gamma` and `c^2 = gamma e^S rho^(gamma - 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative size of the vacuum guard in [`density_from_bernoulli`].
pub const VACUUM_GUARD_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasParams {
    /// Adiabatic exponent.
    pub gamma: f64,
    /// Background ion density.
    pub b0: f64,
}

impl GasParams {
    pub fn new(gamma: f64, b0: f64) -> Result<Self> {
        let gas = Self { gamma, b0 };
        gas.validate()?;
        Ok(gas)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 1.0) {
            return Err(Error::InvalidParameter(format!("gamma must exceed 1, got {}", self.gamma)));
        }
        if !(self.b0.is_finite() && self.b0 > 0.0) {
            return Err(Error::InvalidParameter(format!("b0 must be positive, got {}", self.b0)));
        }
        Ok(())
    }
}

/// Annular sector `r1 < r~ < r2`, `|theta| < theta0`. The solver works in the
/// reversed coordinate `r = r2 - r~ in [0, R]`, so the flow enters at `r = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NozzleGeometry {
    pub r1: f64,
    pub r2: f64,
    pub theta0: f64,
}

impl NozzleGeometry {
    pub fn new(r1: f64, r2: f64, theta0: f64) -> Result<Self> {
        let geom = Self { r1, r2, theta0 };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r1.is_finite() && self.r2.is_finite() && 0.0 < self.r1 && self.r1 < self.r2) {
            return Err(Error::InvalidParameter(format!(
                "radii must satisfy 0 < r1 < r2, got r1 = {}, r2 = {}",
                self.r1, self.r2
            )));
        }
        if !(self.theta0 > 0.0 && self.theta0 < std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidParameter(format!(
                "theta0 must lie in (0, pi/2), got {}",
                self.theta0
            )));
        }
        Ok(())
    }

    /// Nozzle length `R = r2 - r1`.
    #[inline]
    pub fn length(&self) -> f64 {
        self.r2 - self.r1
    }

    /// Physical radius `r2 - r` at reversed coordinate `r`.
    #[inline]
    pub fn hat_r(&self, r: f64) -> f64 {
        self.r2 - r
    }
}

/// Entrance state of the radial background flow (speed measured inward).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InletState {
    pub rho0: f64,
    pub u0: f64,
    pub p0: f64,
    /// Entrance electric field `E(0)`; signed.
    pub e0: f64,
}

impl InletState {
    pub fn validate(&self, gas: &GasParams) -> Result<()> {
        for (name, v) in [("rho0", self.rho0), ("U0", self.u0), ("P0", self.p0)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.e0.is_finite() {
            return Err(Error::InvalidParameter(format!("E0 must be finite, got {}", self.e0)));
        }
        let msq = self.mach_sq(gas);
        if msq >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "inlet must be subsonic: M0^2 = rho0 U0^2 / (gamma P0) = {msq} >= 1"
            )));
        }
        Ok(())
    }

    /// `S0 = ln(P0 / rho0^gamma)`.
    pub fn entropy(&self, gas: &GasParams) -> f64 {
        (self.p0 / self.rho0.powf(gas.gamma)).ln()
    }

    pub fn mach_sq(&self, gas: &GasParams) -> f64 {
        self.rho0 * self.u0 * self.u0 / (gas.gamma * self.p0)
    }

    /// Pseudo-Bernoulli constant `K0 = U0^2/2 + gamma e^S0 rho0^(gamma-1) / (gamma-1)`
    /// (the gauge `Phi(0) = 0` is implied).
    pub fn bernoulli(&self, gas: &GasParams) -> f64 {
        let g = gas.gamma;
        0.5 * self.u0 * self.u0 + g * self.entropy(gas).exp() * self.rho0.powf(g - 1.0) / (g - 1.0)
    }

    /// Mass flux `J0 = r2 rho0 U0`.
    pub fn mass_flux(&self, geom: &NozzleGeometry) -> f64 {
        geom.r2 * self.rho0 * self.u0
    }

    /// `mu0 = (J0^2 / (gamma e^S0))^(1/(gamma+1))`, the density scale of the
    /// Mach-number parametrisation.
    pub fn mu0(&self, gas: &GasParams, geom: &NozzleGeometry) -> f64 {
        let j0 = self.mass_flux(geom);
        (j0 * j0 / (gas.gamma * self.entropy(gas).exp())).powf(1.0 / (gas.gamma + 1.0))
    }
}

/// Density from the pseudo-Bernoulli law,
/// `H = ((gamma-1)/(gamma e^S) (K + Phi - (U^2+V^2)/2))^(1/(gamma-1))`.
///
/// Fails with [`Error::NonPositiveEnthalpy`] when the enthalpy argument
/// `K + Phi - (U^2+V^2)/2` is not above `1e-12 |K|`.
#[inline]
pub fn density_from_bernoulli(s: f64, k: f64, u: f64, v: f64, phi: f64, gamma: f64) -> Result<f64> {
    let argument = k + phi - 0.5 * (u * u + v * v);
    if !(argument > VACUUM_GUARD_REL * k.abs()) {
        return Err(Error::NonPositiveEnthalpy { argument });
    }
    Ok(((gamma - 1.0) / (gamma * s.exp()) * argument).powf(1.0 / (gamma - 1.0)))
}

#[inline]
pub fn sound_speed_sq(s: f64, rho: f64, gamma: f64) -> f64 {
    gamma * s.exp() * rho.powf(gamma - 1.0)
}

#[inline]
pub fn pressure(s: f64, rho: f64, gamma: f64) -> f64 {
    s.exp() * rho.powf(gamma)
}

/// Pointwise thermodynamic state reconstructed from the transported
/// quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermoSample {
    pub s: f64,
    pub k: f64,
    pub u: f64,
    pub v: f64,
    pub phi: f64,
    pub rho: f64,
    pub p: f64,
    pub csq: f64,
}

impl ThermoSample {
    pub fn from_transported(s: f64, k: f64, u: f64, v: f64, phi: f64, gamma: f64) -> Result<Self> {
        let rho = density_from_bernoulli(s, k, u, v, phi, gamma)?;
        Ok(Self {
            s,
            k,
            u,
            v,
            phi,
            rho,
            p: pressure(s, rho, gamma),
            csq: sound_speed_sq(s, rho, gamma),
        })
    }

    pub fn mach_sq(&self) -> f64 {
        (self.u * self.u + self.v * self.v) / self.csq
    }

    pub fn is_subsonic(&self) -> bool {
        self.mach_sq() < 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn bernoulli_density_reference_values() {
        assert_eq!(density_from_bernoulli(0.0, 2.0, 0.0, 0.0, 0.0, 2.0).unwrap(), 1.0);
        assert_eq!(density_from_bernoulli(0.0, 1.0, 1.0, 1.0, 1.0, 2.0).unwrap(), 0.5);
    }

    #[test]
    fn vacuum_guard_rejects_non_positive_argument() {
        let err = density_from_bernoulli(0.0, 1.0, 2.0, 0.0, 0.0, 2.0).unwrap_err();
        assert!(matches!(err, Error::NonPositiveEnthalpy { argument } if argument == -1.0));
        // exactly zero enthalpy is a vacuum
        assert!(density_from_bernoulli(0.0, 0.5, 1.0, 0.0, 0.0, 1.4).is_err());
    }

    #[test]
    fn sound_speed_reference_values() {
        assert_eq!(sound_speed_sq(0.0, 1.0, 2.0), 2.0);
        assert_relative_eq!(sound_speed_sq(0.0, 1.0, 1.4), 1.4);
    }

    #[test]
    fn inlet_derived_quantities() {
        let gas = GasParams::new(2.0, 1.0).unwrap();
        let geom = NozzleGeometry::new(1.0, 2.0, 0.5).unwrap();
        let inlet = InletState { rho0: 1.0, u0: 0.5, p0: 1.0, e0: -1.0 };
        inlet.validate(&gas).unwrap();
        assert_eq!(inlet.entropy(&gas), 0.0);
        assert_eq!(inlet.mach_sq(&gas), 0.125);
        assert_relative_eq!(inlet.bernoulli(&gas), 0.125 + 2.0);
        assert_eq!(inlet.mass_flux(&geom), 1.0);
        assert_relative_eq!(inlet.mu0(&gas, &geom), 0.5f64.powf(1.0 / 3.0));
        // the inlet density comes back out of the Bernoulli closure
        let rho = density_from_bernoulli(0.0, inlet.bernoulli(&gas), 0.5, 0.0, 0.0, 2.0).unwrap();
        assert_relative_eq!(rho, 1.0, epsilon = 1e-15);
        let csq = sound_speed_sq(inlet.entropy(&gas), rho, gas.gamma);
        assert_relative_eq!(inlet.u0 * inlet.u0 / csq, inlet.mach_sq(&gas), epsilon = 1e-15);
    }

    #[test]
    fn invalid_definitions_are_rejected() {
        assert!(GasParams::new(1.0, 1.0).is_err());
        assert!(GasParams::new(1.4, 0.0).is_err());
        assert!(NozzleGeometry::new(2.0, 1.0, 0.5).is_err());
        assert!(NozzleGeometry::new(1.0, 2.0, 1.6).is_err());
        let gas = GasParams::new(1.4, 1.0).unwrap();
        let sonic = InletState { rho0: 1.0, u0: 2.0, p0: 1.0, e0: 0.0 };
        let msg = sonic.validate(&gas).unwrap_err().to_string();
        assert!(msg.contains("subsonic"), "{msg}");
    }

    proptest! {
        #[test]
        fn density_is_monotone_in_its_arguments(
            s in -2.0f64..2.0,
            k in 1.0f64..5.0,
            u in 0.0f64..1.0,
            v in -0.5f64..0.5,
            phi in -0.5f64..0.5,
            gamma in 1.1f64..3.0,
            dq in 1e-3f64..0.1,
        ) {
            let base = density_from_bernoulli(s, k, u, v, phi, gamma).unwrap();
            // larger speed, smaller density
            let faster = density_from_bernoulli(s, k, (u * u + 2.0 * dq).sqrt(), v, phi, gamma).unwrap();
            prop_assert!(faster < base);
            prop_assert!(density_from_bernoulli(s, k + dq, u, v, phi, gamma).unwrap() > base);
            prop_assert!(density_from_bernoulli(s, k, u, v, phi + dq, gamma).unwrap() > base);
        }

        #[test]
        fn closure_reproduces_equation_of_state(
            s in -1.0f64..1.0, rho in 0.1f64..3.0, u in 0.0f64..0.5, gamma in 1.1f64..3.0,
        ) {
            // K built from (S, rho, U) gives back rho
            let k = 0.5 * u * u + gamma * s.exp() * rho.powf(gamma - 1.0) / (gamma - 1.0);
            let back = density_from_bernoulli(s, k, u, 0.0, 0.0, gamma).unwrap();
            prop_assert!((back - rho).abs() <= 1e-12 * rho);
            let sample = ThermoSample::from_transported(s, k, u, 0.0, 0.0, gamma).unwrap();
            prop_assert!((sample.p - s.exp() * back.powf(gamma)).abs() <= 1e-12 * sample.p);
        }
    }
}
