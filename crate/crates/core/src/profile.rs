//! One-dimensional boundary profiles on `[-theta0, theta0]`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Value, first and second derivative.
pub type Jet = [f64; 3];

/// Cubic spline with prescribed end slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    /// Clamped spline through `(x_i, y_i)`; `x` strictly increasing.
    pub fn clamped(x: Vec<f64>, y: Vec<f64>, slope_left: f64, slope_right: f64) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "spline needs at least two knots and matching values, got {} and {}",
                n,
                y.len()
            )));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) || x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("spline knots must be finite and strictly increasing".into()));
        }
        // tridiagonal system for the knot curvatures
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let slope: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        diag[0] = 2.0 * h[0];
        sup[0] = h[0];
        rhs[0] = 6.0 * (slope[0] - slope_left);
        for i in 1..n - 1 {
            sub[i] = h[i - 1];
            diag[i] = 2.0 * (h[i - 1] + h[i]);
            sup[i] = h[i];
            rhs[i] = 6.0 * (slope[i] - slope[i - 1]);
        }
        sub[n - 1] = h[n - 2];
        diag[n - 1] = 2.0 * h[n - 2];
        rhs[n - 1] = 6.0 * (slope_right - slope[n - 2]);
        for i in 1..n {
            let w = sub[i] / diag[i - 1];
            diag[i] -= w * sup[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        let mut m = vec![0.0; n];
        m[n - 1] = rhs[n - 1] / diag[n - 1];
        for i in (0..n - 1).rev() {
            m[i] = (rhs[i] - sup[i] * m[i + 1]) / diag[i];
        }
        Ok(Self { x, y, m })
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    /// Evaluation clamps `t` to the knot range.
    pub fn jet(&self, t: f64) -> Jet {
        let n = self.x.len();
        let t = t.clamp(self.x[0], self.x[n - 1]);
        let k = match self.x.partition_point(|&xi| xi <= t) {
            0 => 0,
            p => (p - 1).min(n - 2),
        };
        let h = self.x[k + 1] - self.x[k];
        let a = (t - self.x[k]) / h;
        let b = 1.0 - a;
        let (y0, y1, m0, m1) = (self.y[k], self.y[k + 1], self.m[k], self.m[k + 1]);
        // written as y0 + correction so that constant data stays exact
        let value = y0 + a * (y1 - y0) - a * b * h * h / 6.0 * ((1.0 + b) * m0 + (1.0 + a) * m1);
        let d1 = (y1 - y0) / h - h / 6.0 * ((3.0 * b * b - 1.0) * m0 - (3.0 * a * a - 1.0) * m1);
        let d2 = b * m0 + a * m1;
        [value, d1, d2]
    }
}

/// A boundary profile, given either by samples or in closed form.
#[derive(Clone)]
pub enum Profile {
    Spline(CubicSpline),
    /// Closed form returning value, first and second derivative.
    Analytic(Arc<dyn Fn(f64) -> Jet + Send + Sync>),
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Spline(s) => f.debug_tuple("Spline").field(s).finish(),
            Profile::Analytic(_) => f.write_str("Analytic(..)"),
        }
    }
}

impl Profile {
    pub fn constant(c: f64) -> Self {
        Profile::Analytic(Arc::new(move |_| [c, 0.0, 0.0]))
    }

    pub fn analytic(f: impl Fn(f64) -> Jet + Send + Sync + 'static) -> Self {
        Profile::Analytic(Arc::new(f))
    }

    /// Spline through samples with zero end slopes, the wall compatibility
    /// condition for every profile except the entrance angular velocity.
    pub fn from_samples(theta: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Ok(Profile::Spline(CubicSpline::clamped(theta, values, 0.0, 0.0)?))
    }

    pub fn jet(&self, theta: f64) -> Jet {
        match self {
            Profile::Spline(s) => s.jet(theta),
            Profile::Analytic(f) => f(theta),
        }
    }

    #[inline]
    pub fn value(&self, theta: f64) -> f64 {
        self.jet(theta)[0]
    }

    #[inline]
    pub fn derivative(&self, theta: f64) -> f64 {
        self.jet(theta)[1]
    }

    pub fn sample(&self, theta: &[f64]) -> Vec<f64> {
        theta.iter().map(|&t| self.value(t)).collect()
    }
}

/// `c + a cos^2(pi theta / (2 theta0))`: even, with every odd derivative
/// vanishing at the walls.
pub fn cos2_bump(c: f64, a: f64, theta0: f64) -> Profile {
    let k = std::f64::consts::PI / theta0;
    Profile::analytic(move |t| {
        // cos^2(k t / 2) = (1 + cos(k t)) / 2
        let (s, co) = (k * t).sin_cos();
        [c + 0.5 * a * (1.0 + co), -0.5 * a * k * s, -0.5 * a * k * k * co]
    })
}

/// `a sin(pi theta / theta0)`: odd, zero at the walls.
pub fn sine_bump(a: f64, theta0: f64) -> Profile {
    let k = std::f64::consts::PI / theta0;
    Profile::analytic(move |t| {
        let (s, co) = (k * t).sin_cos();
        [a * s, a * k * co, -a * k * k * s]
    })
}
