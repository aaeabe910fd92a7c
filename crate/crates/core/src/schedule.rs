//! Noise schedules for the diffusion forward process and the coefficient
//! functions of the noisy flow-matching interpolant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Point;

pub const BETA_START: f64 = 1e-4;
pub const BETA_END: f64 = 0.02;

/// Signal and noise scale at one timestep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseLevel {
    pub alpha: f64,
    pub sigma: f64,
}

/// Discrete-time `(alpha_t, sigma_t)` tables, indexed `0..=T`.
///
/// Index 0 is the clean data (`alpha = 1`, `sigma = 0`); training and
/// sampling use `1..=T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    alpha: Vec<f64>,
    sigma: Vec<f64>,
}

impl NoiseSchedule {
    /// Variance-preserving DDPM schedule with linear betas in `[1e-4, 0.02]`.
    pub fn vp_linear(steps: usize) -> Result<Self> {
        if steps < 2 {
            return Err(Error::InvalidConfig(format!(
                "schedule needs at least 2 steps, got {steps}"
            )));
        }
        let mut alpha = Vec::with_capacity(steps + 1);
        let mut sigma = Vec::with_capacity(steps + 1);
        alpha.push(1.0);
        sigma.push(0.0);
        let mut log_prod = 0.0;
        for i in 0..steps {
            let beta = BETA_START + (BETA_END - BETA_START) * i as f64 / (steps - 1) as f64;
            log_prod += (1.0 - beta).ln();
            let a2 = log_prod.exp();
            alpha.push(a2.sqrt());
            // 1 - a2 via expm1 keeps precision at the first steps
            sigma.push((-log_prod.exp_m1()).sqrt());
        }
        Ok(NoiseSchedule { alpha, sigma })
    }

    /// `alpha = 1`, `sigma_t = sigma_min (sigma_max / sigma_min)^((t-1)/(T-1))`.
    /// Used for torus coordinates, where signal scaling is meaningless.
    pub fn ve_geometric(steps: usize, sigma_min: f64, sigma_max: f64) -> Result<Self> {
        if steps < 2 {
            return Err(Error::InvalidConfig(format!(
                "schedule needs at least 2 steps, got {steps}"
            )));
        }
        if !(sigma_min > 0.0 && sigma_max >= sigma_min && sigma_max.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "bad sigma range [{sigma_min}, {sigma_max}]"
            )));
        }
        let ratio = (sigma_max / sigma_min).ln();
        let mut sigma = vec![0.0];
        sigma.extend((0..steps).map(|i| sigma_min * (ratio * i as f64 / (steps - 1) as f64).exp()));
        Ok(NoiseSchedule {
            alpha: vec![1.0; steps + 1],
            sigma,
        })
    }

    /// Builds a schedule from explicit tables (index 0 included).
    pub fn from_tables(alpha: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if alpha.len() != sigma.len() || alpha.len() < 3 {
            return Err(Error::InvalidConfig(
                "alpha/sigma tables must have equal length >= 3".into(),
            ));
        }
        if alpha.iter().any(|a| a.is_nan() || *a <= 0.0 || *a > 1.0)
            || sigma.iter().any(|s| s.is_nan() || *s < 0.0)
        {
            return Err(Error::InvalidConfig(
                "alpha must lie in (0,1] and sigma must be >= 0".into(),
            ));
        }
        if alpha.windows(2).any(|w| w[1] > w[0]) || sigma.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidConfig(
                "alpha must be non-increasing and sigma non-decreasing".into(),
            ));
        }
        Ok(NoiseSchedule { alpha, sigma })
    }

    /// Number of diffusion steps `T`.
    pub fn steps(&self) -> usize {
        self.alpha.len() - 1
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t]
    }

    pub fn sigma(&self, t: usize) -> f64 {
        self.sigma[t]
    }

    pub fn level(&self, t: usize) -> NoiseLevel {
        NoiseLevel {
            alpha: self.alpha[t],
            sigma: self.sigma[t],
        }
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alpha
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigma
    }

    /// `t / T`, the scalar time fed to denoisers.
    pub fn normalized_time(&self, t: usize) -> f64 {
        t as f64 / self.steps() as f64
    }

    pub fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            Err(Error::InvalidTime(t as f64))
        } else {
            Ok(())
        }
    }
}

/// Lower clamp for flow-matching time; `h`, `g`, `f` blow up at 0 and 1.
pub const FLOW_T_MIN: f64 = 1e-3;

/// Coefficients of the velocity `h(t) x_t - g(t) x_0 + f(t) x_1` for the
/// interpolant `x_t = (1-t) x_0 + t x_1 + sigma sqrt(t(1-t)) eps`.
///
/// `x_0` is the prior endpoint and `x_1` the data endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowCoefficients {
    pub sigma: f64,
    pub t_min: f64,
}

impl FlowCoefficients {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "flow sigma must be positive, got {sigma}"
            )));
        }
        Ok(FlowCoefficients {
            sigma,
            t_min: FLOW_T_MIN,
        })
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        if t.is_finite() && t >= self.t_min && t <= 1.0 - self.t_min {
            Ok(())
        } else {
            Err(Error::InvalidTime(t))
        }
    }

    pub fn h(&self, t: f64) -> f64 {
        (1.0 - 2.0 * t) / (2.0 * self.sigma * t * (1.0 - t))
    }

    pub fn g(&self, t: f64) -> f64 {
        1.0 + (1.0 - 2.0 * t) / (2.0 * self.sigma * t)
    }

    pub fn f(&self, t: f64) -> f64 {
        1.0 - (1.0 - 2.0 * t) / (2.0 * self.sigma * (1.0 - t))
    }

    /// `(1-t) x0 + t x1 + sigma sqrt(t(1-t)) eps`.
    pub fn interpolate(&self, x0: &Point, x1: &Point, t: f64, eps: &Point) -> Result<Point> {
        self.check_time(t)?;
        if x0.dim() != x1.dim() || x0.dim() != eps.dim() {
            return Err(Error::InvalidShape(format!(
                "dims {} / {} / {}",
                x0.dim(),
                x1.dim(),
                eps.dim()
            )));
        }
        let s = self.sigma * (t * (1.0 - t)).sqrt();
        let coords = x0
            .coords
            .iter()
            .zip(&x1.coords)
            .zip(&eps.coords)
            .map(|((a, b), e)| (1.0 - t) * a + t * b + s * e)
            .collect();
        Ok(Point::euclidean(coords))
    }

    /// Conditional velocity written in terms of the noise draw:
    /// `x1 - x0 + (1-2t) / (2 sqrt(t(1-t))) eps`.
    pub fn velocity_from_noise(
        &self,
        x0: &Point,
        x1: &Point,
        t: f64,
        eps: &Point,
    ) -> Result<Point> {
        self.check_time(t)?;
        let c = (1.0 - 2.0 * t) / (2.0 * (t * (1.0 - t)).sqrt());
        let coords = x0
            .coords
            .iter()
            .zip(&x1.coords)
            .zip(&eps.coords)
            .map(|((a, b), e)| b - a + c * e)
            .collect();
        Ok(Point::euclidean(coords))
    }

    /// `h(t) xt - g(t) x0 + f(t) x1`.
    pub fn velocity(&self, xt: &Point, x0: &Point, x1: &Point, t: f64) -> Result<Point> {
        self.check_time(t)?;
        let (h, g, f) = (self.h(t), self.g(t), self.f(t));
        let coords = xt
            .coords
            .iter()
            .zip(&x0.coords)
            .zip(&x1.coords)
            .map(|((x, a), b)| h * x - g * a + f * b)
            .collect();
        Ok(Point::euclidean(coords))
    }
}

/// Variance-preserving linear schedule; see [`NoiseSchedule::vp_linear`].
pub fn make_vp_schedule(steps: usize) -> Result<NoiseSchedule> {
    NoiseSchedule::vp_linear(steps)
}

/// See [`FlowCoefficients::interpolate`].
pub fn flow_interpolate(
    x0: &Point,
    x1: &Point,
    t: f64,
    eps: &Point,
    coeffs: &FlowCoefficients,
) -> Result<Point> {
    coeffs.interpolate(x0, x1, t, eps)
}
