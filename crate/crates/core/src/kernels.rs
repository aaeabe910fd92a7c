//! Forward noising kernels `q_t(x_t | x_0)`.
//!
//! The Gaussian kernel is `N(alpha_t x0, sigma_t^2 I)` on Euclidean points.
//! The wrapped-normal kernel lives on the unit torus and has no signal
//! scaling: `x_t = (x0 + sigma_t eps) mod 1`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::point::{Point, Space};
use crate::schedule::{NoiseLevel, NoiseSchedule};
use crate::torus::{truncation_for, wrap_unit, wrapped_normal_log_pdf_truncated};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Gaussian,
    WrappedNormal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardKernel {
    kind: KernelKind,
    schedule: NoiseSchedule,
    /// Fixed image count per side; `None` uses the sigma-dependent policy.
    truncation: Option<i64>,
}

impl ForwardKernel {
    pub fn gaussian(schedule: NoiseSchedule) -> Self {
        ForwardKernel {
            kind: KernelKind::Gaussian,
            schedule,
            truncation: None,
        }
    }

    pub fn wrapped_normal(schedule: NoiseSchedule) -> Self {
        ForwardKernel {
            kind: KernelKind::WrappedNormal,
            schedule,
            truncation: None,
        }
    }

    /// Overrides the wrapped-sum truncation (mainly for high-accuracy references).
    pub fn with_truncation(mut self, z: i64) -> Self {
        self.truncation = Some(z);
        self
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn space(&self) -> Space {
        match self.kind {
            KernelKind::Gaussian => Space::Euclidean,
            KernelKind::WrappedNormal => Space::Torus,
        }
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    pub fn level(&self, t: usize) -> NoiseLevel {
        self.schedule.level(t)
    }

    /// Truncation used at bandwidth `sigma`.
    pub fn truncation_at(&self, sigma: f64) -> i64 {
        self.truncation.unwrap_or_else(|| truncation_for(sigma))
    }

    fn check_space(&self, p: &Point) -> Result<()> {
        if p.space != self.space() {
            return Err(Error::InvalidSpace(format!(
                "{:?} kernel given a {:?} point",
                self.kind, p.space
            )));
        }
        Ok(())
    }

    /// Draws `x_t ~ q_t(. | x0)`.
    pub fn sample_forward<R: Rng + ?Sized>(
        &self,
        x0: &Point,
        t: usize,
        rng: &mut R,
    ) -> Result<Point> {
        let eps: Vec<f64> = (0..x0.dim()).map(|_| rng.sample(StandardNormal)).collect();
        self.forward_with_noise(x0, self.level(t), &eps)
    }

    /// Deterministic forward map for a given noise vector.
    pub fn forward_with_noise(&self, x0: &Point, level: NoiseLevel, eps: &[f64]) -> Result<Point> {
        self.check_space(x0)?;
        if eps.len() != x0.dim() {
            return Err(Error::InvalidShape(format!(
                "noise dim {} vs point dim {}",
                eps.len(),
                x0.dim()
            )));
        }
        let coords = match self.kind {
            KernelKind::Gaussian => x0
                .coords
                .iter()
                .zip(eps)
                .map(|(x, e)| level.alpha * x + level.sigma * e)
                .collect(),
            KernelKind::WrappedNormal => x0
                .coords
                .iter()
                .zip(eps)
                .map(|(x, e)| wrap_unit(x + level.sigma * e))
                .collect(),
        };
        Ok(Point {
            coords,
            space: x0.space,
        })
    }

    /// `log q_t(xt | x0)`.
    pub fn log_density(&self, xt: &Point, x0: &Point, t: usize) -> Result<f64> {
        self.log_density_at(xt, x0, self.level(t))
    }

    /// `log q(xt | x0)` at an explicit noise level.
    pub fn log_density_at(&self, xt: &Point, x0: &Point, level: NoiseLevel) -> Result<f64> {
        self.check_space(xt)?;
        self.check_space(x0)?;
        if xt.dim() != x0.dim() {
            return Err(Error::InvalidShape(format!(
                "dims {} vs {}",
                xt.dim(),
                x0.dim()
            )));
        }
        let NoiseLevel { alpha, sigma } = level;
        Ok(match self.kind {
            KernelKind::Gaussian => gaussian_log_pdf(&xt.coords, &x0.coords, alpha, sigma),
            KernelKind::WrappedNormal => {
                let z = self.truncation_at(sigma);
                xt.coords
                    .iter()
                    .zip(&x0.coords)
                    .map(|(a, b)| wrapped_normal_log_pdf_truncated(a - b, sigma, z))
                    .sum()
            }
        })
    }
}

/// `log N(xt; alpha x0, sigma^2 I)`.
pub fn gaussian_log_pdf(xt: &[f64], x0: &[f64], alpha: f64, sigma: f64) -> f64 {
    let sq: f64 = xt
        .iter()
        .zip(x0)
        .map(|(a, b)| (a - alpha * b).powi(2))
        .sum();
    -0.5 * xt.len() as f64 * (2.0 * PI * sigma * sigma).ln() - sq / (2.0 * sigma * sigma)
}
