//! Reverse-time generation: DDPM ancestral sampling with an x0-predicting
//! denoiser, and forward Euler integration of a learned velocity field.
//!
//! Sample `i` draws all of its noise from the child stream `("sample", i)`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::net::Denoiser;
use crate::point::Point;
use crate::rng::child_rng;
use crate::schedule::{FlowCoefficients, NoiseSchedule};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Ancestral,
    FlowEuler { steps: usize },
}

/// Sampling request.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRun {
    pub n_samples: usize,
    pub seed: u64,
    pub method: Method,
    /// Pair samples `2k` and `2k+1` so they use negated noise.
    pub antithetic: bool,
}

/// Posterior `q(x_{t-1} | x_t, x0)` coefficients for the x0 parameterization:
/// `mean = a x_t + b x0`, variance `var`.
pub fn posterior_coefficients(schedule: &NoiseSchedule, t: usize) -> (f64, f64, f64) {
    let (a_t, s_t) = (schedule.alpha(t), schedule.sigma(t));
    let (a_p, s_p) = (schedule.alpha(t - 1), schedule.sigma(t - 1));
    let a_ts = a_t / a_p;
    let s2_ts = s_t * s_t - a_ts * a_ts * s_p * s_p;
    let s2_t = s_t * s_t;
    (
        a_ts * s_p * s_p / s2_t,
        a_p * s2_ts / s2_t,
        s2_ts * s_p * s_p / s2_t,
    )
}

/// Ancestral chain driven by an arbitrary x0 predictor `predict(x, t)`.
pub fn ancestral_sample_with<F>(
    predict: F,
    schedule: &NoiseSchedule,
    dim: usize,
    run: &SampleRun,
) -> Result<Vec<Point>>
where
    F: Fn(&[f64], usize) -> Vec<f64>,
{
    if run.n_samples == 0 {
        return Err(Error::InvalidInput("need at least one sample".into()));
    }
    let steps = schedule.steps();
    let mut out = Vec::with_capacity(run.n_samples);
    for i in 0..run.n_samples {
        let (stream, sign) = if run.antithetic {
            (i / 2, if i % 2 == 0 { 1.0 } else { -1.0 })
        } else {
            (i, 1.0)
        };
        let mut rng = child_rng(run.seed, "sample", stream as u64);
        let noise = |rng: &mut crate::rng::Rng| -> f64 {
            let z: f64 = rng.sample(StandardNormal);
            sign * z
        };
        let mut x: Vec<f64> = (0..dim).map(|_| noise(&mut rng)).collect();
        for t in (1..=steps).rev() {
            let x0_hat = predict(&x, t);
            let (a, b, var) = posterior_coefficients(schedule, t);
            let sd = var.sqrt();
            for (xi, p) in x.iter_mut().zip(&x0_hat) {
                *xi = a * *xi + b * p;
            }
            if t > 1 {
                for xi in x.iter_mut() {
                    *xi += sd * noise(&mut rng);
                }
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericalDivergence(format!(
                    "sample {i} at step {t}"
                )));
            }
        }
        out.push(Point::euclidean(x));
    }
    Ok(out)
}

/// DDPM ancestral sampling from `x_T ~ N(0, I)`.
pub fn ancestral_sample(
    denoiser: &Denoiser,
    schedule: &NoiseSchedule,
    run: &SampleRun,
) -> Result<Vec<Point>> {
    ancestral_sample_with(
        |x, t| denoiser.forward_raw(x, schedule.normalized_time(t)),
        schedule,
        denoiser.dim(),
        run,
    )
}

/// Euler integration of `dx/dt = v(x, t)` from `t_min` to `1 - t_min`,
/// starting at `x ~ N(0, I)`.
pub fn flow_euler_sample_with<F>(
    velocity: F,
    coeffs: &FlowCoefficients,
    dim: usize,
    steps: usize,
    run: &SampleRun,
) -> Result<Vec<Point>>
where
    F: Fn(&[f64], f64) -> Vec<f64>,
{
    if steps == 0 {
        return Err(Error::InvalidInput("need at least one Euler step".into()));
    }
    if run.n_samples == 0 {
        return Err(Error::InvalidInput("need at least one sample".into()));
    }
    let dt = (1.0 - 2.0 * coeffs.t_min) / steps as f64;
    let mut out = Vec::with_capacity(run.n_samples);
    for i in 0..run.n_samples {
        let (stream, sign) = if run.antithetic {
            (i / 2, if i % 2 == 0 { 1.0 } else { -1.0 })
        } else {
            (i, 1.0)
        };
        let mut rng = child_rng(run.seed, "sample", stream as u64);
        let mut x: Vec<f64> = (0..dim)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                sign * z
            })
            .collect();
        for k in 0..steps {
            let t = coeffs.t_min + k as f64 * dt;
            let v = velocity(&x, t);
            for (xi, vi) in x.iter_mut().zip(&v) {
                *xi += dt * vi;
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericalDivergence(format!(
                    "sample {i} at Euler step {k}"
                )));
            }
        }
        out.push(Point::euclidean(x));
    }
    Ok(out)
}

/// Euler sampling with a network velocity `v(x, t)`; `t` is fed as-is.
pub fn flow_euler_sample(
    velocity_net: &Denoiser,
    coeffs: &FlowCoefficients,
    steps: usize,
    run: &SampleRun,
) -> Result<Vec<Point>> {
    flow_euler_sample_with(
        |x, t| velocity_net.forward_raw(x, t),
        coeffs,
        velocity_net.dim(),
        steps,
        run,
    )
}
