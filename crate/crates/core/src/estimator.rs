//! Orbit-weighted denoising targets.
//!
//! For a clean point `x0` and its noisy version `xt`, the target is the
//! kernel-weighted average of the orbit of `x0`:
//!
//! ```text
//! phi*(x0, xt, t) = sum_g (g.x0) q_t(xt | g.x0) / sum_g q_t(xt | g.x0)
//! ```
//!
//! Finite groups are summed exactly. Otherwise elements are drawn from a
//! proposal `nu_t` and the sum is replaced by a self-normalized importance
//! estimate with weights `q_t(xt | g.x0) / nu_t(g)`. All weight arithmetic
//! is done in log space.
//!
//! On the torus, orbit points are averaged as displacements from `xt`
//! (each wrapped into `[-0.5, 0.5)`), so the estimate commutes with
//! translations.

use rand::Rng;

use crate::error::{Error, Result};
use crate::groups::{is_closed, GroupElement, GroupSampler};
use crate::kernels::ForwardKernel;
use crate::point::{Point, Space};
use crate::schedule::{FlowCoefficients, NoiseLevel, NoiseSchedule};
use crate::torus::{wrap_centered, wrap_unit};

/// Largest element list that [`exact_orbit_target`] checks for closure.
pub const CLOSURE_CHECK_LIMIT: usize = 24;

/// Result of an orbit-target computation.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitTargetEstimate {
    pub target: Point,
    /// `log w_i` before normalization.
    pub log_weights: Vec<f64>,
    pub normalized_weights: Vec<f64>,
    /// `(sum w)^2 / sum w^2`.
    pub ess: f64,
    pub n_samples: usize,
}

impl OrbitTargetEstimate {
    /// Unnormalized weights `w_i`; may underflow where `log_weights` does not.
    pub fn raw_weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }
}

/// Empirical dataset with uniform mass `1 / |D|` on each point.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<Point>,
}

impl Dataset {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::InvalidInput("dataset is empty".into()))?;
        if points
            .iter()
            .any(|p| p.dim() != first.dim() || p.space != first.space)
        {
            return Err(Error::InvalidInput(
                "dataset points must share dimension and space".into(),
            ));
        }
        Ok(Dataset { points })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn space(&self) -> Space {
        self.points[0].space
    }

    /// Closure of the dataset under `elements` (duplicates removed).
    pub fn symmetrized(&self, elements: &[GroupElement]) -> Result<Dataset> {
        let mut out: Vec<Point> = Vec::new();
        for p in &self.points {
            for g in elements {
                let q = g.act(p)?;
                if !out.iter().any(|o| o.distance(&q) < 1e-12) {
                    out.push(q);
                }
            }
        }
        Dataset::new(out)
    }
}

/// Normalizes log weights with a max shift.
///
/// Returns the normalized weights and the effective sample size.
pub fn normalize_log_weights(log_weights: &[f64]) -> Result<(Vec<f64>, f64)> {
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    let shifted: Vec<f64> = log_weights.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = shifted.iter().sum();
    if sum.is_nan() || sum <= 0.0 || sum.is_infinite() {
        return Err(Error::DegenerateWeights);
    }
    let normalized: Vec<f64> = shifted.iter().map(|w| w / sum).collect();
    let sq: f64 = normalized.iter().map(|w| w * w).sum();
    Ok((normalized, 1.0 / sq))
}

/// Weighted mean of `candidates`, computed in the chart around `xt` on the torus.
fn weighted_mean(xt: &Point, candidates: &[Point], weights: &[f64]) -> Point {
    let d = xt.dim();
    match xt.space {
        Space::Euclidean => {
            let mut acc = vec![0.0; d];
            for (c, w) in candidates.iter().zip(weights) {
                for (a, v) in acc.iter_mut().zip(&c.coords) {
                    *a += w * v;
                }
            }
            Point::euclidean(acc)
        }
        Space::Torus => {
            let mut acc = vec![0.0; d];
            for (c, w) in candidates.iter().zip(weights) {
                for ((a, v), x) in acc.iter_mut().zip(&c.coords).zip(&xt.coords) {
                    *a += w * wrap_centered(v - x);
                }
            }
            let coords = xt
                .coords
                .iter()
                .zip(&acc)
                .map(|(x, a)| wrap_unit(x + a))
                .collect();
            Point {
                coords,
                space: Space::Torus,
            }
        }
    }
}

/// Weighted orbit average given candidates and their proposal log densities.
fn orbit_estimate(
    xt: &Point,
    candidates: Vec<Point>,
    log_proposal: &[f64],
    kernel: &ForwardKernel,
    level: NoiseLevel,
) -> Result<OrbitTargetEstimate> {
    let mut log_weights = Vec::with_capacity(candidates.len());
    for (c, lp) in candidates.iter().zip(log_proposal) {
        log_weights.push(kernel.log_density_at(xt, c, level)? - lp);
    }
    let (normalized_weights, ess) = normalize_log_weights(&log_weights)?;
    let target = weighted_mean(xt, &candidates, &normalized_weights);
    Ok(OrbitTargetEstimate {
        target,
        log_weights,
        normalized_weights,
        ess,
        n_samples: candidates.len(),
    })
}

/// Self-normalized importance estimate of the orbit target with `n`
/// elements drawn from `sampler`.
///
/// When the sampler asks for it, the first draw is replaced by the identity.
#[allow(clippy::too_many_arguments)]
pub fn snis_orbit_target<R: Rng + ?Sized>(
    x0: &Point,
    xt: &Point,
    t: usize,
    kernel: &ForwardKernel,
    sampler: &GroupSampler,
    n: usize,
    rng: &mut R,
) -> Result<OrbitTargetEstimate> {
    if n == 0 {
        return Err(Error::InvalidInput("need at least one group sample".into()));
    }
    let mut candidates = Vec::with_capacity(n);
    let mut log_proposal = Vec::with_capacity(n);
    for i in 0..n {
        let mut g = sampler.sample(t, rng);
        if i == 0 && sampler.include_identity() {
            g = GroupElement::identity(sampler.kind());
        }
        log_proposal.push(sampler.log_density(&g, t)?);
        candidates.push(g.act(x0)?);
    }
    orbit_estimate(xt, candidates, &log_proposal, kernel, kernel.level(t))
}

/// Exact orbit target over a finite group given as an element list.
pub fn exact_orbit_target(
    x0: &Point,
    xt: &Point,
    t: usize,
    kernel: &ForwardKernel,
    elements: &[GroupElement],
) -> Result<OrbitTargetEstimate> {
    exact_orbit_target_at(x0, xt, kernel.level(t), kernel, elements)
}

/// [`exact_orbit_target`] at an explicit noise level.
pub fn exact_orbit_target_at(
    x0: &Point,
    xt: &Point,
    level: NoiseLevel,
    kernel: &ForwardKernel,
    elements: &[GroupElement],
) -> Result<OrbitTargetEstimate> {
    if elements.is_empty() {
        return Err(Error::InvalidInput("empty element list".into()));
    }
    if elements.len() <= CLOSURE_CHECK_LIMIT && !is_closed(elements) {
        return Err(Error::NotAGroup);
    }
    let candidates = elements
        .iter()
        .map(|g| g.act(x0))
        .collect::<Result<Vec<_>>>()?;
    orbit_estimate(xt, candidates, &vec![0.0; elements.len()], kernel, level)
}

/// Brute-force `E[x0 | xt]` over the dataset and its group orbits.
pub fn oracle_conditional_mean(
    dataset: &Dataset,
    xt: &Point,
    t: usize,
    kernel: &ForwardKernel,
    elements: &[GroupElement],
) -> Result<Point> {
    oracle_conditional_mean_at(dataset, xt, kernel.level(t), kernel, elements)
}

/// [`oracle_conditional_mean`] at an explicit noise level.
pub fn oracle_conditional_mean_at(
    dataset: &Dataset,
    xt: &Point,
    level: NoiseLevel,
    kernel: &ForwardKernel,
    elements: &[GroupElement],
) -> Result<Point> {
    let mut candidates = Vec::with_capacity(dataset.len() * elements.len());
    for p in dataset.points() {
        for g in elements {
            candidates.push(g.act(p)?);
        }
    }
    let zeros = vec![0.0; candidates.len()];
    Ok(orbit_estimate(xt, candidates, &zeros, kernel, level)?.target)
}

/// Compares `phi*(xt + a)` with `phi*(xt) + a` for the two-point dataset
/// `{0, 1}` under a Gaussian kernel with no symmetrization. The regression
/// minimizer is not translation-equivariant: the first value stays below 1
/// while the second exceeds it.
pub fn counterexample_check(alpha: f64, sigma: f64, xt: f64, a: f64) -> Result<(f64, f64)> {
    if sigma.is_nan() || sigma <= 0.0 || !alpha.is_finite() {
        return Err(Error::InvalidInput(format!(
            "need sigma > 0, got alpha={alpha}, sigma={sigma}"
        )));
    }
    // the schedule is unused; every evaluation passes its own level
    let kernel = ForwardKernel::gaussian(NoiseSchedule::vp_linear(2)?);
    let dataset = Dataset::new(vec![
        Point::euclidean(vec![0.0]),
        Point::euclidean(vec![1.0]),
    ])?;
    let identity = [GroupElement::Reflection { sign: 1 }];
    let level = NoiseLevel { alpha, sigma };
    let phi = |x: f64| -> Result<f64> {
        Ok(oracle_conditional_mean_at(
            &dataset,
            &Point::euclidean(vec![x]),
            level,
            &kernel,
            &identity,
        )?
        .coords[0])
    };
    Ok((phi(xt + a)?, phi(xt)? + a))
}

/// How the orbit target is computed during training.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetMode {
    /// Sum over an explicit finite group.
    Exact(Vec<GroupElement>),
    /// Self-normalized importance sampling with `n` draws.
    Snis { sampler: GroupSampler, n: usize },
}

/// Regression target for the orbit-averaged diffusion loss. The caller
/// treats it as a constant.
pub fn rb_diffusion_target<R: Rng + ?Sized>(
    x0: &Point,
    xt: &Point,
    t: usize,
    kernel: &ForwardKernel,
    mode: &TargetMode,
    rng: &mut R,
) -> Result<Point> {
    let est = match mode {
        TargetMode::Exact(elements) => exact_orbit_target(x0, xt, t, kernel, elements)?,
        TargetMode::Snis { sampler, n } => snis_orbit_target(x0, xt, t, kernel, sampler, *n, rng)?,
    };
    Ok(est.target)
}

/// Orbit average of the data endpoint `x1` for the noisy flow interpolant,
/// weighted by the path density `N(xt; (1-t) x0 + t g.x1, sigma^2 t(1-t))`.
pub fn flow_orbit_mean_x1(
    x0: &Point,
    x1: &Point,
    xt: &Point,
    t: f64,
    coeffs: &FlowCoefficients,
    elements: &[GroupElement],
) -> Result<OrbitTargetEstimate> {
    coeffs.check_time(t)?;
    // xt - (1-t) x0 ~ N(t . g.x1, sigma^2 t (1-t))
    let shifted = Point::euclidean(
        xt.coords
            .iter()
            .zip(&x0.coords)
            .map(|(a, b)| a - (1.0 - t) * b)
            .collect(),
    );
    let level = NoiseLevel {
        alpha: t,
        sigma: coeffs.sigma * (t * (1.0 - t)).sqrt(),
    };
    let kernel = ForwardKernel::gaussian(NoiseSchedule::vp_linear(2)?);
    exact_orbit_target_at(x1, &shifted, level, &kernel, elements)
}

/// Velocity target `h(t) xt - g(t) x0 + f(t) E[x1 | xt]`.
pub fn rb_flow_velocity_target(
    x0: &Point,
    xt: &Point,
    t: f64,
    coeffs: &FlowCoefficients,
    orbit_mean_x1: &Point,
) -> Result<Point> {
    coeffs.velocity(xt, x0, orbit_mean_x1, t)
}
