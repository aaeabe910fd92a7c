//! Loss variants, the Adam training loop, and the gradient diagnostics.
//!
//! Randomness is split per work item: item `i` of a run draws its data
//! (dataset index, timestep, forward noise) from the child stream
//! `("data", i)` and its group elements from `("group", i)`. Two variants
//! run with the same seed therefore see identical data draws, and a variant
//! whose group is trivial reproduces the baseline exactly.

use rand::Rng;

use crate::error::{Error, Result};
use crate::estimator::{rb_diffusion_target, Dataset, TargetMode};
use crate::groups::GroupSampler;
use crate::kernels::ForwardKernel;
use crate::net::Denoiser;
use crate::point::{Point, Space};
use crate::rng::{child_rng, derive_seed, Rng as StreamRng};
use crate::stats::{mean, variance};
use crate::torus::wrap_centered;

/// Which regression target the denoiser is trained on.
#[derive(Debug, Clone, PartialEq)]
pub enum Variant {
    /// Plain denoising loss: target is the sampled `x0`.
    Baseline,
    /// `x0` is replaced by `g.x0` with `g` uniform, target is `g.x0`.
    Augment,
    /// The sampled `x0` is noised as in the baseline; the target is its
    /// orbit average computed with the given mode.
    OrbDiff(TargetMode),
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Augment => "augment",
            Variant::OrbDiff(_) => "orbdiff",
        }
    }
}

/// Data, forward process, and the symmetry used for augmentation.
#[derive(Debug, Clone)]
pub struct Problem {
    pub dataset: Dataset,
    pub kernel: ForwardKernel,
    /// Uniform proposal over the symmetry group, used by `Augment`.
    pub augment: GroupSampler,
}

impl Problem {
    pub fn steps(&self) -> usize {
        self.kernel.schedule().steps()
    }

    pub fn space(&self) -> Space {
        self.dataset.space()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    pub fn new(cfg: AdamConfig, n_params: usize) -> Self {
        Adam {
            cfg,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
        }
    }

    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) {
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.step);
        let c2 = 1.0 - beta2.powi(self.step);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub variant: Variant,
    pub iterations: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Loss trace granularity.
    pub log_every: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be >= 1".into()));
        }
        if self.log_every == 0 {
            return Err(Error::InvalidConfig("log_every must be >= 1".into()));
        }
        if let Variant::OrbDiff(TargetMode::Snis { n, .. }) = &self.variant {
            if *n == 0 {
                return Err(Error::InvalidConfig(
                    "need at least one group sample".into(),
                ));
            }
        }
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.adam;
        if !(lr > 0.0 && (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "bad optimizer settings {:?}",
                self.adam
            )));
        }
        Ok(())
    }
}

/// One training example after noising.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub t: usize,
    pub x0: Point,
    pub xt: Point,
    pub target: Point,
}

/// Draws one example; `t = None` samples it uniformly from `1..=T`.
pub fn draw_example(
    problem: &Problem,
    variant: &Variant,
    t: Option<usize>,
    data_rng: &mut StreamRng,
    group_rng: &mut StreamRng,
) -> Result<Draw> {
    let idx = data_rng.random_range(0..problem.dataset.len());
    let t = match t {
        Some(t) => {
            problem.kernel.schedule().check_step(t)?;
            t
        }
        None => data_rng.random_range(1..=problem.steps()),
    };
    let base = &problem.dataset.points()[idx];
    let x0 = match variant {
        Variant::Baseline | Variant::OrbDiff(_) => base.clone(),
        Variant::Augment => problem.augment.sample(t, group_rng).act(base)?,
    };
    let xt = problem.kernel.sample_forward(&x0, t, data_rng)?;
    let target = match variant {
        Variant::Baseline | Variant::Augment => x0.clone(),
        Variant::OrbDiff(mode) => {
            rb_diffusion_target(&x0, &xt, t, &problem.kernel, mode, group_rng)?
        }
    };
    Ok(Draw { t, x0, xt, target })
}

/// Squared-error loss of one draw; adds `scale * grad` into `grads`.
pub fn draw_loss_grad(
    denoiser: &Denoiser,
    problem: &Problem,
    draw: &Draw,
    scale: f64,
    grads: &mut [f64],
) -> f64 {
    let t_norm = problem.kernel.schedule().normalized_time(draw.t);
    denoiser.regression_loss_grad(
        &draw.xt.coords,
        t_norm,
        &draw.target.coords,
        problem.space(),
        scale,
        grads,
    )
}

/// Mean loss and gradient over the batch whose items are `first..first + batch`.
pub fn loss_and_grad(
    denoiser: &Denoiser,
    problem: &Problem,
    variant: &Variant,
    seed: u64,
    first: u64,
    batch: usize,
) -> Result<(f64, Vec<f64>)> {
    let mut grads = vec![0.0; denoiser.num_params()];
    let scale = 1.0 / batch as f64;
    let mut loss = 0.0;
    for i in 0..batch as u64 {
        let mut data_rng = child_rng(seed, "data", first + i);
        let mut group_rng = child_rng(seed, "group", first + i);
        let draw = draw_example(problem, variant, None, &mut data_rng, &mut group_rng)?;
        loss += draw_loss_grad(denoiser, problem, &draw, scale, &mut grads);
    }
    Ok((loss * scale, grads))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub denoiser: Denoiser,
    /// Batch loss at every iteration.
    pub losses: Vec<f64>,
}

impl TrainOutcome {
    /// `(iteration, mean loss over the window ending there)` every `every` steps.
    pub fn trace(&self, every: usize) -> Vec<(usize, f64)> {
        self.losses
            .chunks(every)
            .enumerate()
            .map(|(i, c)| ((i * every + c.len()), mean(c)))
            .collect()
    }

    /// Mean of the last `n` batch losses.
    pub fn tail_mean(&self, n: usize) -> f64 {
        let n = n.min(self.losses.len()).max(1);
        mean(&self.losses[self.losses.len().saturating_sub(n)..])
    }
}

/// Training stopped on a non-finite loss; `outcome` holds the last finite state.
#[derive(Debug, Clone)]
pub struct TrainAbort {
    pub error: Error,
    pub outcome: TrainOutcome,
}

/// Runs Adam for `config.iterations` steps starting from `init`.
pub fn train_loop(
    init: Denoiser,
    problem: &Problem,
    config: &TrainConfig,
) -> std::result::Result<TrainOutcome, Box<TrainAbort>> {
    let abort = |error: Error, denoiser: Denoiser, losses: Vec<f64>| {
        Box::new(TrainAbort {
            error,
            outcome: TrainOutcome { denoiser, losses },
        })
    };
    if let Err(e) = config.validate() {
        return Err(abort(e, init, Vec::new()));
    }
    let mut denoiser = init;
    let mut adam = Adam::new(config.adam, denoiser.num_params());
    let mut losses = Vec::with_capacity(config.iterations);
    for it in 0..config.iterations {
        let first = (it * config.batch_size) as u64;
        let (loss, grads) = match loss_and_grad(
            &denoiser,
            problem,
            &config.variant,
            config.seed,
            first,
            config.batch_size,
        ) {
            Ok(v) => v,
            Err(e) => return Err(abort(e, denoiser, losses)),
        };
        if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
            let e = Error::NumericalDivergence(format!("loss {loss} at iteration {it}"));
            return Err(abort(e, denoiser, losses));
        }
        let mut next = denoiser.clone();
        adam.update(next.mlp_mut().params_mut(), &grads);
        if next.mlp().params().iter().any(|p| !p.is_finite()) {
            let e = Error::NumericalDivergence(format!("parameters diverged at iteration {it}"));
            return Err(abort(e, denoiser, losses));
        }
        denoiser = next;
        losses.push(loss);
    }
    Ok(TrainOutcome { denoiser, losses })
}

/// Spread of single-draw gradients at one timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientStats {
    pub label: String,
    pub t: usize,
    pub repeats: usize,
    pub mean_grad_norm: f64,
    pub grad_norm_var: f64,
    /// Per-parameter variance averaged over parameters (trace of the
    /// covariance divided by the parameter count).
    pub mean_component_var: f64,
    /// The `repeats` gradient norms, in draw order.
    pub norms: Vec<f64>,
}

/// Single-draw gradients for each `(variant, t)` at frozen parameters.
///
/// Draw `k` at timestep index `j` uses the same data stream for every
/// variant, so the resulting norms are paired across variants.
pub fn gradient_variance_sweep(
    denoiser: &Denoiser,
    problem: &Problem,
    timesteps: &[usize],
    repeats: usize,
    variants: &[(String, Variant)],
    seed: u64,
) -> Result<Vec<GradientStats>> {
    if repeats < 2 {
        return Err(Error::InvalidInput("need at least two repeats".into()));
    }
    let p = denoiser.num_params();
    let mut out = Vec::new();
    for (label, variant) in variants {
        for (j, &t) in timesteps.iter().enumerate() {
            let mut norms = Vec::with_capacity(repeats);
            let mut sum = vec![0.0; p];
            let mut sum_sq = vec![0.0; p];
            for k in 0..repeats {
                let item = (j * repeats + k) as u64;
                let mut data_rng = child_rng(seed, "sweep-data", item);
                let mut group_rng = child_rng(derive_seed(seed, label, 0), "sweep-group", item);
                let draw = draw_example(problem, variant, Some(t), &mut data_rng, &mut group_rng)?;
                let mut g = vec![0.0; p];
                draw_loss_grad(denoiser, problem, &draw, 1.0, &mut g);
                norms.push(g.iter().map(|v| v * v).sum::<f64>().sqrt());
                for ((s, q), v) in sum.iter_mut().zip(&mut sum_sq).zip(&g) {
                    *s += v;
                    *q += v * v;
                }
            }
            let kf = repeats as f64;
            let comp_var: f64 = sum
                .iter()
                .zip(&sum_sq)
                .map(|(s, q)| ((q - s * s / kf) / (kf - 1.0)).max(0.0))
                .sum::<f64>()
                / p as f64;
            out.push(GradientStats {
                label: label.clone(),
                t,
                repeats,
                mean_grad_norm: mean(&norms),
                grad_norm_var: variance(&norms),
                mean_component_var: comp_var,
                norms,
            });
        }
    }
    Ok(out)
}

/// Root-mean-square deviation between two points (wrapped on the torus).
pub fn rmsd(a: &[f64], b: &[f64], space: Space) -> f64 {
    let sq: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| match space {
            Space::Euclidean => (x - y).powi(2),
            Space::Torus => wrap_centered(x - y).powi(2),
        })
        .sum();
    (sq / a.len() as f64).sqrt()
}

/// Mean RMSD between `g.phi(xt, t)` and `phi(g.xt, t)` over `probes` random
/// `(x0, xt, g)` per timestep.
pub fn equivariance_error(
    denoiser: &Denoiser,
    problem: &Problem,
    group: &GroupSampler,
    timesteps: &[usize],
    probes: usize,
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    if probes == 0 {
        return Err(Error::InvalidInput("need at least one probe".into()));
    }
    let space = problem.space();
    let mut out = Vec::with_capacity(timesteps.len());
    for (j, &t) in timesteps.iter().enumerate() {
        problem.kernel.schedule().check_step(t)?;
        let t_norm = problem.kernel.schedule().normalized_time(t);
        let mut total = 0.0;
        for k in 0..probes {
            let mut rng = child_rng(seed, "equivariance", (j * probes + k) as u64);
            let x0 = &problem.dataset.points()[rng.random_range(0..problem.dataset.len())];
            let xt = problem.kernel.sample_forward(x0, t, &mut rng)?;
            let g = group.sample(t, &mut rng);
            let lhs = g.act(&denoiser.forward(&xt, t_norm)?)?;
            let rhs = denoiser.forward(&g.act(&xt)?, t_norm)?;
            total += rmsd(&lhs.coords, &rhs.coords, space);
        }
        out.push((t, total / probes as f64));
    }
    Ok(out)
}
