//! Small MLP denoisers with hand-written reverse mode.
//!
//! Parameters live in one flat vector; for each layer the weight matrix
//! (row-major, `out x in`) is followed by its bias. Hidden layers use
//! `tanh`, the output layer is linear. The denoiser input is the point
//! concatenated with the normalized time `t / T`.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::point::{Point, Space};
use crate::torus::{wrap_centered, wrap_unit};

pub const DEFAULT_HIDDEN: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// Weights `~ N(0, 1/fan_in)`, zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let mut mlp = Mlp::zeros(sizes);
        let mut off = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let scale = (1.0 / fan_in as f64).sqrt();
            for p in &mut mlp.params[off..off + fan_in * fan_out] {
                let z: f64 = rng.sample(StandardNormal);
                *p = scale * z;
            }
            off += fan_in * fan_out + fan_out;
        }
        mlp
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(
            sizes.len() >= 2 && sizes.iter().all(|&s| s > 0),
            "bad layer sizes {sizes:?}"
        );
        Mlp {
            sizes: sizes.to_vec(),
            params: vec![0.0; param_count(sizes)],
        }
    }

    /// The three-layer shape `[dim + 1, hidden, hidden, dim]`.
    pub fn denoiser_shape(dim: usize, hidden: usize) -> Vec<usize> {
        vec![dim + 1, hidden, hidden, dim]
    }

    pub fn from_params(sizes: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) || params.len() != param_count(&sizes) {
            return Err(Error::InvalidShape(format!(
                "{} params do not fit layer sizes {sizes:?}",
                params.len()
            )));
        }
        Ok(Mlp { sizes, params })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Forward pass keeping every layer output (input included).
    fn forward_trace(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(input.to_vec());
        let mut off = 0;
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[off..off + n_in * n_out];
            let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            let x = &acts[l];
            let last = l + 1 == self.n_layers();
            let out: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    let z = b[o] + row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
                    if last {
                        z
                    } else {
                        z.tanh()
                    }
                })
                .collect();
            acts.push(out);
            off += n_in * n_out + n_out;
        }
        acts
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.forward_trace(input).pop().unwrap()
    }

    /// Adds `scale * d<out, upstream>/dparams` into `grads`.
    pub fn backward_into(&self, input: &[f64], upstream: &[f64], scale: f64, grads: &mut [f64]) {
        let acts = self.forward_trace(input);
        self.backward_from_trace(&acts, upstream, scale, grads);
    }

    fn backward_from_trace(
        &self,
        acts: &[Vec<f64>],
        upstream: &[f64],
        scale: f64,
        grads: &mut [f64],
    ) {
        debug_assert_eq!(grads.len(), self.params.len());
        let mut delta: Vec<f64> = upstream.iter().map(|u| u * scale).collect();
        let mut offsets = Vec::with_capacity(self.n_layers());
        let mut off = 0;
        for l in 0..self.n_layers() {
            offsets.push(off);
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        for l in (0..self.n_layers()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let x = &acts[l];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let gw = &mut grads[off + o * n_in..off + (o + 1) * n_in];
                for (g, v) in gw.iter_mut().zip(x) {
                    *g += d * v;
                }
                grads[off + n_in * n_out + o] += d;
            }
            if l > 0 {
                let w = &self.params[off..off + n_in * n_out];
                let mut prev = vec![0.0; n_in];
                for o in 0..n_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    for (p, a) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                        *p += d * a;
                    }
                }
                // x is the tanh output of the previous layer
                for (p, a) in prev.iter_mut().zip(x) {
                    *p *= 1.0 - a * a;
                }
                delta = prev;
            }
        }
    }

    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.params.len()];
        self.backward_into(input, upstream, 1.0, &mut g);
        g
    }
}

/// A denoiser `phi(x_t, t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Denoiser {
    Plain(Mlp),
    /// `D(x, t) = f(x, t) - f(-x, t)`, odd in `x` by construction.
    EquiReflect(Mlp),
    /// Torus denoiser equivariant to a global translation of every
    /// `k`-block: `D(x, t) = wrap(a + f(rel(x), t))` where `a` is the first
    /// block repeated and `rel(x)` the wrapped offsets from it.
    EquiTranslate(Mlp, usize),
}

/// Anchor coordinates (first block, tiled) and the wrapped offsets from them.
fn anchored(x: &[f64], k: usize) -> (Vec<f64>, Vec<f64>) {
    let anchor: Vec<f64> = (0..x.len()).map(|i| x[i % k]).collect();
    let rel = x
        .iter()
        .zip(&anchor)
        .map(|(v, a)| wrap_centered(v - a))
        .collect();
    (anchor, rel)
}

fn with_time(x: &[f64], t_norm: f64, sign: f64) -> Vec<f64> {
    let mut v: Vec<f64> = x.iter().map(|a| sign * a).collect();
    v.push(t_norm);
    v
}

impl Denoiser {
    /// Translation-equivariant torus denoiser; `block` must divide the point dimension.
    pub fn equi_translate(mlp: Mlp, block: usize) -> Result<Self> {
        let d = mlp.output_dim();
        if block == 0 || !d.is_multiple_of(block) {
            return Err(Error::InvalidShape(format!(
                "block {block} does not divide dimension {d}"
            )));
        }
        Ok(Denoiser::EquiTranslate(mlp, block))
    }

    pub fn mlp(&self) -> &Mlp {
        match self {
            Denoiser::Plain(m) | Denoiser::EquiReflect(m) | Denoiser::EquiTranslate(m, _) => m,
        }
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp {
        match self {
            Denoiser::Plain(m) | Denoiser::EquiReflect(m) | Denoiser::EquiTranslate(m, _) => m,
        }
    }

    pub fn dim(&self) -> usize {
        self.mlp().output_dim()
    }

    pub fn num_params(&self) -> usize {
        self.mlp().num_params()
    }

    /// Denoiser output for raw coordinates.
    pub fn forward_raw(&self, x: &[f64], t_norm: f64) -> Vec<f64> {
        match self {
            Denoiser::Plain(m) => m.forward(&with_time(x, t_norm, 1.0)),
            Denoiser::EquiReflect(m) => {
                let a = m.forward(&with_time(x, t_norm, 1.0));
                let b = m.forward(&with_time(x, t_norm, -1.0));
                a.iter().zip(&b).map(|(p, q)| p - q).collect()
            }
            Denoiser::EquiTranslate(m, k) => {
                let (anchor, rel) = anchored(x, *k);
                let f = m.forward(&with_time(&rel, t_norm, 1.0));
                f.iter()
                    .zip(&anchor)
                    .map(|(v, a)| wrap_unit(a + v))
                    .collect()
            }
        }
    }

    pub fn forward(&self, xt: &Point, t_norm: f64) -> Result<Point> {
        self.check_dim(xt.dim())?;
        Ok(Point {
            coords: self.forward_raw(&xt.coords, t_norm),
            space: xt.space,
        })
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        let m = self.mlp();
        if m.input_dim() != d + 1 || m.output_dim() != d {
            return Err(Error::InvalidShape(format!(
                "denoiser maps {} -> {} but point has dim {d}",
                m.input_dim() - 1,
                m.output_dim()
            )));
        }
        Ok(())
    }

    /// Adds `scale * d<phi(x, t), upstream>/dparams` into `grads`.
    pub fn backward_into(
        &self,
        x: &[f64],
        t_norm: f64,
        upstream: &[f64],
        scale: f64,
        grads: &mut [f64],
    ) {
        match self {
            Denoiser::Plain(m) => {
                m.backward_into(&with_time(x, t_norm, 1.0), upstream, scale, grads)
            }
            Denoiser::EquiReflect(m) => {
                m.backward_into(&with_time(x, t_norm, 1.0), upstream, scale, grads);
                m.backward_into(&with_time(x, t_norm, -1.0), upstream, -scale, grads);
            }
            Denoiser::EquiTranslate(m, k) => {
                let (_, rel) = anchored(x, *k);
                m.backward_into(&with_time(&rel, t_norm, 1.0), upstream, scale, grads);
            }
        }
    }

    /// Parameter gradient of `<phi(xt, t), upstream>`.
    pub fn backward(&self, xt: &Point, t_norm: f64, upstream: &Point) -> Result<Vec<f64>> {
        self.check_dim(xt.dim())?;
        if upstream.dim() != xt.dim() {
            return Err(Error::InvalidShape(format!(
                "upstream dim {} vs {}",
                upstream.dim(),
                xt.dim()
            )));
        }
        let mut g = vec![0.0; self.num_params()];
        self.backward_into(&xt.coords, t_norm, &upstream.coords, 1.0, &mut g);
        Ok(g)
    }

    /// Squared error `|r|^2` with `r = phi(x, t) - target`, adding
    /// `scale * d|r|^2/dparams` into `grads`. On the torus the residual is
    /// wrapped into `[-0.5, 0.5)`.
    pub fn regression_loss_grad(
        &self,
        x: &[f64],
        t_norm: f64,
        target: &[f64],
        space: Space,
        scale: f64,
        grads: &mut [f64],
    ) -> f64 {
        let residual = |out: &[f64]| -> Vec<f64> {
            out.iter()
                .zip(target)
                .map(|(o, y)| match space {
                    Space::Euclidean => o - y,
                    Space::Torus => wrap_centered(o - y),
                })
                .collect()
        };
        match self {
            Denoiser::Plain(m) => {
                let acts = m.forward_trace(&with_time(x, t_norm, 1.0));
                let r = residual(acts.last().unwrap());
                let up: Vec<f64> = r.iter().map(|v| 2.0 * v).collect();
                m.backward_from_trace(&acts, &up, scale, grads);
                r.iter().map(|v| v * v).sum()
            }
            Denoiser::EquiReflect(m) => {
                let pos = m.forward_trace(&with_time(x, t_norm, 1.0));
                let neg = m.forward_trace(&with_time(x, t_norm, -1.0));
                let out: Vec<f64> = pos
                    .last()
                    .unwrap()
                    .iter()
                    .zip(neg.last().unwrap())
                    .map(|(a, b)| a - b)
                    .collect();
                let r = residual(&out);
                let up: Vec<f64> = r.iter().map(|v| 2.0 * v).collect();
                m.backward_from_trace(&pos, &up, scale, grads);
                m.backward_from_trace(&neg, &up, -scale, grads);
                r.iter().map(|v| v * v).sum()
            }
            Denoiser::EquiTranslate(m, k) => {
                let (anchor, rel) = anchored(x, *k);
                let acts = m.forward_trace(&with_time(&rel, t_norm, 1.0));
                let out: Vec<f64> = acts
                    .last()
                    .unwrap()
                    .iter()
                    .zip(&anchor)
                    .map(|(v, a)| a + v)
                    .collect();
                let r = residual(&out);
                let up: Vec<f64> = r.iter().map(|v| 2.0 * v).collect();
                m.backward_from_trace(&acts, &up, scale, grads);
                r.iter().map(|v| v * v).sum()
            }
        }
    }

    // Checkpoint layout (little endian):
    //   b"ORBG" | u32 version | u8 kind (0 plain, 1 equi-reflect, 2 equi-translate)
    //   | [u32 block, kind 2 only] | u32 n_sizes | n_sizes x u32 | u64 n_params | n_params x f64
    const MAGIC: &'static [u8; 4] = b"ORBG";
    pub const CHECKPOINT_VERSION: u32 = 1;

    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        let m = self.mlp();
        w.write_all(Self::MAGIC)?;
        w.write_all(&Self::CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&[match self {
            Denoiser::Plain(_) => 0u8,
            Denoiser::EquiReflect(_) => 1u8,
            Denoiser::EquiTranslate(..) => 2u8,
        }])?;
        if let Denoiser::EquiTranslate(_, k) = self {
            w.write_all(&(*k as u32).to_le_bytes())?;
        }
        w.write_all(&(m.sizes.len() as u32).to_le_bytes())?;
        for &s in &m.sizes {
            w.write_all(&(s as u32).to_le_bytes())?;
        }
        w.write_all(&(m.params.len() as u64).to_le_bytes())?;
        for p in &m.params {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self> {
        fn take<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
            let mut b = [0u8; N];
            r.read_exact(&mut b)
                .map_err(|e| Error::InvalidInput(format!("truncated checkpoint: {e}")))?;
            Ok(b)
        }
        if &take::<4, _>(&mut r)? != Self::MAGIC {
            return Err(Error::InvalidInput("not a checkpoint file".into()));
        }
        let version = u32::from_le_bytes(take(&mut r)?);
        if version != Self::CHECKPOINT_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let kind = take::<1, _>(&mut r)?[0];
        let block = if kind == 2 {
            u32::from_le_bytes(take(&mut r)?) as usize
        } else {
            0
        };
        let n_sizes = u32::from_le_bytes(take(&mut r)?) as usize;
        if n_sizes > 64 {
            return Err(Error::InvalidInput(format!(
                "implausible layer count {n_sizes}"
            )));
        }
        let mut sizes = Vec::with_capacity(n_sizes);
        for _ in 0..n_sizes {
            sizes.push(u32::from_le_bytes(take(&mut r)?) as usize);
        }
        let n_params = u64::from_le_bytes(take(&mut r)?) as usize;
        if sizes.len() < 2 || n_params != param_count(&sizes) {
            return Err(Error::InvalidInput(
                "checkpoint header is inconsistent".into(),
            ));
        }
        let mut params = Vec::with_capacity(n_params);
        for _ in 0..n_params {
            params.push(f64::from_le_bytes(take(&mut r)?));
        }
        let mlp = Mlp::from_params(sizes, params)?;
        match kind {
            0 => Ok(Denoiser::Plain(mlp)),
            1 => Ok(Denoiser::EquiReflect(mlp)),
            2 => Denoiser::equi_translate(mlp, block),
            k => Err(Error::InvalidInput(format!("unknown denoiser kind {k}"))),
        }
    }
}
