//! Symmetry groups: elements, their action on points, and proposal
//! distributions `nu_t` over elements with evaluable log densities.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::{Point, Space};
use crate::schedule::NoiseSchedule;
use crate::torus::{wrap_centered, wrap_unit, wrapped_normal_log_pdf};

const UNIT_TOL: f64 = 1e-12;

/// Which group, with the size parameters needed to build its identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupKind {
    /// `x -> +-x` on the whole vector.
    Reflection,
    /// SO(3) acting on every consecutive 3-block.
    Rotation,
    /// Global translation on the torus; the offset has `dim` components and
    /// is added to every `dim`-block.
    TorusTranslation { dim: usize },
    /// Permutation of `n` equal-size blocks.
    Permutation { n: usize },
}

/// Unit quaternion `w + xi + yj + zk`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        Quaternion {
            w: self.w / n,
            x: self.x / n,
            y: self.y / n,
            z: self.z / n,
        }
    }

    pub fn conjugate(self) -> Self {
        Quaternion {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Hamilton product `self * r`.
    pub fn hamilton(self, r: Quaternion) -> Quaternion {
        let a = self;
        Quaternion {
            w: a.w * r.w - a.x * r.x - a.y * r.y - a.z * r.z,
            x: a.w * r.x + a.x * r.w + a.y * r.z - a.z * r.y,
            y: a.w * r.y - a.x * r.z + a.y * r.w + a.z * r.x,
            z: a.w * r.z + a.x * r.y - a.y * r.x + a.z * r.w,
        }
    }

    /// Rotation angle in `[0, pi]`.
    pub fn angle(&self) -> f64 {
        2.0 * self.w.abs().min(1.0).acos()
    }

    /// Row-major rotation matrix.
    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        let Quaternion { w, x, y, z } = *self;
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }

    /// Haar-uniform draw (Shoemake's construction).
    pub fn random_uniform<R: Rng + ?Sized>(rng: &mut R) -> Quaternion {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let u3: f64 = rng.random();
        let a = (1.0 - u1).sqrt();
        let b = u1.sqrt();
        Quaternion {
            w: a * (2.0 * PI * u2).sin(),
            x: a * (2.0 * PI * u2).cos(),
            y: b * (2.0 * PI * u3).sin(),
            z: b * (2.0 * PI * u3).cos(),
        }
        .normalized()
    }
}

/// A single group element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GroupElement {
    Reflection {
        sign: i8,
    },
    Rotation(Quaternion),
    TorusTranslation {
        offset: Vec<f64>,
    },
    /// Block `i` of the input is moved to block `map[i]` of the output.
    Permutation {
        map: Vec<usize>,
    },
}

impl GroupElement {
    pub fn reflection(sign: i8) -> Result<Self> {
        if sign != 1 && sign != -1 {
            return Err(Error::InvalidAction(format!(
                "reflection sign must be +-1, got {sign}"
            )));
        }
        Ok(GroupElement::Reflection { sign })
    }

    pub fn rotation(q: Quaternion) -> Result<Self> {
        if (q.norm() - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidAction(format!(
                "quaternion norm {} is not 1",
                q.norm()
            )));
        }
        Ok(GroupElement::Rotation(q))
    }

    /// Translation by `offset`, wrapped into `[0, 1)`.
    pub fn torus_translation(offset: Vec<f64>) -> Self {
        GroupElement::TorusTranslation {
            offset: offset.into_iter().map(wrap_unit).collect(),
        }
    }

    pub fn permutation(map: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; map.len()];
        for &m in &map {
            if m >= map.len() || seen[m] {
                return Err(Error::InvalidAction(format!("{map:?} is not a bijection")));
            }
            seen[m] = true;
        }
        Ok(GroupElement::Permutation { map })
    }

    pub fn identity(kind: GroupKind) -> Self {
        match kind {
            GroupKind::Reflection => GroupElement::Reflection { sign: 1 },
            GroupKind::Rotation => GroupElement::Rotation(Quaternion::IDENTITY),
            GroupKind::TorusTranslation { dim } => GroupElement::TorusTranslation {
                offset: vec![0.0; dim],
            },
            GroupKind::Permutation { n } => GroupElement::Permutation {
                map: (0..n).collect(),
            },
        }
    }

    pub fn kind(&self) -> GroupKind {
        match self {
            GroupElement::Reflection { .. } => GroupKind::Reflection,
            GroupElement::Rotation(_) => GroupKind::Rotation,
            GroupElement::TorusTranslation { offset } => {
                GroupKind::TorusTranslation { dim: offset.len() }
            }
            GroupElement::Permutation { map } => GroupKind::Permutation { n: map.len() },
        }
    }

    pub fn is_identity(&self) -> bool {
        self.approx_eq(&GroupElement::identity(self.kind()), UNIT_TOL)
    }

    /// Equality up to `tol`; rotations compare up to quaternion sign and
    /// translations up to wrap-around.
    pub fn approx_eq(&self, other: &GroupElement, tol: f64) -> bool {
        match (self, other) {
            (GroupElement::Reflection { sign: a }, GroupElement::Reflection { sign: b }) => a == b,
            (GroupElement::Rotation(a), GroupElement::Rotation(b)) => {
                let dot = a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
                (dot.abs() - 1.0).abs() <= tol
            }
            (
                GroupElement::TorusTranslation { offset: a },
                GroupElement::TorusTranslation { offset: b },
            ) => {
                a.len() == b.len()
                    && a.iter()
                        .zip(b)
                        .all(|(x, y)| wrap_centered(x - y).abs() <= tol)
            }
            (GroupElement::Permutation { map: a }, GroupElement::Permutation { map: b }) => a == b,
            _ => false,
        }
    }

    /// Applies the element to a point.
    pub fn act(&self, x: &Point) -> Result<Point> {
        let d = x.dim();
        match self {
            GroupElement::Reflection { sign } => {
                let s = *sign as f64;
                let coords = x.coords.iter().map(|v| s * v).collect();
                Ok(match x.space {
                    Space::Euclidean => Point::euclidean(coords),
                    Space::Torus => Point::torus(coords),
                })
            }
            GroupElement::Rotation(q) => {
                if x.space != Space::Euclidean || !d.is_multiple_of(3) {
                    return Err(Error::InvalidAction(format!(
                        "rotation needs a Euclidean point with dimension divisible by 3, got {:?} of dim {d}",
                        x.space
                    )));
                }
                let m = q.to_matrix();
                let mut out = vec![0.0; d];
                for (src, dst) in x.coords.chunks_exact(3).zip(out.chunks_exact_mut(3)) {
                    for r in 0..3 {
                        dst[r] = m[r][0] * src[0] + m[r][1] * src[1] + m[r][2] * src[2];
                    }
                }
                Ok(Point::euclidean(out))
            }
            GroupElement::TorusTranslation { offset } => {
                let k = offset.len();
                if x.space != Space::Torus || k == 0 || !d.is_multiple_of(k) {
                    return Err(Error::InvalidAction(format!(
                        "translation by a {k}-vector needs a torus point with dimension divisible by {k}"
                    )));
                }
                let coords = x
                    .coords
                    .iter()
                    .enumerate()
                    .map(|(i, v)| wrap_unit(v + offset[i % k]))
                    .collect();
                Ok(Point {
                    coords,
                    space: Space::Torus,
                })
            }
            GroupElement::Permutation { map } => {
                let n = map.len();
                if n == 0 || !d.is_multiple_of(n) {
                    return Err(Error::InvalidAction(format!(
                        "permutation of {n} blocks needs dimension divisible by {n}, got {d}"
                    )));
                }
                let b = d / n;
                let mut out = vec![0.0; d];
                for (i, &m) in map.iter().enumerate() {
                    out[m * b..(m + 1) * b].copy_from_slice(&x.coords[i * b..(i + 1) * b]);
                }
                Ok(Point {
                    coords: out,
                    space: x.space,
                })
            }
        }
    }

    /// `self * other`, i.e. apply `other` first.
    pub fn compose(&self, other: &GroupElement) -> Result<GroupElement> {
        match (self, other) {
            (GroupElement::Reflection { sign: a }, GroupElement::Reflection { sign: b }) => {
                Ok(GroupElement::Reflection { sign: a * b })
            }
            (GroupElement::Rotation(a), GroupElement::Rotation(b)) => {
                Ok(GroupElement::Rotation(a.hamilton(*b).normalized()))
            }
            (
                GroupElement::TorusTranslation { offset: a },
                GroupElement::TorusTranslation { offset: b },
            ) if a.len() == b.len() => Ok(GroupElement::torus_translation(
                a.iter().zip(b).map(|(x, y)| x + y).collect(),
            )),
            (GroupElement::Permutation { map: a }, GroupElement::Permutation { map: b })
                if a.len() == b.len() =>
            {
                Ok(GroupElement::Permutation {
                    map: b.iter().map(|&j| a[j]).collect(),
                })
            }
            _ => Err(Error::InvalidAction(format!(
                "cannot compose {:?} with {:?}",
                self.kind(),
                other.kind()
            ))),
        }
    }

    pub fn invert(&self) -> GroupElement {
        match self {
            GroupElement::Reflection { sign } => GroupElement::Reflection { sign: *sign },
            GroupElement::Rotation(q) => GroupElement::Rotation(q.conjugate()),
            GroupElement::TorusTranslation { offset } => {
                GroupElement::torus_translation(offset.iter().map(|v| -v).collect())
            }
            GroupElement::Permutation { map } => {
                let mut inv = vec![0; map.len()];
                for (i, &m) in map.iter().enumerate() {
                    inv[m] = i;
                }
                GroupElement::Permutation { map: inv }
            }
        }
    }
}

/// Applies `g` to every point.
pub fn act_all(g: &GroupElement, xs: &[Point]) -> Result<Vec<Point>> {
    xs.iter().map(|x| g.act(x)).collect()
}

/// `{+1, -1}`.
pub fn reflection_group() -> Vec<GroupElement> {
    vec![
        GroupElement::Reflection { sign: 1 },
        GroupElement::Reflection { sign: -1 },
    ]
}

/// The cyclic subgroup `{0, 1/m, ..., (m-1)/m}` of translations, applied
/// along the diagonal of a `dim`-dimensional offset.
pub fn cyclic_translations(order: usize, dim: usize) -> Vec<GroupElement> {
    (0..order)
        .map(|k| GroupElement::TorusTranslation {
            offset: vec![k as f64 / order as f64; dim],
        })
        .collect()
}

/// All `n!` permutations, identity first.
pub fn symmetric_group(n: usize) -> Vec<GroupElement> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<GroupElement>) {
        if prefix.len() == used.len() {
            out.push(GroupElement::Permutation {
                map: prefix.clone(),
            });
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

/// Checks that `elements` is closed under composition and inversion.
pub fn is_closed(elements: &[GroupElement]) -> bool {
    let contains = |g: &GroupElement| elements.iter().any(|e| e.approx_eq(g, 1e-9));
    elements.iter().all(|a| {
        contains(&a.invert())
            && elements.iter().all(|b| match a.compose(b) {
                Ok(c) => contains(&c),
                Err(_) => false,
            })
    })
}

/// Time-dependent bandwidth `sigma_g(t)` for near-identity proposals.
#[derive(Debug, Clone, PartialEq)]
pub enum Bandwidth {
    Constant(f64),
    /// `factor * sigma_t` read from a noise schedule.
    NoiseScaled {
        factor: f64,
        sigmas: Arc<[f64]>,
    },
}

impl Bandwidth {
    pub fn noise_scaled(factor: f64, schedule: &NoiseSchedule) -> Self {
        Bandwidth::NoiseScaled {
            factor,
            sigmas: schedule.sigmas().into(),
        }
    }

    pub fn at(&self, t: usize) -> f64 {
        match self {
            Bandwidth::Constant(s) => *s,
            Bandwidth::NoiseScaled { factor, sigmas } => factor * sigmas[t.min(sigmas.len() - 1)],
        }
    }
}

/// How group elements are proposed.
#[derive(Debug, Clone, PartialEq)]
pub enum SamplerMode {
    /// Haar measure (uniform over finite groups).
    Uniform,
    /// Wrapped normal around the identity translation; torus only.
    NearIdentityWrappedNormal(Bandwidth),
    /// Uniform over an explicit list of distinct elements.
    FiniteEnumeration(Vec<GroupElement>),
}

/// The proposal `nu_t` over group elements.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSampler {
    kind: GroupKind,
    mode: SamplerMode,
    include_identity: bool,
}

impl GroupSampler {
    pub fn new(kind: GroupKind, mode: SamplerMode, include_identity: bool) -> Result<Self> {
        match &mode {
            SamplerMode::Uniform => {}
            SamplerMode::NearIdentityWrappedNormal(_) => {
                if !matches!(kind, GroupKind::TorusTranslation { .. }) {
                    return Err(Error::InvalidSampler(format!(
                        "near-identity wrapped normal proposals need torus translations, got {kind:?}"
                    )));
                }
            }
            SamplerMode::FiniteEnumeration(list) => {
                if list.is_empty() {
                    return Err(Error::InvalidSampler("empty element list".into()));
                }
                if list.iter().any(|g| g.kind() != kind) {
                    return Err(Error::InvalidSampler(
                        "element kind differs from sampler kind".into(),
                    ));
                }
                for (i, a) in list.iter().enumerate() {
                    if list[..i].iter().any(|b| a.approx_eq(b, UNIT_TOL)) {
                        return Err(Error::InvalidSampler(format!("duplicate element {a:?}")));
                    }
                }
                if include_identity && !list.iter().any(GroupElement::is_identity) {
                    return Err(Error::InvalidSampler(
                        "identity requested but not enumerated".into(),
                    ));
                }
            }
        }
        Ok(GroupSampler {
            kind,
            mode,
            include_identity,
        })
    }

    pub fn uniform(kind: GroupKind) -> Self {
        GroupSampler {
            kind,
            mode: SamplerMode::Uniform,
            include_identity: true,
        }
    }

    pub fn enumeration(elements: Vec<GroupElement>) -> Result<Self> {
        let kind = elements
            .first()
            .map(GroupElement::kind)
            .ok_or_else(|| Error::InvalidSampler("empty element list".into()))?;
        GroupSampler::new(kind, SamplerMode::FiniteEnumeration(elements), true)
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn mode(&self) -> &SamplerMode {
        &self.mode
    }

    pub fn include_identity(&self) -> bool {
        self.include_identity
    }

    pub fn with_include_identity(mut self, include: bool) -> Self {
        self.include_identity = include;
        self
    }

    /// Draws one element from `nu_t`.
    pub fn sample<R: Rng + ?Sized>(&self, t: usize, rng: &mut R) -> GroupElement {
        match &self.mode {
            SamplerMode::Uniform => match self.kind {
                GroupKind::Reflection => GroupElement::Reflection {
                    sign: if rng.random::<bool>() { 1 } else { -1 },
                },
                GroupKind::Rotation => GroupElement::Rotation(Quaternion::random_uniform(rng)),
                GroupKind::TorusTranslation { dim } => GroupElement::TorusTranslation {
                    offset: (0..dim).map(|_| rng.random::<f64>()).collect(),
                },
                GroupKind::Permutation { n } => {
                    let mut map: Vec<usize> = (0..n).collect();
                    map.shuffle(rng);
                    GroupElement::Permutation { map }
                }
            },
            SamplerMode::NearIdentityWrappedNormal(bw) => {
                let sigma = bw.at(t);
                let dim = match self.kind {
                    GroupKind::TorusTranslation { dim } => dim,
                    _ => unreachable!("checked at construction"),
                };
                let offset = (0..dim)
                    .map(|_| {
                        let e: f64 = rng.sample(StandardNormal);
                        wrap_unit(sigma * e)
                    })
                    .collect();
                GroupElement::TorusTranslation { offset }
            }
            SamplerMode::FiniteEnumeration(list) => list[rng.random_range(0..list.len())].clone(),
        }
    }

    /// `log nu_t(g)`. Continuous Haar measures report 0, since the constant
    /// cancels after self-normalization.
    pub fn log_density(&self, g: &GroupElement, t: usize) -> Result<f64> {
        if g.kind() != self.kind {
            return Err(Error::NotInSupport);
        }
        match &self.mode {
            SamplerMode::Uniform => Ok(match self.kind {
                GroupKind::Reflection => -(2f64.ln()),
                GroupKind::Permutation { n } => -(1..=n).map(|k| (k as f64).ln()).sum::<f64>(),
                GroupKind::Rotation | GroupKind::TorusTranslation { .. } => 0.0,
            }),
            SamplerMode::NearIdentityWrappedNormal(bw) => {
                let sigma = bw.at(t);
                match g {
                    GroupElement::TorusTranslation { offset } => Ok(offset
                        .iter()
                        .map(|&m| wrapped_normal_log_pdf(m, sigma))
                        .sum()),
                    _ => Err(Error::NotInSupport),
                }
            }
            SamplerMode::FiniteEnumeration(list) => {
                if list.iter().any(|e| e.approx_eq(g, 1e-9)) {
                    Ok(-(list.len() as f64).ln())
                } else {
                    Err(Error::NotInSupport)
                }
            }
        }
    }
}
