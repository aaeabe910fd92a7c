//! Experiment configuration.
//!
//! A config file is TOML with the sections `[dataset]`, `[schedule]`,
//! `[group]`, `[model]`, `[train]` and `[sample]`. Every key has a default,
//! so an empty file describes the 1D reflection toy.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{Dataset, TargetMode};
use crate::groups::{
    cyclic_translations, reflection_group, symmetric_group, Bandwidth, GroupKind, GroupSampler,
    SamplerMode,
};
use crate::kernels::ForwardKernel;
use crate::net::{Denoiser, Mlp, DEFAULT_HIDDEN};
use crate::point::{Point, Space};
use crate::rng::child_rng;
use crate::schedule::NoiseSchedule;
use crate::train::{AdamConfig, Problem, TrainConfig, Variant};

/// Environment variable that overrides `train.seed`.
pub const SEED_ENV: &str = "ORBITGRAD_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceName {
    Euclidean,
    Torus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub space: SpaceName,
    pub points: Vec<Vec<f64>>,
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection {
            space: SpaceName::Euclidean,
            points: vec![vec![1.0]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// Variance-preserving, linear betas.
    Vp,
    /// `alpha = 1`, geometric sigma.
    Ve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub kind: ScheduleKind,
    pub steps: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        ScheduleSection {
            kind: ScheduleKind::Vp,
            steps: 1000,
            sigma_min: 0.005,
            sigma_max: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupName {
    Reflection,
    Rotation,
    Torus,
    Permutation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    /// Sum over the whole (finite) group.
    Exact,
    /// Self-normalized estimate with Haar-uniform proposals.
    Uniform,
    /// Self-normalized estimate with near-identity wrapped-normal proposals.
    WrappedNormal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroupSection {
    pub kind: GroupName,
    pub mode: ModeName,
    /// Offset dimension for torus translations.
    pub dim: usize,
    /// Number of permuted blocks.
    pub n: usize,
    /// Order of the cyclic translation subgroup used by `exact` on the torus.
    pub order: usize,
    /// Draws per orbit estimate for sampled modes.
    pub samples: usize,
    /// `sigma_g(t) = bandwidth_factor * sigma_t`.
    pub bandwidth_factor: f64,
    pub include_identity: bool,
}

impl Default for GroupSection {
    fn default() -> Self {
        GroupSection {
            kind: GroupName::Reflection,
            mode: ModeName::Exact,
            dim: 1,
            n: 2,
            order: 8,
            samples: 32,
            bandwidth_factor: 2.0,
            include_identity: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Plain,
    EquiReflect,
    /// Torus only; equivariant to translations of `group.dim`-blocks.
    EquiTranslate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    pub hidden: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            kind: ModelKind::EquiReflect,
            hidden: DEFAULT_HIDDEN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub variant: String,
    pub iterations: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    pub log_every: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainSection {
            variant: "orbdiff".into(),
            iterations: 20_000,
            batch_size: 64,
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            seed: 0,
            log_every: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSection {
    pub n: usize,
    pub antithetic: bool,
}

impl Default for SampleSection {
    fn default() -> Self {
        SampleSection {
            n: 2000,
            antithetic: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSection,
    pub schedule: ScheduleSection,
    pub group: GroupSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub sample: SampleSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// Applies `ORBITGRAD_SEED` when set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.train.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("{SEED_ENV}={v} is not a u64")))?;
        }
        Ok(())
    }

    pub fn space(&self) -> Space {
        match self.dataset.space {
            SpaceName::Euclidean => Space::Euclidean,
            SpaceName::Torus => Space::Torus,
        }
    }

    pub fn build_schedule(&self) -> Result<NoiseSchedule> {
        let s = &self.schedule;
        match s.kind {
            ScheduleKind::Vp => NoiseSchedule::vp_linear(s.steps),
            ScheduleKind::Ve => NoiseSchedule::ve_geometric(s.steps, s.sigma_min, s.sigma_max),
        }
    }

    pub fn build_dataset(&self) -> Result<Dataset> {
        let space = self.space();
        let pts = self
            .dataset
            .points
            .iter()
            .map(|p| match space {
                Space::Euclidean => Point::euclidean(p.clone()),
                Space::Torus => Point::torus(p.clone()),
            })
            .collect();
        Dataset::new(pts).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn group_kind(&self) -> GroupKind {
        match self.group.kind {
            GroupName::Reflection => GroupKind::Reflection,
            GroupName::Rotation => GroupKind::Rotation,
            GroupName::Torus => GroupKind::TorusTranslation {
                dim: self.group.dim,
            },
            GroupName::Permutation => GroupKind::Permutation { n: self.group.n },
        }
    }

    /// Orbit-target mode for the configured group with `mode` substituted.
    pub fn target_mode(&self, mode: &ModeName) -> Result<TargetMode> {
        let g = &self.group;
        let kind = self.group_kind();
        match mode {
            ModeName::Exact => {
                let elements = match g.kind {
                    GroupName::Reflection => reflection_group(),
                    GroupName::Torus => cyclic_translations(g.order, g.dim),
                    GroupName::Permutation if g.n <= 6 => symmetric_group(g.n),
                    GroupName::Permutation => {
                        return Err(Error::InvalidConfig(
                            "exact permutations are limited to n <= 6".into(),
                        ))
                    }
                    GroupName::Rotation => {
                        return Err(Error::InvalidConfig(
                            "rotations have no exact mode; use `uniform`".into(),
                        ))
                    }
                };
                Ok(TargetMode::Exact(elements))
            }
            ModeName::Uniform => Ok(TargetMode::Snis {
                sampler: GroupSampler::new(kind, SamplerMode::Uniform, g.include_identity)?,
                n: g.samples,
            }),
            ModeName::WrappedNormal => {
                let bw = Bandwidth::noise_scaled(g.bandwidth_factor, &self.build_schedule()?);
                Ok(TargetMode::Snis {
                    sampler: GroupSampler::new(
                        kind,
                        SamplerMode::NearIdentityWrappedNormal(bw),
                        g.include_identity,
                    )
                    .map_err(|e| Error::InvalidConfig(e.to_string()))?,
                    n: g.samples,
                })
            }
        }
    }

    /// Parses a variant name. `orbdiff` uses the configured mode;
    /// `orbdiff_exact`, `orbdiff_u` and `orbdiff_wn` force one.
    pub fn variant(&self, name: &str) -> Result<Variant> {
        match name {
            "baseline" => Ok(Variant::Baseline),
            "augment" | "aug" => Ok(Variant::Augment),
            "orbdiff" => Ok(Variant::OrbDiff(self.target_mode(&self.group.mode)?)),
            "orbdiff_exact" => Ok(Variant::OrbDiff(self.target_mode(&ModeName::Exact)?)),
            "orbdiff_u" | "orbdiff_uniform" => {
                Ok(Variant::OrbDiff(self.target_mode(&ModeName::Uniform)?))
            }
            "orbdiff_wn" => Ok(Variant::OrbDiff(
                self.target_mode(&ModeName::WrappedNormal)?,
            )),
            other => Err(Error::InvalidConfig(format!("unknown variant `{other}`"))),
        }
    }

    pub fn build_problem(&self) -> Result<Problem> {
        let schedule = self.build_schedule()?;
        let kernel = match self.space() {
            Space::Euclidean => ForwardKernel::gaussian(schedule),
            Space::Torus => ForwardKernel::wrapped_normal(schedule),
        };
        Ok(Problem {
            dataset: self.build_dataset()?,
            kernel,
            augment: GroupSampler::uniform(self.group_kind()),
        })
    }

    /// Freshly initialized denoiser drawn from the `("init", 0)` stream.
    pub fn init_denoiser(&self, dim: usize) -> Result<Denoiser> {
        if self.model.hidden == 0 {
            return Err(Error::InvalidConfig("model.hidden must be >= 1".into()));
        }
        let mut rng = child_rng(self.train.seed, "init", 0);
        let mlp = Mlp::new(&Mlp::denoiser_shape(dim, self.model.hidden), &mut rng);
        Ok(match self.model.kind {
            ModelKind::Plain => Denoiser::Plain(mlp),
            ModelKind::EquiReflect => Denoiser::EquiReflect(mlp),
            ModelKind::EquiTranslate => {
                if self.space() != Space::Torus {
                    return Err(Error::InvalidConfig(
                        "equi_translate needs a torus dataset".into(),
                    ));
                }
                Denoiser::equi_translate(mlp, self.group.dim)
                    .map_err(|e| Error::InvalidConfig(e.to_string()))?
            }
        })
    }

    pub fn train_config(&self, variant: Variant) -> Result<TrainConfig> {
        let t = &self.train;
        let cfg = TrainConfig {
            variant,
            iterations: t.iterations,
            batch_size: t.batch_size,
            adam: AdamConfig {
                lr: t.lr,
                beta1: t.beta1,
                beta2: t.beta2,
                eps: t.eps,
            },
            seed: t.seed,
            log_every: t.log_every,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
