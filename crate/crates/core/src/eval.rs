//! Sample-quality metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Point;

/// `sqrt(mean_i min_j |s_i - t_j|^2)`.
pub fn rmsd_to_nearest(samples: &[Point], targets: &[Point]) -> Result<f64> {
    if samples.is_empty() || targets.is_empty() {
        return Err(Error::InvalidInput(
            "samples and targets must be non-empty".into(),
        ));
    }
    let total: f64 = samples
        .iter()
        .map(|s| {
            targets
                .iter()
                .map(|t| {
                    s.coords
                        .iter()
                        .zip(&t.coords)
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok((total / samples.len() as f64).sqrt())
}

/// Repeats `atoms` cyclically until there are `n` values.
pub fn tile(atoms: &[f64], n: usize) -> Vec<f64> {
    atoms.iter().copied().cycle().take(n).collect()
}

/// 1D Wasserstein-2 between equal-size empirical measures via the sorted coupling.
pub fn wasserstein2_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::InvalidInput(format!(
            "sample sizes {} and {} differ or are zero",
            a.len(),
            b.len()
        )));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let sq: f64 = sa.iter().zip(&sb).map(|(x, y)| (x - y).powi(2)).sum();
    Ok((sq / a.len() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmsd: f64,
    pub w2: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// RMSD to the nearest atom and W2 against the atoms tiled to the sample count.
/// Samples must be one-dimensional.
pub fn evaluate_1d(samples: &[Point], atoms: &[f64], seed: u64) -> Result<Metrics> {
    if samples.iter().any(|s| s.dim() != 1) {
        return Err(Error::InvalidInput(
            "W2 is only defined here for 1D samples".into(),
        ));
    }
    let targets: Vec<Point> = atoms.iter().map(|&a| Point::euclidean(vec![a])).collect();
    let rmsd = rmsd_to_nearest(samples, &targets)?;
    let values: Vec<f64> = samples.iter().map(|s| s.coords[0]).collect();
    let w2 = wasserstein2_1d(&values, &tile(atoms, values.len()))?;
    Ok(Metrics {
        rmsd,
        w2,
        n_samples: samples.len(),
        seed,
    })
}
