//! Small statistics helpers used by the diagnostics.

use rand::Rng;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; 0 for fewer than two values.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Standard error of the mean.
pub fn std_error(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Paired bootstrap p-value for `Var(a) < Var(b)`.
///
/// Indices are resampled jointly, so `a[i]` and `b[i]` must come from the
/// same underlying draw. Returns `(1 + #{var(a*) >= var(b*)}) / (reps + 1)`.
pub fn bootstrap_variance_less_p<R: Rng + ?Sized>(
    a: &[f64],
    b: &[f64],
    reps: usize,
    rng: &mut R,
) -> f64 {
    assert_eq!(a.len(), b.len(), "paired samples must have equal length");
    let n = a.len();
    let mut ra = vec![0.0; n];
    let mut rb = vec![0.0; n];
    let mut hits = 0usize;
    for _ in 0..reps {
        for i in 0..n {
            let j = rng.random_range(0..n);
            ra[i] = a[j];
            rb[i] = b[j];
        }
        if variance(&ra) >= variance(&rb) {
            hits += 1;
        }
    }
    (1 + hits) as f64 / (reps + 1) as f64
}

/// Least-squares slope of `y` on `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let num: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}
