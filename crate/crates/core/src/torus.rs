//! Helpers for the unit torus and the wrapped normal density.

use std::f64::consts::PI;

/// Maps `x` into `[0, 1)`.
pub fn wrap_unit(x: f64) -> f64 {
    let r = x - x.floor();
    // x.floor() can round so that r == 1.0 for tiny negative x
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Maps `x` into `[-0.5, 0.5)`.
pub fn wrap_centered(x: f64) -> f64 {
    let r = wrap_unit(x + 0.5) - 0.5;
    if r >= 0.5 {
        r - 1.0
    } else {
        r
    }
}

/// Number of integer shifts per side kept in the wrapped sum for bandwidth `sigma`.
///
/// After centering, the nearest omitted image sits at least `8 sigma + 1.5`
/// away, which bounds the dropped relative mass by `exp(-32)`.
pub fn truncation_for(sigma: f64) -> i64 {
    ((8.0 * sigma).ceil() as i64 + 1).max(3)
}

/// Log density of the 1D wrapped normal with zero mean at offset `delta`,
/// keeping images `z` with `|z| <= trunc`.
pub fn wrapped_normal_log_pdf_truncated(delta: f64, sigma: f64, trunc: i64) -> f64 {
    debug_assert!(sigma > 0.0);
    let d = wrap_centered(delta);
    let inv = 1.0 / (2.0 * sigma * sigma);
    // the z = 0 image is always the largest after centering
    let peak = -d * d * inv;
    let mut acc = 0.0;
    for z in -trunc..=trunc {
        let s = d + z as f64;
        acc += (-s * s * inv - peak).exp();
    }
    peak + acc.ln() - 0.5 * (2.0 * PI * sigma * sigma).ln()
}

/// Log density of the 1D wrapped normal using [`truncation_for`].
pub fn wrapped_normal_log_pdf(delta: f64, sigma: f64) -> f64 {
    wrapped_normal_log_pdf_truncated(delta, sigma, truncation_for(sigma))
}
