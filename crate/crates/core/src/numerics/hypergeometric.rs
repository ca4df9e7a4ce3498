//! Gaussian hypergeometric function ₂F₁(a, b; c; z) for real z < 1.

use crate::{Error, Result};

const MAX_TERMS: usize = 10_000;
const TERM_TOLERANCE: f64 = 1e-16;
const RESCALE_ABOVE: f64 = 1e250;

/// Power series in `z ∈ [0, 1)` returned as `(mantissa, ln_scale)` so that
/// the value is `mantissa · e^{ln_scale}`. Rescaling keeps huge sums finite.
fn series(a: f64, b: f64, c: f64, z: f64) -> Result<(f64, f64)> {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut ln_scale = 0.0;
    if z == 0.0 {
        return Ok((sum, ln_scale));
    }
    for n in 0..MAX_TERMS {
        let nf = n as f64;
        term *= (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * z;
        sum += term;
        if term == 0.0 || (term / sum).abs() < TERM_TOLERANCE {
            return Ok((sum, ln_scale));
        }
        if sum.abs() > RESCALE_ABOVE {
            ln_scale += RESCALE_ABOVE.ln();
            sum /= RESCALE_ABOVE;
            term /= RESCALE_ABOVE;
        }
    }
    Err(Error::Convergence(format!(
        "2F1({a}, {b}; {c}; {z}) series did not converge within {MAX_TERMS} terms"
    )))
}

fn check_args(c: f64, z: f64) -> Result<()> {
    if !(z < 1.0) || !z.is_finite() {
        return Err(Error::Domain(format!("2F1 requires z < 1, got {z}")));
    }
    if !(c > 0.0) {
        return Err(Error::Domain(format!("2F1 requires c > 0, got {c}")));
    }
    Ok(())
}

/// ₂F₁(a, b; c; z) for `c > 0` and `z < 1`.
///
/// Negative arguments go through the Pfaff transformation
/// `₂F₁(a, b; c; z) = (1 − z)^{−a} ₂F₁(a, c − b; c; z / (z − 1))`,
/// which maps them into `(0, 1)` where the power series converges.
pub fn gauss_2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    check_args(c, z)?;
    if z < 0.0 {
        let w = z / (z - 1.0);
        let (m, s) = series(a, c - b, c, w)?;
        return Ok(m * (s - a * (-z).ln_1p()).exp());
    }
    let (m, s) = series(a, b, c, z)?;
    Ok(m * s.exp())
}

/// ln ₂F₁(a, b; c; z) when the function is positive, e.g. `a, b, c > 0` and
/// `0 ≤ z < 1`. Stays finite where the value itself overflows.
pub fn ln_gauss_2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    check_args(c, z)?;
    let (m, s, prefactor) = if z < 0.0 {
        let w = z / (z - 1.0);
        let (m, s) = series(a, c - b, c, w)?;
        (m, s, -a * (-z).ln_1p())
    } else {
        let (m, s) = series(a, b, c, z)?;
        (m, s, 0.0)
    };
    if m <= 0.0 {
        return Err(Error::Domain(format!("2F1({a}, {b}; {c}; {z}) is not positive")));
    }
    Ok(m.ln() + s + prefactor)
}
