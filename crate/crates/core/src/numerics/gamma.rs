//! Gamma distribution: sampling, CDF inversion and implicit reparameterization.

use rand::Rng;
use rand_distr::{Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use super::special::{gamma_p_unchecked, gamma_q_unchecked, ln_gamma_unchecked};
use crate::{Error, Result};

/// Shape/rate parameterization of a Gamma distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    pub shape: f64,
    pub rate: f64,
}

impl GammaParams {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite()) || !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::Domain(format!(
                "Gamma parameters must be positive and finite, got shape={shape}, rate={rate}"
            )));
        }
        Ok(Self { shape, rate })
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn variance(&self) -> f64 {
        self.shape / (self.rate * self.rate)
    }

    pub fn ln_pdf(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.shape * self.rate.ln() + (self.shape - 1.0) * z.ln() - self.rate * z - ln_gamma_unchecked(self.shape)
    }

    pub fn cdf(&self, z: f64) -> f64 {
        if z <= 0.0 {
            0.0
        } else {
            gamma_p_unchecked(self.shape, z * self.rate)
        }
    }

    /// Inverse CDF at probability `u ∈ (0, 1)`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        Ok(unit_gamma_quantile(self.shape, u)? / self.rate)
    }
}

/// Marsaglia–Tsang draw from Gamma(shape, 1).
fn standard_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape < 1.0 {
        let boosted = standard_gamma(shape + 1.0, rng);
        let u: f64 = rng.sample(Open01);
        return boosted * u.powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u: f64 = rng.sample(Open01);
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// One Gamma(shape, rate) variate.
pub fn sample_gamma<R: Rng + ?Sized>(params: GammaParams, rng: &mut R) -> f64 {
    standard_gamma(params.shape, rng) / params.rate
}

/// Unit-rate Gamma quantile: Newton iterations on ln x, safeguarded by bisection.
fn unit_gamma_quantile(shape: f64, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!("quantile level must lie in (0, 1), got {u}")));
    }
    let lower_tail = u <= 0.5;
    let target = if lower_tail { u } else { 1.0 - u };
    let lg = ln_gamma_unchecked(shape);
    // increasing in y = ln x
    let residual = |y: f64| {
        let x = y.exp();
        if lower_tail {
            gamma_p_unchecked(shape, x) - target
        } else {
            target - gamma_q_unchecked(shape, x)
        }
    };

    let mut y = if shape < 1.0 {
        ((u.ln() + shape.ln() + lg) / shape).min(shape.ln())
    } else {
        shape.ln()
    };
    let (mut lo, mut hi) = (y - 1.0, y + 1.0);
    while residual(lo) > 0.0 {
        lo -= 2.0 * (hi - lo);
        if lo < -745.0 {
            lo = -745.0;
            break;
        }
    }
    while residual(hi) < 0.0 {
        hi += 2.0 * (hi - lo);
        if hi > 709.0 {
            return Err(Error::Convergence(format!("Gamma({shape}) quantile at {u} overflows")));
        }
    }
    y = y.clamp(lo, hi);
    for _ in 0..300 {
        let f = residual(y);
        if f == 0.0 {
            return Ok(y.exp());
        }
        if f > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        let x = y.exp();
        let slope = (shape * y - x - lg).exp();
        let mut next = y - f / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - y).abs() <= 4.0 * f64::EPSILON * y.abs().max(1.0) || hi - lo <= f64::EPSILON * y.abs().max(1.0) {
            return Ok(next.exp());
        }
        y = next;
    }
    Ok(y.exp())
}

/// Implicit reparameterization gradients of a Gamma sample.
///
/// With `F(z; shape, rate)` the CDF held fixed, `dz/dshape = −(∂F/∂shape) / f(z)`
/// and `dz/drate = −z / rate`. The shape derivative of the CDF is a central
/// difference of the regularized incomplete gamma with step
/// `1e−4 · max(1, shape)`, taken on the tail (P or Q) that `z` lies in.
pub fn gamma_reparam_gradient(params: GammaParams, z: f64) -> Result<(f64, f64)> {
    let GammaParams { shape, rate } = params;
    let x = z * rate;
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::GradientInstability(format!("sample {z} outside the open support")));
    }
    let ln_density = (shape - 1.0) * x.ln() - x - ln_gamma_unchecked(shape);
    if !(ln_density > -700.0) || !ln_density.is_finite() {
        return Err(Error::GradientInstability(format!(
            "Gamma({shape}, {rate}) density underflows at sample {z}"
        )));
    }
    let h = (1e-4 * shape.max(1.0)).min(0.5 * shape);
    let dcdf_dshape = if x < shape + 1.0 {
        (gamma_p_unchecked(shape + h, x) - gamma_p_unchecked(shape - h, x)) / (2.0 * h)
    } else {
        -(gamma_q_unchecked(shape + h, x) - gamma_q_unchecked(shape - h, x)) / (2.0 * h)
    };
    let dx_dshape = -dcdf_dshape / ln_density.exp();
    Ok((dx_dshape / rate, -z / rate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn rate_gradient_is_scaling_identity() {
        let (_, d_rate) = gamma_reparam_gradient(GammaParams::new(2.0, 4.0).unwrap(), 2.0).unwrap();
        assert!((d_rate - -0.5).abs() < 1e-15);
    }

    #[test]
    fn shape_gradient_matches_quantile_derivative() {
        // With u = F(z) held fixed, dz/dshape equals the derivative of the quantile.
        for &(shape, rate, u) in &[(3.0, 1.0, 0.4), (0.4, 2.0, 0.2), (12.0, 0.5, 0.93), (0.9, 1.0, 0.999)] {
            let p = GammaParams::new(shape, rate).unwrap();
            let z = p.quantile(u).unwrap();
            let (d_shape, _) = gamma_reparam_gradient(p, z).unwrap();
            let h = 1e-5 * shape;
            let up = GammaParams::new(shape + h, rate).unwrap().quantile(u).unwrap();
            let dn = GammaParams::new(shape - h, rate).unwrap().quantile(u).unwrap();
            let fd = (up - dn) / (2.0 * h);
            assert!((d_shape - fd).abs() < 1e-6 * fd.abs().max(1e-3), "{shape} {u}: {d_shape} vs {fd}");
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &shape in &[0.05, 0.5, 1.0, 3.3, 40.0] {
            let p = GammaParams::new(shape, 1.7).unwrap();
            for &u in &[1e-6, 0.01, 0.3, 0.5, 0.77, 0.999] {
                let z = p.quantile(u).unwrap();
                let back = p.cdf(z);
                assert!((back - u).abs() < 1e-12 * u.max(1e-3), "shape={shape} u={u}: {back}");
            }
        }
    }

    #[test]
    fn density_underflow_is_reported() {
        let p = GammaParams::new(2.0, 1.0).unwrap();
        assert!(matches!(gamma_reparam_gradient(p, 2000.0), Err(Error::GradientInstability(_))));
        assert!(matches!(gamma_reparam_gradient(p, 0.0), Err(Error::GradientInstability(_))));
    }

    #[test]
    fn sampling_is_deterministic_per_stream() {
        let p = GammaParams::new(0.3, 2.0).unwrap();
        let draw = |seed| {
            let mut rng = substream(seed, 0, 0);
            (0..50).map(|_| sample_gamma(p, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
        assert!(draw(9).iter().all(|&z| z >= 0.0));
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(GammaParams::new(0.0, 1.0).is_err());
        assert!(GammaParams::new(1.0, -2.0).is_err());
        assert!(GammaParams::new(f64::NAN, 1.0).is_err());
    }
}
