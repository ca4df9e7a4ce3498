//! Numerical building blocks shared by the models.

mod gamma;
mod hypergeometric;
mod quadrature;
mod special;

pub use gamma::{gamma_reparam_gradient, sample_gamma, GammaParams};
pub use hypergeometric::{gauss_2f1, ln_gauss_2f1};
pub use quadrature::integrate;
pub use special::{
    digamma, ln_gamma, ln_one_minus_exp_neg, log_sum_exp, regularized_gamma_p, regularized_gamma_q, sigmoid,
    softplus, softplus_inverse, trigamma,
};

pub(crate) use special::{digamma_unchecked, ln_gamma_unchecked, trigamma_unchecked};
