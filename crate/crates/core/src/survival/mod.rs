//! Nested case-control survival comparators: per-gene conditional logistic
//! regression (the 1:1 matched Cox partial likelihood), its penalized
//! multi-gene version, and a kernel-weighted time-varying coefficient.
//!
//! Covariates are always oriented case minus control, so
//! `log L(β) = -Σ ln(1 + exp(-<β, ΔX_i>))`.

mod clogit;
mod loglik;
mod penalized;
mod timevarying;

pub use clogit::{fit_clogit, scan_clogit, ClogitFit, CLOGIT_EXTRAS};
pub use loglik::{ncc_loglik, NccLoglik};
pub use penalized::{
    default_lambda_grid, fit_clogit_penalized, fit_clogit_penalized_with, lambda_max, penalized_objective,
    PenalizedOptions, PenalizedPath, Penalty,
};
pub use timevarying::{epanechnikov, fit_clogit_timevarying, scan_clogit_timevarying, TimeVaryingFit, MIN_WINDOW_PAIRS};
