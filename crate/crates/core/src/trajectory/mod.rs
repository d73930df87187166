//! Per-gene trajectory models of case-minus-control expression against time
//! to diagnosis, their permutation tests, and the genome-wide scan.
//!
//! All three models share the exposure block `[1, ΔE]`:
//!
//! * hinge: `ΔG = α0 + <α1, ΔE> + α2 h_t(T)` with `t` profiled over a grid;
//! * isotonic: `ΔG = α0 + <α1, ΔE> + φ(T)` with `φ` monotone, `φ(T_max) = 0`;
//! * interaction: `ΔG = α0 + <α1, ΔE> + φ(T) + E2_case ψ(T)` with `φ`, `ψ`
//!   on a shared piecewise-linear basis.

mod hinge;
mod interaction;
mod isotonic;
mod linear;
mod options;
mod pava;
mod scan;

pub use hinge::{fit_hinge, test_hinge, HingeFit};
pub use interaction::{
    fit_interaction, fit_phi_basis, piecewise_basis, test_interaction, InteractionFit, PhiBasisFit,
    PiecewiseBasis,
};
pub use isotonic::{fit_isotonic_adjusted, test_isotonic, IsotonicFit};
pub use linear::{fit_linear, ExposureBlock, LinearFit};
pub use options::{ChangepointGrid, FitOptions, HingeForm};
pub use pava::{pava, Direction};
pub use scan::{gene_seed, scan_genes, TrajectoryModel};

use crate::rng::StreamRng;

/// Result of a permutation test: `p = (1 + #{S_perm >= S_obs}) / (B + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PermutationTest {
    pub statistic: f64,
    pub p_value: f64,
    pub n_permutations: usize,
}

pub(crate) fn permutation_test(
    observed: f64,
    n_permutations: usize,
    rng: &mut StreamRng,
    mut permuted_statistic: impl FnMut(&mut StreamRng) -> f64,
) -> PermutationTest {
    let exceed = (0..n_permutations)
        .filter(|_| permuted_statistic(rng) >= observed)
        .count();
    PermutationTest {
        statistic: observed,
        p_value: (1 + exceed) as f64 / (n_permutations + 1) as f64,
        n_permutations,
    }
}

pub(crate) fn times_of(pairs: &[crate::data::PairRecord]) -> Vec<f64> {
    pairs.iter().map(|p| p.time_to_diagnosis).collect()
}
