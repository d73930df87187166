use crate::data::{ExposureDesign, PairRecord};
use crate::error::{Error, Result};
use crate::linalg::{dot, ols, sum_sq};
use crate::rng::{shuffle, StreamRng};

use super::linear::{fit_linear_block, ExposureBlock};
use super::options::{FitOptions, HingeForm};
use super::{permutation_test, times_of, PermutationTest};

/// Minimum number of pairs on the active side of a candidate changepoint.
const MIN_ACTIVE: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct HingeFit {
    pub alpha0: f64,
    pub alpha1: Vec<f64>,
    pub alpha2: f64,
    pub t_hat: f64,
    pub rss: f64,
    /// RSS of the nested model without the time term.
    pub rss_linear: f64,
    /// `rss_linear - rss`, profiled over the grid.
    pub statistic: f64,
    pub form: HingeForm,
    pub p_value: Option<f64>,
}

impl HingeFit {
    pub fn fitted(&self, block_columns: &[Vec<f64>], times: &[f64]) -> Vec<f64> {
        times
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let exposure: f64 = self
                    .alpha1
                    .iter()
                    .zip(&block_columns[1..])
                    .map(|(a, c)| a * c[i])
                    .sum();
                self.alpha0 + exposure + self.alpha2 * self.form.value(self.t_hat, t)
            })
            .collect()
    }
}

/// Grid of admissible changepoints for a fixed multiset of times. The set is
/// invariant under permutation of the times across pairs.
pub(crate) struct HingeGrid {
    pub points: Vec<f64>,
    pub form: HingeForm,
}

impl HingeGrid {
    pub fn new(times: &[f64], options: &FitOptions) -> Result<Self> {
        let first = times
            .first()
            .ok_or_else(|| Error::DegenerateGrid("no pairs".into()))?;
        if times.iter().all(|t| t == first) {
            return Err(Error::DegenerateGrid("all times to diagnosis are identical".into()));
        }
        let form = options.hinge_form;
        let points: Vec<f64> = options
            .changepoint_grid
            .resolve(times)
            .into_iter()
            .filter(|&c| times.iter().filter(|&&t| form.is_active(c, t)).count() >= MIN_ACTIVE)
            .collect();
        if points.is_empty() {
            return Err(Error::DegenerateGrid(format!(
                "no grid point leaves {MIN_ACTIVE} pairs on the active side"
            )));
        }
        Ok(Self { points, form })
    }

    /// Largest reduction in RSS over the grid, given the exposure-block
    /// residual `r_y`. Ties go to the smaller changepoint.
    pub fn profile(&self, block: &ExposureBlock, r_y: &[f64], times: &[f64], h: &mut Vec<f64>) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (k, &c) in self.points.iter().enumerate() {
            h.clear();
            h.extend(times.iter().map(|&t| self.form.value(c, t)));
            let norm0 = sum_sq(h);
            block.basis.residualize(h);
            let den = sum_sq(h);
            if norm0 == 0.0 || den <= 1e-12 * norm0 {
                continue;
            }
            let num = dot(h, r_y);
            let s = num * num / den;
            if best.map_or(true, |(_, b)| s > b) {
                best = Some((k, s));
            }
        }
        best
    }
}

pub(crate) fn fit_hinge_with(delta_g: &[f64], block: &ExposureBlock, times: &[f64], options: &FitOptions) -> Result<HingeFit> {
    let grid = HingeGrid::new(times, options)?;
    let linear = fit_linear_block(delta_g, block);
    let r_y = block.residual(delta_g);
    let mut h = Vec::with_capacity(times.len());
    let (k, statistic) = grid
        .profile(block, &r_y, times, &mut h)
        .ok_or_else(|| Error::DegenerateGrid("hinge regressor is collinear with the exposures at every grid point".into()))?;
    let t_hat = grid.points[k];
    let h: Vec<f64> = times.iter().map(|&t| grid.form.value(t_hat, t)).collect();
    let mut columns = block.active_columns();
    columns.push(&h);
    let fit = ols(&columns, delta_g).map_err(|_| Error::RankDeficient {
        columns: vec![format!("hinge@{t_hat}")],
    })?;
    let p = fit.coef.len();
    let (alpha0, alpha1) = block.expand(&fit.coef[..p - 1]);
    Ok(HingeFit {
        alpha0,
        alpha1,
        alpha2: fit.coef[p - 1],
        t_hat,
        rss: fit.rss.min(linear.rss),
        rss_linear: linear.rss,
        statistic,
        form: grid.form,
        p_value: None,
    })
}

pub(crate) fn test_hinge_with(
    delta_g: &[f64],
    block: &ExposureBlock,
    times: &[f64],
    options: &FitOptions,
    fit: &HingeFit,
    rng: &mut StreamRng,
) -> Result<PermutationTest> {
    let grid = HingeGrid::new(times, options)?;
    let r_y = block.residual(delta_g);
    let mut permuted = times.to_vec();
    let mut h = Vec::with_capacity(times.len());
    Ok(permutation_test(fit.statistic, options.n_permutations, rng, |rng| {
        shuffle(rng, &mut permuted);
        grid.profile(block, &r_y, &permuted, &mut h).map_or(0.0, |(_, s)| s)
    }))
}

pub(crate) fn check_inputs(delta_g: &[f64], design: &ExposureDesign, pairs: &[PairRecord]) -> Result<()> {
    if delta_g.len() != pairs.len() || design.n_pairs() != pairs.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} expression values, {} exposure rows, {} pairs",
            delta_g.len(),
            design.n_pairs(),
            pairs.len()
        )));
    }
    Ok(())
}

/// Hinge model with the changepoint profiled over `options.changepoint_grid`.
pub fn fit_hinge(delta_g: &[f64], design: &ExposureDesign, pairs: &[PairRecord], options: &FitOptions) -> Result<HingeFit> {
    options.validate()?;
    check_inputs(delta_g, design, pairs)?;
    let block = ExposureBlock::new(design)?;
    fit_hinge_with(delta_g, &block, &times_of(pairs), options)
}

/// Permutation test of `α2 = 0`, permuting times across pairs with
/// `(ΔG, ΔE)` held fixed. The permutation stream is seeded by `options.seed`.
pub fn test_hinge(
    delta_g: &[f64],
    design: &ExposureDesign,
    pairs: &[PairRecord],
    options: &FitOptions,
) -> Result<PermutationTest> {
    options.validate()?;
    check_inputs(delta_g, design, pairs)?;
    let block = ExposureBlock::new(design)?;
    let times = times_of(pairs);
    let fit = fit_hinge_with(delta_g, &block, &times, options)?;
    let mut rng = super::scan::permutation_rng(options.seed);
    test_hinge_with(delta_g, &block, &times, options, &fit, &mut rng)
}
