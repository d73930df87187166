use crate::data::{ExposureDesign, PairRecord};
use crate::error::{Error, Result};
use crate::linalg::{axpy, ols, sum_sq};
use crate::rng::{shuffle, StreamRng};

use super::linear::{fit_linear_block, ExposureBlock};
use super::options::FitOptions;
use super::pava::{Direction, PavaScratch};
use super::{permutation_test, times_of, PermutationTest};

#[derive(Debug, Clone, PartialEq)]
pub struct IsotonicFit {
    pub alpha0: f64,
    pub alpha1: Vec<f64>,
    /// Pair indices sorted by ascending time to diagnosis (ties by index).
    pub order: Vec<usize>,
    /// Fitted time effect along `order`; monotone in `direction`, last value 0.
    pub phi: Vec<f64>,
    pub direction: Direction,
    pub rss: f64,
    /// RSS of the exposures-only model.
    pub rss_linear: f64,
    /// `rss_linear` minus the backfitted RSS.
    pub statistic: f64,
    pub iterations: usize,
    /// RSS after each backfitting sweep of the chosen direction, starting
    /// from the exposures-only fit.
    pub rss_trace: Vec<f64>,
    pub p_value: Option<f64>,
}

impl IsotonicFit {
    /// Time effect aligned with the input pair order.
    pub fn phi_by_pair(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.phi.len()];
        for (k, &i) in self.order.iter().enumerate() {
            out[i] = self.phi[k];
        }
        out
    }
}

pub(crate) fn time_order(times: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]).then(a.cmp(&b)));
    order
}

#[derive(Debug, Default)]
pub(crate) struct Workspace {
    phi: Vec<f64>,
    resid: Vec<f64>,
    u_sorted: Vec<f64>,
    phi_sorted: Vec<f64>,
    pava: PavaScratch,
}

pub(crate) struct Backfit {
    pub rss: f64,
    pub converged: bool,
    pub last_delta: f64,
    pub iterations: usize,
}

/// Alternates least squares on the exposure block with PAVA of the partial
/// residuals along `order`. On return `work.phi` holds φ in pair order (not
/// anchored).
pub(crate) fn backfit(
    y: &[f64],
    block: &ExposureBlock,
    order: &[usize],
    direction: Direction,
    options: &FitOptions,
    work: &mut Workspace,
    mut trace: Option<&mut Vec<f64>>,
) -> Backfit {
    let n = y.len();
    work.phi.clear();
    work.phi.resize(n, 0.0);
    work.u_sorted.resize(n, 0.0);
    work.phi_sorted.resize(n, 0.0);
    work.resid.clear();
    work.resid.extend_from_slice(y);
    block.basis.residualize(&mut work.resid);
    let mut prev = sum_sq(&work.resid);
    if let Some(t) = trace.as_deref_mut() {
        t.push(prev);
    }
    let mut last_delta = f64::INFINITY;
    for iter in 1..=options.backfit_max_iter {
        // resid <- (y - φ) minus its projection, so y - projection = resid + φ.
        for i in 0..n {
            work.resid[i] = y[i] - work.phi[i];
        }
        block.basis.residualize(&mut work.resid);
        for (k, &i) in order.iter().enumerate() {
            work.u_sorted[k] = work.resid[i] + work.phi[i];
        }
        work.pava.run(&work.u_sorted, None, direction, &mut work.phi_sorted);
        let mut rss = 0.0;
        for (k, &i) in order.iter().enumerate() {
            work.phi[i] = work.phi_sorted[k];
            let e = work.u_sorted[k] - work.phi_sorted[k];
            rss += e * e;
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(rss);
        }
        last_delta = prev - rss;
        prev = rss;
        if last_delta.abs() < options.backfit_tol {
            return Backfit {
                rss,
                converged: true,
                last_delta,
                iterations: iter,
            };
        }
    }
    Backfit {
        rss: prev,
        converged: false,
        last_delta,
        iterations: options.backfit_max_iter,
    }
}

/// Exact least squares on the block partition found by backfitting: solves
/// jointly for the exposure coefficients and one level per block (last block
/// pinned to 0). Returns `(alpha, phi_sorted, rss)` when the block levels keep
/// the required ordering.
fn polish(
    y: &[f64],
    block: &ExposureBlock,
    order: &[usize],
    phi_sorted: &[f64],
    direction: Direction,
) -> Option<(Vec<f64>, Vec<f64>, f64)> {
    let n = y.len();
    let mut starts = vec![0];
    for k in 1..n {
        if phi_sorted[k] != phi_sorted[k - 1] {
            starts.push(k);
        }
    }
    let n_blocks = starts.len();
    let mut indicators: Vec<Vec<f64>> = Vec::with_capacity(n_blocks - 1);
    for b in 0..n_blocks - 1 {
        let mut col = vec![0.0; n];
        for &i in &order[starts[b]..starts[b + 1]] {
            col[i] = 1.0;
        }
        indicators.push(col);
    }
    let mut columns = block.active_columns();
    columns.extend(indicators.iter().map(Vec::as_slice));
    let fit = ols(&columns, y).ok()?;
    let p = columns.len() - indicators.len();
    let mut levels: Vec<f64> = fit.coef[p..].to_vec();
    levels.push(0.0);
    // Levels that tie in the exact solution may come back out of order by a
    // rounding error; larger violations mean the partition is wrong.
    let scale = levels.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let violation = levels
        .windows(2)
        .map(|w| match direction {
            Direction::NonDecreasing => w[0] - w[1],
            Direction::NonIncreasing => w[1] - w[0],
        })
        .fold(0.0f64, f64::max);
    if violation > 1e-9 * scale {
        return None;
    }
    for b in (0..n_blocks - 1).rev() {
        levels[b] = match direction {
            Direction::NonDecreasing => levels[b].min(levels[b + 1]),
            Direction::NonIncreasing => levels[b].max(levels[b + 1]),
        };
    }
    let mut phi = vec![0.0; n];
    for b in 0..n_blocks {
        let end = if b + 1 < n_blocks { starts[b + 1] } else { n };
        phi[starts[b]..end].fill(levels[b]);
    }
    let coef = fit.coef[..p].to_vec();
    let mut resid = y.to_vec();
    for (c, col) in coef.iter().zip(&columns[..p]) {
        axpy(-c, col, &mut resid);
    }
    for (k, &i) in order.iter().enumerate() {
        resid[i] -= phi[k];
    }
    Some((coef, phi, sum_sq(&resid)))
}

const MAX_POLISH: usize = 20;

fn same_blocks(a: &[f64], b: &[f64]) -> bool {
    (1..a.len()).all(|k| (a[k] != a[k - 1]) == (b[k] != b[k - 1]))
}

struct DirectionFit {
    direction: Direction,
    backfit: Backfit,
    trace: Vec<f64>,
    alpha0: f64,
    alpha1: Vec<f64>,
    phi_sorted: Vec<f64>,
    rss: f64,
}

fn fit_direction(y: &[f64], block: &ExposureBlock, order: &[usize], direction: Direction, options: &FitOptions) -> DirectionFit {
    let mut work = Workspace::default();
    let mut trace = Vec::new();
    let backfit = backfit(y, block, order, direction, options, &mut work, Some(&mut trace));
    let phi_sorted: Vec<f64> = order.iter().map(|&i| work.phi[i]).collect();
    let partial: Vec<f64> = y.iter().zip(&work.phi).map(|(a, b)| a - b).collect();
    let (mut alpha0, alpha1) = block.coefficients(&partial);
    // Anchor φ at the largest time; the shift moves into the intercept.
    let anchor = phi_sorted.last().copied().unwrap_or(0.0);
    let mut phi_sorted: Vec<f64> = phi_sorted.iter().map(|v| v - anchor).collect();
    alpha0 += anchor;
    let mut alpha1 = alpha1;
    let mut rss = backfit.rss;
    // Alternate exact solves on a block partition with one PAVA step from the
    // solved point until the partition stops changing.
    let mut partition = phi_sorted.clone();
    let mut scratch = PavaScratch::default();
    let mut u_sorted = vec![0.0; y.len()];
    let mut next = vec![0.0; y.len()];
    for _ in 0..MAX_POLISH {
        let Some((coef, phi, polished_rss)) = polish(y, block, order, &partition, direction) else {
            break;
        };
        if polished_rss > rss {
            break;
        }
        let (a0, a1) = block.expand(&coef);
        alpha0 = a0;
        alpha1 = a1;
        phi_sorted = phi;
        rss = polished_rss;
        let mut u = y.to_vec();
        for (c, col) in coef.iter().zip(block.active_columns()) {
            axpy(-c, col, &mut u);
        }
        for (k, &i) in order.iter().enumerate() {
            u_sorted[k] = u[i];
        }
        scratch.run(&u_sorted, None, direction, &mut next);
        if same_blocks(&next, &partition) {
            break;
        }
        partition.clone_from(&next);
    }
    DirectionFit {
        direction,
        backfit,
        trace,
        alpha0,
        alpha1,
        phi_sorted,
        rss,
    }
}

pub(crate) fn fit_isotonic_with(delta_g: &[f64], block: &ExposureBlock, times: &[f64], options: &FitOptions) -> Result<IsotonicFit> {
    let order = time_order(times);
    let linear = fit_linear_block(delta_g, block);
    let dec = fit_direction(delta_g, block, &order, Direction::NonIncreasing, options);
    let inc = fit_direction(delta_g, block, &order, Direction::NonDecreasing, options);
    let statistic = linear.rss - dec.backfit.rss.min(inc.backfit.rss);
    let best = if inc.rss < dec.rss { inc } else { dec };
    if !best.backfit.converged {
        return Err(Error::NonConvergence {
            last_delta: best.backfit.last_delta,
        });
    }
    Ok(IsotonicFit {
        alpha0: best.alpha0,
        alpha1: best.alpha1,
        order,
        phi: best.phi_sorted,
        direction: best.direction,
        rss: best.rss.min(linear.rss),
        rss_linear: linear.rss,
        statistic,
        iterations: best.backfit.iterations,
        rss_trace: best.trace,
        p_value: None,
    })
}

/// Statistic for a given ordering of pairs by time: exposures-only RSS minus
/// the better of the two monotone backfits.
pub(crate) fn isotonic_statistic(
    delta_g: &[f64],
    block: &ExposureBlock,
    order: &[usize],
    rss_linear: f64,
    options: &FitOptions,
    work: &mut Workspace,
) -> f64 {
    let dec = backfit(delta_g, block, order, Direction::NonIncreasing, options, work, None).rss;
    let inc = backfit(delta_g, block, order, Direction::NonDecreasing, options, work, None).rss;
    rss_linear - dec.min(inc)
}

pub(crate) fn test_isotonic_with(
    delta_g: &[f64],
    block: &ExposureBlock,
    options: &FitOptions,
    fit: &IsotonicFit,
    rng: &mut StreamRng,
) -> PermutationTest {
    let mut work = Workspace::default();
    // Permuting times across pairs is the same as drawing a uniformly random
    // assignment of pairs to time ranks.
    let mut order = fit.order.clone();
    permutation_test(fit.statistic, options.n_permutations, rng, |rng| {
        shuffle(rng, &mut order);
        isotonic_statistic(delta_g, block, &order, fit.rss_linear, options, &mut work)
    })
}

/// Exposure-adjusted isotonic fit by backfitting, in the better of the two
/// monotone directions.
pub fn fit_isotonic_adjusted(
    delta_g: &[f64],
    design: &ExposureDesign,
    pairs: &[PairRecord],
    options: &FitOptions,
) -> Result<IsotonicFit> {
    options.validate()?;
    super::hinge::check_inputs(delta_g, design, pairs)?;
    let block = ExposureBlock::new(design)?;
    fit_isotonic_with(delta_g, &block, &times_of(pairs), options)
}

/// Permutation test of a monotone time effect (times permuted across pairs).
pub fn test_isotonic(
    delta_g: &[f64],
    design: &ExposureDesign,
    pairs: &[PairRecord],
    options: &FitOptions,
) -> Result<PermutationTest> {
    let fit = fit_isotonic_adjusted(delta_g, design, pairs, options)?;
    let block = ExposureBlock::new(design)?;
    let mut rng = super::scan::permutation_rng(options.seed);
    Ok(test_isotonic_with(delta_g, &block, options, &fit, &mut rng))
}
