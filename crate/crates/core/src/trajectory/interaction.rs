use crate::data::{ExposureDesign, PairRecord};
use crate::error::{Error, Result};
use crate::linalg::{ols, OrthoBasis};
use crate::rng::{shuffle, StreamRng};
use crate::stats::quantiles;

use super::linear::ExposureBlock;
use super::options::FitOptions;
use super::{permutation_test, times_of, PermutationTest};

/// Piecewise-linear basis anchored at the largest time:
/// `T_max - T` followed by `(k_j - T)+` for each interior knot `k_j`.
/// Every basis function vanishes at `T_max`, which pins `φ(T_max) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseBasis {
    pub t_max: f64,
    pub knots: Vec<f64>,
}

impl PiecewiseBasis {
    pub fn names(&self) -> Vec<String> {
        std::iter::once("lin".to_string())
            .chain((1..=self.knots.len()).map(|j| format!("k{j}")))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.knots.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        std::iter::once(self.t_max - t)
            .chain(self.knots.iter().map(|&k| (k - t).max(0.0)))
            .collect()
    }

    /// `Σ coef_j b_j(t)`.
    pub fn combine(&self, coef: &[f64], t: f64) -> f64 {
        self.eval(t).iter().zip(coef).map(|(b, c)| b * c).sum()
    }

    pub fn columns(&self, times: &[f64]) -> Vec<Vec<f64>> {
        let mut cols = vec![Vec::with_capacity(times.len()); self.len()];
        for &t in times {
            for (c, v) in cols.iter_mut().zip(self.eval(t)) {
                c.push(v);
            }
        }
        cols
    }
}

/// Basis with `n_knots` interior knots at the `j / (n_knots + 1)` time quantiles.
pub fn piecewise_basis(times: &[f64], n_knots: usize) -> PiecewiseBasis {
    let t_max = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let levels: Vec<f64> = (1..=n_knots).map(|j| j as f64 / (n_knots + 1) as f64).collect();
    PiecewiseBasis {
        t_max,
        knots: quantiles(times, &levels),
    }
}

/// Model with the time effect φ on the piecewise-linear basis and no ψ block.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiBasisFit {
    pub alpha0: f64,
    pub alpha1: Vec<f64>,
    pub basis: PiecewiseBasis,
    pub phi_coef: Vec<f64>,
    pub rss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionFit {
    pub alpha0: f64,
    pub alpha1: Vec<f64>,
    pub basis: PiecewiseBasis,
    pub phi_coef: Vec<f64>,
    pub psi_coef: Vec<f64>,
    pub rss: f64,
    /// RSS of the φ-only model.
    pub rss_phi: f64,
    /// `rss_phi - rss`.
    pub statistic: f64,
    pub p_value: Option<f64>,
}

fn rank_error(names: Vec<String>, dropped: &[usize]) -> Error {
    Error::RankDeficient {
        columns: dropped.iter().map(|&k| names[k].clone()).collect(),
    }
}

pub(crate) struct InteractionProblem {
    pub basis: PiecewiseBasis,
    basis_cols: Vec<Vec<f64>>,
    phi_span: OrthoBasis,
    phi_names: Vec<String>,
}

impl InteractionProblem {
    pub fn new(block: &ExposureBlock, times: &[f64], options: &FitOptions) -> Result<Self> {
        let basis = piecewise_basis(times, options.knots);
        let basis_cols = basis.columns(times);
        let mut cols = block.active_columns();
        cols.extend(basis_cols.iter().map(Vec::as_slice));
        let mut phi_names: Vec<String> = block.active_names().iter().map(|s| s.to_string()).collect();
        phi_names.extend(basis.names().into_iter().map(|n| format!("phi.{n}")));
        if times.len() <= cols.len() {
            return Err(Error::InvalidArgument(format!(
                "{} pairs for {} coefficients",
                times.len(),
                cols.len()
            )));
        }
        let phi_span = OrthoBasis::full_rank(&cols).map_err(|d| rank_error(phi_names.clone(), &d))?;
        Ok(Self {
            basis,
            basis_cols,
            phi_span,
            phi_names,
        })
    }

    fn columns<'a>(&'a self, block: &'a ExposureBlock) -> Vec<&'a [f64]> {
        let mut cols = block.active_columns();
        cols.extend(self.basis_cols.iter().map(Vec::as_slice));
        cols
    }

    pub fn phi_residual(&self, y: &[f64]) -> Vec<f64> {
        let mut r = y.to_vec();
        self.phi_span.residualize(&mut r);
        r
    }

    /// RSS reduction from adding `E2 ψ(T)` for the given case labels.
    pub fn statistic(&self, r_y: &[f64], labels: &[bool], scratch: &mut Vec<Vec<f64>>) -> f64 {
        scratch.resize(self.basis_cols.len(), Vec::new());
        for (w, b) in scratch.iter_mut().zip(&self.basis_cols) {
            w.clear();
            w.extend(b.iter().zip(labels).map(|(v, &e)| if e { *v } else { 0.0 }));
            self.phi_span.residualize(w);
        }
        let refs: Vec<&[f64]> = scratch.iter().map(Vec::as_slice).collect();
        OrthoBasis::spanning(&refs).projected_sq(r_y)
    }
}

fn carcinogen_labels(design: &ExposureDesign) -> Result<(String, Vec<bool>)> {
    let col = design.carcinogen_case.as_ref().ok_or_else(|| {
        Error::InvalidArgument("the interaction model needs a case-only carcinogen exposure column".into())
    })?;
    let exposed = col.case.iter().filter(|&&e| e).count();
    if exposed == 0 || exposed == col.case.len() {
        return Err(Error::SingleLevel(col.name.clone()));
    }
    Ok((col.name.clone(), col.case.clone()))
}

pub(crate) fn fit_phi_basis_with(delta_g: &[f64], block: &ExposureBlock, times: &[f64], options: &FitOptions) -> Result<PhiBasisFit> {
    let problem = InteractionProblem::new(block, times, options)?;
    let cols = problem.columns(block);
    let fit = ols(&cols, delta_g).map_err(|d| rank_error(problem.phi_names.clone(), &d))?;
    let p = block.active_columns().len();
    let (alpha0, alpha1) = block.expand(&fit.coef[..p]);
    Ok(PhiBasisFit {
        alpha0,
        alpha1,
        basis: problem.basis,
        phi_coef: fit.coef[p..].to_vec(),
        rss: fit.rss,
    })
}

pub(crate) fn fit_interaction_with(
    delta_g: &[f64],
    block: &ExposureBlock,
    times: &[f64],
    labels: &[bool],
    options: &FitOptions,
) -> Result<InteractionFit> {
    let problem = InteractionProblem::new(block, times, options)?;
    let psi_cols: Vec<Vec<f64>> = problem
        .basis_cols
        .iter()
        .map(|b| b.iter().zip(labels).map(|(v, &e)| if e { *v } else { 0.0 }).collect())
        .collect();
    let mut cols = problem.columns(block);
    cols.extend(psi_cols.iter().map(Vec::as_slice));
    let mut names = problem.phi_names.clone();
    names.extend(problem.basis.names().into_iter().map(|n| format!("psi.{n}")));
    if times.len() <= cols.len() {
        return Err(Error::InvalidArgument(format!(
            "{} pairs for {} coefficients",
            times.len(),
            cols.len()
        )));
    }
    let full = ols(&cols, delta_g).map_err(|d| rank_error(names, &d))?;
    let phi_only = ols(&problem.columns(block), delta_g).map_err(|d| rank_error(problem.phi_names.clone(), &d))?;
    let r_y = problem.phi_residual(delta_g);
    let mut scratch = Vec::new();
    let statistic = problem.statistic(&r_y, labels, &mut scratch);
    let p = block.active_columns().len();
    let k = problem.basis.len();
    let (alpha0, alpha1) = block.expand(&full.coef[..p]);
    Ok(InteractionFit {
        alpha0,
        alpha1,
        phi_coef: full.coef[p..p + k].to_vec(),
        psi_coef: full.coef[p + k..].to_vec(),
        basis: problem.basis,
        rss: full.rss.min(phi_only.rss),
        rss_phi: phi_only.rss,
        statistic,
        p_value: None,
    })
}

pub(crate) fn test_interaction_with(
    delta_g: &[f64],
    block: &ExposureBlock,
    times: &[f64],
    labels: &[bool],
    options: &FitOptions,
    fit: &InteractionFit,
    rng: &mut StreamRng,
) -> Result<PermutationTest> {
    let problem = InteractionProblem::new(block, times, options)?;
    let r_y = problem.phi_residual(delta_g);
    let mut permuted = labels.to_vec();
    let mut scratch = Vec::new();
    Ok(permutation_test(fit.statistic, options.n_permutations, rng, |rng| {
        shuffle(rng, &mut permuted);
        problem.statistic(&r_y, &permuted, &mut scratch)
    }))
}

/// Basis-expanded model with a non-parametric time effect and no exposure
/// interaction; the φ-only sub-model of [`fit_interaction`].
pub fn fit_phi_basis(delta_g: &[f64], design: &ExposureDesign, pairs: &[PairRecord], options: &FitOptions) -> Result<PhiBasisFit> {
    options.validate()?;
    super::hinge::check_inputs(delta_g, design, pairs)?;
    let block = ExposureBlock::new(design)?;
    fit_phi_basis_with(delta_g, &block, &times_of(pairs), options)
}

/// Joint least squares of ΔG on `[1, ΔE, B(T), E2_case B(T)]`.
pub fn fit_interaction(
    delta_g: &[f64],
    design: &ExposureDesign,
    pairs: &[PairRecord],
    options: &FitOptions,
) -> Result<InteractionFit> {
    options.validate()?;
    super::hinge::check_inputs(delta_g, design, pairs)?;
    let (_, labels) = carcinogen_labels(design)?;
    let block = ExposureBlock::new(design)?;
    fit_interaction_with(delta_g, &block, &times_of(pairs), &labels, options)
}

/// Permutation test of `ψ = 0`, permuting the case carcinogen labels across
/// pairs with everything else held fixed.
pub fn test_interaction(
    delta_g: &[f64],
    design: &ExposureDesign,
    pairs: &[PairRecord],
    options: &FitOptions,
) -> Result<PermutationTest> {
    let fit = fit_interaction(delta_g, design, pairs, options)?;
    let (_, labels) = carcinogen_labels(design)?;
    let block = ExposureBlock::new(design)?;
    let mut rng = super::scan::permutation_rng(options.seed);
    test_interaction_with(delta_g, &block, &times_of(pairs), &labels, options, &fit, &mut rng)
}

pub(crate) fn labels_for(design: &ExposureDesign) -> Result<Vec<bool>> {
    carcinogen_labels(design).map(|(_, l)| l)
}
