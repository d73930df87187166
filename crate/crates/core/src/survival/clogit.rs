use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::data::{AnalysisDataset, ExposureDesign};
use crate::error::{Error, Result};
use crate::linalg::OrthoBasis;
use crate::results::{FitStatus, GeneFitResult, ScanResults};
use crate::stats::chi2_1_sf;

use super::loglik::{evaluate, value_from_eta, Columns};

const MAX_ITER: usize = 50;
const GRAD_TOL: f64 = 1e-8;
/// Coefficient norm beyond which the likelihood is taken to have no finite maximiser.
const SEPARATION_NORM: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ClogitFit {
    /// Gene coefficient first, then the adjustment covariates.
    pub beta: Vec<f64>,
    pub loglik: f64,
    /// `-n ln 2`, the value at `β = 0`.
    pub loglik_null: f64,
    pub score_statistic: f64,
    /// Score-test p-value for the gene coefficient.
    pub p_value: f64,
    pub converged: bool,
    pub separated: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Newton {
    pub beta: Vec<f64>,
    pub loglik: f64,
    pub converged: bool,
    pub separated: bool,
    pub iterations: usize,
}

fn newton_direction(gradient: &[f64], hessian: &[Vec<f64>]) -> Vec<f64> {
    let p = gradient.len();
    let info = DMatrix::from_fn(p, p, |a, b| -hessian[a][b]);
    let g = DVector::from_column_slice(gradient);
    if let Some(ch) = info.clone().cholesky() {
        return ch.solve(&g).iter().copied().collect();
    }
    // Flat directions (near separation): fall back to a ridged system.
    let scale = (0..p).map(|k| info[(k, k)]).fold(0.0, f64::max).max(1e-300);
    let ridged = info + DMatrix::identity(p, p) * (1e-8 * scale);
    match ridged.cholesky() {
        Some(ch) => ch.solve(&g).iter().copied().collect(),
        None => gradient.to_vec(),
    }
}

/// Damped Newton ascent on the (optionally weighted) log partial likelihood.
pub(crate) fn newton(x: Columns, weights: Option<&[f64]>, start: Vec<f64>) -> Newton {
    let mut beta = start;
    let mut eta = Vec::new();
    let mut trial = vec![0.0; beta.len()];
    let mut current = evaluate(x, &beta, weights);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITER {
        if current.gradient.iter().all(|g| g.abs() < GRAD_TOL) {
            converged = true;
            break;
        }
        if beta.iter().map(|b| b * b).sum::<f64>().sqrt() > SEPARATION_NORM {
            break;
        }
        iterations += 1;
        let d = newton_direction(&current.gradient, &current.hessian);
        let mut step = 1.0;
        loop {
            for ((t, b), dk) in trial.iter_mut().zip(&beta).zip(&d) {
                *t = b + step * dk;
            }
            x.eta(&trial, &mut eta);
            // Near the optimum the change is at rounding level; accept it.
            let slack = 1e-12 * current.value.abs().max(1.0);
            if value_from_eta(&eta, weights) >= current.value - slack || step < 1e-10 {
                break;
            }
            step *= 0.5;
        }
        beta.copy_from_slice(&trial);
        current = evaluate(x, &beta, weights);
    }
    if !converged && current.gradient.iter().all(|g| g.abs() < GRAD_TOL) {
        converged = true;
    }
    x.eta(&beta, &mut eta);
    // Every pair strictly favouring the case along β certifies that scaling β
    // up keeps increasing the likelihood.
    let certificate = beta.iter().any(|&b| b != 0.0) && eta.iter().all(|&e| e > 0.0);
    let large = beta.iter().map(|b| b * b).sum::<f64>().sqrt() > SEPARATION_NORM;
    let separated = certificate || (large && !converged);
    Newton {
        beta,
        loglik: current.value,
        converged: converged && !separated,
        separated,
        iterations,
    }
}

/// Score statistic for coefficient 0 at the constrained estimate `beta0`
/// (coefficient 0 fixed at zero, the rest at their null maximiser).
fn score_statistic(x: Columns, beta0: &[f64]) -> f64 {
    let l = evaluate(x, beta0, None);
    let p = beta0.len();
    let u = l.gradient[0];
    let info = DMatrix::from_fn(p, p, |a, b| -l.hessian[a][b]);
    let mut effective = info[(0, 0)];
    if p > 1 {
        let iaa = info.view((1, 1), (p - 1, p - 1)).into_owned();
        let iag = info.view((1, 0), (p - 1, 1)).into_owned();
        if let Some(ch) = iaa.cholesky() {
            let v = ch.solve(&iag);
            effective -= iag.dot(&v);
        }
    }
    if effective <= 0.0 || !effective.is_finite() {
        return 0.0;
    }
    u * u / effective
}

pub(crate) fn adjustment_columns(design: &ExposureDesign) -> (Vec<String>, Vec<Vec<f64>>) {
    design
        .covariates()
        .map(|c| (c.name.clone(), c.values.clone()))
        .unzip()
}

pub(crate) struct Adjustment {
    /// Non-zero adjustment columns and their positions among all covariates.
    columns: Vec<Vec<f64>>,
    active: Vec<usize>,
    n_total: usize,
    /// Null-model estimate of the adjustment coefficients.
    null_beta: Vec<f64>,
}

impl Adjustment {
    pub fn new(design: Option<&ExposureDesign>, n: usize) -> Result<Self> {
        let (names, all) = design.map(adjustment_columns).unwrap_or_default();
        if all.iter().any(|c| c.len() != n) {
            return Err(Error::ShapeMismatch("adjustment columns do not match the pair count".into()));
        }
        let active: Vec<usize> = (0..all.len()).filter(|&k| all[k].iter().any(|&v| v != 0.0)).collect();
        let columns: Vec<Vec<f64>> = active.iter().map(|&k| all[k].clone()).collect();
        let refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
        OrthoBasis::full_rank(&refs).map_err(|d| Error::RankDeficient {
            columns: d.iter().map(|&k| names[active[k]].clone()).collect(),
        })?;
        let null_beta = if columns.is_empty() {
            Vec::new()
        } else {
            newton(Columns::new(&refs, n), None, vec![0.0; columns.len()]).beta
        };
        Ok(Self {
            n_total: all.len(),
            columns,
            active,
            null_beta,
        })
    }

    fn expand(&self, coef: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_total];
        for (&k, &c) in self.active.iter().zip(coef) {
            out[k] = c;
        }
        out
    }
}

pub(crate) fn fit_with(delta_g: &[f64], adjust: &Adjustment) -> Result<ClogitFit> {
    let n = delta_g.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("{n} pairs; at least 2 are needed")));
    }
    if let Some(i) = delta_g.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite expression difference at pair index {i}")));
    }
    let loglik_null = -(n as f64) * std::f64::consts::LN_2;
    let mut refs: Vec<&[f64]> = vec![delta_g];
    refs.extend(adjust.columns.iter().map(Vec::as_slice));
    let x = Columns::new(&refs, n);
    let mut beta0 = vec![0.0];
    beta0.extend(&adjust.null_beta);
    if delta_g.iter().all(|&v| v == 0.0) {
        let loglik = evaluate(x, &beta0, None).value;
        let mut beta = vec![0.0];
        beta.extend(adjust.expand(&adjust.null_beta));
        return Ok(ClogitFit {
            beta,
            loglik,
            loglik_null,
            score_statistic: 0.0,
            p_value: 1.0,
            converged: true,
            separated: false,
            iterations: 0,
        });
    }
    let score = score_statistic(x, &beta0);
    let fit = newton(x, None, beta0);
    let mut beta = vec![fit.beta[0]];
    beta.extend(adjust.expand(&fit.beta[1..]));
    Ok(ClogitFit {
        beta,
        loglik: fit.loglik,
        loglik_null,
        score_statistic: score,
        p_value: chi2_1_sf(score),
        converged: fit.converged,
        separated: fit.separated,
        iterations: fit.iterations,
    })
}

/// Conditional logistic regression of case status on the gene's
/// case-minus-control difference, optionally adjusted for exposure differences.
pub fn fit_clogit(delta_g: &[f64], adjust: Option<&ExposureDesign>) -> Result<ClogitFit> {
    let adjustment = Adjustment::new(adjust, delta_g.len())?;
    fit_with(delta_g, &adjustment)
}

pub const CLOGIT_EXTRAS: [&str; 4] = ["beta", "loglik", "converged", "separated"];

/// Per-gene clogit over a dataset. `statistic` holds the score statistic and
/// `alpha1` the adjustment coefficients.
pub fn scan_clogit(dataset: &AnalysisDataset, adjust: bool) -> Result<ScanResults> {
    let n = dataset.n_pairs();
    let design = adjust.then_some(&dataset.exposures);
    let adjustment = Adjustment::new(design, n)?;
    let covariate_names = if adjust {
        dataset.exposures.covariate_names()
    } else {
        Vec::new()
    };
    let expr = &dataset.delta_expression;
    let extra_names: Vec<String> = CLOGIT_EXTRAS.iter().map(|s| s.to_string()).collect();
    let rows = (0..expr.n_genes())
        .into_par_iter()
        .map(|g| {
            let gene_id = &expr.gene_ids[g];
            match fit_with(expr.row(g), &adjustment) {
                Ok(fit) => GeneFitResult {
                    gene_id: gene_id.clone(),
                    model: "coxncc".into(),
                    status: FitStatus::Ok,
                    alpha0: None,
                    alpha1: fit.beta[1..].iter().copied().map(Some).collect(),
                    alpha2: None,
                    t_hat: None,
                    statistic: Some(fit.score_statistic),
                    p_value: Some(fit.p_value),
                    extras: vec![
                        Some(fit.beta[0]),
                        Some(fit.loglik),
                        Some(f64::from(u8::from(fit.converged))),
                        Some(f64::from(u8::from(fit.separated))),
                    ],
                },
                Err(e) => GeneFitResult::failed(gene_id, "coxncc", covariate_names.len(), extra_names.len(), &e),
            }
        })
        .collect();
    Ok(ScanResults {
        model: "coxncc".into(),
        covariate_names,
        extra_names,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_data_gives_zero() {
        let y = [1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
        let fit = fit_clogit(&y, None).unwrap();
        assert!(fit.beta[0].abs() < 1e-12);
        assert!((fit.loglik - fit.loglik_null).abs() < 1e-12);
        assert!(!fit.separated);
    }

    #[test]
    fn all_positive_is_separated() {
        let y = [0.5, 1.0, 2.0, 0.1, 3.0];
        let fit = fit_clogit(&y, None).unwrap();
        assert!(fit.separated);
        assert!(!fit.converged);
        assert!(fit.p_value > 0.0 && fit.p_value < 1.0);
    }

    #[test]
    fn unadjusted_score_is_paired_statistic() {
        let y = [0.4, -0.2, 1.1, 0.3, -0.6, 0.9];
        let fit = fit_clogit(&y, None).unwrap();
        let s: f64 = y.iter().sum();
        let ss: f64 = y.iter().map(|v| v * v).sum();
        assert!((fit.score_statistic - s * s / ss).abs() < 1e-12);
        assert!(fit.loglik >= fit.loglik_null);
    }

    #[test]
    fn zero_gene_column() {
        let fit = fit_clogit(&[0.0; 4], None).unwrap();
        assert_eq!(fit.p_value, 1.0);
    }

    #[test]
    fn too_few_pairs() {
        assert!(matches!(fit_clogit(&[1.0], None), Err(Error::InvalidArgument(_))));
    }
}
