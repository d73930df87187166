use rayon::prelude::*;

use crate::data::{AnalysisDataset, PairRecord};
use crate::error::{Error, Result};
use crate::results::{FitStatus, GeneFitResult, ScanResults};

use super::clogit::newton;
use super::loglik::Columns;

/// Fewest pairs inside a kernel window for an estimate to be reported.
pub const MIN_WINDOW_PAIRS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeVaryingFit {
    pub t_grid: Vec<f64>,
    /// `None` where the window holds too few pairs or the local likelihood
    /// has no finite maximiser.
    pub beta_t: Vec<Option<f64>>,
    pub bandwidth: f64,
    /// Pairs with positive kernel weight at each grid time.
    pub window_pairs: Vec<usize>,
}

/// Epanechnikov kernel.
pub fn epanechnikov(u: f64) -> f64 {
    if u.abs() < 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

/// Local-constant estimate of a time-varying gene coefficient: at each grid
/// time `t` the log partial likelihood is weighted by `K((T_i - t) / h)`.
pub fn fit_clogit_timevarying(
    delta_g: &[f64],
    pairs: &[PairRecord],
    bandwidth: f64,
    t_grid: &[f64],
) -> Result<TimeVaryingFit> {
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {bandwidth}")));
    }
    if delta_g.len() != pairs.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} expression values for {} pairs",
            delta_g.len(),
            pairs.len()
        )));
    }
    let times: Vec<f64> = pairs.iter().map(|p| p.time_to_diagnosis).collect();
    let lo = times.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if let Some(t) = t_grid.iter().find(|&&t| !(lo..=hi).contains(&t)) {
        return Err(Error::InvalidArgument(format!(
            "grid time {t} lies outside the observed range [{lo}, {hi}]"
        )));
    }
    let cols = [delta_g];
    let x = Columns::new(&cols, delta_g.len());
    let mut beta_t = Vec::with_capacity(t_grid.len());
    let mut window_pairs = Vec::with_capacity(t_grid.len());
    let mut weights = vec![0.0; times.len()];
    for &t in t_grid {
        for (w, &ti) in weights.iter_mut().zip(&times) {
            *w = epanechnikov((ti - t) / bandwidth);
        }
        let count = weights.iter().filter(|&&w| w > 0.0).count();
        window_pairs.push(count);
        if count < MIN_WINDOW_PAIRS {
            beta_t.push(None);
            continue;
        }
        let fit = newton(x, Some(&weights), vec![0.0]);
        beta_t.push((!fit.separated).then_some(fit.beta[0]));
    }
    Ok(TimeVaryingFit {
        t_grid: t_grid.to_vec(),
        beta_t,
        bandwidth,
        window_pairs,
    })
}

/// Time-varying fit for every gene; `extras` holds `β(t)` at each grid time.
pub fn scan_clogit_timevarying(dataset: &AnalysisDataset, bandwidth: f64, t_grid: &[f64]) -> Result<ScanResults> {
    let expr = &dataset.delta_expression;
    let extra_names: Vec<String> = t_grid.iter().map(|t| format!("beta@{t}")).collect();
    // Shared argument errors are reported once rather than per gene.
    fit_clogit_timevarying(&vec![0.0; dataset.n_pairs()], &dataset.pairs, bandwidth, t_grid)?;
    let rows = (0..expr.n_genes())
        .into_par_iter()
        .map(|g| {
            let gene_id = &expr.gene_ids[g];
            match fit_clogit_timevarying(expr.row(g), &dataset.pairs, bandwidth, t_grid) {
                Ok(fit) => GeneFitResult {
                    gene_id: gene_id.clone(),
                    model: "coxtv".into(),
                    status: FitStatus::Ok,
                    alpha0: None,
                    alpha1: Vec::new(),
                    alpha2: None,
                    t_hat: None,
                    statistic: None,
                    p_value: None,
                    extras: fit.beta_t,
                },
                Err(e) => GeneFitResult::failed(gene_id, "coxtv", 0, extra_names.len(), &e),
            }
        })
        .collect();
    Ok(ScanResults {
        model: "coxtv".into(),
        covariate_names: Vec::new(),
        extra_names,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(times: &[f64]) -> Vec<PairRecord> {
        times
            .iter()
            .enumerate()
            .map(|(i, &t)| PairRecord {
                pair_id: format!("p{i}"),
                time_to_diagnosis: t,
                age: 50,
                chip_id: None,
                stratum: None,
            })
            .collect()
    }

    #[test]
    fn sparse_window_is_missing() {
        let times: Vec<f64> = (0..20).map(|i| if i < 3 { 0.1 * i as f64 } else { 5.0 + 0.1 * i as f64 }).collect();
        let y: Vec<f64> = (0..20).map(|i| if i % 3 == 0 { -0.5 } else { 0.8 }).collect();
        let fit = fit_clogit_timevarying(&y, &pairs(&times), 0.5, &[0.1, 6.0]).unwrap();
        assert_eq!(fit.beta_t[0], None);
        assert!(fit.beta_t[1].is_some());
    }

    #[test]
    fn bad_bandwidth() {
        assert!(fit_clogit_timevarying(&[1.0], &pairs(&[1.0]), 0.0, &[1.0]).is_err());
    }
}
