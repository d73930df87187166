//! Principal-component reduction of a wide exposure design into a few
//! meta-variables.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::data::{Column, ExposureDesign};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ExposurePca {
    /// Design whose covariates are the `k` component scores `pc1..pck`.
    pub design: ExposureDesign,
    /// Input column names, in the row order of `loadings`.
    pub input_names: Vec<String>,
    /// `loadings[c][j]`: weight of input column `c` in component `j`.
    pub loadings: Vec<Vec<f64>>,
    /// Variance of each component score, decreasing.
    pub variances: Vec<f64>,
    /// Fraction of the total variance carried by each component.
    pub explained: Vec<f64>,
}

/// Replaces the covariates of `design` by their first `k` principal component
/// scores. Columns are centred (not scaled) before the decomposition; the
/// carcinogen column is carried over unchanged.
pub fn exposure_pca(design: &ExposureDesign, k: usize) -> Result<ExposurePca> {
    let cols: Vec<&Column> = design.covariates().collect();
    let p = cols.len();
    let n = design.n_pairs();
    if k == 0 || k > p {
        return Err(Error::InvalidArgument(format!(
            "requested {k} components from {p} exposure columns"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("PCA needs at least two pairs".into()));
    }
    let centred: Vec<Vec<f64>> = cols
        .iter()
        .map(|c| {
            let m = c.values.iter().sum::<f64>() / n as f64;
            c.values.iter().map(|v| v - m).collect()
        })
        .collect();
    let denom = (n - 1) as f64;
    let cov = DMatrix::from_fn(p, p, |i, j| {
        centred[i].iter().zip(&centred[j]).map(|(a, b)| a * b).sum::<f64>() / denom
    });
    let total: f64 = (0..p).map(|i| cov[(i, i)]).sum();
    if total <= 0.0 {
        return Err(Error::ZeroVariance);
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut loadings = vec![vec![0.0; k]; p];
    let mut variances = Vec::with_capacity(k);
    let mut columns = Vec::with_capacity(k);
    for (j, &e) in order.iter().take(k).enumerate() {
        let mut v: Vec<f64> = eig.eigenvectors.column(e).iter().copied().collect();
        // Sign convention: the largest-magnitude loading is positive.
        let pivot = v
            .iter()
            .copied()
            .fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        for c in 0..p {
            loadings[c][j] = v[c];
        }
        let scores: Vec<f64> = (0..n)
            .map(|i| (0..p).map(|c| centred[c][i] * v[c]).sum())
            .collect();
        variances.push(eig.eigenvalues[e].max(0.0));
        columns.push(Column {
            name: format!("pc{}", j + 1),
            values: scores,
        });
    }
    let explained = variances.iter().map(|v| v / total).collect();
    Ok(ExposurePca {
        design: ExposureDesign {
            pair_ids: design.pair_ids.clone(),
            delta_columns: columns,
            indicator_columns: Vec::new(),
            carcinogen_case: design.carcinogen_case.clone(),
        },
        input_names: cols.iter().map(|c| c.name.clone()).collect(),
        loadings,
        variances,
        explained,
    })
}
