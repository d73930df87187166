use crate::data::ExposureDesign;
use crate::error::{Error, Result};
use crate::linalg::{axpy, ols, sum_sq, OrthoBasis};

/// The `[1, ΔE]` block shared by every trajectory model, with its QR basis.
#[derive(Debug, Clone)]
pub struct ExposureBlock {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub basis: OrthoBasis,
    /// Indices of the columns spanned by `basis`; identically-zero exposure
    /// columns are left out and get a zero coefficient.
    active: Vec<usize>,
}

impl ExposureBlock {
    pub fn new(design: &ExposureDesign) -> Result<Self> {
        let n = design.n_pairs();
        let mut names = vec!["intercept".to_string()];
        let mut columns = vec![vec![1.0; n]];
        for c in design.covariates() {
            names.push(c.name.clone());
            columns.push(c.values.clone());
        }
        if n <= columns.len() {
            return Err(Error::InvalidArgument(format!(
                "{n} pairs for {} coefficients",
                columns.len()
            )));
        }
        let active: Vec<usize> = (0..columns.len())
            .filter(|&k| columns[k].iter().any(|&v| v != 0.0))
            .collect();
        let refs: Vec<&[f64]> = active.iter().map(|&k| columns[k].as_slice()).collect();
        let basis = OrthoBasis::full_rank(&refs).map_err(|cols| Error::RankDeficient {
            columns: cols.iter().map(|&k| names[active[k]].clone()).collect(),
        })?;
        Ok(Self {
            names,
            columns,
            basis,
            active,
        })
    }

    /// Active columns, in basis order.
    pub(crate) fn active_columns(&self) -> Vec<&[f64]> {
        self.active.iter().map(|&k| self.columns[k].as_slice()).collect()
    }

    pub(crate) fn active_names(&self) -> Vec<&str> {
        self.active.iter().map(|&k| self.names[k].as_str()).collect()
    }

    /// Spreads coefficients of the active columns back over all columns.
    pub(crate) fn expand(&self, active_coef: &[f64]) -> (f64, Vec<f64>) {
        let mut coef = vec![0.0; self.columns.len()];
        for (&k, &c) in self.active.iter().zip(active_coef) {
            coef[k] = c;
        }
        (coef[0], coef[1..].to_vec())
    }

    pub fn n_coef(&self) -> usize {
        self.columns.len()
    }

    /// Residual of `y` after projection on the block.
    pub fn residual(&self, y: &[f64]) -> Vec<f64> {
        let mut r = y.to_vec();
        self.basis.residualize(&mut r);
        r
    }

    /// Coefficients `(α0, α1)` of the least-squares fit of `y`.
    pub fn coefficients(&self, y: &[f64]) -> (f64, Vec<f64>) {
        self.expand(&self.basis.solve(y))
    }

    /// Fitted values `α0 + <α1, ΔE>` for given coefficients.
    pub fn fitted(&self, alpha0: f64, alpha1: &[f64]) -> Vec<f64> {
        let mut out = vec![alpha0; self.columns[0].len()];
        for (a, col) in alpha1.iter().zip(&self.columns[1..]) {
            axpy(*a, col, &mut out);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub alpha0: f64,
    pub alpha1: Vec<f64>,
    pub rss: f64,
}

pub(crate) fn fit_linear_block(delta_g: &[f64], block: &ExposureBlock) -> LinearFit {
    let (alpha0, alpha1) = block.coefficients(delta_g);
    LinearFit {
        alpha0,
        alpha1,
        rss: sum_sq(&block.residual(delta_g)),
    }
}

/// Ordinary least squares of ΔG on `[1, ΔE]`.
pub fn fit_linear(delta_g: &[f64], design: &ExposureDesign) -> Result<LinearFit> {
    if delta_g.len() != design.n_pairs() {
        return Err(Error::ShapeMismatch(format!(
            "{} expression values for {} pairs",
            delta_g.len(),
            design.n_pairs()
        )));
    }
    let block = ExposureBlock::new(design)?;
    let fit = ols(&block.active_columns(), delta_g).map_err(|cols| Error::RankDeficient {
        columns: cols.iter().map(|&k| block.active_names()[k].to_string()).collect(),
    })?;
    let (alpha0, alpha1) = block.expand(&fit.coef);
    Ok(LinearFit {
        alpha0,
        alpha1,
        rss: fit.rss,
    })
}
