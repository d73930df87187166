//! Per-gene result rows shared by the trajectory scan and the survival comparators.

use crate::error::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum FitStatus {
    Ok,
    Failed(String),
}

impl FitStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, FitStatus::Ok)
    }

    pub fn label(&self) -> String {
        match self {
            FitStatus::Ok => "ok".into(),
            FitStatus::Failed(msg) => format!("error: {msg}"),
        }
    }

    pub fn parse(s: &str) -> Self {
        match s {
            "ok" => FitStatus::Ok,
            other => FitStatus::Failed(other.strip_prefix("error: ").unwrap_or(other).to_string()),
        }
    }
}

impl From<&Error> for FitStatus {
    fn from(e: &Error) -> Self {
        FitStatus::Failed(e.to_string())
    }
}

/// One gene's estimates. Fields that a model does not define are `None`;
/// `extras` follows the table's `extra_names`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneFitResult {
    pub gene_id: String,
    pub model: String,
    pub status: FitStatus,
    pub alpha0: Option<f64>,
    pub alpha1: Vec<Option<f64>>,
    pub alpha2: Option<f64>,
    pub t_hat: Option<f64>,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub extras: Vec<Option<f64>>,
}

impl GeneFitResult {
    pub fn failed(gene_id: &str, model: &str, n_covariates: usize, n_extras: usize, error: &Error) -> Self {
        Self {
            gene_id: gene_id.to_string(),
            model: model.to_string(),
            status: error.into(),
            alpha0: None,
            alpha1: vec![None; n_covariates],
            alpha2: None,
            t_hat: None,
            statistic: None,
            p_value: None,
            extras: vec![None; n_extras],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResults {
    pub model: String,
    pub covariate_names: Vec<String>,
    pub extra_names: Vec<String>,
    pub rows: Vec<GeneFitResult>,
}

impl ScanResults {
    pub fn gene_ids(&self) -> Vec<&str> {
        self.rows.iter().map(|r| r.gene_id.as_str()).collect()
    }

    pub fn p_values(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.p_value).collect()
    }

    pub fn extra(&self, row: usize, name: &str) -> Option<f64> {
        let k = self.extra_names.iter().position(|n| n == name)?;
        self.rows[row].extras[k]
    }

    pub fn n_failed(&self) -> usize {
        self.rows.iter().filter(|r| !r.status.is_ok()).count()
    }
}
