//! False discovery rate control over per-gene p-values.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdrMethod {
    /// Benjamini-Hochberg step-up.
    Bh,
    /// Benjamini-Yekutieli: BH thresholds divided by `Σ_{j<=m} 1/j`.
    By,
}

impl FdrMethod {
    pub fn name(self) -> &'static str {
        match self {
            FdrMethod::Bh => "bh",
            FdrMethod::By => "by",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bh" => Some(FdrMethod::Bh),
            "by" => Some(FdrMethod::By),
            _ => None,
        }
    }

    fn constant(self, m: usize) -> f64 {
        match self {
            FdrMethod::Bh => 1.0,
            FdrMethod::By => (1..=m).map(|j| 1.0 / j as f64).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjustedResults {
    /// Empty unless attached with [`AdjustedResults::with_gene_ids`].
    pub gene_ids: Vec<String>,
    pub p_values: Vec<f64>,
    pub q_values: Vec<f64>,
    pub rejected: Vec<bool>,
    pub level: f64,
    pub method: FdrMethod,
}

impl AdjustedResults {
    pub fn with_gene_ids(mut self, gene_ids: Vec<String>) -> Self {
        assert_eq!(gene_ids.len(), self.p_values.len());
        self.gene_ids = gene_ids;
        self
    }

    pub fn n_rejected(&self) -> usize {
        self.rejected.iter().filter(|&&r| r).count()
    }
}

fn validate(p_values: &[f64], q: f64) -> Result<()> {
    if let Some((i, p)) = p_values.iter().enumerate().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidArgument(format!("p-value {p} at position {i} is outside [0, 1]")));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!("FDR level {q} is outside [0, 1]")));
    }
    Ok(())
}

pub fn adjust(p_values: &[f64], q: f64, method: FdrMethod) -> Result<AdjustedResults> {
    validate(p_values, q)?;
    let m = p_values.len();
    let c = method.constant(m);
    let mut order: Vec<usize> = (0..m).collect();
    // Stable: ties keep input order.
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let k_star = (1..=m)
        .rev()
        .find(|&i| p_values[order[i - 1]] <= i as f64 * q / (m as f64 * c))
        .unwrap_or(0);
    let mut rejected = vec![false; m];
    for &j in &order[..k_star] {
        rejected[j] = true;
    }
    let mut q_values = vec![0.0; m];
    let mut running = 1.0f64;
    for i in (1..=m).rev() {
        let j = order[i - 1];
        running = running.min(m as f64 * c * p_values[j] / i as f64);
        q_values[j] = running.min(1.0);
    }
    Ok(AdjustedResults {
        gene_ids: Vec::new(),
        p_values: p_values.to_vec(),
        q_values,
        rejected,
        level: q,
        method,
    })
}

pub fn bh_adjust(p_values: &[f64], q: f64) -> Result<AdjustedResults> {
    adjust(p_values, q, FdrMethod::Bh)
}

pub fn by_adjust(p_values: &[f64], q: f64) -> Result<AdjustedResults> {
    adjust(p_values, q, FdrMethod::By)
}

/// Adjusts the available p-values; missing entries (failed fits) are left
/// out of the family and get no q-value.
pub fn adjust_partial(p_values: &[Option<f64>], q: f64, method: FdrMethod) -> Result<(Vec<Option<f64>>, Vec<Option<bool>>)> {
    let present: Vec<usize> = (0..p_values.len()).filter(|&i| p_values[i].is_some()).collect();
    let p: Vec<f64> = present.iter().map(|&i| p_values[i].unwrap_or(1.0)).collect();
    let adj = adjust(&p, q, method)?;
    let mut q_values = vec![None; p_values.len()];
    let mut rejected = vec![None; p_values.len()];
    for (k, &i) in present.iter().enumerate() {
        q_values[i] = Some(adj.q_values[k]);
        rejected[i] = Some(adj.rejected[k]);
    }
    Ok((q_values, rejected))
}
