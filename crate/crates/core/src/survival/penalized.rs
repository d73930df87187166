use crate::data::DeltaExpressionMatrix;
use crate::error::{Error, Result};
use crate::linalg::{dot, sum_sq};

use super::loglik::{sigmoid, softplus, Columns};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    /// `λ ||β||_1`
    Lasso,
    /// `(λ/2) ||β||²`
    Ridge,
    /// `λ (m ||β||_1 + (1 - m)/2 ||β||²)` with mixing weight `m` in `[0, 1]`.
    ElasticNet { mixing: f64 },
}

impl Penalty {
    pub fn mixing(self) -> f64 {
        match self {
            Penalty::Lasso => 1.0,
            Penalty::Ridge => 0.0,
            Penalty::ElasticNet { mixing } => mixing,
        }
    }

    pub fn name(self) -> String {
        match self {
            Penalty::Lasso => "lasso".into(),
            Penalty::Ridge => "ridge".into(),
            Penalty::ElasticNet { mixing } => format!("elastic_net({mixing})"),
        }
    }

    pub fn value(self, lambda: f64, beta: &[f64]) -> f64 {
        let m = self.mixing();
        let l1: f64 = beta.iter().map(|b| b.abs()).sum();
        lambda * (m * l1 + 0.5 * (1.0 - m) * sum_sq(beta))
    }

    /// Proximal map of `step * pen` applied in place.
    fn prox(self, lambda: f64, step: f64, v: &mut [f64]) {
        let m = self.mixing();
        let thresh = step * lambda * m;
        let shrink = 1.0 + step * lambda * (1.0 - m);
        for x in v.iter_mut() {
            *x = x.signum() * (x.abs() - thresh).max(0.0) / shrink;
        }
    }

    fn validate(self) -> Result<()> {
        let m = self.mixing();
        if !(0.0..=1.0).contains(&m) {
            return Err(Error::InvalidArgument(format!("elastic-net mixing weight {m} is outside [0, 1]")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenalizedOptions {
    /// Stop when the objective decreases by less than this...
    pub tol: f64,
    /// ...and the proximal-gradient mapping has at most this norm.
    pub gradient_tol: f64,
    pub max_iter: usize,
}

impl Default for PenalizedOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            gradient_tol: 1e-7,
            max_iter: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedPath {
    pub gene_ids: Vec<String>,
    pub penalty: Penalty,
    /// Non-increasing penalty weights.
    pub lambda_grid: Vec<f64>,
    /// One coefficient vector (over genes) per λ.
    pub betas: Vec<Vec<f64>>,
    /// `-log L(β) + pen(β)` at each solution.
    pub objectives: Vec<f64>,
    pub converged: Vec<bool>,
    pub iterations: Vec<usize>,
}

impl PenalizedPath {
    pub fn support_sizes(&self) -> Vec<usize> {
        self.betas.iter().map(|b| b.iter().filter(|&&v| v != 0.0).count()).collect()
    }
}

fn gene_columns(delta: &DeltaExpressionMatrix) -> Vec<&[f64]> {
    delta.rows().collect()
}

fn neg_loglik(x: Columns, beta: &[f64], eta: &mut Vec<f64>) -> f64 {
    x.eta(beta, eta);
    eta.iter().map(|&e| softplus(-e)).sum()
}

/// Value and gradient of `-log L`.
fn neg_loglik_grad(x: Columns, beta: &[f64], eta: &mut Vec<f64>, weight: &mut Vec<f64>, grad: &mut [f64]) -> f64 {
    let f = neg_loglik(x, beta, eta);
    weight.clear();
    weight.extend(eta.iter().map(|&e| sigmoid(-e)));
    for (g, c) in grad.iter_mut().zip(x.cols) {
        *g = -dot(c, weight);
    }
    f
}

/// `-log L(β) + pen(β)` for a gene-by-pair matrix of differences.
pub fn penalized_objective(delta: &DeltaExpressionMatrix, penalty: Penalty, lambda: f64, beta: &[f64]) -> f64 {
    let cols = gene_columns(delta);
    let x = Columns::new(&cols, delta.n_pairs());
    neg_loglik(x, beta, &mut Vec::new()) + penalty.value(lambda, beta)
}

/// Smallest λ at which every coefficient is zero: the max-norm of the
/// gradient at zero divided by the L1 weight. For pure ridge, where no finite
/// value zeroes the coefficients, the gradient max-norm itself.
pub fn lambda_max(delta: &DeltaExpressionMatrix, penalty: Penalty) -> f64 {
    let g0 = delta
        .rows()
        .map(|row| 0.5 * row.iter().sum::<f64>())
        .fold(0.0, |m: f64, v| m.max(v.abs()));
    let m = penalty.mixing();
    if m > 0.0 {
        g0 / m
    } else {
        g0
    }
}

/// `n` log-spaced values from `lambda_max` down to `ratio * lambda_max`.
pub fn default_lambda_grid(lambda_max: f64, n: usize, ratio: f64) -> Vec<f64> {
    if n == 1 {
        return vec![lambda_max];
    }
    (0..n)
        .map(|k| lambda_max * ratio.powf(k as f64 / (n - 1) as f64))
        .collect()
}

/// Upper estimate of the largest eigenvalue of `XᵀX` by power iteration.
fn gram_norm(x: Columns) -> f64 {
    let p = x.p();
    if p == 0 {
        return 0.0;
    }
    let mut v = vec![1.0 / (p as f64).sqrt(); p];
    let mut xv = Vec::new();
    let mut est = 0.0;
    for _ in 0..100 {
        x.eta(&v, &mut xv);
        let mut w: Vec<f64> = x.cols.iter().map(|c| dot(c, &xv)).collect();
        let norm = sum_sq(&w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        w.iter_mut().for_each(|a| *a /= norm);
        let done = (norm - est).abs() <= 1e-10 * norm;
        est = norm;
        v = w;
        if done {
            break;
        }
    }
    est
}

struct Solve {
    beta: Vec<f64>,
    objective: f64,
    converged: bool,
    iterations: usize,
}

/// Accelerated proximal gradient with backtracking and objective-based restart.
fn solve_one(x: Columns, penalty: Penalty, lambda: f64, start: &[f64], lipschitz: &mut f64, opts: &PenalizedOptions) -> Solve {
    let p = x.p();
    let mut eta = Vec::new();
    let mut weight = Vec::new();
    let mut beta = start.to_vec();
    let mut y = beta.clone();
    let mut grad = vec![0.0; p];
    let mut cand = vec![0.0; p];
    let mut t: f64 = 1.0;
    let mut obj = neg_loglik(x, &beta, &mut eta) + penalty.value(lambda, &beta);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let fy = neg_loglik_grad(x, &y, &mut eta, &mut weight, &mut grad);
        let f_cand = loop {
            let step = 1.0 / *lipschitz;
            for ((c, yk), gk) in cand.iter_mut().zip(&y).zip(&grad) {
                *c = yk - step * gk;
            }
            penalty.prox(lambda, step, &mut cand);
            let f = neg_loglik(x, &cand, &mut eta);
            let d: Vec<f64> = cand.iter().zip(&y).map(|(c, yk)| c - yk).collect();
            let model = fy + dot(&grad, &d) + 0.5 * *lipschitz * sum_sq(&d);
            if f <= model + 1e-13 * fy.abs().max(1.0) {
                break f;
            }
            *lipschitz *= 2.0;
        };
        let mapping = *lipschitz * cand.iter().zip(&y).map(|(c, yk)| (c - yk).powi(2)).sum::<f64>().sqrt();
        let obj_cand = f_cand + penalty.value(lambda, &cand);
        if obj_cand > obj + 1e-11 * obj.abs().max(1.0) {
            // Momentum overshot: restart from the current iterate.
            t = 1.0;
            y.copy_from_slice(&beta);
            continue;
        }
        let decrease = obj - obj_cand;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = (t - 1.0) / t_next;
        for ((yk, c), b) in y.iter_mut().zip(&cand).zip(&beta) {
            *yk = c + momentum * (c - b);
        }
        beta.copy_from_slice(&cand);
        obj = obj_cand;
        t = t_next;
        if decrease < opts.tol && mapping < opts.gradient_tol {
            converged = true;
            break;
        }
    }
    Solve {
        beta,
        objective: obj,
        converged,
        iterations,
    }
}

/// Penalized conditional-logistic path over `lambda_grid` (default: 50
/// log-spaced values from `λ_max` down to `0.001 λ_max`), warm-started from
/// the previous solution. Genes are the pair covariates.
pub fn fit_clogit_penalized(
    delta: &DeltaExpressionMatrix,
    penalty: Penalty,
    lambda_grid: Option<&[f64]>,
) -> Result<PenalizedPath> {
    fit_clogit_penalized_with(delta, penalty, lambda_grid, &PenalizedOptions::default())
}

pub fn fit_clogit_penalized_with(
    delta: &DeltaExpressionMatrix,
    penalty: Penalty,
    lambda_grid: Option<&[f64]>,
    opts: &PenalizedOptions,
) -> Result<PenalizedPath> {
    penalty.validate()?;
    let grid = match lambda_grid {
        Some(g) => g.to_vec(),
        None => default_lambda_grid(lambda_max(delta, penalty), 50, 1e-3),
    };
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty λ grid".into()));
    }
    if grid.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::InvalidArgument("λ values must be finite and non-negative".into()));
    }
    if grid.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument("λ grid must be non-increasing".into()));
    }
    let cols = gene_columns(delta);
    let x = Columns::new(&cols, delta.n_pairs());
    let mut lipschitz = (1.05 * gram_norm(x) / 4.0).max(1e-12);
    let mut beta = vec![0.0; delta.n_genes()];
    let mut path = PenalizedPath {
        gene_ids: delta.gene_ids.clone(),
        penalty,
        lambda_grid: grid.clone(),
        betas: Vec::with_capacity(grid.len()),
        objectives: Vec::with_capacity(grid.len()),
        converged: Vec::with_capacity(grid.len()),
        iterations: Vec::with_capacity(grid.len()),
    };
    for &lambda in &grid {
        let s = solve_one(x, penalty, lambda, &beta, &mut lipschitz, opts);
        beta.clone_from(&s.beta);
        path.betas.push(s.beta);
        path.objectives.push(s.objective);
        path.converged.push(s.converged);
        path.iterations.push(s.iterations);
    }
    Ok(path)
}
