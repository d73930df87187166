//! Small dense least-squares kernels used by every per-gene fit.
//!
//! Columns are stored as separate `Vec<f64>`s (pairs are the long axis), and a
//! thin QR factorisation is built by Gram-Schmidt with one re-orthogonalisation
//! pass. That is accurate to machine precision for the well-conditioned,
//! narrow designs (a handful of columns, hundreds of rows) used here.

/// Relative norm below which a column is treated as linearly dependent.
const RANK_TOL: f64 = 1e-9;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sum_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Orthonormal basis of the span of a set of columns, with the triangular factor.
#[derive(Debug, Clone)]
pub struct OrthoBasis {
    q: Vec<Vec<f64>>,
    /// `r[k]` holds the k-th column of R restricted to kept rows.
    r: Vec<Vec<f64>>,
    kept: Vec<usize>,
    dropped: Vec<usize>,
}

impl OrthoBasis {
    fn build(columns: &[&[f64]]) -> Self {
        let mut q: Vec<Vec<f64>> = Vec::with_capacity(columns.len());
        let mut r = Vec::with_capacity(columns.len());
        let mut kept = Vec::new();
        let mut dropped = Vec::new();
        for (k, col) in columns.iter().enumerate() {
            let norm0 = sum_sq(col).sqrt();
            let mut v = col.to_vec();
            let mut coef = vec![0.0; q.len()];
            for _ in 0..2 {
                for (i, qi) in q.iter().enumerate() {
                    let c = dot(qi, &v);
                    coef[i] += c;
                    axpy(-c, qi, &mut v);
                }
            }
            let norm = sum_sq(&v).sqrt();
            if norm0 == 0.0 || norm <= RANK_TOL * norm0 {
                dropped.push(k);
                continue;
            }
            v.iter_mut().for_each(|x| *x /= norm);
            coef.push(norm);
            q.push(v);
            r.push(coef);
            kept.push(k);
        }
        Self { q, r, kept, dropped }
    }

    /// Basis of a full-rank set of columns; returns the indices of dependent columns otherwise.
    pub fn full_rank(columns: &[&[f64]]) -> Result<Self, Vec<usize>> {
        let b = Self::build(columns);
        if b.dropped.is_empty() {
            Ok(b)
        } else {
            Err(b.dropped)
        }
    }

    /// Basis of the column span, silently skipping dependent columns.
    pub fn spanning(columns: &[&[f64]]) -> Self {
        Self::build(columns)
    }

    pub fn rank(&self) -> usize {
        self.q.len()
    }

    pub fn dropped(&self) -> &[usize] {
        &self.dropped
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.q
    }

    /// Removes the component of `v` lying in the span (two passes).
    pub fn residualize(&self, v: &mut [f64]) {
        for _ in 0..2 {
            for qi in &self.q {
                let c = dot(qi, v);
                axpy(-c, qi, v);
            }
        }
    }

    /// Squared norm of the projection of `v` on the span.
    pub fn projected_sq(&self, v: &[f64]) -> f64 {
        self.q.iter().map(|qi| dot(qi, v).powi(2)).sum()
    }

    /// Least-squares coefficients for the kept columns (in `kept` order).
    pub fn solve(&self, y: &[f64]) -> Vec<f64> {
        let rhs: Vec<f64> = self.q.iter().map(|qi| dot(qi, y)).collect();
        back_substitute(&self.r, &rhs)
    }

    pub fn kept(&self) -> &[usize] {
        &self.kept
    }
}

fn back_substitute(r: &[Vec<f64>], rhs: &[f64]) -> Vec<f64> {
    let p = rhs.len();
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = rhs[i];
        for (k, xk) in x.iter().enumerate().skip(i + 1) {
            s -= r[k][i] * xk;
        }
        x[i] = s / r[i][i];
    }
    x
}

/// Ordinary least squares on explicit columns.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coef: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
}

pub fn ols(columns: &[&[f64]], y: &[f64]) -> Result<OlsFit, Vec<usize>> {
    let basis = OrthoBasis::full_rank(columns)?;
    let coef = basis.solve(y);
    let mut residuals = y.to_vec();
    for (c, col) in coef.iter().zip(columns) {
        axpy(-c, col, &mut residuals);
    }
    let rss = sum_sq(&residuals);
    Ok(OlsFit { coef, residuals, rss })
}
