use crate::error::{Error, Result};
use crate::stats::quantiles;

/// Shape of the time-to-diagnosis regressor in the hinge model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HingeForm {
    /// `(t - T)+`: zero far from diagnosis, growing linearly as diagnosis approaches.
    #[default]
    Continuous,
    /// `T * 1(T > t)`: active far from diagnosis, discontinuous at `t`.
    Literal,
}

impl HingeForm {
    #[inline]
    pub fn value(self, changepoint: f64, time: f64) -> f64 {
        match self {
            HingeForm::Continuous => (changepoint - time).max(0.0),
            HingeForm::Literal => {
                if time > changepoint {
                    time
                } else {
                    0.0
                }
            }
        }
    }

    #[inline]
    pub fn is_active(self, changepoint: f64, time: f64) -> bool {
        match self {
            HingeForm::Continuous => time < changepoint,
            HingeForm::Literal => time > changepoint,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HingeForm::Continuous => "continuous",
            HingeForm::Literal => "literal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "continuous" => Some(HingeForm::Continuous),
            "literal" => Some(HingeForm::Literal),
            _ => None,
        }
    }
}

/// Candidate changepoints for the hinge model.
#[derive(Debug, Clone, PartialEq)]
pub enum ChangepointGrid {
    /// Quantile levels of the observed times to diagnosis.
    Quantiles(Vec<f64>),
    /// Explicit changepoints in years.
    Times(Vec<f64>),
}

impl Default for ChangepointGrid {
    fn default() -> Self {
        ChangepointGrid::Quantiles((1..=9).map(|d| f64::from(d) / 10.0).collect())
    }
}

impl ChangepointGrid {
    /// Sorted, de-duplicated changepoints for the observed times.
    pub fn resolve(&self, times: &[f64]) -> Vec<f64> {
        let mut points = match self {
            ChangepointGrid::Quantiles(levels) => quantiles(times, levels),
            ChangepointGrid::Times(t) => t.clone(),
        };
        points.sort_by(f64::total_cmp);
        points.dedup();
        points
    }

    fn is_empty(&self) -> bool {
        match self {
            ChangepointGrid::Quantiles(v) | ChangepointGrid::Times(v) => v.is_empty(),
        }
    }
}

/// Options shared by the trajectory fits and their permutation tests.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub changepoint_grid: ChangepointGrid,
    /// Number of permutations `B`.
    pub n_permutations: usize,
    /// Interior knots of the piecewise-linear basis (placed at time quantiles).
    pub knots: usize,
    pub backfit_tol: f64,
    pub backfit_max_iter: usize,
    pub hinge_form: HingeForm,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            changepoint_grid: ChangepointGrid::default(),
            n_permutations: 999,
            knots: 4,
            backfit_tol: 1e-8,
            backfit_max_iter: 100,
            hinge_form: HingeForm::Continuous,
            seed: 0,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.n_permutations < 1 {
            return Err(Error::config("n_permutations", "must be at least 1"));
        }
        if self.changepoint_grid.is_empty() {
            return Err(Error::config("changepoint_grid", "must not be empty"));
        }
        if let ChangepointGrid::Quantiles(levels) = &self.changepoint_grid {
            if levels.iter().any(|l| !(0.0..=1.0).contains(l)) {
                return Err(Error::config("changepoint_grid", "quantile levels must lie in [0, 1]"));
            }
        }
        if !(self.backfit_tol > 0.0) {
            return Err(Error::config("backfit_tol", "must be positive"));
        }
        if self.backfit_max_iter == 0 {
            return Err(Error::config("backfit_max_iter", "must be at least 1"));
        }
        Ok(())
    }
}
