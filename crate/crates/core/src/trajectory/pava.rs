use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    NonDecreasing,
    NonIncreasing,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::NonDecreasing => "non_decreasing",
            Direction::NonIncreasing => "non_increasing",
        }
    }
}

/// Weighted least-squares projection onto monotone sequences by
/// pool-adjacent-violators.
pub fn pava(values: &[f64], weights: &[f64], direction: Direction) -> Result<Vec<f64>> {
    if values.len() != weights.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} values for {} weights",
            values.len(),
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::InvalidArgument(format!("weights must be positive, got {w}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("values must be finite".into()));
    }
    let mut out = vec![0.0; values.len()];
    let mut scratch = PavaScratch::default();
    scratch.run(values, Some(weights), direction, &mut out);
    Ok(out)
}

/// Reusable block stack; avoids allocation inside permutation loops.
#[derive(Debug, Default)]
pub(crate) struct PavaScratch {
    mean: Vec<f64>,
    weight: Vec<f64>,
    len: Vec<usize>,
}

impl PavaScratch {
    /// Unchecked PAVA; `weights = None` means unit weights.
    pub(crate) fn run(&mut self, values: &[f64], weights: Option<&[f64]>, direction: Direction, out: &mut [f64]) {
        self.mean.clear();
        self.weight.clear();
        self.len.clear();
        let sign = match direction {
            Direction::NonDecreasing => 1.0,
            Direction::NonIncreasing => -1.0,
        };
        for (i, &v) in values.iter().enumerate() {
            let mut m = sign * v;
            let mut w = weights.map_or(1.0, |w| w[i]);
            let mut l = 1;
            while let Some(&prev) = self.mean.last() {
                if prev <= m {
                    break;
                }
                let pw = self.weight.pop().unwrap();
                self.mean.pop();
                l += self.len.pop().unwrap();
                m = (prev * pw + m * w) / (pw + w);
                w += pw;
            }
            self.mean.push(m);
            self.weight.push(w);
            self.len.push(l);
        }
        let mut pos = 0;
        for (&m, &l) in self.mean.iter().zip(&self.len) {
            out[pos..pos + l].fill(sign * m);
            pos += l;
        }
    }
}
