use rand::SeedableRng;
use rayon::prelude::*;

use crate::data::AnalysisDataset;
use crate::error::{Error, Result};
use crate::results::{FitStatus, GeneFitResult, ScanResults};
use crate::rng::{derive_seed, Stage, StreamRng};

use super::hinge::{fit_hinge_with, test_hinge_with, HingeGrid};
use super::interaction::{fit_interaction_with, labels_for, test_interaction_with, InteractionProblem};
use super::isotonic::{fit_isotonic_with, test_isotonic_with};
use super::linear::ExposureBlock;
use super::options::FitOptions;
use super::pava::Direction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryModel {
    Hinge,
    Isotonic,
    Interaction,
}

impl TrajectoryModel {
    pub const ALL: [TrajectoryModel; 3] = [Self::Hinge, Self::Isotonic, Self::Interaction];

    pub fn name(self) -> &'static str {
        match self {
            Self::Hinge => "hinge",
            Self::Isotonic => "isotonic",
            Self::Interaction => "interaction",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    /// Names of the model-specific columns appended after `p_value`.
    pub fn extra_names(self, options: &FitOptions) -> Vec<String> {
        let mut names = vec!["rss".to_string(), "rss_null".to_string()];
        match self {
            Self::Hinge => {}
            Self::Isotonic => names.extend(["direction".to_string(), "iterations".to_string()]),
            Self::Interaction => {
                let basis: Vec<String> = std::iter::once("lin".to_string())
                    .chain((1..=options.knots).map(|j| format!("k{j}")))
                    .collect();
                names.extend(basis.iter().map(|b| format!("phi.{b}")));
                names.extend(basis.iter().map(|b| format!("psi.{b}")));
            }
        }
        names
    }
}

/// Seed of gene `index`'s permutation stream.
pub fn gene_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, Stage::Permutation, index as u64)
}

pub(crate) fn permutation_rng(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}

struct Shared<'a> {
    block: ExposureBlock,
    times: Vec<f64>,
    labels: Vec<bool>,
    options: &'a FitOptions,
}

fn fit_one(model: TrajectoryModel, y: &[f64], shared: &Shared, seed: u64) -> Result<GeneFitResult> {
    let options = shared.options;
    let mut rng = permutation_rng(seed);
    let row = |alpha0, alpha1: &[f64], statistic, p_value, extras: Vec<f64>| GeneFitResult {
        gene_id: String::new(),
        model: model.name().to_string(),
        status: FitStatus::Ok,
        alpha0: Some(alpha0),
        alpha1: alpha1.iter().copied().map(Some).collect(),
        alpha2: None,
        t_hat: None,
        statistic: Some(statistic),
        p_value: Some(p_value),
        extras: extras.into_iter().map(Some).collect(),
    };
    Ok(match model {
        TrajectoryModel::Hinge => {
            let fit = fit_hinge_with(y, &shared.block, &shared.times, options)?;
            let test = test_hinge_with(y, &shared.block, &shared.times, options, &fit, &mut rng)?;
            let mut r = row(fit.alpha0, &fit.alpha1, fit.statistic, test.p_value, vec![fit.rss, fit.rss_linear]);
            r.alpha2 = Some(fit.alpha2);
            r.t_hat = Some(fit.t_hat);
            r
        }
        TrajectoryModel::Isotonic => {
            let fit = fit_isotonic_with(y, &shared.block, &shared.times, options)?;
            let test = test_isotonic_with(y, &shared.block, options, &fit, &mut rng);
            let direction = match fit.direction {
                Direction::NonDecreasing => 1.0,
                Direction::NonIncreasing => -1.0,
            };
            row(
                fit.alpha0,
                &fit.alpha1,
                fit.statistic,
                test.p_value,
                vec![fit.rss, fit.rss_linear, direction, fit.iterations as f64],
            )
        }
        TrajectoryModel::Interaction => {
            let fit = fit_interaction_with(y, &shared.block, &shared.times, &shared.labels, options)?;
            let test = test_interaction_with(y, &shared.block, &shared.times, &shared.labels, options, &fit, &mut rng)?;
            let mut extras = vec![fit.rss, fit.rss_phi];
            extras.extend(&fit.phi_coef);
            extras.extend(&fit.psi_coef);
            row(fit.alpha0, &fit.alpha1, fit.statistic, test.p_value, extras)
        }
    })
}

/// Fits and tests `model` on every gene. Rows follow the input gene order and
/// gene `g` uses the permutation seed `gene_seed(options.seed, g)`, so the
/// table does not depend on the number of worker threads. Failures specific to
/// one gene are recorded in its status; problems with the shared design
/// (options, exposures, time grid) are returned as errors.
pub fn scan_genes(dataset: &AnalysisDataset, model: TrajectoryModel, options: &FitOptions) -> Result<ScanResults> {
    options.validate()?;
    let n = dataset.n_pairs();
    if dataset.delta_expression.n_pairs() != n || dataset.exposures.n_pairs() != n {
        return Err(Error::ShapeMismatch("dataset components disagree on the pair count".into()));
    }
    let block = ExposureBlock::new(&dataset.exposures)?;
    let times = dataset.times();
    let labels = match model {
        TrajectoryModel::Interaction => {
            let labels = labels_for(&dataset.exposures)?;
            InteractionProblem::new(&block, &times, options)?;
            labels
        }
        TrajectoryModel::Hinge => {
            HingeGrid::new(&times, options)?;
            Vec::new()
        }
        TrajectoryModel::Isotonic => Vec::new(),
    };
    let shared = Shared {
        block,
        times,
        labels,
        options,
    };
    let covariate_names = dataset.exposures.covariate_names();
    let extra_names = model.extra_names(options);
    let expr = &dataset.delta_expression;
    let rows: Vec<GeneFitResult> = (0..expr.n_genes())
        .into_par_iter()
        .map(|g| {
            let gene_id = &expr.gene_ids[g];
            match fit_one(model, expr.row(g), &shared, gene_seed(options.seed, g)) {
                Ok(mut r) => {
                    r.gene_id = gene_id.clone();
                    r
                }
                Err(e) => GeneFitResult::failed(gene_id, model.name(), covariate_names.len(), extra_names.len(), &e),
            }
        })
        .collect();
    Ok(ScanResults {
        model: model.name().to_string(),
        covariate_names,
        extra_names,
        rows,
    })
}
