//! Per-pair decomposition of one gene's fitted trajectory.

use trajscan::data::{format_float, AnalysisDataset};
use trajscan::results::GeneFitResult;
use trajscan::trajectory::{fit_isotonic_adjusted, piecewise_basis, FitOptions, HingeForm};

use crate::args::PlotDataArgs;
use crate::commands::{load_dataset, parse_hinge_form, prepare_dataset, resolver, sibling, Inputs, VERSION};
use crate::error::{CliError, Result};
use crate::io;

pub const PLOT_COLUMNS: [&str; 8] = [
    "pair_id",
    "time_to_diagnosis_years",
    "delta_g",
    "fitted",
    "intercept",
    "exposure",
    "time_effect",
    "exposure_time_effect",
];

/// Fitted value of each pair split into intercept, exposure, time effect and
/// exposure-by-time effect; the four parts sum to the fitted value.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub intercept: Vec<f64>,
    pub exposure: Vec<f64>,
    pub time_effect: Vec<f64>,
    pub exposure_time_effect: Vec<f64>,
}

impl Decomposition {
    pub fn fitted(&self, i: usize) -> f64 {
        self.intercept[i] + self.exposure[i] + self.time_effect[i] + self.exposure_time_effect[i]
    }
}

fn required(v: Option<f64>, what: &str, gene: &str) -> Result<f64> {
    v.ok_or_else(|| CliError::data(format!("gene '{gene}': results have no {what}")))
}

fn exposure_part(dataset: &AnalysisDataset, alpha1: &[f64]) -> Vec<f64> {
    let cols: Vec<&[f64]> = dataset.exposures.covariates().map(|c| c.values.as_slice()).collect();
    (0..dataset.n_pairs())
        .map(|i| alpha1.iter().zip(&cols).map(|(a, c)| a * c[i]).sum())
        .collect()
}

pub fn decompose(
    dataset: &AnalysisDataset,
    row: &GeneFitResult,
    extra_names: &[String],
    covariate_names: &[String],
    form: HingeForm,
) -> Result<Decomposition> {
    let gene = &row.gene_id;
    if !row.status.is_ok() {
        return Err(CliError::data(format!("gene '{gene}' has fit status '{}'", row.status.label())));
    }
    let g = dataset
        .delta_expression
        .gene_ids
        .iter()
        .position(|id| id == gene)
        .ok_or_else(|| CliError::data(format!("gene '{gene}' is not in the expression data")))?;
    let y = dataset.delta_expression.row(g);
    let times = dataset.times();
    let n = times.len();
    if covariate_names != dataset.exposures.covariate_names().as_slice() {
        return Err(CliError::data(format!(
            "exposure columns of the results ({}) differ from the data ({})",
            covariate_names.join(", "),
            dataset.exposures.covariate_names().join(", ")
        )));
    }
    let alpha1 = || -> Result<Vec<f64>> { row.alpha1.iter().map(|&a| required(a, "alpha1", gene)).collect() };

    match row.model.as_str() {
        "hinge" => {
            let alpha2 = required(row.alpha2, "alpha2", gene)?;
            let t_hat = required(row.t_hat, "t_hat", gene)?;
            Ok(Decomposition {
                intercept: vec![required(row.alpha0, "alpha0", gene)?; n],
                exposure: exposure_part(dataset, &alpha1()?),
                time_effect: times.iter().map(|&t| alpha2 * form.value(t_hat, t)).collect(),
                exposure_time_effect: vec![0.0; n],
            })
        }
        "isotonic" => {
            // φ is not stored in the results table; the fit is deterministic.
            let fit = fit_isotonic_adjusted(y, &dataset.exposures, &dataset.pairs, &FitOptions::default())?;
            Ok(Decomposition {
                intercept: vec![fit.alpha0; n],
                exposure: exposure_part(dataset, &fit.alpha1),
                time_effect: fit.phi_by_pair(),
                exposure_time_effect: vec![0.0; n],
            })
        }
        "interaction" => {
            let coef = |prefix: &str| -> Result<Vec<f64>> {
                extra_names
                    .iter()
                    .zip(&row.extras)
                    .filter(|(name, _)| name.starts_with(prefix))
                    .map(|(name, &v)| required(v, name, gene))
                    .collect()
            };
            let phi = coef("phi.")?;
            let psi = coef("psi.")?;
            if phi.is_empty() || phi.len() != psi.len() {
                return Err(CliError::data(format!("gene '{gene}': malformed phi/psi columns")));
            }
            let labels = dataset
                .exposures
                .carcinogen_case
                .as_ref()
                .ok_or_else(|| CliError::data("interaction results need the carcinogen exposure"))?;
            let basis = piecewise_basis(&times, phi.len() - 1);
            Ok(Decomposition {
                intercept: vec![required(row.alpha0, "alpha0", gene)?; n],
                exposure: exposure_part(dataset, &alpha1()?),
                time_effect: times.iter().map(|&t| basis.combine(&phi, t)).collect(),
                exposure_time_effect: times
                    .iter()
                    .zip(&labels.case)
                    .map(|(&t, &e)| if e { basis.combine(&psi, t) } else { 0.0 })
                    .collect(),
            })
        }
        other => Err(CliError::usage(format!(
            "plot-data needs hinge, isotonic or interaction results; gene '{gene}' was fitted with '{other}'"
        ))),
    }
}

pub fn plot_data(args: &PlotDataArgs) -> Result<String> {
    let mut r = resolver(&args.common)?;
    r.flag("hinge_form", args.hinge_form.as_ref());
    let form = parse_hinge_form(&r.get_text("hinge_form", HingeForm::default().name()))?;
    let carcinogen = r.get_text("carcinogen", "hrt");
    let results = io::read_results(&args.results)?;
    let row = results
        .rows
        .iter()
        .find(|row| row.gene_id == args.gene)
        .ok_or_else(|| CliError::data(format!("gene '{}' is not in {}", args.gene, args.results.display())))?;
    let inputs = Inputs::resolve(&args.data)?;
    let dataset = prepare_dataset(load_dataset(&inputs, Some(&carcinogen))?, &mut r)?;
    let parts = decompose(&dataset, row, &results.extra_names, &results.covariate_names, form)?;

    let g = dataset.delta_expression.gene_ids.iter().position(|id| *id == args.gene).unwrap_or(0);
    let y = dataset.delta_expression.row(g);
    let mut t = io::Table::new(PLOT_COLUMNS.iter().map(|s| s.to_string()).collect());
    for (i, p) in dataset.pairs.iter().enumerate() {
        t.rows.push(vec![
            p.pair_id.clone(),
            format_float(p.time_to_diagnosis),
            format_float(y[i]),
            format_float(parts.fitted(i)),
            format_float(parts.intercept[i]),
            format_float(parts.exposure[i]),
            format_float(parts.time_effect[i]),
            format_float(parts.exposure_time_effect[i]),
        ]);
    }
    t.write(&args.out)?;
    let mut entries = vec![
        ("tool".to_string(), "trajscan".to_string()),
        ("version".to_string(), VERSION.to_string()),
        ("command".to_string(), "plot-data".to_string()),
        ("input.results".to_string(), args.results.display().to_string()),
    ];
    entries.extend(inputs.list().iter().map(|(k, p)| (format!("input.{k}"), p.display().to_string())));
    entries.push(("gene".to_string(), args.gene.clone()));
    entries.extend(r.into_entries());
    io::write_manifest(&sibling(&args.out, ".manifest.txt"), &entries)?;
    Ok(format!("gene: {} ({}), pairs: {}\n", args.gene, row.model, dataset.n_pairs()))
}
