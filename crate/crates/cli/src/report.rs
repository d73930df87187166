//! Rejections by simulated gene class for one or more fitted models.

use std::collections::HashMap;

use trajscan::multiplicity::{adjust_partial, FdrMethod};
use trajscan::results::ScanResults;
use trajscan::simulate::{GeneClass, GroundTruth};

use crate::args::ReportArgs;
use crate::commands::{parse_method, resolver};
use crate::error::{CliError, Result};
use crate::io;

pub const REPORT_COLUMNS: [&str; 8] = [
    "model",
    "class",
    "n_genes",
    "n_rejected",
    "rejection_rate",
    "sensitivity",
    "false_positives",
    "fdp",
];

/// One line of the summary. `sensitivity` is defined for non-null classes,
/// `false_positives` and `fdp` for the null class and the per-model total.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub model: String,
    pub class: String,
    pub n_genes: usize,
    pub n_rejected: usize,
    pub sensitivity: Option<f64>,
    pub false_positives: Option<usize>,
    pub fdp: Option<f64>,
}

impl ReportRow {
    pub fn rejection_rate(&self) -> f64 {
        if self.n_genes == 0 {
            0.0
        } else {
            self.n_rejected as f64 / self.n_genes as f64
        }
    }
}

/// Adjusts each model's p-values at level `q` and tallies rejections by class.
/// Genes whose fit failed count as not rejected.
pub fn summarize(truth: &GroundTruth, results: &[ScanResults], q: f64, method: FdrMethod) -> Result<Vec<ReportRow>> {
    let class_of: HashMap<&str, GeneClass> = truth.genes.iter().map(|g| (g.gene_id.as_str(), g.spec.class)).collect();
    let mut out = Vec::new();
    for res in results {
        if res.rows.is_empty() {
            return Err(CliError::data("results table has no genes"));
        }
        if res.rows.len() != truth.genes.len() {
            return Err(CliError::data(format!(
                "results for model '{}' have {} genes, truth has {}",
                res.model,
                res.rows.len(),
                truth.genes.len()
            )));
        }
        let classes = res
            .rows
            .iter()
            .map(|row| {
                class_of
                    .get(row.gene_id.as_str())
                    .copied()
                    .ok_or_else(|| CliError::data(format!("gene '{}' is not in the truth table", row.gene_id)))
            })
            .collect::<Result<Vec<_>>>()?;
        let (_, rejected) = adjust_partial(&res.p_values(), q, method)?;
        let rejected: Vec<bool> = rejected.iter().map(|r| r.unwrap_or(false)).collect();

        let mut null_rejected = 0;
        for class in GeneClass::ALL {
            let n_genes = classes.iter().filter(|&&c| c == class).count();
            if n_genes == 0 {
                continue;
            }
            let n_rejected = (0..classes.len()).filter(|&i| classes[i] == class && rejected[i]).count();
            let is_null = class == GeneClass::Null;
            if is_null {
                null_rejected = n_rejected;
            }
            out.push(ReportRow {
                model: res.model.clone(),
                class: class.name().to_string(),
                n_genes,
                n_rejected,
                sensitivity: (!is_null).then(|| n_rejected as f64 / n_genes as f64),
                false_positives: is_null.then_some(n_rejected),
                fdp: None,
            });
        }
        let total = rejected.iter().filter(|&&r| r).count();
        out.push(ReportRow {
            model: res.model.clone(),
            class: "all".into(),
            n_genes: classes.len(),
            n_rejected: total,
            sensitivity: None,
            false_positives: Some(null_rejected),
            fdp: Some(if total == 0 { 0.0 } else { null_rejected as f64 / total as f64 }),
        });
    }
    Ok(out)
}

pub fn report_table(rows: &[ReportRow]) -> io::Table {
    let mut t = io::Table::new(REPORT_COLUMNS.iter().map(|s| s.to_string()).collect());
    let rate = |x: f64| format!("{x:.4}");
    for r in rows {
        t.rows.push(vec![
            r.model.clone(),
            r.class.clone(),
            r.n_genes.to_string(),
            r.n_rejected.to_string(),
            rate(r.rejection_rate()),
            r.sensitivity.map(rate).unwrap_or_default(),
            r.false_positives.map(|v| v.to_string()).unwrap_or_default(),
            r.fdp.map(rate).unwrap_or_default(),
        ]);
    }
    t
}

fn render(t: &io::Table) -> String {
    let widths: Vec<usize> = (0..t.headers.len())
        .map(|k| t.rows.iter().map(|r| r[k].len()).chain([t.headers[k].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    std::iter::once(line(&t.headers)).chain(t.rows.iter().map(|r| line(r))).collect()
}

pub fn report(args: &ReportArgs) -> Result<String> {
    let mut r = resolver(&args.common)?;
    r.flag("fdr", args.fdr);
    r.flag("method", args.method.as_ref());
    let q = r.get("fdr", 0.05)?;
    let method = parse_method(&r.get_text("method", "bh"))?;
    if !(q > 0.0 && q <= 1.0) {
        return Err(CliError::usage(format!("invalid value for fdr: {q} (must be in (0, 1])")));
    }
    let truth = io::read_truth(&args.truth)?;
    let results = args
        .results
        .iter()
        .map(|p| {
            let res = io::read_results(p)?;
            if res.rows.is_empty() {
                return Err(CliError::data(format!("{}: results table has no genes", p.display())));
            }
            Ok(res)
        })
        .collect::<Result<Vec<_>>>()?;
    let table = report_table(&summarize(&truth, &results, q, method)?);
    if let Some(out) = &args.out {
        table.write(out)?;
    }
    Ok(format!("FDR {} at q = {q}\n{}", method.name(), render(&table)))
}
