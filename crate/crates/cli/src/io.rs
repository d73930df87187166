//! CSV formats read and written by the command-line tool.
//!
//! Floats are written with 17 significant digits so that every value reads
//! back to the same bits. Missing values are empty fields.

use std::collections::HashSet;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use trajscan::data::{
    format_float, ExposureKind, ExposureSchema, ExposureTable, ExpressionMatrix, PairRecord, RawExposure,
};
use trajscan::results::{FitStatus, GeneFitResult, ScanResults};
use trajscan::simulate::{GeneClass, GeneSpec, GeneTruth, GroundTruth};
use trajscan::survival::PenalizedPath;

use crate::error::{CliError, Result};

/// A CSV file held as text: header plus rows of equal width.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: Vec<String>) -> Self {
        Self {
            headers,
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    pub fn require(&self, name: &str, path: &Path) -> Result<usize> {
        self.column(name)
            .ok_or_else(|| CliError::data(format!("{}: missing column '{name}'", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| CliError::in_file(path, e))?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| CliError::in_file(path, e))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let mut seen = HashSet::new();
        if let Some(dup) = headers.iter().find(|h| !seen.insert(h.as_str())) {
            return Err(CliError::data(format!("{}: duplicate column '{dup}'", path.display())));
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| CliError::in_file(path, e))?;
            rows.push(record.iter().map(|f| f.trim().to_string()).collect());
        }
        Ok(Self { headers, rows })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)
            .map_err(|e| CliError::in_file(path, e))?;
        writer.write_record(&self.headers).map_err(|e| CliError::in_file(path, e))?;
        for row in &self.rows {
            writer.write_record(row).map_err(|e| CliError::in_file(path, e))?;
        }
        writer.flush().map_err(|e| CliError::in_file(path, e))
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

fn parse_f64(text: &str, what: &str, path: &Path) -> Result<f64> {
    text.parse::<f64>()
        .map_err(|_| CliError::data(format!("{}: {what}: '{text}' is not a number", path.display())))
}

fn parse_opt(text: &str, what: &str, path: &Path) -> Result<Option<f64>> {
    if text.is_empty() {
        Ok(None)
    } else {
        parse_f64(text, what, path).map(Some)
    }
}

fn non_empty(text: &str) -> Option<String> {
    (!text.is_empty()).then(|| text.to_string())
}

pub const PAIR_COLUMNS: [&str; 5] = ["pair_id", "time_to_diagnosis_years", "age", "chip_id", "stratum"];

pub fn write_pairs(path: &Path, pairs: &[PairRecord]) -> Result<()> {
    let mut t = Table::new(PAIR_COLUMNS.iter().map(|s| s.to_string()).collect());
    for p in pairs {
        t.rows.push(vec![
            p.pair_id.clone(),
            format_float(p.time_to_diagnosis),
            p.age.to_string(),
            p.chip_id.clone().unwrap_or_default(),
            p.stratum.clone().unwrap_or_default(),
        ]);
    }
    t.write(path)
}

pub fn read_pairs(path: &Path) -> Result<Vec<PairRecord>> {
    let t = Table::read(path)?;
    let cols: Vec<usize> = PAIR_COLUMNS
        .iter()
        .map(|c| t.require(c, path))
        .collect::<Result<_>>()?;
    t.rows
        .iter()
        .map(|row| {
            let id = &row[cols[0]];
            Ok(PairRecord {
                pair_id: id.clone(),
                time_to_diagnosis: parse_f64(&row[cols[1]], &format!("pair '{id}' time_to_diagnosis_years"), path)?,
                age: row[cols[2]]
                    .parse()
                    .map_err(|_| CliError::data(format!("{}: pair '{id}': age '{}' is not an integer", path.display(), row[cols[2]])))?,
                chip_id: non_empty(&row[cols[3]]),
                stratum: non_empty(&row[cols[4]]),
            })
        })
        .collect()
}

/// Genes as rows, pairs as columns, first column `gene_id`.
pub fn write_matrix(path: &Path, m: &ExpressionMatrix) -> Result<()> {
    let mut headers = vec!["gene_id".to_string()];
    headers.extend(m.pair_ids.iter().cloned());
    let mut t = Table::new(headers);
    for (g, row) in m.rows().enumerate() {
        let mut out = Vec::with_capacity(row.len() + 1);
        out.push(m.gene_ids[g].clone());
        out.extend(row.iter().map(|&v| format_float(v)));
        t.rows.push(out);
    }
    t.write(path)
}

pub fn read_matrix(path: &Path) -> Result<ExpressionMatrix> {
    let t = Table::read(path)?;
    if t.headers.first().map(String::as_str) != Some("gene_id") {
        return Err(CliError::data(format!("{}: first column must be 'gene_id'", path.display())));
    }
    let pair_ids = t.headers[1..].to_vec();
    let mut gene_ids = Vec::with_capacity(t.rows.len());
    let mut rows = Vec::with_capacity(t.rows.len());
    for row in &t.rows {
        let gene = &row[0];
        let values = row[1..]
            .iter()
            .zip(&pair_ids)
            .map(|(v, pair)| parse_f64(v, &format!("gene '{gene}', pair '{pair}'"), path))
            .collect::<Result<Vec<f64>>>()?;
        gene_ids.push(gene.clone());
        rows.push(values);
    }
    ExpressionMatrix::from_rows(gene_ids, pair_ids, rows).map_err(|e| CliError::in_file(path, e))
}

/// `pair_id`, then `case_<name>` and `ctrl_<name>` for each exposure.
pub fn write_exposures(path: &Path, table: &ExposureTable) -> Result<()> {
    let mut headers = vec!["pair_id".to_string()];
    for c in &table.columns {
        headers.push(format!("case_{}", c.name));
        headers.push(format!("ctrl_{}", c.name));
    }
    let mut t = Table::new(headers);
    for (j, id) in table.pair_ids.iter().enumerate() {
        let mut row = vec![id.clone()];
        for c in &table.columns {
            row.push(c.case[j].clone().unwrap_or_default());
            row.push(c.control[j].clone().unwrap_or_default());
        }
        t.rows.push(row);
    }
    t.write(path)
}

pub fn read_exposures(path: &Path) -> Result<ExposureTable> {
    let t = Table::read(path)?;
    let id_col = t.require("pair_id", path)?;
    let mut columns = Vec::new();
    for (k, h) in t.headers.iter().enumerate() {
        if k == id_col {
            continue;
        }
        let Some(name) = h.strip_prefix("case_") else {
            if h.starts_with("ctrl_") {
                continue;
            }
            return Err(CliError::data(format!(
                "{}: column '{h}' is neither case_<name> nor ctrl_<name>",
                path.display()
            )));
        };
        let ctrl = t.require(&format!("ctrl_{name}"), path)?;
        columns.push(RawExposure {
            name: name.to_string(),
            case: t.rows.iter().map(|r| non_empty(&r[k])).collect(),
            control: t.rows.iter().map(|r| non_empty(&r[ctrl])).collect(),
        });
    }
    for h in &t.headers {
        if let Some(name) = h.strip_prefix("ctrl_") {
            t.require(&format!("case_{name}"), path)?;
        }
    }
    Ok(ExposureTable {
        pair_ids: t.rows.iter().map(|r| r[id_col].clone()).collect(),
        columns,
    })
}

/// Column kinds inferred from the values: numeric columns are continuous,
/// anything else is categorical with levels in sorted order (the first is the
/// reference).
pub fn infer_schema(table: &ExposureTable, carcinogen: Option<&str>) -> ExposureSchema {
    let columns = table
        .columns
        .iter()
        .map(|c| {
            let values = c.case.iter().chain(&c.control).flatten();
            let numeric = values.clone().all(|v| v.parse::<f64>().is_ok());
            let kind = if numeric {
                ExposureKind::Continuous
            } else {
                let mut levels: Vec<String> = values.cloned().collect();
                levels.sort();
                levels.dedup();
                ExposureKind::Categorical { levels }
            };
            (c.name.clone(), kind)
        })
        .collect();
    ExposureSchema {
        columns,
        carcinogen: carcinogen
            .filter(|name| table.columns.iter().any(|c| c.name == *name))
            .map(str::to_string),
    }
}

pub const TRUTH_COLUMNS: [&str; 6] = ["gene_id", "class", "alpha0", "alpha2", "t_change", "psi_scale"];

pub fn write_truth(path: &Path, truth: &GroundTruth) -> Result<()> {
    let mut t = Table::new(TRUTH_COLUMNS.iter().map(|s| s.to_string()).collect());
    for g in &truth.genes {
        let s = &g.spec;
        t.rows.push(vec![
            g.gene_id.clone(),
            s.class.name().to_string(),
            format_float(s.alpha0),
            format_float(s.alpha2),
            format_float(s.t_change),
            format_float(s.psi_scale),
        ]);
    }
    t.write(path)
}

pub fn read_truth(path: &Path) -> Result<GroundTruth> {
    let t = Table::read(path)?;
    let cols: Vec<usize> = TRUTH_COLUMNS
        .iter()
        .map(|c| t.require(c, path))
        .collect::<Result<_>>()?;
    let genes = t
        .rows
        .iter()
        .map(|row| {
            let id = &row[cols[0]];
            let class = GeneClass::parse(&row[cols[1]])
                .ok_or_else(|| CliError::data(format!("{}: gene '{id}': unknown class '{}'", path.display(), row[cols[1]])))?;
            let num = |k: usize| parse_f64(&row[cols[k]], &format!("gene '{id}' {}", TRUTH_COLUMNS[k]), path);
            Ok(GeneTruth {
                gene_id: id.clone(),
                spec: GeneSpec {
                    class,
                    alpha0: num(2)?,
                    alpha2: num(3)?,
                    t_change: num(4)?,
                    psi_scale: num(5)?,
                },
            })
        })
        .collect::<Result<_>>()?;
    Ok(GroundTruth { genes })
}

const RESULT_HEAD: [&str; 3] = ["gene_id", "model", "status"];
const RESULT_MID: [&str; 4] = ["alpha2", "t_hat", "statistic", "p_value"];

/// Header of a results table: fixed columns, `alpha1.<covariate>`, then extras.
pub fn result_headers(results: &ScanResults) -> Vec<String> {
    let mut h: Vec<String> = RESULT_HEAD.iter().map(|s| s.to_string()).collect();
    h.push("alpha0".into());
    h.extend(results.covariate_names.iter().map(|c| format!("alpha1.{c}")));
    h.extend(RESULT_MID.iter().map(|s| s.to_string()));
    h.extend(results.extra_names.iter().cloned());
    h
}

pub fn results_table(results: &ScanResults) -> Table {
    let mut t = Table::new(result_headers(results));
    for r in &results.rows {
        let mut row = vec![r.gene_id.clone(), r.model.clone(), r.status.label(), fmt_opt(r.alpha0)];
        row.extend(r.alpha1.iter().map(|&a| fmt_opt(a)));
        row.extend([r.alpha2, r.t_hat, r.statistic, r.p_value].map(fmt_opt));
        row.extend(r.extras.iter().map(|&e| fmt_opt(e)));
        t.rows.push(row);
    }
    t
}

pub fn write_results(path: &Path, results: &ScanResults) -> Result<()> {
    results_table(results).write(path)
}

/// Reads a results table. Columns appended by `adjust` (`q_value`,
/// `rejected`) are not part of the extras.
pub fn read_results(path: &Path) -> Result<ScanResults> {
    let t = Table::read(path)?;
    for (k, name) in RESULT_HEAD.iter().chain(&["alpha0"]).enumerate() {
        if t.headers.get(k).map(String::as_str) != Some(name) {
            return Err(CliError::data(format!("{}: expected column '{name}' at position {}", path.display(), k + 1)));
        }
    }
    let alpha2 = t.require("alpha2", path)?;
    let covariate_names: Vec<String> = t.headers[4..alpha2]
        .iter()
        .map(|h| {
            h.strip_prefix("alpha1.")
                .map(str::to_string)
                .ok_or_else(|| CliError::data(format!("{}: unexpected column '{h}'", path.display())))
        })
        .collect::<Result<_>>()?;
    for (k, name) in RESULT_MID.iter().enumerate() {
        if t.headers.get(alpha2 + k).map(String::as_str) != Some(name) {
            return Err(CliError::data(format!("{}: expected column '{name}' after alpha1 columns", path.display())));
        }
    }
    let first_extra = alpha2 + RESULT_MID.len();
    let end = t
        .headers
        .iter()
        .position(|h| h == "q_value" || h == "rejected")
        .unwrap_or(t.headers.len());
    let extra_names = t.headers[first_extra..end].to_vec();
    let rows = t
        .rows
        .iter()
        .map(|row| {
            let id = &row[0];
            let num = |k: usize| parse_opt(&row[k], &format!("gene '{id}' {}", t.headers[k]), path);
            Ok(GeneFitResult {
                gene_id: id.clone(),
                model: row[1].clone(),
                status: FitStatus::parse(&row[2]),
                alpha0: num(3)?,
                alpha1: (4..alpha2).map(num).collect::<Result<_>>()?,
                alpha2: num(alpha2)?,
                t_hat: num(alpha2 + 1)?,
                statistic: num(alpha2 + 2)?,
                p_value: num(alpha2 + 3)?,
                extras: (first_extra..end).map(num).collect::<Result<_>>()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let model = rows.first().map(|r| r.model.clone()).unwrap_or_default();
    Ok(ScanResults {
        model,
        covariate_names,
        extra_names,
        rows,
    })
}

/// One row per λ: fit summaries followed by one coefficient column per gene.
pub fn write_path(path: &Path, p: &PenalizedPath) -> Result<()> {
    let mut headers: Vec<String> = ["lambda", "objective", "converged", "iterations", "n_nonzero"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    headers.extend(p.gene_ids.iter().map(|g| format!("beta.{g}")));
    let mut t = Table::new(headers);
    let support = p.support_sizes();
    for k in 0..p.lambda_grid.len() {
        let mut row = vec![
            format_float(p.lambda_grid[k]),
            format_float(p.objectives[k]),
            u8::from(p.converged[k]).to_string(),
            p.iterations[k].to_string(),
            support[k].to_string(),
        ];
        row.extend(p.betas[k].iter().map(|&b| format_float(b)));
        t.rows.push(row);
    }
    t.write(path)
}

/// Flat `key=value` text, one entry per line, in the given order.
pub fn write_manifest(path: &Path, entries: &[(String, String)]) -> Result<()> {
    let mut f = File::create(path).map_err(|e| CliError::in_file(path, e))?;
    for (k, v) in entries {
        writeln!(f, "{k}={v}").map_err(|e| CliError::in_file(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_inference() {
        let table = ExposureTable {
            pair_ids: vec!["a".into(), "b".into()],
            columns: vec![
                RawExposure {
                    name: "x".into(),
                    case: vec![Some("1.5".into()), Some("2".into())],
                    control: vec![Some("0".into()), None],
                },
                RawExposure {
                    name: "smoke".into(),
                    case: vec![Some("never".into()), Some("current".into())],
                    control: vec![Some("former".into()), Some("never".into())],
                },
            ],
        };
        let s = infer_schema(&table, Some("x"));
        assert_eq!(s.columns[0].1, ExposureKind::Continuous);
        assert_eq!(
            s.columns[1].1,
            ExposureKind::Categorical {
                levels: vec!["current".into(), "former".into(), "never".into()]
            }
        );
        assert_eq!(s.carcinogen.as_deref(), Some("x"));
        assert_eq!(infer_schema(&table, Some("hrt")).carcinogen, None);
    }

    #[test]
    fn missing_optional_fields_are_empty() {
        assert_eq!(fmt_opt(None), "");
        assert_eq!(fmt_opt(Some(0.5)), format_float(0.5));
    }
}
