//! Pair-level domain types and dataset assembly.
//!
//! Every matrix here is gene-major: row `g` holds one gene across all pairs,
//! so per-gene fits borrow a contiguous slice.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::error::{Error, Result};

/// Text form of a float with 17 significant digits; parses back to the same bits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// One age-matched case-control pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairRecord {
    pub pair_id: String,
    /// Years from blood draw to the case's diagnosis.
    pub time_to_diagnosis: f64,
    pub age: u32,
    pub chip_id: Option<String>,
    pub stratum: Option<String>,
}

/// Genes × pairs matrix of log2 expression values (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionMatrix {
    pub gene_ids: Vec<String>,
    pub pair_ids: Vec<String>,
    values: Vec<f64>,
}

impl ExpressionMatrix {
    pub fn new(gene_ids: Vec<String>, pair_ids: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if values.len() != gene_ids.len() * pair_ids.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} genes x {} pairs",
                values.len(),
                gene_ids.len(),
                pair_ids.len()
            )));
        }
        check_unique(&gene_ids, Error::DuplicateGene)?;
        check_unique(&pair_ids, Error::DuplicatePair)?;
        Ok(Self {
            gene_ids,
            pair_ids,
            values,
        })
    }

    pub fn from_rows(gene_ids: Vec<String>, pair_ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != gene_ids.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} rows for {} gene ids",
                rows.len(),
                gene_ids.len()
            )));
        }
        let mut values = Vec::with_capacity(rows.len() * pair_ids.len());
        for (gene, row) in gene_ids.iter().zip(&rows) {
            if row.len() != pair_ids.len() {
                return Err(Error::ShapeMismatch(format!(
                    "gene '{gene}' has {} values for {} pairs",
                    row.len(),
                    pair_ids.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::new(gene_ids, pair_ids, values)
    }

    pub fn n_genes(&self) -> usize {
        self.gene_ids.len()
    }

    pub fn n_pairs(&self) -> usize {
        self.pair_ids.len()
    }

    pub fn row(&self, gene: usize) -> &[f64] {
        let n = self.n_pairs();
        &self.values[gene * n..(gene + 1) * n]
    }

    pub fn get(&self, gene: usize, pair: usize) -> f64 {
        self.values[gene * self.n_pairs() + pair]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n_genes()).map(move |g| self.row(g))
    }

    /// Reorders columns so that column `j` of the result is column `order[j]` of `self`.
    fn permute_columns(&self, order: &[usize]) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for g in 0..self.n_genes() {
            let row = self.row(g);
            values.extend(order.iter().map(|&j| row[j]));
        }
        Self {
            gene_ids: self.gene_ids.clone(),
            pair_ids: order.iter().map(|&j| self.pair_ids[j].clone()).collect(),
            values,
        }
    }

    fn check_finite(&self) -> Result<()> {
        for g in 0..self.n_genes() {
            if let Some(j) = self.row(g).iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    gene: self.gene_ids[g].clone(),
                    pair: self.pair_ids[j].clone(),
                });
            }
        }
        Ok(())
    }
}

/// Case-minus-control log-expression differences, one row per gene.
pub type DeltaExpressionMatrix = ExpressionMatrix;

/// Element-wise `case - control` after checking labels, shape and finiteness.
pub fn compute_delta(case: &ExpressionMatrix, control: &ExpressionMatrix) -> Result<DeltaExpressionMatrix> {
    if case.n_genes() != control.n_genes() || case.n_pairs() != control.n_pairs() {
        return Err(Error::ShapeMismatch(format!(
            "case is {}x{}, control is {}x{}",
            case.n_genes(),
            case.n_pairs(),
            control.n_genes(),
            control.n_pairs()
        )));
    }
    if case.gene_ids != control.gene_ids {
        return Err(Error::ShapeMismatch("case and control gene order differ".into()));
    }
    if case.pair_ids != control.pair_ids {
        return Err(Error::ShapeMismatch("case and control pair order differ".into()));
    }
    case.check_finite()?;
    control.check_finite()?;
    let values = case
        .values
        .iter()
        .zip(&control.values)
        .map(|(a, b)| a - b)
        .collect();
    Ok(ExpressionMatrix {
        gene_ids: case.gene_ids.clone(),
        pair_ids: case.pair_ids.clone(),
        values,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarcinogenColumn {
    pub name: String,
    pub case: Vec<bool>,
}

impl CarcinogenColumn {
    pub fn as_f64(&self) -> Vec<f64> {
        self.case.iter().map(|&e| if e { 1.0 } else { 0.0 }).collect()
    }
}

/// Encoded per-pair exposure covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureDesign {
    pub pair_ids: Vec<String>,
    /// Continuous exposures as case minus control.
    pub delta_columns: Vec<Column>,
    /// Categorical exposures as differences of one-hot indicators, values in {-1, 0, 1}.
    pub indicator_columns: Vec<Column>,
    /// Case-only binary carcinogen exposure.
    pub carcinogen_case: Option<CarcinogenColumn>,
}

impl ExposureDesign {
    /// A design with no exposure columns at all.
    pub fn empty(pair_ids: Vec<String>) -> Self {
        Self {
            pair_ids,
            delta_columns: Vec::new(),
            indicator_columns: Vec::new(),
            carcinogen_case: None,
        }
    }

    pub fn n_pairs(&self) -> usize {
        self.pair_ids.len()
    }

    /// Delta columns followed by indicator columns; this is the ΔE block of every model.
    pub fn covariates(&self) -> impl Iterator<Item = &Column> + '_ {
        self.delta_columns.iter().chain(&self.indicator_columns)
    }

    pub fn n_covariates(&self) -> usize {
        self.delta_columns.len() + self.indicator_columns.len()
    }

    pub fn covariate_names(&self) -> Vec<String> {
        self.covariates().map(|c| c.name.clone()).collect()
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_pairs();
        check_unique(&self.pair_ids, Error::DuplicatePair)?;
        for col in self.covariates() {
            if col.values.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "exposure column '{}' has {} values for {n} pairs",
                    col.name,
                    col.values.len()
                )));
            }
            if let Some(j) = col.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    gene: col.name.clone(),
                    pair: self.pair_ids[j].clone(),
                });
            }
        }
        for col in &self.indicator_columns {
            if col.values.iter().any(|&v| v != -1.0 && v != 0.0 && v != 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "indicator column '{}' has values outside {{-1, 0, 1}}",
                    col.name
                )));
            }
        }
        if let Some(c) = &self.carcinogen_case {
            if c.case.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "carcinogen column '{}' has {} values for {n} pairs",
                    c.name,
                    c.case.len()
                )));
            }
        }
        Ok(())
    }

    fn permute(&self, order: &[usize]) -> Self {
        let pick = |v: &[f64]| order.iter().map(|&j| v[j]).collect::<Vec<_>>();
        let cols = |cs: &[Column]| {
            cs.iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    values: pick(&c.values),
                })
                .collect::<Vec<_>>()
        };
        Self {
            pair_ids: order.iter().map(|&j| self.pair_ids[j].clone()).collect(),
            delta_columns: cols(&self.delta_columns),
            indicator_columns: cols(&self.indicator_columns),
            carcinogen_case: self.carcinogen_case.as_ref().map(|c| CarcinogenColumn {
                name: c.name.clone(),
                case: order.iter().map(|&j| c.case[j]).collect(),
            }),
        }
    }
}

/// Raw per-pair exposure values before encoding. `None` marks a missing value.
#[derive(Debug, Clone, PartialEq)]
pub struct RawExposure {
    pub name: String,
    pub case: Vec<Option<String>>,
    pub control: Vec<Option<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExposureTable {
    pub pair_ids: Vec<String>,
    pub columns: Vec<RawExposure>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExposureKind {
    Continuous,
    /// Levels in schema order; the first one is the reference.
    Categorical { levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExposureSchema {
    pub columns: Vec<(String, ExposureKind)>,
    /// Column copied as the case-only binary carcinogen indicator.
    pub carcinogen: Option<String>,
}

impl ExposureSchema {
    pub fn kind(&self, name: &str) -> Option<&ExposureKind> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, k)| k)
    }
}

fn raw_value<'a>(col: &'a RawExposure, values: &'a [Option<String>], pair_ids: &[String], j: usize) -> Result<&'a str> {
    match values.get(j).and_then(|v| v.as_deref()) {
        Some(v) if !v.trim().is_empty() => Ok(v.trim()),
        _ => Err(Error::MissingValue {
            column: col.name.clone(),
            pair: pair_ids[j].clone(),
        }),
    }
}

fn parse_number(col: &str, pair: &str, text: &str) -> Result<f64> {
    text.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::InvalidArgument(format!("exposure '{col}' in pair '{pair}': '{text}' is not a finite number")))
}

/// Encodes raw case/control exposures according to `schema`.
///
/// Continuous exposures become case-minus-control deltas. A categorical
/// exposure with `L` levels becomes `L - 1` indicator-difference columns named
/// `<name>.<level>` (reference level dropped). The carcinogen column is copied
/// as a case-only 0/1 flag.
pub fn encode_exposures(raw: &ExposureTable, schema: &ExposureSchema) -> Result<ExposureDesign> {
    let n = raw.pair_ids.len();
    let mut design = ExposureDesign::empty(raw.pair_ids.clone());
    for (name, kind) in &schema.columns {
        let col = raw
            .columns
            .iter()
            .find(|c| &c.name == name)
            .ok_or_else(|| Error::InvalidArgument(format!("exposure column '{name}' declared in schema but absent")))?;
        if col.case.len() != n || col.control.len() != n {
            return Err(Error::ShapeMismatch(format!("exposure '{name}' does not cover every pair")));
        }
        match kind {
            ExposureKind::Continuous => {
                let mut values = Vec::with_capacity(n);
                for j in 0..n {
                    let c = parse_number(name, &raw.pair_ids[j], raw_value(col, &col.case, &raw.pair_ids, j)?)?;
                    let k = parse_number(name, &raw.pair_ids[j], raw_value(col, &col.control, &raw.pair_ids, j)?)?;
                    values.push(c - k);
                }
                design.delta_columns.push(Column {
                    name: name.clone(),
                    values,
                });
            }
            ExposureKind::Categorical { levels } => {
                if levels.is_empty() {
                    return Err(Error::InvalidArgument(format!("categorical exposure '{name}' has no levels")));
                }
                let index = |text: &str| {
                    levels.iter().position(|l| l == text).ok_or_else(|| Error::UnknownLevel {
                        column: name.clone(),
                        level: text.to_string(),
                    })
                };
                let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); levels.len() - 1];
                for j in 0..n {
                    let c = index(raw_value(col, &col.case, &raw.pair_ids, j)?)?;
                    let k = index(raw_value(col, &col.control, &raw.pair_ids, j)?)?;
                    for (l, out) in cols.iter_mut().enumerate() {
                        let level = l + 1;
                        out.push(f64::from(u8::from(c == level)) - f64::from(u8::from(k == level)));
                    }
                }
                for (l, values) in cols.into_iter().enumerate() {
                    design.indicator_columns.push(Column {
                        name: format!("{name}.{}", levels[l + 1]),
                        values,
                    });
                }
            }
        }
    }
    if let Some(name) = &schema.carcinogen {
        let col = raw
            .columns
            .iter()
            .find(|c| &c.name == name)
            .ok_or_else(|| Error::InvalidArgument(format!("carcinogen column '{name}' is absent from the exposure table")))?;
        let mut case = Vec::with_capacity(n);
        for j in 0..n {
            let text = raw_value(col, &col.case, &raw.pair_ids, j)?;
            let flag = match schema.kind(name) {
                Some(ExposureKind::Categorical { levels }) if levels.len() == 2 => {
                    match levels.iter().position(|l| l == text) {
                        Some(i) => i == 1,
                        None => {
                            return Err(Error::UnknownLevel {
                                column: name.clone(),
                                level: text.to_string(),
                            })
                        }
                    }
                }
                Some(ExposureKind::Categorical { .. }) => {
                    return Err(Error::InvalidArgument(format!("carcinogen column '{name}' must be binary")))
                }
                _ => match parse_number(name, &raw.pair_ids[j], text)? {
                    v if v == 0.0 => false,
                    v if v == 1.0 => true,
                    _ => {
                        return Err(Error::InvalidArgument(format!(
                            "carcinogen column '{name}' must be 0/1, got '{text}' in pair '{}'",
                            raw.pair_ids[j]
                        )))
                    }
                },
            };
            case.push(flag);
        }
        design.carcinogen_case = Some(CarcinogenColumn { name: name.clone(), case });
    }
    design.validate()?;
    Ok(design)
}

/// Pairs, ΔG and exposures sharing one canonical pair order.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisDataset {
    pub pairs: Vec<PairRecord>,
    pub delta_expression: DeltaExpressionMatrix,
    pub exposures: ExposureDesign,
}

impl AnalysisDataset {
    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn n_genes(&self) -> usize {
        self.delta_expression.n_genes()
    }

    pub fn times(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.time_to_diagnosis).collect()
    }

    /// Sub-dataset restricted to the given pair indices (kept in the given order).
    pub fn select_pairs(&self, indices: &[usize]) -> AnalysisDataset {
        AnalysisDataset {
            pairs: indices.iter().map(|&j| self.pairs[j].clone()).collect(),
            delta_expression: self.delta_expression.permute_columns(indices),
            exposures: self.exposures.permute(indices),
        }
    }
}

fn check_unique(ids: &[String], err: impl Fn(String) -> Error) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(err(id.clone()));
        }
    }
    Ok(())
}

/// Ascending time to diagnosis, ties broken by pair_id.
pub fn canonical_order(pairs: &[PairRecord]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| {
        pairs[a]
            .time_to_diagnosis
            .total_cmp(&pairs[b].time_to_diagnosis)
            .then_with(|| pairs[a].pair_id.cmp(&pairs[b].pair_id))
    });
    order
}

fn alignment_index(ids: &[String], wanted: &[String], source_name: &str) -> Result<Vec<usize>> {
    let position: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut out = Vec::with_capacity(wanted.len());
    for id in wanted {
        match position.get(id.as_str()) {
            Some(&i) => out.push(i),
            None => {
                return Err(Error::Alignment {
                    pair_id: id.clone(),
                    source_name: source_name.to_string(),
                })
            }
        }
    }
    Ok(out)
}

/// Aligns the three inputs on the canonical pair order.
pub fn assemble_dataset(
    pairs: Vec<PairRecord>,
    delta_expression: DeltaExpressionMatrix,
    exposures: ExposureDesign,
) -> Result<AnalysisDataset> {
    let ids: Vec<String> = pairs.iter().map(|p| p.pair_id.clone()).collect();
    check_unique(&ids, Error::DuplicatePair)?;
    for p in &pairs {
        if !(p.time_to_diagnosis.is_finite() && p.time_to_diagnosis > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "pair '{}' has time_to_diagnosis {} (must be > 0)",
                p.pair_id, p.time_to_diagnosis
            )));
        }
    }
    delta_expression.check_finite()?;
    exposures.validate()?;

    // Any id present in one input but not another is reported by name.
    for (other, name) in [
        (&delta_expression.pair_ids, "expression"),
        (&exposures.pair_ids, "exposures"),
    ] {
        if other.len() != ids.len() {
            let theirs: HashSet<&str> = other.iter().map(String::as_str).collect();
            let ours: HashSet<&str> = ids.iter().map(String::as_str).collect();
            if let Some(id) = ids.iter().find(|id| !theirs.contains(id.as_str())) {
                return Err(Error::Alignment {
                    pair_id: id.clone(),
                    source_name: name.to_string(),
                });
            }
            if let Some(id) = other.iter().find(|id| !ours.contains(id.as_str())) {
                return Err(Error::Alignment {
                    pair_id: id.clone(),
                    source_name: "pairs".to_string(),
                });
            }
        }
        alignment_index(other, &ids, name)?;
        alignment_index(&ids, other, "pairs")?;
    }

    let order = canonical_order(&pairs);
    let sorted_ids: Vec<String> = order.iter().map(|&j| ids[j].clone()).collect();
    let expr_order = alignment_index(&delta_expression.pair_ids, &sorted_ids, "expression")?;
    let exp_order = alignment_index(&exposures.pair_ids, &sorted_ids, "exposures")?;
    Ok(AnalysisDataset {
        pairs: order.iter().map(|&j| pairs[j].clone()).collect(),
        delta_expression: delta_expression.permute_columns(&expr_order),
        exposures: exposures.permute(&exp_order),
    })
}

/// Splits a dataset by stratum label.
///
/// With `levels = None` every observed stratum is returned (sorted by label);
/// otherwise exactly the requested strata, in the requested order.
pub fn stratify(dataset: &AnalysisDataset, levels: Option<&[String]>) -> Result<Vec<(String, AnalysisDataset)>> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (j, p) in dataset.pairs.iter().enumerate() {
        let label = p
            .stratum
            .as_deref()
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::MissingStratum(p.pair_id.clone()))?;
        groups.entry(label).or_default().push(j);
    }
    match levels {
        None => Ok(groups
            .into_iter()
            .map(|(label, idx)| (label.to_string(), dataset.select_pairs(&idx)))
            .collect()),
        Some(levels) => levels
            .iter()
            .map(|label| match groups.get(label.as_str()) {
                Some(idx) => Ok((label.clone(), dataset.select_pairs(idx))),
                None => Err(Error::EmptyStratum(label.clone())),
            })
            .collect(),
    }
}
