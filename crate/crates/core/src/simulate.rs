//! Generative model of a prospective nested case-control transcriptomics study.
//!
//! A cohort is followed for a fixed period with exponential event times; every
//! incident case is matched on exact integer age to a woman who stays
//! event-free through the end of follow-up, and each pair is assayed on a
//! shared chip. Expression is generated gene by gene with known trajectory
//! classes so fits can be scored against the truth.
//!
//! All additive components of a simulated expression value are snapped to a
//! 2^-32 grid before being summed. Sums of such values are exact in f64 (for
//! magnitudes below 2^21), so pair-shared terms (baseline, age, chip) cancel
//! bit for bit in the case-minus-control difference.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;

use crate::data::{
    encode_exposures, format_float, ExposureDesign, ExposureKind, ExposureSchema, ExposureTable, ExpressionMatrix,
    PairRecord, RawExposure,
};
use crate::error::{Error, Result};
use crate::rng::{stream, Stage};
use crate::trajectory::HingeForm;

const GRID: f64 = 4_294_967_296.0; // 2^32

#[inline]
fn snap(x: f64) -> f64 {
    (x * GRID).round() / GRID
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GeneClass {
    Null,
    ConstantDiff,
    Hinge,
    Interaction,
}

impl GeneClass {
    pub fn name(self) -> &'static str {
        match self {
            GeneClass::Null => "null",
            GeneClass::ConstantDiff => "constant_diff",
            GeneClass::Hinge => "hinge",
            GeneClass::Interaction => "interaction",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "null" => Some(GeneClass::Null),
            "constant_diff" => Some(GeneClass::ConstantDiff),
            "hinge" => Some(GeneClass::Hinge),
            "interaction" => Some(GeneClass::Interaction),
            _ => None,
        }
    }

    pub const ALL: [GeneClass; 4] = [
        GeneClass::Null,
        GeneClass::ConstantDiff,
        GeneClass::Hinge,
        GeneClass::Interaction,
    ];
}

/// Effect parameters of one simulated gene class.
///
/// The case value receives `alpha0` plus a class-specific trajectory:
/// `alpha2 * h(T)` for hinge genes and `psi_scale * h(T) * E2_case` for
/// interaction genes, where `h` is the hinge regressor at `t_change`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneSpec {
    pub class: GeneClass,
    pub alpha0: f64,
    pub alpha2: f64,
    pub t_change: f64,
    pub psi_scale: f64,
}

impl GeneSpec {
    pub fn null() -> Self {
        Self {
            class: GeneClass::Null,
            alpha0: 0.0,
            alpha2: 0.0,
            t_change: 0.0,
            psi_scale: 0.0,
        }
    }

    pub fn constant_diff(alpha0: f64) -> Self {
        Self {
            class: GeneClass::ConstantDiff,
            alpha0,
            ..Self::null()
        }
    }

    pub fn hinge(alpha2: f64, t_change: f64) -> Self {
        Self {
            class: GeneClass::Hinge,
            alpha2,
            t_change,
            ..Self::null()
        }
    }

    pub fn interaction(psi_scale: f64, t_change: f64) -> Self {
        Self {
            class: GeneClass::Interaction,
            psi_scale,
            t_change,
            ..Self::null()
        }
    }

    /// Mean case-minus-control shift for a pair.
    pub fn effect(&self, form: HingeForm, time: f64, carcinogen_case: bool) -> f64 {
        match self.class {
            GeneClass::Null => 0.0,
            GeneClass::ConstantDiff => self.alpha0,
            GeneClass::Hinge => self.alpha0 + self.alpha2 * form.value(self.t_change, time),
            GeneClass::Interaction => {
                let e2 = if carcinogen_case { 1.0 } else { 0.0 };
                self.alpha0 + self.psi_scale * form.value(self.t_change, time) * e2
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneGroup {
    pub spec: GeneSpec,
    pub count: usize,
}

/// Coefficients linking the simulated exposures to log expression (same for every gene).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExposureEffects {
    /// Per unit of the continuous exposure `diet`.
    pub diet: f64,
    /// Per unit of the binary exposure `hrt`.
    pub hrt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub n_women: usize,
    pub follow_up_years: f64,
    /// Cumulative incidence over the follow-up period.
    pub incidence_7yr: f64,
    /// Inclusive range of enrolment ages.
    pub age_range: (u32, u32),
    /// Upper limit on the number of matched pairs kept for assay.
    pub max_pairs: Option<usize>,
    pub n_genes: usize,
    /// Gene classes in output order; counts must sum to `n_genes`.
    pub gene_groups: Vec<GeneGroup>,
    pub baseline_mean: f64,
    pub baseline_sd: f64,
    /// Individual residual scale for each member of a pair.
    pub noise_sd: f64,
    pub chip_sd: f64,
    pub age_slope: f64,
    pub exposure_effects: ExposureEffects,
    /// Prevalence of the binary exposure `hrt` (the carcinogen).
    pub hrt_prevalence: f64,
    pub pairs_per_chip: usize,
    /// Probability that a case is labelled `ER+` rather than `ER-`.
    pub er_positive_fraction: f64,
    pub hinge_form: HingeForm,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_women: 49_633,
            follow_up_years: 7.0,
            incidence_7yr: 0.015,
            age_range: (45, 64),
            max_pairs: None,
            n_genes: 1000,
            gene_groups: vec![
                GeneGroup {
                    spec: GeneSpec::null(),
                    count: 940,
                },
                GeneGroup {
                    spec: GeneSpec::constant_diff(1.0),
                    count: 20,
                },
                GeneGroup {
                    spec: GeneSpec::hinge(1.0, 2.0),
                    count: 20,
                },
                GeneGroup {
                    spec: GeneSpec::interaction(2.0, 2.0),
                    count: 20,
                },
            ],
            baseline_mean: 8.0,
            baseline_sd: 1.0,
            noise_sd: 1.0,
            chip_sd: 0.5,
            age_slope: 0.02,
            exposure_effects: ExposureEffects { diet: 0.3, hrt: 0.2 },
            hrt_prevalence: 0.3,
            pairs_per_chip: 3,
            er_positive_fraction: 0.75,
            hinge_form: HingeForm::Continuous,
            seed: 1,
        }
    }
}

fn check_scale(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be finite and >= 0, got {v}")))
    }
}

impl SimulationConfig {
    /// Hazard of the exponential event law matching the cumulative incidence.
    pub fn event_rate(&self) -> f64 {
        -(-self.incidence_7yr).ln_1p() / self.follow_up_years
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_women == 0 {
            return Err(Error::config("n_women", "must be positive"));
        }
        if !(self.follow_up_years.is_finite() && self.follow_up_years > 0.0) {
            return Err(Error::config("follow_up_years", "must be positive"));
        }
        if !(self.incidence_7yr > 0.0 && self.incidence_7yr < 1.0) {
            return Err(Error::config("incidence_7yr", format!("must lie in (0, 1), got {}", self.incidence_7yr)));
        }
        if self.age_range.0 > self.age_range.1 {
            return Err(Error::config("age_range", "minimum exceeds maximum"));
        }
        check_scale("noise_sd", self.noise_sd)?;
        check_scale("chip_sd", self.chip_sd)?;
        check_scale("baseline_sd", self.baseline_sd)?;
        for (field, v) in [
            ("baseline_mean", self.baseline_mean),
            ("age_slope", self.age_slope),
            ("exposure_effects.diet", self.exposure_effects.diet),
            ("exposure_effects.hrt", self.exposure_effects.hrt),
        ] {
            if !v.is_finite() {
                return Err(Error::config(field, "must be finite"));
            }
        }
        if !(0.0..=1.0).contains(&self.hrt_prevalence) {
            return Err(Error::config("hrt_prevalence", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.er_positive_fraction) {
            return Err(Error::config("er_positive_fraction", "must lie in [0, 1]"));
        }
        if self.max_pairs == Some(0) {
            return Err(Error::config("max_pairs", "must be positive"));
        }
        if self.pairs_per_chip == 0 {
            return Err(Error::config("pairs_per_chip", "must be positive"));
        }
        let total: usize = self.gene_groups.iter().map(|g| g.count).sum();
        if total != self.n_genes {
            return Err(Error::config(
                "gene_groups",
                format!("class counts sum to {total}, expected n_genes = {}", self.n_genes),
            ));
        }
        for g in &self.gene_groups {
            let s = g.spec;
            if matches!(s.class, GeneClass::Hinge | GeneClass::Interaction)
                && !(s.t_change > 0.0 && s.t_change <= self.follow_up_years)
            {
                return Err(Error::config(
                    "t_change",
                    format!("must lie in (0, {}], got {}", self.follow_up_years, s.t_change),
                ));
            }
            for (field, v) in [("alpha0", s.alpha0), ("alpha2", s.alpha2), ("psi_scale", s.psi_scale)] {
                if !v.is_finite() {
                    return Err(Error::config(field, "must be finite"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Woman {
    pub woman_id: usize,
    pub age: u32,
    /// Years from blood draw to diagnosis; `None` if event-free through follow-up.
    pub event_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub women: Vec<Woman>,
    pub follow_up_years: f64,
}

impl Cohort {
    pub fn n_cases(&self) -> usize {
        self.women.iter().filter(|w| w.event_time.is_some()).count()
    }
}

/// Draws the full cohort: integer ages uniform on `age_range`, exponential
/// event times, censoring at the end of follow-up.
pub fn simulate_cohort(config: &SimulationConfig) -> Result<Cohort> {
    config.validate()?;
    let exp = Exp::new(config.event_rate()).map_err(|e| Error::config("incidence_7yr", e.to_string()))?;
    let mut rng = stream(config.seed, Stage::Cohort, 0);
    let (lo, hi) = config.age_range;
    let women = (0..config.n_women)
        .map(|woman_id| {
            let age = rng.random_range(lo..=hi);
            let t: f64 = exp.sample(&mut rng);
            Woman {
                woman_id,
                age,
                event_time: (t <= config.follow_up_years).then_some(t),
            }
        })
        .collect();
    Ok(Cohort {
        women,
        follow_up_years: config.follow_up_years,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NccSample {
    pub pairs: Vec<PairRecord>,
    pub case_ids: Vec<usize>,
    pub control_ids: Vec<usize>,
    /// Cases left unmatched for lack of an eligible control.
    pub dropped: usize,
}

/// Matches each case to one control of identical age who stays event-free
/// through the end of follow-up. Controls are drawn without replacement;
/// cases are processed in order of event time. With `max_pairs` set, a
/// uniformly random subset of the matched pairs is kept.
pub fn draw_ncc_pairs(cohort: &Cohort, config: &SimulationConfig) -> Result<NccSample> {
    let mut cases: Vec<&Woman> = cohort.women.iter().filter(|w| w.event_time.is_some()).collect();
    cases.sort_by(|a, b| {
        a.event_time
            .unwrap()
            .total_cmp(&b.event_time.unwrap())
            .then(a.woman_id.cmp(&b.woman_id))
    });
    let mut pools: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for w in cohort.women.iter().filter(|w| w.event_time.is_none()) {
        pools.entry(w.age).or_default().push(w.woman_id);
    }
    let mut rng = stream(config.seed, Stage::Matching, 0);
    let mut sample = NccSample {
        pairs: Vec::new(),
        case_ids: Vec::new(),
        control_ids: Vec::new(),
        dropped: 0,
    };
    let mut matched = Vec::new();
    for case in cases {
        let pool = pools.entry(case.age).or_default();
        if pool.is_empty() {
            sample.dropped += 1;
            continue;
        }
        let k = rng.random_range(0..pool.len());
        let control = pool.swap_remove(k);
        let er_positive = rng.random_bool(config.er_positive_fraction);
        matched.push((case, control, er_positive));
    }
    if let Some(max) = config.max_pairs {
        if matched.len() > max {
            let mut pick_rng = stream(config.seed, Stage::Pair, 0);
            let mut keep = rand::seq::index::sample(&mut pick_rng, matched.len(), max).into_vec();
            keep.sort_unstable();
            matched = keep.into_iter().map(|k| matched[k]).collect();
        }
    }
    for (index, (case, control, er_positive)) in matched.into_iter().enumerate() {
        sample.pairs.push(PairRecord {
            pair_id: format!("pair{:05}", index + 1),
            time_to_diagnosis: case.event_time.unwrap(),
            age: case.age,
            chip_id: Some(format!("chip{:04}", index / config.pairs_per_chip + 1)),
            stratum: Some(if er_positive { "ER+" } else { "ER-" }.to_string()),
        });
        sample.case_ids.push(case.woman_id);
        sample.control_ids.push(control);
    }
    if sample.pairs.is_empty() {
        return Err(Error::NoEligiblePairs);
    }
    Ok(sample)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneTruth {
    pub gene_id: String,
    pub spec: GeneSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub genes: Vec<GeneTruth>,
}

impl GroundTruth {
    pub fn from_config(config: &SimulationConfig) -> Self {
        let mut genes = Vec::with_capacity(config.n_genes);
        for group in &config.gene_groups {
            for _ in 0..group.count {
                genes.push(GeneTruth {
                    gene_id: format!("g{:05}", genes.len() + 1),
                    spec: group.spec,
                });
            }
        }
        Self { genes }
    }

    pub fn class_of(&self, gene_id: &str) -> Option<GeneClass> {
        self.genes.iter().find(|g| g.gene_id == gene_id).map(|g| g.spec.class)
    }
}

/// Schema of the exposures written by the simulator: `diet` (continuous) and
/// `hrt` (0/1, also the carcinogen).
pub fn simulated_exposure_schema() -> ExposureSchema {
    ExposureSchema {
        columns: vec![
            ("diet".to_string(), ExposureKind::Continuous),
            ("hrt".to_string(), ExposureKind::Continuous),
        ],
        carcinogen: Some("hrt".to_string()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedExpression {
    pub case: ExpressionMatrix,
    pub control: ExpressionMatrix,
    pub exposures: ExposureTable,
    pub design: ExposureDesign,
}

struct MemberExposure {
    diet: f64,
    hrt: bool,
}

impl MemberExposure {
    fn effect(&self, gamma: &ExposureEffects) -> f64 {
        snap(gamma.diet * self.diet + if self.hrt { gamma.hrt } else { 0.0 })
    }
}

/// Generates case and control log expression for every gene of `truth`.
pub fn simulate_expression(
    pairs: &[PairRecord],
    config: &SimulationConfig,
    truth: &GroundTruth,
) -> Result<SimulatedExpression> {
    config.validate()?;
    let n = pairs.len();
    let pair_ids: Vec<String> = pairs.iter().map(|p| p.pair_id.clone()).collect();

    let mut case_exp = Vec::with_capacity(n);
    let mut ctrl_exp = Vec::with_capacity(n);
    for j in 0..n {
        let mut rng = stream(config.seed, Stage::Exposure, j as u64);
        let draw = |rng: &mut crate::rng::StreamRng| MemberExposure {
            diet: snap(rng.sample(StandardNormal)),
            hrt: rng.random_bool(config.hrt_prevalence),
        };
        case_exp.push(draw(&mut rng));
        ctrl_exp.push(draw(&mut rng));
    }

    // Chip effects are per (gene, chip); pairs without a chip label get their own.
    let mut chip_index: BTreeMap<String, usize> = BTreeMap::new();
    let pair_chip: Vec<usize> = pairs
        .iter()
        .map(|p| {
            let key = p.chip_id.clone().unwrap_or_else(|| format!("\u{0}{}", p.pair_id));
            let next = chip_index.len();
            *chip_index.entry(key).or_insert(next)
        })
        .collect();
    let n_chips = chip_index.len();

    let gamma = config.exposure_effects;
    let rows: Vec<(Vec<f64>, Vec<f64>)> = truth
        .genes
        .par_iter()
        .enumerate()
        .map(|(g, gene)| {
            let mut rng = stream(config.seed, Stage::Gene, g as u64);
            let mut chip_rng = stream(config.seed, Stage::Chip, g as u64);
            let z: f64 = rng.sample(StandardNormal);
            let baseline = snap(config.baseline_mean + config.baseline_sd * z);
            let chips: Vec<f64> = (0..n_chips)
                .map(|_| snap(config.chip_sd * chip_rng.sample::<f64, _>(StandardNormal)))
                .collect();
            let mut case = Vec::with_capacity(n);
            let mut control = Vec::with_capacity(n);
            for (j, p) in pairs.iter().enumerate() {
                let shared = baseline + snap(config.age_slope * f64::from(p.age)) + chips[pair_chip[j]];
                let z_case: f64 = rng.sample(StandardNormal);
                let z_ctrl: f64 = rng.sample(StandardNormal);
                let effect = snap(gene.spec.effect(config.hinge_form, p.time_to_diagnosis, case_exp[j].hrt));
                case.push(shared + case_exp[j].effect(&gamma) + effect + snap(config.noise_sd * z_case));
                control.push(shared + ctrl_exp[j].effect(&gamma) + snap(config.noise_sd * z_ctrl));
            }
            (case, control)
        })
        .collect();

    let gene_ids: Vec<String> = truth.genes.iter().map(|g| g.gene_id.clone()).collect();
    let (case_rows, control_rows): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let case = ExpressionMatrix::from_rows(gene_ids.clone(), pair_ids.clone(), case_rows)?;
    let control = ExpressionMatrix::from_rows(gene_ids, pair_ids.clone(), control_rows)?;

    let text = |v: f64| Some(format_float(v));
    let flag = |b: bool| Some(if b { "1" } else { "0" }.to_string());
    let exposures = ExposureTable {
        pair_ids,
        columns: vec![
            RawExposure {
                name: "diet".into(),
                case: case_exp.iter().map(|e| text(e.diet)).collect(),
                control: ctrl_exp.iter().map(|e| text(e.diet)).collect(),
            },
            RawExposure {
                name: "hrt".into(),
                case: case_exp.iter().map(|e| flag(e.hrt)).collect(),
                control: ctrl_exp.iter().map(|e| flag(e.hrt)).collect(),
            },
        ],
    };
    let design = encode_exposures(&exposures, &simulated_exposure_schema())?;
    Ok(SimulatedExpression {
        case,
        control,
        exposures,
        design,
    })
}

/// Everything produced by one end-to-end simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedStudy {
    pub n_cases: usize,
    pub dropped: usize,
    pub pairs: Vec<PairRecord>,
    pub expression: SimulatedExpression,
    pub truth: GroundTruth,
}

pub fn simulate_study(config: &SimulationConfig) -> Result<SimulatedStudy> {
    let cohort = simulate_cohort(config)?;
    let sample = draw_ncc_pairs(&cohort, config)?;
    let truth = GroundTruth::from_config(config);
    let expression = simulate_expression(&sample.pairs, config, &truth)?;
    Ok(SimulatedStudy {
        n_cases: cohort.n_cases(),
        dropped: sample.dropped,
        pairs: sample.pairs,
        expression,
        truth,
    })
}
