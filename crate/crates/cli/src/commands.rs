use std::path::{Path, PathBuf};

use trajscan::data::{assemble_dataset, compute_delta, encode_exposures, stratify, AnalysisDataset, ExposureDesign};
use trajscan::multiplicity::{adjust_partial, FdrMethod};
use trajscan::pca::exposure_pca;
use trajscan::results::{FitStatus, GeneFitResult, ScanResults};
use trajscan::simulate::{simulate_study, ExposureEffects, GeneGroup, GeneSpec, SimulationConfig};
use trajscan::stats::quantiles;
use trajscan::survival::{
    default_lambda_grid, fit_clogit_penalized, lambda_max, scan_clogit, scan_clogit_timevarying, Penalty,
};
use trajscan::trajectory::{scan_genes, ChangepointGrid, FitOptions, HingeForm, TrajectoryModel};

use crate::args::{AdjustArgs, Common, DataArgs, FitArgs, SimulateArgs};
use crate::config::{read_config, Resolver};
use crate::error::{CliError, Result};
use crate::io;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_GRID: &str = "q:0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9";

/// Sets up the resolver from `--config` and `--set`.
pub(crate) fn resolver(common: &Common) -> Result<Resolver> {
    let file = match &common.config {
        Some(p) => read_config(p)?,
        None => Default::default(),
    };
    let mut r = Resolver::new(file);
    r.flag_assignments(&common.set)?;
    r.flag("seed", common.seed);
    Ok(r)
}

fn warn_unused(r: &Resolver) {
    let unused = r.unused();
    if !unused.is_empty() {
        eprintln!("warning: unused settings: {}", unused.join(", "));
    }
}

/// `dir/stem<suffix>` for an output path `dir/stem.ext`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn manifest(command: &str, inputs: &[(&str, &Path)], r: Resolver, extra: Vec<(String, String)>) -> Vec<(String, String)> {
    let mut entries = vec![
        ("tool".to_string(), "trajscan".to_string()),
        ("version".to_string(), VERSION.to_string()),
        ("command".to_string(), command.to_string()),
    ];
    entries.extend(inputs.iter().map(|(k, p)| (format!("input.{k}"), p.display().to_string())));
    entries.extend(r.into_entries());
    entries.extend(extra);
    entries
}

pub fn parse_hinge_form(text: &str) -> Result<HingeForm> {
    HingeForm::parse(text).ok_or_else(|| CliError::usage(format!("invalid value for hinge_form: '{text}' (continuous or literal)")))
}

fn parse_list(text: &str, key: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::usage(format!("invalid value for {key}: '{s}' is not a number")))
        })
        .collect()
}

pub fn parse_grid(text: &str) -> Result<ChangepointGrid> {
    if let Some(t) = text.strip_prefix("t:") {
        Ok(ChangepointGrid::Times(parse_list(t, "grid")?))
    } else {
        let q = text.strip_prefix("q:").unwrap_or(text);
        Ok(ChangepointGrid::Quantiles(parse_list(q, "grid")?))
    }
}

// ---------------------------------------------------------------- simulate

pub fn simulation_config(r: &mut Resolver) -> Result<SimulationConfig> {
    let d = SimulationConfig::default();
    let seed = r.seed()?;
    let n_women = r.get("n_women", d.n_women)?;
    let follow_up_years = r.get("follow_up_years", d.follow_up_years)?;
    let incidence_7yr = r.get("incidence_7yr", d.incidence_7yr)?;
    let age_range = (r.get("age_min", d.age_range.0)?, r.get("age_max", d.age_range.1)?);
    let max_pairs = r.get_opt("max_pairs")?;

    // Non-null classes default to 20 genes each unless n_genes alone is
    // given, in which case every gene is null. Null genes fill the rest.
    let n_genes: Option<usize> = r.get_opt("n_genes")?;
    let class_default = if n_genes.is_some() { 0 } else { 20 };
    let n_constant = r.get_opt::<usize>("n_constant_diff")?.unwrap_or(class_default);
    let n_hinge = r.get_opt::<usize>("n_hinge")?.unwrap_or(class_default);
    let n_interaction = r.get_opt::<usize>("n_interaction")?.unwrap_or(class_default);
    let non_null = n_constant + n_hinge + n_interaction;
    let n_null = match (r.get_opt::<usize>("n_null")?, n_genes) {
        (Some(n), _) => n,
        (None, Some(total)) => total.checked_sub(non_null).ok_or_else(|| {
            CliError::usage(format!("invalid value for n_genes: {total} is less than the {non_null} non-null genes"))
        })?,
        (None, None) => 940,
    };
    let total = n_null + non_null;
    if n_genes.is_some_and(|g| g != total) {
        return Err(CliError::usage(format!(
            "invalid value for n_genes: class counts sum to {total}"
        )));
    }

    let alpha0 = r.get("constant_alpha0", 1.0)?;
    let alpha2 = r.get("hinge_alpha2", 1.0)?;
    let hinge_t = r.get("hinge_t_change", 2.0)?;
    let psi = r.get("interaction_psi", 2.0)?;
    let interaction_t = r.get("interaction_t_change", 2.0)?;
    let gene_groups = vec![
        GeneGroup {
            spec: GeneSpec::null(),
            count: n_null,
        },
        GeneGroup {
            spec: GeneSpec::constant_diff(alpha0),
            count: n_constant,
        },
        GeneGroup {
            spec: GeneSpec::hinge(alpha2, hinge_t),
            count: n_hinge,
        },
        GeneGroup {
            spec: GeneSpec::interaction(psi, interaction_t),
            count: n_interaction,
        },
    ]
    .into_iter()
    .filter(|g| g.count > 0)
    .collect();

    let config = SimulationConfig {
        n_women,
        follow_up_years,
        incidence_7yr,
        age_range,
        max_pairs,
        n_genes: total,
        gene_groups,
        baseline_mean: r.get("baseline_mean", d.baseline_mean)?,
        baseline_sd: r.get("baseline_sd", d.baseline_sd)?,
        noise_sd: r.get("noise_sd", d.noise_sd)?,
        chip_sd: r.get("chip_sd", d.chip_sd)?,
        age_slope: r.get("age_slope", d.age_slope)?,
        exposure_effects: ExposureEffects {
            diet: r.get("gamma_diet", d.exposure_effects.diet)?,
            hrt: r.get("gamma_hrt", d.exposure_effects.hrt)?,
        },
        hrt_prevalence: r.get("hrt_prevalence", d.hrt_prevalence)?,
        pairs_per_chip: r.get("pairs_per_chip", d.pairs_per_chip)?,
        er_positive_fraction: r.get("er_positive_fraction", d.er_positive_fraction)?,
        hinge_form: parse_hinge_form(&r.get_text("hinge_form", d.hinge_form.name()))?,
        seed,
    };
    config.validate()?;
    Ok(config)
}

pub fn simulate(args: &SimulateArgs) -> Result<String> {
    let mut r = resolver(&args.common)?;
    r.flag("n_women", args.n_women);
    r.flag("n_genes", args.n_genes);
    r.flag("max_pairs", args.max_pairs);
    r.flag("hinge_form", args.hinge_form.as_ref());
    let config = simulation_config(&mut r)?;
    warn_unused(&r);

    let study = simulate_study(&config)?;
    let out = &args.out;
    std::fs::create_dir_all(out).map_err(|e| CliError::in_file(out, e))?;
    io::write_pairs(&out.join("pairs.csv"), &study.pairs)?;
    io::write_matrix(&out.join("case_expr.csv"), &study.expression.case)?;
    io::write_matrix(&out.join("control_expr.csv"), &study.expression.control)?;
    io::write_exposures(&out.join("exposures.csv"), &study.expression.exposures)?;
    io::write_truth(&out.join("truth.csv"), &study.truth)?;
    let counts = vec![
        ("cases".to_string(), study.n_cases.to_string()),
        ("dropped_pairs".to_string(), study.dropped.to_string()),
        ("pairs".to_string(), study.pairs.len().to_string()),
    ];
    let summary = counts.iter().map(|(k, v)| format!("{k}: {v}\n")).collect::<String>();
    io::write_manifest(&out.join("manifest.txt"), &manifest("simulate", &[], r, counts))?;
    Ok(summary)
}

// ---------------------------------------------------------------- data

/// Resolved input paths.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub pairs: PathBuf,
    pub case_expr: PathBuf,
    pub control_expr: PathBuf,
    pub exposures: Option<PathBuf>,
}

impl Inputs {
    pub fn resolve(args: &DataArgs) -> Result<Self> {
        let from_dir = |name: &str| args.data.as_ref().map(|d| d.join(name));
        let need = |explicit: &Option<PathBuf>, name: &str, flag: &str| {
            explicit
                .clone()
                .or_else(|| from_dir(name))
                .ok_or_else(|| CliError::usage(format!("missing input: give --{flag} or --data")))
        };
        let exposures = if args.no_exposures {
            None
        } else {
            args.exposures
                .clone()
                .or_else(|| from_dir("exposures.csv").filter(|p| p.exists()))
        };
        Ok(Self {
            pairs: need(&args.pairs, "pairs.csv", "pairs")?,
            case_expr: need(&args.case_expr, "case_expr.csv", "case")?,
            control_expr: need(&args.control_expr, "control_expr.csv", "control")?,
            exposures,
        })
    }

    pub(crate) fn list(&self) -> Vec<(&'static str, &Path)> {
        let mut v: Vec<(&str, &Path)> = vec![
            ("pairs", &self.pairs),
            ("case", &self.case_expr),
            ("control", &self.control_expr),
        ];
        if let Some(e) = &self.exposures {
            v.push(("exposures", e));
        }
        v
    }
}

/// Reads and aligns the inputs. `carcinogen` names the exposure copied as the
/// case-only indicator when present.
pub fn load_dataset(inputs: &Inputs, carcinogen: Option<&str>) -> Result<AnalysisDataset> {
    let pairs = io::read_pairs(&inputs.pairs)?;
    let case = io::read_matrix(&inputs.case_expr)?;
    let control = io::read_matrix(&inputs.control_expr)?;
    let delta = compute_delta(&case, &control)?;
    let design = match &inputs.exposures {
        Some(path) => {
            let table = io::read_exposures(path)?;
            encode_exposures(&table, &io::infer_schema(&table, carcinogen))?
        }
        None => ExposureDesign::empty(pairs.iter().map(|p| p.pair_id.clone()).collect()),
    };
    Ok(assemble_dataset(pairs, delta, design)?)
}

// ---------------------------------------------------------------- fit

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelChoice {
    Trajectory(TrajectoryModel),
    CoxNcc,
    CoxPen,
    CoxTv,
}

impl ModelChoice {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "coxncc" => Ok(Self::CoxNcc),
            "coxpen" => Ok(Self::CoxPen),
            "coxtv" => Ok(Self::CoxTv),
            other => TrajectoryModel::parse(other).map(Self::Trajectory).ok_or_else(|| {
                CliError::usage(format!(
                    "invalid value for model: '{other}' (hinge, isotonic, interaction, coxncc, coxpen or coxtv)"
                ))
            }),
        }
    }
}

pub fn fit_options(r: &mut Resolver, seed: u64, model: TrajectoryModel) -> Result<FitOptions> {
    let d = FitOptions::default();
    let mut o = FitOptions {
        n_permutations: r.get("permutations", d.n_permutations)?,
        seed,
        ..d
    };
    match model {
        TrajectoryModel::Hinge => {
            o.changepoint_grid = parse_grid(&r.get_text("grid", DEFAULT_GRID))?;
            o.hinge_form = parse_hinge_form(&r.get_text("hinge_form", HingeForm::default().name()))?;
        }
        TrajectoryModel::Isotonic => {
            o.backfit_tol = r.get("backfit_tol", o.backfit_tol)?;
            o.backfit_max_iter = r.get("backfit_max_iter", o.backfit_max_iter)?;
        }
        TrajectoryModel::Interaction => o.knots = r.get("knots", o.knots)?,
    }
    o.validate()?;
    Ok(o)
}

fn parse_penalty(text: &str, mixing: Option<f64>) -> Result<Penalty> {
    match (text, mixing) {
        ("lasso", None) => Ok(Penalty::Lasso),
        ("ridge", None) => Ok(Penalty::Ridge),
        ("elastic_net" | "enet", m) => Ok(Penalty::ElasticNet { mixing: m.unwrap_or(0.5) }),
        ("lasso" | "ridge", Some(_)) => Err(CliError::usage("mixing applies only to penalty=elastic_net")),
        (other, _) => Err(CliError::usage(format!(
            "invalid value for penalty: '{other}' (lasso, ridge or elastic_net)"
        ))),
    }
}

/// Everything `fit` produces besides the manifest.
pub struct FitOutput {
    pub results: ScanResults,
    pub path: Option<trajscan::survival::PenalizedPath>,
}

/// Runs the selected model on a loaded dataset.
pub fn run_model(dataset: &AnalysisDataset, model: ModelChoice, r: &mut Resolver, seed: u64) -> Result<FitOutput> {
    Ok(match model {
        ModelChoice::Trajectory(m) => {
            let options = fit_options(r, seed, m)?;
            FitOutput {
                results: scan_genes(dataset, m, &options)?,
                path: None,
            }
        }
        ModelChoice::CoxNcc => {
            let adjust = r.get("adjust", true)?;
            FitOutput {
                results: scan_clogit(dataset, adjust && dataset.exposures.n_covariates() > 0)?,
                path: None,
            }
        }
        ModelChoice::CoxTv => {
            let bandwidth = r.get("bandwidth", 1.0)?;
            let text = r.get_text("t_grid", "");
            let grid = if text.is_empty() {
                quantiles(&dataset.times(), &[0.1, 0.3, 0.5, 0.7, 0.9])
            } else {
                parse_list(&text, "t_grid")?
            };
            FitOutput {
                results: scan_clogit_timevarying(dataset, bandwidth, &grid)?,
                path: None,
            }
        }
        ModelChoice::CoxPen => {
            let penalty = parse_penalty(&r.get_text("penalty", "lasso"), r.get_opt("mixing")?)?;
            let n_lambda = r.get("n_lambda", 50usize)?;
            let ratio = r.get("lambda_ratio", 1e-3)?;
            if n_lambda == 0 || !(ratio > 0.0 && ratio <= 1.0) {
                return Err(CliError::usage("n_lambda must be positive and lambda_ratio in (0, 1]"));
            }
            let delta = &dataset.delta_expression;
            let grid = default_lambda_grid(lambda_max(delta, penalty), n_lambda, ratio);
            let path = fit_clogit_penalized(delta, penalty, Some(&grid))?;
            FitOutput {
                results: penalized_rows(&path),
                path: Some(path),
            }
        }
    })
}

/// Per-gene summary of a penalized path: coefficient at the smallest λ and
/// the largest λ at which the gene is in the model.
fn penalized_rows(path: &trajscan::survival::PenalizedPath) -> ScanResults {
    let last = path.betas.len() - 1;
    let rows = path
        .gene_ids
        .iter()
        .enumerate()
        .map(|(g, id)| {
            let entry = (0..path.betas.len())
                .find(|&k| path.betas[k][g] != 0.0)
                .map(|k| path.lambda_grid[k]);
            GeneFitResult {
                gene_id: id.clone(),
                model: "coxpen".into(),
                status: if path.converged[last] {
                    FitStatus::Ok
                } else {
                    FitStatus::Failed("path did not converge at the smallest lambda".into())
                },
                alpha0: None,
                alpha1: Vec::new(),
                alpha2: None,
                t_hat: None,
                statistic: None,
                p_value: None,
                extras: vec![Some(path.betas[last][g]), entry],
            }
        })
        .collect();
    ScanResults {
        model: "coxpen".into(),
        covariate_names: Vec::new(),
        extra_names: vec!["beta".into(), "lambda_entry".into()],
        rows,
    }
}

/// Applies the optional stratum restriction and exposure PCA.
pub fn prepare_dataset(mut dataset: AnalysisDataset, r: &mut Resolver) -> Result<AnalysisDataset> {
    if let Some(level) = r.get_opt::<String>("stratum")? {
        dataset = stratify(&dataset, Some(&[level]))?.remove(0).1;
    }
    if let Some(k) = r.get_opt::<usize>("exposure_pcs")? {
        dataset.exposures = exposure_pca(&dataset.exposures, k)?.design;
    }
    Ok(dataset)
}

pub fn fit(args: &FitArgs) -> Result<String> {
    let mut r = resolver(&args.common)?;
    r.flag("model", args.model.as_ref());
    r.flag("permutations", args.permutations);
    r.flag("grid", args.grid.as_ref());
    r.flag("knots", args.knots);
    r.flag("hinge_form", args.hinge_form.as_ref());
    let seed = r.seed()?;
    let model = ModelChoice::parse(&r.get_text("model", "hinge"))?;
    let carcinogen = r.get_text("carcinogen", "hrt");

    let inputs = Inputs::resolve(&args.data)?;
    if model == ModelChoice::Trajectory(TrajectoryModel::Interaction) {
        check_carcinogen_input(&inputs, &carcinogen)?;
    }
    let dataset = prepare_dataset(load_dataset(&inputs, Some(&carcinogen))?, &mut r)?;
    let output = run_model(&dataset, model, &mut r, seed)?;
    warn_unused(&r);

    io::write_results(&args.out, &output.results)?;
    if let Some(path) = &output.path {
        io::write_path(&sibling(&args.out, ".path.csv"), path)?;
    }
    let n_failed = output.results.n_failed();
    let counts = vec![
        ("genes".to_string(), output.results.rows.len().to_string()),
        ("pairs".to_string(), dataset.n_pairs().to_string()),
        ("failed".to_string(), n_failed.to_string()),
    ];
    let summary = format!(
        "model: {}\ngenes: {}\nfailed: {n_failed}\n",
        output.results.model,
        output.results.rows.len()
    );
    let entries = manifest("fit", &inputs.list(), r, counts);
    io::write_manifest(&sibling(&args.out, ".manifest.txt"), &entries)?;
    Ok(summary)
}

fn check_carcinogen_input(inputs: &Inputs, carcinogen: &str) -> Result<()> {
    let Some(path) = &inputs.exposures else {
        return Err(CliError::data(format!(
            "model 'interaction' needs the carcinogen exposure '{carcinogen}' (columns case_{carcinogen}, ctrl_{carcinogen}) but no exposures file was given"
        )));
    };
    let table = io::read_exposures(path)?;
    if !table.columns.iter().any(|c| c.name == carcinogen) {
        return Err(CliError::data(format!(
            "{}: model 'interaction' needs the carcinogen exposure column 'case_{carcinogen}'",
            path.display()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------- adjust

pub fn parse_method(text: &str) -> Result<FdrMethod> {
    FdrMethod::parse(text).ok_or_else(|| CliError::usage(format!("invalid value for method: '{text}' (bh or by)")))
}

/// Appends (or replaces) `q_value` and `rejected` columns.
pub fn adjust_table(table: &mut io::Table, q: f64, method: FdrMethod, path: &Path) -> Result<usize> {
    let p_col = table.require("p_value", path)?;
    let p: Vec<Option<f64>> = table
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let text = &row[p_col];
            if text.is_empty() {
                return Ok(None);
            }
            text.parse::<f64>()
                .map(Some)
                .map_err(|_| CliError::data(format!("{}: row {}: p_value '{text}' is not a number", path.display(), i + 1)))
        })
        .collect::<Result<_>>()?;
    let (q_values, rejected) = adjust_partial(&p, q, method)?;
    for name in ["q_value", "rejected"] {
        if let Some(k) = table.column(name) {
            table.headers.remove(k);
            table.rows.iter_mut().for_each(|row| {
                row.remove(k);
            });
        }
    }
    table.headers.extend(["q_value".to_string(), "rejected".to_string()]);
    for (i, row) in table.rows.iter_mut().enumerate() {
        row.push(io::fmt_opt(q_values[i]));
        row.push(rejected[i].map(|b| b.to_string()).unwrap_or_default());
    }
    Ok(rejected.iter().filter(|r| **r == Some(true)).count())
}

pub fn adjust(args: &AdjustArgs) -> Result<String> {
    let mut r = resolver(&args.common)?;
    r.flag("fdr", args.fdr);
    r.flag("method", args.method.as_ref());
    let q = r.get("fdr", 0.05)?;
    let method = parse_method(&r.get_text("method", "bh"))?;
    if !(q > 0.0 && q <= 1.0) {
        return Err(CliError::usage(format!("invalid value for fdr: {q} (must be in (0, 1])")));
    }
    warn_unused(&r);
    let mut table = io::Table::read(&args.input)?;
    let n_rejected = adjust_table(&mut table, q, method, &args.input)?;
    table.write(&args.out)?;
    let entries = manifest("adjust", &[("results", &args.input)], r, vec![("rejected".into(), n_rejected.to_string())]);
    io::write_manifest(&sibling(&args.out, ".manifest.txt"), &entries)?;
    Ok(format!("rejected: {n_rejected} of {}\n", table.rows.len()))
}
