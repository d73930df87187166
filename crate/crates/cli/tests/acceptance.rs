//! Acceptance checks. Each test prints one `PASS`/`FAIL` line to stderr
//! (outside the test harness capture) before asserting.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use trajscan::data::{assemble_dataset, compute_delta, AnalysisDataset, ExpressionMatrix};
use trajscan::multiplicity::{adjust, adjust_partial, FdrMethod};
use trajscan::results::ScanResults;
use trajscan::simulate::{simulate_study, GeneClass, GeneGroup, GeneSpec, SimulationConfig};
use trajscan::survival::{
    fit_clogit_penalized, lambda_max, ncc_loglik, penalized_objective, scan_clogit, Penalty,
};
use trajscan::trajectory::{
    fit_hinge, fit_isotonic_adjusted, pava, scan_genes, ChangepointGrid, Direction, FitOptions, TrajectoryModel,
};

fn verdict(criterion: u32, name: &str, pass: bool, detail: &str) {
    let mut err = std::io::stderr().lock();
    let status = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(err, "criterion {criterion} [{name}]: {status} | {detail}");
    assert!(pass, "criterion {criterion} [{name}] failed: {detail}");
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(r: &mut ChaCha8Rng) -> f64 {
    r.sample(StandardNormal)
}

fn config(seed: u64, n_pairs: usize, groups: Vec<(GeneSpec, usize)>, noise_sd: f64) -> SimulationConfig {
    SimulationConfig {
        seed,
        max_pairs: Some(n_pairs),
        n_genes: groups.iter().map(|g| g.1).sum(),
        gene_groups: groups.into_iter().map(|(spec, count)| GeneGroup { spec, count }).collect(),
        noise_sd,
        ..SimulationConfig::default()
    }
}

fn dataset(config: &SimulationConfig) -> AnalysisDataset {
    let s = simulate_study(config).unwrap();
    let delta = compute_delta(&s.expression.case, &s.expression.control).unwrap();
    assemble_dataset(s.pairs, delta, s.expression.design).unwrap()
}

fn options(b: usize, seed: u64) -> FitOptions {
    FitOptions {
        n_permutations: b,
        seed,
        ..FitOptions::default()
    }
}

fn bh_rejections(res: &ScanResults, q: f64) -> Vec<bool> {
    let (_, rejected) = adjust_partial(&res.p_values(), q, FdrMethod::Bh).unwrap();
    rejected.into_iter().map(|r| r.unwrap_or(false)).collect()
}

fn nominal(res: &ScanResults, level: f64) -> Vec<bool> {
    res.p_values().iter().map(|p| p.is_some_and(|p| p <= level)).collect()
}

fn count_in(flags: &[bool], classes: &[GeneClass], class: GeneClass) -> usize {
    flags.iter().zip(classes).filter(|(&f, &c)| f && c == class).count()
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_1_design_scale_case_count() {
    let start = Instant::now();
    let study = simulate_study(&SimulationConfig::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let n: f64 = 49_633.0;
    let p = 0.015;
    let sd = (n * p * (1.0 - p)).sqrt();
    let dev = (study.n_cases as f64 - 745.0).abs();
    verdict(
        1,
        "design-scale case count",
        dev <= 3.0 * sd && secs < 10.0,
        &format!("cases {} (745 ± {:.1}), runtime {secs:.2} s", study.n_cases, 3.0 * sd),
    );
}

#[test]
fn criterion_2_discrimination() {
    let start = Instant::now();
    let cfg = config(
        1,
        200,
        vec![
            (GeneSpec::null(), 960),
            (GeneSpec::constant_diff(1.0), 20),
            (GeneSpec::hinge(1.0, 2.0), 20),
        ],
        1.0,
    );
    let study = simulate_study(&cfg).unwrap();
    let classes: Vec<GeneClass> = study.truth.genes.iter().map(|g| g.spec.class).collect();
    let delta = compute_delta(&study.expression.case, &study.expression.control).unwrap();
    let ds = assemble_dataset(study.pairs, delta, study.expression.design).unwrap();

    let pool = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
    let (hinge, clogit) = pool.install(|| {
        (
            scan_genes(&ds, TrajectoryModel::Hinge, &options(499, 1)).unwrap(),
            scan_clogit(&ds, true).unwrap(),
        )
    });
    let secs = start.elapsed().as_secs_f64();

    let q = 0.05;
    let c_rej = bh_rejections(&clogit, q);
    let h_rej = bh_rejections(&hinge, q);
    let c_const = count_in(&c_rej, &classes, GeneClass::ConstantDiff);
    let c_hinge = count_in(&c_rej, &classes, GeneClass::Hinge);
    let h_hinge = count_in(&h_rej, &classes, GeneClass::Hinge);
    let h_const = count_in(&h_rej, &classes, GeneClass::ConstantDiff);

    let c_nom = nominal(&clogit, 0.05);
    let h_nom = nominal(&hinge, 0.05);
    let min_p = hinge.p_values().iter().flatten().fold(1.0f64, |a, &b| a.min(b));
    let at_min = hinge.p_values().iter().flatten().filter(|&&p| p == min_p).count();
    let diagnostics = format!(
        "BH q=0.05: clogit constant {c_const}/20 hinge {c_hinge}/20; hinge test hinge {h_hinge}/20 constant {h_const}/20 | \
         unadjusted 0.05: clogit constant {}/20 hinge {}/20 null {}/960; hinge test hinge {}/20 constant {}/20 null {}/960 | \
         hinge test min p {min_p:.4} attained by {at_min} genes, BH needs rank k with p <= {:.1e} k | runtime {secs:.1} s on {} cpu",
        count_in(&c_nom, &classes, GeneClass::ConstantDiff),
        count_in(&c_nom, &classes, GeneClass::Hinge),
        count_in(&c_nom, &classes, GeneClass::Null),
        count_in(&h_nom, &classes, GeneClass::Hinge),
        count_in(&h_nom, &classes, GeneClass::ConstantDiff),
        count_in(&h_nom, &classes, GeneClass::Null),
        q / 1000.0,
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    );
    let pass = c_const >= 14 && c_hinge >= 14 && h_hinge >= 14 && h_const <= 2 && secs < 300.0;
    verdict(2, "discrimination", pass, &diagnostics);
}

// ---------------------------------------------------------------------------
// Independent oracles.

fn brute_force_monotone(y: &[f64], w: &[f64], direction: Direction) -> Vec<f64> {
    let n = y.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << (n - 1)) {
        let mut fitted = vec![0.0; n];
        let mut means = Vec::new();
        let mut start = 0;
        for end in 0..n {
            if end == n - 1 || mask & (1 << end) != 0 {
                let sw: f64 = w[start..=end].iter().sum();
                let m = (start..=end).map(|i| w[i] * y[i]).sum::<f64>() / sw;
                fitted[start..=end].iter_mut().for_each(|f| *f = m);
                means.push(m);
                start = end + 1;
            }
        }
        let monotone = means.windows(2).all(|p| match direction {
            Direction::NonDecreasing => p[0] <= p[1],
            Direction::NonIncreasing => p[0] >= p[1],
        });
        if !monotone {
            continue;
        }
        let sse: f64 = (0..n).map(|i| w[i] * (y[i] - fitted[i]).powi(2)).sum();
        if best.as_ref().is_none_or(|(b, _)| sse < *b) {
            best = Some((sse, fitted));
        }
    }
    best.unwrap().1
}

fn loglik_reference(beta: &[f64], x: &[Vec<f64>]) -> f64 {
    x.iter()
        .map(|row| {
            let eta: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
            -(1.0 + (-eta).exp()).ln()
        })
        .sum()
}

fn objective_reference(x: &[Vec<f64>], beta: &[f64], lambda: f64, mixing: f64) -> f64 {
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let l2: f64 = beta.iter().map(|b| b * b).sum();
    -loglik_reference(beta, x) + lambda * (mixing * l1 + 0.5 * (1.0 - mixing) * l2)
}

/// Cyclic coordinate descent; each one-dimensional problem is solved by
/// bisection on the subgradient.
fn coordinate_descent(x: &[Vec<f64>], lambda: f64, mixing: f64, tol: f64) -> Vec<f64> {
    let p = x[0].len();
    let mut beta = vec![0.0; p];
    let l1 = lambda * mixing;
    let l2 = lambda * (1.0 - mixing);
    for _ in 0..100_000 {
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            let offset: Vec<f64> = x
                .iter()
                .map(|row| (0..p).filter(|&k| k != j).map(|k| row[k] * beta[k]).sum())
                .collect();
            let d = |b: f64| -> f64 {
                -x.iter()
                    .zip(&offset)
                    .map(|(row, o)| row[j] / (1.0 + (o + row[j] * b).exp()))
                    .sum::<f64>()
                    + l2 * b
            };
            let d0 = d(0.0);
            let new = if d0.abs() <= l1 {
                0.0
            } else {
                let s = if d0 < -l1 { l1 } else { -l1 };
                let (mut lo, mut hi) = if d0 < -l1 { (0.0, 1.0) } else { (-1.0, 0.0) };
                while d0 < -l1 && d(hi) + l1 < 0.0 {
                    hi *= 2.0;
                }
                while d0 > l1 && d(lo) - l1 > 0.0 {
                    lo *= 2.0;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if d(mid) + s < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            };
            max_change = max_change.max((new - beta[j]).abs());
            beta[j] = new;
        }
        if max_change < tol {
            break;
        }
    }
    beta
}

fn random_matrix(seed: u64, genes: usize, pairs: usize) -> (ExpressionMatrix, Vec<Vec<f64>>) {
    let mut r = rng(seed);
    let rows: Vec<Vec<f64>> = (0..genes)
        .map(|g| (0..pairs).map(|_| 0.15 * g as f64 + normal(&mut r)).collect())
        .collect();
    let by_pair = (0..pairs).map(|i| rows.iter().map(|row| row[i]).collect()).collect();
    let m = ExpressionMatrix::from_rows(
        (0..genes).map(|g| format!("g{g}")).collect(),
        (0..pairs).map(|i| format!("p{i}")).collect(),
        rows,
    )
    .unwrap();
    (m, by_pair)
}

#[test]
fn criterion_3_oracle_equivalences() {
    let mut r = rng(2024);
    let mut pava_dev: f64 = 0.0;
    for instance in 0..1000 {
        let n = r.random_range(1..=8);
        let y: Vec<f64> = (0..n).map(|_| normal(&mut r)).collect();
        let w: Vec<f64> = (0..n).map(|_| r.random_range(0.1..3.0)).collect();
        let dir = if instance % 2 == 0 { Direction::NonDecreasing } else { Direction::NonIncreasing };
        let got = pava(&y, &w, dir).unwrap();
        for (a, b) in got.iter().zip(brute_force_monotone(&y, &w, dir)) {
            pava_dev = pava_dev.max((a - b).abs());
        }
    }

    let h = 1e-5;
    let mut grad_rel: f64 = 0.0;
    for _ in 0..100 {
        let p = r.random_range(1..=4);
        let x: Vec<Vec<f64>> = (0..20).map(|_| (0..p).map(|_| normal(&mut r)).collect()).collect();
        let beta: Vec<f64> = (0..p).map(|_| 0.5 * normal(&mut r)).collect();
        let l = ncc_loglik(&beta, &x);
        let fd: Vec<f64> = (0..p)
            .map(|k| {
                let mut up = beta.clone();
                let mut down = beta.clone();
                up[k] += h;
                down[k] -= h;
                (loglik_reference(&up, &x) - loglik_reference(&down, &x)) / (2.0 * h)
            })
            .collect();
        let err = l.gradient.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = fd.iter().map(|a| a * a).sum::<f64>().sqrt();
        grad_rel = grad_rel.max(err / norm);
    }

    let mut path_dev: f64 = 0.0;
    for (seed, penalty) in [
        (1, Penalty::Lasso),
        (2, Penalty::Lasso),
        (3, Penalty::ElasticNet { mixing: 0.5 }),
    ] {
        let (m, x) = random_matrix(seed, 5, 40);
        let path = fit_clogit_penalized(&m, penalty, None).unwrap();
        let mixing = penalty.mixing();
        for (k, &lambda) in path.lambda_grid.iter().enumerate() {
            let cd = coordinate_descent(&x, lambda, mixing, 1e-10);
            let want = objective_reference(&x, &cd, lambda, mixing);
            path_dev = path_dev.max((path.objectives[k] - want).abs());
        }
    }

    verdict(
        3,
        "oracle equivalences",
        pava_dev < 1e-10 && grad_rel < 1e-6 && path_dev < 1e-6,
        &format!("PAVA max dev {pava_dev:.2e}, gradient max rel err {grad_rel:.2e}, path objective max dev {path_dev:.2e}"),
    );
}

#[test]
fn criterion_4_level_and_fdr_control() {
    let cfg = config(101, 200, vec![(GeneSpec::null(), 2000)], 1.0);
    let ds = dataset(&cfg);
    let mut rates = Vec::new();
    for model in TrajectoryModel::ALL {
        let res = scan_genes(&ds, model, &options(199, 7)).unwrap();
        let p: Vec<f64> = res.p_values().into_iter().flatten().collect();
        assert_eq!(p.len(), 2000, "{}: failed genes", model.name());
        rates.push((model.name(), p.iter().filter(|&&v| v <= 0.05).count() as f64 / p.len() as f64));
    }

    let mut r = rng(1);
    let mut fdp_sum = 0.0;
    for _ in 0..100 {
        let p: Vec<f64> = (0..2000).map(|_| r.random::<f64>()).collect();
        let res = adjust(&p, 0.05, FdrMethod::Bh).unwrap();
        // Every hypothesis is null, so any rejection makes the FDP 1.
        fdp_sum += if res.n_rejected() > 0 { 1.0 } else { 0.0 };
    }
    let mean_fdp = fdp_sum / 100.0;

    let levels_ok = rates.iter().all(|&(_, r)| (0.03..=0.07).contains(&r));
    let detail = rates.iter().map(|(m, r)| format!("{m} {r:.4}")).collect::<Vec<_>>().join(", ");
    verdict(
        4,
        "level and FDR control",
        levels_ok && mean_fdp <= 0.06,
        &format!("rejection rate at 0.05: {detail}; BH mean FDP {mean_fdp:.3}"),
    );
}

#[test]
fn criterion_5_exact_recoveries() {
    let cfg = config(3, 200, vec![(GeneSpec::hinge(1.0, 2.0), 1)], 0.0);
    let ds = dataset(&cfg);
    let y = ds.delta_expression.row(0);
    let opts = FitOptions {
        changepoint_grid: ChangepointGrid::Times(vec![1.0, 2.0, 3.0, 4.0, 5.0]),
        ..FitOptions::default()
    };
    let hinge = fit_hinge(y, &ds.exposures, &ds.pairs, &opts).unwrap();

    // Monotone trend plus exposure effects, no noise.
    let diet = &ds.exposures.delta_columns[0].values;
    let mono: Vec<f64> = ds
        .pairs
        .iter()
        .zip(diet)
        .map(|(p, d)| (-p.time_to_diagnosis / 2.0).exp() + 0.3 * d)
        .collect();
    // Backfitting converges linearly and stops once a sweep gains less than
    // `backfit_tol`, so the default tolerance leaves an RSS near 1e-7 here.
    let tight = FitOptions {
        backfit_tol: 1e-16,
        backfit_max_iter: 10_000,
        ..FitOptions::default()
    };
    let iso_hinge = fit_isotonic_adjusted(y, &ds.exposures, &ds.pairs, &tight).unwrap();
    let iso_mono = fit_isotonic_adjusted(&mono, &ds.exposures, &ds.pairs, &tight).unwrap();

    let (m, _) = random_matrix(5, 6, 60);
    let lmax = lambda_max(&m, Penalty::Lasso);
    let path = fit_clogit_penalized(&m, Penalty::Lasso, Some(&[1e6, 10.0 * lmax])).unwrap();
    let all_zero = path.betas.iter().all(|b| b.iter().all(|&v| v == 0.0));
    let objective_at_zero = penalized_objective(&m, Penalty::Lasso, 1e6, &vec![0.0; 6]);

    let pass = hinge.t_hat == 2.0
        && (hinge.alpha2 - 1.0).abs() < 1e-8
        && iso_hinge.rss < 1e-12
        && iso_mono.rss < 1e-12
        && all_zero
        && (path.objectives[0] - objective_at_zero).abs() < 1e-12;
    verdict(
        5,
        "exact recoveries",
        pass,
        &format!(
            "t_hat {}, |alpha2 - 1| {:.2e}, isotonic RSS {:.2e} / {:.2e}, lasso all zero {all_zero}",
            hinge.t_hat,
            (hinge.alpha2 - 1.0).abs(),
            iso_hinge.rss,
            iso_mono.rss
        ),
    );
}

#[test]
fn criterion_6_pair_differencing_invariance() {
    let groups = vec![
        (GeneSpec::null(), 40),
        (GeneSpec::constant_diff(1.0), 20),
        (GeneSpec::hinge(1.0, 2.0), 20),
        (GeneSpec::interaction(2.0, 2.0), 20),
    ];
    let mut outputs = Vec::new();
    for chip_sd in [0.0, 5.0] {
        for age_slope in [0.0, 0.1] {
            let cfg = SimulationConfig {
                chip_sd,
                age_slope,
                ..config(17, 200, groups.clone(), 1.0)
            };
            let ds = dataset(&cfg);
            let bits: Vec<u64> = ds.delta_expression.values().iter().map(|v| v.to_bits()).collect();
            let mut fits: Vec<ScanResults> = TrajectoryModel::ALL
                .iter()
                .map(|&m| scan_genes(&ds, m, &options(49, 3)).unwrap())
                .collect();
            fits.push(scan_clogit(&ds, true).unwrap());
            outputs.push(((chip_sd, age_slope), bits, fits));
        }
    }
    let reference = &outputs[0];
    let mut mismatches = Vec::new();
    for (setting, bits, fits) in &outputs[1..] {
        if *bits != reference.1 {
            mismatches.push(format!("delta_g at {setting:?}"));
        }
        for (a, b) in fits.iter().zip(&reference.2) {
            // Debug output distinguishes -0.0 and treats identical NaNs as equal.
            if format!("{a:?}") != format!("{b:?}") {
                mismatches.push(format!("{} at {setting:?}", a.model));
            }
        }
    }
    verdict(
        6,
        "pair-differencing invariance",
        mismatches.is_empty(),
        &if mismatches.is_empty() {
            "4 settings, delta_g and hinge/isotonic/interaction/clogit tables identical".to_string()
        } else {
            mismatches.join("; ")
        },
    );
}

// ---------------------------------------------------------------------------

fn run_in(dir: &Path, workers: &str, args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_trajscan"))
        .current_dir(dir)
        .args(["--workers", workers])
        .args(args)
        .env_remove("TRAJSCAN_SEED")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Runs the whole pipeline inside `dir` with relative paths so that the
/// manifests of separate runs are comparable.
fn pipeline(dir: &Path, workers: &str) -> Vec<(PathBuf, Vec<u8>)> {
    run_in(
        dir,
        workers,
        &[
            "simulate", "--out", "data", "--seed", "9", "--set", "n_women=20000", "--max-pairs", "100", "--n-genes",
            "30", "--set", "n_constant_diff=5", "--set", "n_hinge=5", "--set", "n_interaction=5",
        ],
    );
    let models = ["hinge", "isotonic", "interaction", "coxncc", "coxpen", "coxtv"];
    for model in models {
        let out = format!("{model}.csv");
        run_in(
        dir,
        workers,
        &["fit", "--data", "data", "--seed", "9", "--model", model, "--permutations", "49", "--out", &out],
        );
        if model != "coxpen" {
            let adj = format!("{model}.adj.csv");
            run_in(dir, workers, &["adjust", "--input", &out, "--fdr", "0.1", "--out", &adj]);
        }
    }
    run_in(
        dir,
        workers,
        &["plot-data", "--results", "hinge.csv", "--gene", "g00010", "--data", "data", "--out", "plot.csv"],
    );
    run_in(
        dir,
        workers,
        &[
            "report", "--truth", "data/truth.csv", "--results", "hinge.csv", "--results", "isotonic.csv", "--results",
            "interaction.csv", "--results", "coxncc.csv", "--out", "report.csv",
        ],
    );

    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = std::fs::read(&path).unwrap();
                files.push((path.strip_prefix(dir).unwrap().to_path_buf(), bytes));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn criterion_7_cli_determinism() {
    let runs: Vec<(&str, tempfile::TempDir)> =
        ["1", "4", "1"].into_iter().map(|w| (w, tempfile::tempdir().unwrap())).collect();
    let outputs: Vec<_> = runs.iter().map(|(w, dir)| pipeline(dir.path(), w)).collect();
    let names: Vec<&PathBuf> = outputs[0].iter().map(|(p, _)| p).collect();
    let mut differing = Vec::new();
    for other in &outputs[1..] {
        if other.len() != outputs[0].len() {
            differing.push("file sets differ".to_string());
            continue;
        }
        for ((pa, a), (pb, b)) in outputs[0].iter().zip(other) {
            if pa != pb || a != b {
                differing.push(pa.display().to_string());
            }
        }
    }
    verdict(
        7,
        "CLI determinism",
        differing.is_empty() && names.len() >= 20,
        &format!(
            "{} files compared across workers 1/4/1: {}",
            names.len(),
            if differing.is_empty() { "all identical".to_string() } else { differing.join(", ") }
        ),
    );
}
