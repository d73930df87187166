//! Exact recoveries on noiseless simulated genes, scan determinism and the
//! simulator's design-level behaviour.

mod common;

use common::{dataset_for, design, pairs_from_times, study};
use trajscan::data::compute_delta;
use trajscan::results::FitStatus;
use trajscan::simulate::{simulate_cohort, simulate_study, GeneSpec, SimulationConfig};
use trajscan::survival::{fit_clogit_timevarying, fit_clogit};
use trajscan::trajectory::{
    fit_hinge, fit_interaction, fit_isotonic_adjusted, gene_seed, piecewise_basis, scan_genes, test_hinge,
    test_interaction, test_isotonic, ChangepointGrid, FitOptions, TrajectoryModel,
};

fn on_grid_options() -> FitOptions {
    FitOptions {
        changepoint_grid: ChangepointGrid::Times(vec![1.0, 2.0, 3.0, 4.0, 5.0]),
        ..FitOptions::default()
    }
}

#[test]
fn noiseless_hinge_gene_is_recovered_exactly() {
    let (_, ds) = study(1, 200, vec![(GeneSpec::hinge(1.5, 2.0), 1)], 0.0);
    let fit = fit_hinge(ds.delta_expression.row(0), &ds.exposures, &ds.pairs, &on_grid_options()).unwrap();
    assert_eq!(fit.t_hat, 2.0);
    assert!((fit.alpha2 - 1.5).abs() < 1e-8);
    assert!(fit.rss < 1e-12);
    assert!((fit.alpha1[0] - 0.3).abs() < 1e-8 && (fit.alpha1[1] - 0.2).abs() < 1e-8);
}

#[test]
fn grid_below_every_time_is_degenerate() {
    let t: Vec<f64> = (0..20).map(|i| 3.0 + 0.1 * f64::from(i)).collect();
    let y: Vec<f64> = (0..20).map(|i| f64::from(i % 4)).collect();
    let opts = FitOptions {
        changepoint_grid: ChangepointGrid::Times(vec![1.0, 2.0]),
        ..FitOptions::default()
    };
    let err = fit_hinge(&y, &design(20, vec![], None), &pairs_from_times(&t), &opts).unwrap_err();
    assert!(err.is_numeric());
}

#[test]
fn noiseless_monotone_gene_gives_zero_isotonic_rss() {
    let (_, ds) = study(2, 200, vec![(GeneSpec::hinge(1.0, 3.0), 1)], 0.0);
    let opts = FitOptions::default();
    let fit = fit_isotonic_adjusted(ds.delta_expression.row(0), &ds.exposures, &ds.pairs, &opts).unwrap();
    assert!(fit.rss < 1e-12, "{}", fit.rss);
}

#[test]
fn isotonic_fit_is_no_worse_than_a_monotone_hinge() {
    let (_, ds) = study(3, 200, vec![(GeneSpec::hinge(1.0, 2.0), 5)], 1.0);
    let opts = FitOptions::default();
    for g in 0..5 {
        let y = ds.delta_expression.row(g);
        let h = fit_hinge(y, &ds.exposures, &ds.pairs, &opts).unwrap();
        let iso = fit_isotonic_adjusted(y, &ds.exposures, &ds.pairs, &opts).unwrap();
        assert!(iso.rss <= h.rss + 1e-10, "{} > {}", iso.rss, h.rss);
    }
}

#[test]
fn noiseless_interaction_on_a_knot_is_recovered() {
    let (mut config, ds) = study(4, 200, vec![(GeneSpec::interaction(2.0, 2.0), 1)], 0.0);
    let basis = piecewise_basis(&ds.times(), 4);
    let knot = basis.knots[1];
    config.gene_groups[0].spec = GeneSpec::interaction(2.0, knot);
    let ds = dataset_for(&config);
    let fit = fit_interaction(ds.delta_expression.row(0), &ds.exposures, &ds.pairs, &FitOptions::default()).unwrap();
    let mut expected = vec![0.0; 5];
    expected[2] = 2.0;
    for (c, e) in fit.psi_coef.iter().zip(&expected) {
        assert!((c - e).abs() < 1e-6, "{:?}", fit.psi_coef);
    }
    assert!(fit.phi_coef.iter().all(|c| c.abs() < 1e-6));
}

#[test]
fn scan_is_ordered_and_independent_of_worker_count() {
    let (_, ds) = study(
        5,
        120,
        vec![(GeneSpec::null(), 6), (GeneSpec::hinge(1.0, 2.0), 2), (GeneSpec::interaction(2.0, 2.0), 2)],
        1.0,
    );
    let opts = FitOptions {
        n_permutations: 49,
        seed: 9,
        ..FitOptions::default()
    };
    for model in TrajectoryModel::ALL {
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| scan_genes(&ds, model, &opts).unwrap())
        };
        let one = run(1);
        let many = run(4);
        assert_eq!(one, many);
        assert_eq!(one, run(1));
        assert_eq!(one.gene_ids(), ds.delta_expression.gene_ids.iter().map(String::as_str).collect::<Vec<_>>());
        assert!(one.rows.iter().all(|r| r.status == FitStatus::Ok));
    }
}

#[test]
fn single_gene_scan_equals_single_gene_operations() {
    let (_, ds) = study(6, 150, vec![(GeneSpec::hinge(1.0, 2.0), 1)], 1.0);
    let master = 42;
    let scan_opts = FitOptions {
        n_permutations: 99,
        seed: master,
        ..FitOptions::default()
    };
    let gene_opts = FitOptions {
        seed: gene_seed(master, 0),
        ..scan_opts.clone()
    };
    let y = ds.delta_expression.row(0);
    let h = scan_genes(&ds, TrajectoryModel::Hinge, &scan_opts).unwrap();
    let fit = fit_hinge(y, &ds.exposures, &ds.pairs, &gene_opts).unwrap();
    let test = test_hinge(y, &ds.exposures, &ds.pairs, &gene_opts).unwrap();
    let row = &h.rows[0];
    assert_eq!(row.alpha2, Some(fit.alpha2));
    assert_eq!(row.t_hat, Some(fit.t_hat));
    assert_eq!(row.statistic, Some(test.statistic));
    assert_eq!(row.p_value, Some(test.p_value));

    let iso = scan_genes(&ds, TrajectoryModel::Isotonic, &scan_opts).unwrap();
    assert_eq!(iso.rows[0].p_value, Some(test_isotonic(y, &ds.exposures, &ds.pairs, &gene_opts).unwrap().p_value));
    let int = scan_genes(&ds, TrajectoryModel::Interaction, &scan_opts).unwrap();
    assert_eq!(
        int.rows[0].p_value,
        Some(test_interaction(y, &ds.exposures, &ds.pairs, &gene_opts).unwrap().p_value)
    );
}

#[test]
fn per_gene_failures_are_recorded_not_raised() {
    let t: Vec<f64> = (0..30).map(|i| 0.2 * f64::from(i + 1)).collect();
    let pairs = pairs_from_times(&t);
    let ids: Vec<String> = pairs.iter().map(|p| p.pair_id.clone()).collect();
    let rows = vec![(0..30).map(f64::from).collect(), (0..30).map(|i| f64::from(i % 5)).collect()];
    let delta = trajscan::data::ExpressionMatrix::from_rows(vec!["a".into(), "b".into()], ids, rows).unwrap();
    let ds = trajscan::data::assemble_dataset(pairs, delta, design(30, vec![], None)).unwrap();
    let opts = FitOptions {
        n_permutations: 9,
        backfit_max_iter: 1,
        ..FitOptions::default()
    };
    let r = scan_genes(&ds, TrajectoryModel::Isotonic, &opts).unwrap();
    assert_eq!(r.gene_ids(), vec!["a", "b"]);
    assert!(r.n_failed() > 0);
    for row in r.rows.iter().filter(|row| !row.status.is_ok()) {
        assert!(row.status.label().contains("converge"));
        assert_eq!(row.p_value, None);
    }
}

#[test]
fn design_scale_case_count() {
    let config = SimulationConfig::default();
    let cohort = simulate_cohort(&config).unwrap();
    // 49633 women at 1.5% cumulative incidence.
    let expected: f64 = 49_633.0 * 0.015;
    let sd = (expected * (1.0 - 0.015)).sqrt();
    assert!((cohort.n_cases() as f64 - expected).abs() <= 3.0 * sd, "{}", cohort.n_cases());
}

#[test]
fn no_genes_gives_empty_matrices() {
    let config = SimulationConfig {
        n_women: 5000,
        n_genes: 0,
        gene_groups: vec![],
        ..SimulationConfig::default()
    };
    let s = simulate_study(&config).unwrap();
    assert_eq!(s.expression.case.n_genes(), 0);
    assert!(s.pairs.len() > 10);
}

#[test]
fn max_pairs_keeps_a_subset() {
    let (config, ds) = study(7, 200, vec![(GeneSpec::null(), 1)], 1.0);
    assert_eq!(ds.n_pairs(), 200);
    let full = simulate_study(&SimulationConfig {
        max_pairs: None,
        ..config
    })
    .unwrap();
    assert!(full.pairs.len() > 600);
}

#[test]
fn nuisance_scales_leave_delta_bitwise_unchanged() {
    let base = SimulationConfig {
        max_pairs: Some(150),
        n_genes: 3,
        gene_groups: vec![trajscan::simulate::GeneGroup {
            spec: GeneSpec::hinge(1.0, 2.0),
            count: 3,
        }],
        ..SimulationConfig::default()
    };
    let delta = |chip_sd: f64, age_slope: f64| {
        let s = simulate_study(&SimulationConfig {
            chip_sd,
            age_slope,
            ..base.clone()
        })
        .unwrap();
        compute_delta(&s.expression.case, &s.expression.control).unwrap()
    };
    let reference = delta(0.0, 0.0);
    for (c, a) in [(5.0, 0.0), (0.0, 0.1), (5.0, 0.1)] {
        assert_eq!(delta(c, a), reference);
    }
}

#[test]
fn wide_bandwidth_reproduces_global_clogit() {
    let (_, ds) = study(8, 150, vec![(GeneSpec::constant_diff(0.3), 1)], 1.0);
    let y = ds.delta_expression.row(0);
    let global = fit_clogit(y, None).unwrap();
    let times = ds.times();
    let lo = times.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let grid: Vec<f64> = (0..5).map(|k| lo + (hi - lo) * f64::from(k) / 4.0).collect();
    let tv = fit_clogit_timevarying(y, &ds.pairs, 1e6, &grid).unwrap();
    for b in &tv.beta_t {
        assert!((b.unwrap() - global.beta[0]).abs() < 1e-8);
    }
}
