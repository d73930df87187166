#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use trajscan::data::{
    assemble_dataset, compute_delta, AnalysisDataset, CarcinogenColumn, Column, ExposureDesign, PairRecord,
};
use trajscan::simulate::{simulate_study, GeneGroup, GeneSpec, SimulationConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn pairs_from_times(times: &[f64]) -> Vec<PairRecord> {
    times
        .iter()
        .enumerate()
        .map(|(i, &t)| PairRecord {
            pair_id: format!("p{i:04}"),
            time_to_diagnosis: t,
            age: 50,
            chip_id: None,
            stratum: None,
        })
        .collect()
}

pub fn design(n: usize, columns: Vec<Vec<f64>>, carcinogen: Option<Vec<bool>>) -> ExposureDesign {
    ExposureDesign {
        pair_ids: (0..n).map(|i| format!("p{i:04}")).collect(),
        delta_columns: columns
            .into_iter()
            .enumerate()
            .map(|(k, values)| Column {
                name: format!("e{}", k + 1),
                values,
            })
            .collect(),
        indicator_columns: Vec::new(),
        carcinogen_case: carcinogen.map(|case| CarcinogenColumn { name: "hrt".into(), case }),
    }
}

/// Simulated study with `n_pairs` pairs and the given gene groups.
pub fn study(seed: u64, n_pairs: usize, groups: Vec<(GeneSpec, usize)>, noise_sd: f64) -> (SimulationConfig, AnalysisDataset) {
    let n_genes = groups.iter().map(|g| g.1).sum();
    let config = SimulationConfig {
        seed,
        max_pairs: Some(n_pairs),
        n_genes,
        gene_groups: groups.into_iter().map(|(spec, count)| GeneGroup { spec, count }).collect(),
        noise_sd,
        ..SimulationConfig::default()
    };
    (config.clone(), dataset_for(&config))
}

pub fn dataset_for(config: &SimulationConfig) -> AnalysisDataset {
    let s = simulate_study(config).unwrap();
    let delta = compute_delta(&s.expression.case, &s.expression.control).unwrap();
    assemble_dataset(s.pairs, delta, s.expression.design).unwrap()
}
