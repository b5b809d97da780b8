//! Explanation-stage properties on generator-backed data: cluster recovery,
//! k selection, regression ordering, and patch-level score ranking.

use survmil_core::explain::{
    assign, forward_stepwise, kmeans_fit, ols_fit, patch_cluster_scores, quantitate_cases,
    quantitation_matrix, select_k,
};
use survmil_core::mil::CaseBag;
use survmil_core::survival::SurvivalRecord;
use survmil_core::synth::{generate, oracle_scores, CovariateModel, GeneratorConfig, Split};

fn prototype_cohort(seed: u64, n_cases: usize) -> survmil_core::synth::SyntheticCohort {
    let config = GeneratorConfig {
        n_cases,
        slides_per_case: (1, 2),
        patches_per_slide: (10, 20),
        feature_dim: 8,
        n_prototypes: 8,
        prototype_risk_betas: vec![1.5, 0.0, -0.4, 0.2, 0.0, -0.2, 0.1, 0.0],
        covariates: CovariateModel {
            age_beta_per_decade: 0.0,
            female_beta: 0.0,
            grade_betas: [0.0, 0.0],
            t4_beta: 0.0,
            ..Default::default()
        },
        seed,
        ..GeneratorConfig::default()
    };
    generate(&config).unwrap()
}

fn split_bags(
    cohort: &survmil_core::synth::SyntheticCohort,
    split: Split,
) -> (Vec<CaseBag>, Vec<SurvivalRecord>, Vec<f64>) {
    let idx = cohort.split_indices(split);
    let oracle = oracle_scores(&cohort.ground_truth);
    (
        idx.iter().map(|&i| cohort.bags[i].clone()).collect(),
        idx.iter().map(|&i| cohort.records[i].clone()).collect(),
        idx.iter().map(|&i| oracle[i]).collect(),
    )
}

fn train_patch_sample(cohort: &survmil_core::synth::SyntheticCohort) -> Vec<f64> {
    let mut sample = Vec::new();
    for &i in &cohort.split_indices(Split::Train) {
        for p in cohort.bags[i].patches() {
            sample.extend_from_slice(p);
        }
    }
    sample
}

#[test]
fn clusters_recover_prototypes_and_score_ranking() {
    let cohort = prototype_cohort(41, 200);
    let d = 8;
    let k = 10; // over-cluster: a populous prototype may split, never merge
    let sample = train_patch_sample(&cohort);
    let model = kmeans_fit(&sample, d, k, 11).unwrap();

    // map each cluster to the dominant true prototype among train patches
    let train_idx = cohort.split_indices(Split::Train);
    let mut flat = Vec::new();
    let mut protos = Vec::new();
    for &i in &train_idx {
        for p in cohort.bags[i].patches() {
            flat.extend_from_slice(p);
        }
        protos.extend_from_slice(&cohort.ground_truth.cases[i].patch_prototypes);
    }
    let ids = assign(&model, &flat, d).unwrap();
    let mut votes = vec![[0usize; 8]; 10];
    for (c, p) in ids.iter().zip(&protos) {
        votes[*c][*p] += 1;
    }
    // purity: every nonempty cluster is dominated by one prototype
    let mut cluster_to_proto = vec![usize::MAX; k];
    for c in 0..k {
        let total: usize = votes[c].iter().sum();
        if total == 0 {
            continue;
        }
        let (best_p, best_n) = votes[c]
            .iter()
            .enumerate()
            .max_by_key(|(_, &n)| n)
            .map(|(p, &n)| (p, n))
            .unwrap();
        assert!(
            best_n as f64 / total as f64 > 0.9,
            "cluster {c} impure: {votes:?}"
        );
        cluster_to_proto[c] = best_p;
    }

    // the patch-level score ranking puts the high-risk prototype's cluster
    // on top when patches are scored by their prototype's planted effect
    let betas = &cohort.ground_truth.betas;
    let val_idx = cohort.split_indices(Split::Val1);
    let mut patch_scores = Vec::new();
    let mut patch_clusters = Vec::new();
    let mut patch_slides = Vec::new();
    for &i in &val_idx {
        let bag = &cohort.bags[i];
        let mut flat = Vec::new();
        for p in bag.patches() {
            flat.extend_from_slice(p);
        }
        let ids = assign(&model, &flat, d).unwrap();
        for (pi, &cid) in ids.iter().enumerate() {
            patch_scores.push(betas[cohort.ground_truth.cases[i].patch_prototypes[pi]]);
            patch_clusters.push(cid);
            patch_slides.push(bag.slide_of(pi).to_string());
        }
    }
    let summary =
        patch_cluster_scores(&patch_scores, &patch_clusters, &patch_slides, k, 200, 3).unwrap();
    let top = summary
        .clusters
        .iter()
        .max_by(|a, b| a.mean.partial_cmp(&b.mean).unwrap())
        .unwrap();
    assert_eq!(
        cluster_to_proto[top.cluster], cohort.ground_truth.high_risk_prototype,
        "top-scoring cluster should map to the high-risk prototype"
    );
}

#[test]
fn select_k_never_picks_two_clusters_for_eight_prototypes() {
    let cohort = prototype_cohort(55, 160);
    let sample = train_patch_sample(&cohort);
    let (tune_bags, _, tune_scores) = split_bags(&cohort, Split::Tune);
    let selection = select_k(&[2, 8, 64], &sample, 8, &tune_bags, &tune_scores, 8, 17).unwrap();
    assert!(
        selection.chosen_k == 8 || selection.chosen_k == 64,
        "chose k={}",
        selection.chosen_k
    );
    let r2_of = |k: usize| {
        selection
            .results
            .iter()
            .find(|r| r.k == k)
            .unwrap()
            .adjusted_r2
    };
    assert!(r2_of(2) < r2_of(8).max(r2_of(64)));
    // deterministic replay
    let again = select_k(&[2, 8, 64], &sample, 8, &tune_bags, &tune_scores, 8, 17).unwrap();
    assert_eq!(selection.chosen_k, again.chosen_k);
}

#[test]
fn cluster_features_explain_oracle_scores_better_than_clinico() {
    // scores are functions of patch content only, so cluster quantitations
    // must explain them better than the (independent) clinical covariates
    let cohort = prototype_cohort(67, 220);
    let sample = train_patch_sample(&cohort);
    let model = kmeans_fit(&sample, 8, 8, 5).unwrap();
    let oracle = oracle_scores(&cohort.ground_truth);
    let val_idx = cohort.split_indices(Split::Val1);
    let val_bags: Vec<CaseBag> = val_idx.iter().map(|&i| cohort.bags[i].clone()).collect();
    let val_scores: Vec<f64> = val_idx.iter().map(|&i| oracle[i]).collect();

    let quants = quantitate_cases(&model, &val_bags).unwrap();
    let cluster_features = quantitation_matrix(&quants, true).unwrap();
    let cluster_fit = ols_fit(&cluster_features, &val_scores).unwrap();

    let clinico = cohort.clinico_design(&val_idx).unwrap();
    let clinico_fit = ols_fit(&clinico, &val_scores).unwrap();

    assert!(
        cluster_fit.adjusted_r2 > clinico_fit.adjusted_r2,
        "clusters {} vs clinico {}",
        cluster_fit.adjusted_r2,
        clinico_fit.adjusted_r2
    );
    assert!(cluster_fit.adjusted_r2 > 0.8);
    assert!(clinico_fit.adjusted_r2 < 0.2);
}

#[test]
fn stepwise_finds_the_high_risk_cluster_early() {
    let cohort = prototype_cohort(73, 220);
    let sample = train_patch_sample(&cohort);
    let model = kmeans_fit(&sample, 8, 8, 7).unwrap();
    let oracle = oracle_scores(&cohort.ground_truth);
    let tune_idx = cohort.split_indices(Split::Tune);
    let tune_bags: Vec<CaseBag> = tune_idx.iter().map(|&i| cohort.bags[i].clone()).collect();
    let tune_scores: Vec<f64> = tune_idx.iter().map(|&i| oracle[i]).collect();

    let quants = quantitate_cases(&model, &tune_bags).unwrap();
    let features = quantitation_matrix(&quants, false).unwrap();
    let stepwise = forward_stepwise(&features, &tune_scores, 4).unwrap();

    // clusters dominated by the high-risk prototype among train patches
    let hr = cohort.ground_truth.high_risk_prototype;
    let train_idx = cohort.split_indices(Split::Train);
    let mut hr_counts = vec![0usize; 8];
    let mut totals = vec![0usize; 8];
    for &i in &train_idx {
        let bag = &cohort.bags[i];
        let mut flat = Vec::new();
        for p in bag.patches() {
            flat.extend_from_slice(p);
        }
        let ids = assign(&model, &flat, 8).unwrap();
        for (pi, &cid) in ids.iter().enumerate() {
            totals[cid] += 1;
            if cohort.ground_truth.cases[i].patch_prototypes[pi] == hr {
                hr_counts[cid] += 1;
            }
        }
    }
    let hr_clusters: Vec<usize> = (0..8)
        .filter(|&c| totals[c] > 0 && hr_counts[c] * 2 > totals[c])
        .collect();
    assert!(!hr_clusters.is_empty(), "no cluster is high-risk dominated");
    assert!(
        stepwise.order[..3].iter().any(|c| hr_clusters.contains(c)),
        "no high-risk cluster {hr_clusters:?} in first three selections {:?}",
        &stepwise.order
    );
}
