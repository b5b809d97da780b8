use survmil_core::explain::{assign, kmeans_fit, patch_cluster_scores, quantitate_cases, quantitation_matrix, forward_stepwise, ols_fit};
use survmil_core::mil::{case_scores, ensemble_top, infer_case, select_checkpoint, train, CaseBag, TrainConfig, TrainedCandidate};
use survmil_core::seeds::{child_seed, stream};
use survmil_core::survival::SurvivalRecord;
use survmil_core::synth::{generate, CovariateModel, GeneratorConfig, Split};

fn main() {
    for seed_index in 0..10u64 {
        let gen_seed = 7000 + seed_index;
        let config = GeneratorConfig {
            n_cases: 320,
            slides_per_case: (1, 2),
            patches_per_slide: (10, 24),
            feature_dim: 12,
            n_prototypes: 8,
            prototype_risk_betas: vec![1.5, 0.0, -0.3, 0.2, 0.0, -0.2, 0.1, 0.0],
            covariates: CovariateModel::default(),
            censor_rate: 0.0,
            seed: gen_seed,
            ..GeneratorConfig::default()
        };
        let cohort = generate(&config).unwrap();
        let pick = |idx: &[usize]| -> (Vec<CaseBag>, Vec<SurvivalRecord>) {
            (idx.iter().map(|&i| cohort.bags[i].clone()).collect(),
             idx.iter().map(|&i| cohort.records[i].clone()).collect())
        };
        let (train_bags, train_records) = pick(&cohort.split_indices(Split::Train));
        let (tune_bags, tune_records) = pick(&cohort.split_indices(Split::Tune));
        let base = TrainConfig {
            total_steps: 8000, eval_every: 500, batch_size: 32, bag_size: 8,
            eval_patches_per_case: 128, rolling_window: 3, n_layers: 1, base_depth: 16,
            l2_weight: std::env::var("L2").unwrap().parse().unwrap(),
            ..TrainConfig::default()
        };
        let mut candidates = Vec::new();
        for m in 0..3u64 {
            let config = TrainConfig { seed: child_seed(gen_seed, stream::TRAIN_INIT, m), ..base.clone() };
            let output = train(&train_bags, &train_records, &tune_bags, &tune_records, &config).unwrap();
            let best = select_checkpoint(&output.checkpoints, base.rolling_window).unwrap();
            let tune_scores = case_scores(&best.model, &tune_bags, base.eval_patches_per_case, base.bag_sampling, config.seed).unwrap();
            candidates.push(TrainedCandidate { model: best.model.clone(), tune_cindex: best.tune_metric, tune_scores });
        }
        let ensemble = ensemble_top(candidates, 3).unwrap();
        let inferences: Vec<_> = cohort.bags.iter().map(|b| infer_case(&ensemble, b).unwrap()).collect();

        let train_idx = cohort.split_indices(Split::Train);
        let mut sample = Vec::new();
        for &i in &train_idx { for p in cohort.bags[i].patches() { sample.extend_from_slice(p); } }
        let k = 8;
        let model = kmeans_fit(&sample, 12, k, gen_seed).unwrap();

        let hr = cohort.ground_truth.high_risk_prototype;
        let mut hr_counts = vec![0usize; k];
        let mut totals = vec![0usize; k];
        for &i in &train_idx {
            let bag = &cohort.bags[i];
            let mut flat = Vec::new();
            for p in bag.patches() { flat.extend_from_slice(p); }
            let ids = assign(&model, &flat, 12).unwrap();
            for (pi, &cid) in ids.iter().enumerate() {
                totals[cid] += 1;
                if cohort.ground_truth.cases[i].patch_prototypes[pi] == hr { hr_counts[cid] += 1; }
            }
        }
        let mut val_idx = cohort.split_indices(Split::Val1);
        val_idx.extend(cohort.split_indices(Split::Val2));
        let mut patch_vals = Vec::new(); let mut patch_clusters = Vec::new(); let mut patch_slides = Vec::new();
        for &i in &val_idx {
            let bag = &cohort.bags[i];
            let mut flat = Vec::new();
            for p in bag.patches() { flat.extend_from_slice(p); }
            let ids = assign(&model, &flat, 12).unwrap();
            for (pi, &cid) in ids.iter().enumerate() {
                patch_vals.push(inferences[i].patch_scores[pi]);
                patch_clusters.push(cid);
                patch_slides.push(bag.slide_of(pi).to_string());
            }
        }
        let summary = patch_cluster_scores(&patch_vals, &patch_clusters, &patch_slides, k, 200, gen_seed).unwrap();
        println!("== seed {seed_index} (hr proto {hr}):");
        for c in &summary.clusters {
            println!("  cluster {}: n={} mean={:.3} hr_frac={:.2}", c.cluster, c.n_patches, c.mean,
                hr_counts[c.cluster] as f64 / totals[c.cluster].max(1) as f64);
        }
        // quick extra: tune stepwise
        let tune_idx = cohort.split_indices(Split::Tune);
        let tq = quantitate_cases(&model, &tune_idx.iter().map(|&i| cohort.bags[i].clone()).collect::<Vec<_>>()).unwrap();
        let tf = quantitation_matrix(&tq, false).unwrap();
        let ts: Vec<f64> = tune_idx.iter().map(|&i| inferences[i].case_score).collect();
        let sw = forward_stepwise(&tf, &ts, 4).unwrap();
        println!("  stepwise order: {:?}", sw.order);
        let _ = ols_fit(&tf.select(&sw.order).unwrap(), &ts);
    }
}
