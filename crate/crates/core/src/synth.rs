//! Deterministic synthetic cohorts with planted prognostic structure.
//!
//! Patch vectors are drawn around prototype centroids; a case's true linear
//! predictor is the beta-weighted mix of its realized prototype fractions
//! plus covariate terms; survival follows an exponential proportional-hazards
//! model with administrative plus calibrated random censoring. Heatmaps are
//! laid out so the mask pipeline at the default threshold recovers exactly
//! the generated patch set.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::mask::{HeatmapGrid, DEFAULT_PATCH_SIDE, DEFAULT_SUPERPIXEL_UM};
use crate::mil::{CaseBag, SlidePatches};
use crate::seeds::{child_rng, stream};
use crate::survival::{CovariateMatrix, DesignBuilder, SurvivalRecord};

/// Cohort split labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Split {
    Train,
    Tune,
    Val1,
    Val2,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::Train, Split::Tune, Split::Val1, Split::Val2];

    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Tune => "tune",
            Split::Val1 => "val1",
            Split::Val2 => "val2",
        }
    }

    pub fn parse(s: &str) -> Result<Split> {
        match s {
            "train" => Ok(Split::Train),
            "tune" => Ok(Split::Tune),
            "val1" => Ok(Split::Val1),
            "val2" => Ok(Split::Val2),
            other => Err(Error::InvalidArgument(format!("unknown split: {other}"))),
        }
    }
}

/// Clinical covariate model: sampling distributions and planted effects
/// (contributions to the true linear predictor).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct CovariateModel {
    pub age_mean: f64,
    pub age_sd: f64,
    /// Effect per decade of age (age enters as (age - age_mean)/10).
    pub age_beta_per_decade: f64,
    pub female_prob: f64,
    pub female_beta: f64,
    /// P(grade = 1, 2, 3); normalized internally.
    pub grade_probs: [f64; 3],
    /// Effects of grade 2 and grade 3 versus grade 1.
    pub grade_betas: [f64; 2],
    pub t4_prob: f64,
    pub t4_beta: f64,
}

impl Default for CovariateModel {
    fn default() -> Self {
        Self {
            age_mean: 65.0,
            age_sd: 10.0,
            age_beta_per_decade: 0.3,
            female_prob: 0.45,
            female_beta: -0.2,
            grade_probs: [0.05, 0.70, 0.25],
            grade_betas: [0.3, 0.7],
            t4_prob: 0.2,
            t4_beta: 1.2,
        }
    }
}

/// Generator configuration.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct GeneratorConfig {
    pub n_cases: usize,
    /// Inclusive range of slides per case.
    pub slides_per_case: (usize, usize),
    /// Inclusive range of patches per slide.
    pub patches_per_slide: (usize, usize),
    pub feature_dim: usize,
    pub n_prototypes: usize,
    /// Planted effect of each prototype's patch fraction.
    pub prototype_risk_betas: Vec<f64>,
    /// Within-prototype feature standard deviation.
    pub prototype_spread: f64,
    /// Baseline hazard per month at linear predictor zero.
    pub baseline_hazard_per_month: f64,
    pub admin_censor_months: u32,
    /// Target overall censored fraction (administrative plus random); 0
    /// disables random censoring, leaving administrative censoring only.
    pub censor_rate: f64,
    /// Dirichlet-style concentration of the non-high-risk prototype weights.
    pub mixture_alpha: f64,
    /// Probability that a case carries none of the highest-beta prototype.
    pub high_risk_zero_prob: f64,
    /// Beta(alpha, beta) law of the high-risk prototype's weight when
    /// present. The default is heavy near 1, giving the zero-inflated,
    /// strongly bimodal composition that makes the planted fraction
    /// informative.
    pub high_risk_weight_alpha: f64,
    pub high_risk_weight_beta: f64,
    pub covariates: CovariateModel,
    /// Train/tune/val1/val2 fractions; normalized internally.
    pub split_fractions: [f64; 4],
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let n_prototypes = 8;
        let mut betas = vec![0.0; n_prototypes];
        betas[0] = 1.5;
        Self {
            n_cases: 600,
            slides_per_case: (1, 3),
            patches_per_slide: (20, 60),
            feature_dim: 16,
            n_prototypes,
            prototype_risk_betas: betas,
            prototype_spread: 0.35,
            baseline_hazard_per_month: 0.003,
            admin_censor_months: 120,
            censor_rate: 0.0,
            mixture_alpha: 1.0,
            high_risk_zero_prob: 0.45,
            high_risk_weight_alpha: 8.0,
            high_risk_weight_beta: 1.2,
            covariates: CovariateModel::default(),
            split_fractions: [0.4, 0.2, 0.2, 0.2],
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_cases == 0 {
            return Err(Error::InvalidArgument(format!("n_cases must be >= 1")));
        }
        for (name, (lo, hi)) in [
            ("slides_per_case", self.slides_per_case),
            ("patches_per_slide", self.patches_per_slide),
        ] {
            if lo == 0 || hi < lo {
                return Err(Error::InvalidArgument(format!("invalid range for {name}")));
            }
        }
        if self.feature_dim == 0 || self.n_prototypes == 0 {
            return Err(Error::InvalidArgument(format!(
                "feature_dim and n_prototypes must be >= 1"
            )));
        }
        if self.prototype_risk_betas.len() != self.n_prototypes {
            return Err(Error::LengthMismatch {
                expected: self.n_prototypes,
                got: self.prototype_risk_betas.len(),
            });
        }
        if !(self.prototype_spread > 0.0) {
            return Err(Error::InvalidArgument(format!("spread must be positive")));
        }
        if !(self.baseline_hazard_per_month > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "baseline hazard must be positive"
            )));
        }
        if self.admin_censor_months == 0 {
            return Err(Error::InvalidArgument(format!(
                "admin_censor_months must be >= 1"
            )));
        }
        if !(0.0..1.0).contains(&self.censor_rate) {
            return Err(Error::InvalidArgument(format!(
                "censor_rate must be in [0,1)"
            )));
        }
        if !(self.mixture_alpha > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "mixture_alpha must be positive"
            )));
        }
        if !(0.0..=1.0).contains(&self.high_risk_zero_prob) {
            return Err(Error::InvalidArgument(format!(
                "high_risk_zero_prob must be in [0,1]"
            )));
        }
        if !(self.high_risk_weight_alpha > 0.0) || !(self.high_risk_weight_beta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "high-risk weight Beta parameters must be positive"
            )));
        }
        if self.split_fractions.iter().any(|&f| f < 0.0)
            || self.split_fractions.iter().sum::<f64>() <= 0.0
        {
            return Err(Error::InvalidArgument(format!("invalid split fractions")));
        }
        Ok(())
    }
}

/// Raw clinical covariates of one case, as written to the cohort manifest.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CaseCovariates {
    pub age_years: f64,
    pub female: bool,
    /// Grade in 1..=3.
    pub grade: u8,
    pub t4: bool,
}

/// Hidden truth for one case.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CaseGroundTruth {
    pub case_id: String,
    /// True linear predictor: beta · prototype fractions + covariate term.
    pub eta: f64,
    /// The covariate part of eta.
    pub covariate_term: f64,
    /// Realized fraction of the case's patches per prototype.
    pub prototype_fractions: Vec<f64>,
    /// True prototype of each patch, in the bag's flat patch order.
    pub patch_prototypes: Vec<usize>,
}

/// Full generator truth; inputs to oracle checks, never to the pipeline.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GroundTruth {
    pub betas: Vec<f64>,
    /// Index of the highest-beta prototype.
    pub high_risk_prototype: usize,
    /// Rate of the calibrated random-censoring distribution (0 = none).
    pub censor_hazard: f64,
    pub cases: Vec<CaseGroundTruth>,
}

/// One slide's heatmap.
#[derive(Debug, Clone, PartialEq)]
pub struct SlideHeatmap {
    pub slide_id: String,
    pub grid: HeatmapGrid,
}

/// Everything the generator produces.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCohort {
    pub records: Vec<SurvivalRecord>,
    pub splits: Vec<Split>,
    pub covariates: Vec<CaseCovariates>,
    pub bags: Vec<CaseBag>,
    /// Per case, per slide, aligned with the bag's slides.
    pub heatmaps: Vec<Vec<SlideHeatmap>>,
    pub ground_truth: GroundTruth,
}

impl SyntheticCohort {
    pub fn n_cases(&self) -> usize {
        self.records.len()
    }

    /// Case indices belonging to a split.
    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        (0..self.n_cases())
            .filter(|&i| self.splits[i] == split)
            .collect()
    }

    /// Standard clinicopathologic design over the given cases: age in
    /// decades (centered in-sample), female and T4 indicators, grade as
    /// indicator columns against the lowest present grade.
    pub fn clinico_design(&self, indices: &[usize]) -> Result<CovariateMatrix> {
        let ages: Vec<f64> = indices.iter().map(|&i| self.covariates[i].age_years).collect();
        let female: Vec<f64> = indices
            .iter()
            .map(|&i| if self.covariates[i].female { 1.0 } else { 0.0 })
            .collect();
        let grade: Vec<String> = indices
            .iter()
            .map(|&i| format!("g{}", self.covariates[i].grade))
            .collect();
        let t4: Vec<f64> = indices
            .iter()
            .map(|&i| if self.covariates[i].t4 { 1.0 } else { 0.0 })
            .collect();
        DesignBuilder::new(indices.len())
            .age_decades("age", &ages)?
            .indicator("female", &female)?
            .categorical("grade", &grade)?
            .indicator("t4", &t4)?
            .build()
    }
}

/// The true per-case linear predictors, in case order.
pub fn oracle_scores(gt: &GroundTruth) -> Vec<f64> {
    gt.cases.iter().map(|c| c.eta).collect()
}

fn std_normal(rng: &mut ChaCha12Rng) -> f64 {
    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
}

fn sample_beta(alpha: f64, beta: f64, rng: &mut ChaCha12Rng) -> f64 {
    let ga = Gamma::new(alpha, 1.0).expect("validated alpha");
    let gb = Gamma::new(beta, 1.0).expect("validated beta");
    let a: f64 = ga.sample(rng).max(1e-300);
    let b: f64 = gb.sample(rng).max(1e-300);
    a / (a + b)
}

fn uniform_range(rng: &mut ChaCha12Rng, lo: usize, hi: usize) -> usize {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Expected censored fraction given per-case event rates, a random-censor
/// hazard, and the administrative horizon.
fn expected_censor_fraction(rates: &[f64], censor_hazard: f64, admin: f64) -> f64 {
    let mut event_prob = 0.0;
    for &r in rates {
        let total = r + censor_hazard;
        event_prob += r / total * (1.0 - libm::exp(-total * admin));
    }
    1.0 - event_prob / rates.len() as f64
}

/// Solve for the random-censor hazard hitting the target censored fraction.
fn calibrate_censoring(rates: &[f64], target: f64, admin: f64) -> Result<f64> {
    if target == 0.0 {
        // random censoring disabled
        return Ok(0.0);
    }
    let floor = expected_censor_fraction(rates, 0.0, admin);
    if target <= floor {
        if target < floor - 0.02 {
            return Err(Error::InfeasibleCensorRate {
                target,
                minimum: floor,
            });
        }
        return Ok(0.0);
    }
    let mut hi = 1e-4;
    while expected_censor_fraction(rates, hi, admin) < target {
        hi *= 2.0;
        if hi > 1e9 {
            return Err(Error::InfeasibleCensorRate {
                target,
                minimum: floor,
            });
        }
    }
    let mut lo = 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if expected_censor_fraction(rates, mid, admin) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

struct CasePatches {
    slides: Vec<SlidePatches>,
    heatmaps: Vec<SlideHeatmap>,
    patch_prototypes: Vec<usize>,
    fractions: Vec<f64>,
}

fn generate_case_patches(
    config: &GeneratorConfig,
    prototypes: &[f64],
    case_id: &str,
    case_index: usize,
) -> Result<CasePatches> {
    let d = config.feature_dim;
    let k = config.n_prototypes;
    let mut rng = child_rng(config.seed, stream::GENERATE_CASE, case_index as u64);
    let mut heat_rng = child_rng(config.seed, stream::GENERATE_HEATMAP, case_index as u64);

    // Per-case prototype weights. The high-risk prototype's weight is
    // zero-inflated and Beta-distributed when present; the remaining mass
    // spreads over the other prototypes Dirichlet-style.
    let high_risk = high_risk_prototype(&config.prototype_risk_betas);
    let mut weights = vec![0.0; k];
    if k == 1 {
        weights[0] = 1.0;
    } else {
        let zeroed = rng.random::<f64>() < config.high_risk_zero_prob;
        let w_hr = if zeroed {
            0.0
        } else {
            sample_beta(
                config.high_risk_weight_alpha,
                config.high_risk_weight_beta,
                &mut rng,
            )
        };
        let gamma = Gamma::new(config.mixture_alpha, 1.0)
            .map_err(|_| Error::InvalidArgument(format!("bad mixture alpha")))?;
        let mut rest: Vec<f64> = (0..k - 1).map(|_| gamma.sample(&mut rng).max(1e-12)).collect();
        let rest_total: f64 = rest.iter().sum();
        for w in &mut rest {
            *w *= (1.0 - w_hr) / rest_total;
        }
        weights[high_risk] = w_hr;
        let mut it = rest.into_iter();
        for (j, w) in weights.iter_mut().enumerate() {
            if j != high_risk {
                *w = it.next().expect("one weight per non-high-risk prototype");
            }
        }
    }

    let n_slides = uniform_range(&mut rng, config.slides_per_case.0, config.slides_per_case.1);
    let mut slides = Vec::with_capacity(n_slides);
    let mut heatmaps = Vec::with_capacity(n_slides);
    let mut patch_prototypes = Vec::new();
    let mut counts = vec![0usize; k];

    for s in 0..n_slides {
        let n_patches = uniform_range(
            &mut rng,
            config.patches_per_slide.0,
            config.patches_per_slide.1,
        );
        let mut features = Vec::with_capacity(n_patches * d);
        let mut coords = Vec::with_capacity(n_patches);
        let side = DEFAULT_PATCH_SIDE;
        let cols = ceil_sqrt(n_patches);
        let rows = n_patches.div_ceil(cols);
        let (w, h) = (cols * side, rows * side);
        let mut values = vec![0.0f32; w * h];
        // background noise below threshold
        for v in values.iter_mut() {
            *v = 0.05 + 0.40 * heat_rng.random::<f32>();
        }
        for p in 0..n_patches {
            // prototype draw by inverse cdf over weights
            let mut u = rng.random::<f64>();
            let mut proto = k - 1;
            for (j, &wj) in weights.iter().enumerate() {
                if u < wj {
                    proto = j;
                    break;
                }
                u -= wj;
            }
            counts[proto] += 1;
            patch_prototypes.push(proto);
            for dim in 0..d {
                features.push(
                    prototypes[proto * d + dim] + config.prototype_spread * std_normal(&mut rng),
                );
            }
            let (bx, by) = (p % cols, p / cols);
            coords.push(((bx * side) as u32, (by * side) as u32));
            // tumor block: values above threshold
            for y in by * side..(by + 1) * side {
                for x in bx * side..(bx + 1) * side {
                    values[y * w + x] = 0.55 + 0.40 * heat_rng.random::<f32>();
                }
            }
        }
        let slide_id = format!("{case_id}_s{s}");
        slides.push(SlidePatches::new(slide_id.clone(), d, features, coords)?);
        heatmaps.push(SlideHeatmap {
            slide_id,
            grid: HeatmapGrid::new(w, h, values, DEFAULT_SUPERPIXEL_UM)?,
        });
    }

    let total: usize = counts.iter().sum();
    let fractions: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    Ok(CasePatches {
        slides,
        heatmaps,
        patch_prototypes,
        fractions,
    })
}

fn ceil_sqrt(n: usize) -> usize {
    let mut c = 1;
    while c * c < n {
        c += 1;
    }
    c
}

/// Distance between prototype centroids and the patch spread set the
/// cluster-recovery difficulty; the radius is fixed and the spread is the
/// config knob.
const PROTOTYPE_RADIUS: f64 = 3.0;

/// Centroids on random orthonormal directions (exactly orthonormal while
/// the prototype count does not exceed the dimension), scaled to a fixed
/// radius so distinct prototypes stay separated.
fn prototype_centroids(k: usize, d: usize, rng: &mut ChaCha12Rng) -> Vec<f64> {
    let mut prototypes = vec![0.0; k * d];
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for j in 0..k {
        let mut v: Vec<f64> = (0..d).map(|_| std_normal(rng)).collect();
        if j < d {
            for u in &basis {
                let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= dot * ui;
                }
            }
        }
        let mut norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        if norm < 1e-9 {
            v = vec![0.0; d];
            v[j % d] = 1.0;
            norm = 1.0;
        }
        for x in v.iter_mut() {
            *x /= norm;
        }
        if j < d {
            basis.push(v.clone());
        }
        for dim in 0..d {
            prototypes[j * d + dim] = PROTOTYPE_RADIUS * v[dim];
        }
    }
    prototypes
}

fn high_risk_prototype(betas: &[f64]) -> usize {
    let mut best = 0;
    for (j, &b) in betas.iter().enumerate() {
        if b > betas[best] {
            best = j;
        }
    }
    best
}

/// Generate a full synthetic cohort. Byte-identical for equal configs.
pub fn generate(config: &GeneratorConfig) -> Result<SyntheticCohort> {
    config.validate()?;
    let n = config.n_cases;
    let d = config.feature_dim;
    let k = config.n_prototypes;

    // prototype centroids
    let mut proto_rng = child_rng(config.seed, stream::GENERATE_PROTOTYPES, 0);
    let prototypes = prototype_centroids(k, d, &mut proto_rng);

    // covariates and patch content per case
    let mut covariates = Vec::with_capacity(n);
    let mut case_patches = Vec::with_capacity(n);
    let mut etas = Vec::with_capacity(n);
    let mut cov_terms = Vec::with_capacity(n);
    let cm = &config.covariates;
    for i in 0..n {
        let case_id = format!("case{i:05}");
        let mut cov_rng = child_rng(config.seed, stream::GENERATE_COVARIATES, i as u64);
        let age_years = cm.age_mean + cm.age_sd * std_normal(&mut cov_rng);
        let female = cov_rng.random::<f64>() < cm.female_prob;
        let grade = {
            let total: f64 = cm.grade_probs.iter().sum();
            let mut u = cov_rng.random::<f64>() * total;
            let mut g = 3u8;
            for (j, &p) in cm.grade_probs.iter().enumerate() {
                if u < p {
                    g = j as u8 + 1;
                    break;
                }
                u -= p;
            }
            g
        };
        let t4 = cov_rng.random::<f64>() < cm.t4_prob;
        let cov_term = cm.age_beta_per_decade * (age_years - cm.age_mean) / 10.0
            + cm.female_beta * if female { 1.0 } else { 0.0 }
            + match grade {
                2 => cm.grade_betas[0],
                3 => cm.grade_betas[1],
                _ => 0.0,
            }
            + cm.t4_beta * if t4 { 1.0 } else { 0.0 };
        covariates.push(CaseCovariates {
            age_years,
            female,
            grade,
            t4,
        });

        let patches = generate_case_patches(config, &prototypes, &case_id, i)?;
        let frac_term: f64 = patches
            .fractions
            .iter()
            .zip(&config.prototype_risk_betas)
            .map(|(f, b)| f * b)
            .sum();
        etas.push(frac_term + cov_term);
        cov_terms.push(cov_term);
        case_patches.push(patches);
    }

    // censoring calibration and outcomes
    let rates: Vec<f64> = etas
        .iter()
        .map(|e| config.baseline_hazard_per_month * libm::exp(*e))
        .collect();
    let admin = config.admin_censor_months as f64;
    let censor_hazard = calibrate_censoring(&rates, config.censor_rate, admin)?;

    let mut records = Vec::with_capacity(n);
    let mut bags = Vec::with_capacity(n);
    let mut heatmaps = Vec::with_capacity(n);
    let mut gt_cases = Vec::with_capacity(n);
    for (i, patches) in case_patches.into_iter().enumerate() {
        let case_id = format!("case{i:05}");
        let mut out_rng = child_rng(config.seed, stream::GENERATE_OUTCOME, i as u64);
        let u_event: f64 = out_rng.random();
        let event_time = -libm::log(1.0 - u_event) / rates[i];
        let u_censor: f64 = out_rng.random();
        let random_censor = if censor_hazard > 0.0 {
            -libm::log(1.0 - u_censor) / censor_hazard
        } else {
            f64::INFINITY
        };
        let censor_time = random_censor.min(admin);
        let event = event_time <= censor_time;
        let observed = event_time.min(censor_time);
        let months = (libm::ceil(observed) as u32).max(1);
        records.push(SurvivalRecord::new(case_id.clone(), months, event)?);
        bags.push(CaseBag::new(case_id.clone(), d, patches.slides)?);
        heatmaps.push(patches.heatmaps);
        gt_cases.push(CaseGroundTruth {
            case_id,
            eta: etas[i],
            covariate_term: cov_terms[i],
            prototype_fractions: patches.fractions,
            patch_prototypes: patches.patch_prototypes,
        });
    }

    // split assignment by shuffled contiguous blocks
    let mut split_rng = child_rng(config.seed, stream::GENERATE_SPLITS, 0);
    let mut order: Vec<usize> = (0..n).collect();
    use rand::seq::SliceRandom;
    order.shuffle(&mut split_rng);
    let total_frac: f64 = config.split_fractions.iter().sum();
    let mut splits = vec![Split::Train; n];
    let mut start = 0usize;
    for (si, &frac) in config.split_fractions.iter().enumerate() {
        let count = if si == 3 {
            n - start
        } else {
            libm::round(frac / total_frac * n as f64) as usize
        };
        let end = (start + count).min(n);
        for &case in &order[start..end] {
            splits[case] = Split::ALL[si];
        }
        start = end;
    }

    Ok(SyntheticCohort {
        records,
        splits,
        covariates,
        bags,
        heatmaps,
        ground_truth: GroundTruth {
            betas: config.prototype_risk_betas.clone(),
            high_risk_prototype: high_risk_prototype(&config.prototype_risk_betas),
            censor_hazard,
            cases: gt_cases,
        },
    })
}
