use serde::{Deserialize, Serialize};

use crate::boost::{required_sample_size, BoostConfig};
use crate::domain::{Dataset, GroupClass, Predictor};
use crate::error::Result;
use crate::harness::config::{DataSource, ExperimentConfig};
use crate::harness::experiment::{fit_and_boost, load_data, split, Variant};
use crate::harness::synthesize;
use crate::numeric::pairwise_sum_by;
use crate::rng::derive_seed;

/// Mean predictions after training on all-zero and all-one relabelings of the
/// training split. A learner that is accurate in expectation keeps both near 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyInExpectation {
    pub learner: String,
    pub variant: Variant,
    /// Mean of p₀ over test rows, p₀ trained on all-zero labels.
    pub mean_p0: f64,
    /// Mean of 1 − p₁ over test rows, p₁ trained on all-one labels.
    pub mean_one_minus_p1: f64,
    pub slack: f64,
    pub within_slack: bool,
}

/// Largest gap between a training-sample group expectation and the same
/// expectation on an independent reference sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformConvergence {
    pub epsilon: f64,
    /// Over every (predictor, group): |E_S[p·1C] − E_ref[p·1C]|.
    pub max_prediction_deviation: f64,
    pub worst_predictor: String,
    pub worst_group: String,
    /// Over every (trial, group): |E_S[y·1C] − E_ref[y·1C]|.
    pub max_label_deviation: f64,
    pub predictors: usize,
    pub reference: String,
    pub reference_size: usize,
    /// Informational only; a sampling fluctuation can exceed ε.
    pub within_epsilon: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSize {
    pub family_size: u64,
    pub group_count: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub required: u64,
    pub available: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub accuracy_in_expectation: Vec<AccuracyInExpectation>,
    pub uniform_convergence: UniformConvergence,
    pub sample_size: SampleSize,
}

fn mean(xs: &[f64]) -> f64 {
    pairwise_sum_by(xs.len(), &|i| xs[i]) / xs.len() as f64
}

/// `(1/n) Σ v_i 1[x_i ∈ C]` for every group.
fn group_means(values: &[f64], d: &Dataset, groups: &GroupClass) -> Vec<f64> {
    groups
        .iter()
        .map(|g| {
            let mask = g.membership(d.rows());
            pairwise_sum_by(values.len(), &|i| if mask[i] { values[i] } else { 0.0 }) / d.len() as f64
        })
        .collect()
}

fn labels_f64(d: &Dataset) -> Vec<f64> {
    d.labels().iter().map(|&y| f64::from(y)).collect()
}

pub fn theory_probes(cfg: &ExperimentConfig) -> Result<ProbeReport> {
    cfg.validate()?;
    let (data, groups) = load_data(cfg)?;
    let probe_boost = BoostConfig { epsilon: cfg.probes.epsilon, max_iterations: None };
    let first = split(&data, &cfg.splits, 0)?;

    let zeros = first.train.with_labels(vec![0; first.train.len()])?;
    let ones = first.train.with_labels(vec![1; first.train.len()])?;
    let mut aie = Vec::new();
    for spec in &cfg.learners {
        let f0 = fit_and_boost(spec, &zeros, &zeros, &groups, &probe_boost)?;
        let f1 = fit_and_boost(spec, &ones, &ones, &groups, &probe_boost)?;
        let rows = first.test.rows();
        let pairs = [
            (Variant::Clf, f0.base.predict_rows(rows)?, f1.base.predict_rows(rows)?),
            (Variant::ClfPp, f0.boosted.predict(rows)?, f1.boosted.predict(rows)?),
        ];
        for (variant, p0, p1) in pairs {
            let mean_p0 = mean(&p0);
            let mean_one_minus_p1 = mean(&p1.iter().map(|p| 1.0 - p).collect::<Vec<_>>());
            aie.push(AccuracyInExpectation {
                learner: spec.name(),
                variant,
                mean_p0,
                mean_one_minus_p1,
                slack: cfg.probes.epsilon,
                within_slack: mean_p0 <= cfg.probes.epsilon && mean_one_minus_p1 <= cfg.probes.epsilon,
            });
        }
    }

    let synthetic_reference = match &cfg.data.source {
        DataSource::Synthetic(spec) => {
            let mut fresh = spec.clone();
            fresh.n = cfg.probes.reference_size;
            fresh.seed = derive_seed(spec.seed, "reference", 0, 0);
            Some(synthesize(&fresh)?)
        }
        DataSource::Csv { .. } => None,
    };
    let boost_cfg = BoostConfig { epsilon: cfg.boost.epsilon, max_iterations: cfg.boost.max_iterations };
    let mut uc = UniformConvergence {
        epsilon: cfg.probes.epsilon,
        max_prediction_deviation: 0.0,
        worst_predictor: String::new(),
        worst_group: String::new(),
        max_label_deviation: 0.0,
        predictors: 0,
        reference: if synthetic_reference.is_some() { "fresh_synthetic" } else { "test_split" }.into(),
        reference_size: 0,
        within_epsilon: true,
    };
    for t in 0..cfg.trials {
        let sp = if t == 0 { first.clone() } else { split(&data, &cfg.splits, t)? };
        let reference = synthetic_reference.as_ref().unwrap_or(&sp.test);
        uc.reference_size = reference.len();
        let label_gap = group_means(&labels_f64(&sp.train), &sp.train, &groups)
            .into_iter()
            .zip(group_means(&labels_f64(reference), reference, &groups))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        uc.max_label_deviation = uc.max_label_deviation.max(label_gap);
        for spec in &cfg.learners {
            let pp_sample = if cfg.boost.fresh_split { &sp.postprocess } else { &sp.train };
            let f = fit_and_boost(spec, &sp.train, pp_sample, &groups, &boost_cfg)?;
            let candidates: [(&str, &Dataset, Vec<f64>, Vec<f64>); 2] = [
                ("clf", &sp.train, f.base.predict_rows(sp.train.rows())?, f.base.predict_rows(reference.rows())?),
                ("clf_pp", pp_sample, f.boosted.predict(pp_sample.rows())?, f.boosted.predict(reference.rows())?),
            ];
            for (variant, sample, on_sample, on_reference) in candidates {
                uc.predictors += 1;
                let emp = group_means(&on_sample, sample, &groups);
                let pop = group_means(&on_reference, reference, &groups);
                for ((a, b), g) in emp.iter().zip(&pop).zip(groups.iter()) {
                    let gap = (a - b).abs();
                    if gap > uc.max_prediction_deviation {
                        uc.max_prediction_deviation = gap;
                        uc.worst_predictor = format!("trial {t} {} {variant}", spec.name());
                        uc.worst_group = g.name.clone();
                    }
                }
            }
        }
    }
    uc.within_epsilon = uc.max_prediction_deviation <= uc.epsilon && uc.max_label_deviation <= uc.epsilon;

    let sample_size = SampleSize {
        family_size: cfg.probes.family_size,
        group_count: groups.len(),
        epsilon: cfg.probes.epsilon,
        delta: cfg.probes.delta,
        required: required_sample_size(cfg.probes.family_size, groups.len() as u64, cfg.probes.epsilon, cfg.probes.delta)?,
        available: first.train.len(),
    };
    Ok(ProbeReport { accuracy_in_expectation: aie, uniform_convergence: uc, sample_size })
}
