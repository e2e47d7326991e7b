use std::io::Write;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boost::{boost, BoostConfig};
use crate::domain::{Dataset, GroupClass, PatchedPredictor, Predictor};
use crate::error::{Error, Result};
use crate::harness::config::{DataSource, ExperimentConfig, SplitConfig};
use crate::harness::{load_csv, synthesize};
use crate::learners::{fit, LearnerSpec};
use crate::metrics::{
    default_gamma_grid, group_reports_from_predictions, ma_err_from_predictions, optimize_gamma_from_predictions,
    robustness_check_from_predictions, GroupReport, RobustnessCheck,
};
use crate::numeric::pairwise_sum_by;
use crate::rng;

/// Disjoint samples drawn for one trial.
#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
    pub aux: Dataset,
    pub postprocess: Dataset,
}

/// Shuffles row indices with the trial's stream and cuts them into the
/// configured fractions. Every split except train takes `round(fraction·n)` rows;
/// train takes the rest. Rows within a split keep file order.
pub fn split(d: &Dataset, cfg: &SplitConfig, trial: usize) -> Result<Splits> {
    let n = d.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut r = rng::stream(rng::derive_seed(cfg.seed, "split", trial as u64, 0), "split");
    order.shuffle(&mut r);
    let size = |f: f64| (f * n as f64).round() as usize;
    let sizes = [size(cfg.validation), size(cfg.test), size(cfg.aux), size(cfg.postprocess)];
    let taken: usize = sizes.iter().sum();
    if taken >= n {
        return Err(Error::Data(format!("{n} rows are too few for the configured splits")));
    }
    let mut parts = Vec::with_capacity(5);
    let mut start = 0;
    for len in std::iter::once(n - taken).chain(sizes) {
        let mut idx = order[start..start + len].to_vec();
        idx.sort_unstable();
        parts.push(d.subset(&idx));
        start += len;
    }
    let [train, validation, test, aux, postprocess]: [Dataset; 5] =
        parts.try_into().expect("five parts");
    for (name, part, frac) in [("train", &train, cfg.train), ("validation", &validation, cfg.validation), ("test", &test, cfg.test)] {
        if part.is_empty() && frac > 0.0 {
            return Err(Error::Data(format!("{name} split is empty with {n} rows")));
        }
    }
    Ok(Splits { train, validation, test, aux, postprocess })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Base learner output.
    Clf,
    /// Base learner output after multiaccuracy boosting.
    ClfPp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupResult {
    /// Test-split metrics.
    #[serde(flatten)]
    pub test: GroupReport<f64>,
    /// MA-err on the sample the variant was fitted (and, for `clf_pp`, boosted) on.
    pub train_ma_err: f64,
    /// This variant on corrupted data against the same variant on clean data.
    pub robustness: RobustnessCheck<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub learner: String,
    pub noise_level: f64,
    pub noise_index: usize,
    pub variant: Variant,
    pub gamma: f64,
    pub boost_iterations: usize,
    /// Rows in the (possibly corrupted) training sample.
    pub train_size: usize,
    pub train_l2: f64,
    pub test_l2: f64,
    pub groups: Vec<GroupResult>,
}

impl TrialResult {
    pub fn group(&self, name: &str) -> Option<&GroupResult> {
        self.groups.iter().find(|g| g.test.group == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub package: String,
    pub version: String,
    pub config: ExperimentConfig,
}

/// One line of the results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum ResultRecord {
    Manifest(Box<Manifest>),
    Trial(TrialResult),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub manifest: Manifest,
    pub results: Vec<TrialResult>,
}

impl ExperimentOutput {
    /// Manifest line first, then one line per result.
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        let mut line = |rec: &ResultRecord| -> Result<()> {
            serde_json::to_writer(&mut out, rec)?;
            out.write_all(b"\n").map_err(|e| Error::io("<results>", e))
        };
        line(&ResultRecord::Manifest(Box::new(self.manifest.clone())))?;
        for r in &self.results {
            line(&ResultRecord::Trial(r.clone()))?;
        }
        Ok(())
    }

    pub fn read_jsonl(text: &str) -> Result<Self> {
        let mut manifest = None;
        let mut results = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            match serde_json::from_str::<ResultRecord>(line)? {
                ResultRecord::Manifest(m) => manifest = Some(*m),
                ResultRecord::Trial(t) => results.push(t),
            }
        }
        let manifest = manifest.ok_or_else(|| Error::Data("results file has no manifest record".into()))?;
        Ok(ExperimentOutput { manifest, results })
    }
}

/// Loads or generates the dataset and resolves the group class.
pub fn load_data(cfg: &ExperimentConfig) -> Result<(Dataset, GroupClass)> {
    match &cfg.data.source {
        DataSource::Csv { path, label } => load_csv(path, label, &cfg.data.groups),
        DataSource::Synthetic(spec) => {
            let d = synthesize(spec)?;
            let groups = GroupClass::parse(&cfg.data.groups, d.schema())?;
            Ok((d, groups))
        }
    }
}

/// A fitted base model and its boosted version.
pub(crate) struct Fitted {
    pub base: Arc<dyn Predictor<f64>>,
    pub boosted: PatchedPredictor<f64>,
    pub iterations: usize,
}

pub(crate) fn fit_and_boost(spec: &LearnerSpec, train: &Dataset, pp_sample: &Dataset, groups: &GroupClass, cfg: &BoostConfig<f64>) -> Result<Fitted> {
    let base: Arc<dyn Predictor<f64>> = Arc::new(fit(spec, train)?);
    let (boosted, trace) = boost(Arc::clone(&base), pp_sample, groups, cfg)?;
    Ok(Fitted { base, boosted, iterations: trace.iterations })
}

fn l2(preds: &[f64], labels: &[u8]) -> f64 {
    pairwise_sum_by(preds.len(), &|i| {
        let r = f64::from(labels[i]) - preds[i];
        r * r
    }) / preds.len() as f64
}

struct VariantEval<'a> {
    clean_test: &'a [f64],
    preds_test: Vec<f64>,
    /// Sample the variant was fitted or boosted on, with its predictions there.
    sample: &'a Dataset,
    preds_train: Vec<f64>,
    gamma: f64,
    iterations: usize,
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    groups: &'a GroupClass,
    grid: Vec<f64>,
    boost_cfg: BoostConfig<f64>,
}

impl Context<'_> {
    #[allow(clippy::too_many_arguments)]
    fn results_for(
        &self,
        trial: usize,
        learner: &str,
        noise_index: usize,
        clean_train: &Dataset,
        corrupt_train: &Dataset,
        test: &Dataset,
        variants: [(Variant, VariantEval<'_>); 2],
    ) -> Result<Vec<TrialResult>> {
        let level = self.cfg.levels()[noise_index];
        let eps = self.boost_cfg.epsilon;
        let n = clean_train.len() as f64;
        let m = corrupt_train.len() as f64;
        let slack = (1.0 + m / n) * eps + 2.0 * self.cfg.metrics.epsilon_slack;
        variants
            .into_iter()
            .map(|(variant, ev)| {
                let reports = group_reports_from_predictions(&ev.preds_test, test, self.groups, &ev.gamma)?;
                let checks = robustness_check_from_predictions(
                    ev.clean_test,
                    &ev.preds_test,
                    clean_train,
                    corrupt_train,
                    test.rows(),
                    self.groups,
                    &slack,
                )?;
                let groups = reports
                    .into_iter()
                    .zip(checks)
                    .zip(self.groups.iter())
                    .map(|((test_report, robustness), g)| {
                        let mask = g.membership(ev.sample.rows());
                        let train_ma_err = ma_err_from_predictions(&ev.preds_train, ev.sample.labels(), &mask, ev.sample.len())?;
                        Ok(GroupResult { test: test_report, train_ma_err, robustness })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(TrialResult {
                    trial,
                    learner: learner.to_string(),
                    noise_level: level,
                    noise_index,
                    variant,
                    gamma: ev.gamma,
                    boost_iterations: ev.iterations,
                    train_size: corrupt_train.len(),
                    train_l2: l2(&ev.preds_train, ev.sample.labels()),
                    test_l2: l2(&ev.preds_test, test.labels()),
                    groups,
                })
            })
            .collect()
    }

    fn run_learner(&self, trial: usize, spec: &LearnerSpec, sp: &Splits) -> Result<Vec<TrialResult>> {
        let name = spec.name();
        let fresh = self.cfg.boost.fresh_split;
        let pp_sample = |train: &Dataset| if fresh { sp.postprocess.clone() } else { train.clone() };
        let clean = fit_and_boost(spec, &sp.train, &pp_sample(&sp.train), self.groups, &self.boost_cfg)?;
        let clean_base_test = clean.base.predict_rows(sp.test.rows())?;
        let clean_pp_test = clean.boosted.predict(sp.test.rows())?;
        let gamma_clf = optimize_gamma_from_predictions(&clean.base.predict_rows(sp.validation.rows())?, sp.validation.labels(), &self.grid)?;
        let gamma_pp = optimize_gamma_from_predictions(&clean.boosted.predict(sp.validation.rows())?, sp.validation.labels(), &self.grid)?;

        let levels = self.cfg.levels();
        let per_level: Vec<Vec<TrialResult>> = (0..levels.len())
            .into_par_iter()
            .map(|k| -> Result<Vec<TrialResult>> {
                let attack = match &self.cfg.attack {
                    Some(a) => a.plan.at_level(levels[k], self.cfg.attack_seed(trial, k))?,
                    None => None,
                };
                let (corrupt, fitted) = match &attack {
                    None => (sp.train.clone(), None),
                    Some(spec_k) => {
                        let corrupt = spec_k.apply(&sp.train, Some(&sp.aux), self.groups)?;
                        let f = fit_and_boost(spec, &corrupt, &pp_sample(&corrupt), self.groups, &self.boost_cfg)?;
                        (corrupt, Some(f))
                    }
                };
                let model = fitted.as_ref().unwrap_or(&clean);
                let boost_sample = pp_sample(&corrupt);
                let clf = VariantEval {
                    clean_test: &clean_base_test,
                    preds_test: match &fitted {
                        None => clean_base_test.clone(),
                        Some(f) => f.base.predict_rows(sp.test.rows())?,
                    },
                    sample: &corrupt,
                    preds_train: model.base.predict_rows(corrupt.rows())?,
                    gamma: gamma_clf,
                    iterations: 0,
                };
                let clf_pp = VariantEval {
                    clean_test: &clean_pp_test,
                    preds_test: match &fitted {
                        None => clean_pp_test.clone(),
                        Some(f) => f.boosted.predict(sp.test.rows())?,
                    },
                    sample: &boost_sample,
                    preds_train: model.boosted.predict(boost_sample.rows())?,
                    gamma: gamma_pp,
                    iterations: model.iterations,
                };
                self.results_for(trial, &name, k, &sp.train, &corrupt, &sp.test, [(Variant::Clf, clf), (Variant::ClfPp, clf_pp)])
            })
            .collect::<Result<_>>()
            .map_err(|e| e.context(format!("trial {trial}, learner {name}")))?;
        Ok(per_level.into_iter().flatten().collect())
    }
}

/// Runs every (trial, learner, noise level) cell and returns results sorted by
/// trial, learner order, noise index and variant.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let (data, groups) = load_data(cfg)?;
    if let Some(a) = &cfg.attack {
        for g in a.plan.groups() {
            groups.require(g).map_err(|e| e.context("attack configuration"))?;
        }
    }
    let boost_cfg = BoostConfig { epsilon: cfg.boost.epsilon, max_iterations: cfg.boost.max_iterations };
    let ctx = Context {
        cfg,
        groups: &groups,
        grid: cfg.metrics.gamma_grid.clone().unwrap_or_else(default_gamma_grid),
        boost_cfg,
    };
    let units: Vec<(usize, usize)> = (0..cfg.trials).flat_map(|t| (0..cfg.learners.len()).map(move |l| (t, l))).collect();
    let splits: Vec<Splits> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| split(&data, &cfg.splits, t))
        .collect::<Result<_>>()?;
    let mut results: Vec<(usize, usize, TrialResult)> = units
        .par_iter()
        .map(|&(t, l)| {
            ctx.run_learner(t, &cfg.learners[l], &splits[t])
                .map(|rs| rs.into_iter().map(|r| (t, l, r)).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    results.sort_by_key(|r| (r.0, r.1, r.2.noise_index, r.2.variant));
    Ok(ExperimentOutput {
        manifest: Manifest {
            package: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: cfg.clone(),
        },
        results: results.into_iter().map(|(_, _, r)| r).collect(),
    })
}
