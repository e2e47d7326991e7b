use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attacks::{AttackSpec, DataAdditionSpec, DeletionSpec, LabelChangeSpec, Target};
use crate::error::{Error, Result};
use crate::harness::synthetic::SyntheticSpec;
use crate::learners::{LearnerKind, LearnerSpec};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Csv { path: PathBuf, label: String },
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    #[serde(flatten)]
    pub source: DataSource,
    /// Group definitions such as `"WF: race==White & sex==Female"`. A match-all
    /// group `ALL` is always added.
    #[serde(default)]
    pub groups: Vec<String>,
}

fn one_tenth() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub train: f64,
    #[serde(default = "one_tenth")]
    pub validation: f64,
    pub test: f64,
    #[serde(default)]
    pub aux: f64,
    /// Fresh sample for post-processing, used when `boost.fresh_split` is set.
    #[serde(default)]
    pub postprocess: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { train: 0.6, validation: 0.1, test: 0.2, aux: 0.1, postprocess: 0.0, seed: 0 }
    }
}

fn default_epsilon() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostSection {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Post-process on the `postprocess` split instead of the training sample.
    #[serde(default)]
    pub fresh_split: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
}

impl Default for BoostSection {
    fn default() -> Self {
        BoostSection { epsilon: default_epsilon(), fresh_split: false, max_iterations: None }
    }
}

fn default_slack() -> f64 {
    0.02
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    /// Thresholds searched on the validation split; `0, 0.01, …, 1` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_grid: Option<Vec<f64>>,
    /// Sampling allowance ε₂ for estimating population expectations from a finite
    /// split. Each robustness check allows `(1 + m/n)·ε + 2·epsilon_slack`.
    #[serde(default = "default_slack")]
    pub epsilon_slack: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig { gamma_grid: None, epsilon_slack: default_slack() }
    }
}

fn default_probe_epsilon() -> f64 {
    0.05
}

fn default_delta() -> f64 {
    0.05
}

fn default_family_size() -> u64 {
    1 << 20
}

fn default_reference_size() -> usize {
    50_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    #[serde(default = "default_probe_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Nominal size of the predictor family |P| for the sample-size formula.
    #[serde(default = "default_family_size")]
    pub family_size: u64,
    /// Size of the fresh synthetic sample for the uniform-convergence probe.
    /// CSV sources use the test split instead.
    #[serde(default = "default_reference_size")]
    pub reference_size: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            epsilon: default_probe_epsilon(),
            delta: default_delta(),
            family_size: default_family_size(),
            reference_size: default_reference_size(),
        }
    }
}

fn default_target() -> Target {
    Target::Zero
}

fn default_clusters() -> usize {
    10
}

fn default_cluster_threshold() -> usize {
    5
}

/// An attack family; the noise level fills in its strength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttackPlan {
    /// Level is the noise ratio σ.
    LabelChange {
        #[serde(default = "default_target")]
        target: Target,
        modify_group: String,
    },
    /// Level is the replication factor α; must be a whole number.
    DataAddition {
        modify_group: String,
        target_group: String,
        #[serde(default = "default_clusters")]
        num_clusters: usize,
        #[serde(default = "default_cluster_threshold")]
        cluster_threshold: usize,
        #[serde(default = "default_target")]
        target: Target,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cluster_columns: Option<Vec<String>>,
    },
    /// Level is the deleted fraction of the group.
    Deletion { group: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    #[serde(flatten)]
    pub plan: AttackPlan,
    pub levels: Vec<f64>,
}

impl AttackPlan {
    pub fn kind(&self) -> &'static str {
        match self {
            AttackPlan::LabelChange { .. } => "label_change",
            AttackPlan::DataAddition { .. } => "data_addition",
            AttackPlan::Deletion { .. } => "deletion",
        }
    }

    pub fn groups(&self) -> Vec<&str> {
        match self {
            AttackPlan::LabelChange { modify_group, .. } => vec![modify_group],
            AttackPlan::DataAddition { modify_group, target_group, .. } => vec![modify_group, target_group],
            AttackPlan::Deletion { group } => vec![group],
        }
    }

    fn check_level(&self, level: f64) -> Result<()> {
        let ok = match self {
            AttackPlan::DataAddition { .. } => level >= 0.0 && level.fract() == 0.0,
            _ => (0.0..=1.0).contains(&level),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("noise level {level} is invalid for a {} attack", self.kind())))
        }
    }

    /// The concrete attack at `level`, or `None` at level 0 (no corruption).
    pub fn at_level(&self, level: f64, seed: u64) -> Result<Option<AttackSpec>> {
        self.check_level(level)?;
        if level == 0.0 {
            return Ok(None);
        }
        Ok(Some(match self {
            AttackPlan::LabelChange { target, modify_group } => AttackSpec::LabelChange(LabelChangeSpec {
                target: *target,
                modify_group: modify_group.clone(),
                noise_ratio: level,
                seed,
            }),
            AttackPlan::DataAddition { modify_group, target_group, num_clusters, cluster_threshold, target, cluster_columns } => {
                AttackSpec::DataAddition(DataAdditionSpec {
                    modify_group: modify_group.clone(),
                    target_group: target_group.clone(),
                    noise_factor: level as usize,
                    num_clusters: *num_clusters,
                    cluster_threshold: *cluster_threshold,
                    target: *target,
                    cluster_columns: cluster_columns.clone(),
                })
            }
            AttackPlan::Deletion { group } => {
                AttackSpec::Deletion(DeletionSpec { group: group.clone(), fraction: level, seed })
            }
        }))
    }
}

fn one() -> usize {
    1
}

/// Full description of an experiment run, read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "one")]
    pub trials: usize,
    pub data: DataConfig,
    #[serde(default)]
    pub splits: SplitConfig,
    pub learners: Vec<LearnerSpec>,
    #[serde(default)]
    pub boost: BoostSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackConfig>,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub probes: ProbeConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it are taken relative to the file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| e.context(format!("config {}", path.display())))?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let DataSource::Csv { path, .. } = &mut self.data.source {
            fix(path);
        }
        for l in &mut self.learners {
            if let LearnerKind::ExternalPredictions { train_predictions, eval_predictions, eval_data } = &mut l.kind {
                fix(train_predictions);
                eval_predictions.iter_mut().for_each(fix);
                eval_data.iter_mut().for_each(fix);
            }
        }
        if let Some(out) = &mut self.output {
            fix(out);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.splits;
        let parts = [s.train, s.validation, s.test, s.aux, s.postprocess];
        if parts.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::Config("split fractions must lie in [0, 1]".into()));
        }
        let total: f64 = parts.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions sum to {total}, not 1")));
        }
        if s.train == 0.0 || s.validation == 0.0 || s.test == 0.0 {
            return Err(Error::Config("train, validation and test splits must be non-empty".into()));
        }
        if self.boost.fresh_split && s.postprocess == 0.0 {
            return Err(Error::Config("fresh_split needs a postprocess split fraction > 0".into()));
        }
        if !(self.boost.epsilon > 0.0 && self.boost.epsilon <= 1.0) {
            return Err(Error::Config(format!("boost epsilon must lie in (0, 1], got {}", self.boost.epsilon)));
        }
        if !(self.probes.epsilon > 0.0 && self.probes.epsilon <= 1.0) {
            return Err(Error::Config("probe epsilon must lie in (0, 1]".into()));
        }
        if !(self.probes.delta > 0.0 && self.probes.delta < 1.0) {
            return Err(Error::Config("probe delta must lie in (0, 1)".into()));
        }
        if self.metrics.epsilon_slack < 0.0 {
            return Err(Error::Config("epsilon_slack must be non-negative".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.learners.is_empty() {
            return Err(Error::Config("at least one learner is required".into()));
        }
        let mut names: Vec<String> = self.learners.iter().map(LearnerSpec::name).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("learner names must be unique; set `name` to tell them apart".into()));
        }
        if let Some(attack) = &self.attack {
            if attack.levels.is_empty() {
                return Err(Error::Config("attack needs at least one noise level".into()));
            }
            for &level in &attack.levels {
                attack.plan.check_level(level)?;
            }
            if matches!(attack.plan, AttackPlan::DataAddition { .. }) && s.aux == 0.0 {
                return Err(Error::Config("data addition needs an aux split fraction > 0".into()));
            }
        }
        if let DataSource::Synthetic(spec) = &self.data.source {
            spec.validate()?;
        }
        Ok(())
    }

    /// Noise levels to sweep; a single clean level when no attack is configured.
    pub fn levels(&self) -> Vec<f64> {
        self.attack.as_ref().map_or_else(|| vec![0.0], |a| a.levels.clone())
    }

    pub fn attack_seed(&self, trial: usize, noise_index: usize) -> u64 {
        let kind = self.attack.as_ref().map_or("none", |a| a.plan.kind());
        derive_seed(self.splits.seed, kind, trial as u64, noise_index as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
trials = 2

[data]
source = "synthetic"
n = 500
seed = 3
groups = ["WM: race==White & sex==Male", "WF: race==White & sex==Female"]

[splits]
train = 0.6
validation = 0.1
test = 0.2
aux = 0.1
seed = 9

[[learners]]
kind = "logistic_regression"
learning_rate = 1

[[learners]]
kind = "knn"
k = 7

[boost]
epsilon = 0.05

[attack]
kind = "label_change"
target = "zero"
modify_group = "WM"
levels = [0, 0.5, 1]
"#;

    #[test]
    fn parses_example() {
        let cfg = ExperimentConfig::from_toml(EXAMPLE).unwrap();
        assert_eq!(cfg.trials, 2);
        assert_eq!(cfg.learners.len(), 2);
        assert_eq!(cfg.levels(), vec![0.0, 0.5, 1.0]);
        match &cfg.data.source {
            DataSource::Synthetic(spec) => {
                assert_eq!(spec.n, 500);
                assert_eq!(spec.nuisance_features, SyntheticSpec::default().nuisance_features);
            }
            other => panic!("unexpected source {other:?}"),
        }
        let again = ExperimentConfig::from_toml(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn rejects_bad_splits_and_levels() {
        let bad = EXAMPLE.replace("test = 0.2", "test = 0.3");
        assert!(matches!(ExperimentConfig::from_toml(&bad), Err(Error::Config(_))));
        let bad = EXAMPLE.replace("levels = [0, 0.5, 1]", "levels = [1.5]");
        assert!(matches!(ExperimentConfig::from_toml(&bad), Err(Error::Config(_))));
        let bad = EXAMPLE.replace("[[learners]]\nkind = \"knn\"\nk = 7\n", "[[learners]]\nkind = \"logistic_regression\"\n");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn data_addition_levels_are_whole() {
        let plan = AttackPlan::DataAddition {
            modify_group: "a".into(),
            target_group: "b".into(),
            num_clusters: 3,
            cluster_threshold: 1,
            target: Target::Zero,
            cluster_columns: None,
        };
        assert!(plan.at_level(2.5, 0).is_err());
        assert!(plan.at_level(0.0, 0).unwrap().is_none());
        match plan.at_level(3.0, 0).unwrap() {
            Some(AttackSpec::DataAddition(spec)) => assert_eq!(spec.noise_factor, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
