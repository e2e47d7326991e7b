//! Data loading, synthetic generation, experiment orchestration and theory probes.

pub mod config;
pub mod experiment;
pub mod probes;
pub mod synthetic;

use std::path::Path;

use crate::domain::{Dataset, GroupClass};
use crate::error::Result;
use crate::io::load_dataset;

pub use config::{AttackConfig, AttackPlan, BoostSection, DataConfig, DataSource, ExperimentConfig, MetricsConfig, ProbeConfig, SplitConfig};
pub use experiment::{load_data, run_experiment, split, ExperimentOutput, GroupResult, Manifest, ResultRecord, Splits, TrialResult, Variant};
pub use probes::{theory_probes, AccuracyInExpectation, ProbeReport, SampleSize, UniformConvergence};
pub use synthetic::{census_like_groups, synthesize, Cell, SyntheticSpec};

/// Reads a labeled CSV and resolves group definitions against its columns.
pub fn load_csv<S: AsRef<str>>(path: impl AsRef<Path>, label: &str, group_defs: &[S]) -> Result<(Dataset, GroupClass)> {
    let d = load_dataset(path, label)?;
    let groups = GroupClass::parse(group_defs, d.schema())?;
    Ok((d, groups))
}
