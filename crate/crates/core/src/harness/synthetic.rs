use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::{Column, Dataset, FeatureRow, Schema, Value};
use crate::error::{Error, Result};
use crate::rng;

/// One demographic cell: a token per group column, its population weight and
/// its positive-label rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub tokens: Vec<String>,
    pub weight: f64,
    pub positive_rate: f64,
}

/// Generator for a tabular sample with categorical group columns and numeric
/// nuisance features.
///
/// Each row draws a cell by weight, then `y ~ Bernoulli(positive_rate)`, then
/// every nuisance feature `x_j ~ N((2y − 1)·signal, 1)`. Equal-variance Gaussian
/// class conditionals make the log-odds linear in the features
/// (`logit P(y=1 | x, cell) = logit(rate) + 2·signal·Σ x_j`), so a linear model
/// has real signal while the cell effects are not additive across columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n: usize,
    pub label: String,
    pub group_columns: Vec<String>,
    pub cells: Vec<Cell>,
    pub nuisance_features: usize,
    pub signal: f64,
    pub seed: u64,
}

/// Race ratios 0.710 / 0.235 / 0.020 (rest "Other") and male ratio 0.507, taken from
/// the ACS Income task summary; positive rates are illustrative.
fn census_like_cells() -> Vec<Cell> {
    let races = [("White", 0.710), ("Black", 0.235), ("Asian", 0.020), ("Other", 0.035)];
    let sexes = [("Male", 0.507), ("Female", 0.493)];
    let rates = [[0.45, 0.30], [0.22, 0.16], [0.50, 0.38], [0.30, 0.22]];
    let mut cells = Vec::new();
    for (r, (race, wr)) in races.iter().enumerate() {
        for (s, (sex, ws)) in sexes.iter().enumerate() {
            cells.push(Cell {
                tokens: vec![race.to_string(), sex.to_string()],
                weight: wr * ws,
                positive_rate: rates[r][s],
            });
        }
    }
    cells
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n: 20_000,
            label: "y".into(),
            group_columns: vec!["race".into(), "sex".into()],
            cells: census_like_cells(),
            nuisance_features: 4,
            signal: 0.5,
            seed: 0,
        }
    }
}

/// Group definitions for the four largest race × sex cells of the default layout.
pub fn census_like_groups() -> Vec<String> {
    vec![
        "WM: race==White & sex==Male".into(),
        "WF: race==White & sex==Female".into(),
        "BM: race==Black & sex==Male".into(),
        "BF: race==Black & sex==Female".into(),
    ]
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("synthetic n must be positive".into()));
        }
        if self.cells.is_empty() {
            return Err(Error::Config("synthetic layout has no cells".into()));
        }
        let total: f64 = self.cells.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("cell weights sum to {total}, not 1")));
        }
        for c in &self.cells {
            if c.tokens.len() != self.group_columns.len() {
                return Err(Error::Config(format!(
                    "cell {:?} has {} tokens for {} group columns",
                    c.tokens,
                    c.tokens.len(),
                    self.group_columns.len()
                )));
            }
            if c.weight.is_nan() || c.weight < 0.0 {
                return Err(Error::Config(format!("cell {:?} has negative weight", c.tokens)));
            }
            if !(0.0..=1.0).contains(&c.positive_rate) {
                return Err(Error::Config(format!("cell {:?} has rate {} outside [0, 1]", c.tokens, c.positive_rate)));
            }
        }
        if !self.signal.is_finite() {
            return Err(Error::Config("signal must be finite".into()));
        }
        Ok(())
    }

    pub fn schema(&self) -> Result<Schema> {
        let mut columns: Vec<Column> = self
            .group_columns
            .iter()
            .enumerate()
            .map(|(j, name)| Column::categorical(name.clone(), self.cells.iter().map(|c| c.tokens[j].clone())))
            .collect();
        columns.extend((1..=self.nuisance_features).map(|j| Column::numeric(format!("x{j}"))));
        Schema::new(columns, self.label.clone())
    }
}

pub fn synthesize(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let schema = Arc::new(spec.schema()?);
    let cell_dist = WeightedIndex::new(spec.cells.iter().map(|c| c.weight))
        .map_err(|e| Error::Config(format!("cell weights: {e}")))?;
    let mut r = rng::stream(spec.seed, "synthetic");
    let mut rows = Vec::with_capacity(spec.n);
    let mut labels = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let cell = &spec.cells[cell_dist.sample(&mut r)];
        let y = u8::from(r.random::<f64>() < cell.positive_rate);
        let shift = if y == 1 { spec.signal } else { -spec.signal };
        let mut values: Vec<Value> = cell.tokens.iter().map(|t| Value::Cat(t.clone())).collect();
        for _ in 0..spec.nuisance_features {
            let z: f64 = StandardNormal.sample(&mut r);
            values.push(Value::Num(shift + z));
        }
        rows.push(FeatureRow::new(values));
        labels.push(y);
    }
    Dataset::new(schema, rows, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::GroupClass;

    #[test]
    fn default_weights_are_normalized() {
        SyntheticSpec::default().validate().unwrap();
    }

    #[test]
    fn zero_rates_give_zero_labels() {
        let mut spec = SyntheticSpec { n: 500, ..Default::default() };
        spec.cells.iter_mut().for_each(|c| c.positive_rate = 0.0);
        assert_eq!(synthesize(&spec).unwrap().positives(), 0);
    }

    #[test]
    fn balanced_cells_stay_within_three_sigma() {
        let spec = SyntheticSpec {
            n: 10_000,
            group_columns: vec!["g".into()],
            cells: vec![
                Cell { tokens: vec!["a".into()], weight: 0.5, positive_rate: 0.3 },
                Cell { tokens: vec!["b".into()], weight: 0.5, positive_rate: 0.6 },
            ],
            seed: 11,
            ..Default::default()
        };
        let d = synthesize(&spec).unwrap();
        let groups = GroupClass::parse(&["a: g==a"], d.schema()).unwrap();
        let count = groups.get("a").unwrap().member_indices(d.rows()).len() as f64;
        // sd = sqrt(10000 · 0.25) = 50
        assert!((count - 5000.0).abs() <= 150.0, "count {count}");
    }

    #[test]
    fn same_seed_same_data() {
        let spec = SyntheticSpec { n: 300, seed: 5, ..Default::default() };
        assert_eq!(synthesize(&spec).unwrap(), synthesize(&spec).unwrap());
        let other = SyntheticSpec { seed: 6, ..spec.clone() };
        assert_ne!(synthesize(&spec).unwrap(), synthesize(&other).unwrap());
    }

    #[test]
    fn invalid_layouts_rejected() {
        let mut spec = SyntheticSpec::default();
        spec.cells[0].weight += 0.1;
        assert!(spec.validate().is_err());
        let mut spec = SyntheticSpec::default();
        spec.cells[0].positive_rate = 1.2;
        assert!(spec.validate().is_err());
    }
}
