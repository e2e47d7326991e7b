//! Deterministic base learners. Each fitted model is a [`Predictor`] for any scalar type.

pub mod encoding;
pub mod external;
pub mod knn;
pub mod logistic;
pub mod tree;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{Column, Constant, Dataset, FeatureRow, GroupClass, Predictor, Schema, Value};
use crate::error::{Error, Result};
use crate::metrics::{robustness_check, RobustnessCheck};
use crate::numeric::Scalar;

pub use encoding::FeatureEncoder;
pub use external::ExternalPredictions;
pub use knn::KnnModel;
pub use logistic::{LogisticModel, LogisticParams};
pub use tree::{TreeModel, TreeParams};

fn default_k() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerKind {
    ConstantMean,
    ErmTwoConstant,
    LogisticRegression(LogisticParams),
    Knn {
        #[serde(default = "default_k")]
        k: usize,
    },
    DecisionTree(TreeParams),
    /// Predictions computed outside this crate, row-aligned with the training data
    /// and, optionally, with a second evaluation CSV.
    ExternalPredictions {
        train_predictions: PathBuf,
        #[serde(default)]
        eval_predictions: Option<PathBuf>,
        #[serde(default)]
        eval_data: Option<PathBuf>,
    },
}

impl LearnerKind {
    pub fn tag(&self) -> &'static str {
        match self {
            LearnerKind::ConstantMean => "constant_mean",
            LearnerKind::ErmTwoConstant => "erm_two_constant",
            LearnerKind::LogisticRegression(_) => "logistic_regression",
            LearnerKind::Knn { .. } => "knn",
            LearnerKind::DecisionTree(_) => "decision_tree",
            LearnerKind::ExternalPredictions { .. } => "external_predictions",
        }
    }
}

/// Hyperparameters are fixed here, before any data is seen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    #[serde(flatten)]
    pub kind: LearnerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Reserved for stochastic learners; every built-in learner ignores it.
    #[serde(default)]
    pub seed: u64,
}

impl LearnerSpec {
    pub fn new(kind: LearnerKind) -> Self {
        LearnerSpec { kind, name: None, seed: 0 }
    }

    pub fn name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.kind.tag().to_string())
    }
}

impl From<LearnerKind> for LearnerSpec {
    fn from(kind: LearnerKind) -> Self {
        LearnerSpec::new(kind)
    }
}

/// A fitted base predictor.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    ConstantMean { positives: usize, n: usize },
    /// `true` selects the all-ones predictor.
    TwoConstant { ones: bool },
    Logistic(LogisticModel),
    Knn(KnnModel),
    Tree(TreeModel),
    External(ExternalPredictions),
}

fn ratio<T: Scalar>(num: usize, den: usize) -> T {
    T::count(num) / T::count(den)
}

impl<T: Scalar> Predictor<T> for Model {
    fn predict_row(&self, row: &FeatureRow) -> Result<T> {
        Ok(match self {
            Model::ConstantMean { positives, n } => ratio(*positives, *n),
            Model::TwoConstant { ones } => {
                if *ones {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Model::Logistic(m) => T::lit(m.probability(row)),
            Model::Knn(m) => {
                let (p, k) = m.vote(row);
                ratio(p, k)
            }
            Model::Tree(m) => {
                let (p, n) = m.leaf(row);
                ratio(p, n)
            }
            Model::External(m) => T::lit(m.lookup(row)?),
        })
    }

    fn predict_rows(&self, rows: &[FeatureRow]) -> Result<Vec<T>> {
        match self {
            Model::Knn(m) => Ok(m.votes(rows).into_iter().map(|(p, k)| ratio(p, k)).collect()),
            _ => rows.iter().map(|r| self.predict_row(r)).collect(),
        }
    }
}

/// Runs the learning algorithm on `s`.
pub fn fit(spec: &LearnerSpec, s: &Dataset) -> Result<Model> {
    if s.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(match &spec.kind {
        LearnerKind::ConstantMean => Model::ConstantMean { positives: s.positives(), n: s.len() },
        LearnerKind::ErmTwoConstant => {
            // squared loss of p≡0 is the positive count, of p≡1 the negative count
            let pos = s.positives();
            Model::TwoConstant { ones: s.len() - pos < pos }
        }
        LearnerKind::LogisticRegression(params) => Model::Logistic(LogisticModel::fit(s, params)),
        LearnerKind::Knn { k } => {
            if *k == 0 {
                return Err(Error::InvalidParameter("knn needs k >= 1".into()));
            }
            Model::Knn(KnnModel::fit(s, *k))
        }
        LearnerKind::DecisionTree(params) => Model::Tree(TreeModel::fit(s, params)),
        LearnerKind::ExternalPredictions { train_predictions, eval_predictions, eval_data } => {
            let eval = match (eval_predictions, eval_data) {
                (Some(p), Some(d)) => Some((p.clone(), crate::io::load_dataset_with_schema(d, &s.schema_arc())?)),
                (None, None) => None,
                _ => {
                    return Err(Error::Config(
                        "eval_predictions and eval_data must be given together".into(),
                    ))
                }
            };
            Model::External(ExternalPredictions::load(
                train_predictions,
                s,
                eval.as_ref().map(|(p, d)| (p.as_path(), d)),
            )?)
        }
    })
}

/// Outcome of the majority-label ERM flip scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErmFlipDemo {
    /// Constant output before corruption (0 or 1).
    pub before: f64,
    pub after: f64,
    pub check: RobustnessCheck<f64>,
}

/// Half-ones/half-zeros sample; flip `flips` zero labels to one, refit the
/// two-constant ERM, and check robustness on the match-all group.
pub fn erm_flip_demo(n: usize, flips: usize, eps: f64) -> Result<ErmFlipDemo> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("n must be even and positive, got {n}")));
    }
    if flips > n / 2 {
        return Err(Error::InvalidParameter(format!("cannot flip {flips} of {} zero labels", n / 2)));
    }
    let schema = Arc::new(Schema::new(vec![Column::numeric("x")], "y")?);
    let rows: Vec<FeatureRow> = (0..n).map(|i| FeatureRow::new(vec![Value::Num(i as f64)])).collect();
    let labels: Vec<u8> = (0..n).map(|i| u8::from(i < n / 2)).collect();
    let clean = Dataset::new(Arc::clone(&schema), rows, labels.clone())?;
    let mut flipped = labels;
    for y in flipped.iter_mut().skip(n / 2).take(flips) {
        *y = 1;
    }
    let corrupt = clean.with_labels(flipped)?;

    let spec = LearnerSpec::new(LearnerKind::ErmTwoConstant);
    let before = fit(&spec, &clean)?;
    let after = fit(&spec, &corrupt)?;
    let groups = GroupClass::new(Vec::new())?;
    let checks = robustness_check::<f64>(&before, &after, &clean, &corrupt, clean.rows(), &groups, &eps)?;
    let value = |m: &Model| -> Result<f64> { Predictor::<f64>::predict_row(m, &clean.rows()[0]) };
    Ok(ErmFlipDemo {
        before: value(&before)?,
        after: value(&after)?,
        check: checks.into_iter().next().expect("ALL group"),
    })
}

/// Convenience wrapper producing a constant base predictor.
pub fn constant<T: Scalar>(value: T) -> Constant<T> {
    Constant(value)
}
