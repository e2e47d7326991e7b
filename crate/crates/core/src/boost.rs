//! Multiaccuracy boosting on the empirical distribution.
//!
//! While some group `C` has `|(1/n) Σ (p(x_i) − y_i) 1[x_i ∈ C]| > ε`, shift every
//! prediction in `C` by `ε` against the sign of that residual and clip to `[0, 1]`.
//! Each such step lowers the empirical squared error by at least `ε²`, so the loop
//! stops after at most `1/ε²` steps.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, GroupClass, PatchedPredictor, Predictor};
use crate::error::{Error, Result};
use crate::numeric::{pairwise_sum_by, sign, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig<T = f64> {
    pub epsilon: T,
    /// Safety cap on iterations. Defaults to `⌈1/ε²⌉ + 1`, which the stopping bound
    /// guarantees is never reached.
    pub max_iterations: Option<usize>,
}

impl<T: Scalar> BoostConfig<T> {
    pub fn new(epsilon: T) -> Result<Self> {
        let cfg = BoostConfig { epsilon, max_iterations: None };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon <= T::zero() || self.epsilon > T::one() {
            return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1], got {:?}", self.epsilon)));
        }
        Ok(())
    }

    /// `⌈1/ε²⌉`, the most iterations the loop can take.
    pub fn iteration_bound(&self) -> usize {
        iteration_bound(&self.epsilon)
    }

    pub fn hard_cap(&self) -> usize {
        self.max_iterations.unwrap_or_else(|| self.iteration_bound() + 1)
    }
}

pub fn iteration_bound<T: Scalar>(eps: &T) -> usize {
    let e = eps.as_f64();
    (1.0 / (e * e)).ceil() as usize
}

/// The group chosen by an audit and its signed residual `(1/n) Σ (p − y) 1[C]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation<T> {
    pub group_index: usize,
    pub group: String,
    pub violation: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostStep<T = f64> {
    pub iteration: usize,
    pub group: String,
    pub violation: T,
    /// Sign of the violation; the patch subtracts `sign · ε`.
    pub sign: i8,
    pub loss_before: T,
    pub loss_after: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostTrace<T = f64> {
    pub steps: Vec<BoostStep<T>>,
    pub iterations: usize,
    pub initial_loss: T,
    pub final_loss: T,
}

impl<T: Scalar + Serialize> BoostTrace<T> {
    /// One JSON record per iteration.
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        for step in &self.steps {
            serde_json::to_writer(&mut out, step)?;
            out.write_all(b"\n").map_err(|e| Error::io("<trace>", e))?;
        }
        Ok(())
    }
}

fn label<T: Scalar>(y: u8) -> T {
    if y == 1 {
        T::one()
    } else {
        T::zero()
    }
}

fn residual_mean<T: Scalar>(preds: &[T], labels: &[u8], members: &[usize], n: &T) -> T {
    let sum = pairwise_sum_by(members.len(), &|k| {
        let i = members[k];
        preds[i].clone() - label::<T>(labels[i])
    });
    sum / n.clone()
}

/// Worst violating group over cached predictions; ties go to the earlier group.
fn audit_cached<T: Scalar>(preds: &[T], labels: &[u8], members: &[Vec<usize>], eps: &T) -> Option<(usize, T)> {
    let n = T::count(preds.len());
    let mut worst: Option<(usize, T)> = None;
    for (gi, idx) in members.iter().enumerate() {
        let v = residual_mean(preds, labels, idx, &n);
        let mag = v.abs();
        if mag > *eps && worst.as_ref().is_none_or(|(_, w)| mag > w.abs()) {
            worst = Some((gi, v));
        }
    }
    worst
}

fn l2_from_predictions<T: Scalar>(preds: &[T], labels: &[u8]) -> T {
    let sum = pairwise_sum_by(preds.len(), &|i| {
        let r = label::<T>(labels[i]) - preds[i].clone();
        r.clone() * r
    });
    sum / T::count(preds.len())
}

/// Finds the group with the largest residual magnitude above `eps`, if any.
pub fn audit<T: Scalar>(
    p: &(impl Predictor<T> + ?Sized),
    s: &Dataset,
    groups: &GroupClass,
    eps: &T,
) -> Result<Option<Violation<T>>> {
    if s.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let preds = p.predict_rows(s.rows())?;
    let members = groups.member_indices(s.rows());
    Ok(audit_cached(&preds, s.labels(), &members, eps).map(|(gi, v)| Violation {
        group_index: gi,
        group: groups.groups()[gi].name.clone(),
        violation: v,
    }))
}

/// Empirical squared error `(1/n) Σ (y_i − p(x_i))²`.
pub fn empirical_l2<T: Scalar>(p: &(impl Predictor<T> + ?Sized), s: &Dataset) -> Result<T> {
    if s.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let preds = p.predict_rows(s.rows())?;
    Ok(l2_from_predictions(&preds, s.labels()))
}

/// Post-processes `base` until it is empirically `(groups, ε)`-multiaccurate on `s`.
pub fn boost<T: Scalar>(
    base: Arc<dyn Predictor<T>>,
    s: &Dataset,
    groups: &GroupClass,
    cfg: &BoostConfig<T>,
) -> Result<(PatchedPredictor<T>, BoostTrace<T>)> {
    cfg.validate()?;
    if s.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut predictor = PatchedPredictor::new(base);
    let mut preds = predictor.base_predictions(s.rows())?;
    let labels = s.labels();
    let members = groups.member_indices(s.rows());
    let eps = cfg.epsilon.clone();
    let cap = cfg.hard_cap();

    let initial_loss = l2_from_predictions(&preds, labels);
    let mut loss = initial_loss.clone();
    let mut steps = Vec::new();

    while let Some((gi, violation)) = audit_cached(&preds, labels, &members, &eps) {
        if steps.len() >= cap {
            return Err(Error::Invariant(format!(
                "boosting exceeded {cap} iterations at epsilon {:?}",
                cfg.epsilon
            )));
        }
        let v_sign = sign(&violation);
        let delta = v_sign.clone() * eps.clone();
        for &i in &members[gi] {
            preds[i] = (preds[i].clone() - delta.clone()).clip01();
        }
        let group = &groups.groups()[gi];
        predictor.push(group.clone(), delta);
        let after = l2_from_predictions(&preds, labels);
        steps.push(BoostStep {
            iteration: steps.len(),
            group: group.name.clone(),
            violation,
            sign: if v_sign > T::zero() { 1 } else { -1 },
            loss_before: loss,
            loss_after: after.clone(),
        });
        loss = after;
    }

    let trace = BoostTrace { iterations: steps.len(), steps, initial_loss, final_loss: loss };
    Ok((predictor, trace))
}

/// Smallest `n` with `n ≥ ln(|P| (2|C|)^{1/ε² + 1} / δ) / (2ε²)` (natural log).
pub fn required_sample_size(family_size: u64, group_count: u64, eps: f64, delta: f64) -> Result<u64> {
    if family_size == 0 || group_count == 0 {
        return Err(Error::InvalidParameter("family size and group count must be positive".into()));
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {eps}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    let e2 = eps * eps;
    let log_term = (family_size as f64).ln() + (1.0 / e2 + 1.0) * (2.0 * group_count as f64).ln() - delta.ln();
    Ok((log_term / (2.0 * e2)).ceil().max(1.0) as u64)
}
