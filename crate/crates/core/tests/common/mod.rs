//! Random instances shared by the property and acceptance tests.
#![allow(dead_code)]

use std::sync::Arc;

use multigroup::domain::{
    Atom, Column, Comparator, Dataset, FeatureRow, FnPredictor, GroupClass, GroupPredicate, Predictor, Schema, Value,
};
use multigroup::rng::{stream, Rng};
use rand::Rng as _;

pub const A: [&str; 4] = ["a0", "a1", "a2", "a3"];
pub const B: [&str; 3] = ["b0", "b1", "b2"];
pub const C: [&str; 2] = ["c0", "c1"];

pub fn schema() -> Arc<Schema> {
    Arc::new(
        Schema::new(
            vec![
                Column::categorical("a", A),
                Column::categorical("b", B),
                Column::categorical("c", C),
                Column::numeric("u"),
            ],
            "y",
        )
        .unwrap(),
    )
}

pub struct Instance {
    pub data: Dataset,
    pub groups: GroupClass,
    pub base: Arc<dyn Predictor<f64>>,
}

fn cat(v: &Value) -> &str {
    v.as_cat().unwrap()
}

fn cell(row: &FeatureRow) -> usize {
    let a = A.iter().position(|t| *t == cat(&row.values[0])).unwrap();
    let b = B.iter().position(|t| *t == cat(&row.values[1])).unwrap();
    a * B.len() + b
}

/// Rows drawn from a small grid so duplicates occur; `u` takes 20 levels.
pub fn random_rows(rng: &mut Rng, n: usize) -> Vec<FeatureRow> {
    (0..n)
        .map(|_| {
            FeatureRow::new(vec![
                Value::Cat(A[rng.random_range(0..A.len())].into()),
                Value::Cat(B[rng.random_range(0..B.len())].into()),
                Value::Cat(C[rng.random_range(0..C.len())].into()),
                Value::Num(f64::from(rng.random_range(0..20u32)) / 20.0),
            ])
        })
        .collect()
}

pub fn random_group(rng: &mut Rng, schema: &Schema, name: String) -> GroupPredicate {
    let clauses = rng.random_range(1..=2);
    let mut atoms = Vec::new();
    for _ in 0..clauses {
        let atom = match rng.random_range(0..4) {
            0 => Atom::new(schema, "a", Comparator::Eq, A[rng.random_range(0..A.len())]),
            1 => Atom::new(schema, "b", Comparator::Ne, B[rng.random_range(0..B.len())]),
            2 => Atom::new(schema, "c", Comparator::Eq, C[rng.random_range(0..C.len())]),
            _ => {
                let t = format!("{}", f64::from(rng.random_range(1..20u32)) / 20.0);
                let op = if rng.random_bool(0.5) { Comparator::Le } else { Comparator::Gt };
                Atom::new(schema, "u", op, &t)
            }
        };
        atoms.push(atom.unwrap());
    }
    GroupPredicate::new(name, atoms)
}

pub fn random_groups(rng: &mut Rng, schema: &Schema, max_groups: usize) -> GroupClass {
    let k = rng.random_range(1..=max_groups);
    GroupClass::new((0..k).map(|i| random_group(rng, schema, format!("g{i}"))).collect()).unwrap()
}

/// Per-cell positive rates.
pub fn random_rates(rng: &mut Rng) -> Vec<f64> {
    (0..A.len() * B.len()).map(|_| rng.random::<f64>()).collect()
}

/// A base predictor drawn from a few families: a constant (often 0 or 1), the
/// numeric column, a random per-cell table, or the inverted label rates.
pub fn random_predictor(rng: &mut Rng, rates: &[f64]) -> Arc<dyn Predictor<f64>> {
    let table: Vec<f64> = (0..A.len() * B.len()).map(|_| rng.random::<f64>()).collect();
    let inverted: Vec<f64> = rates.iter().map(|q| 1.0 - q).collect();
    match rng.random_range(0..5) {
        0 => {
            let c: f64 = match rng.random_range(0..3) {
                0 => 0.0,
                1 => 1.0,
                _ => rng.random(),
            };
            Arc::new(FnPredictor(move |_: &FeatureRow| c))
        }
        1 => Arc::new(FnPredictor(|r: &FeatureRow| r.values[3].as_num().unwrap())),
        2 => Arc::new(FnPredictor(move |r: &FeatureRow| table[cell(r)])),
        3 => Arc::new(FnPredictor(move |r: &FeatureRow| inverted[cell(r)])),
        _ => Arc::new(FnPredictor(move |r: &FeatureRow| {
            (0.5 * table[cell(r)] + 0.5 * r.values[3].as_num().unwrap()).clamp(0.0, 1.0)
        })),
    }
}

/// Labels ~ Bernoulli of the cell rate shifted by `u`.
pub fn random_labels(rng: &mut Rng, rows: &[FeatureRow], rates: &[f64]) -> Vec<u8> {
    rows.iter()
        .map(|r| {
            let q = (0.8 * rates[cell(r)] + 0.2 * r.values[3].as_num().unwrap()).clamp(0.0, 1.0);
            u8::from(rng.random_bool(q))
        })
        .collect()
}

pub fn instance(seed: u64, max_n: usize, max_groups: usize) -> Instance {
    let mut rng = stream(seed, "fuzz");
    let schema = schema();
    let n = rng.random_range(1..=max_n);
    let rows = random_rows(&mut rng, n);
    let rates = random_rates(&mut rng);
    let labels = random_labels(&mut rng, &rows, &rates);
    let groups = random_groups(&mut rng, &schema, max_groups);
    let base = random_predictor(&mut rng, &rates);
    Instance { data: Dataset::new(schema, rows, labels).unwrap(), groups, base }
}
