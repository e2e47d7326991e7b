mod common;

use std::sync::Arc;

use multigroup::attacks::{deletion, kmeans, label_change, DeletionSpec, LabelChangeSpec, Target};
use multigroup::boost::{boost, BoostConfig};
use multigroup::domain::{multiset_symmetric_difference, Dataset, FeatureRow, FnPredictor, GroupClass, GroupPredicate, Predictor};
use multigroup::metrics::{ma_err, robustness_check};
use multigroup::rng::stream;
use num_rational::Ratio;
use num_traits::Signed;
use proptest::prelude::*;
use rand::Rng as _;

type Q = Ratio<i64>;

fn resample(d: &Dataset, seed: u64) -> Dataset {
    let mut rng = stream(seed, "resample");
    let mut rows: Vec<FeatureRow> = d.rows().iter().filter(|_| rng.random_bool(0.7)).cloned().collect();
    let extra = rng.random_range(0..10);
    rows.extend(common::random_rows(&mut rng, extra));
    Dataset::new(d.schema_arc(), rows.clone(), vec![0; rows.len()]).unwrap()
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn boosted_predictions_stay_in_unit_interval(seed in any::<u64>(), e in 0usize..3) {
        let inst = common::instance(seed, 500, 12);
        let eps = [0.05, 0.1, 0.3][e];
        let (patched, trace) = boost(Arc::clone(&inst.base), &inst.data, &inst.groups, &BoostConfig::new(eps).unwrap()).unwrap();
        for p in patched.predict(inst.data.rows()).unwrap() {
            prop_assert!((0.0..=1.0).contains(&p));
        }
        prop_assert_eq!(trace.iterations, patched.patches().len());
    }

    #[test]
    fn exact_boost_meets_every_bound(seed in any::<u64>(), inv_eps in 2i64..9) {
        let inst = common::instance(seed, 40, 6);
        let eps = Q::new(1, inv_eps);
        let base = FnPredictor(|r: &FeatureRow| Q::new((r.values[3].as_num().unwrap() * 20.0).round() as i64, 20));
        let (patched, trace) = boost(Arc::new(base), &inst.data, &inst.groups, &BoostConfig::new(eps).unwrap()).unwrap();
        for g in inst.groups.iter() {
            prop_assert!(ma_err::<Q>(&patched, &inst.data, g).unwrap().abs() <= eps);
        }
        prop_assert!(trace.iterations <= (inv_eps * inv_eps) as usize);
        for s in &trace.steps {
            prop_assert!(s.loss_before - s.loss_after >= eps * eps);
        }
    }

    #[test]
    fn single_precision_boost_converges(seed in any::<u64>()) {
        let inst = common::instance(seed, 300, 8);
        let base = FnPredictor(|r: &FeatureRow| r.values[3].as_num().unwrap() as f32);
        let (patched, _) = boost(Arc::new(base), &inst.data, &inst.groups, &BoostConfig::new(0.1_f32).unwrap()).unwrap();
        for g in inst.groups.iter() {
            prop_assert!(ma_err::<f32>(&patched, &inst.data, g).unwrap().abs() <= 0.1 + 1e-5);
        }
    }

    #[test]
    fn symmetric_difference_is_a_metric(seed in any::<u64>()) {
        let inst = common::instance(seed, 150, 6);
        let (s, s2, s3) = (&inst.data, resample(&inst.data, seed), resample(&inst.data, seed ^ 1));
        for g in inst.groups.iter() {
            let ab = multiset_symmetric_difference(s, &s2, g).unwrap();
            prop_assert_eq!(ab, multiset_symmetric_difference(&s2, s, g).unwrap());
            prop_assert_eq!(multiset_symmetric_difference(s, s, g).unwrap(), 0);
            let bc = multiset_symmetric_difference(&s2, &s3, g).unwrap();
            let ac = multiset_symmetric_difference(s, &s3, g).unwrap();
            prop_assert!(ac <= ab + bc);
        }
    }

    #[test]
    fn ma_err_is_linear_in_the_predictor(seed in any::<u64>(), lambda in 0.0f64..=1.0) {
        let mut rng = stream(seed, "second");
        let inst = common::instance(seed, 300, 8);
        let rates = common::random_rates(&mut rng);
        let other = common::random_predictor(&mut rng, &rates);
        let (p, q) = (Arc::clone(&inst.base), Arc::clone(&other));
        let mix = FnPredictor(move |r: &FeatureRow| {
            lambda * p.predict_row(r).unwrap() + (1.0 - lambda) * q.predict_row(r).unwrap()
        });
        for g in inst.groups.iter() {
            let lhs = ma_err::<f64>(&mix, &inst.data, g).unwrap();
            let rhs = lambda * ma_err::<f64>(&*inst.base, &inst.data, g).unwrap()
                + (1.0 - lambda) * ma_err::<f64>(&*other, &inst.data, g).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12);
        }
    }

    #[test]
    fn uncorrupted_sample_has_zero_gap(seed in any::<u64>()) {
        let inst = common::instance(seed, 200, 8);
        let d = &inst.data;
        for c in robustness_check::<f64>(&*inst.base, &*inst.base, d, d, d.rows(), &inst.groups, &0.0).unwrap() {
            prop_assert_eq!(c.lhs, 0.0);
            prop_assert_eq!(c.label_term, 0.0);
            prop_assert_eq!(c.sym_diff_term, 0.0);
            prop_assert!(c.satisfied);
        }
    }

    #[test]
    fn label_change_touches_only_target_rows(seed in any::<u64>(), ratio in 0.0f64..=1.0) {
        let inst = common::instance(seed, 300, 4);
        let groups = GroupClass::new(vec![GroupPredicate::parse("A0: a==a0", &common::schema()).unwrap()]).unwrap();
        let spec = LabelChangeSpec { target: Target::Zero, modify_group: "A0".into(), noise_ratio: ratio, seed };
        let out = label_change(&inst.data, &spec, &groups).unwrap();
        prop_assert_eq!(out.rows(), inst.data.rows());
        let g = groups.require("A0").unwrap();
        for ((row, &before), &after) in inst.data.rows().iter().zip(inst.data.labels()).zip(out.labels()) {
            if before != after {
                prop_assert!(g.contains(row) && before == 0 && after == 1);
            }
        }
    }

    #[test]
    fn deletion_keeps_an_ordered_subsequence(seed in any::<u64>(), fraction in 0.0f64..=1.0) {
        let inst = common::instance(seed, 300, 4);
        let groups = GroupClass::new(vec![GroupPredicate::parse("C0: c==c0", &common::schema()).unwrap()]).unwrap();
        let g = groups.require("C0").unwrap();
        let members = g.member_indices(inst.data.rows()).len();
        let out = deletion(&inst.data, &DeletionSpec { group: "C0".into(), fraction, seed }, &groups).unwrap();
        prop_assert_eq!(out.len(), inst.data.len() - (fraction * members as f64).floor() as usize);
        let mut it = inst.data.iter();
        for (row, y) in out.iter() {
            prop_assert!(it.any(|(r, z)| r == row && z == y));
        }
    }

    #[test]
    fn kmeans_reaches_a_lloyd_fixed_point(points in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 3..80), k in 1usize..6) {
        let k = k.min(points.len());
        let km = kmeans(&points, k).unwrap();
        prop_assume!(km.iterations < 100);
        for (p, &a) in points.iter().zip(&km.assignments) {
            let own = sq(p, &km.centers[a]);
            prop_assert!(km.centers.iter().all(|c| own <= sq(p, c)));
        }
        for (c, center) in km.centers.iter().enumerate() {
            let members: Vec<&Vec<f64>> = points.iter().zip(&km.assignments).filter(|(_, &a)| a == c).map(|(p, _)| p).collect();
            if !members.is_empty() {
                for dim in 0..2 {
                    let mean = members.iter().map(|p| p[dim]).sum::<f64>() / members.len() as f64;
                    prop_assert!((mean - center[dim]).abs() <= 1e-9);
                }
            }
        }
    }
}
