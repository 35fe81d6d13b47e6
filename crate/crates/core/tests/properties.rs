mod common;

use std::collections::HashSet;

use common::*;
use permreg::boost::{
    fit_auto, fit_auto_traced, generate_children, gradient_score, residuals,
    search_best_constraint, search_best_constraint_excluding, select_top_l, upper_bound, Residuals,
};
use permreg::data::{
    generate_planted, parse_csv, split, to_csv, PlantedSpec, PlantedTerm, SplitSpec,
};
use permreg::featurize::{feature_matrix, fulfills, support_vector};
use permreg::metrics::{mae, mse, r2};
use permreg::{Constraint, Dataset};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn arb_perm(max_n: usize) -> impl Strategy<Value = Vec<u32>> {
    (2..=max_n).prop_flat_map(|n| Just((1..=n as u32).collect::<Vec<_>>()).prop_shuffle())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn sorted_permutation_is_identity(items in arb_perm(9)) {
        let p = permreg::validate_permutation(&items, items.len()).unwrap();
        let mut sorted = p.items().to_vec();
        sorted.sort();
        prop_assert_eq!(sorted, (1..=items.len() as u32).collect::<Vec<_>>());
    }

    #[test]
    fn fulfillment_matches_scan(items in arb_perm(8), seed in any::<u64>(), k in 2usize..6) {
        let n = items.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = random_perm(&mut rng, n);
        c.truncate(k.min(n));
        let x = perm(&items);
        let got = fulfills(&x, &Constraint::new(c.clone()).unwrap()).unwrap();
        prop_assert_eq!(got, fulfills_scan(&items, &c));
    }

    #[test]
    fn pair_fulfillment_is_position_order(items in arb_perm(8), a in 1u32..9, b in 1u32..9) {
        let n = items.len() as u32;
        prop_assume!(a != b && a <= n && b <= n);
        let x = perm(&items);
        let got = fulfills(&x, &Constraint::pair(a, b).unwrap()).unwrap();
        prop_assert_eq!(got, x.position(a) < x.position(b));
    }

    #[test]
    fn fulfillment_survives_relabeling(items in arb_perm(7), seed in any::<u64>()) {
        let n = items.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let relabel = random_perm(&mut rng, n);
        let mut c = random_perm(&mut rng, n);
        c.truncate(3.min(n));
        let map = |v: &[u32]| v.iter().map(|&a| relabel[a as usize - 1]).collect::<Vec<_>>();
        let before = fulfills(&perm(&items), &Constraint::new(c.clone()).unwrap()).unwrap();
        let after = fulfills(&perm(&map(&items)), &Constraint::new(map(&c)).unwrap()).unwrap();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn children_shrink_support_and_bound_dominates(
        seed in any::<u64>(), n in 3usize..7, m in 5usize..120, k in 2usize..5
    ) {
        prop_assume!(k < n);
        let ds = random_dataset(seed, n, m);
        let delta = Residuals::new(random_residuals(seed, m));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut parent = random_perm(&mut rng, n);
        parent.truncate(k);
        let parent = Constraint::new(parent).unwrap();
        let zp = support_vector(&ds, &parent).unwrap();
        let bound = upper_bound(&zp, &delta).unwrap();
        for child in generate_children(n, &parent).unwrap() {
            let zc = support_vector(&ds, &child).unwrap();
            prop_assert!(zc.is_subset_of(&zp));
            let tau = gradient_score(&zc, &delta).unwrap().tau;
            prop_assert!(tau <= bound + 1e-12, "{} > {}", tau, bound);
        }
    }

    #[test]
    fn pruned_search_equals_exhaustive(
        seed in any::<u64>(), n in 3usize..7, m in 20usize..200, max_len in 2usize..5
    ) {
        let ds = random_dataset(seed, n, m);
        let delta = random_residuals(seed, m);
        let got = search_best_constraint(&ds, &Residuals::new(delta.clone()), max_len).unwrap();
        let want = exhaustive_best(&ds, &delta, max_len, &[]).unwrap();
        prop_assert_eq!(got.constraint.items(), &want.items[..]);
        prop_assert_eq!(got.tau, want.tau);
    }

    #[test]
    fn csv_round_trip(seed in any::<u64>(), n in 1usize..9, m in 1usize..40) {
        let ds = generate_planted(&PlantedSpec {
            n_items: n, m_rows: m, mu0: 0.25, planted: vec![], noise_sd: 3.0, seed,
        }).unwrap();
        prop_assert_eq!(parse_csv(&to_csv(&ds)).unwrap(), ds);
    }

    #[test]
    fn metric_signs(seed in any::<u64>(), len in 1usize..50) {
        let a = random_residuals(seed, len);
        let b = random_residuals(seed.wrapping_add(1), len);
        let e1 = mae(&a, &b).unwrap();
        let e2 = mse(&a, &b).unwrap();
        prop_assert!(e1 >= 0.0 && e2 >= 0.0);
        prop_assert_eq!(e1 == 0.0, e2 == 0.0);
        if let Some(r) = r2(&a, &b).unwrap() {
            prop_assert!(r <= 1.0);
        }
        prop_assert_eq!(mae(&a, &a).unwrap(), 0.0);
    }
}

#[test]
fn small_example_matches_brute_force() {
    let ds = Dataset::from_rows(
        3,
        &[
            (vec![1, 2, 3], 1.0),
            (vec![3, 2, 1], 0.0),
            (vec![2, 1, 3], 0.9),
            (vec![1, 3, 2], 0.5),
        ],
    )
    .unwrap();
    let delta = vec![0.4, -0.6, 0.3, -0.1];
    let want = exhaustive_best(&ds, &delta, 3, &[]).unwrap();
    assert_eq!(want.items, vec![3, 2]);
    let got = search_best_constraint(&ds, &Residuals::new(delta.clone()), 3).unwrap();
    assert_eq!(got.constraint.items(), &want.items[..]);

    // the six pair columns against a scan
    let pairs = Constraint::all_pairs(3);
    for (col, c) in feature_matrix(&ds, &pairs).unwrap().iter().zip(&pairs) {
        assert_eq!(col.to_bools(), support_scan(&ds, c.items()));
    }
    let top = select_top_l(&pairs, &ds, &Residuals::new(delta), 1).unwrap();
    assert_eq!(top[0].items(), &[3, 2]);
}

#[test]
fn exclusion_matches_exhaustive() {
    for seed in 0..10 {
        let ds = random_dataset(seed, 5, 60);
        let delta = random_residuals(seed, 60);
        let first = exhaustive_best(&ds, &delta, 3, &[]).unwrap();
        let second = exhaustive_best(&ds, &delta, 3, &[first.items.clone()]).unwrap();
        let exclude: HashSet<Constraint> = [Constraint::new(first.items.clone()).unwrap()].into();
        let got =
            search_best_constraint_excluding(&ds, &Residuals::new(delta), 3, &exclude).unwrap();
        assert_eq!(got.constraint.items(), &second.items[..]);
    }
}

#[test]
fn boosting_never_increases_training_error() {
    for lr in [0.1, 0.5, 1.0] {
        let ds = random_dataset(42, 5, 80);
        let (model, steps) = fit_auto_traced(&ds, 30, lr, 5).unwrap();
        let mu = model.mu;
        let mut prev: f64 = ds.targets().iter().map(|y| (y - mu) * (y - mu)).sum();
        for s in &steps {
            assert!(s.sse <= prev * (1.0 + 1e-12), "lr {lr}: {} > {prev}", s.sse);
            let expect = lr * (2.0 - lr) * s.signed_sum * s.signed_sum / s.count as f64;
            assert!(((prev - s.sse) - expect).abs() <= 1e-9 * expect.max(1e-300));
            prev = s.sse;
        }
        let direct = residuals(&model, &ds).unwrap().sse();
        assert!((direct - prev).abs() <= 1e-9 * prev.max(1.0));
    }
}

#[test]
fn fit_auto_is_deterministic() {
    let ds = random_dataset(7, 6, 150);
    let a = fit_auto(&ds, 12, 0.5, 6).unwrap();
    let b = fit_auto(&ds, 12, 0.5, 6).unwrap();
    assert_eq!(a, b);
    for (x, y) in a.terms().iter().zip(b.terms()) {
        assert_eq!(x.beta.to_bits(), y.beta.to_bits());
    }
}

#[test]
fn planted_model_is_recovered() {
    let spec = PlantedSpec {
        n_items: 5,
        m_rows: 300,
        mu0: 0.5,
        planted: vec![
            PlantedTerm {
                constraint: Constraint::pair(1, 2).unwrap(),
                coefficient: 0.3,
            },
            PlantedTerm {
                constraint: Constraint::pair(4, 3).unwrap(),
                coefficient: -0.2,
            },
        ],
        noise_sd: 0.0,
        seed: 5,
    };
    let ds = generate_planted(&spec).unwrap();
    let model = fit_auto(&ds, 10, 1.0, 5).unwrap();
    let preds = permreg::boost::predict_all(&model, &ds).unwrap();
    let score = r2(ds.targets(), &preds).unwrap().unwrap();
    assert!(score >= 0.99, "r2 {score}");
}

#[test]
fn planted_pair_frequency_is_binomial() {
    let m = 4000;
    let ds = generate_planted(&PlantedSpec {
        n_items: 6,
        m_rows: m,
        mu0: 0.0,
        planted: vec![PlantedTerm {
            constraint: Constraint::pair(2, 5).unwrap(),
            coefficient: 1.0,
        }],
        noise_sd: 0.0,
        seed: 99,
    })
    .unwrap();
    let hits = ds.targets().iter().filter(|&&y| y == 1.0).count() as f64;
    let sd = (m as f64 * 0.25).sqrt();
    assert!((hits - m as f64 / 2.0).abs() <= 3.0 * sd, "hits {hits}");
}

#[test]
fn generator_and_split_are_seeded() {
    let spec = PlantedSpec {
        n_items: 6,
        m_rows: 100,
        mu0: 1.0,
        planted: vec![],
        noise_sd: 0.5,
        seed: 17,
    };
    let a = generate_planted(&spec).unwrap();
    assert_eq!(a, generate_planted(&spec).unwrap());
    assert_ne!(
        a,
        generate_planted(&PlantedSpec {
            seed: 18,
            ..spec.clone()
        })
        .unwrap()
    );

    let sizes = SplitSpec {
        train: 60,
        validation: 15,
        test: 25,
        seed: 4,
    };
    let s1 = split(&a, &sizes).unwrap();
    let s2 = split(&a, &sizes).unwrap();
    assert_eq!(s1, s2);
    // exact partition: every row used once
    let mut rows: Vec<String> = [&s1.train, &s1.validation, &s1.test]
        .iter()
        .flat_map(|d| {
            to_csv(d)
                .lines()
                .skip(1)
                .map(str::to_owned)
                .collect::<Vec<_>>()
        })
        .collect();
    let mut orig: Vec<String> = to_csv(&a).lines().skip(1).map(str::to_owned).collect();
    rows.sort();
    orig.sort();
    assert_eq!(rows, orig);
}
