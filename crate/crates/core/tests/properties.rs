mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use visled::clustering::{brute_force_linkage, cut_at, cut_partition, linkage, DistanceSpec};
use visled::embedding_store::{l2_normalize, vled, ClassName, EmbeddingSet, SampleId, SceneId};
use visled::pool_manager::{advance_round, init_pool, replay, Ledger};
use visled::sampler::{select_cwm, select_owe, select_random};
use visled::zeroshot::{assign_classes, LabelEmbeddingSet};

use common::*;

fn arb_set_with(quantize: bool) -> impl Strategy<Value = EmbeddingSet> {
    (1usize..40, prop::sample::select(vec![2usize, 4, 8]), any::<u64>())
        .prop_map(move |(n, dim, seed)| random_unit_set(&mut ChaCha8Rng::seed_from_u64(seed), n, dim, quantize))
}

fn arb_set() -> impl Strategy<Value = EmbeddingSet> {
    prop_oneof![arb_set_with(false), arb_set_with(true)]
}

fn arb_raw_set() -> impl Strategy<Value = EmbeddingSet> {
    (1usize..6, 1usize..20).prop_flat_map(|(dim, n)| {
        prop::collection::vec(prop::collection::vec(-1e3f32..1e3, dim), n).prop_filter_map("zero vector", move |rows| {
            let records =
                rows.into_iter().enumerate().map(|(i, v)| (SampleId::new(format!("r{i}")).unwrap(), v)).collect();
            EmbeddingSet::new(dim, records).ok()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn vled_round_trip_is_bit_exact(set in arb_raw_set()) {
        let back = vled::decode(&vled::encode(&set)).unwrap();
        prop_assert_eq!(back.ids(), set.ids());
        let a: Vec<u32> = set.data().iter().map(|x| x.to_bits()).collect();
        let b: Vec<u32> = back.data().iter().map(|x| x.to_bits()).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn decode_never_panics_and_errors_point_inside(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        if let Err(e) = vled::decode(&bytes) {
            prop_assert!(e.offset() <= bytes.len() as u64);
        }
    }

    #[test]
    fn normalization_is_idempotent(set in arb_raw_set()) {
        let once = l2_normalize(&set);
        prop_assert!(once.is_normalized(1e-6));
        let twice = l2_normalize(&once);
        for (a, b) in once.data().iter().zip(twice.data()) {
            prop_assert!((a - b).abs() as f64 <= 1e-9);
        }
    }

    #[test]
    fn zero_shot_ignores_label_order(
        dim in prop::sample::select(vec![2usize, 4, 8]),
        n in 1usize..40,
        k in 1usize..12,
        seed in any::<u64>(),
        quantize in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let images = random_unit_set(&mut rng, n, dim, quantize);
        let labels = random_unit_set(&mut rng, k, dim, quantize);
        let named = |order: &[usize]| {
            LabelEmbeddingSet::new(
                labels.dim(),
                order.iter().map(|&k| (ClassName::new(format!("L{k}")).unwrap(), labels.vector(k).to_vec())).collect(),
            )
            .unwrap()
        };
        let mut order: Vec<usize> = (0..labels.len()).collect();
        let a = assign_classes(&images, &named(&order), None).unwrap();
        order.shuffle(&mut rng);
        let b = assign_classes(&images, &named(&order), None).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn linkage_matches_oracle(set in arb_set_with(false)) {
        let fast = linkage(&set, DistanceSpec::default()).unwrap();
        let slow = brute_force_linkage(&set, DistanceSpec::default()).unwrap();
        fast.validate().unwrap();
        for (a, b) in fast.heights().iter().zip(slow.heights()) {
            prop_assert!((a - b).abs() <= 1e-6, "{} vs {}", a, b);
        }
        for t in [0.05, 0.15, 0.4] {
            if fast.heights().iter().all(|h| (h - t).abs() > 1e-6) {
                prop_assert_eq!(
                    partition_of(&cut_at(&fast, set.ids(), t).unwrap()),
                    partition_of(&cut_at(&slow, set.ids(), t).unwrap())
                );
            }
        }
    }

    #[test]
    fn tied_merges_are_closest_pairs(set in arb_set_with(true)) {
        let d = linkage(&set, DistanceSpec::default()).unwrap();
        if let Err(e) = check_greedy_average(&set, &d, 1e-9) {
            return Err(TestCaseError::fail(e));
        }
    }

    #[test]
    fn clustering_is_permutation_invariant(set in arb_set(), seed in any::<u64>()) {
        let mut order: Vec<usize> = (0..set.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let shuffled = set.subset(&order);
        let a = linkage(&set, DistanceSpec::default()).unwrap();
        let b = linkage(&shuffled, DistanceSpec::default()).unwrap();
        for (x, y) in a.heights().iter().zip(b.heights()) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
        prop_assert_eq!(
            partition_of(&cut_at(&a, set.ids(), 0.15).unwrap()),
            partition_of(&cut_at(&b, shuffled.ids(), 0.15).unwrap())
        );
    }

    #[test]
    fn cut_is_monotone_in_threshold(set in arb_set(), lo in 0.0f64..1.0, step in 0.0f64..1.0) {
        let d = linkage(&set, DistanceSpec::default()).unwrap();
        let fine = cut_partition(&d, lo);
        let coarse = cut_partition(&d, lo + step);
        prop_assert!(coarse.len() <= fine.len());
        let owner: BTreeMap<usize, usize> =
            coarse.iter().enumerate().flat_map(|(k, c)| c.iter().map(move |&i| (i, k))).collect();
        for c in &fine {
            let parents: BTreeSet<usize> = c.iter().map(|i| owner[i]).collect();
            prop_assert_eq!(parents.len(), 1);
        }
    }

    #[test]
    fn owe_follows_tier_policy(
        seed in any::<u64>(),
        n_scenes in 1usize..30,
        extra in 0usize..20,
        labeled_frac in 0.0f64..0.9,
        budget in 1usize..40,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pool, m) = random_pool(&mut rng, n_scenes + extra, n_scenes);
        let mut state = init_pool(&m).unwrap();
        let mut scenes: Vec<SceneId> = state.all_scenes.iter().cloned().collect();
        scenes.shuffle(&mut rng);
        state.labeled = scenes[..(labeled_frac * n_scenes as f64) as usize].iter().cloned().collect();
        let unlabeled: Vec<SampleId> = pool
            .set()
            .ids()
            .iter()
            .filter(|s| !state.is_labeled(pool.scene_of(s.as_str()).unwrap()))
            .cloned()
            .collect();
        prop_assume!(!unlabeled.is_empty());
        let f = random_clustering(&mut rng, &unlabeled);
        let report = select_owe(&f, &pool, &state, budget, seed).unwrap();
        if let Err(e) = check_tier_policy(&f, &pool, &state, budget, &report) {
            return Err(TestCaseError::fail(e));
        }
    }

    #[test]
    fn cwm_quota_is_balanced(seed in any::<u64>(), n_classes in 1usize..8, budget in 1usize..50) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pool, m) = random_pool(&mut rng, 60, 60);
        let state = init_pool(&m).unwrap();
        let mut ids = pool.set().ids().to_vec();
        ids.shuffle(&mut rng);
        let chunk = ids.len().div_ceil(n_classes);
        let per_class: BTreeMap<ClassName, _> = ids
            .chunks(chunk)
            .enumerate()
            .map(|(k, c)| (ClassName::new(format!("k{k}")).unwrap(), random_clustering(&mut rng, c)))
            .collect();
        let r = select_cwm(&per_class, &pool, &state, budget, seed).unwrap();
        let targets: Vec<usize> = r.quota.as_ref().unwrap().targets.values().copied().collect();
        prop_assert_eq!(targets.iter().sum::<usize>(), budget);
        prop_assert!(targets.iter().max().unwrap() - targets.iter().min().unwrap() <= 1);
        prop_assert_eq!(r.selections.len(), budget.min(60));
        let distinct: BTreeSet<&SceneId> = r.scenes().collect();
        prop_assert_eq!(distinct.len(), r.selections.len());
    }

    #[test]
    fn rounds_nest_and_replay(seed in any::<u64>(), n_scenes in 1usize..60, frac in 0.05f64..0.6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pool, m) = random_pool(&mut rng, n_scenes + 5, n_scenes);
        let budget = ((frac * n_scenes as f64).round() as usize).max(1);
        let mut state = init_pool(&m).unwrap();
        let mut ledger = Ledger::new(&m);
        let mut previous = state.labeled.clone();
        for round in 0..4u64 {
            let r = select_random(&pool, &state, budget, seed ^ round).unwrap();
            (state, ledger) = advance_round(&state, &r, &ledger, 0).unwrap();
            prop_assert!(previous.is_subset(&state.labeled));
            prop_assert_eq!(state.labeled.len(), (previous.len() + budget).min(n_scenes));
            previous = state.labeled.clone();
        }
        prop_assert_eq!(&replay(&ledger, &m).unwrap(), &state);
        let reread = Ledger::read_jsonl(&ledger.to_jsonl()[..]).unwrap();
        prop_assert_eq!(reread, ledger);
    }
}
