use fluidtree::dataset::{Dataset, EPS_ZERO};
use fluidtree::octree::{accuracy, impurity_at_depth, train, ObliqueTree, TrainConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Points in the positive orthant labeled by two planes through the origin.
fn cone_data(n: usize, count: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ds = Dataset::new(n);
    while ds.len() < count {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
        let label = (x[0] > 2.0 * x[1]) as usize + (x[n - 1] > x[0]) as usize;
        ds.push(x, label, EPS_ZERO).unwrap();
    }
    ds
}

fn noisy_data(seed: u64, count: usize, labels: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ds = Dataset::new(3);
    for _ in 0..count {
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(0.01..1.0)).collect();
        ds.push(x, rng.gen_range(0..labels), EPS_ZERO).unwrap();
    }
    ds
}

#[test]
fn json_round_trip_preserves_predictions() {
    let ds = cone_data(4, 300, 1);
    let tree = train(&ds, &TrainConfig { max_depth: 4, seed: 3, ..Default::default() }).unwrap();
    let back = ObliqueTree::from_json(&tree.to_json().unwrap()).unwrap();
    assert_eq!(back, tree);
    let probe = cone_data(4, 1000, 2);
    for s in &probe.samples {
        assert_eq!(back.predict(&s.x), tree.predict(&s.x));
    }
}

#[test]
fn training_is_deterministic_across_thread_counts() {
    let ds = cone_data(5, 400, 4);
    let cfg = TrainConfig { max_depth: 3, restarts: 6, seed: 11, ..Default::default() };
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| train(&ds, &cfg).unwrap());
    let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| train(&ds, &cfg).unwrap());
    assert_eq!(one, many);
    assert_eq!(train(&ds, &cfg).unwrap(), one);
}

#[test]
fn a_cone_is_learned_and_survives_scaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ds = Dataset::new(3);
    while ds.len() < 500 {
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(0.01..1.0)).collect();
        let label = (x[0] > 6.0 * x[2]) as usize;
        ds.push(x, label, EPS_ZERO).unwrap();
    }
    let tree = train(&ds, &TrainConfig { max_depth: 3, seed: 1, ..Default::default() }).unwrap();
    assert_eq!(accuracy(&tree, &ds).unwrap(), 1.0);
    let probe = cone_data(3, 500, 6);
    let agree = probe.samples.iter().filter(|s| {
        let big: Vec<f64> = s.x.iter().map(|v| 10.0 * v).collect();
        tree.predict(&big) == tree.predict(&s.x)
    });
    assert!(agree.count() >= 495);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn leaf_impurity_never_grows_with_depth(seed in any::<u64>(), labels in 2usize..4, depth in 1usize..5) {
        let ds = noisy_data(seed, 80, labels);
        let tree = train(&ds, &TrainConfig { max_depth: depth, min_leaf: 2, restarts: 3, seed, ..Default::default() }).unwrap();
        let mut prev = f64::INFINITY;
        for d in 0..=tree.depth {
            let imp = impurity_at_depth(&tree, &ds, d);
            prop_assert!(imp <= prev + 1e-9, "depth {}: {} > {}", d, imp, prev);
            prev = imp;
        }
    }

    #[test]
    fn splits_respect_the_coefficient_cap(seed in any::<u64>(), n in 2usize..7, p in 0.1f64..0.9) {
        let ds = cone_data(n, 120, seed);
        let cfg = TrainConfig { max_depth: 3, restarts: 3, sparsity: Some(p), seed, ..Default::default() };
        let tree = train(&ds, &cfg).unwrap();
        let k = cfg.sparsity_k(n).unwrap();
        prop_assert!(tree.max_split_nnz() <= k);
        for (_, h) in tree.splits() {
            let norm: f64 = h.a.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn trees_respect_depth_and_leaf_size(seed in any::<u64>(), depth in 0usize..4, min_leaf in 1usize..10) {
        let ds = noisy_data(seed, 60, 3);
        let tree = train(&ds, &TrainConfig { max_depth: depth, min_leaf, restarts: 2, seed, ..Default::default() }).unwrap();
        prop_assert!(tree.depth <= depth);
        prop_assert!(tree.validate().is_ok());
        let labels: std::collections::BTreeSet<usize> = ds.samples.iter().map(|s| s.label).collect();
        prop_assert!(tree.leaf_labels().iter().all(|l| labels.contains(l)));
    }
}
