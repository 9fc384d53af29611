use fluidtree::dataset::{
    all_patterns, augment, generate, partition, sample_initial_state, sample_states, support_pattern, Dataset,
    GenerationConfig, LabelBook, SupportPattern, EPS_ZERO,
};
use fluidtree::fluid::DiscretizationConfig;
use fluidtree::network::standard_crisscross;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pat(v: &[usize]) -> SupportPattern {
    SupportPattern::new(v.iter().copied()).unwrap()
}

#[test]
fn sampled_states_are_uniform_on_the_positive_sphere() {
    // for a uniform direction in k dimensions every squared coordinate has mean 1/k
    // and the pairwise coordinate ordering is a fair coin
    let p = pat(&[0, 2, 3, 5]);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let draws = 20_000;
    let mut sq = [0.0f64; 6];
    let mut first_larger = 0usize;
    for _ in 0..draws {
        let x = sample_initial_state(&p, 6, &mut rng);
        assert_eq!(support_pattern(&x, EPS_ZERO).unwrap(), p);
        let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        for i in 0..6 {
            sq[i] += x[i] * x[i];
        }
        first_larger += (x[0] > x[5]) as usize;
    }
    for &i in p.classes() {
        let mean = sq[i] / draws as f64;
        // the squared coordinate is Beta(1/2, 3/2) with sd about 0.28
        assert!((mean - 0.25).abs() < 4.0 * 0.28 / (draws as f64).sqrt(), "coordinate {i}: {mean}");
    }
    assert_eq!(sq[1], 0.0);
    assert_eq!(sq[4], 0.0);
    let frac = first_larger as f64 / draws as f64;
    assert!((frac - 0.5).abs() < 4.0 * 0.5 / (draws as f64).sqrt());
}

#[test]
fn sample_states_follow_the_requested_patterns() {
    let g = GenerationConfig { patterns: vec![pat(&[0]), pat(&[1, 2])], per_pattern: 5, seed: 9, ..Default::default() };
    let states = sample_states(3, &g);
    assert_eq!(states.len(), 10);
    for (k, x) in states.iter().enumerate() {
        let want = if k < 5 { pat(&[0]) } else { pat(&[1, 2]) };
        assert_eq!(support_pattern(x, EPS_ZERO).unwrap(), want);
    }
    assert_eq!(sample_states(3, &g), states);
}

#[test]
fn generation_does_not_depend_on_the_thread_count() {
    let spec = standard_crisscross();
    let g = GenerationConfig { patterns: all_patterns(3), per_pattern: 6, chunk_size: 4, seed: 1, ..Default::default() };
    let s = DiscretizationConfig::with_intervals(60);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| generate(&spec, &g, &s).unwrap())
    };
    let (a, book_a, stats_a) = run(1);
    let (b, book_b, stats_b) = run(4);
    assert_eq!(a, b);
    assert_eq!(book_a, book_b);
    assert_eq!(stats_a, stats_b);
    assert_eq!(stats_a.instances, 42);
    assert!(stats_a.max_terminal_residual <= 1e-6);
}

fn dataset_strategy() -> impl Strategy<Value = Dataset> {
    prop::collection::vec((prop::collection::vec(prop_oneof![Just(0.0), 1e-3f64..10.0], 3), 0usize..4), 1..40)
        .prop_filter_map("needs a non-empty state", |rows| {
            let mut ds = Dataset::new(3);
            for (x, label) in rows {
                if x.iter().any(|v| *v > 0.0) {
                    ds.push(x, label, EPS_ZERO).unwrap();
                }
            }
            (!ds.is_empty()).then_some(ds)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn csv_round_trips(ds in dataset_strategy()) {
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(buf.as_slice(), EPS_ZERO).unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn augmentation_keeps_labels_and_patterns(ds in dataset_strategy(), alphas in prop::collection::vec(0.1f64..20.0, 0..3)) {
        let aug = augment(&ds, &alphas);
        prop_assert_eq!(aug.len(), ds.len() * (1 + alphas.len()));
        for (k, s) in aug.samples.iter().enumerate() {
            let orig = &ds.samples[k % ds.len()];
            prop_assert_eq!(s.label, orig.label);
            prop_assert_eq!(&s.pattern, &orig.pattern);
            prop_assert_eq!(support_pattern(&s.x, EPS_ZERO).unwrap(), orig.pattern.clone());
        }
    }

    #[test]
    fn partition_routes_every_sample_once(ds in dataset_strategy(), split in 1usize..7) {
        let pats = all_patterns(3);
        let cells = vec![pats[..split].to_vec(), pats[split..].to_vec()];
        let part = partition(&ds, &cells).unwrap();
        prop_assert!(part.leftover.is_empty());
        prop_assert_eq!(part.cells[0].len() + part.cells[1].len(), ds.len());
        for (c, cell) in part.cells.iter().enumerate() {
            for s in &cell.samples {
                prop_assert!(cells[c].contains(&s.pattern));
            }
        }
    }

    #[test]
    fn label_book_round_trips(labels in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 1..8)) {
        let mut book = LabelBook::new();
        let ids: Vec<usize> = labels.iter().map(|u| book.canonical_label(u)).collect();
        let back = LabelBook::from_json(&book.to_json().unwrap()).unwrap();
        prop_assert_eq!(&back, &book);
        for (u, id) in labels.iter().zip(ids) {
            prop_assert_eq!(back.find(u), Some(id));
        }
    }
}
