use ctree_core::criteria::CriterionKind;
use ctree_core::synth::{rand_cbt, sample_stream};
use ctree_core::tree::{DeltaMode, LearnerConfig, Node, Region, SplitBound, Tree};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn trained(seed: u64, leaves: usize, per_leaf: usize, config: LearnerConfig) -> Tree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = rand_cbt(leaves, 3, 0.7, &mut rng).unwrap();
    let stream = sample_stream(&truth, per_leaf, &mut rng);
    let mut tree = Tree::new(3, config).unwrap();
    for (i, ex) in stream.iter().enumerate() {
        tree.observe(&ex.features, ex.label.unwrap(), i as u64 + 1).unwrap();
    }
    tree
}

fn loose() -> LearnerConfig {
    let mut config = LearnerConfig::c_tree(0.05);
    config.grace_period = 20;
    config
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_point_reaches_exactly_one_leaf(seed in any::<u64>(), probes in prop::collection::vec(prop::array::uniform3(0.0f64..1.0), 200)) {
        let tree = trained(seed, 6, 150, loose());
        let leaves: Vec<_> = tree
            .regions(&Region::unbounded(3))
            .into_iter()
            .filter(|(id, _)| tree.leaf(*id).is_some())
            .collect();
        prop_assert_eq!(leaves.len(), tree.num_leaves());
        let mut routed = vec![0usize; tree.num_nodes()];
        for x in &probes {
            let hits: Vec<_> = leaves.iter().filter(|(_, r)| r.contains(x)).collect();
            prop_assert_eq!(hits.len(), 1);
            prop_assert_eq!(hits[0].0, tree.route(x));
            routed[tree.route(x).0] += 1;
        }
        prop_assert_eq!(routed.iter().sum::<usize>(), probes.len());
    }

    #[test]
    fn snapshots_round_trip(seed in any::<u64>()) {
        let tree = trained(seed, 5, 120, loose());
        let text = tree.to_snapshot();
        let back = Tree::from_snapshot(&text).unwrap();
        prop_assert_eq!(back.to_snapshot(), text);
        prop_assert_eq!(back.num_nodes(), tree.num_nodes());
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.random()).collect();
            prop_assert_eq!(back.route(&x), tree.route(&x));
            prop_assert_eq!(back.predict(&x), tree.predict(&x));
        }
    }

    #[test]
    fn replays_are_identical(seed in any::<u64>()) {
        let a = trained(seed, 5, 100, loose());
        let b = trained(seed, 5, 100, loose());
        prop_assert_eq!(a.to_snapshot(), b.to_snapshot());
    }

    #[test]
    fn leaves_are_splits_plus_one(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = rand_cbt(6, 3, 0.7, &mut rng).unwrap();
        let stream = sample_stream(&truth, 100, &mut rng);
        let mut tree = Tree::new(3, loose()).unwrap();
        let mut splits = 0;
        let mut nodes = 1;
        for (i, ex) in stream.iter().enumerate() {
            if tree.observe(&ex.features, ex.label.unwrap(), i as u64 + 1).unwrap().is_some() {
                splits += 1;
            }
            prop_assert!(tree.num_nodes() >= nodes);
            nodes = tree.num_nodes();
            prop_assert_eq!(tree.num_leaves(), splits + 1);
        }
        let internal = tree.nodes().iter().filter(|n| matches!(n, Node::Internal(_))).count();
        prop_assert_eq!(internal, splits);
    }
}

#[test]
fn learners_move_between_threads() {
    fn check<T: Send + Sync>() {}
    check::<Tree>();
}

// One threshold on attribute 0 at 0.5 with positive rates 0.05 and 0.95;
// attributes 1 to 4 are noise. δ is fixed at 0.05 so the exact Gini interval
// has to separate the true split from the rest on its own.
#[test]
fn exact_bound_splits_on_the_true_attribute() {
    let config = LearnerConfig {
        criterion: CriterionKind::Gini,
        bound: SplitBound::CTreeExact,
        delta: DeltaMode::Fixed(0.05),
        ..LearnerConfig::default()
    };
    let runs = 200;
    let mut correct = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..runs {
        let mut tree = Tree::new(5, config).unwrap();
        for t in 1..=20_000u64 {
            let x: Vec<f64> = (0..5).map(|_| rng.random()).collect();
            let rate = if x[0] > 0.5 { 0.95 } else { 0.05 };
            let y = rng.random_bool(rate);
            if let Some(event) = tree.observe(&x, y, t).unwrap() {
                if event.attribute == 0 && (event.threshold - 0.5).abs() < 0.01 {
                    correct += 1;
                }
                break;
            }
        }
    }
    assert!(correct * 100 >= runs * 95, "{correct} of {runs} runs split on the true attribute");
}
