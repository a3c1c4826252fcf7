use std::fs;

use ctree_core::active::{StrategyConfig, StrategyKind};
use ctree_core::data::{permute, Manifest, Metric, Order};
use ctree_core::eval::run_active;
use ctree_core::synth::{rand_cbt, sample_stream};
use ctree_core::tree::{Example, LearnerConfig};
use ctree_core::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn seeded_permutations_of_three_are_uniform() {
    let base: Vec<Example> = (0..3).map(|i| Example::labeled(vec![i as f64], false)).collect();
    let mut counts = [0u32; 6];
    let shuffles = 6000;
    for seed in 0..shuffles {
        let order: Vec<usize> = permute(base.clone(), Order::Seeded(seed))
            .iter()
            .map(|e| e.features[0] as usize)
            .collect();
        let code = match order.as_slice() {
            [0, 1, 2] => 0,
            [0, 2, 1] => 1,
            [1, 0, 2] => 2,
            [1, 2, 0] => 3,
            [2, 0, 1] => 4,
            [2, 1, 0] => 5,
            other => panic!("not a permutation: {other:?}"),
        };
        counts[code] += 1;
    }
    let expected = shuffles as f64 / 6.0;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new(5.0).unwrap().cdf(stat);
    assert!(counts.iter().all(|&c| c > 0));
    assert!(p > 0.001, "chi-square {stat} (p = {p}) for counts {counts:?}");
    assert_eq!(
        permute(base.clone(), Order::Identity),
        base,
        "identity order must leave the stream alone"
    );
}

fn strategy() -> impl Strategy<Value = StrategyKind> {
    prop::sample::select(StrategyKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn queries_never_outrun_the_budget(kind in strategy(), budget in 0.0f64..=1.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = rand_cbt(4, 3, 0.7, &mut rng).unwrap();
        let stream = sample_stream(&truth, 400, &mut rng);
        let mut learner = LearnerConfig::c_tree(0.2);
        learner.grace_period = 30;
        let record = run_active(&learner, &StrategyConfig::new(kind), budget, seed, &stream).unwrap();
        let mut queried = 0u64;
        for row in &record.rows {
            queried += u64::from(row.queried);
            prop_assert!(queried as f64 <= budget * row.t as f64 + 1e-9, "{kind} at t = {}", row.t);
        }
        prop_assert_eq!(queried, record.queried);
        prop_assert!(record.query_rate() <= budget + 1.0 / stream.len() as f64);
    }
}

#[test]
fn manifest_fixtures_load_with_declared_counts() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.svm"), "+1 1:0.5 3:1\n-1 2:2\n# comment\n+1 3:0.25\n").unwrap();
    fs::write(dir.path().join("b.csv"), "f1;f2;class\n1;2;yes\n3;4;no\n5;6;no\n").unwrap();
    let manifest = r#"
        [[dataset]]
        name = "sparse"
        path = "a.svm"
        format = "sparse"
        dim = 4
        metric = "f-measure"
        expected = { examples = 3, positives = 2 }

        [[dataset]]
        name = "dense"
        path = "b.csv"
        format = "dense"
        delimiter = ";"
        header = true
        labels = { yes = 1, no = 0 }
        expected = { examples = 3, positives = 2 }
    "#;
    fs::write(dir.path().join("m.toml"), manifest).unwrap();
    let m = Manifest::load(dir.path().join("m.toml")).unwrap();

    let (sparse, note) = m.get("sparse").unwrap().load().unwrap();
    assert!(note.is_none());
    assert_eq!(sparse.meta.dim, 4);
    assert_eq!(sparse.meta.metric, Metric::FMeasure);
    assert_eq!(sparse.examples[0].features, vec![0.5, 0.0, 1.0, 0.0]);
    assert_eq!(sparse.examples[1].label, Some(false));

    match m.get("dense").unwrap().load() {
        Err(Error::CountMismatch { field, expected, found, .. }) => {
            assert_eq!((field, expected, found), ("positives", 2, 1));
        }
        other => panic!("expected a count mismatch, got {other:?}"),
    }
    assert!(m.get("nothing").is_err());
}
