use pageclass::forest::{
    compute_category_weights, model_from_bytes, model_to_bytes, train_forest, ForestConfig, RandomForestModel,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_data(n: usize, d: usize, k: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
    let ys = (0..n).map(|_| format!("C{}", rng.random_range(0..k))).collect();
    (xs, ys)
}

fn accuracy(model: &RandomForestModel, xs: &[Vec<f64>], ys: &[String]) -> f64 {
    let hits = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| &model.predict_topn(x, 1).unwrap()[0].0 == *y)
        .count();
    hits as f64 / xs.len() as f64
}

#[test]
fn deep_forest_without_bootstrap_memorizes() {
    let (xs, ys) = random_data(200, 10, 5, 42);
    let cfg = ForestConfig {
        n_trees: 10,
        bootstrap: false,
        ..Default::default()
    };
    let model = train_forest(&xs, &ys, &cfg).unwrap();
    assert_eq!(accuracy(&model, &xs, &ys), 1.0);
}

#[test]
fn tree_order_does_not_matter() {
    let (xs, ys) = random_data(50, 4, 3, 1);
    let model = train_forest(&xs, &ys, &ForestConfig { n_trees: 9, ..Default::default() }).unwrap();
    let mut trees = model.trees().to_vec();
    trees.reverse();
    let reversed = RandomForestModel::from_parts(
        model.categories().to_vec(),
        model.weights().to_vec(),
        trees,
        model.feature_count(),
        model.seed(),
    )
    .unwrap();
    for x in &xs {
        let a = model.predict_proba(x).unwrap();
        let b = reversed.predict_proba(x).unwrap();
        assert!(a.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn probabilities_form_a_distribution(seed in any::<u64>(), probe in proptest::collection::vec(-1.0f64..2.0, 5)) {
        let (xs, ys) = random_data(40, 5, 4, seed);
        let model = train_forest(&xs, &ys, &ForestConfig { n_trees: 5, seed, ..Default::default() }).unwrap();
        let p = model.predict_proba(&probe).unwrap();
        prop_assert!(p.iter().all(|&v| v >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let ranked = model.predict_topn(&probe, model.categories().len()).unwrap();
        prop_assert!(ranked.windows(2).all(|w| w[0].1 >= w[1].1));
    }

    #[test]
    fn serialization_is_deterministic_and_lossless(seed in any::<u64>()) {
        let (xs, ys) = random_data(30, 3, 3, seed);
        let cfg = ForestConfig { n_trees: 4, seed, ..Default::default() };
        let a = model_to_bytes(&train_forest(&xs, &ys, &cfg).unwrap());
        let b = model_to_bytes(&train_forest(&xs, &ys, &cfg).unwrap());
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(model_to_bytes(&model_from_bytes(&a).unwrap()), a);
    }

    #[test]
    fn doubling_a_category_halves_its_weight(a in 1usize..50, b in 1usize..50) {
        let labels: Vec<&str> = std::iter::repeat_n("A", a).chain(std::iter::repeat_n("B", b)).collect();
        let doubled: Vec<&str> = std::iter::repeat_n("A", 2 * a).chain(std::iter::repeat_n("B", b)).collect();
        let w1 = compute_category_weights(&labels).unwrap();
        let w2 = compute_category_weights(&doubled).unwrap();
        // N changes too: w_A = N/(K·count_A), so the ratio is (N2/N1)/2.
        let n1 = (a + b) as f64;
        let n2 = (2 * a + b) as f64;
        prop_assert!((w2["A"] / w1["A"] - n2 / n1 / 2.0).abs() < 1e-12);
        let weighted: f64 = w1["A"] * a as f64 + w1["B"] * b as f64;
        prop_assert!((weighted - n1).abs() < 1e-9);
    }
}
