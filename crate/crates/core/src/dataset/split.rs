use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DatasetError, Labeled};

/// Groups item indices by label, labels in lexicographic order.
pub(crate) fn indices_by_label<T: Labeled>(items: &[T]) -> BTreeMap<&str, Vec<usize>> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, item) in items.iter().enumerate() {
        groups.entry(item.label()).or_default().push(i);
    }
    groups
}

pub fn label_counts<T: Labeled>(items: &[T]) -> BTreeMap<String, usize> {
    indices_by_label(items)
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.len()))
        .collect()
}

/// Uniformly subsamples every category above `max_per_category`.
///
/// Survivors keep their relative input order. Categories at or under the cap
/// are untouched.
pub fn cap_per_category<T: Labeled + Clone>(items: &[T], max_per_category: usize, seed: u64) -> Vec<T> {
    let max_per_category = max_per_category.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![false; items.len()];
    for (_, idx) in indices_by_label(items) {
        if idx.len() <= max_per_category {
            idx.iter().for_each(|&i| keep[i] = true);
        } else {
            for pick in index::sample(&mut rng, idx.len(), max_per_category) {
                keep[idx[pick]] = true;
            }
        }
    }
    items
        .iter()
        .zip(keep)
        .filter(|&(_, k)| k)
        .map(|(item, _)| item.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit<T> {
    pub train: Vec<T>,
    pub eval: Vec<T>,
    pub eval_ratio: f64,
    pub seed: u64,
}

/// Number of evaluation items for a category of `count` items.
pub fn eval_count(count: usize, eval_ratio: f64) -> usize {
    ((eval_ratio * count as f64).round() as usize).min(count)
}

/// Per-category shuffled split; each category sends `round(ratio · count)`
/// items to evaluation. Both halves keep input order.
pub fn stratified_split<T: Labeled + Clone>(
    items: &[T],
    eval_ratio: f64,
    seed: u64,
) -> Result<DatasetSplit<T>, DatasetError> {
    if items.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    if !(eval_ratio > 0.0 && eval_ratio < 1.0) {
        return Err(DatasetError::InvalidArgument(format!(
            "eval_ratio {eval_ratio} must lie in (0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut to_eval = vec![false; items.len()];
    for (_, mut idx) in indices_by_label(items) {
        idx.shuffle(&mut rng);
        for &i in &idx[..eval_count(idx.len(), eval_ratio)] {
            to_eval[i] = true;
        }
    }
    let (mut train, mut eval) = (Vec::new(), Vec::new());
    for (item, e) in items.iter().zip(to_eval) {
        if e {
            eval.push(item.clone());
        } else {
            train.push(item.clone());
        }
    }
    Ok(DatasetSplit {
        train,
        eval,
        eval_ratio,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[derive(Debug, Clone, PartialEq)]
    struct Item(String, usize);

    impl Labeled for Item {
        fn label(&self) -> &str {
            &self.0
        }
    }

    fn items(counts: &[(&str, usize)]) -> Vec<Item> {
        let mut out = Vec::new();
        let mut id = 0;
        for &(label, n) in counts {
            for _ in 0..n {
                out.push(Item(label.to_string(), id));
                id += 1;
            }
        }
        out
    }

    #[test]
    fn capping_counts() {
        let data = items(&[("A", 10), ("B", 3)]);
        let capped = cap_per_category(&data, 5, 1);
        let counts = label_counts(&capped);
        assert_eq!(counts["A"], 5);
        assert_eq!(counts["B"], 3);
        assert_eq!(cap_per_category(&data, 10, 1), data);
        assert_eq!(cap_per_category(&data, 5, 9), cap_per_category(&data, 5, 9));
    }

    #[test]
    fn capping_preserves_order() {
        let data = items(&[("A", 20), ("B", 20)]);
        let capped = cap_per_category(&data, 7, 4);
        assert!(capped.windows(2).all(|w| w[0].1 < w[1].1));
    }

    #[test]
    fn split_arithmetic() {
        let split = stratified_split(&items(&[("A", 60), ("B", 40)]), 0.1, 0).unwrap();
        let counts = label_counts(&split.eval);
        assert_eq!((counts["A"], counts["B"]), (6, 4));
        assert_eq!(split.train.len(), 90);

        let split = stratified_split(&items(&[("A", 3)]), 0.1, 0).unwrap();
        assert!(split.eval.is_empty());
        assert_eq!(split.train.len(), 3);
    }

    #[test]
    fn split_errors() {
        assert_eq!(stratified_split::<Item>(&[], 0.1, 0), Err(DatasetError::EmptyDataset));
        assert!(stratified_split(&items(&[("A", 3)]), 1.0, 0).is_err());
    }

    proptest! {
        #[test]
        fn split_is_a_partition(counts in proptest::collection::vec(1usize..40, 1..6), ratio in 0.05f64..0.95, seed in any::<u64>()) {
            let names = ["A", "B", "C", "D", "E", "F"];
            let spec: Vec<(&str, usize)> = counts.iter().enumerate().map(|(i, &c)| (names[i], c)).collect();
            let data = items(&spec);
            let split = stratified_split(&data, ratio, seed).unwrap();
            let mut ids: Vec<usize> = split.train.iter().chain(&split.eval).map(|i| i.1).collect();
            ids.sort_unstable();
            prop_assert_eq!(ids, (0..data.len()).collect::<Vec<_>>());
            let eval_counts = label_counts(&split.eval);
            for (name, c) in spec {
                let expect = (ratio * c as f64).round() as usize;
                prop_assert_eq!(eval_counts.get(name).copied().unwrap_or(0), expect);
            }
        }

        #[test]
        fn capping_never_grows(counts in proptest::collection::vec(1usize..30, 1..5), cap in 1usize..20, seed in any::<u64>()) {
            let names = ["A", "B", "C", "D", "E"];
            let spec: Vec<(&str, usize)> = counts.iter().enumerate().map(|(i, &c)| (names[i], c)).collect();
            let data = items(&spec);
            let capped = label_counts(&cap_per_category(&data, cap, seed));
            for (name, c) in spec {
                prop_assert_eq!(capped[name], c.min(cap));
            }
        }
    }
}
