use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use rand::Rng;

use super::DatasetError;

/// Class-balanced batches: every batch holds `n_categories` distinct labels
/// with `n_per_category` indices each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchPlan {
    pub n_categories: usize,
    pub n_per_category: usize,
    pub batches: Vec<Vec<usize>>,
}

struct Pool {
    indices: Vec<usize>,
    cursor: usize,
}

impl Pool {
    fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        if self.cursor == self.indices.len() {
            self.indices.shuffle(rng);
            self.cursor = 0;
        }
        let i = self.indices[self.cursor];
        self.cursor += 1;
        i
    }
}

/// Plans `n_batches` balanced batches over `labels`.
///
/// Each label keeps a shuffled index list and a cursor that persists across
/// batches; a list is reshuffled and restarted the moment it runs out, so no
/// index repeats within one pass over its category.
pub fn balanced_batches<S: AsRef<str>, R: Rng + ?Sized>(
    labels: &[S],
    n_categories: usize,
    n_per_category: usize,
    n_batches: usize,
    rng: &mut R,
) -> Result<BatchPlan, DatasetError> {
    if n_per_category == 0 {
        return Err(DatasetError::InvalidArgument(
            "n_per_category must be at least 1".into(),
        ));
    }
    let mut by_label: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_label.entry(l.as_ref()).or_default().push(i);
    }
    if n_categories == 0 || n_categories > by_label.len() {
        return Err(DatasetError::TooFewCategories {
            requested: n_categories,
            available: by_label.len(),
        });
    }

    let mut pools: Vec<Pool> = by_label
        .into_values()
        .map(|mut indices| {
            indices.shuffle(rng);
            Pool { indices, cursor: 0 }
        })
        .collect();

    let mut batches = Vec::with_capacity(n_batches);
    for _ in 0..n_batches {
        let mut batch = Vec::with_capacity(n_categories * n_per_category);
        for c in index::sample(rng, pools.len(), n_categories) {
            for _ in 0..n_per_category {
                batch.push(pools[c].draw(rng));
            }
        }
        batches.push(batch);
    }
    Ok(BatchPlan {
        n_categories,
        n_per_category,
        batches,
    })
}

/// Batch count that covers `n_items` once at the given batch size.
pub fn batches_per_epoch(n_items: usize, n_categories: usize, n_per_category: usize) -> usize {
    n_items.div_ceil((n_categories * n_per_category).max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn labels(counts: &[(&str, usize)]) -> Vec<String> {
        counts
            .iter()
            .flat_map(|&(l, n)| std::iter::repeat_n(l.to_string(), n))
            .collect()
    }

    fn label_histogram(batch: &[usize], labels: &[String]) -> BTreeMap<String, usize> {
        let mut h = BTreeMap::new();
        for &i in batch {
            *h.entry(labels[i].clone()).or_insert(0) += 1;
        }
        h
    }

    #[test]
    fn batches_have_fixed_composition() {
        let labels = labels(&[("A", 7), ("B", 12), ("C", 3)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let plan = balanced_batches(&labels, 2, 4, 50, &mut rng).unwrap();
        assert_eq!(plan.batches.len(), 50);
        for b in &plan.batches {
            assert_eq!(b.len(), 8);
            let h = label_histogram(b, &labels);
            assert_eq!(h.len(), 2);
            assert!(h.values().all(|&c| c == 4));
        }
    }

    #[test]
    fn all_categories_single_sample_is_transversal() {
        let labels = labels(&[("A", 4), ("B", 5), ("C", 6)]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let plan = balanced_batches(&labels, 3, 1, 20, &mut rng).unwrap();
        for b in &plan.batches {
            let h = label_histogram(b, &labels);
            assert_eq!(h.len(), 3);
        }
    }

    #[test]
    fn exhausted_lists_reset() {
        // Only one category so every batch draws from it: 3 batches × 4 = 12 draws over 5 indices.
        let labels = labels(&[("A", 5)]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let plan = balanced_batches(&labels, 1, 4, 3, &mut rng).unwrap();
        let draws: Vec<usize> = plan.batches.concat();
        assert_eq!(draws.len(), 12);
        for i in 0..5 {
            let seen = draws.iter().filter(|&&d| d == i).count();
            assert!((2..=3).contains(&seen), "index {i} drawn {seen} times");
        }
        for pass in draws.chunks(5) {
            let mut p = pass.to_vec();
            p.sort_unstable();
            p.dedup();
            assert_eq!(p.len(), pass.len());
        }
    }

    #[test]
    fn rejects_impossible_requests() {
        let labels = labels(&[("A", 2), ("B", 2)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            balanced_batches(&labels, 3, 1, 1, &mut rng),
            Err(DatasetError::TooFewCategories { requested: 3, available: 2 })
        );
        assert!(balanced_batches(&labels, 1, 0, 1, &mut rng).is_err());
    }

    #[test]
    fn epoch_arithmetic() {
        assert_eq!(batches_per_epoch(10, 2, 2), 3);
        assert_eq!(batches_per_epoch(8, 2, 2), 2);
    }
}
