//! Random forest over feature vectors: weighted Gini trees, bootstrap
//! ensembles, top-N ranking, a two-level hierarchical mode and a checksummed
//! binary model format.

mod codec;
mod hierarchy;
mod tree;

use std::collections::BTreeMap;
use std::io;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::CategoryTaxonomy;

pub use codec::{load_model, model_from_bytes, model_to_bytes, save_model, FORMAT_VERSION, MAGIC};
pub use hierarchy::{hierarchical_predict, train_hierarchical, HierarchicalModel};
pub use tree::{Node, Tree};

use tree::{TreeInput, TreeParams};

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("no training samples")]
    EmptyDataset,
    #[error("expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("top-N must lie in 1..={k}, got {n}")]
    InvalidN { n: usize, k: usize },
    #[error("no fine model for group {0}")]
    MissingFineModel(String),
    #[error("label {0:?} is not in the taxonomy")]
    UnknownCategory(String),
    #[error("invalid forest configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot read model {path}: {source}")]
    UnreadableFile { path: PathBuf, source: io::Error },
    #[error("cannot write model {path}: {source}")]
    UnwritableFile { path: PathBuf, source: io::Error },
    #[error("not a model file of format version {FORMAT_VERSION} ({0})")]
    VersionMismatch(String),
    #[error("model file is truncated or corrupted")]
    ChecksumMismatch,
    #[error("malformed model: {0}")]
    MalformedModel(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `None` grows until leaves are pure.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// `None` means `floor(sqrt(d))`.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    /// Balanced inverse-frequency weights; all weights are 1 when off.
    pub class_weighting: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 300,
            max_depth: None,
            min_samples_leaf: 1,
            features_per_split: None,
            bootstrap: true,
            class_weighting: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<(), ForestError> {
        if self.n_trees == 0 {
            return Err(ForestError::InvalidConfig("n_trees must be at least 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(ForestError::InvalidConfig("min_samples_leaf must be at least 1".into()));
        }
        if self.max_depth == Some(0) {
            return Err(ForestError::InvalidConfig("max_depth must be at least 1".into()));
        }
        if self.features_per_split == Some(0) {
            return Err(ForestError::InvalidConfig("features_per_split must be at least 1".into()));
        }
        Ok(())
    }

    fn features_for(&self, d: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (d as f64).sqrt().floor() as usize)
            .clamp(1, d.max(1))
    }
}

/// A trained ensemble. Immutable; safe to share across prediction threads.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomForestModel {
    pub(crate) categories: Vec<String>,
    pub(crate) weights: Vec<f64>,
    pub(crate) trees: Vec<Tree>,
    pub(crate) feature_count: usize,
    pub(crate) seed: u64,
}

/// `N / (K · count_c)` for every category present in `labels`.
pub fn compute_category_weights<S: AsRef<str>>(labels: &[S]) -> Result<BTreeMap<String, f64>, ForestError> {
    if labels.is_empty() {
        return Err(ForestError::EmptyDataset);
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l.as_ref().to_string()).or_insert(0) += 1;
    }
    let n = labels.len() as f64;
    let k = counts.len() as f64;
    Ok(counts
        .into_iter()
        .map(|(c, count)| (c, n / (k * count as f64)))
        .collect())
}

/// Seed of tree `index`: a splitmix64 finalizer over the master seed and the
/// index, so each tree's stream is independent of scheduling.
pub fn tree_seed(master: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(master ^ mix(index))
}

/// Trains a forest. Categories are the distinct labels in lexicographic order.
/// Trees are built in parallel on the current rayon pool; the result does not
/// depend on the pool size.
pub fn train_forest<X, S>(samples: &[X], labels: &[S], config: &ForestConfig) -> Result<RandomForestModel, ForestError>
where
    X: AsRef<[f64]> + Sync,
    S: AsRef<str>,
{
    config.validate()?;
    if samples.is_empty() {
        return Err(ForestError::EmptyDataset);
    }
    if samples.len() != labels.len() {
        return Err(ForestError::DimensionMismatch {
            expected: samples.len(),
            found: labels.len(),
        });
    }
    let d = samples[0].as_ref().len();
    if d == 0 {
        return Err(ForestError::DimensionMismatch { expected: 1, found: 0 });
    }
    if let Some(bad) = samples.iter().find(|s| s.as_ref().len() != d) {
        return Err(ForestError::DimensionMismatch {
            expected: d,
            found: bad.as_ref().len(),
        });
    }

    let weight_map = compute_category_weights(labels)?;
    let categories: Vec<String> = weight_map.keys().cloned().collect();
    let weights: Vec<f64> = if config.class_weighting {
        weight_map.values().copied().collect()
    } else {
        vec![1.0; categories.len()]
    };
    let y: Vec<usize> = labels
        .iter()
        .map(|l| categories.binary_search_by(|c| c.as_str().cmp(l.as_ref())).expect("label was counted"))
        .collect();
    let x: Vec<&[f64]> = samples.iter().map(|s| s.as_ref()).collect();
    let params = TreeParams {
        max_depth: config.max_depth,
        min_samples_leaf: config.min_samples_leaf,
        features_per_split: config.features_for(d),
    };
    let n = x.len();

    let trees: Vec<Tree> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(config.seed, t as u64));
            let mut counts = vec![0u32; n];
            if config.bootstrap {
                for _ in 0..n {
                    counts[rng.random_range(0..n)] += 1;
                }
            } else {
                counts.fill(1);
            }
            let rows: Vec<usize> = (0..n).filter(|&i| counts[i] > 0).collect();
            let input = TreeInput {
                x: &x,
                y: &y,
                counts: &counts,
                class_weights: &weights,
                n_features: d,
            };
            tree::train_tree(&input, rows, &params, &mut rng)
        })
        .collect();

    Ok(RandomForestModel {
        categories,
        weights,
        trees,
        feature_count: d,
        seed: config.seed,
    })
}

impl RandomForestModel {
    /// Assembles a model from parts, checking the structural invariants.
    pub fn from_parts(
        categories: Vec<String>,
        weights: Vec<f64>,
        trees: Vec<Tree>,
        feature_count: usize,
        seed: u64,
    ) -> Result<Self, ForestError> {
        let bad = |m: String| Err(ForestError::MalformedModel(m));
        if categories.is_empty() {
            return bad("no categories".into());
        }
        let mut sorted = categories.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != categories.len() {
            return bad("duplicate category".into());
        }
        if weights.len() != categories.len() || weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return bad("weights must be positive, one per category".into());
        }
        if trees.is_empty() {
            return bad("no trees".into());
        }
        let k = categories.len();
        for (t, tree) in trees.iter().enumerate() {
            let nodes = tree.nodes();
            if nodes.is_empty() {
                return bad(format!("tree {t} is empty"));
            }
            for (i, node) in nodes.iter().enumerate() {
                match node {
                    Node::Leaf(dist) if dist.len() != k => {
                        return bad(format!("tree {t} node {i}: leaf has {} entries", dist.len()))
                    }
                    Node::Leaf(_) => {}
                    Node::Split { feature, left, right, .. } => {
                        let in_range = |c: u32| (c as usize) > i && (c as usize) < nodes.len();
                        if *feature as usize >= feature_count || !in_range(*left) || !in_range(*right) {
                            return bad(format!("tree {t} node {i}: bad split"));
                        }
                    }
                }
            }
        }
        Ok(Self {
            categories,
            weights,
            trees,
            feature_count,
            seed,
        })
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Mean of the leaf distributions, one probability per category.
    pub fn predict_proba(&self, fv: &[f64]) -> Result<Vec<f64>, ForestError> {
        if fv.len() != self.feature_count {
            return Err(ForestError::DimensionMismatch {
                expected: self.feature_count,
                found: fv.len(),
            });
        }
        let mut acc = vec![0.0; self.categories.len()];
        for tree in &self.trees {
            for (a, p) in acc.iter_mut().zip(tree.leaf_for(fv)) {
                *a += p;
            }
        }
        let t = self.trees.len() as f64;
        acc.iter_mut().for_each(|a| *a /= t);
        Ok(acc)
    }

    /// Every category with its probability, ranked by [`CategoryTaxonomy::rank`].
    pub fn predict_ranked(&self, fv: &[f64]) -> Result<Vec<(String, f64)>, ForestError> {
        let probs = self.predict_proba(fv)?;
        let scores = self.categories.iter().cloned().zip(probs).collect();
        Ok(CategoryTaxonomy::standard_ref().rank(scores))
    }

    pub fn predict_topn(&self, fv: &[f64], n: usize) -> Result<Vec<(String, f64)>, ForestError> {
        let k = self.categories.len();
        if n == 0 || n > k {
            return Err(ForestError::InvalidN { n, k });
        }
        let mut ranked = self.predict_ranked(fv)?;
        ranked.truncate(n);
        Ok(ranked)
    }
}
