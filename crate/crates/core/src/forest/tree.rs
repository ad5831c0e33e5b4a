use rand::Rng;

/// One node of a tree arena. Children always sit at higher indices than their
/// parent, so a walk from the root terminates.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    /// Weighted category distribution, sums to 1.
    Leaf(Box<[f64]>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub(crate) nodes: Vec<Node>,
}

impl Tree {
    pub fn from_nodes(nodes: Vec<Node>) -> Self {
        Self { nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf_for(&self, x: &[f64]) -> &[f64] {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf(dist) => return dist,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature as usize] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Growth limits for a single tree.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub features_per_split: usize,
}

/// Training rows for one tree. `counts[i]` is the bootstrap multiplicity of
/// row `i`; rows with count 0 are not passed in at all.
pub(crate) struct TreeInput<'a> {
    pub x: &'a [&'a [f64]],
    pub y: &'a [usize],
    pub counts: &'a [u32],
    pub class_weights: &'a [f64],
    pub n_features: usize,
}

struct Best {
    feature: usize,
    threshold: f64,
    score: f64,
    n_left: usize,
}

/// Greedy CART growth on weighted Gini impurity.
///
/// A split is scored by `Σ wl²/WL + Σ wr²/WR`; maximizing it minimizes the
/// weighted Gini of the children. Any split of an impure node with distinct
/// values is accepted, even with zero gain, so an unlimited tree separates
/// every pair of distinct vectors.
pub(crate) fn train_tree<R: Rng + ?Sized>(
    input: &TreeInput<'_>,
    rows: Vec<usize>,
    params: &TreeParams,
    rng: &mut R,
) -> Tree {
    let k = input.class_weights.len();
    let mut nodes: Vec<Node> = Vec::new();
    let mut features: Vec<usize> = (0..input.n_features).collect();
    let mut buf: Vec<(f64, usize)> = Vec::new();

    // (slot, rows, depth); slot is the arena index the node will occupy.
    nodes.push(Node::Leaf(Box::new([])));
    let mut stack = vec![(0usize, rows, 0usize)];
    while let Some((slot, rows, depth)) = stack.pop() {
        let dist = class_mass(input, &rows, k);
        let n: usize = rows.iter().map(|&r| input.counts[r] as usize).sum();
        let pure = dist.iter().filter(|&&w| w > 0.0).count() <= 1;
        let depth_capped = params.max_depth.is_some_and(|d| depth >= d);
        let split = if pure || depth_capped || n < 2 * params.min_samples_leaf {
            None
        } else {
            find_split(input, &rows, &dist, params, &mut features, &mut buf, rng)
        };

        match split {
            None => nodes[slot] = Node::Leaf(normalize(dist)),
            Some(best) => {
                let (left, right): (Vec<usize>, Vec<usize>) = rows
                    .into_iter()
                    .partition(|&r| input.x[r][best.feature] <= best.threshold);
                debug_assert!(!left.is_empty() && !right.is_empty() && best.n_left > 0);
                let l = nodes.len();
                nodes.push(Node::Leaf(Box::new([])));
                nodes.push(Node::Leaf(Box::new([])));
                nodes[slot] = Node::Split {
                    feature: best.feature as u32,
                    threshold: best.threshold,
                    left: l as u32,
                    right: (l + 1) as u32,
                };
                // Right first so the left subtree is expanded next.
                stack.push((l + 1, right, depth + 1));
                stack.push((l, left, depth + 1));
            }
        }
    }
    Tree { nodes }
}

fn class_mass(input: &TreeInput<'_>, rows: &[usize], k: usize) -> Vec<f64> {
    let mut mass = vec![0.0; k];
    for &r in rows {
        let c = input.y[r];
        mass[c] += input.counts[r] as f64 * input.class_weights[c];
    }
    mass
}

fn normalize(mut dist: Vec<f64>) -> Box<[f64]> {
    let total: f64 = dist.iter().sum();
    dist.iter_mut().for_each(|w| *w /= total);
    dist.into_boxed_slice()
}

fn find_split<R: Rng + ?Sized>(
    input: &TreeInput<'_>,
    rows: &[usize],
    total: &[f64],
    params: &TreeParams,
    features: &mut [usize],
    buf: &mut Vec<(f64, usize)>,
    rng: &mut R,
) -> Option<Best> {
    let k = total.len();
    let n_total: usize = rows.iter().map(|&r| input.counts[r] as usize).sum();
    let mtry = params.features_per_split.clamp(1, features.len());
    let mut left = vec![0.0; k];
    let mut best: Option<Best> = None;

    // Lazy Fisher-Yates: the first `mtry` positions are the drawn candidates.
    // Beyond them, features are tried only until some valid split appears.
    for pos in 0..features.len() {
        if pos >= mtry && best.is_some() {
            break;
        }
        let j = rng.random_range(pos..features.len());
        features.swap(pos, j);
        let f = features[pos];

        buf.clear();
        buf.extend(rows.iter().map(|&r| (input.x[r][f], r)));
        buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        if buf[0].0 == buf[buf.len() - 1].0 {
            continue;
        }

        left.iter_mut().for_each(|w| *w = 0.0);
        let mut wl = 0.0;
        let mut n_left = 0usize;
        for i in 0..buf.len() - 1 {
            let (v, r) = buf[i];
            let c = input.y[r];
            let w = input.counts[r] as f64 * input.class_weights[c];
            left[c] += w;
            wl += w;
            n_left += input.counts[r] as usize;
            let next = buf[i + 1].0;
            if next == v {
                continue;
            }
            let n_right = n_total - n_left;
            if n_left < params.min_samples_leaf || n_right < params.min_samples_leaf {
                continue;
            }
            let wr: f64 = total.iter().sum::<f64>() - wl;
            let mut sl = 0.0;
            let mut sr = 0.0;
            for c in 0..k {
                sl += left[c] * left[c];
                let rc = total[c] - left[c];
                sr += rc * rc;
            }
            let score = sl / wl + sr / wr;
            if best.as_ref().is_none_or(|b| score > b.score) {
                let mid = v + (next - v) / 2.0;
                let threshold = if mid < next { mid } else { v };
                best = Some(Best {
                    feature: f,
                    threshold,
                    score,
                    n_left,
                });
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grow(xs: &[Vec<f64>], ys: &[usize], k: usize, params: TreeParams) -> Tree {
        let x: Vec<&[f64]> = xs.iter().map(|v| v.as_slice()).collect();
        let counts = vec![1u32; xs.len()];
        let weights = vec![1.0; k];
        let input = TreeInput {
            x: &x,
            y: ys,
            counts: &counts,
            class_weights: &weights,
            n_features: xs[0].len(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        train_tree(&input, (0..xs.len()).collect(), &params, &mut rng)
    }

    const DEEP: TreeParams = TreeParams {
        max_depth: None,
        min_samples_leaf: 1,
        features_per_split: 1,
    };

    #[test]
    fn one_sample_is_a_pure_leaf() {
        let t = grow(&[vec![0.3, 0.4]], &[1], 3, DEEP);
        assert_eq!(t.nodes, vec![Node::Leaf(vec![0.0, 1.0, 0.0].into_boxed_slice())]);
    }

    #[test]
    fn two_samples_split_once() {
        let t = grow(&[vec![5.0, 1.0], vec![5.0, 2.0]], &[0, 1], 2, DEEP);
        assert_eq!(t.depth(), 1);
        match &t.nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 1);
                assert_eq!(*threshold, 1.5);
            }
            other => panic!("expected split, got {other:?}"),
        }
        assert_eq!(t.leaf_for(&[5.0, 1.0]), &[1.0, 0.0]);
        assert_eq!(t.leaf_for(&[5.0, 2.0]), &[0.0, 1.0]);
    }

    #[test]
    fn shatters_interleaved_1d_points() {
        // Labels alternate in runs so no single threshold suffices.
        let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let ys: Vec<usize> = (0..20).map(|i| (i / 3) % 2).collect();
        let t = grow(&xs, &ys, 2, DEEP);
        for (x, &y) in xs.iter().zip(&ys) {
            assert_eq!(t.leaf_for(x)[y], 1.0);
        }
    }

    #[test]
    fn depth_cap_holds() {
        let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let ys: Vec<usize> = (0..20).map(|i| i % 2).collect();
        let t = grow(&xs, &ys, 2, TreeParams { max_depth: Some(2), ..DEEP });
        assert!(t.depth() <= 2);
        for node in &t.nodes {
            if let Node::Leaf(d) = node {
                assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn min_samples_leaf_respected() {
        let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let ys: Vec<usize> = vec![0, 1, 0, 0, 0, 0, 0, 0, 0, 1];
        let t = grow(&xs, &ys, 2, TreeParams { min_samples_leaf: 3, ..DEEP });
        let mut leaf_sizes = vec![0usize; t.nodes.len()];
        for x in &xs {
            let leaf = t.leaf_for(x) as *const [f64];
            let idx = t
                .nodes
                .iter()
                .position(|n| matches!(n, Node::Leaf(d) if std::ptr::eq(&**d, leaf)))
                .unwrap();
            leaf_sizes[idx] += 1;
        }
        assert!(leaf_sizes.iter().all(|&s| s == 0 || s >= 3));
    }

    #[test]
    fn constant_features_make_a_mixed_leaf() {
        let t = grow(&[vec![1.0], vec![1.0], vec![1.0]], &[0, 1, 1], 2, DEEP);
        assert_eq!(t.nodes.len(), 1);
        let d = t.leaf_for(&[1.0]);
        assert!((d[0] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn class_weights_shift_leaf_mass() {
        let xs = [vec![0.0], vec![0.0], vec![0.0], vec![0.0]];
        let ys = [0, 0, 0, 1];
        let x: Vec<&[f64]> = xs.iter().map(|v| v.as_slice()).collect();
        let input = TreeInput {
            x: &x,
            y: &ys,
            counts: &[1, 1, 1, 1],
            class_weights: &[4.0 / 6.0, 2.0],
            n_features: 1,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = train_tree(&input, vec![0, 1, 2, 3], &DEEP, &mut rng);
        let d = t.leaf_for(&[0.0]);
        assert!((d[0] - 0.5).abs() < 1e-12 && (d[1] - 0.5).abs() < 1e-12);
    }
}
