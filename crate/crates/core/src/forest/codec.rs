//! Model file layout, little-endian throughout:
//!
//! ```text
//! "APCF" | u32 version | u64 payload_len | payload | sha256(payload)
//! payload = u32 feature_count, u64 seed,
//!           u32 K, K × (u32 len, utf-8 bytes), K × f64 weight,
//!           u32 n_trees, per tree: u32 n_nodes, nodes
//! node    = u8 0, u32 feature, f64 threshold, u32 left, u32 right
//!         | u8 1, K × f64
//! ```

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{ForestError, Node, RandomForestModel, Tree};

pub const MAGIC: [u8; 4] = *b"APCF";
pub const FORMAT_VERSION: u32 = 1;

const HEADER_LEN: usize = 4 + 4 + 8;
const DIGEST_LEN: usize = 32;

pub fn model_to_bytes(model: &RandomForestModel) -> Vec<u8> {
    let mut p = Vec::new();
    p.extend((model.feature_count as u32).to_le_bytes());
    p.extend(model.seed.to_le_bytes());
    p.extend((model.categories.len() as u32).to_le_bytes());
    for c in &model.categories {
        p.extend((c.len() as u32).to_le_bytes());
        p.extend(c.as_bytes());
    }
    for w in &model.weights {
        p.extend(w.to_le_bytes());
    }
    p.extend((model.trees.len() as u32).to_le_bytes());
    for tree in &model.trees {
        p.extend((tree.nodes.len() as u32).to_le_bytes());
        for node in &tree.nodes {
            match node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    p.push(0);
                    p.extend(feature.to_le_bytes());
                    p.extend(threshold.to_le_bytes());
                    p.extend(left.to_le_bytes());
                    p.extend(right.to_le_bytes());
                }
                Node::Leaf(dist) => {
                    p.push(1);
                    for v in dist.iter() {
                        p.extend(v.to_le_bytes());
                    }
                }
            }
        }
    }

    let mut out = Vec::with_capacity(HEADER_LEN + p.len() + DIGEST_LEN);
    out.extend(MAGIC);
    out.extend(FORMAT_VERSION.to_le_bytes());
    out.extend((p.len() as u64).to_le_bytes());
    out.extend(&p);
    out.extend(Sha256::digest(&p).as_slice());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ForestError> {
        if self.buf.len() < n {
            return Err(ForestError::MalformedModel("payload ends early".into()));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, ForestError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, ForestError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ForestError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, ForestError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// Guards allocations against counts larger than the remaining bytes.
    fn count(&mut self, min_item_len: usize) -> Result<usize, ForestError> {
        let n = self.u32()? as usize;
        if n.saturating_mul(min_item_len) > self.buf.len() {
            return Err(ForestError::MalformedModel(format!("count {n} exceeds payload")));
        }
        Ok(n)
    }
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<RandomForestModel, ForestError> {
    if bytes.len() >= 4 && bytes[..4] != MAGIC {
        return Err(ForestError::VersionMismatch("bad magic bytes".into()));
    }
    if bytes.len() < HEADER_LEN + DIGEST_LEN {
        return Err(ForestError::ChecksumMismatch);
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(ForestError::VersionMismatch(format!("found version {version}")));
    }
    let payload_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    if payload_len != (bytes.len() - HEADER_LEN - DIGEST_LEN) as u64 {
        return Err(ForestError::ChecksumMismatch);
    }
    let (payload, digest) = bytes[HEADER_LEN..].split_at(payload_len as usize);
    if Sha256::digest(payload).as_slice() != digest {
        return Err(ForestError::ChecksumMismatch);
    }

    let mut r = Reader { buf: payload };
    let feature_count = r.u32()? as usize;
    let seed = r.u64()?;
    let k = r.count(4)?;
    let mut categories = Vec::with_capacity(k);
    for _ in 0..k {
        let len = r.count(1)?;
        let s = std::str::from_utf8(r.take(len)?)
            .map_err(|_| ForestError::MalformedModel("category is not UTF-8".into()))?;
        categories.push(s.to_string());
    }
    let weights = (0..k).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
    let n_trees = r.count(4)?;
    let mut trees = Vec::with_capacity(n_trees);
    for _ in 0..n_trees {
        let n_nodes = r.count(1)?;
        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            nodes.push(match r.u8()? {
                0 => Node::Split {
                    feature: r.u32()?,
                    threshold: r.f64()?,
                    left: r.u32()?,
                    right: r.u32()?,
                },
                1 => Node::Leaf(
                    (0..k)
                        .map(|_| r.f64())
                        .collect::<Result<Vec<_>, _>>()?
                        .into_boxed_slice(),
                ),
                tag => return Err(ForestError::MalformedModel(format!("unknown node tag {tag}"))),
            });
        }
        trees.push(Tree::from_nodes(nodes));
    }
    if !r.buf.is_empty() {
        return Err(ForestError::MalformedModel("trailing bytes after trees".into()));
    }
    RandomForestModel::from_parts(categories, weights, trees, feature_count, seed)
}

pub fn save_model(model: &RandomForestModel, path: &Path) -> Result<(), ForestError> {
    fs::write(path, model_to_bytes(model)).map_err(|source| ForestError::UnwritableFile {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<RandomForestModel, ForestError> {
    let bytes = fs::read(path).map_err(|source| ForestError::UnreadableFile {
        path: path.to_path_buf(),
        source,
    })?;
    model_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::super::{train_forest, ForestConfig};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy() -> RandomForestModel {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<Vec<f64>> = (0..40).map(|_| (0..6).map(|_| rng.random::<f64>()).collect()).collect();
        let ys: Vec<&str> = (0..40).map(|i| ["DRAW", "PHOTO", "TEXT_T"][i % 3]).collect();
        train_forest(&xs, &ys, &ForestConfig { n_trees: 7, seed: 2, ..Default::default() }).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let m = toy();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.apcf");
        save_model(&m, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, m);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-0.5..1.5)).collect();
            let a = m.predict_proba(&x).unwrap();
            let b = back.predict_proba(&x).unwrap();
            assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn truncation_and_corruption() {
        let bytes = model_to_bytes(&toy());
        for cut in [bytes.len() - 1, bytes.len() / 2, 10, 4] {
            assert!(matches!(model_from_bytes(&bytes[..cut]), Err(ForestError::ChecksumMismatch)));
        }
        let mut flipped = bytes.clone();
        flipped[40] ^= 0x10;
        assert!(matches!(model_from_bytes(&flipped), Err(ForestError::ChecksumMismatch)));
    }

    #[test]
    fn wrong_magic_or_version() {
        let mut bytes = model_to_bytes(&toy());
        bytes[0] = b'X';
        assert!(matches!(model_from_bytes(&bytes), Err(ForestError::VersionMismatch(_))));
        let mut bytes = model_to_bytes(&toy());
        bytes[4] = 2;
        assert!(matches!(model_from_bytes(&bytes), Err(ForestError::VersionMismatch(_))));
    }

    #[test]
    fn unreadable_path() {
        let r = load_model(Path::new("/nonexistent/dir/model.apcf"));
        assert!(matches!(r, Err(ForestError::UnreadableFile { .. })));
    }
}
