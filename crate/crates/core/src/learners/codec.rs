//! Binary model format.
//!
//! Little-endian throughout, version byte first:
//!
//! ```text
//! u8  version (= 1)
//! u8  kind    (0 = decision tree, 1 = gaussian nb)
//! u64 trained_at
//! u32 n_features
//! tree: u32 node_count, then per node
//!         u8 tag 0 (split): u32 feature, f64 threshold, u32 left, u32 right
//!         u8 tag 1 (leaf):  u32 label
//! nb:   u32 class_count, then per class
//!         u32 label, f64 prior, n_features × f64 mean, n_features × f64 var
//! ```

use thiserror::Error;

use super::nb::{ClassStats, GaussianNb};
use super::tree::{DecisionTree, TreeNode};
use super::{Model, ModelSnapshot};

pub const FORMAT_VERSION: u8 = 1;

#[derive(Debug, Error, PartialEq)]
#[error("model decode failed at byte {offset}: {reason}")]
pub struct DecodeError {
    pub offset: usize,
    pub reason: String,
}

pub(crate) fn encode(model: &Model, trained_at: u64) -> Vec<u8> {
    let mut out = Vec::new();
    out.push(FORMAT_VERSION);
    match model {
        Model::DecisionTree(tree) => {
            out.push(0);
            out.extend(trained_at.to_le_bytes());
            put_u32(&mut out, tree.n_features());
            put_u32(&mut out, tree.nodes().len());
            for node in tree.nodes() {
                match *node {
                    TreeNode::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        out.push(0);
                        put_u32(&mut out, feature);
                        out.extend(threshold.to_le_bytes());
                        put_u32(&mut out, left);
                        put_u32(&mut out, right);
                    }
                    TreeNode::Leaf { label } => {
                        out.push(1);
                        put_u32(&mut out, label);
                    }
                }
            }
        }
        Model::GaussianNb(nb) => {
            out.push(1);
            out.extend(trained_at.to_le_bytes());
            put_u32(&mut out, nb.n_features());
            put_u32(&mut out, nb.classes().len());
            for c in nb.classes() {
                put_u32(&mut out, c.label);
                out.extend(c.prior.to_le_bytes());
                for v in c.mean.iter().chain(&c.var) {
                    out.extend(v.to_le_bytes());
                }
            }
        }
    }
    out
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    let v = u32::try_from(v).expect("model field exceeds u32");
    out.extend(v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, reason: impl Into<String>) -> DecodeError {
        DecodeError {
            offset: self.offset,
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], DecodeError> {
        if self.bytes.len() - self.offset < n {
            return Err(self.err(format!("truncated while reading {what}")));
        }
        let s = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8, DecodeError> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<usize, DecodeError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()) as usize)
    }

    fn u64(&mut self, what: &str) -> Result<u64, DecodeError> {
        let b = self.take(8, what)?;
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64, DecodeError> {
        let b = self.take(8, what)?;
        Ok(f64::from_le_bytes(b.try_into().unwrap()))
    }

    /// Rejects counts that could not possibly fit in the remaining bytes.
    fn count(&mut self, what: &str, min_item_bytes: usize) -> Result<usize, DecodeError> {
        let start = self.offset;
        let n = self.u32(what)?;
        if n.saturating_mul(min_item_bytes) > self.bytes.len() - self.offset {
            return Err(DecodeError {
                offset: start,
                reason: format!("{what} {n} exceeds remaining input"),
            });
        }
        Ok(n)
    }
}

pub(crate) fn decode(bytes: &[u8]) -> Result<ModelSnapshot, DecodeError> {
    let mut r = Reader { bytes, offset: 0 };
    if bytes.is_empty() {
        return Err(r.err("empty input"));
    }
    let version = r.u8("version")?;
    if version != FORMAT_VERSION {
        return Err(DecodeError {
            offset: 0,
            reason: format!("unsupported version {version}"),
        });
    }
    let kind_at = r.offset;
    let kind = r.u8("kind")?;
    let trained_at = r.u64("trained_at")?;
    let n_features = r.u32("n_features")?;
    let body_at = r.offset;
    let model = match kind {
        0 => {
            let n = r.count("node count", 5)?;
            let mut nodes = Vec::with_capacity(n);
            for _ in 0..n {
                let tag_at = r.offset;
                let node = match r.u8("node tag")? {
                    0 => TreeNode::Split {
                        feature: r.u32("feature")?,
                        threshold: r.f64("threshold")?,
                        left: r.u32("left child")?,
                        right: r.u32("right child")?,
                    },
                    1 => TreeNode::Leaf {
                        label: r.u32("label")?,
                    },
                    t => {
                        return Err(DecodeError {
                            offset: tag_at,
                            reason: format!("unknown node tag {t}"),
                        })
                    }
                };
                nodes.push(node);
            }
            let tree = DecisionTree::from_nodes(nodes, n_features).map_err(|e| DecodeError {
                offset: body_at,
                reason: e.to_string(),
            })?;
            Model::DecisionTree(tree)
        }
        1 => {
            let per_class = 12 + 16 * n_features;
            let n = r.count("class count", per_class)?;
            let mut classes = Vec::with_capacity(n);
            for _ in 0..n {
                let label = r.u32("class label")?;
                let prior = r.f64("prior")?;
                let mean = (0..n_features)
                    .map(|_| r.f64("mean"))
                    .collect::<Result<Vec<_>, _>>()?;
                let var = (0..n_features)
                    .map(|_| r.f64("variance"))
                    .collect::<Result<Vec<_>, _>>()?;
                classes.push(ClassStats {
                    label,
                    prior,
                    mean,
                    var,
                });
            }
            let nb = GaussianNb::from_classes(classes, n_features).map_err(|e| DecodeError {
                offset: body_at,
                reason: e.to_string(),
            })?;
            Model::GaussianNb(nb)
        }
        k => {
            return Err(DecodeError {
                offset: kind_at,
                reason: format!("unknown model kind {k}"),
            })
        }
    };
    if r.offset != bytes.len() {
        return Err(r.err(format!("{} trailing bytes", bytes.len() - r.offset)));
    }
    Ok(ModelSnapshot::from_parts(model, trained_at, bytes.len()))
}
