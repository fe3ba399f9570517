//! Binary Merkle trees over transaction digests.
//!
//! Leaves are wrapped once under the leaf tag before entering level 0. An odd node at the right
//! edge of a level is promoted by hashing it alone under the lone tag.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::hash::{hash_leaf, hash_lone, hash_node, Digest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum MerkleError {
    #[error("cannot build a tree without leaves")]
    EmptyLeafSet,
    #[error("leaf index {index} out of range for {len} leaves")]
    IndexOutOfRange { index: usize, len: usize },
}

/// Opening of one leaf. `None` marks a level where the node had no right sibling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MerklePath {
    pub leaf_index: u64,
    pub siblings: Vec<Option<Digest>>,
}

impl MerklePath {
    pub fn depth(&self) -> usize {
        self.siblings.len()
    }

    /// Root implied by folding `leaf` up this path, or `None` if the path is malformed
    /// (a right child without a left sibling, or index bits beyond the path length).
    pub fn root_from(&self, leaf: &Digest) -> Option<Digest> {
        let mut cur = hash_leaf(leaf);
        let mut idx = self.leaf_index;
        for sib in &self.siblings {
            cur = match (idx & 1, sib) {
                (0, Some(s)) => hash_node(&cur, s),
                (0, None) => hash_lone(&cur),
                (_, Some(s)) => hash_node(s, &cur),
                (_, None) => return None,
            };
            idx >>= 1;
        }
        (idx == 0).then_some(cur)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxTree {
    leaves: Vec<Digest>,
    levels: Vec<Vec<Digest>>,
    root: Digest,
}

impl TxTree {
    pub fn leaves(&self) -> &[Digest] {
        &self.leaves
    }

    /// `levels()[0]` holds the leaf nodes, the last level holds only the root.
    pub fn levels(&self) -> &[Vec<Digest>] {
        &self.levels
    }

    pub fn root(&self) -> Digest {
        self.root
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }
}

pub fn build_tree(leaves: &[Digest]) -> Result<TxTree, MerkleError> {
    if leaves.is_empty() {
        return Err(MerkleError::EmptyLeafSet);
    }
    let mut levels = Vec::new();
    levels.push(leaves.iter().map(hash_leaf).collect::<Vec<_>>());
    while levels.last().map_or(0, Vec::len) > 1 {
        let prev = levels.last().expect("nonempty");
        let next = prev
            .chunks(2)
            .map(|pair| match pair {
                [l, r] => hash_node(l, r),
                [l] => hash_lone(l),
                _ => unreachable!(),
            })
            .collect();
        levels.push(next);
    }
    let root = levels.last().expect("nonempty")[0];
    Ok(TxTree { leaves: leaves.to_vec(), levels, root })
}

pub fn open(tree: &TxTree, index: usize) -> Result<MerklePath, MerkleError> {
    if index >= tree.leaves.len() {
        return Err(MerkleError::IndexOutOfRange { index, len: tree.leaves.len() });
    }
    let mut siblings = Vec::with_capacity(tree.depth());
    let mut idx = index;
    for level in &tree.levels[..tree.depth()] {
        siblings.push(level.get(idx ^ 1).copied());
        idx >>= 1;
    }
    Ok(MerklePath { leaf_index: index as u64, siblings })
}

pub fn verify_path(root: &Digest, leaf: &Digest, path: &MerklePath) -> bool {
    path.root_from(leaf).as_ref() == Some(root)
}

/// Depth of a tree with `n` leaves: ceil(log2 n).
pub fn depth_for(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldElement;
    use crate::hash::hash_elements;

    fn leaf(i: u64) -> Digest {
        hash_elements(&[FieldElement::new(i)])
    }

    fn leaves(n: usize) -> Vec<Digest> {
        (0..n as u64).map(leaf).collect()
    }

    #[test]
    fn single_leaf() {
        let t = build_tree(&[leaf(0)]).unwrap();
        assert_eq!(t.root(), hash_leaf(&leaf(0)));
        assert!(open(&t, 0).unwrap().siblings.is_empty());
        assert_eq!(build_tree(&[]), Err(MerkleError::EmptyLeafSet));
    }

    #[test]
    fn four_leaves_by_hand() {
        let l = leaves(4);
        let n: Vec<Digest> = l.iter().map(hash_leaf).collect();
        let t = build_tree(&l).unwrap();
        assert_eq!(t.root(), hash_node(&hash_node(&n[0], &n[1]), &hash_node(&n[2], &n[3])));
        let p = open(&t, 2).unwrap();
        assert_eq!(p.siblings, [Some(n[3]), Some(hash_node(&n[0], &n[1]))]);
        assert_eq!(open(&t, 4), Err(MerkleError::IndexOutOfRange { index: 4, len: 4 }));
    }

    #[test]
    fn three_leaves_promote_lone_child() {
        let l = leaves(3);
        let t = build_tree(&l).unwrap();
        assert_eq!(t.levels()[1][1], hash_lone(&hash_leaf(&l[2])));
        assert_eq!(open(&t, 2).unwrap().siblings[0], None);
    }

    #[test]
    fn round_trip_all_sizes() {
        for n in 1..=64 {
            let l = leaves(n);
            let t = build_tree(&l).unwrap();
            assert_eq!(t.depth(), depth_for(n));
            for (i, leaf) in l.iter().enumerate() {
                let p = open(&t, i).unwrap();
                assert_eq!(p.depth(), depth_for(n));
                assert!(verify_path(&t.root(), leaf, &p), "n={n} i={i}");
            }
        }
    }

    #[test]
    fn wrong_index_on_eight_leaves() {
        let l = leaves(8);
        let t = build_tree(&l).unwrap();
        for (i, leaf) in l.iter().enumerate() {
            let p = open(&t, i).unwrap();
            for j in 0..16u64 {
                let q = MerklePath { leaf_index: j, ..p.clone() };
                assert_eq!(verify_path(&t.root(), leaf, &q), j == i as u64, "i={i} j={j}");
            }
        }
    }

    #[test]
    fn tamper_sensitivity() {
        for n in 1..=16 {
            let l = leaves(n);
            let t = build_tree(&l).unwrap();
            for (i, leaf) in l.iter().enumerate() {
                let p = open(&t, i).unwrap();
                for pos in 0..4 {
                    assert!(!verify_path(&t.root(), &leaf.perturbed(pos, 1), &p));
                    assert!(!verify_path(&t.root().perturbed(pos, 1), leaf, &p));
                    for s in 0..p.depth() {
                        let mut q = p.clone();
                        match &mut q.siblings[s] {
                            Some(d) => *d = d.perturbed(pos, 1),
                            // A missing sibling cannot be nudged; fabricate one instead.
                            slot @ None => *slot = Some(Digest::ZERO),
                        }
                        assert!(!verify_path(&t.root(), leaf, &q));
                    }
                }
            }
        }
    }
}
