//! The client's decision function over full-node answers and the oracle's response.

use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::hash::Digest;
use crate::statement::{ChainView, RootEntry};

/// A full node's reply. `None` is the node's explicit "unknown" answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeAnswer {
    pub count: Option<u64>,
    pub roots: Vec<(u64, Option<Digest>)>,
}

impl NodeAnswer {
    /// What an unreachable node amounts to.
    pub fn unavailable(indices: &[u64]) -> Self {
        Self { count: None, roots: indices.iter().map(|&i| (i, None)).collect() }
    }

    fn resolved(&self, indices: &[u64]) -> Option<(u64, Vec<RootEntry>)> {
        let count = self.count?;
        if self.roots.len() != indices.len() {
            return None;
        }
        let roots = self
            .roots
            .iter()
            .zip(indices)
            .map(|((i, d), want)| match d {
                Some(d) if i == want => Some(RootEntry { index: *i, digest: *d }),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()?;
        Some((count, roots))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Accept,
    Reject,
    Abort,
}

impl Verdict {
    /// The paper-style bit: 1 for accept, 0 for reject, none for abort.
    pub fn bit(self) -> Option<u8> {
        match self {
            Verdict::Accept => Some(1),
            Verdict::Reject => Some(0),
            Verdict::Abort => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Reason {
    Ok,
    KMismatch,
    RootMismatch,
    ProofInvalid,
    NodeDisagreement,
    NodeBottom,
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reason::Ok => "OK",
            Reason::KMismatch => "K_MISMATCH",
            Reason::RootMismatch => "ROOT_MISMATCH",
            Reason::ProofInvalid => "PROOF_INVALID",
            Reason::NodeDisagreement => "NODE_DISAGREEMENT",
            Reason::NodeBottom => "NODE_BOTTOM",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Decision {
    pub verdict: Verdict,
    pub reason: Reason,
}

impl Decision {
    pub const fn new(verdict: Verdict, reason: Reason) -> Self {
        Self { verdict, reason }
    }

    pub const ACCEPT: Decision = Decision::new(Verdict::Accept, Reason::Ok);
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}({})", self.verdict, self.reason)
    }
}

/// Answers are consumed in configuration order, so the outcome does not depend on arrival
/// order. The proof check runs last and only if everything before it passed.
pub fn decide(view: &ChainView, answers: &[NodeAnswer], proof_valid: impl FnOnce() -> bool) -> Decision {
    let indices = view.indices();
    let mut agreed: Option<(u64, Vec<RootEntry>)> = None;
    for a in answers {
        let Some(resolved) = a.resolved(&indices) else {
            return Decision::new(Verdict::Abort, Reason::NodeBottom);
        };
        match &agreed {
            None => agreed = Some(resolved),
            Some(prev) if *prev != resolved => {
                return Decision::new(Verdict::Abort, Reason::NodeDisagreement)
            }
            Some(_) => {}
        }
    }
    let Some((k, roots)) = agreed else {
        return Decision::new(Verdict::Abort, Reason::NodeBottom);
    };
    if k != view.k {
        return Decision::new(Verdict::Reject, Reason::KMismatch);
    }
    if roots != view.roots {
        return Decision::new(Verdict::Reject, Reason::RootMismatch);
    }
    if !proof_valid() {
        return Decision::new(Verdict::Reject, Reason::ProofInvalid);
    }
    Decision::ACCEPT
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldElement;
    use crate::hash::hash_elements;
    use alloc::vec;

    fn d(i: u64) -> Digest {
        hash_elements(&[FieldElement::new(i)])
    }

    fn view() -> ChainView {
        ChainView { roots: vec![RootEntry { index: 2, digest: d(2) }, RootEntry { index: 5, digest: d(5) }], k: 7 }
    }

    fn honest() -> NodeAnswer {
        NodeAnswer { count: Some(7), roots: vec![(2, Some(d(2))), (5, Some(d(5)))] }
    }

    #[test]
    fn taxonomy() {
        assert_eq!(decide(&view(), &[honest(), honest()], || true), Decision::ACCEPT);
        assert_eq!(decide(&view(), &[honest(), honest()], || false).reason, Reason::ProofInvalid);

        let mut wrong = honest();
        wrong.count = Some(8);
        assert_eq!(decide(&view(), &[honest(), wrong.clone()], || true).reason, Reason::NodeDisagreement);
        assert_eq!(decide(&view(), &[wrong.clone(), wrong], || true).reason, Reason::KMismatch);

        let down = NodeAnswer::unavailable(&[2, 5]);
        assert_eq!(decide(&view(), &[honest(), down], || true), Decision::new(Verdict::Abort, Reason::NodeBottom));

        let mut bad_root = honest();
        bad_root.roots[1].1 = Some(d(6));
        assert_eq!(decide(&view(), &[bad_root.clone(), bad_root], || true).reason, Reason::RootMismatch);
    }

    #[test]
    fn proof_not_checked_after_abort() {
        let mut called = false;
        let r = decide(&view(), &[], || {
            called = true;
            true
        });
        assert_eq!(r.verdict, Verdict::Abort);
        assert!(!called);
    }
}
