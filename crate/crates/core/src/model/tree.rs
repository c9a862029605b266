//! Axis-aligned binary trees shared by the tree families.
//!
//! A split sends `x[feature] <= threshold` to `left` and everything else to
//! `right`. Node 0 is the root. Leaves carry a family-specific payload.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::FeatureSchema;
use crate::error::{Error, Result};

pub trait LeafPayload: Clone + std::fmt::Debug + PartialEq + Serialize + DeserializeOwned {}
impl<T> LeafPayload for T where T: Clone + std::fmt::Debug + PartialEq + Serialize + DeserializeOwned {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Split {
    pub feature: usize,
    pub threshold: u64,
    pub left: usize,
    pub right: usize,
}

/// Class label at a leaf (dt, rf).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassLeaf {
    pub label: u32,
}

/// Additive raw score at a leaf (xgb).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreLeaf {
    pub value: f64,
}

/// Number of training instances that reached an isolation-tree leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsoLeaf {
    pub size: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node<L> {
    Split(Split),
    Leaf(L),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(deserialize = "L: LeafPayload"))]
pub struct Tree<L> {
    pub nodes: Vec<Node<L>>,
}

/// Inclusive per-feature value intervals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Region {
    pub bounds: Vec<(u64, u64)>,
}

impl Region {
    pub fn full(schema: &FeatureSchema) -> Self {
        Region {
            bounds: (0..schema.len()).map(|i| (0, schema.max_value(i))).collect(),
        }
    }

    /// Splits on `x[feature] <= threshold`; either side may be empty.
    pub fn split(&self, feature: usize, threshold: u64) -> (Option<Region>, Option<Region>) {
        let (lo, hi) = self.bounds[feature];
        let left = (lo <= threshold).then(|| {
            let mut r = self.clone();
            r.bounds[feature].1 = hi.min(threshold);
            r
        });
        let right = (threshold < hi).then(|| {
            let mut r = self.clone();
            r.bounds[feature].0 = lo.max(threshold + 1);
            r
        });
        (left, right)
    }

    pub fn intersect(&self, other: &Region) -> Option<Region> {
        let mut bounds = Vec::with_capacity(self.bounds.len());
        for (&(a_lo, a_hi), &(b_lo, b_hi)) in self.bounds.iter().zip(&other.bounds) {
            let lo = a_lo.max(b_lo);
            let hi = a_hi.min(b_hi);
            if lo > hi {
                return None;
            }
            bounds.push((lo, hi));
        }
        Some(Region { bounds })
    }

    pub fn contains(&self, x: &[u64]) -> bool {
        self.bounds
            .iter()
            .zip(x)
            .all(|(&(lo, hi), &v)| lo <= v && v <= hi)
    }
}

/// A reachable leaf with the region of feature space routed to it.
#[derive(Debug, Clone)]
pub struct LeafRegion {
    pub node: usize,
    pub depth: u32,
    pub region: Region,
}

impl<L: LeafPayload> Tree<L> {
    pub fn leaf(payload: L) -> Self {
        Tree {
            nodes: vec![Node::Leaf(payload)],
        }
    }

    pub(crate) fn validate(
        &self,
        schema: &FeatureSchema,
        path: &str,
        mut check_leaf: impl FnMut(&L, &str) -> Result<()>,
    ) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::invalid(path, "tree has no nodes"));
        }
        let mut parent_seen = vec![false; self.nodes.len()];
        parent_seen[0] = true;
        let mut stack = vec![0usize];
        let mut visited = 0usize;
        while let Some(idx) = stack.pop() {
            visited += 1;
            let node_path = format!("{path}.nodes[{idx}]");
            match &self.nodes[idx] {
                Node::Split(s) => {
                    if s.feature >= schema.len() {
                        return Err(Error::invalid(
                            format!("{node_path}.feature"),
                            format!("feature index {} >= feature count {}", s.feature, schema.len()),
                        ));
                    }
                    let max = schema.max_value(s.feature);
                    if s.threshold > max {
                        return Err(Error::invalid(
                            format!("{node_path}.threshold"),
                            format!("threshold {} outside feature domain [0, {max}]", s.threshold),
                        ));
                    }
                    for (side, child) in [("left", s.left), ("right", s.right)] {
                        if child >= self.nodes.len() {
                            return Err(Error::invalid(
                                format!("{node_path}.{side}"),
                                format!("child index {child} out of range"),
                            ));
                        }
                        if parent_seen[child] {
                            return Err(Error::invalid(
                                format!("{node_path}.{side}"),
                                format!("node {child} is referenced twice (not a tree)"),
                            ));
                        }
                        parent_seen[child] = true;
                        stack.push(child);
                    }
                }
                Node::Leaf(l) => check_leaf(l, &node_path)?,
            }
        }
        if visited != self.nodes.len() {
            return Err(Error::invalid(
                path,
                format!("{} nodes unreachable from the root", self.nodes.len() - visited),
            ));
        }
        Ok(())
    }

    /// Depth of the deepest leaf (a lone leaf has depth 0).
    pub fn depth(&self) -> u32 {
        let mut best = 0;
        let mut stack = vec![(0usize, 0u32)];
        while let Some((idx, d)) = stack.pop() {
            match &self.nodes[idx] {
                Node::Split(s) => {
                    stack.push((s.left, d + 1));
                    stack.push((s.right, d + 1));
                }
                Node::Leaf(_) => best = best.max(d),
            }
        }
        best
    }

    pub fn splits(&self) -> impl Iterator<Item = &Split> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split(s) => Some(s),
            Node::Leaf(_) => None,
        })
    }

    /// Returns the index and depth of the leaf `x` lands in.
    pub fn route(&self, x: &[u64]) -> (usize, u32) {
        let mut idx = 0;
        let mut depth = 0;
        loop {
            match &self.nodes[idx] {
                Node::Split(s) => {
                    idx = if x[s.feature] <= s.threshold { s.left } else { s.right };
                    depth += 1;
                }
                Node::Leaf(_) => return (idx, depth),
            }
        }
    }

    pub fn payload(&self, node: usize) -> &L {
        match &self.nodes[node] {
            Node::Leaf(l) => l,
            Node::Split(_) => panic!("node {node} is not a leaf"),
        }
    }

    pub fn predict(&self, x: &[u64]) -> &L {
        self.payload(self.route(x).0)
    }

    /// All leaves with a non-empty region inside `domain`, in depth-first
    /// left-to-right order.
    pub fn leaf_regions(&self, domain: &Region) -> Vec<LeafRegion> {
        let mut out = Vec::new();
        let mut stack = vec![(0usize, 0u32, domain.clone())];
        while let Some((idx, depth, region)) = stack.pop() {
            match &self.nodes[idx] {
                Node::Split(s) => {
                    let (l, r) = region.split(s.feature, s.threshold);
                    if let Some(r) = r {
                        stack.push((s.right, depth + 1, r));
                    }
                    if let Some(l) = l {
                        stack.push((s.left, depth + 1, l));
                    }
                }
                Node::Leaf(_) => out.push(LeafRegion {
                    node: idx,
                    depth,
                    region,
                }),
            }
        }
        out
    }

    /// Cuts the tree at `max_depth`, replacing each subtree rooted at that
    /// depth by a single leaf built from the subtree's leaf payloads.
    pub fn truncate(&self, max_depth: u32, merge: &impl Fn(&[&L]) -> L) -> Tree<L> {
        let mut nodes = Vec::new();
        self.copy_truncated(0, 0, max_depth, merge, &mut nodes);
        Tree { nodes }
    }

    fn copy_truncated(
        &self,
        idx: usize,
        depth: u32,
        max_depth: u32,
        merge: &impl Fn(&[&L]) -> L,
        out: &mut Vec<Node<L>>,
    ) -> usize {
        let slot = out.len();
        match &self.nodes[idx] {
            Node::Leaf(l) => out.push(Node::Leaf(l.clone())),
            Node::Split(_) if depth >= max_depth => {
                let leaves = self.subtree_leaves(idx);
                out.push(Node::Leaf(merge(&leaves)));
            }
            Node::Split(s) => {
                out.push(Node::Split(*s));
                let left = self.copy_truncated(s.left, depth + 1, max_depth, merge, out);
                let right = self.copy_truncated(s.right, depth + 1, max_depth, merge, out);
                out[slot] = Node::Split(Split { left, right, ..*s });
            }
        }
        slot
    }

    fn subtree_leaves(&self, root: usize) -> Vec<&L> {
        let mut out = Vec::new();
        let mut stack = vec![root];
        while let Some(idx) = stack.pop() {
            match &self.nodes[idx] {
                Node::Split(s) => {
                    stack.push(s.right);
                    stack.push(s.left);
                }
                Node::Leaf(l) => out.push(l),
            }
        }
        out
    }

    /// Node indices in breadth-first order from the root.
    pub fn bfs_order(&self) -> Vec<usize> {
        let mut order = vec![0usize];
        let mut i = 0;
        while i < order.len() {
            if let Node::Split(s) = &self.nodes[order[i]] {
                order.push(s.left);
                order.push(s.right);
            }
            i += 1;
        }
        order
    }
}
