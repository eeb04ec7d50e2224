//! Binary full ordered trees whose nodes carry label sets.
//!
//! Node ids are dense and assigned in preorder, so every parent has a smaller
//! id than its children and a reverse id sweep is a valid bottom-up order.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;

use serde::Deserialize;

use crate::error::{Error, Result};

pub(crate) const NONE: u32 = u32::MAX;

/// Dense node identifier, equal to the preorder rank of the node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Index of a label in the tree alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabelId(pub u32);

/// Toggle `label` on `node`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Relabeling {
    pub node: NodeId,
    pub label: LabelId,
}

/// A pair `<l : n>` stating that node `n` carries label `l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabelSingleton {
    pub label: LabelId,
    pub node: NodeId,
}

/// The set of singletons describing a labeling.
pub type LabelingAssignment = BTreeSet<LabelSingleton>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledTree {
    alphabet: Vec<String>,
    kids: Vec<[u32; 2]>,
    parent: Vec<u32>,
    labels: Vec<u32>,
    ext_ids: Vec<i64>,
}

impl LabeledTree {
    /// A single unlabeled leaf.
    pub fn leaf(alphabet: Vec<String>) -> Self {
        Self::from_kids(alphabet, &[None], 0).expect("a single leaf is a full tree")
    }

    /// Builds a tree from an arbitrary node numbering; nodes are renumbered in
    /// preorder and external ids are set to the new dense ids.
    pub fn from_kids(alphabet: Vec<String>, kids: &[Option<[usize; 2]>], root: usize) -> Result<Self> {
        if alphabet.len() > 32 {
            return Err(Error::Malformed("at most 32 labels are supported".into()));
        }
        let n = kids.len();
        if root >= n {
            return Err(Error::Malformed("root out of range".into()));
        }
        let mut order = Vec::with_capacity(n);
        let mut rank = vec![NONE; n];
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            if rank[v] != NONE {
                return Err(Error::Malformed(format!("node {v} is reachable twice")));
            }
            rank[v] = order.len() as u32;
            order.push(v);
            if let Some([a, b]) = kids[v] {
                if a >= n || b >= n {
                    return Err(Error::Malformed(format!("child of {v} out of range")));
                }
                stack.push(b);
                stack.push(a);
            }
        }
        if order.len() != n {
            return Err(Error::Malformed("some nodes are unreachable from the root".into()));
        }
        let mut t = LabeledTree {
            alphabet,
            kids: vec![[NONE, NONE]; n],
            parent: vec![NONE; n],
            labels: vec![0; n],
            ext_ids: (0..n as i64).collect(),
        };
        for (new, &old) in order.iter().enumerate() {
            if let Some([a, b]) = kids[old] {
                let (a, b) = (rank[a], rank[b]);
                t.kids[new] = [a, b];
                t.parent[a as usize] = new as u32;
                t.parent[b as usize] = new as u32;
            }
        }
        Ok(t)
    }

    /// Trusted constructor for generated trees already numbered in preorder.
    pub(crate) fn from_raw(alphabet: Vec<String>, kids: Vec<[u32; 2]>, parent: Vec<u32>, labels: Vec<u32>) -> Self {
        let n = kids.len();
        debug_assert!((1..n).all(|v| (parent[v] as usize) < v));
        LabeledTree { alphabet, kids, parent, labels, ext_ids: (0..n as i64).collect() }
    }

    /// Complete binary tree of the given height (`2^(h+1) - 1` nodes).
    pub fn complete(height: u32, alphabet: Vec<String>) -> Self {
        let n = (1usize << (height + 1)) - 1;
        let kids: Vec<_> = (0..n)
            .map(|i| if 2 * i + 2 < n { Some([2 * i + 1, 2 * i + 2]) } else { None })
            .collect();
        Self::from_kids(alphabet, &kids, 0).expect("heap layout is a full tree")
    }

    /// Left-leaning caterpillar: a spine of `internal` nodes, each with a leaf
    /// as its right child, ending in a leaf. Has `2 * internal + 1` nodes.
    pub fn caterpillar(internal: usize, alphabet: Vec<String>) -> Self {
        let n = 2 * internal + 1;
        let mut kids = vec![None; n];
        for i in 0..internal {
            kids[2 * i] = Some([2 * i + 2, 2 * i + 1]);
        }
        Self::from_kids(alphabet, &kids, 0).expect("caterpillar is a full tree")
    }

    pub fn len(&self) -> usize {
        self.kids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kids.is_empty()
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn nodes(&self) -> impl DoubleEndedIterator<Item = NodeId> + ExactSizeIterator {
        (0..self.kids.len() as u32).map(NodeId)
    }

    pub fn children(&self, n: NodeId) -> Option<(NodeId, NodeId)> {
        let [a, b] = self.kids[n.index()];
        (a != NONE).then_some((NodeId(a), NodeId(b)))
    }

    pub fn is_leaf(&self, n: NodeId) -> bool {
        self.kids[n.index()][0] == NONE
    }

    pub fn parent(&self, n: NodeId) -> Option<NodeId> {
        let p = self.parent[n.index()];
        (p != NONE).then_some(NodeId(p))
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn label_id(&self, name: &str) -> Option<LabelId> {
        self.alphabet.iter().position(|l| l == name).map(|i| LabelId(i as u32))
    }

    /// Label set of `n` as a bitmask over the alphabet.
    pub fn label_mask(&self, n: NodeId) -> u32 {
        self.labels[n.index()]
    }

    pub fn has_label(&self, n: NodeId, l: LabelId) -> bool {
        self.labels[n.index()] >> l.0 & 1 == 1
    }

    pub fn set_label_mask(&mut self, n: NodeId, mask: u32) {
        debug_assert!(self.alphabet.len() == 32 || mask >> self.alphabet.len() == 0);
        self.labels[n.index()] = mask;
    }

    pub fn clear_labels(&mut self) {
        self.labels.iter_mut().for_each(|m| *m = 0);
    }

    /// The same tree over a larger alphabet; the new labels are carried by no node.
    pub fn with_extra_labels(&self, names: &[String]) -> Result<Self> {
        let mut t = self.clone();
        for n in names {
            if t.label_id(n).is_some() {
                return Err(Error::Malformed(format!("label {n:?} is already in the alphabet")));
            }
            t.alphabet.push(n.clone());
        }
        if t.alphabet.len() > 32 {
            return Err(Error::Malformed("at most 32 labels are supported".into()));
        }
        Ok(t)
    }

    /// The same shape with every label set empty.
    pub fn unlabeled(&self) -> Self {
        let mut t = self.clone();
        t.clear_labels();
        t
    }

    pub fn ext_id(&self, n: NodeId) -> i64 {
        self.ext_ids[n.index()]
    }

    pub fn set_ext_ids(&mut self, ids: Vec<i64>) -> Result<()> {
        if ids.len() != self.len() {
            return Err(Error::Malformed("wrong number of external ids".into()));
        }
        let mut seen = HashSet::new();
        for &id in &ids {
            if !seen.insert(id) {
                return Err(Error::DuplicateId(id));
            }
        }
        self.ext_ids = ids;
        Ok(())
    }

    pub fn node_by_ext_id(&self, id: i64) -> Option<NodeId> {
        self.ext_ids.iter().position(|&e| e == id).map(|i| NodeId(i as u32))
    }

    /// Length of the longest root-to-leaf path, counted in edges.
    pub fn height(&self) -> usize {
        let mut depth = vec![0usize; self.len()];
        let mut h = 0;
        for v in 1..self.len() {
            depth[v] = depth[self.parent[v] as usize] + 1;
            h = h.max(depth[v]);
        }
        h
    }

    /// Number of nodes in each subtree.
    pub fn subtree_sizes(&self) -> Vec<u32> {
        let mut size = vec![1u32; self.len()];
        for v in (1..self.len()).rev() {
            size[self.parent[v] as usize] += size[v];
        }
        size
    }

    pub fn check_relabel(&self, r: Relabeling) -> Result<()> {
        if r.node.index() >= self.len() {
            return Err(Error::UnknownNode(r.node.0 as i64));
        }
        if r.label.0 as usize >= self.alphabet.len() {
            return Err(Error::UnknownLabel(format!("#{}", r.label.0)));
        }
        Ok(())
    }

    /// Toggles the label of the relabeling on its node.
    pub fn apply_relabel(&mut self, r: Relabeling) -> Result<()> {
        self.check_relabel(r)?;
        self.labels[r.node.index()] ^= 1 << r.label.0;
        Ok(())
    }

    pub fn labeling_to_assignment(&self) -> LabelingAssignment {
        let mut out = BTreeSet::new();
        for n in self.nodes() {
            let mut m = self.labels[n.index()];
            while m != 0 {
                let l = m.trailing_zeros();
                out.insert(LabelSingleton { label: LabelId(l), node: n });
                m &= m - 1;
            }
        }
        out
    }

    /// Replaces the labeling by the one described by `alpha`.
    pub fn set_labeling(&mut self, alpha: &LabelingAssignment) -> Result<()> {
        let mut labels = vec![0u32; self.len()];
        for s in alpha {
            self.check_relabel(Relabeling { node: s.node, label: s.label })?;
            labels[s.node.index()] |= 1 << s.label.0;
        }
        self.labels = labels;
        Ok(())
    }

    /// Parses the JSON tree format, assigning dense ids in document order.
    pub fn parse(text: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        de.disable_recursion_limit();
        let doc = TreeDoc::deserialize(&mut de).map_err(|e| Error::Malformed(e.to_string()))?;
        de.end().map_err(|e| Error::Malformed(e.to_string()))?;
        let tree = Self::from_doc(&doc);
        // Nested documents are dropped iteratively to keep deep trees off the stack.
        let TreeDoc { root, .. } = doc;
        let mut pending = vec![root];
        while let Some(mut node) = pending.pop() {
            pending.extend(node.children.take().into_iter().flatten());
        }
        tree
    }

    fn from_doc(doc: &TreeDoc) -> Result<Self> {
        let alphabet = doc.alphabet.clone();
        let mut seen = HashSet::new();
        for l in &alphabet {
            if !seen.insert(l.as_str()) {
                return Err(Error::Malformed(format!("label {l:?} repeated in alphabet")));
            }
        }
        if alphabet.len() > 32 {
            return Err(Error::Malformed("at most 32 labels are supported".into()));
        }
        let mut t = LabeledTree {
            alphabet,
            kids: Vec::new(),
            parent: Vec::new(),
            labels: Vec::new(),
            ext_ids: Vec::new(),
        };
        let mut ids = HashSet::new();
        // (node document, parent id, slot in parent)
        let mut stack: Vec<(&NodeDoc, u32, usize)> = vec![(&doc.root, NONE, 0)];
        while let Some((nd, parent, slot)) = stack.pop() {
            let v = t.kids.len() as u32;
            if !ids.insert(nd.id) {
                return Err(Error::DuplicateId(nd.id));
            }
            let mut mask = 0u32;
            for l in &nd.labels {
                let i = t.label_id(l).ok_or_else(|| Error::UnknownLabel(l.clone()))?;
                if mask >> i.0 & 1 == 1 {
                    return Err(Error::Malformed(format!("label {l:?} repeated on node {}", nd.id)));
                }
                mask |= 1 << i.0;
            }
            t.kids.push([NONE, NONE]);
            t.parent.push(parent);
            t.labels.push(mask);
            t.ext_ids.push(nd.id);
            if parent != NONE {
                t.kids[parent as usize][slot] = v;
            }
            match nd.children.as_deref() {
                None | Some([]) => {}
                Some([_]) => return Err(Error::OneChild(nd.id)),
                Some([a, b]) => {
                    stack.push((b, v, 1));
                    stack.push((a, v, 0));
                }
                Some(_) => {
                    return Err(Error::Malformed(format!("node {} has more than two children", nd.id)))
                }
            }
        }
        Ok(t)
    }

    /// Canonical single-line JSON serialization, followed by a newline.
    pub fn serialize(&self) -> String {
        let mut out = String::from("{\"alphabet\":[");
        for (i, l) in self.alphabet.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&json_string(l));
        }
        out.push_str("],\"root\":");
        enum Step {
            Open(u32),
            Sep,
            Close,
        }
        let mut stack = vec![Step::Open(0)];
        while let Some(step) = stack.pop() {
            match step {
                Step::Sep => out.push(','),
                Step::Close => out.push_str("]}"),
                Step::Open(v) => {
                    let _ = write!(out, "{{\"id\":{},\"labels\":[", self.ext_ids[v as usize]);
                    let mut first = true;
                    for (i, l) in self.alphabet.iter().enumerate() {
                        if self.labels[v as usize] >> i & 1 == 1 {
                            if !first {
                                out.push(',');
                            }
                            first = false;
                            out.push_str(&json_string(l));
                        }
                    }
                    out.push(']');
                    let [a, b] = self.kids[v as usize];
                    if a == NONE {
                        out.push('}');
                    } else {
                        out.push_str(",\"children\":[");
                        stack.push(Step::Close);
                        stack.push(Step::Open(b));
                        stack.push(Step::Sep);
                        stack.push(Step::Open(a));
                    }
                }
            }
        }
        out.push_str("}\n");
        out
    }
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeDoc {
    alphabet: Vec<String>,
    root: NodeDoc,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: i64,
    labels: Vec<String>,
    #[serde(default)]
    children: Option<Vec<NodeDoc>>,
}
