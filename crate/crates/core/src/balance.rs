//! Rewriting a tree into a cluster tree of logarithmic height, and lifting an
//! automaton so that it runs on the cluster tree instead.
//!
//! A cluster is either a full subtree of the input (its value is a state) or
//! a subtree with one hole (its value is a map from the state at the hole to
//! the state at the top). Original leaves are leaf clusters, original
//! internal nodes are node clusters merging their own letter with the values
//! of their two children, one of which may be a hole, and holes are
//! leaf-edge clusters valued by the identity map.

use crate::automaton::{Letter, State, TreeAutomaton};
use crate::error::{Error, Result};
use crate::tree::{LabeledTree, NodeId, NONE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum ClusterKind {
    /// An original leaf.
    LeafNode = 0,
    /// A hole: the identity map.
    LeafEdge = 1,
    /// An original internal node over two subtree clusters.
    Node = 2,
    /// An original internal node whose left child is the hole side.
    NodeHoleLeft = 3,
    /// An original internal node whose right child is the hole side.
    NodeHoleRight = 4,
    /// Composition of an upper context with a lower context.
    Compose = 5,
    /// A context applied to a subtree.
    Apply = 6,
}

pub const KIND_COUNT: u32 = 7;

impl ClusterKind {
    pub const ALL: [ClusterKind; 7] = [
        ClusterKind::LeafNode,
        ClusterKind::LeafEdge,
        ClusterKind::Node,
        ClusterKind::NodeHoleLeft,
        ClusterKind::NodeHoleRight,
        ClusterKind::Compose,
        ClusterKind::Apply,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClusterKind::LeafNode => "leaf-node",
            ClusterKind::LeafEdge => "leaf-edge",
            ClusterKind::Node => "node",
            ClusterKind::NodeHoleLeft => "node-hole-left",
            ClusterKind::NodeHoleRight => "node-hole-right",
            ClusterKind::Compose => "compose",
            ClusterKind::Apply => "apply",
        }
    }

    /// Whether this kind stands for an original node.
    pub fn is_original(self) -> bool {
        matches!(
            self,
            ClusterKind::LeafNode | ClusterKind::Node | ClusterKind::NodeHoleLeft | ClusterKind::NodeHoleRight
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterTree {
    /// Tree over the kind names; every node carries exactly its kind.
    pub tree: LabeledTree,
    kinds: Vec<ClusterKind>,
    origin: Vec<u32>,
    embedding: Vec<u32>,
}

impl ClusterTree {
    pub fn kind(&self, c: NodeId) -> ClusterKind {
        self.kinds[c.index()]
    }

    pub fn kinds(&self) -> &[ClusterKind] {
        &self.kinds
    }

    /// The original node represented by cluster node `c`.
    pub fn origin(&self, c: NodeId) -> Option<NodeId> {
        let o = self.origin[c.index()];
        (o != NONE).then_some(NodeId(o))
    }

    /// The cluster node representing original node `n`.
    pub fn embedding(&self, n: NodeId) -> NodeId {
        NodeId(self.embedding[n.index()])
    }

    pub fn height(&self) -> usize {
        self.tree.height()
    }

    /// Letter of cluster node `c` for the lifted automaton, given the
    /// variable masks of the original nodes.
    pub fn letter(&self, c: NodeId, z_len: usize, mask_of: impl Fn(NodeId) -> u32) -> Letter {
        let mask = self.origin(c).map_or(0, mask_of);
        (self.kinds[c.index()] as u32) << z_len | mask
    }
}

struct Builder<'a> {
    t: &'a LabeledTree,
    size: Vec<u32>,
    kids: Vec<Option<[usize; 2]>>,
    kinds: Vec<ClusterKind>,
    origin: Vec<u32>,
}

impl Builder<'_> {
    fn push(&mut self, kind: ClusterKind, origin: u32, kids: Option<[usize; 2]>) -> usize {
        self.kids.push(kids);
        self.kinds.push(kind);
        self.origin.push(origin);
        self.kids.len() - 1
    }

    fn heavy(&self, v: NodeId) -> NodeId {
        let (a, b) = self.t.children(v).expect("internal node");
        if self.size[b.index()] > self.size[a.index()] {
            b
        } else {
            a
        }
    }

    /// Cluster for the full subtree rooted at `v`.
    fn subtree(&mut self, v: NodeId) -> usize {
        let Some((a, b)) = self.t.children(v) else {
            return self.push(ClusterKind::LeafNode, v.0, None);
        };
        let s = self.size[v.index()];
        let mut h = v;
        loop {
            let c = self.heavy(h);
            if 2 * self.size[c.index()] < s {
                break;
            }
            h = c;
        }
        if h == v {
            let (l, r) = (self.subtree(a), self.subtree(b));
            return self.push(ClusterKind::Node, v.0, Some([l, r]));
        }
        let ctx = self.context(v, h);
        let (h1, h2) = self.t.children(h).expect("internal node");
        let (l, r) = (self.subtree(h1), self.subtree(h2));
        let below = self.push(ClusterKind::Node, h.0, Some([l, r]));
        self.push(ClusterKind::Apply, NONE, Some([ctx, below]))
    }

    /// Cluster for the subtree at `v` with a hole at its strict descendant `h`.
    fn context(&mut self, v: NodeId, h: NodeId) -> usize {
        let mut path = Vec::new();
        let mut u = h;
        while u != v {
            let p = self.t.parent(u).expect("h lies below v");
            path.push((p, u));
            u = p;
        }
        path.reverse();
        self.context_path(&path)
    }

    /// `path[i] = (p_i, next on the path)`; the hole is below the last entry.
    fn context_path(&mut self, path: &[(NodeId, NodeId)]) -> usize {
        if let [(p, next)] = *path {
            let (a, b) = self.t.children(p).expect("internal node");
            let hole = self.push(ClusterKind::LeafEdge, NONE, None);
            return if next == a {
                let o = self.subtree(b);
                self.push(ClusterKind::NodeHoleLeft, p.0, Some([hole, o]))
            } else {
                let o = self.subtree(a);
                self.push(ClusterKind::NodeHoleRight, p.0, Some([o, hole]))
            };
        }
        let weight = |b: &Self, (p, next): (NodeId, NodeId)| {
            let (x, y) = b.t.children(p).expect("internal node");
            1 + b.size[if next == x { y } else { x }.index()] as u64
        };
        let total: u64 = path.iter().map(|&e| weight(self, e)).sum();
        let mut acc = 0;
        let mut j = 0;
        for (i, &e) in path.iter().enumerate() {
            acc += weight(self, e);
            if 2 * acc >= total {
                j = i;
                break;
            }
        }
        let upper_w: u64 = path[..j].iter().map(|&e| weight(self, e)).sum();
        let lower_w = total - upper_w - weight(self, path[j]);
        let mid = self.context_path(&path[j..=j]);
        match (j > 0, j + 1 < path.len()) {
            (true, true) => {
                let upper = self.context_path(&path[..j]);
                let lower = self.context_path(&path[j + 1..]);
                if upper_w <= lower_w {
                    let um = self.push(ClusterKind::Compose, NONE, Some([upper, mid]));
                    self.push(ClusterKind::Compose, NONE, Some([um, lower]))
                } else {
                    let ml = self.push(ClusterKind::Compose, NONE, Some([mid, lower]));
                    self.push(ClusterKind::Compose, NONE, Some([upper, ml]))
                }
            }
            (true, false) => {
                let upper = self.context_path(&path[..j]);
                self.push(ClusterKind::Compose, NONE, Some([upper, mid]))
            }
            (false, true) => {
                let lower = self.context_path(&path[j + 1..]);
                self.push(ClusterKind::Compose, NONE, Some([mid, lower]))
            }
            (false, false) => mid,
        }
    }
}

/// Cluster tree of height `O(log |t|)` in which every original node appears
/// exactly once.
pub fn balance_tree(t: &LabeledTree) -> ClusterTree {
    let mut b = Builder {
        t,
        size: t.subtree_sizes(),
        kids: Vec::with_capacity(2 * t.len()),
        kinds: Vec::with_capacity(2 * t.len()),
        origin: Vec::with_capacity(2 * t.len()),
    };
    let root = b.subtree(t.root());
    let Builder { kids, kinds, origin, .. } = b;
    let alphabet = ClusterKind::ALL.iter().map(|k| k.name().to_string()).collect();
    let mut tree = LabeledTree::from_kids(alphabet, &kids, root).expect("clusters form a full tree");
    // `from_kids` renumbers in preorder; recover the permutation through a parallel walk.
    let mut perm = vec![0usize; kids.len()];
    let mut stack = vec![(root, tree.root())];
    while let Some((old, new)) = stack.pop() {
        perm[new.index()] = old;
        if let (Some([a, b]), Some((x, y))) = (kids[old], tree.children(new)) {
            stack.push((a, x));
            stack.push((b, y));
        }
    }
    let kinds: Vec<ClusterKind> = perm.iter().map(|&o| kinds[o]).collect();
    let origin: Vec<u32> = perm.iter().map(|&o| origin[o]).collect();
    let mut embedding = vec![NONE; t.len()];
    for (c, &o) in origin.iter().enumerate() {
        if o != NONE {
            debug_assert_eq!(embedding[o as usize], NONE);
            embedding[o as usize] = c as u32;
        }
        tree.set_label_mask(NodeId(c as u32), 1 << kinds[c] as u32);
    }
    debug_assert!(embedding.iter().all(|&e| e != NONE));
    ClusterTree { tree, kinds, origin, embedding }
}

pub const DEFAULT_LIFT_CAP: usize = 6;

/// The automaton over cluster letters `kind << |Z| | mask` equivalent to
/// `inner` on cluster trees.
#[derive(Debug, Clone)]
pub struct LiftBalanced<A> {
    inner: A,
    q: u64,
    funs: u64,
    z_len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterState {
    Base(State),
    /// A map on states, digit `i` in base `|Q|` being the image of state `i`.
    Map(u64),
    Sink,
}

pub fn lift_balanced<A: TreeAutomaton>(a: A, z_len: usize) -> Result<LiftBalanced<A>> {
    lift_balanced_with_cap(a, z_len, DEFAULT_LIFT_CAP)
}

pub fn lift_balanced_with_cap<A: TreeAutomaton>(a: A, z_len: usize, cap: usize) -> Result<LiftBalanced<A>> {
    let q = a.state_count();
    if q as usize > cap || q > 15 {
        return Err(Error::LiftCap { states: q as usize, cap });
    }
    if a.letter_count() as u64 != 1u64 << z_len {
        return Err(Error::Precondition("the automaton must read subsets of the variables".into()));
    }
    Ok(LiftBalanced { inner: a, q, funs: q.pow(q as u32), z_len })
}

impl<A: TreeAutomaton> LiftBalanced<A> {
    pub fn inner(&self) -> &A {
        &self.inner
    }

    pub fn encode(&self, s: ClusterState) -> State {
        match s {
            ClusterState::Base(q) => q,
            ClusterState::Map(f) => self.q + f,
            ClusterState::Sink => self.q + self.funs,
        }
    }

    pub fn decode(&self, s: State) -> ClusterState {
        if s < self.q {
            ClusterState::Base(s)
        } else if s < self.q + self.funs {
            ClusterState::Map(s - self.q)
        } else {
            ClusterState::Sink
        }
    }

    pub fn identity(&self) -> u64 {
        self.tabulate(|x| x)
    }

    pub fn tabulate(&self, f: impl Fn(State) -> State) -> u64 {
        let mut code = 0;
        for x in (0..self.q).rev() {
            code = code * self.q + f(x);
        }
        code
    }

    pub fn apply(&self, f: u64, x: State) -> State {
        f / self.q.pow(x as u32) % self.q
    }

    /// `f ∘ g`.
    pub fn compose(&self, f: u64, g: u64) -> u64 {
        self.tabulate(|x| self.apply(f, self.apply(g, x)))
    }
}

impl<A: TreeAutomaton> TreeAutomaton for LiftBalanced<A> {
    fn state_count(&self) -> u64 {
        self.q + self.funs + 1
    }

    fn letter_count(&self) -> u32 {
        KIND_COUNT << self.z_len
    }

    fn init(&self, a: Letter) -> State {
        let (kind, mask) = (a >> self.z_len, a & ((1 << self.z_len) - 1));
        let s = match kind {
            0 => ClusterState::Base(self.inner.init(mask)),
            1 => ClusterState::Map(self.identity()),
            _ => ClusterState::Sink,
        };
        self.encode(s)
    }

    fn trans(&self, left: State, right: State, a: Letter) -> State {
        use ClusterState::*;
        let (kind, mask) = (a >> self.z_len, a & ((1 << self.z_len) - 1));
        let s = match (kind, self.decode(left), self.decode(right)) {
            (2, Base(q1), Base(q2)) => Base(self.inner.trans(q1, q2, mask)),
            (3, Map(f), Base(q2)) => Map(self.tabulate(|x| self.inner.trans(self.apply(f, x), q2, mask))),
            (4, Base(q1), Map(f)) => Map(self.tabulate(|x| self.inner.trans(q1, self.apply(f, x), mask))),
            (5, Map(f), Map(g)) => Map(self.compose(f, g)),
            (6, Map(f), Base(q)) => Base(self.apply(f, q)),
            _ => Sink,
        };
        self.encode(s)
    }

    fn is_final(&self, q: State) -> bool {
        q < self.q && self.inner.is_final(q)
    }
}
