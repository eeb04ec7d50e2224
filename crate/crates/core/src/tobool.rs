//! Expansion of a tree into a tree over `{enu, upd, fix}` whose Boolean
//! annotations encode variable annotations, and the matching lifted automaton.
//!
//! Every source node becomes a top `fix` node carrying a tag `k + 1`, where
//! `k` is the letter tag of the source node (always 0 for plain trees).
//! When the source node carries variables, the top node has a left subtree
//! of `enu` leaves (in `X` order) next to `upd` leaves (in `Y` order), and a
//! right child that is either a `fix` node over the expansions of the two
//! source children or a `fix` padding leaf. Variable-free source nodes keep
//! their children directly. All other `fix` nodes have tag 0.

use crate::automaton::{Letter, State, TreeAutomaton, VarSet};
use crate::tree::{LabeledTree, NodeId, NONE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EufLabel {
    Enu,
    Upd,
    Fix,
}

impl EufLabel {
    fn code(self) -> u32 {
        self as u32
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EufTree {
    /// Tree over the alphabet `["enu", "upd", "fix"]`; each node has exactly one label.
    pub tree: LabeledTree,
    tags: Vec<u16>,
    z_len: usize,
    m: usize,
    var_base: Vec<u32>,
    var_leaf: Vec<u32>,
    leaf_origin: Vec<(u32, u32, u16)>,
    source_len: usize,
}

impl EufTree {
    pub fn label(&self, n: NodeId) -> EufLabel {
        match self.tree.label_mask(n) {
            1 => EufLabel::Enu,
            2 => EufLabel::Upd,
            _ => EufLabel::Fix,
        }
    }

    /// The fix-node tag: 0 inside gadgets, `k + 1` on the top node of a source node with letter tag `k`.
    pub fn tag(&self, n: NodeId) -> u16 {
        self.tags[n.index()]
    }

    /// Letter read by the lifted automaton at `n` under Boolean annotation `b`.
    pub fn letter(&self, n: NodeId, b: bool) -> Letter {
        let code = match self.label(n) {
            EufLabel::Fix => 2 + self.tags[n.index()] as u32,
            l => l.code(),
        };
        code * 2 + b as u32
    }

    pub fn z_len(&self) -> usize {
        self.z_len
    }

    pub fn source_len(&self) -> usize {
        self.source_len
    }

    /// `φ(n, Z_i)`: the leaf coding variable `i` (in `Z` order) of source node `n`.
    pub fn phi(&self, n: NodeId, var: usize) -> Option<NodeId> {
        let base = self.var_base[n.index()];
        (base != NONE && var < self.z_len).then(|| NodeId(self.var_leaf[base as usize + var]))
    }

    /// Number of entries of `φ`.
    pub fn phi_len(&self) -> usize {
        self.var_leaf.len()
    }

    /// `φ⁻¹` on variable leaves: the source node and the variable index in `Z` order.
    pub fn origin(&self, leaf: NodeId) -> Option<(NodeId, usize)> {
        let i = self.leaf_origin.binary_search_by_key(&leaf.0, |&(l, _, _)| l).ok()?;
        let (_, src, var) = self.leaf_origin[i];
        Some((NodeId(src), var as usize))
    }

    /// The variable leaves with their source node and `Z` index, in preorder.
    pub fn var_leaves(&self) -> impl Iterator<Item = (NodeId, NodeId, usize)> + '_ {
        self.var_base.iter().enumerate().filter(|(_, &b)| b != NONE).flat_map(move |(n, &b)| {
            (0..self.z_len).map(move |i| (NodeId(self.var_leaf[b as usize + i]), NodeId(n as u32), i))
        })
    }

    pub fn enum_count(&self) -> usize {
        self.m
    }
}

/// The plain expansion: every node carries every variable and letter tag 0.
pub fn expand_tobool(t: &LabeledTree, z: &VarSet) -> EufTree {
    let tags = vec![0u16; t.len()];
    let carries = vec![true; t.len()];
    expand_tobool_tagged(t, z, &tags, &carries)
}

enum Task {
    Source(u32),
    Group { src: u32, upd: bool, lo: usize, hi: usize },
    Vars(u32),
    Rest(u32),
}

/// Expansion where source node `n` has letter tag `tags[n]` and carries
/// variables only when `carries[n]` holds.
pub fn expand_tobool_tagged(t: &LabeledTree, z: &VarSet, tags: &[u16], carries: &[bool]) -> EufTree {
    let zl = z.len();
    let m = z.m();
    let k = zl - m;
    let guess = t.len() * if zl == 0 { 1 } else { 2 * zl + 3 };
    let mut kids: Vec<[u32; 2]> = Vec::with_capacity(guess);
    let mut parent: Vec<u32> = Vec::with_capacity(guess);
    let mut labels: Vec<u32> = Vec::with_capacity(guess);
    let mut ntags: Vec<u16> = Vec::with_capacity(guess);
    let mut var_base = vec![NONE; t.len()];
    let mut var_leaf: Vec<u32> = Vec::new();
    let mut stack: Vec<(Task, u32, usize)> = vec![(Task::Source(0), NONE, 0)];
    while let Some((task, par, slot)) = stack.pop() {
        let v = kids.len() as u32;
        let mut make = |label: EufLabel, tag: u16| {
            kids.push([NONE, NONE]);
            parent.push(par);
            labels.push(1 << label.code());
            ntags.push(tag);
            if par != NONE {
                kids[par as usize][slot] = v;
            }
        };
        match task {
            Task::Source(n) => {
                make(EufLabel::Fix, tags[n as usize] + 1);
                let ch = t.children(NodeId(n));
                if carries[n as usize] && zl > 0 {
                    var_base[n as usize] = var_leaf.len() as u32;
                    var_leaf.extend(std::iter::repeat_n(NONE, zl));
                    stack.push((Task::Rest(n), v, 1));
                    stack.push((Task::Vars(n), v, 0));
                } else if let Some((a, b)) = ch {
                    stack.push((Task::Source(b.0), v, 1));
                    stack.push((Task::Source(a.0), v, 0));
                }
            }
            Task::Vars(n) => {
                if m > 0 && k > 0 {
                    make(EufLabel::Fix, 0);
                    stack.push((Task::Group { src: n, upd: true, lo: 0, hi: k }, v, 1));
                    stack.push((Task::Group { src: n, upd: false, lo: 0, hi: m }, v, 0));
                } else {
                    let upd = m == 0;
                    stack.push((Task::Group { src: n, upd, lo: 0, hi: if upd { k } else { m } }, par, slot));
                }
            }
            Task::Group { src, upd, lo, hi } => {
                if hi - lo == 1 {
                    make(if upd { EufLabel::Upd } else { EufLabel::Enu }, 0);
                    let var = if upd { m + lo } else { lo };
                    var_leaf[var_base[src as usize] as usize + var] = v;
                } else {
                    make(EufLabel::Fix, 0);
                    let mid = lo + (hi - lo).div_ceil(2);
                    stack.push((Task::Group { src, upd, lo: mid, hi }, v, 1));
                    stack.push((Task::Group { src, upd, lo, hi: mid }, v, 0));
                }
            }
            Task::Rest(n) => {
                make(EufLabel::Fix, 0);
                if let Some((a, b)) = t.children(NodeId(n)) {
                    stack.push((Task::Source(b.0), v, 1));
                    stack.push((Task::Source(a.0), v, 0));
                }
            }
        }
    }
    let n = kids.len();
    let mut leaf_origin = Vec::with_capacity(var_leaf.len());
    for (src, &b) in var_base.iter().enumerate() {
        if b != NONE {
            for var in 0..zl {
                leaf_origin.push((var_leaf[b as usize + var], src as u32, var as u16));
            }
        }
    }
    leaf_origin.sort_unstable();
    let tree = LabeledTree::from_raw(
        vec!["enu".into(), "upd".into(), "fix".into()],
        kids,
        parent,
        labels,
    );
    debug_assert_eq!(tree.len(), n);
    EufTree {
        tree,
        tags: ntags,
        z_len: zl,
        m,
        var_base,
        var_leaf,
        leaf_origin,
        source_len: t.len(),
    }
}

/// Boolean annotation of the expansion induced by a variable annotation
/// `nu[n]` (a mask in `Z` order) of the source nodes.
pub fn induced_valuation(e: &EufTree, nu: &[u32]) -> Vec<bool> {
    let mut out = vec![false; e.tree.len()];
    for (leaf, src, var) in e.var_leaves() {
        out[leaf.index()] = nu[src.index()] >> var & 1 == 1;
    }
    out
}

/// The automaton over `{enu, upd, fix}` letters equivalent to `inner` on expansions.
#[derive(Debug, Clone)]
pub struct LiftTobool<A> {
    inner: A,
    z_len: usize,
    source_tags: u32,
    base: u64,
}

/// Lifted automaton for plain expansions.
pub fn lift_tobool<A: TreeAutomaton>(a: A, z_len: usize) -> LiftTobool<A> {
    lift_tobool_tagged(a, z_len, 1)
}

/// Lifted automaton for expansions whose source letters are `tag << |Z| | mask`
/// with `tag < source_tags`.
pub fn lift_tobool_tagged<A: TreeAutomaton>(a: A, z_len: usize, source_tags: u32) -> LiftTobool<A> {
    let base = a.state_count();
    debug_assert_eq!(a.letter_count() as u64, (source_tags as u64) << z_len);
    LiftTobool { inner: a, z_len, source_tags, base }
}

/// Decoded state of the lifted automaton.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiftedState {
    Base(State),
    Pair(State, State),
    /// Sequence of the given length; element `i` is bit `i`.
    Seq(u32, u32),
    Sink,
}

impl<A: TreeAutomaton> LiftTobool<A> {
    pub fn inner(&self) -> &A {
        &self.inner
    }

    fn seq_offset(&self) -> u64 {
        self.base + self.base * self.base
    }

    pub fn encode(&self, s: LiftedState) -> State {
        match s {
            LiftedState::Base(q) => q,
            LiftedState::Pair(a, b) => self.base + a * self.base + b,
            LiftedState::Seq(len, bits) => self.seq_offset() + (1u64 << len) - 1 + bits as u64,
            LiftedState::Sink => self.seq_offset() + (1u64 << (self.z_len + 1)) - 1,
        }
    }

    pub fn decode(&self, q: State) -> LiftedState {
        if q < self.base {
            LiftedState::Base(q)
        } else if q < self.seq_offset() {
            let r = q - self.base;
            LiftedState::Pair(r / self.base, r % self.base)
        } else {
            let r = q - self.seq_offset() + 1;
            let len = 63 - r.leading_zeros();
            if len as usize > self.z_len {
                LiftedState::Sink
            } else {
                LiftedState::Seq(len, (r - (1 << len)) as u32)
            }
        }
    }

    fn source_letter(&self, tag: u32, mask: u32) -> Letter {
        tag << self.z_len | mask
    }

    fn split(a: Letter) -> (u32, bool) {
        (a / 2, a % 2 == 1)
    }
}

impl<A: TreeAutomaton> TreeAutomaton for LiftTobool<A> {
    fn state_count(&self) -> u64 {
        self.encode(LiftedState::Sink) + 1
    }

    fn letter_count(&self) -> u32 {
        2 * (3 + self.source_tags)
    }

    fn init(&self, a: Letter) -> State {
        let (code, b) = Self::split(a);
        let s = match code {
            0 | 1 => LiftedState::Seq(1, b as u32),
            2 => LiftedState::Seq(0, 0),
            c => LiftedState::Base(self.inner.init(self.source_letter(c - 3, 0))),
        };
        self.encode(s)
    }

    fn trans(&self, left: State, right: State, a: Letter) -> State {
        use LiftedState::*;
        let (code, _) = Self::split(a);
        let z = self.z_len as u32;
        let s = match (code, self.decode(left), self.decode(right)) {
            (2, Base(q1), Base(q2)) => Pair(q1, q2),
            (2, Seq(l1, b1), Seq(l2, b2)) if l1 < z && l2 < z && l1 + l2 <= z => Seq(l1 + l2, b1 | b2 << l1),
            (c, Seq(l, s), Pair(q1, q2)) if c >= 3 && l == z && z > 0 => {
                Base(self.inner.trans(q1, q2, self.source_letter(c - 3, s)))
            }
            (c, Seq(l, s), Seq(0, _)) if c >= 3 && l == z && z > 0 => Base(self.inner.init(self.source_letter(c - 3, s))),
            (c, Base(q1), Base(q2)) if c >= 3 => Base(self.inner.trans(q1, q2, self.source_letter(c - 3, 0))),
            _ => Sink,
        };
        self.encode(s)
    }

    fn is_final(&self, q: State) -> bool {
        q < self.base && self.inner.is_final(q)
    }
}
