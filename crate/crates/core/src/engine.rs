//! End-to-end assembly: preprocessing, relabelings and answers on the nodes
//! of the input tree.

use crate::automaton::{Assignment, TreeAutomaton, VarSet};
use crate::balance::{balance_tree, lift_balanced_with_cap, DEFAULT_LIFT_CAP, KIND_COUNT};
use crate::circuit::{homogenize, HybridCircuit, Valuation};
use crate::enumerate::Enumerator;
use crate::error::{Error, Result};
use crate::index::{EnumIndex, UpdateReport};
use crate::provenance::build_provenance;
use crate::tobool::{expand_tobool, expand_tobool_tagged, lift_tobool, lift_tobool_tagged};
use crate::tree::{LabelId, LabelSingleton, LabeledTree, NodeId, Relabeling, NONE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineOptions {
    /// Rebalance the tree before building the circuit. Without it updates
    /// cost `O(h(T))`.
    pub balance: bool,
    pub lift_cap: usize,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions { balance: true, lift_cap: DEFAULT_LIFT_CAP }
    }
}

/// Sizes measured while preprocessing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PipelineStats {
    pub tree_nodes: usize,
    /// Height of the tree the circuit was built on.
    pub build_height: usize,
    pub expanded_nodes: usize,
    pub provenance_gates: usize,
    pub provenance_wires: usize,
    pub gates: usize,
    pub wires: usize,
}

/// The provenance circuit of `a` on the shape of `t`, with variables
/// labeled by nodes and labels of `t`. Not homogenized.
pub fn compile<A: TreeAutomaton>(
    t: &LabeledTree,
    a: &A,
    z: &VarSet,
    opts: EngineOptions,
) -> Result<(HybridCircuit, PipelineStats)> {
    if a.letter_count() != z.letter_count() {
        return Err(Error::Precondition(format!(
            "the automaton reads {} letters but {} variables give {}",
            a.letter_count(),
            z.len(),
            z.letter_count()
        )));
    }
    let label_map = z.label_map(t)?;
    let mut stats = PipelineStats { tree_nodes: t.len(), ..Default::default() };
    let c = if opts.balance {
        let lifted = lift_balanced_with_cap(a, z.len(), opts.lift_cap)?;
        let ct = balance_tree(t);
        let tags: Vec<u16> = ct.kinds().iter().map(|&k| k as u16).collect();
        let carries: Vec<bool> = ct.kinds().iter().map(|k| k.is_original()).collect();
        let e = expand_tobool_tagged(&ct.tree, z, &tags, &carries);
        drop((tags, carries));
        stats.build_height = ct.height();
        stats.expanded_nodes = e.tree.len();
        let mut c = build_provenance(&lift_tobool_tagged(lifted, z.len(), KIND_COUNT), &e)?;
        drop(e);
        let orig = |n: NodeId| ct.origin(n).expect("variables sit on original nodes");
        c.map_labels(|mut s| {
            s.node = orig(s.node);
            s
        }, |b| LabelSingleton { label: label_map[b.label.0 as usize], node: orig(b.node) });
        c
    } else {
        let e = expand_tobool(t, z);
        stats.build_height = t.height();
        stats.expanded_nodes = e.tree.len();
        let mut c = build_provenance(&lift_tobool(a, z.len()), &e)?;
        c.map_labels(|s| s, |b| LabelSingleton { label: label_map[b.label.0 as usize], node: b.node });
        c
    };
    c.validate()?;
    stats.provenance_gates = c.len();
    stats.provenance_wires = c.wire_count();
    stats.gates = c.len();
    stats.wires = c.wire_count();
    Ok((c, stats))
}

/// Boolean variable of each `(node, label)` pair, `NONE` for labels the
/// automaton does not read. Indexed by `node * |alphabet| + label`.
pub(crate) fn bvar_table(t: &LabeledTree, c: &HybridCircuit) -> Vec<u32> {
    let width = t.alphabet().len();
    let mut table = vec![NONE; t.len() * width];
    for (i, b) in c.bvar_labels().iter().enumerate() {
        table[b.node.index() * width + b.label.0 as usize] = i as u32;
    }
    table
}

pub(crate) fn initial_valuation(t: &LabeledTree, c: &HybridCircuit) -> Valuation {
    c.bvar_labels().iter().map(|b| t.has_label(b.node, b.label)).collect()
}

pub(crate) fn lookup_bvar(t: &LabeledTree, table: &[u32], r: Relabeling) -> Result<Option<usize>> {
    t.check_relabel(r)?;
    let i = table[r.node.index() * t.alphabet().len() + r.label.0 as usize];
    Ok((i != NONE).then_some(i as usize))
}

/// A preprocessed query on a labeled tree.
#[derive(Debug, Clone)]
pub struct Engine {
    tree: LabeledTree,
    vars: VarSet,
    bvar_of: Vec<u32>,
    index: EnumIndex,
    stats: PipelineStats,
}

/// A resumable enumeration of the answers of an engine.
#[derive(Debug, Clone)]
pub struct Cursor {
    inner: Enumerator,
}

impl Cursor {
    pub fn last_steps(&self) -> usize {
        self.inner.last_steps()
    }

    pub fn max_steps(&self) -> usize {
        self.inner.max_steps()
    }

    pub fn max_frames(&self) -> usize {
        self.inner.max_frames()
    }
}

impl Engine {
    pub fn preprocess<A: TreeAutomaton>(t: &LabeledTree, a: &A, z: &VarSet) -> Result<Self> {
        Self::preprocess_with(t, a, z, EngineOptions::default())
    }

    pub fn preprocess_with<A: TreeAutomaton>(t: &LabeledTree, a: &A, z: &VarSet, opts: EngineOptions) -> Result<Self> {
        let (c, mut stats) = compile(t, a, z, opts)?;
        let bvar_of = bvar_table(t, &c);
        let nu = initial_valuation(t, &c);
        let h = homogenize(&c)?;
        drop(c);
        stats.gates = h.len();
        stats.wires = h.wire_count();
        let index = EnumIndex::build(h, nu)?;
        Ok(Engine { tree: t.clone(), vars: z.clone(), bvar_of, index, stats })
    }

    /// The tree under its current labeling.
    pub fn tree(&self) -> &LabeledTree {
        &self.tree
    }

    pub fn vars(&self) -> &VarSet {
        &self.vars
    }

    pub fn index(&self) -> &EnumIndex {
        &self.index
    }

    pub fn circuit(&self) -> &HybridCircuit {
        &self.index.circuit
    }

    pub fn stats(&self) -> PipelineStats {
        self.stats
    }

    /// The Boolean variable toggled by relabeling `label` on `node`, if the
    /// automaton reads that label.
    pub fn bvar_of(&self, node: NodeId, label: LabelId) -> Result<Option<usize>> {
        lookup_bvar(&self.tree, &self.bvar_of, Relabeling { node, label })
    }

    /// Toggles one label. Labels the automaton does not read only change the
    /// stored tree. Open cursors become stale.
    pub fn relabel(&mut self, r: Relabeling) -> Result<UpdateReport> {
        let var = lookup_bvar(&self.tree, &self.bvar_of, r)?;
        self.tree.apply_relabel(r)?;
        match var {
            Some(i) => self.index.toggle(i),
            None => Ok(UpdateReport::default()),
        }
    }

    pub fn cursor(&self) -> Cursor {
        Cursor { inner: Enumerator::open(&self.index) }
    }

    /// The next answer of `cur`; fails with [`Error::Stale`] after a relabeling.
    pub fn next_answer(&self, cur: &mut Cursor) -> Result<Option<Assignment>> {
        let c = &self.index.circuit;
        Ok(cur.inner.next(&self.index)?.map(|gates| {
            let mut a: Assignment = gates.into_iter().map(|g| c.svar_label(g)).collect();
            a.sort_unstable();
            a
        }))
    }

    /// Iterator over all answers in enumeration order.
    pub fn answers(&self) -> Answers<'_> {
        Answers { engine: self, cursor: self.cursor() }
    }
}

pub struct Answers<'a> {
    engine: &'a Engine,
    cursor: Cursor,
}

impl Answers<'_> {
    pub fn cursor(&self) -> &Cursor {
        &self.cursor
    }
}

impl Iterator for Answers<'_> {
    type Item = Assignment;

    fn next(&mut self) -> Option<Assignment> {
        self.engine
            .next_answer(&mut self.cursor)
            .expect("a borrowed engine cannot be updated")
    }
}
