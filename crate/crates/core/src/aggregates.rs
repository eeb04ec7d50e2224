//! Semiring aggregates over the answers, group-by, and parameterized
//! queries.
//!
//! The aggregate of a query is `⊕` over its answers of `⊗` over the weights
//! of their nodes. It is maintained on the (non-homogenized) provenance
//! circuit by re-evaluating the gates above a change.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt::Debug;

use crate::automaton::{brute_force_answers, Assignment, Letter, State, TreeAutomaton, VarSet};
use crate::circuit::{Csr, Gate, GateKind, HybridCircuit};
use crate::engine::{bvar_table, compile, initial_valuation, lookup_bvar, Cursor, Engine, EngineOptions};
use crate::error::{Error, Result};
use crate::index::UpdateReport;
use crate::tree::{LabelId, LabeledTree, NodeId, Relabeling};

/// A commutative semiring with constant-time operations.
pub trait Semiring: Clone {
    type Elem: Clone + PartialEq + Debug;

    fn name(&self) -> &'static str;
    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    /// Weight of a node from its textual value in a weights file.
    fn parse_weight(&self, s: &str) -> Result<Self::Elem>;
    fn format(&self, a: &Self::Elem) -> String;
}

/// `(ℕ, +, ×, 0, 1)`, modulo `2^128`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Counting;

impl Semiring for Counting {
    type Elem = u128;

    fn name(&self) -> &'static str {
        "count"
    }
    fn zero(&self) -> u128 {
        0
    }
    fn one(&self) -> u128 {
        1
    }
    fn add(&self, a: &u128, b: &u128) -> u128 {
        a.wrapping_add(*b)
    }
    fn mul(&self, a: &u128, b: &u128) -> u128 {
        a.wrapping_mul(*b)
    }
    fn parse_weight(&self, s: &str) -> Result<u128> {
        s.parse().map_err(|_| Error::Malformed(format!("bad count weight {s:?}")))
    }
    fn format(&self, a: &u128) -> String {
        a.to_string()
    }
}

/// Max-plus over `i64 ∪ {-∞}`, with `None` standing for `-∞`.
#[derive(Debug, Clone, Copy, Default)]
pub struct MaxPlus;

impl Semiring for MaxPlus {
    type Elem = Option<i64>;

    fn name(&self) -> &'static str {
        "tropical"
    }
    fn zero(&self) -> Option<i64> {
        None
    }
    fn one(&self) -> Option<i64> {
        Some(0)
    }
    fn add(&self, a: &Option<i64>, b: &Option<i64>) -> Option<i64> {
        (*a).max(*b)
    }
    fn mul(&self, a: &Option<i64>, b: &Option<i64>) -> Option<i64> {
        Some(a.as_ref()?.saturating_add(*b.as_ref()?))
    }
    fn parse_weight(&self, s: &str) -> Result<Option<i64>> {
        if s == "-inf" {
            return Ok(None);
        }
        s.parse().map(Some).map_err(|_| Error::Malformed(format!("bad tropical weight {s:?}")))
    }
    fn format(&self, a: &Option<i64>) -> String {
        a.map_or_else(|| "-inf".to_string(), |v| v.to_string())
    }
}

/// Pairs `(count, sum)` with `(c1, s1) ⊗ (c2, s2) = (c1·c2, c1·s2 + c2·s1)`.
/// A weights-file value `v` is the node weight `(1, v)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct CountSum;

impl Semiring for CountSum {
    type Elem = (u64, f64);

    fn name(&self) -> &'static str {
        "pair-count-sum"
    }
    fn zero(&self) -> (u64, f64) {
        (0, 0.0)
    }
    fn one(&self) -> (u64, f64) {
        (1, 0.0)
    }
    fn add(&self, a: &(u64, f64), b: &(u64, f64)) -> (u64, f64) {
        (a.0.wrapping_add(b.0), a.1 + b.1)
    }
    fn mul(&self, a: &(u64, f64), b: &(u64, f64)) -> (u64, f64) {
        (a.0.wrapping_mul(b.0), a.0 as f64 * b.1 + b.0 as f64 * a.1)
    }
    /// A bare value `v` reads as `(1, v)`; `"c s"` reads as the pair.
    fn parse_weight(&self, s: &str) -> Result<(u64, f64)> {
        let bad = || Error::Malformed(format!("bad numeric weight {s:?}"));
        match s.split_whitespace().collect::<Vec<_>>()[..] {
            [v] => Ok((1, v.parse().map_err(|_| bad())?)),
            [c, v] => Ok((c.parse().map_err(|_| bad())?, v.parse().map_err(|_| bad())?)),
            _ => Err(bad()),
        }
    }
    fn format(&self, a: &(u64, f64)) -> String {
        format!("{} {}", a.0, a.1)
    }
}

pub const SEMIRINGS: &[&str] = &["count", "tropical", "pair-count-sum"];

/// `⊕` over the brute-force answers of `⊗` over the weights of their nodes.
pub fn brute_force_aggregate<S: Semiring, A: TreeAutomaton>(
    s: &S,
    a: &A,
    t: &LabeledTree,
    z: &VarSet,
    weights: &[S::Elem],
) -> Result<S::Elem> {
    let mut acc = s.zero();
    for ans in brute_force_answers(a, t, z)? {
        let w = ans.iter().fold(s.one(), |p, x| s.mul(&p, &weights[x.node.index()]));
        acc = s.add(&acc, &w);
    }
    Ok(acc)
}

/// A maintained aggregate of one query on one tree.
#[derive(Debug, Clone)]
pub struct AggregateEngine<S: Semiring> {
    s: S,
    tree: LabeledTree,
    circuit: HybridCircuit,
    outs: Csr,
    bvar_of: Vec<u32>,
    nu: Vec<bool>,
    weights: Vec<S::Elem>,
    /// Svar gates of each node: `svar_gates[svar_start[n]..svar_start[n + 1]]`.
    svar_start: Vec<u32>,
    svar_gates: Vec<Gate>,
    bools: Vec<bool>,
    vals: Vec<S::Elem>,
    queued: Vec<bool>,
    heap: BinaryHeap<Reverse<Gate>>,
    last_touched: usize,
}

impl<S: Semiring> AggregateEngine<S> {
    /// `weights` gives one weight per node; `None` means the weight `1`.
    pub fn new<A: TreeAutomaton>(
        s: S,
        t: &LabeledTree,
        a: &A,
        z: &VarSet,
        weights: Option<Vec<S::Elem>>,
        opts: EngineOptions,
    ) -> Result<Self> {
        let weights = weights.unwrap_or_else(|| vec![s.one(); t.len()]);
        if weights.len() != t.len() {
            return Err(Error::Precondition(format!("{} weights for {} nodes", weights.len(), t.len())));
        }
        let (circuit, _) = compile(t, a, z, opts)?;
        let bvar_of = bvar_table(t, &circuit);
        let nu = initial_valuation(t, &circuit);
        let outs = circuit.input_csr().reversed();
        let mut svar_start = vec![0u32; t.len() + 1];
        for l in circuit.svar_labels() {
            svar_start[l.node.index() + 1] += 1;
        }
        for i in 0..t.len() {
            svar_start[i + 1] += svar_start[i];
        }
        let mut fill = svar_start.clone();
        let mut svar_gates = vec![0; circuit.svar_count()];
        for (i, l) in circuit.svar_labels().iter().enumerate() {
            let slot = &mut fill[l.node.index()];
            svar_gates[*slot as usize] = i as Gate;
            *slot += 1;
        }
        let n = circuit.len();
        let mut e = AggregateEngine {
            vals: vec![s.zero(); n],
            s,
            tree: t.clone(),
            circuit,
            outs,
            bvar_of,
            nu,
            weights,
            svar_start,
            svar_gates,
            bools: vec![false; n],
            queued: vec![false; n],
            heap: BinaryHeap::new(),
            last_touched: 0,
        };
        for g in e.circuit.gates() {
            e.eval(g);
        }
        Ok(e)
    }

    pub fn semiring(&self) -> &S {
        &self.s
    }

    pub fn tree(&self) -> &LabeledTree {
        &self.tree
    }

    pub fn circuit(&self) -> &HybridCircuit {
        &self.circuit
    }

    pub fn weight(&self, n: NodeId) -> &S::Elem {
        &self.weights[n.index()]
    }

    pub fn value(&self) -> S::Elem {
        self.vals[self.circuit.output() as usize].clone()
    }

    /// Gates re-evaluated by the last update.
    pub fn last_touched(&self) -> usize {
        self.last_touched
    }

    /// Recomputes gate `g` from its inputs; returns whether its value changed.
    fn eval(&mut self, g: Gate) -> bool {
        eval_gate(&self.s, &self.circuit, &self.nu, &self.weights, &mut self.bools, &mut self.vals, g)
    }

    fn push(&mut self, g: Gate) {
        if !self.queued[g as usize] {
            self.queued[g as usize] = true;
            self.heap.push(Reverse(g));
        }
    }

    /// Re-evaluates the queued gates and whatever depends on a changed one.
    fn propagate(&mut self) {
        let mut touched = 0;
        while let Some(Reverse(g)) = self.heap.pop() {
            self.queued[g as usize] = false;
            touched += 1;
            if self.eval(g) {
                for k in 0..self.outs.of(g).len() {
                    let h = self.outs.of(g)[k];
                    self.push(h);
                }
            }
        }
        self.last_touched = touched;
    }

    /// Toggles one label and returns the new aggregate.
    pub fn relabel(&mut self, r: Relabeling) -> Result<S::Elem> {
        let var = lookup_bvar(&self.tree, &self.bvar_of, r)?;
        self.tree.apply_relabel(r)?;
        match var {
            Some(i) => {
                self.nu[i] ^= true;
                let g = self.circuit.bvar_gate(i);
                self.push(g);
                self.propagate();
            }
            None => self.last_touched = 0,
        }
        Ok(self.value())
    }

    /// Changes the weight of node `n` and returns the new aggregate.
    pub fn set_weight(&mut self, n: NodeId, w: S::Elem) -> Result<S::Elem> {
        if n.index() >= self.tree.len() {
            return Err(Error::UnknownNode(n.0 as i64));
        }
        self.weights[n.index()] = w;
        let (lo, hi) = (self.svar_start[n.index()] as usize, self.svar_start[n.index() + 1] as usize);
        for k in lo..hi {
            let g = self.svar_gates[k];
            self.push(g);
        }
        self.propagate();
        Ok(self.value())
    }

    /// The aggregate evaluated over the whole circuit, ignoring maintained values.
    pub fn recompute(&self) -> S::Elem {
        let n = self.circuit.len();
        let (mut bools, mut vals) = (vec![false; n], vec![self.s.zero(); n]);
        for g in self.circuit.gates() {
            eval_gate(&self.s, &self.circuit, &self.nu, &self.weights, &mut bools, &mut vals, g);
        }
        vals[self.circuit.output() as usize].clone()
    }
}

/// Recomputes gate `g` from its inputs; returns whether its value changed.
fn eval_gate<S: Semiring>(
    s: &S,
    c: &HybridCircuit,
    nu: &[bool],
    weights: &[S::Elem],
    bools: &mut [bool],
    vals: &mut [S::Elem],
    g: Gate,
) -> bool {
    let inp = c.inputs(g);
    let gi = g as usize;
    let b = match c.kind(g) {
        GateKind::Bvar => nu[gi - c.svar_count()],
        GateKind::And => inp.iter().all(|&i| bools[i as usize]),
        GateKind::Or => inp.iter().any(|&i| bools[i as usize]),
        GateKind::Not => !bools[inp[0] as usize],
        kind => {
            let v = match kind {
                GateKind::Svar => weights[c.svar_label(g).node.index()].clone(),
                GateKind::Union => inp.iter().fold(s.zero(), |acc, &i| s.add(&acc, &vals[i as usize])),
                GateKind::Times => inp.iter().fold(s.one(), |acc, &i| s.mul(&acc, &vals[i as usize])),
                _ if bools[inp[1] as usize] => vals[inp[0] as usize].clone(),
                _ => s.zero(),
            };
            if vals[gi] == v {
                return false;
            }
            vals[gi] = v;
            return true;
        }
    };
    std::mem::replace(&mut bools[gi], b) != b
}

/// The aggregate of the answers of `a` on `t`.
pub fn aggregate_value<S: Semiring, A: TreeAutomaton>(
    s: S,
    t: &LabeledTree,
    a: &A,
    z: &VarSet,
    weights: Option<Vec<S::Elem>>,
) -> Result<S::Elem> {
    Ok(AggregateEngine::new(s, t, a, z, weights, EngineOptions::default())?.value())
}

/// Mean of a numeric value over the nodes selected by a unary query.
#[derive(Debug, Clone)]
pub struct AverageTracker {
    inner: AggregateEngine<CountSum>,
}

impl AverageTracker {
    pub fn new<A: TreeAutomaton>(t: &LabeledTree, a: &A, z: &VarSet, chi: &[f64]) -> Result<Self> {
        if z.m() != 1 {
            return Err(Error::Precondition("the average needs a query with one free variable".into()));
        }
        let w = chi.iter().map(|&v| (1, v)).collect();
        Ok(AverageTracker { inner: AggregateEngine::new(CountSum, t, a, z, Some(w), EngineOptions::default())? })
    }

    pub fn average(&self) -> Result<f64> {
        let (c, s) = self.inner.value();
        if c == 0 {
            return Err(Error::EmptySelection);
        }
        Ok(s / c as f64)
    }

    pub fn relabel(&mut self, r: Relabeling) -> Result<()> {
        self.inner.relabel(r).map(drop)
    }

    pub fn set_value(&mut self, n: NodeId, v: f64) -> Result<()> {
        self.inner.set_weight(n, (1, v)).map(drop)
    }

    pub fn engine(&self) -> &AggregateEngine<CountSum> {
        &self.inner
    }
}

/// `a` over `Z = x y Y` read as an automaton over `y Y P`, with label
/// variable `P_i` standing for the first-order variable `x_i`.
#[derive(Debug, Clone)]
pub struct ParamAutomaton<A> {
    inner: A,
    k: usize,
    m: usize,
    u: usize,
}

impl<A: TreeAutomaton> ParamAutomaton<A> {
    fn old_letter(&self, a: Letter) -> Letter {
        let (k, m, u) = (self.k, self.m, self.u);
        let y = a & ((1 << (m - k)) - 1);
        let upd = (a >> (m - k)) & ((1 << u) - 1);
        let par = (a >> (m - k + u)) & ((1 << k) - 1);
        par | y << k | upd << m
    }
}

impl<A: TreeAutomaton> TreeAutomaton for ParamAutomaton<A> {
    fn state_count(&self) -> u64 {
        self.inner.state_count()
    }
    fn letter_count(&self) -> u32 {
        self.inner.letter_count()
    }
    fn init(&self, a: Letter) -> State {
        self.inner.init(self.old_letter(a))
    }
    fn trans(&self, left: State, right: State, a: Letter) -> State {
        self.inner.trans(left, right, self.old_letter(a))
    }
    fn is_final(&self, q: State) -> bool {
        self.inner.is_final(q)
    }
}

/// Label name standing for parameter `x`.
pub fn param_label(x: &str) -> String {
    format!("param:{x}")
}

/// The first `k` enumeration variables of `z` turned into labels of `t`.
pub fn parameterize<A: TreeAutomaton>(
    t: &LabeledTree,
    a: A,
    z: &VarSet,
    k: usize,
) -> Result<(LabeledTree, ParamAutomaton<A>, VarSet, Vec<LabelId>)> {
    if k == 0 || k >= z.m() {
        return Err(Error::Precondition(format!("{k} parameters for a query with {} free variables", z.m())));
    }
    if a.letter_count() != z.letter_count() {
        return Err(Error::Precondition("the automaton does not read subsets of the variables".into()));
    }
    let names: Vec<String> = z.enum_vars[..k].iter().map(|x| param_label(x)).collect();
    let tree = t.with_extra_labels(&names)?;
    let params = names.iter().map(|n| tree.label_id(n).expect("just added")).collect();
    let vars = VarSet {
        enum_vars: z.enum_vars[k..].to_vec(),
        upd_vars: z.upd_vars.iter().cloned().chain(names).collect(),
    };
    let w = ParamAutomaton { k, m: z.m(), u: z.upd_vars.len(), inner: a };
    Ok((tree, w, vars, params))
}

/// Moves parameter labels so that label `params[i]` sits exactly on `b[i]`.
fn move_params(
    current: &mut [Option<NodeId>],
    params: &[LabelId],
    b: &[NodeId],
    mut relabel: impl FnMut(Relabeling) -> Result<()>,
) -> Result<()> {
    if b.len() != params.len() {
        return Err(Error::Arity { expected: params.len(), got: b.len() });
    }
    for i in 0..b.len() {
        if current[i] == Some(b[i]) {
            continue;
        }
        if let Some(old) = current[i] {
            relabel(Relabeling { node: old, label: params[i] })?;
        }
        current[i] = None;
        relabel(Relabeling { node: b[i], label: params[i] })?;
        current[i] = Some(b[i]);
    }
    Ok(())
}

/// A query `Q(x, y)` whose parameters `x` are chosen, and changed, by the user.
#[derive(Debug, Clone)]
pub struct ParamEngine {
    engine: Engine,
    params: Vec<LabelId>,
    current: Vec<Option<NodeId>>,
}

impl ParamEngine {
    /// The first `k` enumeration variables of `z` are the parameters. No
    /// parameter is set initially.
    pub fn new<A: TreeAutomaton>(t: &LabeledTree, a: &A, z: &VarSet, k: usize, opts: EngineOptions) -> Result<Self> {
        let (tree, w, vars, params) = parameterize(t, a, z, k)?;
        let engine = Engine::preprocess_with(&tree, &w, &vars, opts)?;
        Ok(ParamEngine { engine, current: vec![None; params.len()], params })
    }

    /// Answers are over the remaining variables, numbered from 0.
    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn parameters(&self) -> &[Option<NodeId>] {
        &self.current
    }

    pub fn set_parameters(&mut self, b: &[NodeId]) -> Result<UpdateReport> {
        for &n in b {
            if n.index() >= self.engine.tree().len() {
                return Err(Error::UnknownNode(n.0 as i64));
            }
        }
        let mut total = UpdateReport::default();
        let engine = &mut self.engine;
        move_params(&mut self.current, &self.params, b, |r| {
            let rep = engine.relabel(r)?;
            total.touched_gates += rep.touched_gates;
            total.touched_forest += rep.touched_forest;
            total.edges_on += rep.edges_on;
            total.edges_off += rep.edges_off;
            Ok(())
        })?;
        Ok(total)
    }
}

/// One non-empty group and the work spent producing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Group<K> {
    pub key: Vec<NodeId>,
    pub value: K,
    /// Enumeration steps plus re-evaluated gates.
    pub work: usize,
}

/// Group-by state: an aggregate engine reading the group key from labels,
/// and an enumeration of the non-empty groups.
#[derive(Debug, Clone)]
pub struct GroupBy<S: Semiring> {
    agg: AggregateEngine<S>,
    proj: Engine,
    params: Vec<LabelId>,
    current: Vec<Option<NodeId>>,
}

impl<S: Semiring> GroupBy<S> {
    /// `proj` must accept exactly the `x` for which some `y` satisfies `a`;
    /// its variables are the first `proj_z.m()` enumeration variables of `z`.
    #[allow(clippy::too_many_arguments)]
    pub fn new<A: TreeAutomaton, P: TreeAutomaton>(
        s: S,
        t: &LabeledTree,
        a: &A,
        z: &VarSet,
        proj: &P,
        proj_z: &VarSet,
        weights: Option<Vec<S::Elem>>,
        opts: EngineOptions,
    ) -> Result<Self> {
        let k = proj_z.m();
        if proj_z.enum_vars[..] != z.enum_vars[..k.min(z.m())] || proj_z.upd_vars != z.upd_vars {
            return Err(Error::Precondition("the projection must keep the leading variables and the labels".into()));
        }
        let (tree, w, vars, params) = parameterize(t, a, z, k)?;
        let agg = AggregateEngine::new(s, &tree, &w, &vars, weights, opts)?;
        let proj = Engine::preprocess_with(t, proj, proj_z, opts)?;
        Ok(GroupBy { agg, proj, current: vec![None; params.len()], params })
    }

    pub fn aggregate(&self) -> &AggregateEngine<S> {
        &self.agg
    }

    pub fn projection(&self) -> &Engine {
        &self.proj
    }

    /// Relabels the underlying tree in both structures.
    pub fn relabel(&mut self, r: Relabeling) -> Result<()> {
        self.proj.relabel(r)?;
        self.agg.relabel(r).map(drop)
    }

    pub fn groups(&mut self) -> GroupIter<'_, S> {
        let cursor = self.proj.cursor();
        GroupIter { g: self, cursor }
    }
}

pub struct GroupIter<'a, S: Semiring> {
    g: &'a mut GroupBy<S>,
    cursor: Cursor,
}

impl<S: Semiring> GroupIter<'_, S> {
    fn step(&mut self) -> Result<Option<Group<S::Elem>>> {
        let Some(b) = self.g.proj.next_answer(&mut self.cursor)? else { return Ok(None) };
        let mut work = self.cursor.last_steps();
        let key = group_key(&b, self.g.params.len())?;
        let agg = &mut self.g.agg;
        move_params(&mut self.g.current, &self.g.params, &key, |r| {
            agg.relabel(r)?;
            work += agg.last_touched();
            Ok(())
        })?;
        Ok(Some(Group { key, value: agg.value(), work }))
    }
}

fn group_key(b: &Assignment, k: usize) -> Result<Vec<NodeId>> {
    let mut key = vec![None; k];
    for s in b {
        let slot = &mut key[s.var as usize];
        if slot.replace(s.node).is_some() {
            return Err(Error::Precondition("group variables must be first-order".into()));
        }
    }
    key.into_iter()
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::Precondition("group variables must be first-order".into()))
}

impl<S: Semiring> Iterator for GroupIter<'_, S> {
    type Item = Result<Group<S::Elem>>;

    fn next(&mut self) -> Option<Self::Item> {
        self.step().transpose()
    }
}
