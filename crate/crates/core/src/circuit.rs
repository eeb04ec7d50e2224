//! Hybrid circuits: set-valued gates (variables, unions, products and
//! products gated by a Boolean input) over Boolean gates.
//!
//! Gates are numbered in topological order, every input having a smaller id
//! than the gates reading it. Set-valued variables occupy ids `0..S` and
//! Boolean variables `S..S+B`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::automaton::Singleton;
use crate::error::{Error, Result};
use crate::tree::{LabelSingleton, NONE};

pub type Gate = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum GateKind {
    Svar,
    Bvar,
    Union,
    Times,
    /// `[set input, Boolean input]`: the set input if the Boolean input is 1.
    BoxTimes,
    And,
    Or,
    Not,
}

impl GateKind {
    pub fn is_set_valued(self) -> bool {
        matches!(self, GateKind::Svar | GateKind::Union | GateKind::Times | GateKind::BoxTimes)
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Svar => "svar",
            GateKind::Bvar => "bvar",
            GateKind::Union => "union",
            GateKind::Times => "times",
            GateKind::BoxTimes => "boxtimes",
            GateKind::And => "and",
            GateKind::Or => "or",
            GateKind::Not => "not",
        }
    }
}

/// Compressed adjacency lists.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Csr {
    start: Vec<u32>,
    list: Vec<u32>,
}

impl Csr {
    pub fn of(&self, g: Gate) -> &[u32] {
        &self.list[self.start[g as usize] as usize..self.start[g as usize + 1] as usize]
    }

    pub fn len(&self) -> usize {
        self.start.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn edge_count(&self) -> usize {
        self.list.len()
    }

    /// The transposed adjacency, each list sorted increasingly.
    pub fn reversed(&self) -> Csr {
        let n = self.len();
        let mut deg = vec![0u32; n + 1];
        for &v in &self.list {
            deg[v as usize + 1] += 1;
        }
        for i in 0..n {
            deg[i + 1] += deg[i];
        }
        let mut fill = deg.clone();
        let mut list = vec![0; self.list.len()];
        for g in 0..n as u32 {
            for &v in self.of(g) {
                list[fill[v as usize] as usize] = g;
                fill[v as usize] += 1;
            }
        }
        Csr { start: deg, list }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HybridCircuit {
    kinds: Vec<GateKind>,
    inputs: Csr,
    svar_labels: Vec<Singleton>,
    bvar_labels: Vec<LabelSingleton>,
    output: Gate,
    secondary: Option<Gate>,
}

/// Value of each Boolean variable, indexed by `gate - S`.
pub type Valuation = Vec<bool>;

impl HybridCircuit {
    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn kind(&self, g: Gate) -> GateKind {
        self.kinds[g as usize]
    }

    pub fn inputs(&self, g: Gate) -> &[Gate] {
        self.inputs.of(g)
    }

    pub fn input_csr(&self) -> &Csr {
        &self.inputs
    }

    pub fn wire_count(&self) -> usize {
        self.inputs.edge_count()
    }

    pub fn output(&self) -> Gate {
        self.output
    }

    pub fn secondary(&self) -> Option<Gate> {
        self.secondary
    }

    pub fn svar_count(&self) -> usize {
        self.svar_labels.len()
    }

    pub fn bvar_count(&self) -> usize {
        self.bvar_labels.len()
    }

    pub fn svar_label(&self, g: Gate) -> Singleton {
        self.svar_labels[g as usize]
    }

    pub fn svar_labels(&self) -> &[Singleton] {
        &self.svar_labels
    }

    pub fn bvar_gate(&self, i: usize) -> Gate {
        (self.svar_labels.len() + i) as Gate
    }

    pub fn bvar_label(&self, g: Gate) -> LabelSingleton {
        self.bvar_labels[g as usize - self.svar_labels.len()]
    }

    pub fn bvar_labels(&self) -> &[LabelSingleton] {
        &self.bvar_labels
    }

    pub fn gates(&self) -> impl DoubleEndedIterator<Item = Gate> + ExactSizeIterator {
        0..self.kinds.len() as Gate
    }

    pub fn max_fan_in(&self) -> usize {
        self.gates().map(|g| self.inputs(g).len()).max().unwrap_or(0)
    }

    /// Rewrites the variable labels, e.g. to move them to another tree.
    pub fn map_labels(
        &mut self,
        mut svar: impl FnMut(Singleton) -> Singleton,
        mut bvar: impl FnMut(LabelSingleton) -> LabelSingleton,
    ) {
        for s in &mut self.svar_labels {
            *s = svar(*s);
        }
        for b in &mut self.bvar_labels {
            *b = bvar(*b);
        }
    }

    /// Checks the typing rules of hybrid circuits.
    pub fn validate(&self) -> Result<()> {
        let s = self.svar_count() as Gate;
        let b = self.bvar_count() as Gate;
        let bad = |g: Gate, why: &str| Err(Error::Invariant(format!("gate {g}: {why}")));
        for g in self.gates() {
            let k = self.kind(g);
            let inp = self.inputs(g);
            if inp.iter().any(|&i| i >= g) {
                return bad(g, "inputs must precede the gate");
            }
            let set = |i: &Gate| self.kind(*i).is_set_valued();
            match k {
                GateKind::Svar if g >= s => return bad(g, "svar outside the svar range"),
                GateKind::Bvar if !(s..s + b).contains(&g) => return bad(g, "bvar outside the bvar range"),
                GateKind::Svar | GateKind::Bvar if !inp.is_empty() => return bad(g, "variables have no inputs"),
                GateKind::Union if !inp.iter().all(set) => return bad(g, "union inputs must be set-valued"),
                GateKind::Times if !(inp.is_empty() || inp.len() == 2) => return bad(g, "times has 0 or 2 inputs"),
                GateKind::Times if !inp.iter().all(set) => return bad(g, "times inputs must be set-valued"),
                GateKind::BoxTimes if inp.len() != 2 || !set(&inp[0]) || set(&inp[1]) => {
                    return bad(g, "boxtimes reads one set-valued and one Boolean input")
                }
                GateKind::Not if inp.len() != 1 => return bad(g, "not has one input"),
                GateKind::And | GateKind::Or | GateKind::Not if inp.iter().any(set) => {
                    return bad(g, "Boolean gates read Boolean inputs")
                }
                _ => {}
            }
            if g < s && k != GateKind::Svar || (s..s + b).contains(&g) && k != GateKind::Bvar {
                return bad(g, "variable range holds another gate kind");
            }
        }
        if self.output as usize >= self.len() || !self.kind(self.output).is_set_valued() {
            return Err(Error::Invariant("output must be a set-valued gate".into()));
        }
        if let Some(o) = self.secondary {
            if o as usize >= self.len() || self.kind(o).is_set_valued() {
                return Err(Error::Invariant("secondary output must be a Boolean gate".into()));
            }
        }
        Ok(())
    }

    /// Keeps the gates with a path to an output, plus all variables.
    pub fn trim(&self) -> HybridCircuit {
        let n = self.len();
        let mut keep = vec![false; n];
        let vars = self.svar_count() + self.bvar_count();
        keep[..vars].iter_mut().for_each(|k| *k = true);
        keep[self.output as usize] = true;
        if let Some(o) = self.secondary {
            keep[o as usize] = true;
        }
        for g in (0..n).rev() {
            if keep[g] {
                for &i in self.inputs(g as Gate) {
                    keep[i as usize] = true;
                }
            }
        }
        let mut map = vec![NONE; n];
        let mut b = CircuitBuilder::new(self.svar_labels.clone(), self.bvar_labels.clone());
        for (g, m) in map.iter_mut().enumerate().take(vars) {
            *m = g as Gate;
        }
        let mut buf = Vec::new();
        for g in vars..n {
            if keep[g] {
                buf.clear();
                buf.extend(self.inputs(g as Gate).iter().map(|&i| map[i as usize]));
                map[g] = b.gate(self.kinds[g], &buf);
            }
        }
        b.finish(map[self.output as usize], self.secondary.map(|o| map[o as usize]))
            .expect("trimming preserves well-formedness")
    }

    /// One line per gate: `id kind inputs [label]`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for g in self.gates() {
            let inp: Vec<String> = self.inputs(g).iter().map(|i| i.to_string()).collect();
            let _ = write!(out, "{g} {} [{}]", self.kind(g).name(), inp.join(","));
            match self.kind(g) {
                GateKind::Svar => {
                    let s = self.svar_label(g);
                    let _ = write!(out, " <{}:{}>", s.var, s.node.0);
                }
                GateKind::Bvar => {
                    let s = self.bvar_label(g);
                    let _ = write!(out, " <{}:{}>", s.label.0, s.node.0);
                }
                _ => {}
            }
            if g == self.output {
                out.push_str(" output");
            }
            if Some(g) == self.secondary {
                out.push_str(" secondary");
            }
            out.push('\n');
        }
        out
    }

    /// `|Δ(g)|`: the number of gates with a directed path from `g`, `g`
    /// included. `outs` is the reversed adjacency.
    pub fn dependents(&self, outs: &Csr, g: Gate, seen: &mut Vec<u32>, stamp: u32) -> usize {
        if seen.len() < self.len() {
            seen.resize(self.len(), 0);
        }
        let mut stack = vec![g];
        seen[g as usize] = stamp;
        let mut count = 0;
        while let Some(v) = stack.pop() {
            count += 1;
            for &w in outs.of(v) {
                if seen[w as usize] != stamp {
                    seen[w as usize] = stamp;
                    stack.push(w);
                }
            }
        }
        count
    }

    /// `Δ(C)` restricted to Boolean variable gates, whose dependents are the
    /// gates touched by a relabeling.
    pub fn bvar_dependency_size(&self) -> usize {
        let outs = self.inputs.reversed();
        let mut seen = Vec::new();
        (0..self.bvar_count())
            .map(|i| self.dependents(&outs, self.bvar_gate(i), &mut seen, i as u32 + 1))
            .max()
            .unwrap_or(0)
    }

    pub fn is_homogenized(&self) -> bool {
        self.gates().all(|g| self.kind(g) != GateKind::Times || !self.inputs(g).is_empty())
    }
}

/// Incremental construction in topological order.
#[derive(Debug, Clone)]
pub struct CircuitBuilder {
    kinds: Vec<GateKind>,
    start: Vec<u32>,
    list: Vec<u32>,
    svar_labels: Vec<Singleton>,
    bvar_labels: Vec<LabelSingleton>,
}

impl CircuitBuilder {
    pub fn new(svar_labels: Vec<Singleton>, bvar_labels: Vec<LabelSingleton>) -> Self {
        let vars = svar_labels.len() + bvar_labels.len();
        let mut kinds = vec![GateKind::Svar; svar_labels.len()];
        kinds.resize(vars, GateKind::Bvar);
        CircuitBuilder { kinds, start: vec![0; vars + 1], list: Vec::new(), svar_labels, bvar_labels }
    }

    pub fn svar(&self, i: usize) -> Gate {
        i as Gate
    }

    pub fn bvar(&self, i: usize) -> Gate {
        (self.svar_labels.len() + i) as Gate
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn kind(&self, g: Gate) -> GateKind {
        self.kinds[g as usize]
    }

    pub fn gate(&mut self, kind: GateKind, inputs: &[Gate]) -> Gate {
        let g = self.kinds.len() as Gate;
        debug_assert!(inputs.iter().all(|&i| i < g));
        self.kinds.push(kind);
        self.list.extend_from_slice(inputs);
        self.start.push(self.list.len() as u32);
        g
    }

    pub fn finish(self, output: Gate, secondary: Option<Gate>) -> Result<HybridCircuit> {
        let mut c = HybridCircuit {
            kinds: self.kinds,
            inputs: Csr { start: self.start, list: self.list },
            svar_labels: self.svar_labels,
            bvar_labels: self.bvar_labels,
            output,
            secondary,
        };
        c.kinds.shrink_to_fit();
        c.inputs.list.shrink_to_fit();
        c.inputs.start.shrink_to_fit();
        c.validate()?;
        Ok(c)
    }
}

/// Limits of the exhaustive semantics.
pub const BRUTE_MAX_SVARS: usize = 16;
pub const BRUTE_MAX_BVARS: usize = 12;

/// Value of a gate under a valuation: a sorted set of svar bitmasks, or a
/// Boolean.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Value {
    Set(Vec<u64>),
    Bool(bool),
}

fn evaluate_all(c: &HybridCircuit, nu: &[bool]) -> Result<Vec<Value>> {
    if c.svar_count() > BRUTE_MAX_SVARS {
        return Err(Error::TooLarge(format!("{} svars", c.svar_count())));
    }
    if nu.len() != c.bvar_count() {
        return Err(Error::Precondition("one value per Boolean variable is required".into()));
    }
    let s = c.svar_count();
    let mut vals: Vec<Value> = Vec::with_capacity(c.len());
    for g in c.gates() {
        let inp = c.inputs(g);
        let b = |i: Gate, vals: &[Value]| match &vals[i as usize] {
            Value::Bool(x) => *x,
            Value::Set(_) => unreachable!("validated circuit"),
        };
        let set = |i: Gate, vals: &[Value]| match &vals[i as usize] {
            Value::Set(x) => x.clone(),
            Value::Bool(_) => unreachable!("validated circuit"),
        };
        let v = match c.kind(g) {
            GateKind::Svar => Value::Set(vec![1 << g]),
            GateKind::Bvar => Value::Bool(nu[g as usize - s]),
            GateKind::And => Value::Bool(inp.iter().all(|&i| b(i, &vals))),
            GateKind::Or => Value::Bool(inp.iter().any(|&i| b(i, &vals))),
            GateKind::Not => Value::Bool(!b(inp[0], &vals)),
            GateKind::Union => {
                let mut out: Vec<u64> = inp.iter().flat_map(|&i| set(i, &vals)).collect();
                out.sort_unstable();
                out.dedup();
                Value::Set(out)
            }
            GateKind::Times => {
                let mut out = vec![0u64];
                for &i in inp {
                    let rhs = set(i, &vals);
                    out = out.iter().flat_map(|&x| rhs.iter().map(move |&y| x | y)).collect();
                    out.sort_unstable();
                    out.dedup();
                }
                Value::Set(out)
            }
            GateKind::BoxTimes => {
                if b(inp[1], &vals) {
                    Value::Set(set(inp[0], &vals))
                } else {
                    Value::Set(Vec::new())
                }
            }
        };
        vals.push(v);
    }
    Ok(vals)
}

fn to_assignment(c: &HybridCircuit, mask: u64) -> Vec<Singleton> {
    let mut a: Vec<Singleton> = (0..c.svar_count()).filter(|i| mask >> i & 1 == 1).map(|i| c.svar_labels[i]).collect();
    a.sort();
    a
}

/// The set of assignments captured by `g` under `nu`, by exhaustive
/// evaluation. For the output gate the secondary output contributes `{}`.
pub fn brute_force_semantics(c: &HybridCircuit, nu: &[bool], g: Gate) -> Result<BTreeSet<Vec<Singleton>>> {
    if !c.kind(g).is_set_valued() {
        return Err(Error::Precondition("semantics are defined on set-valued gates".into()));
    }
    let vals = evaluate_all(c, nu)?;
    let Value::Set(masks) = &vals[g as usize] else { unreachable!() };
    let mut out: BTreeSet<_> = masks.iter().map(|&m| to_assignment(c, m)).collect();
    if g == c.output {
        if let Some(sec) = c.secondary {
            if vals[sec as usize] == Value::Bool(true) {
                out.insert(Vec::new());
            }
        }
    }
    Ok(out)
}

/// Every valuation of the Boolean variables, in binary counting order.
pub fn all_valuations(bvars: usize) -> impl Iterator<Item = Valuation> {
    (0u64..1 << bvars).map(move |code| (0..bvars).map(|i| code >> i & 1 == 1).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckMode {
    /// Trust the construction for the semantic properties.
    Certified,
    /// Evaluate the circuit under every valuation.
    BruteForce,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructReport {
    pub decomposable: bool,
    pub deterministic: bool,
    pub upwards_deterministic: bool,
    pub mode: CheckMode,
    pub max_fan_in: usize,
    pub dependency_size: usize,
    pub per_gate_delta: Vec<u32>,
}

/// Structural report. In brute-force mode the semantic properties are
/// checked under every valuation; decomposability is always checked on
/// svar domains when the circuit has at most `BRUTE_MAX_SVARS` svars.
pub fn check_structure(c: &HybridCircuit, mode: CheckMode) -> Result<StructReport> {
    if mode == CheckMode::BruteForce && c.bvar_count() > BRUTE_MAX_BVARS {
        return Err(Error::TooLarge(format!("{} bvars", c.bvar_count())));
    }
    let outs = c.inputs.reversed();
    let mut seen = Vec::new();
    let per_gate_delta: Vec<u32> =
        c.gates().map(|g| c.dependents(&outs, g, &mut seen, g + 1) as u32).collect();
    let dependency_size = per_gate_delta.iter().copied().max().unwrap_or(0) as usize;
    let mut report = StructReport {
        decomposable: true,
        deterministic: true,
        upwards_deterministic: true,
        mode,
        max_fan_in: c.max_fan_in(),
        dependency_size,
        per_gate_delta,
    };
    if c.svar_count() <= BRUTE_MAX_SVARS {
        let mut dom = vec![0u64; c.len()];
        for g in c.gates() {
            dom[g as usize] = match c.kind(g) {
                GateKind::Svar => 1 << g,
                k if k.is_set_valued() => c.inputs(g).iter().fold(0, |acc, &i| acc | dom[i as usize]),
                _ => 0,
            };
            if c.kind(g) == GateKind::Times {
                if let [a, b] = *c.inputs(g) {
                    if a == b || dom[a as usize] & dom[b as usize] != 0 {
                        report.decomposable = false;
                    }
                }
            }
        }
    }
    if mode == CheckMode::Certified {
        return Ok(report);
    }
    for nu in all_valuations(c.bvar_count()) {
        let vals = evaluate_all(c, &nu)?;
        let captures_empty = |g: Gate| match &vals[g as usize] {
            Value::Set(s) => s.first() == Some(&0),
            Value::Bool(b) => *b,
        };
        for g in c.gates() {
            if c.kind(g) == GateKind::Union {
                let mut inp = c.inputs(g).to_vec();
                inp.sort_unstable();
                inp.dedup();
                let total: usize = inp
                    .iter()
                    .map(|&i| match &vals[i as usize] {
                        Value::Set(s) => s.len(),
                        Value::Bool(_) => 0,
                    })
                    .sum();
                let Value::Set(own) = &vals[g as usize] else { unreachable!() };
                if total != own.len() {
                    report.deterministic = false;
                }
            }
        }
        for g in c.gates() {
            let mut pure = Vec::new();
            for &h in outs.of(g) {
                let inp = c.inputs(h);
                let is_pure = match c.kind(h) {
                    GateKind::Union => true,
                    GateKind::Times | GateKind::BoxTimes => {
                        inp.len() != 2 || {
                            let other = if inp[0] == g { inp[1] } else { inp[0] };
                            captures_empty(other)
                        }
                    }
                    _ => false,
                };
                if is_pure {
                    pure.push(h);
                }
            }
            pure.dedup();
            if pure.len() > 1 {
                report.upwards_deterministic = false;
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BoolVal {
    Const(bool),
    Gate(Gate),
}

struct Homogenizer {
    b: CircuitBuilder,
}

impl Homogenizer {
    fn union(&mut self, inputs: &[Option<Gate>]) -> Option<Gate> {
        let live: Vec<Gate> = inputs.iter().flatten().copied().collect();
        match live.len() {
            0 => None,
            1 => Some(live[0]),
            _ => Some(self.b.gate(GateKind::Union, &live)),
        }
    }

    fn times(&mut self, a: Option<Gate>, c: Option<Gate>) -> Option<Gate> {
        Some(self.b.gate(GateKind::Times, &[a?, c?]))
    }

    fn boxtimes(&mut self, p: Option<Gate>, z: BoolVal) -> Option<Gate> {
        match z {
            BoolVal::Const(false) => None,
            BoolVal::Const(true) => p,
            BoolVal::Gate(z) => Some(self.b.gate(GateKind::BoxTimes, &[p?, z])),
        }
    }

    fn junction(&mut self, kind: GateKind, inputs: &[BoolVal]) -> BoolVal {
        let absorbing = kind == GateKind::Or;
        let mut live = Vec::new();
        for &i in inputs {
            match i {
                BoolVal::Const(v) if v == absorbing => return BoolVal::Const(absorbing),
                BoolVal::Const(_) => {}
                BoolVal::Gate(g) => live.push(g),
            }
        }
        live.sort_unstable();
        live.dedup();
        match live.len() {
            0 => BoolVal::Const(!absorbing),
            1 => BoolVal::Gate(live[0]),
            _ => BoolVal::Gate(self.b.gate(kind, &live)),
        }
    }

    fn not(&mut self, x: BoolVal) -> BoolVal {
        match x {
            BoolVal::Const(v) => BoolVal::Const(!v),
            BoolVal::Gate(g) => BoolVal::Gate(self.b.gate(GateKind::Not, &[g])),
        }
    }

    fn materialize(&mut self, x: BoolVal) -> Gate {
        match x {
            BoolVal::Const(true) => self.b.gate(GateKind::And, &[]),
            BoolVal::Const(false) => self.b.gate(GateKind::Or, &[]),
            BoolVal::Gate(g) => g,
        }
    }
}

/// Equivalent circuit in which no set-valued gate captures `{}`; whether
/// `{}` is captured moves to the secondary output. Constant parts are folded
/// away and unused gates trimmed.
pub fn homogenize(c: &HybridCircuit) -> Result<HybridCircuit> {
    if c.secondary.is_some() {
        return Err(Error::Precondition("the circuit already has a secondary output".into()));
    }
    let s = c.svar_count();
    let vars = s + c.bvar_count();
    let mut h = Homogenizer { b: CircuitBuilder::new(c.svar_labels.clone(), c.bvar_labels.clone()) };
    // For set-valued gates: the gate for S(g) \ {{}} and whether {} ∈ S(g).
    let mut pos: Vec<Option<Gate>> = vec![None; c.len()];
    let mut zero: Vec<BoolVal> = vec![BoolVal::Const(false); c.len()];
    for g in c.gates() {
        let gi = g as usize;
        let inp = c.inputs(g);
        match c.kind(g) {
            GateKind::Svar => pos[gi] = Some(g),
            GateKind::Bvar => zero[gi] = BoolVal::Gate(g),
            GateKind::And | GateKind::Or => {
                let xs: Vec<BoolVal> = inp.iter().map(|&i| zero[i as usize]).collect();
                zero[gi] = h.junction(c.kind(g), &xs);
            }
            GateKind::Not => zero[gi] = h.not(zero[inp[0] as usize]),
            GateKind::Union => {
                let ps: Vec<Option<Gate>> = inp.iter().map(|&i| pos[i as usize]).collect();
                let zs: Vec<BoolVal> = inp.iter().map(|&i| zero[i as usize]).collect();
                pos[gi] = h.union(&ps);
                zero[gi] = h.junction(GateKind::Or, &zs);
            }
            GateKind::Times => match *inp {
                [] => zero[gi] = BoolVal::Const(true),
                [a, b] => {
                    let (pa, pb, za, zb) = (pos[a as usize], pos[b as usize], zero[a as usize], zero[b as usize]);
                    let both = h.times(pa, pb);
                    let left = h.boxtimes(pa, zb);
                    let right = h.boxtimes(pb, za);
                    pos[gi] = h.union(&[both, left, right]);
                    zero[gi] = h.junction(GateKind::And, &[za, zb]);
                }
                _ => return Err(Error::Invariant(format!("times gate {g} has {} inputs", inp.len()))),
            },
            GateKind::BoxTimes => {
                let (p, cond) = (inp[0] as usize, zero[inp[1] as usize]);
                pos[gi] = h.boxtimes(pos[p], cond);
                zero[gi] = h.junction(GateKind::And, &[zero[p], cond]);
            }
        }
    }
    debug_assert!(h.b.len() >= vars);
    let out = c.output as usize;
    let output = match pos[out] {
        Some(g) => g,
        None => h.b.gate(GateKind::Union, &[]),
    };
    let secondary = h.materialize(zero[out]);
    Ok(h.b.finish(output, Some(secondary))?.trim())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::tree::{LabelId, NodeId};

    fn sv(var: u32, node: u32) -> Singleton {
        Singleton { var, node: NodeId(node) }
    }

    fn bv(label: u32, node: u32) -> LabelSingleton {
        LabelSingleton { label: LabelId(label), node: NodeId(node) }
    }

    /// The hybrid circuit of the running example: the answers are the
    /// leaves 2 and 3 whose label B differs from the one of the root 1.
    pub(crate) fn sample_circuit() -> HybridCircuit {
        let mut b = CircuitBuilder::new(vec![sv(0, 2), sv(0, 3)], vec![bv(0, 1), bv(0, 2), bv(0, 3)]);
        let (x2, x3) = (b.svar(0), b.svar(1));
        let (b1, b2, b3) = (b.bvar(0), b.bvar(1), b.bvar(2));
        let n1 = b.gate(GateKind::Not, &[b1]);
        let n2 = b.gate(GateKind::Not, &[b2]);
        let n3 = b.gate(GateKind::Not, &[b3]);
        // B on 1 and not on the leaf, or the converse.
        let l2 = b.gate(GateKind::BoxTimes, &[x2, n2]);
        let l3 = b.gate(GateKind::BoxTimes, &[x3, n3]);
        let u1 = b.gate(GateKind::Union, &[l2, l3]);
        let r2 = b.gate(GateKind::BoxTimes, &[x2, b2]);
        let r3 = b.gate(GateKind::BoxTimes, &[x3, b3]);
        let u2 = b.gate(GateKind::Union, &[r2, r3]);
        let left = b.gate(GateKind::BoxTimes, &[u1, b1]);
        let right = b.gate(GateKind::BoxTimes, &[u2, n1]);
        let g0 = b.gate(GateKind::Union, &[left, right]);
        b.finish(g0, None).unwrap()
    }

    fn set(v: &[&[Singleton]]) -> BTreeSet<Vec<Singleton>> {
        v.iter().map(|a| a.to_vec()).collect()
    }

    #[test]
    fn sample_circuit_semantics() {
        let c = sample_circuit();
        let got = brute_force_semantics(&c, &[true, false, false], c.output()).unwrap();
        assert_eq!(got, set(&[&[sv(0, 2)], &[sv(0, 3)]]));
        let got = brute_force_semantics(&c, &[false, true, false], c.output()).unwrap();
        assert_eq!(got, set(&[&[sv(0, 2)]]));
    }

    #[test]
    fn sample_circuit_structure() {
        let r = check_structure(&sample_circuit(), CheckMode::BruteForce).unwrap();
        assert!(r.decomposable && r.deterministic && r.upwards_deterministic);
    }

    #[test]
    fn nullary_union() {
        let mut b = CircuitBuilder::new(vec![], vec![bv(0, 0)]);
        let u = b.gate(GateKind::Union, &[]);
        let c = b.finish(u, None).unwrap();
        for nu in all_valuations(1) {
            assert!(brute_force_semantics(&c, &nu, u).unwrap().is_empty());
        }
    }

    #[test]
    fn single_svar() {
        let b = CircuitBuilder::new(vec![sv(0, 0)], vec![]);
        let c = b.finish(0, None).unwrap();
        let r = check_structure(&c, CheckMode::BruteForce).unwrap();
        assert!(r.decomposable && r.deterministic && r.upwards_deterministic);
        assert_eq!((r.dependency_size, r.max_fan_in), (1, 0));
    }

    #[test]
    fn diamond_is_not_deterministic() {
        let mut b = CircuitBuilder::new(vec![sv(0, 0)], vec![]);
        let ga = b.gate(GateKind::Union, &[0]);
        let gb = b.gate(GateKind::Union, &[0]);
        let top = b.gate(GateKind::Union, &[ga, gb]);
        let c = b.finish(top, None).unwrap();
        let r = check_structure(&c, CheckMode::BruteForce).unwrap();
        assert!(!r.deterministic);
        assert!(!r.upwards_deterministic);
    }

    #[test]
    fn validate_rejects_bad_boxtimes() {
        let mut b = CircuitBuilder::new(vec![sv(0, 0), sv(0, 1)], vec![]);
        let g = b.gate(GateKind::BoxTimes, &[0, 1]);
        assert!(matches!(b.finish(g, None), Err(Error::Invariant(_))));
    }

    #[test]
    fn homogenize_empty_product() {
        let mut b = CircuitBuilder::new(vec![], vec![]);
        let t = b.gate(GateKind::Times, &[]);
        let c = b.finish(t, None).unwrap();
        let h = homogenize(&c).unwrap();
        assert!(h.is_homogenized());
        assert!(h.inputs(h.output()).is_empty() && h.kind(h.output()) == GateKind::Union);
        let sec = h.secondary().unwrap();
        assert_eq!(h.kind(sec), GateKind::And);
        assert_eq!(brute_force_semantics(&h, &[], h.output()).unwrap(), set(&[&[]]));
    }

    #[test]
    fn homogenize_product_of_svars() {
        let mut b = CircuitBuilder::new(vec![sv(0, 0), sv(1, 1)], vec![]);
        let t = b.gate(GateKind::Times, &[0, 1]);
        let c = b.finish(t, None).unwrap();
        let h = homogenize(&c).unwrap();
        assert_eq!(brute_force_semantics(&h, &[], h.output()).unwrap(), set(&[&[sv(0, 0), sv(1, 1)]]));
        assert_eq!(h.kind(h.secondary().unwrap()), GateKind::Or);
    }

    #[test]
    fn homogenize_sample_circuit() {
        let c = sample_circuit();
        let h = homogenize(&c).unwrap();
        for nu in all_valuations(3) {
            assert_eq!(
                brute_force_semantics(&c, &nu, c.output()).unwrap(),
                brute_force_semantics(&h, &nu, h.output()).unwrap()
            );
        }
        let r = check_structure(&h, CheckMode::BruteForce).unwrap();
        assert!(r.decomposable && r.deterministic && r.upwards_deterministic);
    }

    #[test]
    fn reversed_adjacency() {
        let c = sample_circuit();
        let outs = c.input_csr().reversed();
        for g in c.gates() {
            for &i in c.inputs(g) {
                assert!(outs.of(i).contains(&g));
            }
        }
        assert_eq!(outs.edge_count(), c.wire_count());
    }
}
