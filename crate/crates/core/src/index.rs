//! Update-maintained structures over a homogenized hybrid circuit: the
//! shortcut function `δ`, the partial evaluation `ω_ν`, and the switchboard
//! whose live edges form the reachability forest used for enumeration.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::circuit::{Csr, Gate, GateKind, HybridCircuit, Valuation};
use crate::error::{Error, Result};
use crate::forest::ReachForest;
use crate::tree::NONE;

/// `δ(g)`: for a ⊠-gate, the first gate below it reached through ⊠ set
/// inputs that is not a ⊠-gate; the identity on other set-valued gates and
/// `NONE` on Boolean gates.
pub fn compute_shortcuts(c: &HybridCircuit) -> Vec<Gate> {
    let mut d = vec![NONE; c.len()];
    for g in c.gates() {
        d[g as usize] = match c.kind(g) {
            GateKind::BoxTimes => d[c.inputs(g)[0] as usize],
            k if k.is_set_valued() => g,
            _ => NONE,
        };
    }
    d
}

fn eval_gate(c: &HybridCircuit, omega: &[bool], nu: &[bool], g: Gate) -> bool {
    let inp = c.inputs(g);
    match c.kind(g) {
        GateKind::Svar => true,
        GateKind::Bvar => nu[g as usize - c.svar_count()],
        GateKind::Union | GateKind::Or => inp.iter().any(|&i| omega[i as usize]),
        GateKind::Times | GateKind::BoxTimes | GateKind::And => inp.iter().all(|&i| omega[i as usize]),
        GateKind::Not => !omega[inp[0] as usize],
    }
}

/// `ω_ν`: Boolean values, and non-emptiness of set-valued gates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialEval {
    pub nu: Valuation,
    pub omega: Vec<bool>,
    queued: Vec<bool>,
}

pub fn build_partial_eval(c: &HybridCircuit, nu: Valuation) -> Result<PartialEval> {
    if nu.len() != c.bvar_count() {
        return Err(Error::Precondition("one value per Boolean variable is required".into()));
    }
    let mut omega = vec![false; c.len()];
    for g in c.gates() {
        omega[g as usize] = eval_gate(c, &omega, &nu, g);
    }
    Ok(PartialEval { nu, omega, queued: vec![false; c.len()] })
}

/// Gates whose `ω` changed after a toggle, and how many were recomputed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EvalChange {
    pub changed: Vec<Gate>,
    pub touched: usize,
}

/// Toggles Boolean variable gate `g` and propagates in topological order
/// through `Δ(g)`. `outs` is the reversed adjacency of `c`.
pub fn update_partial_eval(c: &HybridCircuit, outs: &Csr, pe: &mut PartialEval, g: Gate) -> Result<EvalChange> {
    if c.kind(g) != GateKind::Bvar {
        return Err(Error::Precondition(format!("gate {g} is not a Boolean variable")));
    }
    let i = g as usize - c.svar_count();
    pe.nu[i] = !pe.nu[i];
    let mut out = EvalChange::default();
    let mut heap = BinaryHeap::new();
    heap.push(Reverse(g));
    pe.queued[g as usize] = true;
    while let Some(Reverse(h)) = heap.pop() {
        pe.queued[h as usize] = false;
        out.touched += 1;
        let v = eval_gate(c, &pe.omega, &pe.nu, h);
        if v == pe.omega[h as usize] {
            continue;
        }
        pe.omega[h as usize] = v;
        out.changed.push(h);
        for &w in outs.of(h) {
            if !pe.queued[w as usize] {
                pe.queued[w as usize] = true;
                heap.push(Reverse(w));
            }
        }
    }
    Ok(out)
}

/// Panel edges `(δ(g'), g)` for every wire `(g', g)` into a union gate `g`,
/// and their liveness `β_ν`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Switchboard {
    /// For each wire position into a union: the position of the first wire
    /// of the same union with the same panel tail.
    canon: Vec<u32>,
    /// Liveness, stored at canonical positions.
    live: Vec<bool>,
    start: Vec<u32>,
}

/// Live-edge changes, each edge written `(union head, tail)`; sorted by head.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeDiff {
    pub plus: Vec<(Gate, Gate)>,
    pub minus: Vec<(Gate, Gate)>,
}

impl Switchboard {
    pub fn wire_positions(&self, c: &HybridCircuit, g: Gate) -> std::ops::Range<usize> {
        debug_assert_eq!(c.kind(g), GateKind::Union);
        self.start[g as usize] as usize..self.start[g as usize + 1] as usize
    }

    /// Distinct panel edges into `g` with their liveness.
    pub fn edges_into<'a>(
        &'a self,
        c: &'a HybridCircuit,
        delta: &'a [Gate],
        g: Gate,
    ) -> impl Iterator<Item = (Gate, bool)> + 'a {
        let r = self.start[g as usize] as usize;
        c.inputs(g).iter().enumerate().filter_map(move |(k, &i)| {
            let p = r + k;
            (self.canon[p] as usize == p).then(|| (delta[i as usize], self.live[p]))
        })
    }

    pub fn edge_count(&self) -> usize {
        self.canon.iter().enumerate().filter(|&(p, &q)| p == q as usize).count()
    }

    /// The largest number of distinct panel edges into one union.
    pub fn max_degree(&self, c: &HybridCircuit) -> usize {
        c.gates()
            .filter(|&g| c.kind(g) == GateKind::Union)
            .map(|g| self.wire_positions(c, g).filter(|&p| self.canon[p] as usize == p).count())
            .max()
            .unwrap_or(0)
    }

    fn recompute(&mut self, c: &HybridCircuit, delta: &[Gate], omega: &[bool], g: Gate, diff: &mut EdgeDiff) {
        let base = self.start[g as usize] as usize;
        let inp = c.inputs(g);
        for (k, &i) in inp.iter().enumerate() {
            let p = base + k;
            if self.canon[p] as usize != p {
                continue;
            }
            let tail = delta[i as usize];
            let now = inp[k..].iter().any(|&j| delta[j as usize] == tail && omega[j as usize]);
            if now != self.live[p] {
                self.live[p] = now;
                if now {
                    diff.plus.push((g, tail));
                } else {
                    diff.minus.push((g, tail));
                }
            }
        }
    }
}

pub fn build_switchboard(c: &HybridCircuit, delta: &[Gate], pe: &PartialEval) -> Switchboard {
    let mut start = vec![0u32; c.len() + 1];
    let mut canon = Vec::new();
    for g in c.gates() {
        if c.kind(g) == GateKind::Union {
            let base = canon.len();
            let inp = c.inputs(g);
            for (k, &i) in inp.iter().enumerate() {
                let tail = delta[i as usize];
                let first = inp[..k].iter().position(|&j| delta[j as usize] == tail).unwrap_or(k);
                canon.push((base + first) as u32);
            }
        }
        start[g as usize + 1] = canon.len() as u32;
    }
    let mut sb = Switchboard { live: vec![false; canon.len()], canon, start };
    let mut sink = EdgeDiff::default();
    for g in c.gates() {
        if c.kind(g) == GateKind::Union {
            sb.recompute(c, delta, &pe.omega, g, &mut sink);
        }
    }
    sb
}

/// Re-evaluates the panel edges fed by a wire whose tail changed `ω`.
pub fn update_switchboard(
    sb: &mut Switchboard,
    c: &HybridCircuit,
    outs: &Csr,
    delta: &[Gate],
    pe: &PartialEval,
    changed: &[Gate],
) -> EdgeDiff {
    let mut heads: Vec<Gate> =
        changed.iter().flat_map(|&g| outs.of(g).iter().copied()).filter(|&h| c.kind(h) == GateKind::Union).collect();
    heads.sort_unstable();
    heads.dedup();
    let mut diff = EdgeDiff::default();
    for h in heads {
        sb.recompute(c, delta, &pe.omega, h, &mut diff);
    }
    diff
}

/// The forest whose edges are the live panel edges, oriented from the union
/// head to the tail, with times and svar gates as exits.
pub fn build_forest(c: &HybridCircuit, delta: &[Gate], sb: &Switchboard) -> Result<ReachForest> {
    let exits: Vec<bool> = c.gates().map(|g| matches!(c.kind(g), GateKind::Times | GateKind::Svar)).collect();
    let mut edges = Vec::new();
    for g in c.gates() {
        if c.kind(g) == GateKind::Union {
            edges.extend(sb.edges_into(c, delta, g).filter(|e| e.1).map(|(t, _)| (g, t)));
        }
    }
    ReachForest::from_edges(exits, sb.max_degree(c).max(1), &edges)
        .map_err(|e| Error::Invariant(format!("live switchboard is not a forest: {e}")))
}

/// Touched work of one relabeling.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UpdateReport {
    pub touched_gates: usize,
    pub touched_forest: usize,
    pub edges_on: usize,
    pub edges_off: usize,
}

/// Everything needed to enumerate the circuit under the current valuation.
#[derive(Debug, Clone)]
pub struct EnumIndex {
    pub circuit: HybridCircuit,
    pub outs: Csr,
    pub delta: Vec<Gate>,
    pub pe: PartialEval,
    pub switchboard: Switchboard,
    pub forest: ReachForest,
    generation: u64,
}

impl EnumIndex {
    pub fn build(circuit: HybridCircuit, nu: Valuation) -> Result<Self> {
        if !circuit.is_homogenized() || circuit.secondary().is_none() {
            return Err(Error::Precondition("the circuit must be homogenized".into()));
        }
        let outs = circuit.input_csr().reversed();
        let delta = compute_shortcuts(&circuit);
        let pe = build_partial_eval(&circuit, nu)?;
        let switchboard = build_switchboard(&circuit, &delta, &pe);
        let forest = build_forest(&circuit, &delta, &switchboard)?;
        Ok(EnumIndex { circuit, outs, delta, pe, switchboard, forest, generation: 0 })
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn omega(&self, g: Gate) -> bool {
        self.pe.omega[g as usize]
    }

    pub fn valuation(&self) -> &[bool] {
        &self.pe.nu
    }

    /// Toggles Boolean variable `i` and updates every structure.
    pub fn toggle(&mut self, i: usize) -> Result<UpdateReport> {
        if i >= self.circuit.bvar_count() {
            return Err(Error::Precondition(format!("no Boolean variable {i}")));
        }
        self.generation += 1;
        let g = self.circuit.bvar_gate(i);
        let ch = update_partial_eval(&self.circuit, &self.outs, &mut self.pe, g)?;
        let diff = update_switchboard(&mut self.switchboard, &self.circuit, &self.outs, &self.delta, &self.pe, &ch.changed);
        let touched_forest = self
            .forest
            .apply_batch(&diff.minus, &diff.plus)
            .map_err(|e| Error::Invariant(format!("live switchboard is not a forest: {e}")))?;
        Ok(UpdateReport {
            touched_gates: ch.touched,
            touched_forest,
            edges_on: diff.plus.len(),
            edges_off: diff.minus.len(),
        })
    }
}
