//! Provenance circuit of an automaton over `{enu, upd, fix}` on an expanded
//! tree.
//!
//! One union gate `g^q_n` is created per node `n` and state `q`, and one
//! product gate per pair of child states, restricted to the states that some
//! annotation reaches at `n` and from which some annotation of the rest of
//! the tree reaches a final state. The other gates capture the empty set
//! under every valuation or do not reach the output, so the restriction
//! keeps the semantics and the structural guarantees.

use crate::automaton::{Singleton, State, TreeAutomaton};
use crate::circuit::{CircuitBuilder, Gate, GateKind, HybridCircuit};
use crate::error::{Error, Result};
use crate::tobool::{EufLabel, EufTree};
use crate::tree::{LabelId, LabelSingleton, NodeId, NONE};

/// Per-node sorted state sets stored in one arena.
struct StateSets {
    span: Vec<(u32, u32)>,
    states: Vec<State>,
}

impl StateSets {
    fn new(n: usize) -> Self {
        StateSets { span: vec![(0, 0); n], states: Vec::new() }
    }

    fn get(&self, n: NodeId) -> &[State] {
        let (s, l) = self.span[n.index()];
        &self.states[s as usize..(s + l) as usize]
    }

    fn set(&mut self, n: NodeId, mut v: Vec<State>) {
        v.sort_unstable();
        v.dedup();
        self.span[n.index()] = (self.states.len() as u32, v.len() as u32);
        self.states.extend(v);
    }

    fn position(&self, n: NodeId, q: State) -> Option<usize> {
        let (s, _) = self.span[n.index()];
        self.get(n).binary_search(&q).ok().map(|i| s as usize + i)
    }
}

fn leaf_letters(e: &EufTree, n: NodeId) -> &'static [bool] {
    match e.label(n) {
        EufLabel::Fix => &[false],
        _ => &[false, true],
    }
}

/// Builds the provenance circuit. Set-valued variables are labeled
/// `<X_i : n>` and Boolean variables `<Y_j : n>` (label id `j` indexing the
/// label variables), with `n` a node of the source tree of `e`.
pub fn build_provenance<A: TreeAutomaton>(a: &A, e: &EufTree) -> Result<HybridCircuit> {
    if a.letter_count() < e.letter(e.tree.root(), false) + 1 {
        return Err(Error::Precondition("the automaton does not read the letters of the expansion".into()));
    }
    let t = &e.tree;
    let m = e.enum_count();
    let mut reach = StateSets::new(t.len());
    for n in t.nodes().rev() {
        let v: Vec<State> = match t.children(n) {
            None => leaf_letters(e, n).iter().map(|&b| a.init(e.letter(n, b))).collect(),
            Some((c1, c2)) => {
                let l = e.letter(n, false);
                let (r1, r2) = (reach.get(c1), reach.get(c2));
                let mut v = Vec::with_capacity(r1.len() * r2.len());
                for &q1 in r1 {
                    for &q2 in r2 {
                        v.push(a.trans(q1, q2, l));
                    }
                }
                v
            }
        };
        reach.set(n, v);
    }
    // Useful states, top-down.
    let mut useful = StateSets::new(t.len());
    let root = t.root();
    let finals: Vec<State> = reach.get(root).iter().copied().filter(|&q| a.is_final(q)).collect();
    useful.set(root, finals);
    for n in t.nodes() {
        let Some((c1, c2)) = t.children(n) else { continue };
        let l = e.letter(n, false);
        let (mut u1, mut u2) = (Vec::new(), Vec::new());
        for &q1 in reach.get(c1) {
            for &q2 in reach.get(c2) {
                if useful.position(n, a.trans(q1, q2, l)).is_some() {
                    u1.push(q1);
                    u2.push(q2);
                }
            }
        }
        useful.set(c1, u1);
        useful.set(c2, u2);
    }
    drop(reach);

    let mut svars = Vec::new();
    let mut bvars = Vec::new();
    let mut var_gate = vec![NONE; t.len()];
    for (leaf, src, var) in e.var_leaves() {
        if var < m {
            var_gate[leaf.index()] = svars.len() as u32;
            svars.push(Singleton { var: var as u32, node: src });
        } else {
            var_gate[leaf.index()] = bvars.len() as u32;
            bvars.push(LabelSingleton { label: LabelId((var - m) as u32), node: src });
        }
    }
    let mut b = CircuitBuilder::new(svars, bvars);
    let mut gate_of = vec![NONE; useful.states.len()];
    let mut pairs: Vec<(State, Gate)> = Vec::new();
    let mut ins: Vec<Gate> = Vec::new();
    for n in t.nodes().rev() {
        let u = useful.get(n);
        if u.is_empty() {
            continue;
        }
        match t.children(n) {
            None => {
                let q0 = a.init(e.letter(n, false));
                let q1 = a.init(e.letter(n, true));
                let want = |q: State| u.binary_search(&q).is_ok();
                let (pos, neg) = match e.label(n) {
                    EufLabel::Fix => (None, want(q0).then(|| b.gate(GateKind::Times, &[]))),
                    EufLabel::Enu => {
                        let pos = want(q1).then(|| b.svar(var_gate[n.index()] as usize));
                        (pos, want(q0).then(|| b.gate(GateKind::Times, &[])))
                    }
                    EufLabel::Upd => {
                        let var = b.bvar(var_gate[n.index()] as usize);
                        let pos = want(q1).then(|| {
                            let one = b.gate(GateKind::Times, &[]);
                            b.gate(GateKind::BoxTimes, &[one, var])
                        });
                        let neg = want(q0).then(|| {
                            let one = b.gate(GateKind::Times, &[]);
                            let not = b.gate(GateKind::Not, &[var]);
                            b.gate(GateKind::BoxTimes, &[one, not])
                        });
                        (pos, neg)
                    }
                };
                let (start, _) = useful.span[n.index()];
                for (i, &q) in u.iter().enumerate() {
                    ins.clear();
                    if q == q1 {
                        ins.extend(pos);
                    }
                    if q == q0 {
                        ins.extend(neg);
                    }
                    gate_of[start as usize + i] = b.gate(GateKind::Union, &ins);
                }
            }
            Some((c1, c2)) => {
                let l = e.letter(n, false);
                pairs.clear();
                let (s1, _) = useful.span[c1.index()];
                let (s2, _) = useful.span[c2.index()];
                for (i, &q1) in useful.get(c1).iter().enumerate() {
                    for (j, &q2) in useful.get(c2).iter().enumerate() {
                        let q = a.trans(q1, q2, l);
                        if u.binary_search(&q).is_ok() {
                            let g1 = gate_of[s1 as usize + i];
                            let g2 = gate_of[s2 as usize + j];
                            pairs.push((q, b.gate(GateKind::Times, &[g1, g2])));
                        }
                    }
                }
                pairs.sort_unstable();
                let (start, _) = useful.span[n.index()];
                for (i, &q) in u.iter().enumerate() {
                    ins.clear();
                    ins.extend(pairs.iter().filter(|p| p.0 == q).map(|p| p.1));
                    gate_of[start as usize + i] = b.gate(GateKind::Union, &ins);
                }
            }
        }
    }
    let (start, len) = useful.span[root.index()];
    let tops: Vec<Gate> = gate_of[start as usize..(start + len) as usize].to_vec();
    let out = b.gate(GateKind::Union, &tops);
    b.finish(out, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::{brute_force_output, example_automata, VarSet};
    use crate::circuit::{all_valuations, brute_force_semantics, check_structure, homogenize, CheckMode};
    use crate::tobool::{expand_tobool, lift_tobool};
    use crate::tree::LabeledTree;
    use std::collections::BTreeSet;

    fn running_tree() -> LabeledTree {
        LabeledTree::from_kids(vec![], &[Some([1, 2]), None, None], 0).unwrap()
    }

    fn circuit_for(name: &str, t: &LabeledTree) -> (HybridCircuit, VarSet) {
        let (a, z) = example_automata(name).unwrap();
        let e = expand_tobool(t, &z);
        (build_provenance(&lift_tobool(&a, z.len()), &e).unwrap(), z)
    }

    /// Valuation giving label variable `j` of node `n` the bit of `lab`.
    fn valuation(c: &HybridCircuit, lab: &BTreeSet<LabelSingleton>) -> Vec<bool> {
        c.bvar_labels().iter().map(|s| lab.contains(s)).collect()
    }

    #[test]
    fn example1_under_running_labeling() {
        let t = running_tree();
        let (c, _) = circuit_for("example1", &t);
        let lab: BTreeSet<_> = [LabelSingleton { label: LabelId(0), node: NodeId(0) }].into();
        let got = brute_force_semantics(&c, &valuation(&c, &lab), c.output()).unwrap();
        let s = |n| vec![Singleton { var: 0, node: NodeId(n) }];
        assert_eq!(got, [s(1), s(2)].into());
    }

    #[test]
    fn reject_all_is_empty() {
        let t = running_tree();
        let (c, _) = circuit_for("reject-all", &t);
        assert!(c.inputs(c.output()).is_empty());
        assert!(brute_force_semantics(&c, &[], c.output()).unwrap().is_empty());
    }

    #[test]
    fn matches_brute_force_output() {
        let shapes = [
            LabeledTree::leaf(vec![]),
            running_tree(),
            LabeledTree::from_kids(vec![], &[Some([1, 2]), Some([3, 4]), None, None, None], 0).unwrap(),
        ];
        for name in ["example1", "select-l", "exists-l", "ancestor", "select-b-under-a", "parity"] {
            for t in &shapes {
                let (a, z) = example_automata(name).unwrap();
                if z.len() * t.len() > 16 {
                    continue;
                }
                let (c, _) = circuit_for(name, t);
                let out = brute_force_output(&a, t, &z).unwrap();
                for nu in all_valuations(c.bvar_count()) {
                    let lab: BTreeSet<_> = c.bvar_labels().iter().zip(&nu).filter(|p| *p.1).map(|p| *p.0).collect();
                    let want: BTreeSet<_> = out.iter().filter(|(_, l)| *l == lab).map(|(x, _)| x.clone()).collect();
                    assert_eq!(brute_force_semantics(&c, &nu, c.output()).unwrap(), want, "{name}");
                }
                let r = check_structure(&c, CheckMode::BruteForce).unwrap();
                assert!(r.decomposable && r.deterministic && r.upwards_deterministic, "{name}");
                let h = homogenize(&c).unwrap();
                let r = check_structure(&h, CheckMode::BruteForce).unwrap();
                assert!(r.decomposable && r.deterministic && r.upwards_deterministic, "{name}");
            }
        }
    }
}
