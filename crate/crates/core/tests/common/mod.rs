#![allow(dead_code)]

use rand::Rng;
use treenum::automaton::{example_automata, TableAutomaton, VarSet, CATALOG};
use treenum::tree::{LabeledTree, NodeId};

/// Every full binary tree shape with `n` nodes (`n` odd).
pub fn shapes(n: usize, alphabet: &[String]) -> Vec<LabeledTree> {
    fn kids_of(n: usize) -> Vec<Vec<Option<[usize; 2]>>> {
        if n == 1 {
            return vec![vec![None]];
        }
        let mut out = Vec::new();
        for l in (1..n - 1).step_by(2) {
            let r = n - 1 - l;
            for left in kids_of(l) {
                for right in kids_of(r) {
                    // Root 0, left subtree at 1.., right subtree after it.
                    let mut k = vec![Some([1, 1 + l])];
                    k.extend(left.iter().map(|c| c.map(|[a, b]| [a + 1, b + 1])));
                    k.extend(right.iter().map(|c| c.map(|[a, b]| [a + 1 + l, b + 1 + l])));
                    out.push(k);
                }
            }
        }
        out
    }
    kids_of(n).into_iter().map(|k| LabeledTree::from_kids(alphabet.to_vec(), &k, 0).unwrap()).collect()
}

/// All full binary tree shapes with at most `max` nodes.
pub fn shapes_up_to(max: usize, alphabet: &[String]) -> Vec<LabeledTree> {
    (1..=max).step_by(2).flat_map(|n| shapes(n, alphabet)).collect()
}

/// A random full binary tree with `internal` internal nodes, grown by
/// splitting uniformly chosen leaves.
pub fn random_tree(rng: &mut impl Rng, internal: usize, alphabet: &[String]) -> LabeledTree {
    let mut kids: Vec<Option<[usize; 2]>> = vec![None];
    let mut leaves = vec![0usize];
    for _ in 0..internal {
        let i = rng.random_range(0..leaves.len());
        let v = leaves.swap_remove(i);
        let (a, b) = (kids.len(), kids.len() + 1);
        kids.push(None);
        kids.push(None);
        kids[v] = Some([a, b]);
        leaves.push(a);
        leaves.push(b);
    }
    LabeledTree::from_kids(alphabet.to_vec(), &kids, 0).unwrap()
}

/// A random tree whose subtree splits are uniform, which makes it much
/// deeper than `random_tree`.
pub fn random_split_tree(rng: &mut impl Rng, internal: usize, alphabet: &[String]) -> LabeledTree {
    let mut kids: Vec<Option<[usize; 2]>> = vec![None];
    let mut stack = vec![(0usize, internal)];
    while let Some((v, k)) = stack.pop() {
        if k == 0 {
            continue;
        }
        let l = rng.random_range(0..k);
        let (a, b) = (kids.len(), kids.len() + 1);
        kids.push(None);
        kids.push(None);
        kids[v] = Some([a, b]);
        stack.push((a, l));
        stack.push((b, k - 1 - l));
    }
    LabeledTree::from_kids(alphabet.to_vec(), &kids, 0).unwrap()
}

pub fn randomize_labels(rng: &mut impl Rng, t: &mut LabeledTree) {
    let width = t.alphabet().len();
    for n in 0..t.len() {
        let mask = if width == 0 { 0 } else { rng.random_range(0..1u32 << width) };
        t.set_label_mask(NodeId(n as u32), mask);
    }
}

/// Catalog automata with at most `states` states and `enum_vars` free variables.
pub fn small_catalog(states: usize, enum_vars: usize) -> Vec<(&'static str, TableAutomaton, VarSet)> {
    CATALOG
        .iter()
        .map(|&name| {
            let (a, z) = example_automata(name).unwrap();
            (name, a, z)
        })
        .filter(|(_, a, z)| a.states() <= states && z.m() <= enum_vars)
        .collect()
}

pub fn alphabet(z: &VarSet) -> Vec<String> {
    z.upd_vars.clone()
}

/// Least-squares fit `y ≈ a + b·x`.
pub fn fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let b = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    (my - b * mx, b)
}
