//! Deterministic bottom-up tree automata over integer letters.
//!
//! Automata over `2^Z` read a letter that is a bitmask over the ordered
//! variables of a [`VarSet`]: bit `i` is the enumeration variable `X_i` and
//! bit `m + j` is the label variable `Y_j`.

use std::collections::{BTreeSet, HashMap};

use serde::Deserialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::tree::{LabelId, LabelSingleton, LabelingAssignment, LabeledTree, NodeId};

pub type State = u64;
pub type Letter = u32;

pub trait TreeAutomaton {
    fn state_count(&self) -> u64;
    fn letter_count(&self) -> u32;
    fn init(&self, a: Letter) -> State;
    fn trans(&self, left: State, right: State, a: Letter) -> State;
    fn is_final(&self, q: State) -> bool;
}

impl<A: TreeAutomaton + ?Sized> TreeAutomaton for &A {
    fn state_count(&self) -> u64 {
        (**self).state_count()
    }
    fn letter_count(&self) -> u32 {
        (**self).letter_count()
    }
    fn init(&self, a: Letter) -> State {
        (**self).init(a)
    }
    fn trans(&self, left: State, right: State, a: Letter) -> State {
        (**self).trans(left, right, a)
    }
    fn is_final(&self, q: State) -> bool {
        (**self).is_final(q)
    }
}

/// An automaton given by total transition tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableAutomaton {
    names: Vec<String>,
    letters: u32,
    finals: Vec<bool>,
    init: Vec<u32>,
    trans: Vec<u32>,
}

impl TableAutomaton {
    pub fn from_fn(
        names: Vec<String>,
        letters: u32,
        finals: &[usize],
        init: impl Fn(Letter) -> usize,
        trans: impl Fn(usize, usize, Letter) -> usize,
    ) -> Self {
        let n = names.len();
        let mut fin = vec![false; n];
        for &f in finals {
            fin[f] = true;
        }
        let init = (0..letters).map(|a| init(a) as u32).collect();
        let mut tab = Vec::with_capacity(n * n * letters as usize);
        for q1 in 0..n {
            for q2 in 0..n {
                for a in 0..letters {
                    tab.push(trans(q1, q2, a) as u32);
                }
            }
        }
        let t = TableAutomaton { names, letters, finals: fin, init, trans: tab };
        debug_assert!(t.init.iter().chain(&t.trans).all(|&q| (q as usize) < n));
        t
    }

    pub fn states(&self) -> usize {
        self.names.len()
    }

    pub fn state_name(&self, q: usize) -> &str {
        &self.names[q]
    }
}

impl TreeAutomaton for TableAutomaton {
    fn state_count(&self) -> u64 {
        self.names.len() as u64
    }
    fn letter_count(&self) -> u32 {
        self.letters
    }
    fn init(&self, a: Letter) -> State {
        self.init[a as usize] as State
    }
    fn trans(&self, left: State, right: State, a: Letter) -> State {
        let n = self.names.len();
        self.trans[(left as usize * n + right as usize) * self.letters as usize + a as usize] as State
    }
    fn is_final(&self, q: State) -> bool {
        self.finals[q as usize]
    }
}

/// Ordered enumeration variables followed by one label variable per label.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VarSet {
    pub enum_vars: Vec<String>,
    pub upd_vars: Vec<String>,
}

impl VarSet {
    pub fn new(enum_vars: &[&str], upd_vars: &[&str]) -> Self {
        VarSet {
            enum_vars: enum_vars.iter().map(|s| s.to_string()).collect(),
            upd_vars: upd_vars.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn m(&self) -> usize {
        self.enum_vars.len()
    }

    /// `|Z|`.
    pub fn len(&self) -> usize {
        self.enum_vars.len() + self.upd_vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn letter_count(&self) -> u32 {
        1 << self.len()
    }

    pub fn letter(&self, enum_mask: u32, upd_mask: u32) -> Letter {
        enum_mask | upd_mask << self.m()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.enum_vars
            .iter()
            .chain(&self.upd_vars)
            .position(|v| v == name)
    }

    fn check(&self) -> Result<()> {
        if self.len() > 16 {
            return Err(Error::Precondition("at most 16 variables are supported".into()));
        }
        let mut names: Vec<_> = self.enum_vars.iter().chain(&self.upd_vars).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Precondition("variable names must be distinct".into()));
        }
        Ok(())
    }

    /// For each label variable, the tree label carrying the same name.
    pub fn label_map(&self, t: &LabeledTree) -> Result<Vec<LabelId>> {
        self.upd_vars
            .iter()
            .map(|y| t.label_id(y).ok_or_else(|| Error::UnknownLabel(y.clone())))
            .collect()
    }

    /// The label variables of node `n` as a mask indexed like `upd_vars`.
    pub fn upd_mask(&self, label_map: &[LabelId], t: &LabeledTree, n: NodeId) -> u32 {
        let mut m = 0;
        for (j, &l) in label_map.iter().enumerate() {
            if t.has_label(n, l) {
                m |= 1 << j;
            }
        }
        m
    }
}

/// A pair `<X_i : n>`: node `n` belongs to variable `X_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Singleton {
    pub var: u32,
    pub node: NodeId,
}

/// Sorted list of singletons.
pub type Assignment = Vec<Singleton>;

/// Bottom-up run over `t` reading `letters[n]` at node `n`.
pub fn run<A: TreeAutomaton>(a: &A, t: &LabeledTree, letters: &[Letter]) -> Result<(Vec<State>, bool)> {
    if letters.len() != t.len() {
        return Err(Error::Precondition("one letter per node is required".into()));
    }
    if let Some(&bad) = letters.iter().find(|&&l| l >= a.letter_count()) {
        return Err(Error::LetterOutOfRange(bad));
    }
    let mut st = vec![0; t.len()];
    for n in t.nodes().rev() {
        let l = letters[n.index()];
        st[n.index()] = match t.children(n) {
            None => a.init(l),
            Some((c1, c2)) => a.trans(st[c1.index()], st[c2.index()], l),
        };
    }
    let acc = a.is_final(st[0]);
    Ok((st, acc))
}

/// All accepting `Z`-annotations of the shape of `t`, split into their
/// enumeration part and their labeling part (label ids index `z.upd_vars`).
pub fn brute_force_output<A: TreeAutomaton>(
    a: &A,
    t: &LabeledTree,
    z: &VarSet,
) -> Result<BTreeSet<(Assignment, LabelingAssignment)>> {
    let bits = z.len() * t.len();
    if bits > 24 {
        return Err(Error::TooLarge(format!("{bits} annotation bits")));
    }
    let per = z.len();
    let mut out = BTreeSet::new();
    let mut letters = vec![0; t.len()];
    for code in 0u64..1 << bits {
        for (i, l) in letters.iter_mut().enumerate() {
            *l = ((code >> (i * per)) & ((1 << per) - 1)) as Letter;
        }
        if run(a, t, &letters)?.1 {
            let mut alpha = Vec::new();
            let mut lab = BTreeSet::new();
            for n in t.nodes() {
                let l = letters[n.index()];
                for i in 0..z.m() {
                    if l >> i & 1 == 1 {
                        alpha.push(Singleton { var: i as u32, node: n });
                    }
                }
                for j in 0..z.upd_vars.len() {
                    if l >> (z.m() + j) & 1 == 1 {
                        lab.insert(LabelSingleton { label: LabelId(j as u32), node: n });
                    }
                }
            }
            alpha.sort();
            out.insert((alpha, lab));
        }
    }
    Ok(out)
}

/// The answers on the labeled tree `t`: all accepting enumeration
/// annotations, with label variables read from the labels of `t`.
pub fn brute_force_answers<A: TreeAutomaton>(
    a: &A,
    t: &LabeledTree,
    z: &VarSet,
) -> Result<BTreeSet<Assignment>> {
    let bits = z.m() * t.len();
    if bits > 24 {
        return Err(Error::TooLarge(format!("{bits} annotation bits")));
    }
    let map = z.label_map(t)?;
    let base: Vec<Letter> = t.nodes().map(|n| z.letter(0, z.upd_mask(&map, t, n))).collect();
    let m = z.m();
    let mut out = BTreeSet::new();
    let mut letters = base.clone();
    for code in 0u64..1 << bits {
        for (i, l) in letters.iter_mut().enumerate() {
            *l = base[i] | ((code >> (i * m)) & ((1 << m) - 1)) as Letter;
        }
        if run(a, t, &letters)?.1 {
            let mut alpha = Vec::new();
            for n in t.nodes() {
                for i in 0..m {
                    if letters[n.index()] >> i & 1 == 1 {
                        alpha.push(Singleton { var: i as u32, node: n });
                    }
                }
            }
            alpha.sort();
            out.insert(alpha);
        }
    }
    Ok(out)
}

pub const CATALOG: &[&str] = &[
    "example1",
    "select-l",
    "exists-l",
    "ancestor",
    "ancestor-proj",
    "select-leaves",
    "select-b-under-a",
    "exists-a-above-b",
    "parity",
    "universal",
    "reject-all",
];

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn bit(a: Letter, i: usize) -> bool {
    a >> i & 1 == 1
}

/// Hand-built automata; first-order variables are forced to be singletons.
pub fn example_automata(name: &str) -> Result<(TableAutomaton, VarSet)> {
    const N: usize = 0;
    let (a, z) = match name {
        // A leaf x whose B label differs from the one of its parent.
        "example1" => {
            let z = VarSet::new(&["x"], &["B"]);
            const P0: usize = 1;
            const F: usize = 3;
            const R: usize = 4;
            let a = TableAutomaton::from_fn(
                names(&["N", "P0", "P1", "F", "R"]),
                z.letter_count(),
                &[F],
                |a| if bit(a, 0) { P0 + bit(a, 1) as usize } else { N },
                |q1, q2, a| {
                    if bit(a, 0) {
                        return R;
                    }
                    let b = bit(a, 1) as usize;
                    let conv = |q: usize| match q {
                        1 | 2 if q - P0 != b => F,
                        1 | 2 => R,
                        q => q,
                    };
                    match (conv(q1), conv(q2)) {
                        (R, _) | (_, R) | (F, F) => R,
                        (F, _) | (_, F) => F,
                        _ => N,
                    }
                },
            );
            (a, z)
        }
        "select-l" => {
            let z = VarSet::new(&["x"], &["l"]);
            let a = TableAutomaton::from_fn(
                names(&["N", "F", "R"]),
                z.letter_count(),
                &[1],
                |a| match (bit(a, 0), bit(a, 1)) {
                    (true, true) => 1,
                    (true, false) => 2,
                    _ => N,
                },
                |q1, q2, a| {
                    if q1 == 2 || q2 == 2 {
                        return 2;
                    }
                    let found = q1 + q2 + bit(a, 0) as usize;
                    if found > 1 || (bit(a, 0) && !bit(a, 1)) {
                        2
                    } else {
                        found
                    }
                },
            );
            (a, z)
        }
        "exists-l" => {
            let z = VarSet::new(&[], &["l"]);
            let a = TableAutomaton::from_fn(
                names(&["no", "yes"]),
                z.letter_count(),
                &[1],
                |a| a as usize & 1,
                |q1, q2, a| q1 | q2 | (a as usize & 1),
            );
            (a, z)
        }
        // x is a strict ancestor of y.
        "ancestor" => {
            let z = VarSet::new(&["x", "y"], &[]);
            const YB: usize = 1;
            const D: usize = 2;
            const R: usize = 3;
            let a = TableAutomaton::from_fn(
                names(&["E", "Ybelow", "D", "R"]),
                z.letter_count(),
                &[D],
                |a| match (bit(a, 0), bit(a, 1)) {
                    (false, false) => N,
                    (false, true) => YB,
                    _ => R,
                },
                |q1, q2, a| {
                    if q1 == R || q2 == R || (q1 != N && q2 != N) {
                        return R;
                    }
                    let c = q1.max(q2);
                    match (bit(a, 0), bit(a, 1)) {
                        (true, true) => R,
                        (true, false) => if c == YB { D } else { R },
                        (false, true) => if c == N { YB } else { R },
                        (false, false) => c,
                    }
                },
            );
            (a, z)
        }
        // There is some y below x, i.e. x is an internal node.
        "ancestor-proj" => {
            let z = VarSet::new(&["x"], &[]);
            let a = TableAutomaton::from_fn(
                names(&["E", "D", "R"]),
                z.letter_count(),
                &[1],
                |a| if bit(a, 0) { 2 } else { N },
                |q1, q2, a| {
                    if q1 == 2 || q2 == 2 {
                        return 2;
                    }
                    let d = q1 + q2;
                    match (bit(a, 0), d) {
                        (_, 2) => 2,
                        (true, 0) => 1,
                        (true, _) => 2,
                        (false, d) => d,
                    }
                },
            );
            (a, z)
        }
        "select-leaves" => {
            let z = VarSet::new(&["x"], &[]);
            let a = TableAutomaton::from_fn(
                names(&["N", "F", "R"]),
                z.letter_count(),
                &[1],
                |a| a as usize & 1,
                |q1, q2, a| {
                    if q1 == 2 || q2 == 2 || bit(a, 0) || q1 + q2 > 1 {
                        2
                    } else {
                        q1 + q2
                    }
                },
            );
            (a, z)
        }
        // x is B-labeled and has an A-labeled strict ancestor.
        "select-b-under-a" => {
            let z = VarSet::new(&["x"], &["A", "B"]);
            const X: usize = 1;
            const F: usize = 2;
            const R: usize = 3;
            let a = TableAutomaton::from_fn(
                names(&["N", "X", "F", "R"]),
                z.letter_count(),
                &[F],
                |a| match (bit(a, 0), bit(a, 2)) {
                    (true, true) => X,
                    (true, false) => R,
                    _ => N,
                },
                |q1, q2, a| {
                    if q1 == R || q2 == R || (q1 != N && q2 != N) {
                        return R;
                    }
                    let c = q1.max(q2);
                    if bit(a, 0) {
                        return if c == N && bit(a, 2) { X } else { R };
                    }
                    match c {
                        X if bit(a, 1) => F,
                        c => c,
                    }
                },
            );
            (a, z)
        }
        // Some a-labeled node has a b-labeled strict descendant.
        "exists-a-above-b" => {
            let z = VarSet::new(&[], &["a", "b"]);
            let a = TableAutomaton::from_fn(
                names(&["none", "b-below", "yes"]),
                z.letter_count(),
                &[2],
                |a| bit(a, 1) as usize,
                |q1, q2, a| {
                    let s = q1.max(q2);
                    if s == 2 || (s == 1 && bit(a, 0)) {
                        2
                    } else {
                        s.max(bit(a, 1) as usize)
                    }
                },
            );
            (a, z)
        }
        // Number of leaves modulo 2; accepts an even count.
        "parity" => {
            let z = VarSet::default();
            let a = TableAutomaton::from_fn(names(&["even", "odd"]), 1, &[0], |_| 1, |q1, q2, _| q1 ^ q2);
            (a, z)
        }
        "universal" => {
            let z = VarSet::default();
            (TableAutomaton::from_fn(names(&["q"]), 1, &[0], |_| 0, |_, _, _| 0), z)
        }
        "reject-all" => {
            let z = VarSet::default();
            (TableAutomaton::from_fn(names(&["q"]), 1, &[], |_| 0, |_, _, _| 0), z)
        }
        _ => return Err(Error::UnknownName(name.to_string())),
    };
    Ok((a, z))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AutomatonDoc {
    #[serde(default)]
    enum_vars: Vec<String>,
    #[serde(default)]
    label_vars: Vec<String>,
    states: Value,
    finals: Vec<Value>,
    #[serde(default)]
    alphabet: Option<Vec<Value>>,
    init: Vec<(Value, Value)>,
    trans: Vec<(Value, Value, Value, Value)>,
}

/// Parses the JSON automaton format. Letters are integer masks over `Z` or
/// lists of variable names; states are indices or names.
pub fn parse_automaton(text: &str) -> Result<(TableAutomaton, VarSet)> {
    let doc: AutomatonDoc = serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
    let z = VarSet { enum_vars: doc.enum_vars, upd_vars: doc.label_vars };
    z.check()?;
    let names: Vec<String> = match &doc.states {
        Value::Number(n) => {
            let n = n.as_u64().ok_or_else(|| Error::Malformed("bad state count".into()))?;
            (0..n).map(|i| i.to_string()).collect()
        }
        Value::Array(v) => v
            .iter()
            .map(|s| s.as_str().map(str::to_string).ok_or_else(|| Error::Malformed("state names must be strings".into())))
            .collect::<Result<_>>()?,
        _ => return Err(Error::Malformed("states must be a count or a list of names".into())),
    };
    if names.is_empty() {
        return Err(Error::Malformed("at least one state is required".into()));
    }
    let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let state = |v: &Value| -> Result<usize> {
        let q = match v {
            Value::Number(n) => n.as_u64().map(|q| q as usize),
            Value::String(s) => index.get(s.as_str()).copied(),
            _ => None,
        };
        q.filter(|&q| q < names.len()).ok_or_else(|| Error::Malformed(format!("unknown state {v}")))
    };
    let letters = z.letter_count();
    let letter = |v: &Value| -> Result<Letter> {
        let l = match v {
            Value::Number(n) => n.as_u64().map(|l| l as Letter),
            Value::Array(vars) => {
                let mut m = 0;
                for var in vars {
                    let i = var
                        .as_str()
                        .and_then(|s| z.var_index(s))
                        .ok_or_else(|| Error::Malformed(format!("unknown variable {var}")))?;
                    m |= 1 << i;
                }
                Some(m)
            }
            _ => None,
        };
        l.filter(|&l| l < letters).ok_or_else(|| Error::Malformed(format!("bad letter {v}")))
    };
    if let Some(alphabet) = &doc.alphabet {
        let mut seen = vec![false; letters as usize];
        for l in alphabet {
            let l = letter(l)? as usize;
            if std::mem::replace(&mut seen[l], true) {
                return Err(Error::Malformed("letter repeated in alphabet".into()));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Malformed("the alphabet must contain every subset of the variables".into()));
        }
    }
    let n = names.len();
    let finals = doc.finals.iter().map(&state).collect::<Result<Vec<_>>>()?;
    let mut init = vec![None; letters as usize];
    for (l, q) in &doc.init {
        set_once(&mut init[letter(l)? as usize], state(q)?)?;
    }
    let mut trans = vec![None; n * n * letters as usize];
    for (q1, q2, l, q) in &doc.trans {
        let k = (state(q1)? * n + state(q2)?) * letters as usize + letter(l)? as usize;
        set_once(&mut trans[k], state(q)?)?;
    }
    if init.iter().chain(&trans).any(Option::is_none) {
        return Err(Error::Malformed("init and trans tables must be total".into()));
    }
    let a = TableAutomaton::from_fn(
        names,
        letters,
        &finals,
        |l| init[l as usize].unwrap(),
        |q1, q2, l| trans[(q1 * n + q2) * letters as usize + l as usize].unwrap(),
    );
    Ok((a, z))
}

fn set_once(slot: &mut Option<usize>, q: usize) -> Result<()> {
    match *slot {
        Some(old) if old != q => Err(Error::Malformed("conflicting table entries".into())),
        _ => {
            *slot = Some(q);
            Ok(())
        }
    }
}

/// Serializes to the JSON automaton format, with letters as integer masks.
pub fn serialize_automaton(a: &TableAutomaton, z: &VarSet) -> String {
    let finals: Vec<&str> = (0..a.states()).filter(|&q| a.finals[q]).map(|q| a.state_name(q)).collect();
    let init: Vec<Value> = (0..a.letters)
        .map(|l| serde_json::json!([l, a.state_name(a.init(l) as usize)]))
        .collect();
    let mut trans = Vec::new();
    for q1 in 0..a.states() {
        for q2 in 0..a.states() {
            for l in 0..a.letters {
                let q = a.trans(q1 as State, q2 as State, l) as usize;
                trans.push(serde_json::json!([a.state_name(q1), a.state_name(q2), l, a.state_name(q)]));
            }
        }
    }
    let doc = serde_json::json!({
        "enum_vars": z.enum_vars,
        "label_vars": z.upd_vars,
        "states": a.names,
        "finals": finals,
        "init": init,
        "trans": trans,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("json values serialize");
    s.push('\n');
    s
}
