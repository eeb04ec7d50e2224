//! Reachability forests with first/last/next pointers, enumerating the
//! exits below a vertex with constant delay and maintained under batches of
//! edge insertions and deletions.
//!
//! The order on exits is the preorder of the forest, children being ordered
//! by insertion time.

use crate::error::{Error, Result};
use crate::tree::NONE;

pub type Vertex = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Insert,
    Delete,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForestUpdate {
    pub sign: Sign,
    /// `(parent, child)` pairs.
    pub edges: Vec<(Vertex, Vertex)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachForest {
    degree_bound: usize,
    exit: Vec<bool>,
    parent: Vec<u32>,
    first_child: Vec<u32>,
    last_child: Vec<u32>,
    next_sib: Vec<u32>,
    prev_sib: Vec<u32>,
    degree: Vec<u16>,
    first: Vec<u32>,
    last: Vec<u32>,
    next: Vec<u32>,
    mark: Vec<u32>,
    stamp: u32,
}

fn opt(v: u32) -> Option<Vertex> {
    (v != NONE).then_some(v)
}

impl ReachForest {
    /// A forest without edges; exits point to themselves.
    pub fn new(exits: Vec<bool>, degree_bound: usize) -> Self {
        let n = exits.len();
        let selfish: Vec<u32> = (0..n as u32).map(|v| if exits[v as usize] { v } else { NONE }).collect();
        ReachForest {
            degree_bound,
            exit: exits,
            parent: vec![NONE; n],
            first_child: vec![NONE; n],
            last_child: vec![NONE; n],
            next_sib: vec![NONE; n],
            prev_sib: vec![NONE; n],
            degree: vec![0; n],
            first: selfish.clone(),
            last: selfish,
            next: vec![NONE; n],
            mark: vec![0; n],
            stamp: 0,
        }
    }

    /// Builds the forest with the given edges, children ordered as listed,
    /// and computes all pointers.
    pub fn from_edges(exits: Vec<bool>, degree_bound: usize, edges: &[(Vertex, Vertex)]) -> Result<Self> {
        let mut f = Self::new(exits, degree_bound);
        for &(v, w) in edges {
            f.check_insert(v, w)?;
            f.link(v, w);
        }
        f.check_acyclic(edges.iter().map(|e| e.0))?;
        f.build_index();
        Ok(f)
    }

    pub fn len(&self) -> usize {
        self.exit.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exit.is_empty()
    }

    pub fn degree_bound(&self) -> usize {
        self.degree_bound
    }

    pub fn is_exit(&self, v: Vertex) -> bool {
        self.exit[v as usize]
    }

    pub fn parent(&self, v: Vertex) -> Option<Vertex> {
        opt(self.parent[v as usize])
    }

    pub fn children(&self, v: Vertex) -> impl Iterator<Item = Vertex> + '_ {
        let mut c = self.first_child[v as usize];
        std::iter::from_fn(move || {
            let cur = opt(c)?;
            c = self.next_sib[cur as usize];
            Some(cur)
        })
    }

    pub fn first(&self, v: Vertex) -> Option<Vertex> {
        opt(self.first[v as usize])
    }

    pub fn last(&self, v: Vertex) -> Option<Vertex> {
        opt(self.last[v as usize])
    }

    pub fn next(&self, x: Vertex) -> Option<Vertex> {
        opt(self.next[x as usize])
    }

    pub fn edges(&self) -> Vec<(Vertex, Vertex)> {
        (0..self.len() as u32).flat_map(|v| self.children(v).map(move |w| (v, w))).collect()
    }

    fn check_vertex(&self, v: Vertex) -> Result<()> {
        if (v as usize) < self.len() {
            Ok(())
        } else {
            Err(Error::Forest(format!("unknown vertex {v}")))
        }
    }

    fn check_insert(&self, v: Vertex, w: Vertex) -> Result<()> {
        self.check_vertex(v)?;
        self.check_vertex(w)?;
        if v == w {
            return Err(Error::Forest(format!("self loop on {v}")));
        }
        if self.parent[w as usize] != NONE {
            return Err(Error::Forest(format!("vertex {w} would get a second parent")));
        }
        if self.exit[v as usize] {
            return Err(Error::Forest(format!("exit {v} would get a child")));
        }
        if self.degree[v as usize] as usize >= self.degree_bound {
            return Err(Error::Forest(format!("vertex {v} would exceed the degree bound")));
        }
        Ok(())
    }

    fn link(&mut self, v: Vertex, w: Vertex) {
        let (vi, wi) = (v as usize, w as usize);
        self.parent[wi] = v;
        self.prev_sib[wi] = self.last_child[vi];
        self.next_sib[wi] = NONE;
        match opt(self.last_child[vi]) {
            Some(l) => self.next_sib[l as usize] = w,
            None => self.first_child[vi] = w,
        }
        self.last_child[vi] = w;
        self.degree[vi] += 1;
    }

    fn unlink(&mut self, w: Vertex) {
        let wi = w as usize;
        let v = self.parent[wi] as usize;
        let (p, n) = (self.prev_sib[wi], self.next_sib[wi]);
        match opt(p) {
            Some(p) => self.next_sib[p as usize] = n,
            None => self.first_child[v] = n,
        }
        match opt(n) {
            Some(n) => self.prev_sib[n as usize] = p,
            None => self.last_child[v] = p,
        }
        self.parent[wi] = NONE;
        self.prev_sib[wi] = NONE;
        self.next_sib[wi] = NONE;
        self.degree[v] -= 1;
    }

    fn bump(&mut self) -> u32 {
        self.stamp += 1;
        if self.stamp == u32::MAX {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.stamp = 1;
        }
        self.stamp
    }

    /// Walks up from each start; a walk meeting itself is a cycle.
    fn check_acyclic(&mut self, starts: impl Iterator<Item = Vertex>) -> Result<()> {
        let base = self.stamp;
        for s in starts {
            let walk = self.bump();
            let mut u = s;
            loop {
                let m = self.mark[u as usize];
                if m == walk {
                    return Err(Error::Forest(format!("cycle through vertex {u}")));
                }
                if m > base {
                    break;
                }
                self.mark[u as usize] = walk;
                match opt(self.parent[u as usize]) {
                    Some(p) => u = p,
                    None => break,
                }
            }
        }
        Ok(())
    }

    /// Recomputes every pointer.
    pub fn build_index(&mut self) {
        let roots: Vec<Vertex> = (0..self.len() as u32).filter(|&v| self.parent[v as usize] == NONE).collect();
        let stamp = self.bump();
        for v in 0..self.len() {
            self.mark[v] = stamp;
        }
        for r in roots {
            self.repair_from(r, stamp);
        }
    }

    /// Post-order over the marked vertices below `root`, recomputing
    /// first/last and stitching next pointers. Returns the touched count.
    fn repair_from(&mut self, root: Vertex, stamp: u32) -> usize {
        let mut touched = 0;
        let mut stack: Vec<(Vertex, bool)> = vec![(root, false)];
        while let Some((u, done)) = stack.pop() {
            let ui = u as usize;
            if !done {
                stack.push((u, true));
                let mut c = self.last_child[ui];
                while c != NONE {
                    if self.mark[c as usize] == stamp {
                        stack.push((c, false));
                    }
                    c = self.prev_sib[c as usize];
                }
                continue;
            }
            touched += 1;
            if self.exit[ui] {
                continue;
            }
            let (mut f, mut l) = (NONE, NONE);
            let mut c = self.first_child[ui];
            while c != NONE {
                touched += 1;
                let ci = c as usize;
                if self.first[ci] != NONE {
                    if l != NONE {
                        self.next[l as usize] = self.first[ci];
                    }
                    if f == NONE {
                        f = self.first[ci];
                    }
                    l = self.last[ci];
                }
                c = self.next_sib[ci];
            }
            self.first[ui] = f;
            self.last[ui] = l;
        }
        if let Some(l) = opt(self.last[root as usize]) {
            self.next[l as usize] = NONE;
        }
        touched
    }

    /// Marks `𝒜(parents)` and returns the marked vertices.
    fn mark_ancestry(&mut self, parents: impl Iterator<Item = Vertex>, stamp: u32) -> Vec<Vertex> {
        let mut out = Vec::new();
        for v in parents {
            let mut u = v;
            while self.mark[u as usize] != stamp {
                self.mark[u as usize] = stamp;
                out.push(u);
                match opt(self.parent[u as usize]) {
                    Some(p) => u = p,
                    None => break,
                }
            }
        }
        out
    }

    /// `𝒜_F(E')`: the vertices with a path to the parent of an edge of `E'`.
    pub fn ancestry(&mut self, edges: &[(Vertex, Vertex)]) -> Vec<Vertex> {
        let stamp = self.bump();
        let mut a = self.mark_ancestry(edges.iter().map(|e| e.0), stamp);
        a.sort_unstable();
        a
    }

    fn repair(&mut self, marked: &[Vertex], stamp: u32) -> usize {
        let mut touched = 0;
        for &u in marked {
            if self.parent[u as usize] == NONE {
                touched += self.repair_from(u, stamp);
            }
        }
        touched
    }

    /// Applies one signed batch and repairs the pointers on its ancestry.
    /// Returns the number of touched vertices.
    pub fn apply_update(&mut self, u: &ForestUpdate) -> Result<usize> {
        match u.sign {
            Sign::Delete => self.delete(&u.edges),
            Sign::Insert => self.insert(&u.edges),
        }
    }

    /// Deletions first, then insertions.
    pub fn apply_batch(&mut self, minus: &[(Vertex, Vertex)], plus: &[(Vertex, Vertex)]) -> Result<usize> {
        let a = if minus.is_empty() { 0 } else { self.delete(minus)? };
        let b = if plus.is_empty() { 0 } else { self.insert(plus)? };
        Ok(a + b)
    }

    fn delete(&mut self, edges: &[(Vertex, Vertex)]) -> Result<usize> {
        for &(v, w) in edges {
            self.check_vertex(v)?;
            self.check_vertex(w)?;
            if self.parent[w as usize] != v {
                return Err(Error::Forest(format!("no edge ({v}, {w})")));
            }
        }
        let stamp = self.bump();
        let marked = self.mark_ancestry(edges.iter().map(|e| e.0), stamp);
        let mut touched = 0;
        for &(v, w) in edges {
            if self.parent[w as usize] != v {
                return Err(Error::Forest(format!("edge ({v}, {w}) deleted twice")));
            }
            self.unlink(w);
            if self.mark[w as usize] != stamp {
                touched += 1;
                if let Some(l) = opt(self.last[w as usize]) {
                    self.next[l as usize] = NONE;
                }
            }
        }
        Ok(touched + self.repair(&marked, stamp))
    }

    fn insert(&mut self, edges: &[(Vertex, Vertex)]) -> Result<usize> {
        for (i, &(v, w)) in edges.iter().enumerate() {
            if let Err(e) = self.check_insert(v, w) {
                for &(_, w) in edges[..i].iter().rev() {
                    self.unlink(w);
                }
                return Err(e);
            }
            self.link(v, w);
        }
        if let Err(e) = self.check_acyclic(edges.iter().map(|e| e.0)) {
            for &(_, w) in edges.iter().rev() {
                self.unlink(w);
            }
            return Err(e);
        }
        let stamp = self.bump();
        let marked = self.mark_ancestry(edges.iter().map(|e| e.0), stamp);
        Ok(self.repair(&marked, stamp))
    }

    /// The exits below `v` in preorder.
    pub fn enumerate_reach(&self, v: Vertex) -> ReachIter<'_> {
        ReachIter { f: self, cur: self.first[v as usize], end: self.last[v as usize] }
    }
}

/// Constant-delay walk along next pointers.
#[derive(Debug, Clone)]
pub struct ReachIter<'a> {
    f: &'a ReachForest,
    cur: u32,
    end: u32,
}

impl Iterator for ReachIter<'_> {
    type Item = Vertex;

    fn next(&mut self) -> Option<Vertex> {
        let x = opt(self.cur)?;
        self.cur = if x == self.end { NONE } else { self.f.next[x as usize] };
        Some(x)
    }
}

/// `first`, `last` and `next` for every vertex.
pub type Pointers = (Vec<Option<Vertex>>, Vec<Option<Vertex>>, Vec<Option<Vertex>>);

/// Pointers recomputed from their definitions, for testing.
pub fn naive_pointers(f: &ReachForest) -> Pointers {
    let n = f.len();
    let (mut first, mut last, mut next) = (vec![None; n], vec![None; n], vec![None; n]);
    for r in (0..n as u32).filter(|&v| f.parent(v).is_none()) {
        let mut order = Vec::new();
        let mut stack = vec![r];
        while let Some(u) = stack.pop() {
            order.push(u);
            let kids: Vec<_> = f.children(u).collect();
            stack.extend(kids.into_iter().rev());
        }
        let exits: Vec<Vertex> = order.iter().copied().filter(|&u| f.is_exit(u)).collect();
        for w in exits.windows(2) {
            next[w[0] as usize] = Some(w[1]);
        }
        for &u in &order {
            let reach = naive_reach(f, u);
            first[u as usize] = reach.first().copied();
            last[u as usize] = reach.last().copied();
        }
    }
    (first, last, next)
}

/// Exits below `v` in preorder by plain traversal.
pub fn naive_reach(f: &ReachForest, v: Vertex) -> Vec<Vertex> {
    let mut out = Vec::new();
    let mut stack = vec![v];
    while let Some(u) = stack.pop() {
        if f.is_exit(u) {
            out.push(u);
        }
        let kids: Vec<_> = f.children(u).collect();
        stack.extend(kids.into_iter().rev());
    }
    out
}
