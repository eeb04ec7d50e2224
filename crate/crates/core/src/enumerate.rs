//! Enumeration of the assignments captured by an indexed circuit.
//!
//! The current assignment is a derivation: a tree of frames (unions with a
//! cursor on their exits, products, set variables) kept in preorder on an
//! explicit stack. The next assignment advances the last union whose cursor
//! can move, like an odometer, and rebuilds what followed it.

use crate::circuit::{Gate, GateKind};
use crate::error::{Error, Result};
use crate::index::EnumIndex;
use crate::tree::NONE;

#[derive(Debug, Clone, Copy)]
enum FrameKind {
    Union { cur: Gate, last: Gate },
    Times,
    Svar,
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    gate: Gate,
    parent: u32,
    from_left: bool,
    kind: FrameKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Start,
    Empty,
    Running,
    Done,
}

/// A resumable enumeration; any update of the index makes it stale.
#[derive(Debug, Clone)]
pub struct Enumerator {
    generation: u64,
    phase: Phase,
    frames: Vec<Frame>,
    work: Vec<(Gate, u32, bool)>,
    steps: usize,
    max_steps: usize,
    max_frames: usize,
}

/// The exits of union gate `g` under the current valuation.
pub fn exits_of(idx: &EnumIndex, g: Gate) -> Result<impl Iterator<Item = Gate> + '_> {
    if idx.circuit.kind(g) != GateKind::Union {
        return Err(Error::Precondition(format!("gate {g} is not a union")));
    }
    Ok(idx.forest.enumerate_reach(g))
}

impl Enumerator {
    pub fn open(idx: &EnumIndex) -> Self {
        Enumerator {
            generation: idx.generation(),
            phase: Phase::Start,
            frames: Vec::new(),
            work: Vec::new(),
            steps: 0,
            max_steps: 0,
            max_frames: 0,
        }
    }

    /// Gate visits spent producing the last output.
    pub fn last_steps(&self) -> usize {
        self.steps
    }

    /// Largest number of visits between two consecutive outputs so far.
    pub fn max_steps(&self) -> usize {
        self.max_steps
    }

    /// Largest number of live frames so far.
    pub fn max_frames(&self) -> usize {
        self.max_frames
    }

    fn expand(&mut self, idx: &EnumIndex, g: Gate, parent: u32, from_left: bool) {
        self.work.push((g, parent, from_left));
        while let Some((g, parent, from_left)) = self.work.pop() {
            self.steps += 1;
            let g = idx.delta[g as usize];
            let at = self.frames.len() as u32;
            let c = &idx.circuit;
            let kind = match c.kind(g) {
                GateKind::Svar => FrameKind::Svar,
                GateKind::Times => {
                    let inp = c.inputs(g);
                    self.work.push((inp[1], at, false));
                    self.work.push((inp[0], at, true));
                    FrameKind::Times
                }
                GateKind::Union => {
                    let first = idx.forest.first(g).expect("live unions have exits");
                    let last = idx.forest.last(g).expect("live unions have exits");
                    self.work.push((first, at, false));
                    FrameKind::Union { cur: first, last }
                }
                k => unreachable!("{k:?} gate in a derivation"),
            };
            debug_assert!(idx.omega(g));
            self.frames.push(Frame { gate: g, parent, from_left, kind });
        }
        self.max_frames = self.max_frames.max(self.frames.len());
    }

    fn advance(&mut self, idx: &EnumIndex) -> bool {
        let mut i = self.frames.len();
        loop {
            if i == 0 {
                return false;
            }
            i -= 1;
            self.steps += 1;
            if let FrameKind::Union { cur, last } = self.frames[i].kind {
                if cur != last {
                    break;
                }
            }
        }
        self.frames.truncate(i + 1);
        let FrameKind::Union { cur, last } = self.frames[i].kind else { unreachable!() };
        let next = idx.forest.next(cur).expect("next exit before the last one");
        self.frames[i].kind = FrameKind::Union { cur: next, last };
        self.expand(idx, next, i as u32, false);
        let mut j = i;
        while self.frames[j].parent != NONE {
            let p = self.frames[j].parent as usize;
            if self.frames[j].from_left && matches!(self.frames[p].kind, FrameKind::Times) {
                let right = idx.circuit.inputs(self.frames[p].gate)[1];
                self.expand(idx, right, p as u32, false);
            }
            j = p;
        }
        true
    }

    fn current(&self) -> Vec<Gate> {
        self.frames.iter().filter(|f| matches!(f.kind, FrameKind::Svar)).map(|f| f.gate).collect()
    }

    /// The next assignment as a list of svar gates, or `None` when exhausted.
    pub fn next(&mut self, idx: &EnumIndex) -> Result<Option<Vec<Gate>>> {
        if idx.generation() != self.generation {
            return Err(Error::Stale);
        }
        self.steps = 0;
        let out = loop {
            match self.phase {
                Phase::Start => {
                    self.phase = Phase::Empty;
                    let sec = idx.circuit.secondary().expect("homogenized");
                    if idx.omega(sec) {
                        break Some(Vec::new());
                    }
                }
                Phase::Empty => {
                    let out = idx.circuit.output();
                    if idx.omega(out) {
                        self.phase = Phase::Running;
                        self.expand(idx, out, NONE, false);
                        break Some(self.current());
                    }
                    self.phase = Phase::Done;
                }
                Phase::Running => {
                    if self.advance(idx) {
                        break Some(self.current());
                    }
                    self.phase = Phase::Done;
                    self.frames.clear();
                }
                Phase::Done => break None,
            }
        };
        self.max_steps = self.max_steps.max(self.steps);
        Ok(out)
    }
}

/// All assignments, in enumeration order.
pub fn enumerate_all(idx: &EnumIndex) -> Result<Vec<Vec<Gate>>> {
    let mut e = Enumerator::open(idx);
    let mut out = Vec::new();
    while let Some(a) = e.next(idx)? {
        out.push(a);
    }
    Ok(out)
}
