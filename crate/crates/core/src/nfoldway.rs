//! The rejection-free n-fold way sampler.
//!
//! Atoms are grouped into the ten classes of [`ClassIndex`]. Each class keeps
//! its members in an array; an atom that changes class is swap-removed from
//! its old array and pushed onto the new one, so a flip costs O(1) regardless
//! of lattice size. The combined rate is a ten-term sum over the integer class
//! counts and is therefore an exact function of the configuration.

use serde::{Deserialize, Serialize};

use crate::lattice::{ClassIndex, Direction, Lattice, ModelParams, NUM_CLASSES};
use crate::rngstream::{Pair, RngStream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlipEvent {
    pub time: f64,
    pub atom: usize,
}

/// Flips inside the window `(t_start, t_end)`, in increasing time order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct History {
    pub t_start: f64,
    pub t_end: f64,
    pub events: Vec<FlipEvent>,
}

impl History {
    pub fn new(t_start: f64, t_end: f64) -> Self {
        History { t_start, t_end, events: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Same events, same atoms, bit-identical times.
    pub fn same_events(&self, other: &History) -> bool {
        self.events.len() == other.events.len()
            && self
                .events
                .iter()
                .zip(&other.events)
                .all(|(a, b)| a.atom == b.atom && a.time.to_bits() == b.time.to_bits())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassTable {
    members: [Vec<u32>; NUM_CLASSES],
    class: Vec<u8>,
    slot: Vec<u32>,
    probs: [f64; NUM_CLASSES],
    lambda: f64,
}

impl ClassTable {
    /// Builds a table over atoms `0..n`, inserting them in index order.
    pub fn new<I>(params: &ModelParams, classes: I) -> Self
    where
        I: IntoIterator<Item = ClassIndex>,
    {
        let mut table = ClassTable {
            members: Default::default(),
            class: Vec::new(),
            slot: Vec::new(),
            probs: params.class_probabilities(),
            lambda: params.lambda,
        };
        for (atom, k) in classes.into_iter().enumerate() {
            table.class.push(k.0);
            table.slot.push(table.members[k.get()].len() as u32);
            table.members[k.get()].push(atom as u32);
        }
        table
    }

    pub fn num_atoms(&self) -> usize {
        self.class.len()
    }

    pub fn count(&self, k: ClassIndex) -> usize {
        self.members[k.get()].len()
    }

    pub fn counts(&self) -> [usize; NUM_CLASSES] {
        std::array::from_fn(|k| self.members[k].len())
    }

    pub fn members(&self, k: ClassIndex) -> &[u32] {
        &self.members[k.get()]
    }

    pub fn class_of(&self, atom: usize) -> ClassIndex {
        ClassIndex(self.class[atom])
    }

    /// 0-based position of `atom` within its class.
    pub fn position(&self, atom: usize) -> usize {
        self.slot[atom] as usize
    }

    pub fn probabilities(&self) -> &[f64; NUM_CLASSES] {
        &self.probs
    }

    /// Moves `atom` to class `k`; no-op when it is already there.
    pub fn reassign(&mut self, atom: usize, k: ClassIndex) {
        let old = self.class[atom] as usize;
        if old == k.get() {
            return;
        }
        let j = self.slot[atom] as usize;
        let list = &mut self.members[old];
        list.swap_remove(j);
        if let Some(&moved) = list.get(j) {
            self.slot[moved as usize] = j as u32;
        }
        self.class[atom] = k.0;
        self.slot[atom] = self.members[k.get()].len() as u32;
        self.members[k.get()].push(atom as u32);
    }

    /// `N_k · p_k` per class.
    pub fn weights(&self) -> [f64; NUM_CLASSES] {
        std::array::from_fn(|k| self.members[k].len() as f64 * self.probs[k])
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights().iter().sum()
    }

    /// `Λ = λ Σ_k N_k p_k`.
    pub fn total_rate(&self) -> f64 {
        self.lambda * self.weight_sum()
    }

    /// Picks the flipping atom with a single uniform `v`.
    pub fn select(&self, v: f64) -> Result<usize> {
        let weights = self.weights();
        let total: f64 = weights.iter().sum();
        let (k, w_prev) = select_class(&weights, v)
            .ok_or_else(|| Error::Inconsistent("selection from a table with zero total weight".into()))?;
        self.select_atom(k, v, w_prev, weights[k.get()] / total)
    }

    /// Phase 3: the atom at `floor(R·N) + 1` within class `k`.
    pub fn select_atom(&self, k: ClassIndex, v: f64, w_prev: f64, class_fraction: f64) -> Result<usize> {
        let list = &self.members[k.get()];
        if list.is_empty() {
            return Err(Error::Inconsistent(format!("class {} selected but empty", k.0)));
        }
        let index = access_index(list.len(), v, w_prev, class_fraction);
        Ok(list[index - 1] as usize)
    }

    /// Checks the reverse index and compares memberships against `expected`.
    pub fn check(&self, expected: impl IntoIterator<Item = ClassIndex>) -> Result<()> {
        let mut seen = 0;
        for (k, list) in self.members.iter().enumerate() {
            for (j, &a) in list.iter().enumerate() {
                let a = a as usize;
                if self.class[a] as usize != k || self.slot[a] as usize != j {
                    return Err(Error::Inconsistent(format!("reverse index of atom {a} broken")));
                }
                seen += 1;
            }
        }
        if seen != self.class.len() {
            return Err(Error::Inconsistent(format!("{seen} members for {} atoms", self.class.len())));
        }
        for (a, k) in expected.into_iter().enumerate() {
            if self.class[a] != k.0 {
                return Err(Error::Inconsistent(format!(
                    "atom {a} filed under class {} but belongs to {}",
                    self.class[a], k.0
                )));
            }
        }
        Ok(())
    }

    /// Membership sets per class, order-insensitive.
    pub fn membership_sets(&self) -> [Vec<u32>; NUM_CLASSES] {
        std::array::from_fn(|k| {
            let mut m = self.members[k].clone();
            m.sort_unstable();
            m
        })
    }
}

/// Phase 2: scans classes `0..10` and returns the first `k` with
/// `W(k-1) < v <= W(k)` together with `W(k-1)`. Zero-weight classes are skipped.
pub fn select_class(weights: &[f64; NUM_CLASSES], v: f64) -> Option<(ClassIndex, f64)> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mut cum = 0.0;
    let mut last = None;
    for (k, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        let w_prev = cum / total;
        cum += w;
        if v <= cum / total {
            return Some((ClassIndex(k as u8), w_prev));
        }
        last = Some((ClassIndex(k as u8), w_prev));
    }
    // v above W(9) only through rounding in the cumulative sum
    last
}

/// 1-based access index `floor(R·n) + 1`, clamped to `[1, n]`.
pub fn access_index(n: usize, v: f64, w_prev: f64, class_fraction: f64) -> usize {
    let r = (v - w_prev) / class_fraction;
    let raw = (r * n as f64).floor();
    if raw < 0.0 {
        1
    } else {
        (raw as usize + 1).min(n)
    }
}

/// Next flip time under a constant combined rate.
pub fn next_event_time(rate: f64, tau_prev: f64, u: f64) -> Result<f64> {
    if !(rate > 0.0) {
        return Err(Error::DegenerateRate(rate));
    }
    Ok(tau_prev + (-u.ln()) / rate)
}

pub fn build_class_table(lattice: &Lattice, params: &ModelParams) -> ClassTable {
    ClassTable::new(params, (0..lattice.len()).map(|v| lattice.class_of_atom(v)))
}

/// Flips `v` and refiles it and its four neighbors.
pub fn apply_flip(lattice: &mut Lattice, table: &mut ClassTable, v: usize) {
    lattice.flip(v);
    table.reassign(v, lattice.class_of_atom(v));
    for d in Direction::ALL {
        let n = lattice.neighbor(v, d);
        table.reassign(n, lattice.class_of_atom(n));
    }
}

/// Sequential n-fold way over `(0, t_end)`.
///
/// One pair is consumed per emitted flip. The pair whose time lands at or
/// beyond `t_end` is left unconsumed: the stream cursor points at it on return.
pub fn run_sequential(
    lattice: &mut Lattice,
    params: &ModelParams,
    stream: &mut RngStream,
    t_end: f64,
) -> Result<History> {
    let mut table = build_class_table(lattice, params);
    let mut history = History::new(0.0, t_end);
    let mut tau = 0.0;
    loop {
        let rate = table.total_rate();
        if !(rate > 0.0) {
            break;
        }
        let index = stream.cursor();
        let Pair { u, v } = stream.next_pair();
        let next = next_event_time(rate, tau, u)?;
        if !(next < t_end) {
            stream.reset_to(index);
            break;
        }
        let atom = table.select(v)?;
        apply_flip(lattice, &mut table, atom);
        history.events.push(FlipEvent { time: next, atom });
        tau = next;
    }
    Ok(history)
}
