//! Event-by-event comparison of committed histories.

use std::fmt;

use ising_relax::{GlobalEvent, GlobalHistory};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Divergence {
    pub index: usize,
    pub left: Option<GlobalEvent>,
    pub right: Option<GlobalEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub equal: bool,
    pub left_len: usize,
    pub right_len: usize,
    pub tolerance: f64,
    pub first_divergence: Option<Divergence>,
}

/// Relative tolerance; zero demands identical bits.
pub fn times_match(a: f64, b: f64, tolerance: f64) -> bool {
    if tolerance == 0.0 {
        a.to_bits() == b.to_bits()
    } else {
        (a - b).abs() <= tolerance * a.abs().max(b.abs())
    }
}

pub fn compare_histories(a: &GlobalHistory, b: &GlobalHistory, tolerance: f64) -> Comparison {
    let mismatch = a
        .events
        .iter()
        .zip(&b.events)
        .position(|(x, y)| x.pe != y.pe || x.atom != y.atom || !times_match(x.time, y.time, tolerance));
    let index = mismatch.or((a.len() != b.len()).then(|| a.len().min(b.len())));
    Comparison {
        equal: index.is_none(),
        left_len: a.len(),
        right_len: b.len(),
        tolerance,
        first_divergence: index.map(|i| Divergence { index: i, left: a.events.get(i).copied(), right: b.events.get(i).copied() }),
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |e: &Option<GlobalEvent>| match e {
            Some(e) => format!("{:?} pe {} atom {}", e.time, e.pe, e.atom),
            None => "end of history".to_string(),
        };
        match &self.first_divergence {
            None => write!(f, "equal ({} events, tolerance {})", self.left_len, self.tolerance),
            Some(d) => write!(
                f,
                "differ at event {} of {}/{}: left {}, right {}",
                d.index,
                self.left_len,
                self.right_len,
                show(&d.left),
                show(&d.right)
            ),
        }
    }
}
