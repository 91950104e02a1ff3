//! Event times under a piecewise-constant combined rate.
//!
//! The next flip time solves `∫_{τ_prev}^{τ} Λ(t) dt = -log U`. The integral is
//! accumulated one constant-rate segment at a time: `accumulated` holds the
//! integral from the anchor up to `start`, the beginning of the current
//! segment. Within a segment the solution is
//! `τ = start + (-log U - accumulated) / Λ_segment`.

use serde::{Deserialize, Serialize};

/// Integration state since the last own flip of a block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hazard {
    /// Start of the current constant-rate segment.
    pub start: f64,
    /// Integral of the rate from the last own flip to `start`.
    pub accumulated: f64,
}

impl Hazard {
    pub fn anchored(at: f64) -> Self {
        Hazard { start: at, accumulated: 0.0 }
    }

    /// Time at which the integral reaches `target` if the rate stays at `rate`.
    #[inline]
    pub fn candidate(&self, target: f64, rate: f64) -> f64 {
        if !(rate > 0.0) {
            return f64::INFINITY;
        }
        let remaining = target - self.accumulated;
        if remaining <= 0.0 {
            self.start
        } else {
            self.start + remaining / rate
        }
    }

    /// Ends the current segment at `at`, where the rate changes.
    #[inline]
    pub fn close_segment(&mut self, rate: f64, at: f64) {
        self.accumulated += rate * (at - self.start);
        self.start = at;
    }
}

/// A rate that is constant between consecutive break points. Segment `j`
/// covers `[breaks[j-1], breaks[j])` with `breaks[-1] = τ_prev` and the last
/// segment ending at `t_end`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateProfile {
    pub breaks: Vec<f64>,
    pub rates: Vec<f64>,
    pub t_end: f64,
}

impl RateProfile {
    pub fn constant(rate: f64, t_end: f64) -> Self {
        RateProfile { breaks: Vec::new(), rates: vec![rate], t_end }
    }

    /// `rates.len()` must be `breaks.len() + 1`.
    pub fn new(breaks: Vec<f64>, rates: Vec<f64>, t_end: f64) -> Self {
        assert_eq!(rates.len(), breaks.len() + 1, "one rate per segment");
        RateProfile { breaks, rates, t_end }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventTime {
    At(f64),
    Overflow,
}

/// Solves for the next event time, walking segments until the integral
/// reaches `-log u`. Returns [`EventTime::Overflow`] when the solution lies at
/// or beyond `t_end`.
pub fn solve_event_time(profile: &RateProfile, tau_prev: f64, u: f64) -> EventTime {
    let target = -u.ln();
    let mut hazard = Hazard::anchored(tau_prev);
    let ends = profile.breaks.iter().copied().chain(std::iter::once(profile.t_end));
    for (rate, end) in profile.rates.iter().copied().zip(ends) {
        let end = end.min(profile.t_end);
        let tau = hazard.candidate(target, rate);
        if tau < end {
            return EventTime::At(tau);
        }
        if end >= profile.t_end {
            break;
        }
        hazard.close_segment(rate, end);
    }
    EventTime::Overflow
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_rate_reduces_to_exponential_step() {
        let p = RateProfile::constant(2.0, f64::INFINITY);
        assert_eq!(solve_event_time(&p, 0.0, (-1.0f64).exp()), EventTime::At(0.5));
    }

    #[test]
    fn two_segments() {
        let p = RateProfile::new(vec![1.0], vec![1.0, 3.0], 2.0);
        match solve_event_time(&p, 0.0, (-2.0f64).exp()) {
            EventTime::At(t) => assert!((t - 4.0 / 3.0).abs() <= 1e-15),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overflow_when_integral_too_small() {
        let p = RateProfile::constant(1.0, 1.0);
        assert_eq!(solve_event_time(&p, 0.0, (-2.0f64).exp()), EventTime::Overflow);
        let zero = RateProfile::new(vec![0.5], vec![0.0, 0.0], 1.0);
        assert_eq!(solve_event_time(&zero, 0.0, 0.5), EventTime::Overflow);
    }

    #[test]
    fn zero_rate_segment_is_skipped() {
        let p = RateProfile::new(vec![1.0], vec![0.0, 2.0], 5.0);
        assert_eq!(solve_event_time(&p, 0.0, (-1.0f64).exp()), EventTime::At(1.5));
    }

    #[test]
    fn candidate_does_not_step_back() {
        let h = Hazard { start: 2.0, accumulated: 1.0 + 1e-16 };
        assert_eq!(h.candidate(1.0, 3.0), 2.0);
    }
}
