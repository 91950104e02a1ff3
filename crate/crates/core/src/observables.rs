//! Batch-means estimators for equilibrium observables.

use serde::{Deserialize, Serialize};

use crate::lattice::{delta_energy, Lattice, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub batches: usize,
}

impl Estimate {
    pub fn from_batches(means: &[f64]) -> Self {
        let n = means.len() as f64;
        let mean = means.iter().sum::<f64>() / n;
        let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Estimate { mean, std_error: (var / n).sqrt(), batches: means.len() }
    }

    /// Distance from `exact` in units of the standard error.
    pub fn z_score(&self, exact: f64) -> f64 {
        (self.mean - exact).abs() / self.std_error
    }
}

/// Batch means of equally spaced samples; trailing samples that do not fill a
/// batch are dropped.
pub fn sample_estimate(samples: &[f64], batches: usize) -> Estimate {
    let len = samples.len() / batches;
    assert!(len > 0, "fewer samples than batches");
    let means: Vec<f64> = samples
        .chunks_exact(len)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / len as f64)
        .collect();
    Estimate::from_batches(&means)
}

/// Time integrals of a piecewise-constant signal over equal-length batches.
#[derive(Debug, Clone)]
pub struct TimeBatches {
    start: f64,
    width: f64,
    sums: Vec<f64>,
}

impl TimeBatches {
    pub fn new(start: f64, end: f64, batches: usize) -> Self {
        assert!(end > start && batches > 0);
        TimeBatches { start, width: (end - start) / batches as f64, sums: vec![0.0; batches] }
    }

    /// Adds `value` held over `[from, to)`, clipped to the batched range.
    pub fn hold(&mut self, value: f64, from: f64, to: f64) {
        let n = self.sums.len();
        let end = self.start + self.width * n as f64;
        let (from, to) = (from.max(self.start), to.min(end));
        if !(to > from) {
            return;
        }
        let mut b = (((from - self.start) / self.width) as usize).min(n - 1);
        let mut t = from;
        while t < to && b < n {
            let b_end = if b + 1 == n { end } else { self.start + self.width * (b + 1) as f64 };
            let seg_end = to.min(b_end);
            if seg_end > t {
                self.sums[b] += value * (seg_end - t);
                t = seg_end;
            }
            b += 1;
        }
    }

    pub fn estimate(&self) -> Estimate {
        let means: Vec<f64> = self.sums.iter().map(|s| s / self.width).collect();
        Estimate::from_batches(&means)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub energy: Estimate,
    pub abs_magnetization: Estimate,
}

/// Replays `events` (time, atom) from `initial` and time-averages energy and
/// `|M|` over `[burn_in, t_end)`.
pub fn time_averages<I>(
    initial: &Lattice,
    params: &ModelParams,
    events: I,
    burn_in: f64,
    t_end: f64,
    batches: usize,
) -> Observables
where
    I: IntoIterator<Item = (f64, usize)>,
{
    let mut lattice = initial.clone();
    let mut energy = lattice.total_energy(params);
    let mut magnetization = lattice.magnetization();
    let mut e_acc = TimeBatches::new(burn_in, t_end, batches);
    let mut m_acc = TimeBatches::new(burn_in, t_end, batches);
    let mut last = 0.0;
    for (time, atom) in events {
        e_acc.hold(energy, last, time);
        m_acc.hold(magnetization.abs() as f64, last, time);
        let s = lattice.spin(atom);
        energy += delta_energy(params, s, lattice.neighbor_sum(atom));
        magnetization -= 2 * s as i64;
        lattice.flip(atom);
        last = time;
    }
    e_acc.hold(energy, last, t_end);
    m_acc.hold(magnetization.abs() as f64, last, t_end);
    Observables { energy: e_acc.estimate(), abs_magnetization: m_acc.estimate() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_signal() {
        let mut b = TimeBatches::new(0.0, 10.0, 5);
        b.hold(3.0, -1.0, 20.0);
        let e = b.estimate();
        assert!((e.mean - 3.0).abs() < 1e-12);
        assert!(e.std_error < 1e-12);
    }

    #[test]
    fn step_signal_spreads_over_batches() {
        let mut b = TimeBatches::new(0.0, 4.0, 4);
        b.hold(1.0, 0.0, 1.5);
        b.hold(5.0, 1.5, 4.0);
        let means: Vec<f64> = b.sums.iter().map(|s| s / b.width).collect();
        assert_eq!(means, vec![1.0, 3.0, 5.0, 5.0]);
    }

    #[test]
    fn sample_batches() {
        let xs: Vec<f64> = (0..100).map(|i| (i % 2) as f64).collect();
        let e = sample_estimate(&xs, 10);
        assert!((e.mean - 0.5).abs() < 1e-12);
        assert_eq!(e.batches, 10);
    }
}
