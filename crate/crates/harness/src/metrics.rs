//! Per-step relaxation records and their aggregates.

use ising_relax::relaxation::StepResult;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub committed_time: f64,
    /// Iterations to reach the fixed point.
    pub g: usize,
    /// Largest per-iteration boundary event count of any PE.
    pub f: usize,
    pub f_per_iteration: Vec<usize>,
    pub events: usize,
    pub pairs: u64,
    pub discarded_pairs: u64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub steps: usize,
    pub mean_g: f64,
    pub sd_g: f64,
    pub mean_f: f64,
    pub sd_f: f64,
    pub mean_fg: f64,
    pub events: usize,
    pub pairs: u64,
    pub wall_seconds: f64,
    pub events_per_second: f64,
    pub simulated_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub tmax: f64,
    pub records: Vec<StepRecord>,
    pub aggregates: Aggregates,
}

pub fn step_record(s: &StepResult) -> StepRecord {
    StepRecord {
        step: s.step,
        committed_time: s.committed_time,
        g: s.g,
        f: s.f_per_iteration.iter().copied().max().unwrap_or(0),
        f_per_iteration: s.f_per_iteration.clone(),
        events: s.events(),
        pairs: s.pairs_committed(),
        discarded_pairs: s.discarded_pairs.iter().sum(),
        wall_seconds: s.wall.as_secs_f64(),
    }
}

pub fn collect_metrics(steps: &[StepResult], tmax: f64) -> RunMetrics {
    RunMetrics::from_records(steps.iter().map(step_record).collect(), tmax)
}

/// Mean and sample standard deviation; zeros for an empty slice.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl RunMetrics {
    pub fn from_records(records: Vec<StepRecord>, tmax: f64) -> Self {
        let g: Vec<f64> = records.iter().map(|r| r.g as f64).collect();
        let f: Vec<f64> = records.iter().map(|r| r.f as f64).collect();
        let fg: Vec<f64> = records.iter().map(|r| (r.f * r.g) as f64).collect();
        let (mean_g, sd_g) = mean_sd(&g);
        let (mean_f, sd_f) = mean_sd(&f);
        let events = records.iter().map(|r| r.events).sum();
        let wall_seconds = records.iter().map(|r| r.wall_seconds).sum::<f64>();
        let simulated_time = records.last().map_or(0.0, |r| r.committed_time + tmax);
        let aggregates = Aggregates {
            steps: records.len(),
            mean_g,
            sd_g,
            mean_f,
            sd_f,
            mean_fg: mean_sd(&fg).0,
            events,
            pairs: records.iter().map(|r| r.pairs).sum(),
            wall_seconds,
            events_per_second: if wall_seconds > 0.0 { events as f64 / wall_seconds } else { 0.0 },
            simulated_time,
        };
        RunMetrics { tmax, records, aggregates }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ising_relax::History;
    use std::time::Duration;

    fn step(step: usize, f_per_iteration: Vec<usize>, events: usize) -> StepResult {
        let t = step as f64 * 0.5;
        let mut h = History::new(t, t + 0.5);
        for k in 0..events {
            h.events.push(ising_relax::FlipEvent { time: t + 0.01 * (k + 1) as f64, atom: k });
        }
        StepResult {
            step,
            committed_time: t,
            g: f_per_iteration.len(),
            f_per_iteration,
            histories: vec![h],
            pair_ranges: vec![(0, events as u64)],
            discarded_pairs: vec![0],
            wall: Duration::from_millis(10),
        }
    }

    #[test]
    fn single_quiet_step() {
        let m = collect_metrics(&[step(0, vec![0], 0)], 0.5);
        assert_eq!(m.aggregates.mean_g, 1.0);
        assert_eq!(m.aggregates.mean_f, 0.0);
        assert_eq!(m.aggregates.sd_g, 0.0);
        assert_eq!(m.aggregates.simulated_time, 0.5);
    }

    #[test]
    fn mean_of_two_steps() {
        let m = collect_metrics(&[step(0, vec![1], 3), step(1, vec![2, 4, 4], 5)], 0.5);
        assert_eq!(m.aggregates.mean_g, 2.0);
        assert_eq!(m.aggregates.mean_f, 2.5);
        assert!((m.aggregates.sd_g - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(m.aggregates.events, 8);
        assert_eq!(m.aggregates.pairs, 8);
        assert!((m.aggregates.events_per_second - 400.0).abs() < 1e-9);
        assert_eq!(m.aggregates.simulated_time, 1.0);
    }

    #[test]
    fn aggregates_recompute_from_serialized_records() {
        let m = collect_metrics(&[step(0, vec![1, 2], 3), step(1, vec![0], 1), step(2, vec![3, 1, 0], 2)], 0.5);
        let lines: Vec<String> = m.records.iter().map(|r| serde_json::to_string(r).unwrap()).collect();
        let back: Vec<StepRecord> = lines.iter().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(RunMetrics::from_records(back, 0.5), m);
    }

    #[test]
    fn empty_run() {
        let m = collect_metrics(&[], 0.5);
        assert_eq!(m.aggregates.steps, 0);
        assert_eq!(m.aggregates.simulated_time, 0.0);
    }
}
