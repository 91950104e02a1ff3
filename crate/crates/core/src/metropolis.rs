//! Rejection-based single-site reference chain.

use serde::{Deserialize, Serialize};

use crate::lattice::{delta_energy, flip_probability, Lattice, ModelParams};
use crate::rngstream::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub update: u64,
    pub energy: f64,
    pub magnetization: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetropolisTrajectory {
    pub samples: Vec<Sample>,
    pub accepted: u64,
    pub lattice: Lattice,
}

/// Runs `n_updates` proposals. `V` picks the site, the flip is accepted iff
/// `U < p`. Energy is tracked incrementally and sampled every `sample_every`
/// updates, starting with the initial configuration.
pub fn run_metropolis(
    mut lattice: Lattice,
    params: &ModelParams,
    n_updates: u64,
    stream: &mut RngStream,
    sample_every: u64,
) -> MetropolisTrajectory {
    let sample_every = sample_every.max(1);
    let n = lattice.len();
    let mut energy = lattice.total_energy(params);
    let mut magnetization = lattice.magnetization();
    let mut samples = vec![Sample { update: 0, energy, magnetization }];
    let mut accepted = 0;
    for update in 1..=n_updates {
        let pair = stream.next_pair();
        let v = ((pair.v * n as f64) as usize).min(n - 1);
        let s = lattice.spin(v);
        let de = delta_energy(params, s, lattice.neighbor_sum(v));
        if pair.u < flip_probability(params, de) {
            lattice.flip(v);
            energy += de;
            magnetization -= 2 * s as i64;
            accepted += 1;
        }
        if update % sample_every == 0 {
            samples.push(Sample { update, energy, magnetization });
        }
    }
    MetropolisTrajectory { samples, accepted, lattice }
}
