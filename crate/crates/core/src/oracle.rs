//! Ground truth for the relaxation engine.
//!
//! [`run_multistream_oracle`] simulates the whole lattice on one thread with
//! full knowledge of the global state, while drawing each block's events from
//! that block's own stream and integrating each block's own combined rate. Its
//! trajectory is the one the relaxation iteration must converge to.
//! [`enumerate_boltzmann`] sums the Boltzmann weight over every configuration
//! of a small lattice.

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::lattice::{Direction, Lattice, ModelParams};
use crate::nfoldway::ClassTable;
use crate::relaxation::{Hazard, Partition};
use crate::rngstream::{Pair, RngStream};
use crate::{Error, Result};

pub const HISTORY_HEADER: &str = "# ising-relax history v1";
pub const MOMENTS_HEADER: &str = "# ising-relax moments v1";

/// Largest lattice [`enumerate_boltzmann`] accepts.
pub const ENUMERATION_CAP: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalEvent {
    pub time: f64,
    pub pe: usize,
    pub atom: usize,
}

impl GlobalEvent {
    /// `(time, pe, atom)` order.
    pub fn order(a: &GlobalEvent, b: &GlobalEvent) -> Ordering {
        a.time.total_cmp(&b.time).then(a.pe.cmp(&b.pe)).then(a.atom.cmp(&b.atom))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GlobalHistory {
    pub events: Vec<GlobalEvent>,
}

impl GlobalHistory {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Plain-text fixture: a header line, then `time pe atom` per event. Times
    /// use the shortest representation that parses back to the same bits.
    pub fn to_fixture(&self) -> String {
        let mut out = String::with_capacity(32 * (self.events.len() + 1));
        out.push_str(HISTORY_HEADER);
        out.push('\n');
        for e in &self.events {
            let _ = writeln!(out, "{:?} {} {}", e.time, e.pe, e.atom);
        }
        out
    }

    pub fn from_fixture(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim() == HISTORY_HEADER => {}
            _ => return Err(fixture_err(1, format!("expected header {HISTORY_HEADER:?}"))),
        }
        let mut events = Vec::new();
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(fixture_err(i + 1, format!("expected 3 fields, found {}", fields.len())));
            }
            let time = fields[0].parse::<f64>().map_err(|e| fixture_err(i + 1, e.to_string()))?;
            let pe = fields[1].parse::<usize>().map_err(|e| fixture_err(i + 1, e.to_string()))?;
            let atom = fields[2].parse::<usize>().map_err(|e| fixture_err(i + 1, e.to_string()))?;
            events.push(GlobalEvent { time, pe, atom });
        }
        Ok(GlobalHistory { events })
    }
}

fn fixture_err(line: usize, message: String) -> Error {
    Error::Fixture { line, message }
}

struct BlockSim {
    table: ClassTable,
    hazard: Hazard,
    pending: Pair,
    candidate: f64,
}

impl BlockSim {
    fn refresh(&mut self) {
        self.candidate = self.hazard.candidate(-self.pending.u.ln(), self.table.total_rate());
    }
}

/// Global sequential simulation in which block `i` draws from `streams[i]`.
///
/// Each block keeps the integral of its own combined rate since its last
/// flip. A flip of an atom adjacent to another block ends that block's current
/// constant-rate segment; only then is its candidate time recomputed. The
/// earliest candidate is committed, its atom chosen with that block's `V`.
/// On return each stream's cursor sits at its first unconsumed pair.
pub fn run_multistream_oracle(
    lattice: &mut Lattice,
    params: &ModelParams,
    partition: &Partition,
    streams: &mut [RngStream],
    t_end: f64,
) -> Result<GlobalHistory> {
    if streams.len() != partition.num_pes() {
        return Err(Error::Partition(format!(
            "{} streams for {} blocks",
            streams.len(),
            partition.num_pes()
        )));
    }
    if lattice.width() != partition.width || lattice.height() != partition.height {
        return Err(Error::Partition("lattice and partition dimensions differ".into()));
    }
    let blocks = &partition.blocks;
    let mut sims: Vec<BlockSim> = blocks
        .iter()
        .zip(streams.iter_mut())
        .map(|(b, stream)| {
            let table = ClassTable::new(params, (0..b.len()).map(|l| lattice.class_of_atom(b.global_of(l))));
            let mut sim = BlockSim {
                table,
                hazard: Hazard::anchored(0.0),
                pending: stream.next_pair(),
                candidate: f64::INFINITY,
            };
            sim.refresh();
            sim
        })
        .collect();

    let mut history = GlobalHistory::default();
    loop {
        let (i, tau) = sims
            .iter()
            .enumerate()
            .map(|(i, s)| (i, s.candidate))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("at least one block");
        if !(tau < t_end) {
            break;
        }
        let local = sims[i].table.select(sims[i].pending.v)?;
        let atom = blocks[i].global_of(local);
        lattice.flip(atom);
        sims[i].table.reassign(local, lattice.class_of_atom(atom));
        for d in Direction::ALL {
            let n = lattice.neighbor(atom, d);
            let owner = partition.owner(n);
            let n_local = blocks[owner].local_of(n).expect("owner contains atom");
            let sim = &mut sims[owner];
            if owner != i {
                let rate = sim.table.total_rate();
                sim.hazard.close_segment(rate, tau);
            }
            sim.table.reassign(n_local, lattice.class_of_atom(n));
            if owner != i {
                sim.refresh();
            }
        }
        history.events.push(GlobalEvent { time: tau, pe: i, atom });
        let sim = &mut sims[i];
        sim.hazard = Hazard::anchored(tau);
        sim.pending = streams[i].next_pair();
        sim.refresh();
    }
    for s in streams.iter_mut() {
        s.reset_to(s.cursor() - 1);
    }
    Ok(history)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactMoments {
    pub width: usize,
    pub height: usize,
    pub mean_energy: f64,
    pub mean_abs_magnetization: f64,
    pub mean_magnetization: f64,
    /// `ln Z`; `Z` itself overflows quickly at large `beta`.
    pub log_partition: f64,
}

impl ExactMoments {
    pub fn partition_function(&self) -> f64 {
        self.log_partition.exp()
    }

    pub fn to_fixture(&self, params: &ModelParams) -> String {
        let mut out = String::new();
        out.push_str(MOMENTS_HEADER);
        out.push('\n');
        let _ = writeln!(out, "width {}", self.width);
        let _ = writeln!(out, "height {}", self.height);
        let _ = writeln!(out, "j {:?}", params.j);
        let _ = writeln!(out, "h {:?}", params.h);
        let _ = writeln!(out, "beta {:?}", params.beta);
        let _ = writeln!(out, "mean_energy {:?}", self.mean_energy);
        let _ = writeln!(out, "mean_abs_magnetization {:?}", self.mean_abs_magnetization);
        let _ = writeln!(out, "mean_magnetization {:?}", self.mean_magnetization);
        let _ = writeln!(out, "log_partition {:?}", self.log_partition);
        out
    }

    pub fn from_fixture(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim() == MOMENTS_HEADER => {}
            _ => return Err(fixture_err(1, format!("expected header {MOMENTS_HEADER:?}"))),
        }
        let mut m = ExactMoments {
            width: 0,
            height: 0,
            mean_energy: f64::NAN,
            mean_abs_magnetization: f64::NAN,
            mean_magnetization: f64::NAN,
            log_partition: f64::NAN,
        };
        for (i, line) in lines {
            let Some((key, value)) = line.trim().split_once(' ') else { continue };
            let num = |v: &str| v.trim().parse::<f64>().map_err(|e| fixture_err(i + 1, e.to_string()));
            match key {
                "width" => m.width = num(value)? as usize,
                "height" => m.height = num(value)? as usize,
                "mean_energy" => m.mean_energy = num(value)?,
                "mean_abs_magnetization" => m.mean_abs_magnetization = num(value)?,
                "mean_magnetization" => m.mean_magnetization = num(value)?,
                "log_partition" => m.log_partition = num(value)?,
                _ => {}
            }
        }
        Ok(m)
    }
}

/// Exact equilibrium moments by summing over all `2^(W·H)` configurations.
/// Weights are shifted by the minimum energy before exponentiation.
pub fn enumerate_boltzmann(width: usize, height: usize, params: &ModelParams) -> Result<ExactMoments> {
    let sites = width * height;
    if sites > ENUMERATION_CAP {
        return Err(Error::EnumerationTooLarge { sites, cap: ENUMERATION_CAP });
    }
    let mut lattice = Lattice::new(width, height, crate::lattice::Init::AllDown)?;
    let right: Vec<usize> = (0..sites).map(|v| lattice.neighbor(v, Direction::Right)).collect();
    let down: Vec<usize> = (0..sites).map(|v| lattice.neighbor(v, Direction::Down)).collect();
    let states = 1usize << sites;
    let mut energies = Vec::with_capacity(states);
    let mut mags = Vec::with_capacity(states);
    for state in 0..states {
        let spin = |v: usize| if state >> v & 1 == 1 { 1i64 } else { -1 };
        let mut bonds = 0i64;
        let mut m = 0i64;
        for v in 0..sites {
            let s = spin(v);
            bonds += s * (spin(right[v]) + spin(down[v]));
            m += s;
        }
        energies.push(-params.j * bonds as f64 - params.h * m as f64);
        mags.push(m);
    }
    // keep the lattice type honest about the bond convention
    debug_assert_eq!(lattice.bond_sum(), 2 * sites as i64);
    lattice.flip(0);

    let e_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let (mut z, mut e_sum, mut abs_sum, mut m_sum) = (0.0, 0.0, 0.0, 0.0);
    for (&e, &m) in energies.iter().zip(&mags) {
        let w = (-params.beta * (e - e_min)).exp();
        z += w;
        e_sum += w * e;
        abs_sum += w * m.abs() as f64;
        m_sum += w * m as f64;
    }
    Ok(ExactMoments {
        width,
        height,
        mean_energy: e_sum / z,
        mean_abs_magnetization: abs_sum / z,
        mean_magnetization: m_sum / z,
        log_partition: z.ln() - params.beta * e_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Init, Rule};
    use crate::nfoldway::run_sequential;
    use crate::relaxation::{make_partition, PeState};

    fn params(beta: f64, h: f64) -> ModelParams {
        ModelParams::new(1.0, h, beta, 1.0, Rule::Glauber).unwrap()
    }

    #[test]
    fn single_block_matches_sequential() {
        let p = params(0.4, 0.0);
        let part = make_partition(6, 5, 1, 1).unwrap();
        let mut a = Lattice::new(6, 5, Init::Random(3)).unwrap();
        let mut b = a.clone();
        let mut streams = vec![RngStream::new(11, 0)];
        let oracle = run_multistream_oracle(&mut a, &p, &part, &mut streams, 15.0).unwrap();
        let mut s = RngStream::new(11, 0);
        let seq = run_sequential(&mut b, &p, &mut s, 15.0).unwrap();
        assert_eq!(oracle.len(), seq.len());
        for (o, e) in oracle.events.iter().zip(&seq.events) {
            assert_eq!((o.time.to_bits(), o.atom, o.pe), (e.time.to_bits(), e.atom, 0));
        }
        assert_eq!(a, b);
        assert_eq!(streams[0].cursor(), s.cursor());
    }

    #[test]
    fn independent_blocks_without_boundary_flips() {
        // Metropolis at large beta on an all-up lattice with one interior
        // defect per block: the defects heal, boundaries stay frozen.
        let p = ModelParams::new(1.0, 0.0, 3.0, 1.0, Rule::Metropolis).unwrap();
        let mut lat = Lattice::new(12, 6, Init::AllUp).unwrap();
        lat.flip(lat.atom(2, 2));
        lat.flip(lat.atom(3, 8));
        let part = make_partition(12, 6, 1, 2).unwrap();
        let t_end = 5.0;
        let mut global = lat.clone();
        let mut streams = vec![RngStream::new(5, 0), RngStream::new(5, 1)];
        let oracle = run_multistream_oracle(&mut global, &p, &part, &mut streams, t_end).unwrap();
        assert!(!oracle.is_empty());
        assert!(oracle.events.iter().all(|e| !part.blocks[e.pe].is_boundary(e.atom)));

        // each block on its own against frozen ghosts
        let mut union = Vec::new();
        for block in &part.blocks {
            let mut pe = PeState::new(block.clone(), &lat, &p, RngStream::new(5, block.id as u64));
            for e in pe.generate(t_end).unwrap() {
                union.push(GlobalEvent { time: e.time, pe: block.id, atom: e.atom });
            }
        }
        union.sort_by(GlobalEvent::order);
        assert_eq!(oracle.events, union);
    }

    #[test]
    fn oracle_is_deterministic() {
        let p = params(0.4, 0.0);
        let part = make_partition(8, 8, 2, 2).unwrap();
        let run = || {
            let mut lat = Lattice::new(8, 8, Init::Random(1)).unwrap();
            let mut streams: Vec<_> = (0..4).map(|i| RngStream::new(9, i)).collect();
            run_multistream_oracle(&mut lat, &p, &part, &mut streams, 5.0).unwrap()
        };
        let a = run();
        assert_eq!(a.to_fixture(), run().to_fixture());
        assert!(a.events.windows(2).all(|w| w[0].time < w[1].time));
    }

    #[test]
    fn fixture_round_trip_and_errors() {
        let h = GlobalHistory {
            events: vec![
                GlobalEvent { time: 0.1 + 0.2, pe: 1, atom: 7 },
                GlobalEvent { time: std::f64::consts::PI, pe: 0, atom: 3 },
            ],
        };
        let parsed = GlobalHistory::from_fixture(&h.to_fixture()).unwrap();
        assert_eq!(parsed, h);
        assert!(GlobalHistory::from_fixture("0.5 1 2\n").is_err());
        assert!(matches!(
            GlobalHistory::from_fixture(&format!("{HISTORY_HEADER}\n0.5 1\n")),
            Err(Error::Fixture { line: 2, .. })
        ));
    }

    #[test]
    fn enumeration_symmetries() {
        let m = enumerate_boltzmann(3, 3, &params(0.0, 0.0)).unwrap();
        assert!(m.mean_energy.abs() < 1e-12);
        assert!((m.log_partition - 9.0 * 2f64.ln()).abs() < 1e-12);
        for beta in [0.1, 0.4, 1.0, 5.0] {
            let m = enumerate_boltzmann(4, 4, &params(beta, 0.0)).unwrap();
            assert!(m.mean_magnetization.abs() < 1e-9, "beta {beta}");
            let plus = enumerate_boltzmann(3, 4, &params(beta, 0.3)).unwrap();
            let minus = enumerate_boltzmann(3, 4, &params(beta, -0.3)).unwrap();
            assert!((plus.mean_magnetization + minus.mean_magnetization).abs() < 1e-12);
            assert!((plus.mean_energy - minus.mean_energy).abs() < 1e-12 * plus.mean_energy.abs().max(1.0));
            assert!((plus.log_partition - minus.log_partition).abs() < 1e-12 * plus.log_partition.abs());
        }
    }

    #[test]
    fn enumeration_refuses_large_lattices() {
        assert_eq!(
            enumerate_boltzmann(5, 5, &params(0.4, 0.0)),
            Err(Error::EnumerationTooLarge { sites: 25, cap: ENUMERATION_CAP })
        );
    }

    #[test]
    fn enumeration_survives_large_beta() {
        let m = enumerate_boltzmann(4, 4, &params(50.0, 0.0)).unwrap();
        assert!((m.mean_energy + 32.0).abs() < 1e-9);
        assert!((m.mean_abs_magnetization - 16.0).abs() < 1e-9);
        assert!(m.log_partition.is_finite());
    }
}
