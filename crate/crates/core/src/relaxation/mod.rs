//! Synchronous relaxation: optimistic, barrier-synchronized parallel n-fold way.
//!
//! Committed time advances in steps of `T_max`. Within a step every PE
//! regenerates its block history from the committed state, assuming some
//! history for the ghost atoms it borders; PEs then exchange the projections of
//! their histories onto each shared edge and replace any assumption that
//! differs. The step ends when no PE sees a difference, at which point the
//! histories are a fixed point and are committed.
//!
//! Random pairs are read from per-PE streams strictly in index order. A pair is
//! consumed only by a committed flip; the pair whose time overflowed the window
//! stays unconsumed and is the first one read in the next step. The integration
//! anchor of the overflowing event also carries over, so the committed
//! trajectory does not depend on where the step boundaries fall.

pub mod hazard;
pub mod partition;
pub mod pe;
mod threaded;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use hazard::{solve_event_time, EventTime, Hazard, RateProfile};
pub use partition::{make_partition, Block, Partition};
pub use pe::{boundary_projection, PeCommit, PeState};

use crate::lattice::{Direction, Init, Lattice, ModelParams};
use crate::nfoldway::{FlipEvent, History};
use crate::oracle::{GlobalEvent, GlobalHistory};
use crate::rngstream::{RngStream, GENERATOR_NAME};
use crate::{Error, Result};

pub const DEFAULT_MAX_ITERATIONS: usize = 1000;

/// `T_max = scale · ln N / (λ |∂G_i|)`.
pub fn choose_tmax(num_pes: f64, lambda: f64, boundary_size: usize, scale: f64) -> Result<f64> {
    if !(num_pes > 1.0) {
        return Err(Error::StepSize(format!(
            "ln N vanishes for N = {num_pes}; give T_max explicitly"
        )));
    }
    if boundary_size == 0 {
        return Err(Error::StepSize("empty boundary; give T_max explicitly".into()));
    }
    if !(scale > 0.0) || !(lambda > 0.0) {
        return Err(Error::StepSize(format!("scale {scale} and lambda {lambda} must be positive")));
    }
    Ok(scale * num_pes.ln() / (lambda * boundary_size as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepSize {
    /// Scaled logarithmic rule, see [`choose_tmax`].
    Formula { scale: f64 },
    Explicit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecMode {
    /// Round-robin over PEs on the calling thread.
    Sequential,
    /// One thread per PE with two barriers per iteration.
    Threaded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunLength {
    Steps(usize),
    /// Run until committed time reaches this value.
    Time(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxConfig {
    pub width: usize,
    pub height: usize,
    pub pe_rows: usize,
    pub pe_cols: usize,
    pub params: ModelParams,
    pub init: Init,
    pub step_size: StepSize,
    pub max_iterations: usize,
    pub run_length: RunLength,
    /// Restart every stream from unread pairs after each commit.
    pub fresh_randomness: bool,
    pub seed: u64,
    pub mode: ExecMode,
    /// Re-run each converged iteration and check it reproduces itself.
    pub audit: bool,
}

impl RelaxConfig {
    pub fn new(width: usize, height: usize, pe_rows: usize, pe_cols: usize, params: ModelParams) -> Self {
        RelaxConfig {
            width,
            height,
            pe_rows,
            pe_cols,
            params,
            init: Init::AllUp,
            step_size: StepSize::Formula { scale: 1.0 },
            max_iterations: DEFAULT_MAX_ITERATIONS,
            run_length: RunLength::Steps(1),
            fresh_randomness: false,
            seed: 0,
            mode: ExecMode::Sequential,
            audit: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub step: usize,
    pub committed_time: f64,
    /// Iterations used.
    pub g: usize,
    /// Per iteration: the largest number of boundary events generated by any PE.
    pub f_per_iteration: Vec<usize>,
    /// Committed history of each PE, indexed by PE id.
    pub histories: Vec<History>,
    pub pair_ranges: Vec<(u64, u64)>,
    pub discarded_pairs: Vec<u64>,
    #[serde(skip)]
    pub wall: Duration,
}

impl StepResult {
    pub fn events(&self) -> usize {
        self.histories.iter().map(History::len).sum()
    }

    pub fn pairs_committed(&self) -> u64 {
        self.pair_ranges.iter().map(|(a, b)| b - a).sum()
    }

    /// Events of all PEs merged in `(time, pe, atom)` order.
    pub fn merged(&self) -> Vec<GlobalEvent> {
        let mut events: Vec<GlobalEvent> = self
            .histories
            .iter()
            .enumerate()
            .flat_map(|(pe, h)| h.events.iter().map(move |e| GlobalEvent { time: e.time, pe, atom: e.atom }))
            .collect();
        events.sort_by(GlobalEvent::order);
        events
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub config: RelaxConfig,
    pub generator: String,
    pub tmax: f64,
    pub initial: Lattice,
    pub final_lattice: Lattice,
    pub steps: Vec<StepResult>,
}

impl SimulationReport {
    pub fn committed_time(&self) -> f64 {
        self.steps.len() as f64 * self.tmax
    }

    pub fn global_history(&self) -> GlobalHistory {
        GlobalHistory { events: self.steps.iter().flat_map(StepResult::merged).collect() }
    }
}

/// Sequential-mode engine; also the state container the threaded driver
/// distributes over workers.
#[derive(Debug, Clone)]
pub struct Engine {
    config: RelaxConfig,
    partition: Partition,
    tmax: f64,
    initial: Lattice,
    pes: Vec<PeState>,
    step: usize,
}

impl Engine {
    pub fn new(config: &RelaxConfig) -> Result<Self> {
        config.params.validate()?;
        if config.max_iterations == 0 {
            return Err(Error::InvalidParams("max_iterations must be at least 1".into()));
        }
        let partition = make_partition(config.width, config.height, config.pe_rows, config.pe_cols)?;
        let tmax = match config.step_size {
            StepSize::Formula { scale } => choose_tmax(
                partition.num_pes() as f64,
                config.params.lambda,
                partition.boundary_size(),
                scale,
            )?,
            StepSize::Explicit(t) if t > 0.0 && t.is_finite() => t,
            StepSize::Explicit(t) => return Err(Error::StepSize(format!("T_max must be positive, got {t}"))),
        };
        let initial = Lattice::new(config.width, config.height, config.init)?;
        let pes = partition
            .blocks
            .iter()
            .map(|b| PeState::new(b.clone(), &initial, &config.params, RngStream::new(config.seed, b.id as u64)))
            .collect();
        Ok(Engine { config: config.clone(), partition, tmax, initial, pes, step: 0 })
    }

    pub fn tmax(&self) -> f64 {
        self.tmax
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn pes(&self) -> &[PeState] {
        &self.pes
    }

    pub fn pes_mut(&mut self) -> &mut [PeState] {
        &mut self.pes
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn committed_time(&self) -> f64 {
        window_start(self.step, self.tmax)
    }

    /// Committed configuration assembled from every PE.
    pub fn lattice(&self) -> Lattice {
        let mut spins = vec![0i8; self.config.width * self.config.height];
        for pe in &self.pes {
            for (a, s) in pe.committed_spins() {
                spins[a] = s;
            }
        }
        Lattice::from_spins(self.config.width, self.config.height, spins).expect("every atom owned by one PE")
    }

    /// Iterates until the PE histories are mutually consistent, then commits.
    pub fn run_step(&mut self) -> Result<StepResult> {
        let started = Instant::now();
        let (t_c, t_end) = (window_start(self.step, self.tmax), window_start(self.step + 1, self.tmax));
        for pe in &mut self.pes {
            pe.begin_step();
        }
        let mut f_per_iteration = Vec::new();
        loop {
            for pe in &mut self.pes {
                pe.generate(t_end)?;
            }
            f_per_iteration.push(self.pes.iter().map(PeState::boundary_events).max().unwrap_or(0));
            if exchange_and_compare(&mut self.pes) {
                break;
            }
            if f_per_iteration.len() >= self.config.max_iterations {
                return Err(Error::Divergence {
                    step: self.step,
                    committed_time: t_c,
                    iterations: f_per_iteration.len(),
                    f_per_iteration,
                });
            }
        }
        if self.config.audit {
            for pe in &mut self.pes {
                pe.audit_fixed_point(t_end)?;
            }
        }
        let commits: Vec<PeCommit> = self
            .pes
            .iter_mut()
            .map(|pe| pe.commit(t_c, t_end, self.config.fresh_randomness))
            .collect();
        let result = step_result(self.step, t_c, f_per_iteration, commits, started.elapsed());
        self.step += 1;
        Ok(result)
    }
}

fn window_start(step: usize, tmax: f64) -> f64 {
    step as f64 * tmax
}

fn step_result(step: usize, t_c: f64, f_per_iteration: Vec<usize>, commits: Vec<PeCommit>, wall: Duration) -> StepResult {
    let mut histories = Vec::with_capacity(commits.len());
    let mut pair_ranges = Vec::with_capacity(commits.len());
    let mut discarded_pairs = Vec::with_capacity(commits.len());
    for c in commits {
        histories.push(c.history);
        pair_ranges.push(c.pair_range);
        discarded_pairs.push(c.discarded);
    }
    StepResult {
        step,
        committed_time: t_c,
        g: f_per_iteration.len(),
        f_per_iteration,
        histories,
        pair_ranges,
        discarded_pairs,
        wall,
    }
}

/// Regenerates one PE's history for the window starting at `t_c`.
pub fn generate_local_history(pe: &mut PeState, t_c: f64, tmax: f64) -> Result<History> {
    let t_end = t_c + tmax;
    let events = pe.generate(t_end)?.to_vec();
    Ok(History { t_start: t_c, t_end, events })
}

/// Delivers every PE's edge projections to the neighbor across that edge and
/// returns `true` iff no PE's assumptions changed.
pub fn exchange_and_compare(pes: &mut [PeState]) -> bool {
    let outgoing: Vec<[Vec<FlipEvent>; 4]> = pes.iter().map(PeState::projections).collect();
    let mut consistent = true;
    for pe in pes.iter_mut() {
        for d in Direction::ALL {
            if let Some(j) = pe.block().neighbors[d.index()] {
                consistent &= !pe.absorb(d, &outgoing[j][d.opposite().index()]);
            }
        }
    }
    consistent
}

pub fn run_simulation(config: &RelaxConfig) -> Result<SimulationReport> {
    let mut engine = Engine::new(config)?;
    let n_steps = match config.run_length {
        RunLength::Steps(n) => n,
        RunLength::Time(t) if t <= 0.0 => 0,
        RunLength::Time(t) => (t / engine.tmax).ceil() as usize,
    };
    let steps = match config.mode {
        ExecMode::Sequential => {
            let mut steps = Vec::with_capacity(n_steps);
            for _ in 0..n_steps {
                steps.push(engine.run_step()?);
            }
            steps
        }
        ExecMode::Threaded => threaded::run(&mut engine, n_steps)?,
    };
    Ok(SimulationReport {
        config: config.clone(),
        generator: GENERATOR_NAME.to_string(),
        tmax: engine.tmax,
        initial: engine.initial.clone(),
        final_lattice: engine.lattice(),
        steps,
    })
}
