//! One worker thread per PE. Each iteration has two barriers: after history
//! generation (projections are posted) and after comparison (verdicts are
//! posted). Between barriers a worker touches only its own PE state and the
//! mailboxes, so the outcome does not depend on thread interleaving.

use std::sync::{Barrier, Mutex};
use std::time::{Duration, Instant};

use super::{step_result, window_start, Engine, PeCommit, PeState, StepResult};
use crate::lattice::Direction;
use crate::nfoldway::FlipEvent;
use crate::{Error, Result};

#[derive(Default)]
struct Verdict {
    changed: bool,
    boundary_events: usize,
    error: Option<Error>,
}

struct Shared {
    barrier: Barrier,
    outbox: Vec<Mutex<[Vec<FlipEvent>; 4]>>,
    verdicts: Vec<Mutex<Verdict>>,
    tmax: f64,
    first_step: usize,
    n_steps: usize,
    max_iterations: usize,
    fresh_randomness: bool,
    audit: bool,
}

#[derive(Default)]
struct WorkerLog {
    commits: Vec<PeCommit>,
    iterations: Vec<(Vec<usize>, Duration)>,
    error: Option<Error>,
}

pub(super) fn run(engine: &mut Engine, n_steps: usize) -> Result<Vec<StepResult>> {
    let n = engine.pes.len();
    let shared = Shared {
        barrier: Barrier::new(n),
        outbox: (0..n).map(|_| Mutex::new(Default::default())).collect(),
        verdicts: (0..n).map(|_| Mutex::new(Verdict::default())).collect(),
        tmax: engine.tmax,
        first_step: engine.step,
        n_steps,
        max_iterations: engine.config.max_iterations,
        fresh_randomness: engine.config.fresh_randomness,
        audit: engine.config.audit,
    };
    let pes = std::mem::take(&mut engine.pes);
    let finished: Vec<(PeState, WorkerLog)> = std::thread::scope(|scope| {
        let handles: Vec<_> = pes
            .into_iter()
            .map(|pe| {
                let shared = &shared;
                scope.spawn(move || worker(pe, shared))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("relaxation worker panicked")).collect()
    });

    let mut logs = Vec::with_capacity(n);
    for (pe, log) in finished {
        engine.pes.push(pe);
        logs.push(log);
    }
    let completed = logs[0].commits.len();
    engine.step += completed;
    if let Some(err) = logs[0].error.take() {
        return Err(err);
    }

    let mut per_pe: Vec<_> = logs.iter_mut().map(|l| std::mem::take(&mut l.commits).into_iter()).collect();
    let steps = logs[0]
        .iterations
        .drain(..)
        .enumerate()
        .map(|(k, (f, wall))| {
            let step = shared.first_step + k;
            let commits = per_pe.iter_mut().map(|c| c.next().expect("every PE commits every step")).collect();
            step_result(step, window_start(step, shared.tmax), f, commits, wall)
        })
        .collect();
    Ok(steps)
}

fn worker(mut pe: PeState, shared: &Shared) -> (PeState, WorkerLog) {
    let id = pe.id();
    let neighbors = pe.block().neighbors;
    let mut log = WorkerLog::default();
    for step in shared.first_step..shared.first_step + shared.n_steps {
        let started = Instant::now();
        let (t_c, t_end) = (window_start(step, shared.tmax), window_start(step + 1, shared.tmax));
        pe.begin_step();
        let mut f_per_iteration = Vec::new();
        loop {
            let error = pe.generate(t_end).err();
            *shared.outbox[id].lock().unwrap() = pe.projections();
            shared.barrier.wait();

            let mut changed = false;
            for d in Direction::ALL {
                if let Some(j) = neighbors[d.index()] {
                    let received = shared.outbox[j].lock().unwrap()[d.opposite().index()].clone();
                    changed |= pe.absorb(d, &received);
                }
            }
            *shared.verdicts[id].lock().unwrap() =
                Verdict { changed, boundary_events: pe.boundary_events(), error };
            shared.barrier.wait();

            let (any_changed, f, error) = collect(&shared.verdicts);
            f_per_iteration.push(f);
            if let Some(e) = error {
                log.error = Some(e);
                return (pe, log);
            }
            if !any_changed {
                break;
            }
            if f_per_iteration.len() >= shared.max_iterations {
                log.error = Some(Error::Divergence {
                    step,
                    committed_time: t_c,
                    iterations: f_per_iteration.len(),
                    f_per_iteration,
                });
                return (pe, log);
            }
        }
        if shared.audit {
            // verdicts of the last iteration may still be being read
            shared.barrier.wait();
            let error = pe.audit_fixed_point(t_end).err();
            *shared.verdicts[id].lock().unwrap() = Verdict { error, ..Default::default() };
            shared.barrier.wait();
            let (_, _, error) = collect(&shared.verdicts);
            // everyone has read the verdicts before anyone overwrites them
            shared.barrier.wait();
            if let Some(e) = error {
                log.error = Some(e);
                return (pe, log);
            }
        }
        log.commits.push(pe.commit(t_c, t_end, shared.fresh_randomness));
        log.iterations.push((f_per_iteration, started.elapsed()));
    }
    (pe, log)
}

fn collect(verdicts: &[Mutex<Verdict>]) -> (bool, usize, Option<Error>) {
    let mut changed = false;
    let mut f = 0;
    let mut error = None;
    for v in verdicts {
        let v = v.lock().unwrap();
        changed |= v.changed;
        f = f.max(v.boundary_events);
        if error.is_none() {
            error = v.error.clone();
        }
    }
    (changed, f, error)
}
