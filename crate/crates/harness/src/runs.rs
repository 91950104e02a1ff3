//! Subcommand implementations and their output files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ising_relax::metropolis::{run_metropolis, MetropolisTrajectory};
use ising_relax::nfoldway::run_sequential;
use ising_relax::observables::{sample_estimate, time_averages, Estimate, Observables};
use ising_relax::oracle::{enumerate_boltzmann, run_multistream_oracle, ExactMoments, ENUMERATION_CAP};
use ising_relax::relaxation::{make_partition, run_simulation, Engine, RunLength, SimulationReport};
use ising_relax::rngstream::GENERATOR_NAME;
use ising_relax::{GlobalEvent, GlobalHistory, History, Lattice, RngStream};
use serde::Serialize;
use serde_json::{json, Value};

use crate::compare::{compare_histories, Comparison};
use crate::config::{CompareArgs, Command, Dims, RunConfig};
use crate::error::{HarnessError, Result};
use crate::metrics::{collect_metrics, RunMetrics};

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const HISTORY_FILE: &str = "history.txt";
pub const SWEEP_FILE: &str = "sweep.csv";

/// Upper bound on stored chain samples; longer chains are thinned.
const MAX_SAMPLES: u64 = 2_000_000;

/// Observable estimates together with exact values when the lattice is small
/// enough to enumerate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Measured {
    pub observables: Observables,
    pub exact: Option<ExactMoments>,
}

impl Measured {
    fn new(cfg: &RunConfig, observables: Observables) -> Result<Self> {
        let exact = if cfg.width * cfg.height <= ENUMERATION_CAP {
            Some(enumerate_boltzmann(cfg.width, cfg.height, &cfg.params)?)
        } else {
            None
        };
        Ok(Measured { observables, exact })
    }

    /// `(energy, |M|)` z-scores against the exact values.
    pub fn z_scores(&self) -> Option<(f64, f64)> {
        self.exact.map(|x| {
            (
                self.observables.energy.z_score(x.mean_energy),
                self.observables.abs_magnetization.z_score(x.mean_abs_magnetization),
            )
        })
    }
}

pub struct MetropolisRun {
    pub trajectory: MetropolisTrajectory,
    pub measured: Measured,
}

pub fn metropolis(cfg: &RunConfig) -> Result<MetropolisRun> {
    let n_updates = cfg.updates.unwrap_or(0);
    let lattice = Lattice::new(cfg.width, cfg.height, cfg.init)?;
    let mut stream = RngStream::sequential(cfg.seed);
    let every = n_updates.div_ceil(MAX_SAMPLES).max(1);
    let trajectory = run_metropolis(lattice, &cfg.params, n_updates, &mut stream, every);
    let skip = (cfg.burn_in * trajectory.samples.len() as f64) as usize;
    let kept = &trajectory.samples[skip..];
    let energy: Vec<f64> = kept.iter().map(|s| s.energy).collect();
    let abs_m: Vec<f64> = kept.iter().map(|s| s.magnetization.abs() as f64).collect();
    let observables = Observables {
        energy: sample_estimate(&energy, cfg.batches),
        abs_magnetization: sample_estimate(&abs_m, cfg.batches),
    };
    let measured = Measured::new(cfg, observables)?;
    Ok(MetropolisRun { trajectory, measured })
}

pub struct NfoldRun {
    pub initial: Lattice,
    pub final_lattice: Lattice,
    pub history: History,
    pub measured: Measured,
}

pub fn nfold(cfg: &RunConfig) -> Result<NfoldRun> {
    let t_end = match cfg.run_length {
        Some(RunLength::Time(t)) => t,
        _ => return Err(HarnessError::Usage("nfold needs --time".into())),
    };
    let initial = Lattice::new(cfg.width, cfg.height, cfg.init)?;
    let mut lattice = initial.clone();
    let mut stream = RngStream::sequential(cfg.seed);
    let history = run_sequential(&mut lattice, &cfg.params, &mut stream, t_end)?;
    let events = history.events.iter().map(|e| (e.time, e.atom));
    let observables = time_averages(&initial, &cfg.params, events, cfg.burn_in * t_end, t_end, cfg.batches);
    let measured = Measured::new(cfg, observables)?;
    Ok(NfoldRun { initial, final_lattice: lattice, history, measured })
}

pub struct RelaxRun {
    pub report: SimulationReport,
    pub metrics: RunMetrics,
    pub measured: Measured,
}

pub fn relax(cfg: &RunConfig) -> Result<RelaxRun> {
    let report = run_simulation(&cfg.relax_config())?;
    let metrics = collect_metrics(&report.steps, report.tmax);
    let t_end = report.committed_time();
    let events = report.global_history().events.into_iter().map(|e| (e.time, e.atom));
    let observables = time_averages(&report.initial, &cfg.params, events, cfg.burn_in * t_end, t_end, cfg.batches);
    let measured = Measured::new(cfg, observables)?;
    Ok(RelaxRun { report, metrics, measured })
}

pub struct OracleRun {
    pub tmax: f64,
    pub t_end: f64,
    pub history: GlobalHistory,
    pub final_lattice: Lattice,
}

/// Reference history over the same window a relaxation run with this
/// configuration commits.
pub fn oracle(cfg: &RunConfig) -> Result<OracleRun> {
    let relax = cfg.relax_config();
    let tmax = Engine::new(&relax)?.tmax();
    let steps = match relax.run_length {
        RunLength::Steps(n) => n,
        RunLength::Time(t) if t <= 0.0 => 0,
        RunLength::Time(t) => (t / tmax).ceil() as usize,
    };
    let t_end = steps as f64 * tmax;
    let partition = make_partition(relax.width, relax.height, relax.pe_rows, relax.pe_cols)?;
    let mut lattice = Lattice::new(relax.width, relax.height, relax.init)?;
    let mut streams: Vec<RngStream> = (0..partition.num_pes()).map(|i| RngStream::new(relax.seed, i as u64)).collect();
    let history = run_multistream_oracle(&mut lattice, &relax.params, &partition, &mut streams, t_end)?;
    Ok(OracleRun { tmax, t_end, history, final_lattice: lattice })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub pes: String,
    pub n_pes: usize,
    pub width: usize,
    pub height: usize,
    pub boundary: usize,
    pub tmax: f64,
    pub steps: usize,
    pub mean_g: f64,
    pub sd_g: f64,
    pub mean_f: f64,
    pub sd_f: f64,
    pub mean_fg: f64,
    pub ln_n: f64,
    /// `C e ln N + 1/(C-1)` at `C = 2`.
    pub f_bound_c2: f64,
    pub g_ratio: f64,
    pub events_per_second: f64,
}

pub struct SweepRun {
    pub rows: Vec<SweepRow>,
    pub metrics: Vec<RunMetrics>,
}

/// Runs one relaxation per PE grid with the block size held fixed, so the
/// boundary length per PE is the same across the sweep.
pub fn sweep(cfg: &RunConfig) -> Result<SweepRun> {
    let mut rows: Vec<SweepRow> = Vec::new();
    let mut all = Vec::new();
    for &Dims(r, c) in &cfg.sweep {
        let relax = cfg.relax_config_for(cfg.block.0 * c, cfg.block.1 * r, r, c);
        let report = run_simulation(&relax)?;
        let m = collect_metrics(&report.steps, report.tmax);
        let n = (r * c) as f64;
        let a = m.aggregates;
        let partition = make_partition(relax.width, relax.height, r, c)?;
        rows.push(SweepRow {
            pes: Dims(r, c).to_string(),
            n_pes: r * c,
            width: relax.width,
            height: relax.height,
            boundary: partition.boundary_size(),
            tmax: report.tmax,
            steps: a.steps,
            mean_g: a.mean_g,
            sd_g: a.sd_g,
            mean_f: a.mean_f,
            sd_f: a.sd_f,
            mean_fg: a.mean_fg,
            ln_n: n.ln(),
            f_bound_c2: 2.0 * std::f64::consts::E * n.ln() + 1.0,
            g_ratio: rows.first().map_or(1.0, |first| a.mean_g / first.mean_g),
            events_per_second: a.events_per_second,
        });
        all.push(m);
    }
    Ok(SweepRun { rows, metrics: all })
}

pub fn compare_files(args: &CompareArgs) -> Result<Comparison> {
    let read = |p: &Path| -> Result<GlobalHistory> {
        let text = fs::read_to_string(p).map_err(|e| HarnessError::io(p, e))?;
        Ok(GlobalHistory::from_fixture(&text)?)
    };
    Ok(compare_histories(&read(&args.left)?, &read(&args.right)?, args.tolerance))
}

pub fn sequential_history(history: &History) -> GlobalHistory {
    GlobalHistory { events: history.events.iter().map(|e| GlobalEvent { time: e.time, pe: 0, atom: e.atom }).collect() }
}

/// Runs the configured subcommand and writes its outputs. Returns the
/// summary document.
pub fn execute(cfg: &RunConfig) -> Result<Value> {
    let out = &cfg.out;
    fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let mut records: Vec<Value> = Vec::new();
    let results = match cfg.command {
        Command::Metropolis => {
            let run = metropolis(cfg)?;
            json!({
                "measured": run.measured,
                "accepted": run.trajectory.accepted,
                "samples": run.trajectory.samples.len(),
                "final_magnetization": run.trajectory.lattice.magnetization(),
            })
        }
        Command::Nfold => {
            let run = nfold(cfg)?;
            write_text(&out.join(HISTORY_FILE), &sequential_history(&run.history).to_fixture())?;
            json!({
                "measured": run.measured,
                "events": run.history.len(),
                "final_magnetization": run.final_lattice.magnetization(),
            })
        }
        Command::Relax => {
            let run = relax(cfg)?;
            write_text(&out.join(HISTORY_FILE), &run.report.global_history().to_fixture())?;
            records.extend(run.metrics.records.iter().map(|r| tagged("step", r)));
            json!({
                "measured": run.measured,
                "tmax": run.report.tmax,
                "aggregates": run.metrics.aggregates,
                "final_magnetization": run.report.final_lattice.magnetization(),
            })
        }
        Command::Oracle => {
            let run = oracle(cfg)?;
            write_text(&out.join(HISTORY_FILE), &run.history.to_fixture())?;
            json!({
                "tmax": run.tmax,
                "t_end": run.t_end,
                "events": run.history.len(),
                "final_magnetization": run.final_lattice.magnetization(),
            })
        }
        Command::Enumerate => json!({ "exact": enumerate_boltzmann(cfg.width, cfg.height, &cfg.params)? }),
        Command::Bench => {
            let run = sweep(cfg)?;
            write_sweep(&out.join(SWEEP_FILE), &run.rows)?;
            for (row, m) in run.rows.iter().zip(&run.metrics) {
                records.extend(m.records.iter().map(|r| {
                    let mut v = tagged("step", r);
                    v["pes"] = json!(row.pes);
                    v
                }));
            }
            json!({ "sweep": run.rows })
        }
    };
    let summary = json!({
        "command": cfg.command,
        "generator": GENERATOR_NAME,
        "seed": cfg.seed,
        "config": cfg,
        "results": results,
    });
    records.push(tagged("summary", &summary));
    write_jsonl(&out.join(METRICS_FILE), &records)?;
    write_text(&out.join(SUMMARY_FILE), &pretty(&summary))?;
    Ok(summary)
}

fn tagged<T: Serialize>(kind: &str, value: &T) -> Value {
    let mut v = serde_json::to_value(value).expect("records serialize");
    match v.as_object_mut() {
        Some(map) => {
            map.insert("kind".into(), json!(kind));
            v
        }
        None => json!({ "kind": kind, "value": v }),
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

fn write_jsonl(path: &Path, records: &[Value]) -> Result<()> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).map_err(|e| HarnessError::Json { path: path.into(), source: e })?;
        buf.push(b'\n');
    }
    let mut file = fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    file.write_all(&buf).map_err(|e| HarnessError::io(path, e))
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// One-line description of an estimate against an exact value.
pub fn describe(name: &str, e: &Estimate, exact: Option<f64>) -> String {
    match exact {
        Some(x) => format!("{name} = {:.6} ± {:.6} (exact {x:.6}, z = {:+.2})", e.mean, e.std_error, e.z_score(x)),
        None => format!("{name} = {:.6} ± {:.6}", e.mean, e.std_error),
    }
}

pub fn output_files(cfg: &RunConfig) -> Vec<PathBuf> {
    let mut files = vec![cfg.out.join(METRICS_FILE), cfg.out.join(SUMMARY_FILE)];
    match cfg.command {
        Command::Nfold | Command::Relax | Command::Oracle => files.push(cfg.out.join(HISTORY_FILE)),
        Command::Bench => files.push(cfg.out.join(SWEEP_FILE)),
        Command::Metropolis | Command::Enumerate => {}
    }
    files
}
