use ising_relax::lattice::{Init, Lattice, ModelParams, Rule};
use ising_relax::nfoldway::run_sequential;
use ising_relax::oracle::run_multistream_oracle;
use ising_relax::relaxation::{
    make_partition, run_simulation, Engine, ExecMode, RelaxConfig, RunLength, StepSize,
};
use ising_relax::{Error, RngStream};

fn config(w: usize, h: usize, pr: usize, pc: usize, beta: f64, steps: usize, seed: u64) -> RelaxConfig {
    let params = ModelParams::new(1.0, 0.0, beta, 1.0, Rule::Glauber).unwrap();
    let mut c = RelaxConfig::new(w, h, pr, pc, params);
    c.init = Init::Random(seed ^ 0x5eed);
    c.run_length = RunLength::Steps(steps);
    c.seed = seed;
    c
}

fn oracle_for(c: &RelaxConfig, t_end: f64) -> ising_relax::GlobalHistory {
    let part = make_partition(c.width, c.height, c.pe_rows, c.pe_cols).unwrap();
    let mut lat = Lattice::new(c.width, c.height, c.init).unwrap();
    let mut streams: Vec<_> = (0..part.num_pes()).map(|i| RngStream::new(c.seed, i as u64)).collect();
    run_multistream_oracle(&mut lat, &c.params, &part, &mut streams, t_end).unwrap()
}

#[test]
fn committed_history_equals_oracle() {
    for (w, h, pr, pc, seed) in [(16, 16, 2, 2, 7), (12, 8, 2, 3, 1), (9, 12, 3, 1, 4), (8, 8, 4, 4, 2), (4, 4, 2, 2, 3)] {
        let mut c = config(w, h, pr, pc, 0.4, 60, seed);
        c.audit = true;
        let report = run_simulation(&c).unwrap();
        let oracle = oracle_for(&c, report.committed_time());
        let got = report.global_history();
        assert!(!oracle.is_empty());
        assert_eq!(got.to_fixture(), oracle.to_fixture(), "{w}x{h} on {pr}x{pc}");
    }
}

#[test]
fn threaded_equals_sequential() {
    let mut c = config(16, 16, 2, 2, 0.4, 50, 11);
    let seq = run_simulation(&c).unwrap();
    c.mode = ExecMode::Threaded;
    c.audit = true;
    let thr = run_simulation(&c).unwrap();
    assert_eq!(seq.global_history(), thr.global_history());
    assert_eq!(seq.final_lattice, thr.final_lattice);
    let g = |r: &ising_relax::relaxation::SimulationReport| r.steps.iter().map(|s| s.g).collect::<Vec<_>>();
    assert_eq!(g(&seq), g(&thr));
}

#[test]
fn single_pe_reduces_to_sequential() {
    let mut c = config(6, 5, 1, 1, 0.4, 40, 3);
    c.step_size = StepSize::Explicit(0.37);
    let report = run_simulation(&c).unwrap();
    assert!(report.steps.iter().all(|s| s.g == 1));
    let mut lat = Lattice::new(6, 5, c.init).unwrap();
    let mut stream = RngStream::new(c.seed, 0);
    let seq = run_sequential(&mut lat, &c.params, &mut stream, report.committed_time()).unwrap();
    let got = report.global_history();
    assert_eq!(got.len(), seq.len());
    for (a, b) in got.events.iter().zip(&seq.events) {
        assert_eq!((a.time.to_bits(), a.atom), (b.time.to_bits(), b.atom));
    }
    assert_eq!(report.final_lattice, lat);
}

#[test]
fn formula_step_requires_several_pes() {
    let c = config(6, 6, 1, 1, 0.4, 1, 0);
    assert!(matches!(Engine::new(&c), Err(Error::StepSize(_))));
}

#[test]
fn divergence_guard() {
    let mut c = config(16, 16, 2, 2, 0.0, 5, 7);
    c.max_iterations = 1;
    c.step_size = StepSize::Formula { scale: 20.0 };
    match run_simulation(&c) {
        Err(Error::Divergence { step, iterations, .. }) => {
            assert_eq!(step, 0);
            assert_eq!(iterations, 1);
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(48))]

    #[test]
    fn fixed_point_equals_oracle_for_random_configs(
        bw in 2usize..6, bh in 2usize..6, pr in 1usize..4, pc in 1usize..4,
        seed in 0u64..1_000_000, beta in 0.0f64..1.2, h in -0.5f64..0.5,
        metropolis in proptest::bool::ANY, steps in 1usize..30,
    ) {
        let (w, hgt) = (bw * pc, bh * pr);
        proptest::prop_assume!(w >= 3 && hgt >= 3 && pr * pc > 1);
        let rule = if metropolis { Rule::Metropolis } else { Rule::Glauber };
        let params = ModelParams::new(1.0, h, beta, 1.0, rule).unwrap();
        let mut c = RelaxConfig::new(w, hgt, pr, pc, params);
        c.init = Init::Random(seed);
        c.seed = seed;
        c.run_length = RunLength::Steps(steps);
        c.audit = true;
        let report = run_simulation(&c).unwrap();
        let oracle = oracle_for(&c, report.committed_time());
        proptest::prop_assert_eq!(report.global_history(), oracle);
    }
}
