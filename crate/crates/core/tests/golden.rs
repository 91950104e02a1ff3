//! Frozen reference outputs. Set `ISING_RELAX_UPDATE_FIXTURES=1` to rewrite
//! the fixture files from the current implementation.

use std::path::PathBuf;

use ising_relax::lattice::{Init, Lattice, ModelParams, Rule};
use ising_relax::oracle::{enumerate_boltzmann, run_multistream_oracle, ExactMoments};
use ising_relax::relaxation::{choose_tmax, make_partition, run_simulation, RelaxConfig, RunLength};
use ising_relax::{GlobalHistory, RngStream};

const SEED: u64 = 7;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn check_or_update(name: &str, contents: &str) -> String {
    let path = fixture(name);
    if std::env::var_os("ISING_RELAX_UPDATE_FIXTURES").is_some() {
        std::fs::write(&path, contents).unwrap();
    }
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn params() -> ModelParams {
    ModelParams::new(1.0, 0.0, 0.4, 1.0, Rule::Glauber).unwrap()
}

#[test]
fn oracle_history_16x16_2x2() {
    let part = make_partition(16, 16, 2, 2).unwrap();
    let tmax = choose_tmax(4.0, 1.0, part.boundary_size(), 1.0).unwrap();
    let t_end = 10.0 * tmax;
    let mut lat = Lattice::new(16, 16, Init::Random(SEED)).unwrap();
    let mut streams: Vec<_> = (0..4).map(|i| RngStream::new(SEED, i)).collect();
    let history = run_multistream_oracle(&mut lat, &params(), &part, &mut streams, t_end).unwrap();
    let frozen = GlobalHistory::from_fixture(&check_or_update("oracle_16x16_2x2_seed7.txt", &history.to_fixture())).unwrap();
    assert_eq!(history, frozen);

    let mut config = RelaxConfig::new(16, 16, 2, 2, params());
    config.init = Init::Random(SEED);
    config.seed = SEED;
    config.run_length = RunLength::Steps(10);
    let report = run_simulation(&config).unwrap();
    assert_eq!(report.global_history(), frozen);
}

#[test]
fn enumeration_4x4_beta_0_4() {
    let m = enumerate_boltzmann(4, 4, &params()).unwrap();
    let frozen = ExactMoments::from_fixture(&check_or_update("moments_4x4_beta0.4.txt", &m.to_fixture(&params()))).unwrap();
    assert_eq!(m, frozen);
    // independent numpy enumeration of the same sums
    assert!((m.mean_energy - -22.065863716149586).abs() < 1e-10);
    assert!((m.mean_abs_magnetization - 12.235398291546929).abs() < 1e-10);
    assert!((m.log_partition - 14.561093023844043).abs() < 1e-10);
}
