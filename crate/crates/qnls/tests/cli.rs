//! End-to-end checks of the CLI surface and the on-disk formats.

use std::fs;
use std::sync::Arc;

use num_complex::Complex;
use qnls::cli_io::{self, RunConfig};
use qnls::fields::{FieldPair, Grid, PhysicsParams};
use qnls::functionals;
use qnls::ground_state::{self, SolverOptions};
use qnls::propagators::{self, EvolveOptions};

type C = Complex<f64>;

fn tiny_run_config(dir: &std::path::Path) -> RunConfig {
    let text = format!(
        r#"
[grid]
kind = "periodic1d"
n = 64
extent = 6.0

[initial]
preset = "gaussian-pair"
amplitude = 0.4
amplitude_v = 0.2

[evolve]
dt = 1e-2
t_end = 0.3
sample_every = 5
snapshot_every = 2

[output]
dir = "{}"
"#,
        dir.display()
    );
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    cli_io::load_config(&path).unwrap()
}

#[test]
fn evolve_without_config_exits_2() {
    assert_eq!(cli_io::run_command(["qnls", "evolve"]), 2);
}

#[test]
fn conflicting_config_sources_exit_2() {
    assert_eq!(
        cli_io::run_command(["qnls", "evolve", "--config", "a.toml", "--preset", "galilean-1d"]),
        2
    );
}

#[test]
fn unknown_preset_exits_2() {
    assert_eq!(
        cli_io::run_command(["qnls", "evolve", "--preset", "nope"]),
        2
    );
}

#[test]
fn galilean_command_at_resonance_exits_0() {
    // xi = 2 gets snapped onto the wavenumber lattice.
    let code = cli_io::run_command([
        "qnls",
        "galilean",
        "--kappa",
        "0.5",
        "--xi",
        "2",
        "--t-end",
        "0.5",
        "--n",
        "256",
    ]);
    assert_eq!(code, 0);
}

#[test]
fn ground_state_command_writes_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let code = cli_io::run_command([
        "qnls",
        "ground-state",
        "--kappa",
        "1.0",
        "--omega",
        "1.0",
        "--n",
        "320",
        "--r-max",
        "24",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "Pohozaev check failed at the CLI level");
    assert!(dir.path().join("ground_state.json").exists());
    assert!(dir.path().join("ground_state_report.json").exists());

    // Checkpoint round-trip reproduces the functional report.
    let gs = cli_io::load_ground_state(&dir.path().join("ground_state.json")).unwrap();
    assert!(gs.converged);
    let params = PhysicsParams::new(gs.kappa, gs.omega).unwrap();
    let reevaluated = functionals::evaluate_all(&gs.field_pair(), &params).unwrap();
    assert!((reevaluated.mass - gs.report.mass).abs() <= 1e-12 * gs.report.mass);
    assert!((reevaluated.energy - gs.report.energy).abs() <= 1e-12 * gs.report.energy.abs());
    assert!(
        (reevaluated.i_omega - gs.report.i_omega).abs() <= 1e-12 * gs.report.i_omega
    );
}

#[test]
fn emit_zero_run_csv_shape() {
    let dir = tempfile::tempdir().unwrap();
    let grid = Arc::new(Grid::<f64>::make_periodic(32, 4.0).unwrap());
    let params = PhysicsParams::new(1.0, 1.0).unwrap();
    let opts = EvolveOptions {
        dt: 1e-2,
        t_end: 0.1,
        sample_every: 2,
        ..EvolveOptions::default()
    };
    let record =
        propagators::evolve(&FieldPair::zero(grid), &params, &opts, |_, _, _| {}).unwrap();
    cli_io::emit_timeseries(&record, dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("timeseries.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,M,E,P,K,L,N,I_omega,J_omega,S_cum,virial,absorbed_mass"
    );
    for line in lines {
        let cells: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(cells.len(), 12);
        // Everything except time is identically zero on zero data.
        assert!(cells[1..].iter().all(|&x| x == 0.0));
    }
}

#[test]
fn snapshot_round_trip_reproduces_csv_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_run_config(dir.path());
    let (record, _) = cli_io::run_configured(&cfg, false).unwrap();
    assert!(!record.snapshots.is_empty());
    cli_io::emit_timeseries(&record, dir.path()).unwrap();

    let (sidecar, u, v) = cli_io::load_snapshot(
        &dir.path().join("snapshot_0001.bin"),
        &dir.path().join("snapshot_0001.json"),
    )
    .unwrap();
    assert_eq!(sidecar.endianness, "little");
    let grid = Arc::new(sidecar.grid.build::<f64>().unwrap());
    let state = FieldPair::new(u, v, grid).unwrap();
    let params = PhysicsParams::new(cfg.physics.kappa, cfg.physics.omega).unwrap();
    let report = functionals::evaluate_all(&state, &params).unwrap();

    // Find the CSV row at the snapshot time and compare the functionals.
    let text = fs::read_to_string(dir.path().join("timeseries.csv")).unwrap();
    let row: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|line| {
            line.split(',')
                .map(|s| s.parse::<f64>().unwrap())
                .collect::<Vec<f64>>()
        })
        .find(|cells| (cells[0] - sidecar.t).abs() < 1e-14)
        .expect("snapshot time present in CSV");
    let scale = report.mass.abs() + report.kinetic.abs() + 1.0;
    assert!((row[1] - report.mass).abs() <= 1e-12 * scale);
    assert!((row[2] - report.energy).abs() <= 1e-12 * scale);
    assert!((row[4] - report.pohozaev).abs() <= 1e-12 * scale);
    assert!((row[5] - report.kinetic).abs() <= 1e-12 * scale);
    assert!((row[6] - report.potential).abs() <= 1e-12 * scale);
}

#[test]
fn identical_configs_give_byte_identical_csv() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let cfg = tiny_run_config(dir_a.path());

    let (record_a, _) = cli_io::run_configured(&cfg, false).unwrap();
    cli_io::emit_timeseries(&record_a, dir_a.path()).unwrap();
    let (record_b, _) = cli_io::run_configured(&cfg, false).unwrap();
    cli_io::emit_timeseries(&record_b, dir_b.path()).unwrap();

    let a = fs::read(dir_a.path().join("timeseries.csv")).unwrap();
    let b = fs::read(dir_b.path().join("timeseries.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn sweep_writes_summary_and_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let config_text = format!(
        r#"
[ground_state]
n = 256
r_max = 20.0

[sweep]
kappas = [1.0]
omegas = [1.0, 2.0]

[output]
dir = "{}"
"#,
        dir.path().display()
    );
    let path = dir.path().join("sweep.toml");
    fs::write(&path, config_text).unwrap();
    let code = cli_io::run_command([
        "qnls",
        "sweep",
        "--config",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let summary = fs::read_to_string(dir.path().join("sweep_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(dir.path().join("kappa_1_omega_1/ground_state.json").exists());
    assert!(dir.path().join("kappa_1_omega_2/ground_state.json").exists());

    // mu scales as sqrt(omega) across the sweep outputs.
    let gs1 =
        cli_io::load_ground_state(&dir.path().join("kappa_1_omega_1/ground_state.json")).unwrap();
    let gs2 =
        cli_io::load_ground_state(&dir.path().join("kappa_1_omega_2/ground_state.json")).unwrap();
    let mu1 = ground_state::mu_omega(&gs1).unwrap();
    let mu2 = ground_state::mu_omega(&gs2).unwrap();
    assert!((mu2 - 2f64.sqrt() * mu1).abs() <= 1e-4 * mu2);
}

#[test]
fn scaled_ground_state_initial_data_certifies_blowup_side() {
    // The blow-up preset's initial data must sit below threshold with K < 0.
    let cfg = cli_io::experiment_preset("blowup-radial").unwrap();
    let grid = Arc::new(cfg.grid_spec().build::<f64>().unwrap());
    let params = cfg.physics().unwrap();
    let gs = ground_state::solve_ground_state(&grid, &params, &SolverOptions::default()).unwrap();
    assert!(gs.converged);
    let state = gs.scaled_pair(cfg.initial.factor);
    let report = functionals::evaluate_all(&state, &params).unwrap();
    let ratio = report.threshold_product / gs.report.threshold_product;
    assert!(report.pohozaev < 0.0);
    assert!(ratio < 1.0);
}

#[test]
fn config_dump_parses_back() {
    let cfg = cli_io::experiment_preset("galilean-1d").unwrap();
    let text = cli_io::dump_config(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dumped.toml");
    fs::write(&path, text).unwrap();
    let reloaded = cli_io::load_config(&path).unwrap();
    assert_eq!(cfg, reloaded);
}
