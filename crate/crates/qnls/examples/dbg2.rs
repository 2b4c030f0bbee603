use qnls::fields::{Grid, PhysicsParams};
use qnls::functionals;
use qnls::ground_state::{self, SolverOptions};
use qnls::propagators::{self, EvolveOptions};
use std::sync::Arc;

fn main() {
    // Residual floors after the pairwise-summation change.
    for (kappa, n, r) in [(0.5, 512, 30.0), (1.0, 512, 30.0), (2.0, 512, 30.0),
                          (0.5, 768, 40.0), (1.0, 768, 40.0), (2.0, 768, 40.0),
                          (1.0, 640, 20.0)] {
        let grid = Arc::new(Grid::<f64>::make_radial(n, r).unwrap());
        let params = PhysicsParams::new(kappa, 1.0).unwrap();
        let t0 = std::time::Instant::now();
        let gs = ground_state::solve_ground_state(&grid, &params, &SolverOptions::default()).unwrap();
        println!(
            "{n}/{r} kappa={kappa}: converged={} iters={} residual={:.3e} K/L={:.3e} [{:.1?}]",
            gs.converged, gs.iterations, gs.residual,
            gs.report.pohozaev / gs.report.kinetic, t0.elapsed()
        );
    }

    // Blow-up preset dynamics at n=640, R=20, dt_min=1e-4.
    let grid = Arc::new(Grid::<f64>::make_radial(640, 20.0).unwrap());
    let params = PhysicsParams::new(1.0, 1.0).unwrap();
    let gs = ground_state::solve_ground_state(&grid, &params, &SolverOptions::default()).unwrap();
    let state = gs.scaled_pair(1.3);
    let r0 = functionals::evaluate_all(&state, &params).unwrap();
    let opts = EvolveOptions {
        dt: 2e-4, t_end: 1.0, adapt: true, dt_min: 1e-4,
        sample_every: 5, ..EvolveOptions::default()
    };
    let t0 = std::time::Instant::now();
    let rec = propagators::evolve(&state, &params, &opts, |_, _, _| {}).unwrap();
    let lmax = rec.reports.iter().map(|r| r.kinetic / r0.kinetic).fold(0.0f64, f64::max);
    println!(
        "blowup 640/20: verdict={:?} t_final={:.4} samples={} max L/L0={:.2} [{:.1?}]",
        rec.verdict, rec.times.last().unwrap(), rec.len(), lmax, t0.elapsed()
    );
    let n = rec.len();
    for i in (n.saturating_sub(6))..n {
        println!("   t={:.5} L/L0={:.3e}", rec.times[i], rec.reports[i].kinetic / r0.kinetic);
    }
}
