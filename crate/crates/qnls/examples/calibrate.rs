use num_complex::Complex;
use qnls::fields::{FieldPair, Grid, PhysicsParams};
use qnls::functionals;
use qnls::propagators::{self, EvolveOptions};
use std::sync::Arc;

type C = Complex<f64>;

fn main() {
    // Criterion 1 periodic: n=1024, dt=1e-3, t in [0,5], M/E/P drift <= 1e-8.
    let grid = Arc::new(Grid::<f64>::make_periodic(1024, 12.0).unwrap());
    let xi = 3.0 * std::f64::consts::PI / 12.0;
    for kappa in [0.5, 1.0] {
        for amp in [0.12, 0.08, 0.05] {
            let params = PhysicsParams::new(kappa, 1.0).unwrap();
            let u: Vec<C> = grid.nodes().iter().map(|&x| C::new(amp * (-x * x).exp(), 0.0)).collect();
            let v: Vec<C> = grid.nodes().iter().map(|&x| C::new(0.6 * amp * (-x * x / 2.0).exp(), 0.0)).collect();
            let plain = FieldPair::new(u, v, grid.clone()).unwrap();
            let state = propagators::galilean_boost(&plain, xi).unwrap();
            let r0 = functionals::evaluate_all(&state, &params).unwrap();
            let opts = EvolveOptions { dt: 1e-3, t_end: 5.0, sample_every: 5000, ..EvolveOptions::default() };
            let rec = propagators::evolve(&state, &params, &opts, |_, _, _| {}).unwrap();
            let r1 = rec.reports.last().unwrap();
            println!(
                "periodic kappa={kappa} amp={amp}: dM={:.2e} dE={:.2e} dP={:.2e} (N0={:.2e})",
                (r1.mass - r0.mass).abs() / r0.mass,
                (r1.energy - r0.energy).abs() / r0.energy.abs(),
                (r1.momentum - r0.momentum).abs() / r0.momentum.abs(),
                r0.potential,
            );
        }
    }

    // Criterion 1 radial: n=1024, R=30, t in [0,1], M/E drift <= 1e-7.
    let grid = Arc::new(Grid::<f64>::make_radial(1024, 30.0).unwrap());
    let params = PhysicsParams::new(1.0, 1.0).unwrap();
    for (amp, dt) in [(1.0, 5e-4), (0.5, 5e-4), (1.0, 2.5e-4)] {
        let u: Vec<C> = grid.nodes().iter().map(|&r| C::new(amp * (-r * r).exp(), 0.0)).collect();
        let v: Vec<C> = grid.nodes().iter().map(|&r| C::new(-0.5 * amp * (-r * r).exp(), 0.0)).collect();
        let state = FieldPair::new(u, v, grid.clone()).unwrap();
        let r0 = functionals::evaluate_all(&state, &params).unwrap();
        let opts = EvolveOptions { dt, t_end: 1.0, sample_every: 100000, ..EvolveOptions::default() };
        let t0 = std::time::Instant::now();
        let rec = propagators::evolve(&state, &params, &opts, |_, _, _| {}).unwrap();
        let r1 = rec.reports.last().unwrap();
        println!(
            "radial amp={amp} dt={dt}: dM={:.2e} dE={:.2e}  [{:.1?}]",
            (r1.mass - r0.mass).abs() / r0.mass,
            (r1.energy - r0.energy).abs() / r0.energy.abs(),
            t0.elapsed(),
        );
    }
}
