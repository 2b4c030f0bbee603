//! Time evolution: exact linear flows, the pointwise nonlinear substep,
//! Strang splitting with an optional absorbing layer, and the adaptive
//! trajectory driver.
//!
//! The linear flow applies `e^{itλ_m}` to u-coefficients and `e^{iκtλ_m}` to
//! v-coefficients in the Laplacian eigenbasis and is exactly unitary. The
//! nonlinear substep advances the pointwise system `u' = -i v ū, v' = -i u²`
//! by classical RK4; the pointwise quantity `|u|² + |v|²` is a first integral
//! of that system, so mass is conserved to the integrator's order per step.
//!
//! The absorbing layer multiplies both components by `exp(-dt σ(x))` each
//! step, with σ a smooth ramp from zero at `absorber_start_fraction · extent`
//! to `absorber_strength` at the boundary; the removed mass is tracked.

use num_complex::Complex;

use crate::diagnostics::{RunMeta, TrajectoryRecord, Verdict};
use crate::fields::{FieldPair, Grid, GridKind, PhysicsParams};
use crate::functionals::{self, FunctionalReport};
use crate::{lit, Error, Real, Result};

#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct EvolveOptions<T> {
    pub dt: T,
    pub t_end: T,
    /// Halve dt (down to `dt_min`) when the kinetic form grows more than 10%
    /// in one step.
    pub adapt: bool,
    pub dt_min: T,
    pub absorber_strength: T,
    pub absorber_start_fraction: T,
    /// Emit a functional sample every this many steps.
    pub sample_every: usize,
    /// Retain a field snapshot every this many samples (0 = never).
    pub snapshot_every: usize,
    /// Cutoff radius for the monitored virial series; defaults to half the
    /// grid extent.
    pub virial_radius: Option<T>,
}

impl<T: Real> Default for EvolveOptions<T> {
    fn default() -> Self {
        EvolveOptions {
            dt: lit(1e-3),
            t_end: T::one(),
            adapt: false,
            dt_min: lit(1e-6),
            absorber_strength: T::zero(),
            absorber_start_fraction: lit(0.7),
            sample_every: 20,
            snapshot_every: 0,
            virial_radius: None,
        }
    }
}

impl<T: Real> EvolveOptions<T> {
    pub fn validate(&self) -> Result<()> {
        if !self.dt.is_finite() || self.dt <= T::zero() {
            return Err(Error::InvalidParameter(format!("dt must be positive (got {})", self.dt)));
        }
        if !self.t_end.is_finite() || self.t_end <= T::zero() {
            return Err(Error::InvalidParameter(format!(
                "t_end must be positive (got {})",
                self.t_end
            )));
        }
        if !self.dt_min.is_finite() || self.dt_min <= T::zero() || self.dt_min > self.dt {
            return Err(Error::InvalidParameter(format!(
                "dt_min must satisfy 0 < dt_min <= dt (got {})",
                self.dt_min
            )));
        }
        if self.absorber_strength < T::zero() || !self.absorber_strength.is_finite() {
            return Err(Error::InvalidParameter(
                "absorber_strength must be finite and nonnegative".into(),
            ));
        }
        if self.absorber_start_fraction <= T::zero() || self.absorber_start_fraction >= T::one() {
            return Err(Error::InvalidParameter(
                "absorber_start_fraction must lie in (0, 1)".into(),
            ));
        }
        if self.sample_every == 0 {
            return Err(Error::InvalidParameter("sample_every must be >= 1".into()));
        }
        Ok(())
    }

    pub fn absorber_on(&self) -> bool {
        self.absorber_strength > T::zero()
    }
}

/// Outcome of a single splitting step.
#[derive(Clone, Debug)]
pub struct StepResult<T: Real> {
    pub state: FieldPair<T>,
    pub t: T,
    pub dt_used: T,
    pub blowup_flag: bool,
    /// Mass removed by the absorber during this step.
    pub absorbed_mass: T,
}

/// Free propagation `U_κ(t) = (e^{itΔ}, e^{iκtΔ})`, exact in the eigenbasis.
pub fn linear_flow<T: Real>(
    state: &FieldPair<T>,
    t: T,
    params: &PhysicsParams<T>,
) -> Result<FieldPair<T>> {
    let grid = state.grid();
    let lam = grid.eigenvalues();
    let mut cu = grid.to_spectral(state.u())?;
    let mut cv = grid.to_spectral(state.v())?;
    for m in 0..lam.len() {
        cu[m] = cu[m] * Complex::from_polar(T::one(), t * lam[m]);
        cv[m] = cv[m] * Complex::from_polar(T::one(), params.kappa * t * lam[m]);
    }
    FieldPair::new(grid.from_spectral(&cu)?, grid.from_spectral(&cv)?, grid.clone())
}

fn nonlinear_rhs<T: Real>(
    u: &[Complex<T>],
    v: &[Complex<T>],
) -> (Vec<Complex<T>>, Vec<Complex<T>>) {
    let minus_i = Complex::new(T::zero(), -T::one());
    let fu = u
        .iter()
        .zip(v)
        .map(|(a, b)| minus_i * *b * a.conj())
        .collect();
    let fv = u.iter().map(|a| minus_i * a * a).collect();
    (fu, fv)
}

/// Advance the pointwise system `u' = -i v ū, v' = -i u²` by `dt` (RK4).
/// Non-finite output is reported as a blow-up signal.
pub fn nonlinear_substep<T: Real>(state: &FieldPair<T>, dt: T) -> Result<FieldPair<T>> {
    if !dt.is_finite() {
        return Err(Error::InvalidParameter("dt must be finite".into()));
    }
    let grid = state.grid().clone();
    let n = grid.len();
    let u0 = state.u();
    let v0 = state.v();

    let half = lit::<T>(0.5);
    let sixth = T::one() / lit::<T>(6.0);

    let (k1u, k1v) = nonlinear_rhs(u0, v0);
    let stage = |ku: &[Complex<T>], kv: &[Complex<T>], c: T| {
        let su: Vec<Complex<T>> = (0..n).map(|j| u0[j] + ku[j] * (c * dt)).collect();
        let sv: Vec<Complex<T>> = (0..n).map(|j| v0[j] + kv[j] * (c * dt)).collect();
        nonlinear_rhs(&su, &sv)
    };
    let (k2u, k2v) = stage(&k1u, &k1v, half);
    let (k3u, k3v) = stage(&k2u, &k2v, half);
    let (k4u, k4v) = stage(&k3u, &k3v, T::one());

    let two = lit::<T>(2.0);
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for j in 0..n {
        u.push(u0[j] + (k1u[j] + k2u[j] * two + k3u[j] * two + k4u[j]) * (dt * sixth));
        v.push(v0[j] + (k1v[j] + k2v[j] * two + k3v[j] * two + k4v[j]) * (dt * sixth));
    }
    let out = FieldPair::new(u, v, grid)?;
    if !out.is_finite() {
        return Err(Error::State("nonlinear substep produced non-finite values".into()));
    }
    Ok(out)
}

/// Absorber profile σ(x) at the grid nodes, or `None` when disabled.
fn absorber_sigma<T: Real>(grid: &Grid<T>, opts: &EvolveOptions<T>) -> Option<Vec<T>> {
    if !opts.absorber_on() {
        return None;
    }
    let start = opts.absorber_start_fraction * grid.extent();
    let span = grid.extent() - start;
    let ramp = |t: T| -> T {
        let t = t.max(T::zero()).min(T::one());
        let t3 = t * t * t;
        t3 * (lit::<T>(6.0) * t * t - lit::<T>(15.0) * t + lit::<T>(10.0))
    };
    Some(
        grid.nodes()
            .iter()
            .map(|&x| {
                let d = match grid.kind() {
                    GridKind::Radial5D => x,
                    GridKind::Periodic1D => x.abs(),
                };
                opts.absorber_strength * ramp((d - start) / span)
            })
            .collect(),
    )
}

/// One Strang step: half linear flow, full nonlinear substep, half linear
/// flow, then the absorber mask. On a non-finite intermediate the returned
/// state is frozen at the last finite value with `blowup_flag` set.
pub fn strang_step<T: Real>(
    state: &FieldPair<T>,
    dt: T,
    params: &PhysicsParams<T>,
    opts: &EvolveOptions<T>,
) -> Result<StepResult<T>> {
    opts.validate()?;
    let sigma = absorber_sigma(state.grid().as_ref(), opts);
    Ok(strang_step_inner(state, T::zero(), dt, params, sigma.as_deref()))
}

fn strang_step_inner<T: Real>(
    state: &FieldPair<T>,
    t: T,
    dt: T,
    params: &PhysicsParams<T>,
    sigma: Option<&[T]>,
) -> StepResult<T> {
    let half = lit::<T>(0.5);
    let frozen = |s: &FieldPair<T>| StepResult {
        state: s.clone(),
        t,
        dt_used: dt,
        blowup_flag: true,
        absorbed_mass: T::zero(),
    };

    let s1 = match linear_flow(state, half * dt, params) {
        Ok(s) if s.is_finite() => s,
        _ => return frozen(state),
    };
    let s2 = match nonlinear_substep(&s1, dt) {
        Ok(s) => s,
        Err(_) => return frozen(&s1),
    };
    let mut s3 = match linear_flow(&s2, half * dt, params) {
        Ok(s) if s.is_finite() => s,
        _ => return frozen(&s2),
    };

    let mut absorbed = T::zero();
    if let Some(sigma) = sigma {
        let grid = s3.grid().clone();
        let mass_before = grid.inner(s3.u(), s3.u()).unwrap().re
            + grid.inner(s3.v(), s3.v()).unwrap().re;
        let (mut u, mut v, grid) = s3.into_parts();
        for j in 0..grid.len() {
            let m = (-dt * sigma[j]).exp();
            u[j] = u[j] * m;
            v[j] = v[j] * m;
        }
        s3 = FieldPair::new(u, v, grid).expect("lengths preserved");
        let grid = s3.grid();
        let mass_after = grid.inner(s3.u(), s3.u()).unwrap().re
            + grid.inner(s3.v(), s3.v()).unwrap().re;
        absorbed = (mass_before - mass_after).max(T::zero());
    }

    StepResult {
        state: s3,
        t: t + dt,
        dt_used: dt,
        blowup_flag: false,
        absorbed_mass: absorbed,
    }
}

/// Galilean boost at time zero on the periodic grid:
/// `(u, v) -> (e^{ixξ} u, e^{2ixξ} v)`. ξ must be a grid wavenumber.
pub fn galilean_boost<T: Real>(state: &FieldPair<T>, xi: T) -> Result<FieldPair<T>> {
    let grid = state.grid();
    if grid.kind() != GridKind::Periodic1D {
        return Err(Error::InvalidParameter(
            "the Galilean boost is defined on the periodic grid".into(),
        ));
    }
    let base = T::PI() / grid.extent();
    let ratio = xi / base;
    if (ratio - ratio.round()).abs() > lit::<T>(1e-8) {
        return Err(Error::InvalidParameter(format!(
            "boost wavenumber must be an integer multiple of pi / half_length (xi = {xi})"
        )));
    }
    let two = lit::<T>(2.0);
    let u = state
        .u()
        .iter()
        .zip(grid.nodes())
        .map(|(z, &x)| z * Complex::from_polar(T::one(), x * xi))
        .collect();
    let v = state
        .v()
        .iter()
        .zip(grid.nodes())
        .map(|(z, &x)| z * Complex::from_polar(T::one(), two * x * xi))
        .collect();
    FieldPair::new(u, v, grid.clone())
}

/// L³ norm of one component under the grid quadrature.
fn l3_norm<T: Real>(grid: &Grid<T>, f: &[Complex<T>]) -> T {
    let mut acc = T::zero();
    for (w, z) in grid.weights().iter().zip(f) {
        let m = z.norm();
        acc += *w * m * m * m;
    }
    acc.powf(T::one() / lit::<T>(3.0))
}

/// Advance `state` to `t_end`, sampling functionals along the way.
///
/// The sink is invoked at every sample with `(t, report, optional snapshot)`
/// and must not mutate the state. Blow-up terminates the run with a verdict
/// flag, not an error. The blow-up proxy fires when dt has been driven to
/// `dt_min`, the kinetic form exceeds 100× its initial value, and its
/// doubling time shrank across three consecutive samples; a non-finite step
/// fires it immediately.
pub fn evolve<T: Real>(
    state: &FieldPair<T>,
    params: &PhysicsParams<T>,
    opts: &EvolveOptions<T>,
    mut sink: impl FnMut(T, &FunctionalReport<T>, Option<&FieldPair<T>>),
) -> Result<TrajectoryRecord<T>> {
    opts.validate()?;
    let grid = state.grid().clone();
    let sigma = absorber_sigma(grid.as_ref(), opts);
    let virial_radius = opts
        .virial_radius
        .unwrap_or_else(|| grid.extent() * lit::<T>(0.5));

    let mut record = TrajectoryRecord::new(RunMeta {
        grid: grid.spec(),
        kappa: params.kappa.to_f64().unwrap_or(f64::NAN),
        omega: params.omega.to_f64().unwrap_or(f64::NAN),
        dt: opts.dt.to_f64().unwrap_or(f64::NAN),
        t_end: opts.t_end.to_f64().unwrap_or(f64::NAN),
        absorber_on: opts.absorber_on(),
        virial_radius: virial_radius.to_f64().unwrap_or(f64::NAN),
    });

    let mut current = state.clone();
    let mut t = T::zero();
    let mut dt = opts.dt;
    let mut absorbed_total = T::zero();
    let mut blew_up = false;

    let initial_report = functionals::evaluate_all(&current, params)?;
    let l0 = initial_report.kinetic;
    record.k_sign_initial = sign_of(initial_report.pohozaev);

    // (t, L, l3 sum) trackers for the blow-up proxy and the S-norm.
    let mut sampled: Vec<(T, T)> = Vec::new();
    let mut last_l3: Option<(T, T)> = None;
    let mut s_pow6 = T::zero();
    let mut samples_taken = 0usize;

    let push_sample = |rec: &mut TrajectoryRecord<T>,
                           state: &FieldPair<T>,
                           t: T,
                           absorbed: T,
                           sampled: &mut Vec<(T, T)>,
                           last_l3: &mut Option<(T, T)>,
                           s_pow6: &mut T,
                           samples_taken: &mut usize,
                           sink: &mut dyn FnMut(T, &FunctionalReport<T>, Option<&FieldPair<T>>)|
     -> Result<()> {
        let report = functionals::evaluate_all(state, params)?;
        let l3 = l3_norm(state.grid(), state.u()) + l3_norm(state.grid(), state.v());
        if let Some((pt, pl3)) = *last_l3 {
            let six = 6;
            *s_pow6 += (t - pt) * lit::<T>(0.5) * (l3.powi(six) + pl3.powi(six));
        }
        *last_l3 = Some((t, l3));
        let s_cum = s_pow6.max(T::zero()).powf(T::one() / lit::<T>(6.0));
        let virial = functionals::virial_truncated(state, T::zero(), virial_radius)?;

        *samples_taken += 1;
        let snapshot = opts.snapshot_every > 0 && (*samples_taken - 1) % opts.snapshot_every == 0;
        sink(t, &report, snapshot.then_some(state));
        rec.push_sample(t, report, s_cum, virial, absorbed, snapshot.then(|| state.clone()));
        sampled.push((t, report.kinetic));
        Ok(())
    };

    push_sample(
        &mut record,
        &current,
        t,
        absorbed_total,
        &mut sampled,
        &mut last_l3,
        &mut s_pow6,
        &mut samples_taken,
        &mut sink,
    )?;

    let tiny = lit::<T>(1e-12);
    let mut step_index = 0usize;
    while t < opts.t_end * (T::one() - tiny) && !blew_up {
        let dt_step = dt.min(opts.t_end - t);
        let before_l = if opts.adapt {
            grid.gradient_norm_sq(current.u())?
                + lit::<T>(0.5) * params.kappa * grid.gradient_norm_sq(current.v())?
        } else {
            T::zero()
        };

        let mut result = strang_step_inner(&current, t, dt_step, params, sigma.as_deref());
        if opts.adapt && !result.blowup_flag {
            // Reject and retry with a halved step while the kinetic form
            // grows more than 10% per step and dt can still shrink.
            loop {
                let after_l = grid.gradient_norm_sq(result.state.u())?
                    + lit::<T>(0.5) * params.kappa * grid.gradient_norm_sq(result.state.v())?;
                let growing = after_l > before_l * lit::<T>(1.1) && before_l > T::zero();
                if !growing || dt <= opts.dt_min {
                    break;
                }
                dt = (dt * lit::<T>(0.5)).max(opts.dt_min);
                let retry_dt = dt.min(opts.t_end - t);
                result = strang_step_inner(&current, t, retry_dt, params, sigma.as_deref());
                if result.blowup_flag {
                    break;
                }
            }
        }

        if result.blowup_flag {
            blew_up = true;
            current = result.state;
            t = result.t;
        } else {
            current = result.state;
            t = result.t;
            absorbed_total += result.absorbed_mass;
        }
        step_index += 1;

        let due = step_index % opts.sample_every == 0;
        let finished = t >= opts.t_end * (T::one() - tiny);
        if due || finished || blew_up {
            push_sample(
                &mut record,
                &current,
                t,
                absorbed_total,
                &mut sampled,
                &mut last_l3,
                &mut s_pow6,
                &mut samples_taken,
                &mut sink,
            )?;
            if !blew_up && proxy_fired(&sampled, l0, dt, opts.dt_min) {
                blew_up = true;
            }
        }
    }

    record.verdict = if blew_up { Verdict::BlewUp } else { Verdict::Undetermined };
    Ok(record)
}

fn sign_of<T: Real>(x: T) -> i8 {
    if x > T::zero() {
        1
    } else if x < T::zero() {
        -1
    } else {
        0
    }
}

/// Blow-up proxy on the sampled kinetic series.
fn proxy_fired<T: Real>(sampled: &[(T, T)], l0: T, dt: T, dt_min: T) -> bool {
    if dt > dt_min * lit::<T>(1.000001) {
        return false;
    }
    let n = sampled.len();
    if n < 4 || l0 <= T::zero() {
        return false;
    }
    let (_, l_now) = sampled[n - 1];
    if l_now <= l0 * lit::<T>(100.0) {
        return false;
    }
    // Doubling time from local growth rates over the last three intervals.
    let mut taus = Vec::with_capacity(3);
    for i in (n - 3)..n {
        let (t0, l0s) = sampled[i - 1];
        let (t1, l1s) = sampled[i];
        if l1s <= l0s || t1 <= t0 {
            return false;
        }
        let rate = (l1s / l0s).ln() / (t1 - t0);
        taus.push(lit::<T>(std::f64::consts::LN_2) / rate);
    }
    taus[0] > taus[1] && taus[1] > taus[2]
}
