//! Trajectory-level analysis: dichotomy classification, Pohozaev-sign
//! tracking, virial-rate verification, Galilean-covariance residuals at and
//! off mass resonance, the center path X(t), and S-norm monitoring.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::fields::{FieldPair, GridKind, GridSpec, PhysicsParams};
use crate::functionals::{self, FunctionalReport};
use crate::propagators::{self, EvolveOptions};
use crate::{lit, Error, Real, Result};

/// Observed outcome of a finished run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Scattered,
    BlewUp,
    Undetermined,
}

/// Outcome predicted from the initial data alone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Predicted {
    Scatter,
    BlowUp,
    OutOfScope,
}

/// Run provenance carried by every trajectory record.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RunMeta {
    pub grid: GridSpec,
    pub kappa: f64,
    pub omega: f64,
    pub dt: f64,
    pub t_end: f64,
    pub absorber_on: bool,
    pub virial_radius: f64,
}

#[derive(Clone, Debug)]
pub struct Snapshot<T: Real> {
    pub t: T,
    pub u: Vec<Complex<T>>,
    pub v: Vec<Complex<T>>,
}

/// Time series of functional reports plus derived diagnostics for one run.
#[derive(Clone, Debug)]
pub struct TrajectoryRecord<T: Real> {
    pub meta: RunMeta,
    pub times: Vec<T>,
    pub reports: Vec<FunctionalReport<T>>,
    /// Running approximation of the space-time norm ‖(u,v)‖_{L⁶([0,t], L³)}.
    pub s_norm_cum: Vec<T>,
    /// Truncated virial at the configured radius.
    pub virial: Vec<T>,
    /// Cumulative mass removed by the absorber.
    pub absorbed_mass: Vec<T>,
    pub snapshots: Vec<Snapshot<T>>,
    pub verdict: Verdict,
    pub threshold_ratio: Option<T>,
    pub k_sign_initial: i8,
}

impl<T: Real> TrajectoryRecord<T> {
    pub fn new(meta: RunMeta) -> Self {
        TrajectoryRecord {
            meta,
            times: Vec::new(),
            reports: Vec::new(),
            s_norm_cum: Vec::new(),
            virial: Vec::new(),
            absorbed_mass: Vec::new(),
            snapshots: Vec::new(),
            verdict: Verdict::Undetermined,
            threshold_ratio: None,
            k_sign_initial: 0,
        }
    }

    pub(crate) fn push_sample(
        &mut self,
        t: T,
        report: FunctionalReport<T>,
        s_cum: T,
        virial: T,
        absorbed: T,
        snapshot: Option<FieldPair<T>>,
    ) {
        self.times.push(t);
        self.reports.push(report);
        self.s_norm_cum.push(s_cum);
        self.virial.push(virial);
        self.absorbed_mass.push(absorbed);
        if let Some(state) = snapshot {
            self.snapshots.push(Snapshot {
                t,
                u: state.u().to_vec(),
                v: state.v().to_vec(),
            });
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Momentum-driven center path X(t) from the sampled κ-weighted flux.
    pub fn center_path(&self) -> Result<Vec<T>> {
        let flux: Vec<T> = self.reports.iter().map(|r| r.flux_kappa).collect();
        let mass = self
            .reports
            .first()
            .map(|r| r.mass)
            .ok_or_else(|| Error::State("empty trajectory history".into()))?;
        functionals::center_quantity_x(&self.times, &flux, mass)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ClassifierOptions<T> {
    /// Scattering requires |N(t_end)| to fall below this fraction of |N(0)|.
    pub n_remnant_frac: T,
    /// ... and the kinetic form to move by less than this fraction of L(0)
    /// over the final portion of the run.
    pub l_stabilize_frac: T,
    /// Length of the "final portion", as a fraction of the run.
    pub tail_fraction: T,
    /// Saturation bound for the S-norm rise over the final portion.
    pub s_saturation_frac: T,
}

impl<T: Real> Default for ClassifierOptions<T> {
    fn default() -> Self {
        ClassifierOptions {
            n_remnant_frac: lit(0.05),
            l_stabilize_frac: lit(0.01),
            tail_fraction: lit(0.2),
            s_saturation_frac: lit(0.01),
        }
    }
}

/// Predicted-vs-observed verdict for one run.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Classification<T> {
    pub predicted: Predicted,
    pub observed: Verdict,
    pub agree: bool,
    pub threshold_ratio: T,
    pub k_sign_initial: i8,
}

fn tail_start_index<T: Real>(times: &[T], tail_fraction: T) -> usize {
    let t_end = *times.last().expect("nonempty");
    let cutoff = t_end * (T::one() - tail_fraction);
    times
        .iter()
        .position(|&t| t >= cutoff)
        .unwrap_or(times.len() - 1)
}

/// Classify a finished run against the dichotomy.
///
/// Observed `Scattered` means the potential-energy remnant fell below the
/// configured fraction and the kinetic form stabilized (measured against
/// L(0), which stays meaningful when the absorber has drained the solution).
/// The zero state is classified out of scope and counted as agreeing, on the
/// convention that zero scatters.
pub fn classify<T: Real>(
    record: &TrajectoryRecord<T>,
    opts: &ClassifierOptions<T>,
) -> Result<Classification<T>> {
    if record.len() < 2 {
        return Err(Error::State(
            "classification needs a completed run with at least two samples".into(),
        ));
    }
    let first = &record.reports[0];
    let last = record.reports.last().unwrap();
    let zero_data = first.mass == T::zero();

    let observed = if record.verdict == Verdict::BlewUp {
        Verdict::BlewUp
    } else {
        let n_ok = last.potential.abs() <= opts.n_remnant_frac * first.potential.abs();
        let tail = tail_start_index(&record.times, opts.tail_fraction);
        let l_ref = record.reports[tail].kinetic;
        let l_ok = (last.kinetic - l_ref).abs() <= opts.l_stabilize_frac * first.kinetic;
        if n_ok && l_ok {
            Verdict::Scattered
        } else {
            Verdict::Undetermined
        }
    };

    let predicted = if zero_data {
        Predicted::OutOfScope
    } else {
        let ratio = record
            .threshold_ratio
            .ok_or_else(|| Error::State("threshold ratio missing from record".into()))?;
        let k0 = first.pohozaev;
        if ratio < T::one() && k0 >= T::zero() {
            Predicted::Scatter
        } else if ratio < T::one() {
            Predicted::BlowUp
        } else {
            Predicted::OutOfScope
        }
    };

    let agree = matches!(
        (predicted, observed),
        (Predicted::Scatter, Verdict::Scattered) | (Predicted::BlowUp, Verdict::BlewUp)
    ) || (zero_data && observed == Verdict::Scattered);

    Ok(Classification {
        predicted,
        observed,
        agree,
        threshold_ratio: record.threshold_ratio.unwrap_or(T::zero()),
        k_sign_initial: record.k_sign_initial,
    })
}

/// Pohozaev-sign report along a below-threshold run.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct KSignReport<T> {
    pub all_positive: bool,
    pub min_pohozaev: T,
    /// Largest δ with K(t) ≥ min{(1/8)(μ_ω - I_ω(0)), δ L(t)} at every sample
    /// (infinite when the first branch covers every sample).
    pub delta_star: T,
    /// The fixed branch (1/8)(μ_ω - I_ω(0)).
    pub threshold_level: T,
}

/// Track the sign of K along a run started below the threshold with K(0) > 0.
/// The zero state passes vacuously.
pub fn k_sign_track<T: Real>(record: &TrajectoryRecord<T>, mu_omega: T) -> Result<KSignReport<T>> {
    if record.is_empty() {
        return Err(Error::State("empty trajectory history".into()));
    }
    let first = &record.reports[0];
    if first.mass == T::zero() {
        return Ok(KSignReport {
            all_positive: true,
            min_pohozaev: T::zero(),
            delta_star: T::infinity(),
            threshold_level: T::zero(),
        });
    }
    let ratio = record
        .threshold_ratio
        .ok_or_else(|| Error::State("threshold ratio missing from record".into()))?;
    if ratio >= T::one() || first.pohozaev <= T::zero() {
        return Err(Error::InvalidParameter(
            "K-sign tracking expects a below-threshold run with K(0) > 0".into(),
        ));
    }
    let level = lit::<T>(0.125) * (mu_omega - first.i_omega);
    let mut min_k = T::infinity();
    let mut delta = T::infinity();
    let mut all_positive = true;
    for r in &record.reports {
        min_k = min_k.min(r.pohozaev);
        if r.pohozaev <= T::zero() {
            all_positive = false;
        }
        if r.pohozaev < level && r.kinetic > T::zero() {
            delta = delta.min(r.pohozaev / r.kinetic);
        }
    }
    Ok(KSignReport {
        all_positive,
        min_pohozaev: min_k,
        delta_star: delta,
        threshold_level: level,
    })
}

/// Maximum relative defect of the virial rate `dV/dt = 4K` over interior
/// samples (central differences), for radial zero-momentum runs with the
/// absorber off and the solution supported inside the cutoff.
pub fn virial_rate_check<T: Real>(record: &TrajectoryRecord<T>) -> Result<T> {
    if record.meta.absorber_on {
        return Err(Error::InvalidParameter(
            "the virial identity fails under absorber dissipation".into(),
        ));
    }
    if record.len() < 3 {
        return Err(Error::State("need at least three samples".into()));
    }
    let four = lit::<T>(4.0);
    let scale = record
        .reports
        .iter()
        .map(|r| (four * r.pohozaev).abs())
        .fold(T::zero(), T::max)
        + record.reports[0].kinetic;
    let eps = lit::<T>(1e-12) * scale;
    let mut worst = T::zero();
    for i in 1..record.len() - 1 {
        let dv = (record.virial[i + 1] - record.virial[i - 1])
            / (record.times[i + 1] - record.times[i - 1]);
        let target = four * record.reports[i].pohozaev;
        let defect = (dv - target).abs() / (target.abs() + eps);
        worst = worst.max(defect);
    }
    Ok(worst)
}

/// Sup-norm covariance residual between "boost then evolve" and
/// "evolve then boost-and-translate", per the Galilean transformation
/// `(e^{ixξ} e^{-itξ²} u(t, x-2tξ), e^{2ixξ} e^{-2itξ²} v(t, x-2tξ))`.
/// Vanishes (to splitting round-off) exactly at κ = 1/2.
pub fn mass_resonance_check<T: Real>(
    data: &FieldPair<T>,
    xi: T,
    params: &PhysicsParams<T>,
    t_end: T,
    dt: T,
) -> Result<T> {
    let grid = data.grid().clone();
    if grid.kind() != GridKind::Periodic1D {
        return Err(Error::InvalidParameter(
            "the covariance check runs on the periodic grid".into(),
        ));
    }
    let opts = EvolveOptions {
        dt,
        t_end,
        ..EvolveOptions::default()
    };
    opts.validate()?;
    let steps = (t_end / dt).round().to_usize().unwrap_or(0).max(1);
    let t_total = dt * lit::<T>(steps as f64);

    let run = |initial: &FieldPair<T>| -> Result<FieldPair<T>> {
        let mut s = initial.clone();
        for _ in 0..steps {
            let r = propagators::strang_step(&s, dt, params, &opts)?;
            if r.blowup_flag {
                return Err(Error::State("covariance run blew up".into()));
            }
            s = r.state;
        }
        Ok(s)
    };

    let boosted_then_evolved = run(&propagators::galilean_boost(data, xi)?)?;
    let evolved = run(data)?;

    // Reference: translate by 2tξ (spectrally exact), modulate, phase.
    let two = lit::<T>(2.0);
    let shift = two * t_total * xi;
    let u_shifted = grid.translate(evolved.u(), shift)?;
    let v_shifted = grid.translate(evolved.v(), shift)?;
    let phase_u = Complex::from_polar(T::one(), -t_total * xi * xi);
    let phase_v = Complex::from_polar(T::one(), -two * t_total * xi * xi);
    let mut worst = T::zero();
    for (j, &x) in grid.nodes().iter().enumerate() {
        let ref_u = u_shifted[j] * Complex::from_polar(T::one(), x * xi) * phase_u;
        let ref_v = v_shifted[j] * Complex::from_polar(T::one(), two * x * xi) * phase_v;
        worst = worst.max((boosted_then_evolved.u()[j] - ref_u).norm());
        worst = worst.max((boosted_then_evolved.v()[j] - ref_v).norm());
    }
    Ok(worst)
}

/// Maximum relative defect of `X(t) = 2 P t / M` over the run. At κ = 1/2
/// the defect vanishes up to momentum drift; off resonance it is reported
/// but carries no pass/fail meaning.
pub fn x_of_t_check<T: Real>(record: &TrajectoryRecord<T>) -> Result<T> {
    if record.is_empty() {
        return Err(Error::State("empty trajectory history".into()));
    }
    let xs = record.center_path()?;
    let m = record.reports[0].mass;
    if m == T::zero() {
        return Ok(T::zero());
    }
    let p0 = record.reports[0].momentum;
    let two = lit::<T>(2.0);
    let scale = record
        .times
        .iter()
        .map(|&t| (two * p0 * t / m).abs())
        .fold(T::zero(), T::max);
    let x_scale = xs.iter().map(|&x| x.abs()).fold(T::zero(), T::max);
    // Momentum-free run: both paths sit at round-off level and the defect
    // is zero by convention.
    let tiny = lit::<T>(1e-10) * lit::<T>(record.meta.grid.extent.abs().max(1.0));
    if scale <= tiny && x_scale <= tiny {
        return Ok(T::zero());
    }
    let eps = lit::<T>(1e-12) * (scale + T::one());
    let mut worst = T::zero();
    for (i, &t) in record.times.iter().enumerate() {
        let reference = two * p0 * t / m;
        let defect = (xs[i] - reference).abs() / (reference.abs() + eps);
        worst = worst.max(defect);
    }
    Ok(worst)
}

/// The running L⁶-in-time, L³-in-space norm series.
pub fn s_norm_monitor<T: Real>(record: &TrajectoryRecord<T>) -> &[T] {
    &record.s_norm_cum
}

/// Relative rise of the S-norm over the final portion of the run.
pub fn s_norm_saturation_rise<T: Real>(record: &TrajectoryRecord<T>, tail_fraction: T) -> Result<T> {
    if record.len() < 2 {
        return Err(Error::State("need at least two samples".into()));
    }
    let tail = tail_start_index(&record.times, tail_fraction);
    let s_end = *record.s_norm_cum.last().unwrap();
    if s_end == T::zero() {
        return Ok(T::zero());
    }
    Ok((s_end - record.s_norm_cum[tail]) / s_end)
}
