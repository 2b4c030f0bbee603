//! Scalar functionals of the system state.
//!
//! With `L = ‖∇u‖² + (κ/2)‖∇v‖²` and `N = Re ∫ u² v̄`, the report satisfies
//! the identities `E = L + N`, `K = L + (5/4) N`, `I_ω = E/2 + (ω/2) M`, and
//! `J_ω = L/10 + (ω/2) M = I_ω - (2/5) K`. The Pohozaev functional `K`
//! vanishes on ground states and its initial sign decides the dichotomy
//! below the threshold product `E·M`.

use num_complex::Complex;

use crate::fields::{FieldPair, GridKind, PhysicsParams};
use crate::ground_state::GroundState;
use crate::{lit, Error, Real, Result};

/// Every scalar functional evaluated on one state.
///
/// `momentum` is the scalar momentum on the periodic grid and the radial
/// flux `Im ∫ (ū ∂_r u + (1/2) v̄ ∂_r v)` on the radial grid (zero for
/// real-phase radial data). `flux_kappa` is the κ-weighted variant
/// `Im ∫ (ū ∇u + κ v̄ ∇v)` driving the center path X(t); the two coincide
/// at mass resonance.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FunctionalReport<T> {
    pub mass: T,
    pub kinetic: T,
    pub potential: T,
    pub energy: T,
    pub pohozaev: T,
    pub momentum: T,
    pub flux_kappa: T,
    pub i_omega: T,
    pub j_omega: T,
    pub threshold_product: T,
}

impl<T: Real> FunctionalReport<T> {
    pub fn zero() -> Self {
        FunctionalReport {
            mass: T::zero(),
            kinetic: T::zero(),
            potential: T::zero(),
            energy: T::zero(),
            pohozaev: T::zero(),
            momentum: T::zero(),
            flux_kappa: T::zero(),
            i_omega: T::zero(),
            j_omega: T::zero(),
            threshold_product: T::zero(),
        }
    }
}

/// Evaluate every functional on `state`.
pub fn evaluate_all<T: Real>(
    state: &FieldPair<T>,
    params: &PhysicsParams<T>,
) -> Result<FunctionalReport<T>> {
    let grid = state.grid();
    let u = state.u();
    let v = state.v();
    let half = lit::<T>(0.5);

    let mass = grid.inner(u, u)?.re + grid.inner(v, v)?.re;
    let kinetic = grid.gradient_norm_sq(u)? + half * params.kappa * grid.gradient_norm_sq(v)?;

    // N = Re ∫ u² v̄ = Re ⟨v, u²⟩ in the weighted pairing.
    let u_sq: Vec<Complex<T>> = u.iter().map(|z| z * z).collect();
    let potential = grid.inner(v, &u_sq)?.re;

    let energy = kinetic + potential;
    let pohozaev = kinetic + lit::<T>(1.25) * potential;

    let du = grid.gradient(u)?;
    let dv = grid.gradient(v)?;
    let flux_u = grid.inner(u, &du)?.im;
    let flux_v = grid.inner(v, &dv)?.im;
    let momentum = flux_u + half * flux_v;
    let flux_kappa = flux_u + params.kappa * flux_v;

    let i_omega = half * energy + half * params.omega * mass;
    let j_omega = i_omega - lit::<T>(0.4) * pohozaev;

    Ok(FunctionalReport {
        mass,
        kinetic,
        potential,
        energy,
        pohozaev,
        momentum,
        flux_kappa,
        i_omega,
        j_omega,
        threshold_product: energy * mass,
    })
}

/// Ratio of the state's threshold product `E·M` to the ground state's.
/// The denominator is ω-invariant, so any converged solve works.
pub fn threshold_ratio<T: Real>(
    state: &FieldPair<T>,
    params: &PhysicsParams<T>,
    gs: &GroundState<T>,
) -> Result<T> {
    if !gs.converged {
        return Err(Error::State(
            "threshold ratio needs a converged ground state".into(),
        ));
    }
    let report = evaluate_all(state, params)?;
    Ok(report.threshold_product / gs.report.threshold_product)
}

/// Smooth radial cutoff: `χ_R(r) = χ₁(r/R)` with `χ₁ = 1` on `[0,1]`,
/// `0` on `[2,∞)`, and the quintic smoothstep in between (max slope 1.875).
pub fn cutoff_chi<T: Real>(r: T, radius: T) -> T {
    let q = r / radius;
    if q <= T::one() {
        T::one()
    } else if q >= lit::<T>(2.0) {
        T::zero()
    } else {
        let t = q - T::one();
        let t3 = t * t * t;
        T::one() - t3 * (lit::<T>(6.0) * t * t - lit::<T>(15.0) * t + lit::<T>(10.0))
    }
}

/// Truncated virial functional
/// `2 Im ∫ χ_R(|x-c|) (x-c)·(ū ∇u + (1/2) v̄ ∇v)`.
///
/// On the radial grid the center must be the origin.
pub fn virial_truncated<T: Real>(state: &FieldPair<T>, center: T, radius: T) -> Result<T> {
    if !radius.is_finite() || radius <= T::zero() {
        return Err(Error::InvalidParameter(format!(
            "virial radius must be positive (got {radius})"
        )));
    }
    let grid = state.grid();
    if grid.kind() == GridKind::Radial5D && center != T::zero() {
        return Err(Error::InvalidParameter(
            "virial center must be the origin on the radial grid".into(),
        ));
    }
    let du = grid.gradient(state.u())?;
    let dv = grid.gradient(state.v())?;
    let half = lit::<T>(0.5);
    let mut acc = T::zero();
    for (j, (&x, &w)) in grid.nodes().iter().zip(grid.weights()).enumerate() {
        let d = x - center;
        let chi = cutoff_chi(d.abs(), radius);
        if chi == T::zero() {
            continue;
        }
        let flux =
            (state.u()[j].conj() * du[j]).im + half * (state.v()[j].conj() * dv[j]).im;
        acc += w * chi * d * flux;
    }
    Ok(lit::<T>(2.0) * acc)
}

/// Momentum-driven center path: cumulative trapezoid of `2 P̃(s) / M`.
pub fn center_quantity_x<T: Real>(times: &[T], flux_kappa: &[T], mass: T) -> Result<Vec<T>> {
    if times.is_empty() {
        return Err(Error::State("empty trajectory history".into()));
    }
    if times.len() != flux_kappa.len() {
        return Err(Error::Shape {
            expected: times.len(),
            got: flux_kappa.len(),
        });
    }
    if mass <= T::zero() {
        // Zero state carries no center information.
        return Ok(vec![T::zero(); times.len()]);
    }
    let half = lit::<T>(0.5);
    let mut xs = Vec::with_capacity(times.len());
    let mut acc = T::zero();
    xs.push(T::zero());
    for i in 1..times.len() {
        let dt = times[i] - times[i - 1];
        acc += dt * half * (flux_kappa[i] + flux_kappa[i - 1]);
        xs.push(lit::<T>(2.0) * acc / mass);
    }
    Ok(xs)
}
