//! Energies and weighted norms.
//!
//! All integrals are rectangle-rule quadratures on the periodic grid;
//! derivatives are spectral.

use thiserror::Error;

use crate::potentials::Potential;
use crate::propagator::Trajectory;
use crate::scalar::Real;
use crate::spectral::{SpectralError, WaveField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormError {
    #[error("V must be nonnegative for V^(s/2) to be defined")]
    SignRequired,
    #[error("order s must be >= 0, got {0}")]
    NegativeOrder(f64),
    #[error("dispersive ratio needs a linear trajectory (lambda = 0)")]
    NonlinearTrajectory,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParts<T> {
    pub kinetic: T,
    pub potential: T,
    pub nonlinear: T,
    pub total: T,
}

/// `∫ V|u|²`.
pub fn potential_energy<T: Real>(u: &WaveField<T>, p: &Potential<T>) -> T {
    weighted_mass(u, |x| p.value(x))
}

/// `λ/(σ+1) ∫ |u|^{2σ+2}` with `0^{2σ} = 0`.
pub fn nonlinear_energy<T: Real>(u: &WaveField<T>, lambda: T, sigma: T) -> T {
    if lambda == T::zero() {
        return T::zero();
    }
    let s: T = u
        .values()
        .iter()
        .map(|z| {
            let m = z.norm_sqr();
            if m > T::zero() {
                m.powf(sigma + T::one())
            } else {
                T::zero()
            }
        })
        .sum();
    lambda / (sigma + T::one()) * s * u.grid().cell_volume()
}

/// `E = ½‖∇u‖² + ∫V|u|² + λ/(σ+1)‖u‖^{2σ+2}_{L^{2σ+2}}`, conserved by the flow.
pub fn energy<T: Real>(u: &WaveField<T>, p: &Potential<T>, lambda: T, sigma: T) -> EnergyParts<T> {
    let kinetic = T::lit(0.5) * u.gradient_norm_sq();
    let potential = potential_energy(u, p);
    let nonlinear = nonlinear_energy(u, lambda, sigma);
    EnergyParts { kinetic, potential, nonlinear, total: kinetic + potential + nonlinear }
}

/// `ℰ_λ = ½‖∇u‖² + λ/(σ+1)‖u‖^{2σ+2} + ∫|∇V|²|u|²`.
///
/// Unlike `E` this drops `∫V|u|²` and adds the gradient weight, so it is
/// nonnegative for `λ ≥ 0` whatever the sign of `V`.
pub fn modified_energy<T: Real>(u: &WaveField<T>, p: &Potential<T>, lambda: T, sigma: T) -> T {
    T::lit(0.5) * u.gradient_norm_sq() + nonlinear_energy(u, lambda, sigma) + grad_weight_sq(u, p)
}

/// `(‖u‖² + ‖∇u‖²)^{1/2}`.
pub fn h1_norm<T: Real>(u: &WaveField<T>) -> T {
    (u.l2_norm_sq() + u.gradient_norm_sq()).sqrt()
}

/// `‖u‖_{H¹} + ‖x u‖`.
pub fn sigma_norm<T: Real>(u: &WaveField<T>) -> T {
    h1_norm(u) + weighted_mass(u, |x| x.iter().map(|&c| c * c).sum()).sqrt()
}

/// `‖u‖_{H¹} + ‖u ∇V‖`.
pub fn sigma_tilde_norm<T: Real>(u: &WaveField<T>, p: &Potential<T>) -> T {
    h1_norm(u) + grad_weight_sq(u, p).sqrt()
}

/// `‖u‖_{H^s} + ‖V^{s/2}u‖`, the usual equivalent of `‖H^{s/2}u‖` for
/// nonnegative `V`. It is a surrogate, not the spectral norm of `H` itself.
pub fn bs_norm<T: Real>(u: &WaveField<T>, p: &Potential<T>, s: T) -> Result<T, NormError> {
    if !(s >= T::zero()) {
        return Err(NormError::NegativeOrder(s.as_f64()));
    }
    if !p.is_nonnegative() {
        return Err(NormError::SignRequired);
    }
    let weight = weighted_mass(u, |x| {
        let v = p.value(x).max(T::zero());
        if v > T::zero() {
            v.powf(s)
        } else if s == T::zero() {
            T::one()
        } else {
            T::zero()
        }
    });
    Ok(u.hs_norm(s) + weight.sqrt())
}

/// `(t, ‖u(t)‖_∞ t^{d/2} / ‖u₀‖_{L¹})` for every recorded time of a linear run.
pub fn dispersive_ratio<T: Real>(traj: &Trajectory<T>, u0: &WaveField<T>) -> Result<Vec<(T, T)>, NormError> {
    if traj.params.lambda != T::zero() {
        return Err(NormError::NonlinearTrajectory);
    }
    let half_d = T::from_usize_lossy(u0.grid().dim()) * T::lit(0.5);
    let l1 = u0.l1_norm();
    Ok(traj
        .diagnostics
        .iter()
        .map(|r| (r.t, r.sup_norm * r.t.powf(half_d) / l1))
        .collect())
}

fn weighted_mass<T: Real>(u: &WaveField<T>, w: impl Fn(&[T]) -> T) -> T {
    let grid = u.grid();
    let d = grid.dim();
    let s: T = u
        .values()
        .iter()
        .enumerate()
        .map(|(i, z)| w(&grid.point(i)[..d]) * z.norm_sqr())
        .sum();
    s * grid.cell_volume()
}

/// `∫ |∇V|²|u|²`.
fn grad_weight_sq<T: Real>(u: &WaveField<T>, p: &Potential<T>) -> T {
    weighted_mass(u, |x| {
        let g = p.eval(x).grad;
        g[0] * g[0] + g[1] * g[1]
    })
}

/// One time sample of every monitored quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRow<T> {
    pub t: T,
    pub mass: T,
    pub kinetic: T,
    pub potential_energy: T,
    pub nonlinear_energy: T,
    pub total_energy: T,
    pub modified_energy: T,
    pub sigma_norm: T,
    pub sigma_tilde_norm: T,
    /// `NaN` when `V` takes negative values.
    pub b1_norm: T,
    pub sup_norm: T,
}

impl<T: Real> DiagnosticsRow<T> {
    /// Column names, in the order of [`Self::to_array`].
    pub const COLUMNS: [&'static str; 11] = [
        "t",
        "mass",
        "kinetic",
        "potential_energy",
        "nonlinear_energy",
        "total_E",
        "modified_E_lambda",
        "sigma_norm",
        "sigma_tilde_norm",
        "b1_norm",
        "sup_norm",
    ];

    pub fn compute(u: &WaveField<T>, p: &Potential<T>, lambda: T, sigma: T, t: T) -> Self {
        let e = energy(u, p, lambda, sigma);
        let h1 = (u.l2_norm_sq() + T::lit(2.0) * e.kinetic).sqrt();
        let grad_w = grad_weight_sq(u, p);
        Self {
            t,
            mass: u.l2_norm_sq(),
            kinetic: e.kinetic,
            potential_energy: e.potential,
            nonlinear_energy: e.nonlinear,
            total_energy: e.total,
            modified_energy: e.kinetic + e.nonlinear + grad_w,
            sigma_norm: h1 + weighted_mass(u, |x| x.iter().map(|&c| c * c).sum()).sqrt(),
            sigma_tilde_norm: h1 + grad_w.sqrt(),
            b1_norm: bs_norm(u, p, T::one()).unwrap_or_else(|_| T::nan()),
            sup_norm: u.sup_norm(),
        }
    }

    pub fn to_array(&self) -> [T; 11] {
        [
            self.t,
            self.mass,
            self.kinetic,
            self.potential_energy,
            self.nonlinear_energy,
            self.total_energy,
            self.modified_energy,
            self.sigma_norm,
            self.sigma_tilde_norm,
            self.b1_norm,
            self.sup_norm,
        ]
    }
}
