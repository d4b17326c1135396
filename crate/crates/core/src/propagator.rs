//! Strang-split time stepping for `i∂ₜu = -½Δu + Vu + λ|u|^{2σ}u`.
//!
//! One step is `P(dt/2) K(dt) P(dt/2)`, where `P(s)` multiplies pointwise by
//! `exp(-is(V + λ|u|^{2σ}))` and `K(s)` multiplies the spectrum by
//! `exp(-is|k|²/2)`. `|u|` is invariant under `P`, so both sub-flows are exact
//! and the scheme is unitary.

use num_complex::Complex;
use thiserror::Error;

use crate::norms::DiagnosticsRow;
use crate::potentials::{GuardVerdict, Potential};
use crate::scalar::Real;
use crate::spectral::{Grid, WaveField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolveError {
    #[error("invalid simulation parameters: {0}")]
    InvalidParams(String),
    #[error("potential rejected: {0}")]
    GuardRejected(String),
    #[error("potential is {potential}-dimensional but the grid is {grid}-dimensional")]
    DimensionMismatch { potential: usize, grid: usize },
    #[error("initial data reaches the box boundary (|u| = {ratio:e} x max)")]
    BoundaryAmplitude { ratio: f64 },
    #[error("blow-up detected at t = {t}")]
    BlowupDetected { t: f64 },
}

/// Numerical blow-up criteria checked after every step.
///
/// A mass-conserving scheme on a fixed grid keeps `max|u| ≤ (M/dx^d)^{1/2}`,
/// so a collapsing solution first shows up as loss of resolution: spectral
/// mass piling up near the Nyquist frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupSentinel<T> {
    /// Fires when `max|u| > amplitude_factor · max|u₀|`.
    pub amplitude_factor: T,
    /// Fires when the share of `‖û‖²` beyond 2/3 of Nyquist (on any axis)
    /// exceeds this value.
    pub tail_fraction: T,
}

impl<T: Real> Default for BlowupSentinel<T> {
    fn default() -> Self {
        Self { amplitude_factor: T::lit(1e6), tail_fraction: T::lit(1e-4) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationParams<T> {
    pub lambda: T,
    pub sigma: T,
    pub dt: T,
    pub t_final: T,
    /// Diagnostics (and snapshots) every this many steps; the final step is
    /// always recorded.
    pub record_every: usize,
    pub store_snapshots: bool,
    pub sentinel: BlowupSentinel<T>,
}

impl<T: Real> SimulationParams<T> {
    pub fn new(lambda: T, sigma: T, dt: T, t_final: T) -> Result<Self, EvolveError> {
        let p = Self {
            lambda,
            sigma,
            dt,
            t_final,
            record_every: 1,
            store_snapshots: true,
            sentinel: BlowupSentinel::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_record_every(mut self, n: usize) -> Self {
        self.record_every = n.max(1);
        self
    }

    pub fn with_snapshots(mut self, keep: bool) -> Self {
        self.store_snapshots = keep;
        self
    }

    pub fn validate(&self) -> Result<(), EvolveError> {
        let bad = |m: &str| Err(EvolveError::InvalidParams(m.to_string()));
        if !self.lambda.is_finite() {
            return bad("lambda must be finite");
        }
        if !(self.sigma.is_finite() && self.sigma > T::zero()) {
            return bad("sigma must be positive");
        }
        if !(self.dt.is_finite() && self.dt > T::zero()) {
            return bad("dt must be positive");
        }
        if !(self.t_final.is_finite() && self.t_final > T::zero()) {
            return bad("T must be positive");
        }
        if self.dt > self.t_final {
            return bad("dt must not exceed T");
        }
        if self.record_every == 0 {
            return bad("record_every must be >= 1");
        }
        Ok(())
    }

    /// `⌈T/dt⌉` and the uniform step `T/⌈T/dt⌉ ≤ dt` that lands on `T`.
    pub fn step_count(&self) -> (usize, T) {
        let ratio = (self.t_final / self.dt).as_f64();
        let n = ((ratio - 1e-9).ceil() as usize).max(1);
        (n, self.t_final / T::from_usize_lossy(n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination<T> {
    Completed,
    Blowup { t: T },
}

#[derive(Debug, Clone)]
pub struct Trajectory<T: Real> {
    pub times: Vec<T>,
    /// One per recorded time when `store_snapshots` is set, else empty.
    pub snapshots: Vec<WaveField<T>>,
    pub diagnostics: Vec<DiagnosticsRow<T>>,
    pub params: SimulationParams<T>,
    pub termination: Termination<T>,
    pub final_state: WaveField<T>,
}

impl<T: Real> Trajectory<T> {
    pub fn blew_up(&self) -> bool {
        matches!(self.termination, Termination::Blowup { .. })
    }

    /// Largest recorded `‖∇u‖_{L²}`.
    pub fn max_gradient_norm(&self) -> T {
        self.diagnostics
            .iter()
            .map(|r| (T::lit(2.0) * r.kinetic).sqrt())
            .fold(T::zero(), T::max)
    }
}

/// Precomputed phase factors for repeated Strang steps on one grid.
pub struct StrangStepper<T: Real> {
    grid: Grid<T>,
    potential: Vec<T>,
    kinetic_phase: Vec<Complex<T>>,
    tail: Vec<bool>,
    half_dt: T,
    lambda: T,
    sigma: T,
}

impl<T: Real> StrangStepper<T> {
    /// `dt` may be negative (backward stepping).
    pub fn new(grid: &Grid<T>, potential: &Potential<T>, lambda: T, sigma: T, dt: T) -> Self {
        assert_eq!(grid.dim(), potential.dim(), "grid and potential dimensions differ");
        let d = grid.dim();
        let values = grid.points().map(|p| potential.value(&p[..d])).collect();
        let half = T::lit(0.5);
        let kinetic_phase = grid
            .k_squared()
            .into_iter()
            .map(|k2| Complex::from_polar(T::one(), -dt * half * k2))
            .collect();
        let cut = T::lit(2.0 / 3.0) * grid.nyquist();
        let tail = (0..grid.len())
            .map(|i| grid.wavevector(i)[..d].iter().any(|k| k.abs() > cut))
            .collect();
        Self { grid: grid.clone(), potential: values, kinetic_phase, tail, half_dt: dt * half, lambda, sigma }
    }

    fn half_potential(&self, v: &mut [Complex<T>]) {
        let nonlinear = self.lambda != T::zero();
        for (z, &pot) in v.iter_mut().zip(&self.potential) {
            let mut s = pot;
            if nonlinear {
                let m2 = z.norm_sqr();
                // 0^{2σ} = 0 for every σ > 0
                if m2 > T::zero() {
                    s = s + self.lambda * m2.powf(self.sigma);
                }
            }
            *z = *z * Complex::from_polar(T::one(), -self.half_dt * s);
        }
    }

    /// Advances `v` by one step in place and returns the spectral tail
    /// fraction seen during the kinetic sub-step.
    pub fn step(&self, v: &mut [Complex<T>]) -> T {
        self.half_potential(v);
        self.grid.forward(v);
        let mut total = T::zero();
        let mut tail = T::zero();
        for ((z, ph), &hi) in v.iter_mut().zip(&self.kinetic_phase).zip(&self.tail) {
            *z = *z * ph;
            let m = z.norm_sqr();
            total = total + m;
            if hi {
                tail = tail + m;
            }
        }
        self.grid.inverse(v);
        self.half_potential(v);
        if total > T::zero() {
            tail / total
        } else {
            T::zero()
        }
    }
}

/// One Strang step of size `dt` (which may be negative).
pub fn strang_step<T: Real>(u: &WaveField<T>, p: &Potential<T>, params: &SimulationParams<T>, dt: T) -> WaveField<T> {
    let stepper = StrangStepper::new(u.grid(), p, params.lambda, params.sigma, dt);
    let mut out = u.clone();
    stepper.step(out.values_mut());
    out
}

fn check_inputs<T: Real>(u0: &WaveField<T>, p: &Potential<T>, params: &SimulationParams<T>) -> Result<(), EvolveError> {
    params.validate()?;
    if let GuardVerdict::Reject(reason) = p.self_adjointness_guard() {
        return Err(EvolveError::GuardRejected(reason));
    }
    if p.dim() != u0.grid().dim() {
        return Err(EvolveError::DimensionMismatch { potential: p.dim(), grid: u0.grid().dim() });
    }
    let peak = u0.sup_norm();
    let edge = u0.boundary_amplitude();
    if peak > T::zero() && edge > T::lit(1e-8) * peak {
        return Err(EvolveError::BoundaryAmplitude { ratio: (edge / peak).as_f64() });
    }
    Ok(())
}

/// Runs to `T` and returns the trajectory; a fired blow-up sentinel is an
/// error carrying the detection time.
pub fn evolve<T: Real>(u0: &WaveField<T>, p: &Potential<T>, params: &SimulationParams<T>) -> Result<Trajectory<T>, EvolveError> {
    let traj = evolve_recording(u0, p, params)?;
    match traj.termination {
        Termination::Blowup { t } => Err(EvolveError::BlowupDetected { t: t.as_f64() }),
        Termination::Completed => Ok(traj),
    }
}

/// Like [`evolve`], but blow-up ends the run normally with
/// [`Termination::Blowup`] and the trajectory recorded so far.
pub fn evolve_recording<T: Real>(
    u0: &WaveField<T>,
    p: &Potential<T>,
    params: &SimulationParams<T>,
) -> Result<Trajectory<T>, EvolveError> {
    check_inputs(u0, p, params)?;
    let (n, h) = params.step_count();
    let stepper = StrangStepper::new(u0.grid(), p, params.lambda, params.sigma, h);
    let peak0 = u0.sup_norm();
    let limit = params.sentinel.amplitude_factor * peak0;

    let mut u = u0.clone();
    let mut traj = Trajectory {
        times: Vec::new(),
        snapshots: Vec::new(),
        diagnostics: Vec::new(),
        params: *params,
        termination: Termination::Completed,
        final_state: u0.clone(),
    };
    let record = |traj: &mut Trajectory<T>, u: &WaveField<T>, t: T| {
        traj.times.push(t);
        traj.diagnostics.push(DiagnosticsRow::compute(u, p, params.lambda, params.sigma, t));
        if params.store_snapshots {
            traj.snapshots.push(u.clone());
        }
    };
    record(&mut traj, &u, T::zero());

    for step in 1..=n {
        let tail = stepper.step(u.values_mut());
        let t = T::from_usize_lossy(step) * h;
        let finite = u.values().iter().all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite {
            traj.termination = Termination::Blowup { t };
            break;
        }
        if u.sup_norm() > limit || tail > params.sentinel.tail_fraction {
            record(&mut traj, &u, t);
            traj.termination = Termination::Blowup { t };
            traj.final_state = u;
            return Ok(traj);
        }
        if step % params.record_every == 0 || step == n {
            record(&mut traj, &u, t);
        }
    }
    traj.final_state = u;
    Ok(traj)
}
