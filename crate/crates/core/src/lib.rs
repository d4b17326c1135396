//! Spectral simulator and diagnostics for the nonlinear Schrödinger equation
//! with a smooth external potential,
//!
//! ```text
//! i ∂ₜu = -½Δu + V(x)u + λ|u|^{2σ}u,   x ∈ ℝ^d (d = 1, 2),
//! ```
//!
//! discretized on a periodic box. Besides the Strang-split time stepper the
//! crate computes the weighted norms that govern well-posedness (Σ, Σ̃ and a
//! B^s surrogate), a modified energy that stays controlled when ∇V is
//! unbounded, and the WKB/ray-tracing construction that explains why the
//! weight |∇V| is the sharp one for at most quadratic potentials.
//!
//! Every numerical type is generic over [`Real`]; the `*64` / `*32` aliases
//! below fix the scalar.

pub mod experiments;
pub mod geometric_optics;
pub mod io;
pub mod norms;
pub mod potentials;
pub mod propagator;
pub mod scalar;
pub mod spectral;

pub use geometric_optics::{RayBundle, RayState, WkbDecomposition};
pub use norms::DiagnosticsRow;
pub use potentials::{Potential, PotentialClass, PotentialEval};
pub use propagator::{SimulationParams, Trajectory};
pub use scalar::Real;
pub use spectral::{make_grid, Grid, WaveField};

pub type Grid64 = Grid<f64>;
pub type Grid32 = Grid<f32>;
pub type WaveField64 = WaveField<f64>;
pub type WaveField32 = WaveField<f32>;
pub type Potential64 = Potential<f64>;
pub type Potential32 = Potential<f32>;
pub type SimulationParams64 = SimulationParams<f64>;
pub type Trajectory64 = Trajectory<f64>;
pub type DiagnosticsRow64 = DiagnosticsRow<f64>;
pub type RayBundle64 = RayBundle<f64>;
pub type WkbDecomposition64 = WkbDecomposition<f64>;

/// Complex sample type used by wave fields.
pub type Complex<T> = num_complex::Complex<T>;
