//! Closed-form potential families, their classification, and the checks that
//! go with it: the self-adjointness guard and the gradient bound
//! `|∇V|² ≤ 2‖∇²V‖∞·V` for nonnegative potentials with bounded Hessian.
//!
//! `⟨x⟩` always means `(1 + |x|²)^{1/2}`.

use std::fmt;

use thiserror::Error;

use crate::scalar::Real;
use crate::spectral::{Grid, Point, MAX_DIM};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("potential is {expected}-dimensional, got {actual} coordinates")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid potential parameter: {0}")]
    InvalidParameter(String),
    #[error("operation requires a nonnegative potential")]
    SignRequired,
    #[error("operation requires an at most quadratic potential")]
    NotAtMostQuadratic,
}

/// Supported families. Parameters are per axis where that makes sense.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialFamily<T> {
    Zero,
    /// `V = ½ ∑ ω_j² x_j²`.
    Harmonic { omega: Vec<T> },
    /// `V = -½ ω² |x|²`.
    InvertedHarmonic { omega: T },
    /// `V = E·x`.
    Stark { field: Vec<T> },
    /// `V = ⟨x⟩`.
    SoftLinear,
    /// `V = ½ xᵀAx + b·x + c`, `A` symmetric (row-major, `d×d`).
    AnisotropicQuadratic { a: [[T; MAX_DIM]; MAX_DIM], b: Point<T>, c: T },
    /// `V = ⟨x⟩^m`, `m > 2`.
    SoftPower { m: T },
    /// `V = -⟨x⟩^m`. Only exists so that the guard has something to reject.
    NegatedSoftPower { m: T },
}

/// Position of a potential in the two-way taxonomy (at most quadratic versus
/// super-quadratic). `Inadmissible` covers potentials that fit neither.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialClass<T> {
    AtMostQuadratic { bounded_gradient: bool },
    SuperQuadratic { m: T },
    Inadmissible,
}

/// `V`, `∇V`, `∇²V` and `∇ΔV` at one point. Entries beyond the dimension are
/// zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialEval<T> {
    pub value: T,
    pub grad: Point<T>,
    pub hess: [[T; MAX_DIM]; MAX_DIM],
    pub grad_lap: Point<T>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GuardVerdict {
    Accept,
    Reject(String),
}

impl GuardVerdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, GuardVerdict::Accept)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaReport<T> {
    /// `max |∇V|² / (2‖∇²V‖∞ V)` over sampled points with `V ≥ 10⁻¹²`.
    pub max_ratio: T,
    pub points_used: usize,
    pub hessian_bound: T,
    pub pass: bool,
}

/// A classified potential on `ℝ^d`, `d ∈ {1, 2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential<T> {
    dim: usize,
    family: PotentialFamily<T>,
}

fn check_dim(d: usize) -> Result<(), PotentialError> {
    if d == 0 || d > MAX_DIM {
        Err(PotentialError::InvalidParameter(format!("dimension {d} not in {{1, 2}}")))
    } else {
        Ok(())
    }
}

fn finite<T: Real>(name: &str, v: T) -> Result<T, PotentialError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(PotentialError::InvalidParameter(format!("{name} must be finite")))
    }
}

fn pad<T: Real>(v: &[T]) -> Point<T> {
    let mut p = [T::zero(); MAX_DIM];
    p[..v.len()].copy_from_slice(v);
    p
}

impl<T: Real> Potential<T> {
    pub fn zero(d: usize) -> Result<Self, PotentialError> {
        check_dim(d)?;
        Ok(Self { dim: d, family: PotentialFamily::Zero })
    }

    /// Per-axis frequencies; the dimension is `omega.len()`.
    pub fn harmonic(omega: &[T]) -> Result<Self, PotentialError> {
        check_dim(omega.len())?;
        for &w in omega {
            if !(finite("omega", w)? >= T::zero()) {
                return Err(PotentialError::InvalidParameter("omega must be >= 0".into()));
            }
        }
        Ok(Self { dim: omega.len(), family: PotentialFamily::Harmonic { omega: omega.to_vec() } })
    }

    pub fn isotropic_harmonic(d: usize, omega: T) -> Result<Self, PotentialError> {
        check_dim(d)?;
        Self::harmonic(&vec![omega; d])
    }

    pub fn inverted_harmonic(d: usize, omega: T) -> Result<Self, PotentialError> {
        check_dim(d)?;
        if !(finite("omega", omega)? > T::zero()) {
            return Err(PotentialError::InvalidParameter("omega must be > 0".into()));
        }
        Ok(Self { dim: d, family: PotentialFamily::InvertedHarmonic { omega } })
    }

    pub fn stark(field: &[T]) -> Result<Self, PotentialError> {
        check_dim(field.len())?;
        for &e in field {
            finite("field", e)?;
        }
        Ok(Self { dim: field.len(), family: PotentialFamily::Stark { field: field.to_vec() } })
    }

    pub fn soft_linear(d: usize) -> Result<Self, PotentialError> {
        check_dim(d)?;
        Ok(Self { dim: d, family: PotentialFamily::SoftLinear })
    }

    /// `a` is the row-major `d×d` matrix, `b` has `d` entries.
    pub fn anisotropic_quadratic(d: usize, a: &[T], b: &[T], c: T) -> Result<Self, PotentialError> {
        check_dim(d)?;
        if a.len() != d * d || b.len() != d {
            return Err(PotentialError::InvalidParameter(format!(
                "quadratic form needs {} matrix entries and {d} vector entries",
                d * d
            )));
        }
        let mut m = [[T::zero(); MAX_DIM]; MAX_DIM];
        for i in 0..d {
            for j in 0..d {
                m[i][j] = finite("A", a[i * d + j])?;
            }
        }
        for i in 0..d {
            for j in 0..i {
                let scale = T::one() + m[i][j].abs().max(m[j][i].abs());
                if (m[i][j] - m[j][i]).abs() > T::lit(1e-12) * scale {
                    return Err(PotentialError::InvalidParameter("A must be symmetric".into()));
                }
            }
        }
        for &v in b {
            finite("b", v)?;
        }
        Ok(Self {
            dim: d,
            family: PotentialFamily::AnisotropicQuadratic { a: m, b: pad(b), c: finite("c", c)? },
        })
    }

    pub fn soft_power(d: usize, m: T) -> Result<Self, PotentialError> {
        check_dim(d)?;
        if !(finite("m", m)? > T::lit(2.0)) {
            return Err(PotentialError::InvalidParameter("soft power needs m > 2".into()));
        }
        Ok(Self { dim: d, family: PotentialFamily::SoftPower { m } })
    }

    pub fn negated_soft_power(d: usize, m: T) -> Result<Self, PotentialError> {
        check_dim(d)?;
        if !(finite("m", m)? > T::zero()) {
            return Err(PotentialError::InvalidParameter("exponent must be > 0".into()));
        }
        Ok(Self { dim: d, family: PotentialFamily::NegatedSoftPower { m } })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> &PotentialFamily<T> {
        &self.family
    }

    /// Value of `V` only.
    #[inline]
    pub fn value(&self, x: &[T]) -> T {
        let half = T::lit(0.5);
        let r2 = x.iter().fold(T::zero(), |a, &v| a + v * v);
        match &self.family {
            PotentialFamily::Zero => T::zero(),
            PotentialFamily::Harmonic { omega } => {
                half * omega.iter().zip(x).fold(T::zero(), |a, (&w, &v)| a + w * w * v * v)
            }
            PotentialFamily::InvertedHarmonic { omega } => -half * *omega * *omega * r2,
            PotentialFamily::Stark { field } => field.iter().zip(x).fold(T::zero(), |a, (&e, &v)| a + e * v),
            PotentialFamily::SoftLinear => (T::one() + r2).sqrt(),
            PotentialFamily::AnisotropicQuadratic { a, b, c } => {
                let mut q = *c;
                for i in 0..self.dim {
                    q = q + b[i] * x[i];
                    for j in 0..self.dim {
                        q = q + half * x[i] * a[i][j] * x[j];
                    }
                }
                q
            }
            PotentialFamily::SoftPower { m } => (T::one() + r2).powf(*m * half),
            PotentialFamily::NegatedSoftPower { m } => -(T::one() + r2).powf(*m * half),
        }
    }

    /// Analytic value and derivatives up to third order (`∇ΔV`).
    ///
    /// Panics if `x.len()` differs from the potential dimension.
    pub fn eval(&self, x: &[T]) -> PotentialEval<T> {
        assert_eq!(x.len(), self.dim, "point dimension does not match potential");
        let d = self.dim;
        let zero = T::zero();
        let mut out = PotentialEval {
            value: self.value(x),
            grad: [zero; MAX_DIM],
            hess: [[zero; MAX_DIM]; MAX_DIM],
            grad_lap: [zero; MAX_DIM],
        };
        match &self.family {
            PotentialFamily::Zero => {}
            PotentialFamily::Harmonic { omega } => {
                for i in 0..d {
                    let w2 = omega[i] * omega[i];
                    out.grad[i] = w2 * x[i];
                    out.hess[i][i] = w2;
                }
            }
            PotentialFamily::InvertedHarmonic { omega } => {
                let w2 = *omega * *omega;
                for i in 0..d {
                    out.grad[i] = -w2 * x[i];
                    out.hess[i][i] = -w2;
                }
            }
            PotentialFamily::Stark { field } => {
                out.grad[..d].copy_from_slice(&field[..d]);
            }
            PotentialFamily::AnisotropicQuadratic { a, b, .. } => {
                for i in 0..d {
                    out.grad[i] = b[i];
                    for j in 0..d {
                        out.grad[i] = out.grad[i] + a[i][j] * x[j];
                        out.hess[i][j] = a[i][j];
                    }
                }
            }
            PotentialFamily::SoftLinear => bracket_power(T::one(), T::one(), x, &mut out),
            PotentialFamily::SoftPower { m } => bracket_power(*m, T::one(), x, &mut out),
            PotentialFamily::NegatedSoftPower { m } => bracket_power(*m, -T::one(), x, &mut out),
        }
        out
    }

    pub fn class(&self) -> PotentialClass<T> {
        match &self.family {
            PotentialFamily::SoftPower { m } => PotentialClass::SuperQuadratic { m: *m },
            PotentialFamily::NegatedSoftPower { m } if *m > T::lit(2.0) => PotentialClass::Inadmissible,
            _ => PotentialClass::AtMostQuadratic { bounded_gradient: self.gradient_bound().is_some() },
        }
    }

    /// Whether `V ≥ 0` everywhere.
    pub fn is_nonnegative(&self) -> bool {
        match &self.family {
            PotentialFamily::Zero
            | PotentialFamily::Harmonic { .. }
            | PotentialFamily::SoftLinear
            | PotentialFamily::SoftPower { .. } => true,
            PotentialFamily::InvertedHarmonic { .. } | PotentialFamily::NegatedSoftPower { .. } => false,
            PotentialFamily::Stark { field } => field.iter().all(|e| *e == T::zero()),
            PotentialFamily::AnisotropicQuadratic { a, b, c } => {
                quadratic_is_nonnegative(self.dim, a, b, *c)
            }
        }
    }

    /// Analytic `sup_x ‖∇²V(x)‖` (operator norm), `None` when unbounded.
    pub fn hessian_bound(&self) -> Option<T> {
        match &self.family {
            PotentialFamily::Zero | PotentialFamily::Stark { .. } => Some(T::zero()),
            PotentialFamily::Harmonic { omega } => {
                Some(omega.iter().fold(T::zero(), |a, &w| a.max(w * w)))
            }
            PotentialFamily::InvertedHarmonic { omega } => Some(*omega * *omega),
            PotentialFamily::SoftLinear => Some(T::one()),
            PotentialFamily::AnisotropicQuadratic { a, .. } => {
                let (ev, _) = sym_eigen(self.dim, a);
                Some(ev[..self.dim].iter().fold(T::zero(), |acc, l| acc.max(l.abs())))
            }
            PotentialFamily::SoftPower { .. } => None,
            // For m <= 2 both eigenvalues of ∇²⟨x⟩^m are bounded by m (attained at 0).
            PotentialFamily::NegatedSoftPower { m } => (*m <= T::lit(2.0)).then_some(*m),
        }
    }

    /// Analytic `sup_x |∇V(x)|`, `None` when unbounded.
    pub fn gradient_bound(&self) -> Option<T> {
        let norm = |v: &[T]| v.iter().fold(T::zero(), |a, &e| a + e * e).sqrt();
        match &self.family {
            PotentialFamily::Zero => Some(T::zero()),
            PotentialFamily::Harmonic { omega } => {
                omega.iter().all(|w| *w == T::zero()).then_some(T::zero())
            }
            PotentialFamily::InvertedHarmonic { .. } | PotentialFamily::SoftPower { .. } => None,
            PotentialFamily::Stark { field } => Some(norm(field)),
            PotentialFamily::SoftLinear => Some(T::one()),
            PotentialFamily::AnisotropicQuadratic { a, b, .. } => {
                let d = self.dim;
                (0..d).all(|i| (0..d).all(|j| a[i][j] == T::zero())).then(|| norm(&b[..d]))
            }
            PotentialFamily::NegatedSoftPower { m } => {
                if *m > T::one() {
                    None
                } else if *m == T::one() {
                    Some(T::one())
                } else {
                    // max of m r (1+r²)^{m/2-1}, attained at r² = 1/(1-m)
                    let r2 = T::one() / (T::one() - *m);
                    Some(*m * r2.sqrt() * (T::one() + r2).powf(*m / T::lit(2.0) - T::one()))
                }
            }
        }
    }

    /// Accepts iff `V ≥ -a|x|² - b` for some `a, b > 0`; below that bound the
    /// Hamiltonian is not essentially self-adjoint and the flow is not unique.
    pub fn self_adjointness_guard(&self) -> GuardVerdict {
        match &self.family {
            PotentialFamily::NegatedSoftPower { m } if *m > T::lit(2.0) => GuardVerdict::Reject(format!(
                "V = -<x>^{m} decreases faster than -a|x|^2 - b; H is not essentially self-adjoint"
            )),
            _ => GuardVerdict::Accept,
        }
    }

    /// Largest `|∇V|²/(2‖∇²V‖∞ V)` over the points of `sample_box`, skipping
    /// points where `V < 10⁻¹²`. The ratio never exceeds one for a nonnegative
    /// potential with bounded Hessian.
    pub fn grad_bound_lemma_check(&self, sample_box: &Grid<T>) -> Result<LemmaReport<T>, PotentialError> {
        if !self.is_nonnegative() {
            return Err(PotentialError::SignRequired);
        }
        let bound = match (self.class(), self.hessian_bound()) {
            (PotentialClass::AtMostQuadratic { .. }, Some(b)) => b,
            _ => return Err(PotentialError::NotAtMostQuadratic),
        };
        if sample_box.dim() != self.dim {
            return Err(PotentialError::DimensionMismatch { expected: self.dim, actual: sample_box.dim() });
        }
        let floor = T::lit(1e-12);
        let mut max_ratio = T::zero();
        let mut used = 0;
        for p in sample_box.points() {
            let e = self.eval(&p[..self.dim]);
            if e.value < floor {
                continue;
            }
            used += 1;
            if bound == T::zero() {
                continue;
            }
            let g2 = e.grad.iter().fold(T::zero(), |a, &g| a + g * g);
            max_ratio = max_ratio.max(g2 / (T::lit(2.0) * bound * e.value));
        }
        Ok(LemmaReport {
            max_ratio,
            points_used: used,
            hessian_bound: bound,
            pass: max_ratio <= T::one() + T::lit(1e-9),
        })
    }

    /// Largest sampled `‖∇²V(x)‖` over the grid points.
    pub fn sampled_hessian_max(&self, grid: &Grid<T>) -> T {
        grid.points()
            .map(|p| {
                let e = self.eval(&p[..self.dim]);
                let (ev, _) = sym_eigen(self.dim, &e.hess);
                ev[..self.dim].iter().fold(T::zero(), |a, l| a.max(l.abs()))
            })
            .fold(T::zero(), T::max)
    }
}

impl<T: Real> fmt::Display for Potential<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.dim;
        match &self.family {
            PotentialFamily::Zero => write!(f, "zero(d={d})"),
            PotentialFamily::Harmonic { omega } => write!(f, "harmonic(omega={omega:?})"),
            PotentialFamily::InvertedHarmonic { omega } => write!(f, "inverted_harmonic(d={d}, omega={omega})"),
            PotentialFamily::Stark { field } => write!(f, "stark(field={field:?})"),
            PotentialFamily::SoftLinear => write!(f, "soft_linear(d={d})"),
            PotentialFamily::AnisotropicQuadratic { a, b, c } => {
                write!(f, "anisotropic_quadratic(A={:?}, b={:?}, c={c})", &a[..d], &b[..d])
            }
            PotentialFamily::SoftPower { m } => write!(f, "soft_power(d={d}, m={m})"),
            PotentialFamily::NegatedSoftPower { m } => write!(f, "negated_soft_power(d={d}, m={m})"),
        }
    }
}

/// Derivatives of `s·⟨x⟩^m`:
/// `∂_i = m g^{m/2-1} x_i`, `∂_ij = m g^{m/2-1} δ_ij + m(m-2) g^{m/2-2} x_i x_j`,
/// `∂_k Δ = m(m-2) x_k g^{m/2-3} [(d+2) + (d+m-2)|x|²]`, with `g = 1 + |x|²`.
fn bracket_power<T: Real>(m: T, s: T, x: &[T], out: &mut PotentialEval<T>) {
    let d = x.len();
    let two = T::lit(2.0);
    let r2 = x.iter().fold(T::zero(), |a, &v| a + v * v);
    let g = T::one() + r2;
    let half_m = m / two;
    let g1 = g.powf(half_m - T::one());
    let g2 = g1 / g;
    let g3 = g2 / g;
    let dd = T::from_usize_lossy(d);
    let mm2 = m * (m - two);
    let lap_coef = mm2 * g3 * ((dd + two) + (dd + m - two) * r2);
    for i in 0..d {
        out.grad[i] = s * m * g1 * x[i];
        out.grad_lap[i] = s * lap_coef * x[i];
        for j in 0..d {
            let delta = if i == j { m * g1 } else { T::zero() };
            out.hess[i][j] = s * (delta + mm2 * g2 * x[i] * x[j]);
        }
    }
}

/// Eigen-decomposition of a symmetric `d×d` matrix (`d ≤ 2`). Returns the
/// eigenvalues (ascending) and unit eigenvectors as columns.
pub(crate) fn sym_eigen<T: Real>(
    d: usize,
    a: &[[T; MAX_DIM]; MAX_DIM],
) -> (Point<T>, [Point<T>; MAX_DIM]) {
    let zero = T::zero();
    let one = T::one();
    if d == 1 {
        return ([a[0][0], zero], [[one, zero], [zero, one]]);
    }
    let (p, q, r) = (a[0][0], a[0][1], a[1][1]);
    let mean = (p + r) / T::lit(2.0);
    let rad = (((p - r) / T::lit(2.0)).powi(2) + q * q).sqrt();
    let (lo, hi) = (mean - rad, mean + rad);
    if q == zero {
        return if p <= r { ([p, r], [[one, zero], [zero, one]]) } else { ([r, p], [[zero, one], [one, zero]]) };
    }
    let v_lo = normalize([lo - r, q]);
    let v_hi = normalize([hi - r, q]);
    ([lo, hi], [v_lo, v_hi])
}

fn normalize<T: Real>(v: Point<T>) -> Point<T> {
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    [v[0] / n, v[1] / n]
}

fn quadratic_is_nonnegative<T: Real>(d: usize, a: &[[T; MAX_DIM]; MAX_DIM], b: &Point<T>, c: T) -> bool {
    let (ev, vecs) = sym_eigen(d, a);
    let scale = T::one() + ev[..d].iter().fold(T::zero(), |m, l| m.max(l.abs()));
    let tol = T::lit(1e-12) * scale;
    let mut min = c;
    for k in 0..d {
        let beta = (0..d).fold(T::zero(), |acc, i| acc + b[i] * vecs[k][i]);
        if ev[k] < -tol {
            return false;
        }
        if ev[k] <= tol {
            if beta.abs() > tol {
                return false;
            }
        } else {
            min = min - beta * beta / (T::lit(2.0) * ev[k]);
        }
    }
    min >= -tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{make_grid, WaveField};
    use proptest::prelude::*;

    fn families_1d() -> Vec<Potential<f64>> {
        vec![
            Potential::zero(1).unwrap(),
            Potential::harmonic(&[1.3]).unwrap(),
            Potential::inverted_harmonic(1, 0.7).unwrap(),
            Potential::stark(&[-2.0]).unwrap(),
            Potential::soft_linear(1).unwrap(),
            Potential::anisotropic_quadratic(1, &[0.8], &[0.3], 1.0).unwrap(),
            Potential::soft_power(1, 3.0).unwrap(),
            Potential::soft_power(1, 4.5).unwrap(),
        ]
    }

    fn families_2d() -> Vec<Potential<f64>> {
        vec![
            Potential::zero(2).unwrap(),
            Potential::harmonic(&[1.0, 2.0]).unwrap(),
            Potential::inverted_harmonic(2, 1.0).unwrap(),
            Potential::stark(&[1.0, -0.5]).unwrap(),
            Potential::soft_linear(2).unwrap(),
            Potential::anisotropic_quadratic(2, &[2.0, 0.5, 0.5, 1.0], &[0.1, -0.2], 0.3).unwrap(),
            Potential::soft_power(2, 3.0).unwrap(),
        ]
    }

    #[test]
    fn harmonic_example() {
        let e = Potential::harmonic(&[1.0]).unwrap().eval(&[2.0]);
        assert_eq!(e.value, 2.0);
        assert_eq!(e.grad[0], 2.0);
        assert_eq!(e.hess[0][0], 1.0);
        assert_eq!(e.grad_lap[0], 0.0);
    }

    #[test]
    fn soft_power_at_origin() {
        // ⟨x⟩³ = (1 + x²)^{3/2}: V' = 3x(1+x²)^{1/2}, V'' = 3(1+x²)^{1/2} + 3x²(1+x²)^{-1/2}.
        let e = Potential::soft_power(1, 3.0f64).unwrap().eval(&[0.0]);
        assert_eq!(e.value, 1.0);
        assert_eq!(e.grad[0], 0.0);
        assert!((e.hess[0][0] - 3.0).abs() < 1e-15);
        let e2 = Potential::soft_power(2, 3.0f64).unwrap().eval(&[0.0, 0.0]);
        assert!((e2.hess[0][0] - 3.0).abs() < 1e-15 && (e2.hess[1][1] - 3.0).abs() < 1e-15);
        assert_eq!(e2.hess[0][1], 0.0);
        // hand check at x = 1: V'' = 3√2 + 3/√2
        let e3 = Potential::soft_power(1, 3.0).unwrap().eval(&[1.0]);
        assert!((e3.hess[0][0] - (3.0 * 2f64.sqrt() + 3.0 / 2f64.sqrt())).abs() < 1e-13);
    }

    #[test]
    fn stark_example() {
        let e = Potential::stark(&[1.0]).unwrap().eval(&[-5.0]);
        assert_eq!(e.value, -5.0);
        assert_eq!(e.grad[0], 1.0);
        assert_eq!(e.hess[0][0], 0.0);
    }

    #[test]
    fn classification_examples() {
        assert_eq!(
            Potential::harmonic(&[1.0]).unwrap().class(),
            PotentialClass::AtMostQuadratic { bounded_gradient: false }
        );
        assert_eq!(Potential::soft_power(1, 3.0).unwrap().class(), PotentialClass::SuperQuadratic { m: 3.0 });
        assert_eq!(
            Potential::<f64>::soft_linear(1).unwrap().class(),
            PotentialClass::AtMostQuadratic { bounded_gradient: true }
        );
        assert_eq!(
            Potential::stark(&[1.0]).unwrap().class(),
            PotentialClass::AtMostQuadratic { bounded_gradient: true }
        );
        assert_eq!(Potential::negated_soft_power(1, 4.0).unwrap().class(), PotentialClass::Inadmissible);
    }

    #[test]
    fn super_quadratic_only_for_soft_power() {
        for p in families_1d().into_iter().chain(families_2d()) {
            let is_sp = matches!(p.family(), PotentialFamily::SoftPower { .. });
            assert_eq!(matches!(p.class(), PotentialClass::SuperQuadratic { .. }), is_sp, "{p}");
            if is_sp {
                assert!(p.is_nonnegative());
                assert!(p.value(&vec![1e3; p.dim()]) > 1e6);
            }
        }
    }

    #[test]
    fn guard_examples() {
        assert!(Potential::inverted_harmonic(1, 1.0).unwrap().self_adjointness_guard().is_accept());
        assert!(Potential::<f64>::zero(1).unwrap().self_adjointness_guard().is_accept());
        let quartic = Potential::negated_soft_power(1, 4.0).unwrap();
        assert!(matches!(quartic.self_adjointness_guard(), GuardVerdict::Reject(_)));
        assert!(Potential::negated_soft_power(1, 2.0).unwrap().self_adjointness_guard().is_accept());
        for p in families_1d().into_iter().chain(families_2d()) {
            assert!(p.self_adjointness_guard().is_accept(), "{p}");
        }
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(Potential::soft_power(1, 2.0).is_err());
        assert!(Potential::inverted_harmonic(1, 0.0).is_err());
        assert!(Potential::harmonic(&[-1.0]).is_err());
        assert!(Potential::<f64>::zero(3).is_err());
        assert!(Potential::anisotropic_quadratic(2, &[1.0, 0.5, 0.4, 1.0], &[0.0, 0.0], 0.0).is_err());
        assert!(Potential::stark(&[f64::NAN]).is_err());
    }

    #[test]
    fn sign_flags() {
        assert!(Potential::harmonic(&[1.0]).unwrap().is_nonnegative());
        assert!(!Potential::stark(&[1.0]).unwrap().is_nonnegative());
        assert!(!Potential::inverted_harmonic(1, 1.0).unwrap().is_nonnegative());
        // ½·2(x-1)² = x² - 2x + 1 >= 0
        assert!(Potential::anisotropic_quadratic(1, &[2.0], &[-2.0], 1.0).unwrap().is_nonnegative());
        assert!(!Potential::anisotropic_quadratic(1, &[2.0], &[-2.0], 0.9).unwrap().is_nonnegative());
        // degenerate direction with a linear term is unbounded below
        assert!(!Potential::anisotropic_quadratic(2, &[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0], 5.0)
            .unwrap()
            .is_nonnegative());
        assert!(Potential::anisotropic_quadratic(2, &[1.0, 0.0, 0.0, 0.0], &[1.0, 0.0], 0.5)
            .unwrap()
            .is_nonnegative());
    }

    #[test]
    fn lemma_check_examples() {
        let grid = make_grid(1, 100.0f64, 4096).unwrap();
        let h = Potential::harmonic(&[1.0]).unwrap().grad_bound_lemma_check(&grid).unwrap();
        assert!((h.max_ratio - 1.0).abs() < 1e-12 && h.pass);
        let s = Potential::soft_linear(1).unwrap().grad_bound_lemma_check(&grid).unwrap();
        assert!(s.max_ratio <= 0.5 && s.pass);
        let z = Potential::zero(1).unwrap().grad_bound_lemma_check(&grid).unwrap();
        assert_eq!(z.max_ratio, 0.0);
        assert_eq!(z.points_used, 0);
        assert_eq!(
            Potential::stark(&[1.0]).unwrap().grad_bound_lemma_check(&grid).unwrap_err(),
            PotentialError::SignRequired
        );
        assert_eq!(
            Potential::soft_power(1, 3.0).unwrap().grad_bound_lemma_check(&grid).unwrap_err(),
            PotentialError::NotAtMostQuadratic
        );
    }

    #[test]
    fn sampled_hessian_within_declared_bound() {
        let g1 = make_grid(1, 100.0, 4096).unwrap();
        let g2 = make_grid(2, 100.0, 128).unwrap();
        for (p, g) in families_1d().into_iter().map(|p| (p, &g1)).chain(families_2d().into_iter().map(|p| (p, &g2))) {
            if let PotentialClass::AtMostQuadratic { .. } = p.class() {
                let bound = p.hessian_bound().expect("at most quadratic has a bound");
                assert!(p.sampled_hessian_max(g) <= bound * (1.0 + 1e-12), "{p}");
            } else {
                assert!(p.hessian_bound().is_none());
            }
        }
    }

    fn fd_check(p: &Potential<f64>, x: &[f64]) {
        let h = 1e-4;
        let d = p.dim();
        let e = p.eval(x);
        for i in 0..d {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            let fd = (p.value(&xp) - p.value(&xm)) / (2.0 * h);
            let scale = e.grad[i].abs().max(1.0);
            assert!((fd - e.grad[i]).abs() < 1e-6 * scale, "{p} grad {i} at {x:?}: {fd} vs {}", e.grad[i]);
            let (ep, em) = (p.eval(&xp), p.eval(&xm));
            for j in 0..d {
                let fd = (ep.grad[j] - em.grad[j]) / (2.0 * h);
                let scale = e.hess[i][j].abs().max(1.0);
                assert!((fd - e.hess[i][j]).abs() < 1e-6 * scale, "{p} hess at {x:?}");
            }
            let lap = |e: &PotentialEval<f64>| (0..d).map(|k| e.hess[k][k]).sum::<f64>();
            let fd = (lap(&ep) - lap(&em)) / (2.0 * h);
            let scale = e.grad_lap[i].abs().max(1.0);
            assert!((fd - e.grad_lap[i]).abs() < 1e-6 * scale, "{p} grad_lap at {x:?}: {fd} vs {}", e.grad_lap[i]);
        }
    }

    proptest! {
        #[test]
        fn derivatives_match_finite_differences(x in -20.0f64..20.0, y in -20.0f64..20.0) {
            for p in families_1d() {
                fd_check(&p, &[x]);
            }
            for p in families_2d() {
                fd_check(&p, &[x, y]);
            }
            fd_check(&Potential::negated_soft_power(1, 1.5).unwrap(), &[x]);
        }

        #[test]
        fn lemma_holds_for_random_nonnegative_quadratics(
            l1 in 0.0f64..5.0, l2 in 0.0f64..5.0, theta in 0.0f64..3.2,
            cx in -3.0f64..3.0, cy in -3.0f64..3.0, c0 in 0.01f64..2.0,
        ) {
            // V = ½ (x-c)ᵀ A (x-c) + c0 with A = R diag(l1,l2) Rᵀ.
            let (s, c) = theta.sin_cos();
            let a = [l1 * c * c + l2 * s * s, (l1 - l2) * s * c, (l1 - l2) * s * c, l1 * s * s + l2 * c * c];
            let b = [-(a[0] * cx + a[1] * cy), -(a[2] * cx + a[3] * cy)];
            let quad_c = 0.5 * (cx * (a[0] * cx + a[1] * cy) + cy * (a[2] * cx + a[3] * cy));
            let pot = Potential::anisotropic_quadratic(2, &a, &b, quad_c + c0).unwrap();
            prop_assert!(pot.is_nonnegative());
            let grid = make_grid(2, 100.0, 64).unwrap();
            let rep = pot.grad_bound_lemma_check(&grid).unwrap();
            prop_assert!(rep.max_ratio <= 1.0 + 1e-9, "ratio {}", rep.max_ratio);
        }

        #[test]
        fn weighted_norm_ordering(vals in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 128), w in 0.1f64..3.0) {
            // ‖f ∇V‖² <= 2‖∇²V‖∞ ‖√V f‖² for nonnegative at most quadratic V.
            let grid = make_grid(1, 6.0, 128).unwrap();
            let f = WaveField::new(grid.clone(), vals.iter().map(|&(a, b)| num_complex::Complex::new(a, b)).collect()).unwrap();
            for p in [Potential::harmonic(&[w]).unwrap(), Potential::soft_linear(1).unwrap(),
                      Potential::anisotropic_quadratic(1, &[w], &[0.5], 2.0).unwrap()] {
                let bound = p.hessian_bound().unwrap();
                let lhs = f.weighted(|x| p.eval(x).grad[0].abs()).l2_norm_sq();
                let rhs = 2.0 * bound * f.weighted(|x| p.value(x).sqrt()).l2_norm_sq();
                prop_assert!(lhs <= rhs * (1.0 + 1e-8), "{p}: {lhs} > {rhs}");
            }
        }
    }
}
