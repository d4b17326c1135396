//! Rays, eikonal phase and WKB amplitude for the linear problem.
//!
//! Rays start at rest: `x(0,y) = y`, `ξ(0,y) = 0`, and follow
//! `ẋ = ξ`, `ξ̇ = -∇V(x)`. Along them `φ̇ = ½|ξ|² - V(x)` and `ξ = ∇φ`, so
//! `φ` solves `∂ₜφ + ½|∇φ|² + V = 0` with `φ(0) = 0`. The Jacobi determinant
//! `J = det ∇_y x` comes from the variational equations
//! `(∇_y x)˙ = ∇_y ξ`, `(∇_y ξ)˙ = -∇²V(x)·∇_y x`, and the transported
//! amplitude is `ã(t,x) = u₀(y(t,x)) / √J(t, y(t,x))`.
//!
//! With this sign convention `∇φ(t,x) = -t∇V(x) + O(t²|∇V(x)|)`.

use num_complex::Complex;
use rayon::prelude::*;
use thiserror::Error;

use crate::potentials::{GuardVerdict, Potential};
use crate::scalar::Real;
use crate::spectral::{Grid, Point, WaveField, MAX_DIM};

/// Default threshold on `min_y J` that marks a caustic.
pub const CAUSTIC_EPS: f64 = 1e-6;
/// [`trace_rays`] keeps one slice every this many ODE steps.
pub const RECORD_STRIDE: usize = 10;
const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometricError {
    #[error("potential rejected: {0}")]
    GuardRejected(String),
    #[error("invalid ray-tracing parameters: {0}")]
    InvalidParams(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("time {0} is not a recorded slice of the bundle")]
    TimeNotRecorded(f64),
    #[error("time {t} is at or past the caustic at {caustic}")]
    PastCaustic { t: f64, caustic: f64 },
    #[error("point lies outside the ray coverage")]
    OutOfRange,
    #[error("flow inversion did not converge (residual {0:e})")]
    NoConvergence(f64),
}

type Mat<T> = [[T; MAX_DIM]; MAX_DIM];

/// Phase-space state of one ray together with its variational matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayState<T> {
    pub x: Point<T>,
    pub xi: Point<T>,
    /// `∇_y x`, row `i` holds `∂x_i/∂y_j`.
    pub dxdy: Mat<T>,
    /// `∇_y ξ`.
    pub dxidy: Mat<T>,
    pub phi: T,
}

impl<T: Real> RayState<T> {
    pub fn launch(y: Point<T>) -> Self {
        let z = T::zero();
        let o = T::one();
        Self { x: y, xi: [z; MAX_DIM], dxdy: [[o, z], [z, o]], dxidy: [[z; MAX_DIM]; MAX_DIM], phi: z }
    }

    pub fn jacobian(&self, d: usize) -> T {
        det(&self.dxdy, d)
    }

    fn axpy(&self, h: T, k: &Self) -> Self {
        let mut out = *self;
        for i in 0..MAX_DIM {
            out.x[i] = out.x[i] + h * k.x[i];
            out.xi[i] = out.xi[i] + h * k.xi[i];
            for j in 0..MAX_DIM {
                out.dxdy[i][j] = out.dxdy[i][j] + h * k.dxdy[i][j];
                out.dxidy[i][j] = out.dxidy[i][j] + h * k.dxidy[i][j];
            }
        }
        out.phi = out.phi + h * k.phi;
        out
    }
}

fn det<T: Real>(m: &Mat<T>, d: usize) -> T {
    if d == 1 {
        m[0][0]
    } else {
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }
}

fn norm<T: Real>(v: &Point<T>) -> T {
    (v[0] * v[0] + v[1] * v[1]).sqrt()
}

fn rhs<T: Real>(p: &Potential<T>, d: usize, s: &RayState<T>) -> RayState<T> {
    let e = p.eval(&s.x[..d]);
    let mut out = RayState { x: s.xi, xi: [-e.grad[0], -e.grad[1]], dxdy: s.dxidy, dxidy: [[T::zero(); 2]; 2], phi: T::zero() };
    for i in 0..MAX_DIM {
        for j in 0..MAX_DIM {
            out.dxidy[i][j] = -(e.hess[i][0] * s.dxdy[0][j] + e.hess[i][1] * s.dxdy[1][j]);
        }
    }
    out.phi = T::lit(0.5) * (s.xi[0] * s.xi[0] + s.xi[1] * s.xi[1]) - e.value;
    out
}

fn rk4<T: Real>(p: &Potential<T>, d: usize, s: &RayState<T>, h: T) -> RayState<T> {
    let half = T::lit(0.5) * h;
    let k1 = rhs(p, d, s);
    let k2 = rhs(p, d, &s.axpy(half, &k1));
    let k3 = rhs(p, d, &s.axpy(half, &k2));
    let k4 = rhs(p, d, &s.axpy(h, &k3));
    let sixth = h / T::lit(6.0);
    s.axpy(sixth, &k1).axpy(sixth + sixth, &k2).axpy(sixth + sixth, &k3).axpy(sixth, &k4)
}

/// Ray family launched from a set of points, sampled at a set of times.
#[derive(Debug, Clone)]
pub struct RayBundle<T: Real> {
    potential: Potential<T>,
    dim: usize,
    y: Vec<Point<T>>,
    times: Vec<T>,
    slices: Vec<Vec<RayState<T>>>,
    /// Index into `steps` of every slice.
    slice_step: Vec<usize>,
    /// End time of every ODE step, starting with 0.
    steps: Vec<T>,
    /// `min_y J` after every ODE step.
    min_jacobian: Vec<T>,
    caustic: Option<T>,
    eps_caustic: T,
}

/// Integrates rays up to `t_final` with steps no longer than `dt_ode`,
/// keeping every [`RECORD_STRIDE`]-th step. Integration stops at the first
/// step where `min_y J ≤ 10⁻⁶`; that time is kept as [`RayBundle::caustic`].
pub fn trace_rays<T: Real>(p: &Potential<T>, y: &[Point<T>], t_final: T, dt_ode: T) -> Result<RayBundle<T>, GeometricError> {
    check_time(t_final, dt_ode)?;
    let n = steps_for(t_final, dt_ode);
    let h = t_final / T::from_usize_lossy(n);
    let mut out: Vec<T> = (1..=n / RECORD_STRIDE).map(|k| T::from_usize_lossy(k * RECORD_STRIDE) * h).collect();
    if n % RECORD_STRIDE != 0 {
        out.push(t_final);
    }
    trace(p, y, &out, dt_ode)
}

/// Integrates rays and keeps exactly the requested times (plus `t = 0`).
pub fn trace_rays_at<T: Real>(p: &Potential<T>, y: &[Point<T>], times: &[T], dt_ode: T) -> Result<RayBundle<T>, GeometricError> {
    let mut out: Vec<T> = times.iter().copied().filter(|&t| t > T::zero()).collect();
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    out.dedup();
    let last = *out.last().ok_or_else(|| GeometricError::InvalidParams("no positive output time".into()))?;
    check_time(last, dt_ode)?;
    trace(p, y, &out, dt_ode)
}

fn check_time<T: Real>(t: T, dt: T) -> Result<(), GeometricError> {
    if !(t.is_finite() && t > T::zero() && dt.is_finite() && dt > T::zero()) {
        return Err(GeometricError::InvalidParams("times and dt_ode must be positive".into()));
    }
    Ok(())
}

fn steps_for<T: Real>(span: T, dt: T) -> usize {
    (((span / dt).as_f64() - 1e-9).ceil() as usize).max(1)
}

fn trace<T: Real>(p: &Potential<T>, y: &[Point<T>], outputs: &[T], dt_ode: T) -> Result<RayBundle<T>, GeometricError> {
    if let GuardVerdict::Reject(reason) = p.self_adjointness_guard() {
        return Err(GeometricError::GuardRejected(reason));
    }
    if y.is_empty() {
        return Err(GeometricError::InvalidParams("no launch points".into()));
    }
    let d = p.dim();
    let eps = T::lit(CAUSTIC_EPS);
    let mut state: Vec<RayState<T>> = y.iter().map(|&y| RayState::launch(y)).collect();
    let mut b = RayBundle {
        potential: p.clone(),
        dim: d,
        y: y.to_vec(),
        times: vec![T::zero()],
        slices: vec![state.clone()],
        slice_step: vec![0],
        steps: vec![T::zero()],
        min_jacobian: vec![T::one()],
        caustic: None,
        eps_caustic: eps,
    };
    let mut t = T::zero();
    'outer: for &target in outputs {
        let n = steps_for(target - t, dt_ode);
        let h = (target - t) / T::from_usize_lossy(n);
        let start = t;
        for k in 1..=n {
            state.par_iter_mut().for_each(|s| *s = rk4(p, d, s, h));
            let now = if k == n { target } else { start + T::from_usize_lossy(k) * h };
            let min_j = state.par_iter().map(|s| s.jacobian(d)).reduce(|| T::infinity(), T::min);
            let prev_t = *b.steps.last().expect("non-empty");
            let prev_j = *b.min_jacobian.last().expect("non-empty");
            b.steps.push(now);
            b.min_jacobian.push(min_j);
            if !(min_j > eps) {
                b.caustic = Some(crossing(prev_t, prev_j, now, min_j, eps));
                break 'outer;
            }
        }
        t = target;
        b.times.push(t);
        b.slices.push(state.clone());
        b.slice_step.push(b.steps.len() - 1);
    }
    Ok(b)
}

fn crossing<T: Real>(t0: T, j0: T, t1: T, j1: T, eps: T) -> T {
    if !(j1.is_finite()) || j0 == j1 {
        return t1;
    }
    t0 + (j0 - eps) / (j0 - j1) * (t1 - t0)
}

impl<T: Real> RayBundle<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn potential(&self) -> &Potential<T> {
        &self.potential
    }

    pub fn launch_points(&self) -> &[Point<T>] {
        &self.y
    }

    /// Recorded times; the bundle ends before the caustic if one occurred.
    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn slice(&self, idx: usize) -> &[RayState<T>] {
        &self.slices[idx]
    }

    /// `(t, min_y J)` after every ODE step.
    pub fn min_jacobian_series(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.steps.iter().copied().zip(self.min_jacobian.iter().copied())
    }

    /// Caustic time found while tracing (threshold `10⁻⁶`), if any.
    pub fn caustic(&self) -> Option<T> {
        self.caustic
    }

    pub fn eps_caustic(&self) -> T {
        self.eps_caustic
    }

    /// Index of the slice recorded at `t`.
    pub fn slice_index(&self, t: T) -> Result<usize, GeometricError> {
        let tol = T::tolerance(1e-12) * T::one().max(t.abs());
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= tol)
            .ok_or(GeometricError::TimeNotRecorded(t.as_f64()))
    }

    fn usable_slice(&self, t: T) -> Result<usize, GeometricError> {
        if let Some(c) = self.caustic {
            if t >= c {
                return Err(GeometricError::PastCaustic { t: t.as_f64(), caustic: c.as_f64() });
            }
        }
        self.slice_index(t)
    }

    /// Re-integrates the ray from `y` with the bundle's own step sequence up
    /// to slice `idx`.
    pub fn integrate_ray(&self, y: Point<T>, idx: usize) -> RayState<T> {
        let mut s = RayState::launch(y);
        let last = self.slice_step[idx];
        for w in self.steps[..=last].windows(2) {
            s = rk4(&self.potential, self.dim, &s, w[1] - w[0]);
        }
        s
    }

    /// Nearest ray (in image space) to `x` at slice `idx`.
    fn nearest(&self, idx: usize, x: &Point<T>) -> usize {
        let mut best = (0, T::infinity());
        for (i, s) in self.slices[idx].iter().enumerate() {
            let dist = (s.x[0] - x[0]).powi(2) + (s.x[1] - x[1]).powi(2);
            if dist < best.1 {
                best = (i, dist);
            }
        }
        best.0
    }

    fn in_coverage(&self, idx: usize, x: &Point<T>) -> bool {
        (0..self.dim).all(|a| {
            let (lo, hi) = self.slices[idx]
                .iter()
                .fold((T::infinity(), T::neg_infinity()), |(lo, hi), s| (lo.min(s.x[a]), hi.max(s.x[a])));
            x[a] >= lo && x[a] <= hi
        })
    }

    fn in_launch_box(&self, y: &Point<T>) -> bool {
        let slack = T::tolerance(1e-10);
        (0..self.dim).all(|a| {
            let (lo, hi) = self.y.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), p| (lo.min(p[a]), hi.max(p[a])));
            y[a] >= lo - slack && y[a] <= hi + slack
        })
    }

    /// `y` with `x(t, y) = x`, and the ray state there.
    pub fn invert_with_state(&self, t: T, x: &[T]) -> Result<(Point<T>, RayState<T>), GeometricError> {
        let d = self.dim;
        if x.len() != d {
            return Err(GeometricError::DimensionMismatch { expected: d, actual: x.len() });
        }
        let idx = self.usable_slice(t)?;
        let mut target = [T::zero(); MAX_DIM];
        target[..d].copy_from_slice(x);
        if !self.in_coverage(idx, &target) {
            return Err(GeometricError::OutOfRange);
        }
        let tol = T::tolerance(NEWTON_TOL);
        let seed = self.nearest(idx, &target);
        let (y, state, res) = self.newton(idx, self.y[seed], &target, tol);
        if res < tol {
            return if self.in_launch_box(&y) { Ok((y, state)) } else { Err(GeometricError::OutOfRange) };
        }
        if d == 1 {
            return self.bisect(idx, target[0], tol);
        }
        Err(GeometricError::NoConvergence(res.as_f64()))
    }

    /// Inverse of `y ↦ x(t, y)`.
    pub fn invert_flow(&self, t: T, x: &[T]) -> Result<Point<T>, GeometricError> {
        self.invert_with_state(t, x).map(|r| r.0)
    }

    fn newton(&self, idx: usize, y0: Point<T>, x: &Point<T>, tol: T) -> (Point<T>, RayState<T>, T) {
        let d = self.dim;
        let residual = |s: &RayState<T>| {
            let r = [s.x[0] - x[0], if d == 2 { s.x[1] - x[1] } else { T::zero() }];
            (r, norm(&r))
        };
        let mut y = y0;
        let mut s = self.integrate_ray(y, idx);
        let (mut r, mut rn) = residual(&s);
        for _ in 0..NEWTON_MAX_ITER {
            if rn < tol {
                break;
            }
            let j = det(&s.dxdy, d);
            if j == T::zero() || !j.is_finite() {
                break;
            }
            let delta = if d == 1 {
                [r[0] / j, T::zero()]
            } else {
                let m = &s.dxdy;
                [(m[1][1] * r[0] - m[0][1] * r[1]) / j, (m[0][0] * r[1] - m[1][0] * r[0]) / j]
            };
            let mut lambda = T::one();
            let mut improved = false;
            for _ in 0..12 {
                let cand = [y[0] - lambda * delta[0], y[1] - lambda * delta[1]];
                let cs = self.integrate_ray(cand, idx);
                let (cr, crn) = residual(&cs);
                if crn < rn {
                    (y, s, r, rn) = (cand, cs, cr, crn);
                    improved = true;
                    break;
                }
                lambda = lambda * T::lit(0.5);
            }
            if !improved {
                break;
            }
        }
        (y, s, rn)
    }

    /// 1D fallback: `x(t, ·)` is increasing while `J > 0`.
    fn bisect(&self, idx: usize, x: T, tol: T) -> Result<(Point<T>, RayState<T>), GeometricError> {
        let slice = &self.slices[idx];
        let mut order: Vec<usize> = (0..slice.len()).collect();
        order.sort_by(|&a, &b| self.y[a][0].partial_cmp(&self.y[b][0]).expect("finite"));
        let bracket = order
            .windows(2)
            .find(|w| slice[w[0]].x[0] <= x && x <= slice[w[1]].x[0])
            .ok_or(GeometricError::OutOfRange)?;
        let (mut lo, mut hi) = (self.y[bracket[0]][0], self.y[bracket[1]][0]);
        let mut best = None;
        for _ in 0..200 {
            let mid = T::lit(0.5) * (lo + hi);
            let s = self.integrate_ray([mid, T::zero()], idx);
            let r = s.x[0] - x;
            best = Some(([mid, T::zero()], s, r.abs()));
            if r.abs() < tol || mid <= lo || mid >= hi {
                break;
            }
            if r < T::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        match best {
            Some((y, s, r)) if r < tol * T::lit(16.0) => Ok((y, s)),
            Some((_, _, r)) => Err(GeometricError::NoConvergence(r.as_f64())),
            None => Err(GeometricError::NoConvergence(f64::NAN)),
        }
    }
}

/// Launch lattice co-located with the grid and extended by a quarter of the
/// half width on each side, so that transported rays still cover the box.
pub fn launch_points<T: Real>(grid: &Grid<T>) -> Vec<Point<T>> {
    let n = grid.points_per_axis();
    let extra = n.div_ceil(8) as isize;
    let dx = grid.spacing();
    let l = grid.half_width();
    let axis: Vec<T> = (-extra..n as isize + extra)
        .map(|i| if (0..n as isize).contains(&i) { grid.axis_points()[i as usize] } else { -l + T::lit(i as f64) * dx })
        .collect();
    match grid.dim() {
        1 => axis.iter().map(|&a| [a, T::zero()]).collect(),
        _ => axis.iter().flat_map(|&a| axis.iter().map(move |&b| [a, b])).collect(),
    }
}

/// Cubic (4-point Lagrange) interpolation of a periodic grid field.
pub fn interpolate_cubic<T: Real>(u: &WaveField<T>, y: &[T]) -> Complex<T> {
    let g = u.grid();
    let n = g.points_per_axis();
    let weights = |c: T| -> (isize, [T; 4]) {
        let s = (c + g.half_width()) / g.spacing();
        let mut i = s.floor();
        let mut f = s - i;
        let snap = T::lit(1e-9);
        if f < snap {
            f = T::zero();
        } else if T::one() - f < snap {
            f = T::zero();
            i = i + T::one();
        }
        let (one, two, six) = (T::one(), T::lit(2.0), T::lit(6.0));
        let w = [
            -f * (f - one) * (f - two) / six,
            (f + one) * (f - one) * (f - two) / two,
            -(f + one) * f * (f - two) / two,
            (f + one) * f * (f - one) / six,
        ];
        (i.to_isize().expect("finite coordinate"), w)
    };
    let wrap = |i: isize| i.rem_euclid(n as isize) as usize;
    let v = u.values();
    let (i0, w0) = weights(y[0]);
    if g.dim() == 1 {
        return (0..4).fold(Complex::new(T::zero(), T::zero()), |acc, a| acc + v[wrap(i0 + a as isize - 1)].scale(w0[a]));
    }
    let (i1, w1) = weights(y[1]);
    let mut acc = Complex::new(T::zero(), T::zero());
    for a in 0..4 {
        let row = wrap(i0 + a as isize - 1) * n;
        for b in 0..4 {
            acc = acc + v[row + wrap(i1 + b as isize - 1)].scale(w0[a] * w1[b]);
        }
    }
    acc
}

/// Phase/amplitude split of a solution at one time, on the grid of `u₀`.
#[derive(Debug, Clone)]
pub struct WkbDecomposition<T: Real> {
    pub t: T,
    pub grid: Grid<T>,
    pub phi: Vec<T>,
    pub grad_phi: Vec<Point<T>>,
    /// `u(t)·e^{-iφ}` when a solution sample was supplied.
    pub a: Option<Vec<Complex<T>>>,
    /// `u₀(y(t,x)) / √J(t, y(t,x))`.
    pub a_tilde: Vec<Complex<T>>,
    /// Preimage `y(t, x)` of every covered grid point.
    pub y: Vec<Point<T>>,
    pub covered: Vec<bool>,
    /// Covered-looking points where inversion failed to converge.
    pub failures: usize,
}

impl<T: Real> WkbDecomposition<T> {
    pub fn covered_count(&self) -> usize {
        self.covered.iter().filter(|&&c| c).count()
    }
}

/// Evaluates `φ`, `∇φ` and `ã` at every grid point of `u0` by flow inversion.
/// Points outside the ray coverage get zeros and `covered = false`.
pub fn wkb_field<T: Real>(
    b: &RayBundle<T>,
    u0: &WaveField<T>,
    t: T,
    u_t: Option<&WaveField<T>>,
) -> Result<WkbDecomposition<T>, GeometricError> {
    let grid = u0.grid().clone();
    let d = grid.dim();
    if d != b.dim {
        return Err(GeometricError::DimensionMismatch { expected: b.dim, actual: d });
    }
    if let Some(u) = u_t {
        if u.grid() != &grid {
            return Err(GeometricError::DimensionMismatch { expected: grid.len(), actual: u.grid().len() });
        }
    }
    b.usable_slice(t)?;
    let zero = Complex::new(T::zero(), T::zero());
    let per_point: Vec<_> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.point(i);
            match b.invert_with_state(t, &x[..d]) {
                Ok((y, s)) => {
                    let amp = interpolate_cubic(u0, &y[..d]) / s.jacobian(d).sqrt();
                    Ok(Some((y, s.phi, s.xi, amp)))
                }
                Err(GeometricError::OutOfRange) => Ok(None),
                Err(GeometricError::NoConvergence(_)) => Err(()),
                Err(e) => panic!("unexpected inversion error after validation: {e}"),
            }
        })
        .collect();
    let mut dec = WkbDecomposition {
        t,
        grid: grid.clone(),
        phi: vec![T::zero(); grid.len()],
        grad_phi: vec![[T::zero(); MAX_DIM]; grid.len()],
        a: None,
        a_tilde: vec![zero; grid.len()],
        y: vec![[T::zero(); MAX_DIM]; grid.len()],
        covered: vec![false; grid.len()],
        failures: 0,
    };
    for (i, r) in per_point.into_iter().enumerate() {
        match r {
            Ok(Some((y, phi, xi, amp))) => {
                dec.y[i] = y;
                dec.phi[i] = phi;
                dec.grad_phi[i] = xi;
                dec.a_tilde[i] = amp;
                dec.covered[i] = true;
            }
            Ok(None) => {}
            Err(()) => dec.failures += 1,
        }
    }
    if let Some(u) = u_t {
        dec.a = Some(
            u.values()
                .iter()
                .zip(&dec.phi)
                .map(|(z, &phi)| z * Complex::from_polar(T::one(), -phi))
                .collect(),
        );
    }
    Ok(dec)
}

/// `‖u(t)e^{-iφ} - ã‖_{L²}` over the covered points.
pub fn wkb_error<T: Real>(u_t: &WaveField<T>, dec: &WkbDecomposition<T>) -> Result<T, GeometricError> {
    if u_t.grid() != &dec.grid {
        return Err(GeometricError::DimensionMismatch { expected: dec.grid.len(), actual: u_t.grid().len() });
    }
    let s: T = u_t
        .values()
        .iter()
        .zip(&dec.phi)
        .zip(&dec.a_tilde)
        .zip(&dec.covered)
        .filter(|(_, &c)| c)
        .map(|(((z, &phi), at), _)| (z * Complex::from_polar(T::one(), -phi) - at).norm_sqr())
        .sum();
    Ok((s * dec.grid.cell_volume()).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGradientReport<T> {
    /// `max |∇φ + t∇V| / (t²|∇V|)` over all samples; 0 when none were used.
    pub max_ratio: T,
    /// `(t, max over rays)` per sampled time.
    pub per_time: Vec<(T, T)>,
    pub samples_used: usize,
}

impl<T: Real> PhaseGradientReport<T> {
    pub fn passes(&self, c_t: T) -> bool {
        self.max_ratio <= c_t
    }
}

/// Checks `|∇φ(t,x) + t∇V(x)| ≤ C t² |∇V(x)|` on the rays, where
/// `x = x(t,y)` and `∇φ = ξ(t,y)`. Points with `|∇V| < 10⁻¹⁰` are skipped.
pub fn phase_gradient_check<T: Real>(
    b: &RayBundle<T>,
    p: &Potential<T>,
    t_samples: &[T],
) -> Result<PhaseGradientReport<T>, GeometricError> {
    let d = b.dim;
    if p.dim() != d {
        return Err(GeometricError::DimensionMismatch { expected: d, actual: p.dim() });
    }
    let floor = T::lit(1e-10);
    let mut report = PhaseGradientReport { max_ratio: T::zero(), per_time: Vec::new(), samples_used: 0 };
    for &t in t_samples {
        if !(t > T::zero()) {
            return Err(GeometricError::InvalidParams("phase-gradient samples must be positive".into()));
        }
        let idx = b.usable_slice(t)?;
        let (worst, used) = b.slices[idx]
            .par_iter()
            .filter_map(|s| {
                let g = p.eval(&s.x[..d]).grad;
                let gn = norm(&g);
                (gn >= floor).then(|| {
                    let r = [s.xi[0] + t * g[0], s.xi[1] + t * g[1]];
                    norm(&r) / (t * t * gn)
                })
            })
            .fold(|| (T::zero(), 0usize), |(m, c), r| (m.max(r), c + 1))
            .reduce(|| (T::zero(), 0), |a, b| (a.0.max(b.0), a.1 + b.1));
        report.per_time.push((t, worst));
        report.max_ratio = report.max_ratio.max(worst);
        report.samples_used += used;
    }
    Ok(report)
}

/// `max |∂ₜφ + ½|∇φ|² + V|` over grid points of `grid` covered at slices
/// `idx - 1`, `idx`, `idx + 1`, with `∂ₜφ` by centered difference.
pub fn eikonal_residual<T: Real>(b: &RayBundle<T>, grid: &Grid<T>, idx: usize) -> Result<T, GeometricError> {
    if idx == 0 || idx + 1 >= b.times.len() {
        return Err(GeometricError::InvalidParams("eikonal residual needs neighbouring slices".into()));
    }
    let d = b.dim;
    if grid.dim() != d {
        return Err(GeometricError::DimensionMismatch { expected: d, actual: grid.dim() });
    }
    let (tm, t0, tp) = (b.times[idx - 1], b.times[idx], b.times[idx + 1]);
    b.usable_slice(tp)?;
    let worst = (0..grid.len())
        .into_par_iter()
        .filter_map(|i| {
            let x = grid.point(i);
            let (_, sm) = b.invert_with_state(tm, &x[..d]).ok()?;
            let (_, s0) = b.invert_with_state(t0, &x[..d]).ok()?;
            let (_, sp) = b.invert_with_state(tp, &x[..d]).ok()?;
            let dphi = (sp.phi - sm.phi) / (tp - tm);
            let v = b.potential.value(&x[..d]);
            Some((dphi + T::lit(0.5) * (s0.xi[0] * s0.xi[0] + s0.xi[1] * s0.xi[1]) + v).abs())
        })
        .reduce(|| T::zero(), T::max);
    Ok(worst)
}

/// First time with `min_y J ≤ eps` (linear interpolation between ODE steps),
/// or `None` if the traced interval has none.
pub fn caustic_time<T: Real>(b: &RayBundle<T>, eps: T) -> Option<T> {
    let series: Vec<(T, T)> = b.min_jacobian_series().collect();
    if series[0].1 <= eps {
        return Some(T::zero());
    }
    series.windows(2).find(|w| !(w[1].1 > eps)).map(|w| crossing(w[0].0, w[0].1, w[1].0, w[1].1, eps))
}
