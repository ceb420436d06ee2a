//! Fields along geodesics normal to orbits.
//!
//! Everything is expressed in a parallel orthonormal frame `E(t)` of
//! `T_{γ(t)}M`: covariant derivatives become ordinary derivatives of
//! coordinates and, on the supported symmetric models, the Jacobi operator
//! `K = R(·, γ')γ'` is a constant matrix. Jacobi fields therefore have a
//! closed form `Y(t) = C(t) Y(0) + S(t) Y'(0)`; RK4 is kept as a cross-check.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

use crate::linalg::{self, random_normal, random_unit, Subspace, Tolerances};
use crate::manifold::ModelKind;
use crate::polarity::{Action, PolarityError};
use crate::scalar::Real;
use crate::seeded;
use crate::weyl::{quotient_distance, OptimizerConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransversalError {
    #[error(transparent)]
    Polarity(#[from] PolarityError),
    #[error("direction is not a unit normal to the orbit (residual {residual:e})")]
    NotNormal { residual: f64 },
    #[error("the action is transitive here: no normal direction")]
    NoNormalDirection,
    #[error("step {h} rejected (must lie in (0, 1e-2])")]
    StepRejected { h: f64 },
    #[error("interval [{a}, {b}] is empty")]
    Interval { a: f64, b: f64 },
    #[error("vertical rank changes from {expected} to {got} at t = {t}")]
    RankJump { expected: usize, got: usize, t: f64 },
    #[error("no normal direction with nonzero Weingarten spectrum after {draws} draws")]
    NoGenericDirection { draws: usize },
    #[error("index form unstable under refinement: {coarse} vs {fine} negative directions")]
    IndexUnstable { coarse: usize, fine: usize },
    #[error("window [{lo}, {hi}] leaves the integration interval")]
    Window { lo: f64, hi: f64 },
    #[error("{0}")]
    Inapplicable(String),
}

/// Largest accepted grid step.
pub const MAX_STEP: f64 = 1e-2;
/// Singular values below this (relative to the field scale) count as zero
/// when reading off focal and conjugate multiplicities.
pub const MULTIPLICITY_CUTOFF: f64 = 1e-7;

fn check_step<T: Real>(a: T, b: T, h: T) -> Result<usize, TransversalError> {
    if !(h > T::zero()) || h > T::lit(MAX_STEP) {
        return Err(TransversalError::StepRejected { h: h.as_f64() });
    }
    if !(b > a) {
        return Err(TransversalError::Interval { a: a.as_f64(), b: b.as_f64() });
    }
    Ok(((b - a) / h - T::lit(1e-9)).ceil().to_usize().unwrap_or(1).max(1))
}

/// Moore-Penrose pseudo-inverse with a relative cutoff.
fn pinv<T: Real>(m: &DMatrix<T>, rel: T) -> DMatrix<T> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DMatrix::zeros(m.ncols(), m.nrows());
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(T::zero(), |a, b| a.max(b));
    let thr = (smax * rel).max(T::lit(1e-300));
    let u = svd.u.expect("u");
    let vt = svd.v_t.expect("v_t");
    let mut out = DMatrix::zeros(m.ncols(), m.nrows());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > thr {
            out += vt.row(i).transpose() * u.column(i).transpose() / s;
        }
    }
    out
}

/// `M (M^T M)^{-1/2}`: the nearest matrix with orthonormal columns.
fn polar_factor<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    if m.ncols() == 0 {
        return m.clone();
    }
    let g = m.transpose() * m;
    let e = g.symmetric_eigen();
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(|x| T::one() / x.max(T::lit(1e-300)).sqrt()));
    m * (&e.eigenvectors * d * e.eigenvectors.transpose())
}

/// `cos(sqrt(k) t)` and `sin(sqrt(k) t) / sqrt(k)`, continued to `k <= 0`.
fn cs<T: Real>(k: T, t: T) -> (T, T) {
    let x = k * t * t;
    if x.abs() < T::lit(1e-10) {
        let c = T::one() - x * T::lit(0.5) + x * x / T::lit(24.0);
        let s = t * (T::one() - x / T::lit(6.0) + x * x / T::lit(120.0));
        (c, s)
    } else if k > T::zero() {
        let w = k.sqrt();
        ((w * t).cos(), (w * t).sin() / w)
    } else {
        let w = (-k).sqrt();
        ((w * t).cosh(), (w * t).sinh() / w)
    }
}

/// Closed-form flow of `y'' + K y = 0` for a constant symmetric `K`.
#[derive(Debug, Clone)]
pub struct JacobiFlow<T: Real> {
    k: DMatrix<T>,
    u: DMatrix<T>,
    kappa: Vec<T>,
}

impl<T: Real> JacobiFlow<T> {
    pub fn new(k: &DMatrix<T>) -> Self {
        let sym = (k + k.transpose()) * T::lit(0.5);
        let e = sym.clone().symmetric_eigen();
        Self { k: sym, u: e.eigenvectors, kappa: e.eigenvalues.iter().copied().collect() }
    }

    /// `(C(t), S(t))` with `C(0) = I, C'(0) = 0, S(0) = 0, S'(0) = I`.
    pub fn propagators(&self, t: T) -> (DMatrix<T>, DMatrix<T>) {
        let n = self.kappa.len();
        let mut c = DVector::zeros(n);
        let mut s = DVector::zeros(n);
        for (i, &k) in self.kappa.iter().enumerate() {
            let (ci, si) = cs(k, t);
            c[i] = ci;
            s[i] = si;
        }
        let ut = self.u.transpose();
        (&self.u * DMatrix::from_diagonal(&c) * &ut, &self.u * DMatrix::from_diagonal(&s) * &ut)
    }

    /// Values and derivatives at `t` of the fields with initial data
    /// `(y0, y0')` (columns).
    pub fn solve(&self, t: T, y0: &DMatrix<T>, d0: &DMatrix<T>) -> (DMatrix<T>, DMatrix<T>) {
        let (c, s) = self.propagators(t);
        let y = &c * y0 + &s * d0;
        let dy = -(&self.k * &s) * y0 + &c * d0;
        (y, dy)
    }

    pub fn operator(&self) -> &DMatrix<T> {
        &self.k
    }
}

/// Classic RK4 for `y'' = -K(t) y` with `K` supplied at `t`, `t + h/2`,
/// `t + h`.
fn rk4_step<T: Real>(y: &DMatrix<T>, dy: &DMatrix<T>, h: T, k0: &DMatrix<T>, km: &DMatrix<T>, k1: &DMatrix<T>) -> (DMatrix<T>, DMatrix<T>) {
    let half = h * T::lit(0.5);
    let a1 = dy.clone();
    let b1 = -(k0 * y);
    let y2 = y + &a1 * half;
    let a2 = dy + &b1 * half;
    let b2 = -(km * &y2);
    let y3 = y + &a2 * half;
    let a3 = dy + &b2 * half;
    let b3 = -(km * &y3);
    let y4 = y + &a3 * h;
    let a4 = dy + &b3 * h;
    let b4 = -(k1 * &y4);
    let sixth = h / T::lit(6.0);
    let two = T::lit(2.0);
    (
        y + (&a1 + &a2 * two + &a3 * two + &a4) * sixth,
        dy + (&b1 + &b2 * two + &b3 * two + &b4) * sixth,
    )
}

/// A unit-speed geodesic leaving the orbit through `p` orthogonally.
#[derive(Debug, Clone)]
pub struct OrbitGeodesic<T: Real> {
    action: Action<T>,
    p: DVector<T>,
    xi: DVector<T>,
    frame0: DMatrix<T>,
    tn: Subspace<T>,
    nu: Subspace<T>,
    shape: DMatrix<T>,
    flow: JacobiFlow<T>,
    /// Coefficients of independent Killing fields (columns).
    killing_basis: DMatrix<T>,
    tol: Tolerances,
}

impl<T: Real> OrbitGeodesic<T> {
    pub fn new(action: &Action<T>, p: &DVector<T>, xi: &DVector<T>, tol: &Tolerances) -> Result<Self, TransversalError> {
        let m = action.manifold();
        let off = m.residual(p);
        if off > T::lit(1e-8) {
            return Err(PolarityError::OffManifold { residual: off.as_f64() }.into());
        }
        let tangent_off = (xi - m.tangent_project(p, xi)).norm();
        let unit_off = (xi.norm() - T::one()).abs();
        let kp = action.killing(p);
        let normal_off = (kp.transpose() * xi).iter().fold(T::zero(), |a, &b| a.max(b.abs())) / kp.norm().max(T::one());
        let worst = tangent_off.max(unit_off).max(normal_off);
        if worst > T::lit(1e-10) {
            return Err(TransversalError::NotNormal { residual: worst.as_f64() });
        }
        let rel = T::lit(tol.rank);
        let frame0 = m.tangent_space(p).basis().clone();
        let tn = action.orbit_tangent(p, tol);
        let nu = action.normal_space(p, tol);
        // S(A p) = -P_TN(A xi), well defined because xi is normal.
        let kx = DMatrix::from_fn(kp.nrows(), kp.ncols(), |r, c| (&action.rep().generators()[c] * xi)[r]);
        let coeffs = pinv(&kp, rel) * tn.basis();
        let s = -(tn.basis().transpose() * &kx * coeffs);
        let shape = (&s + s.transpose()) * T::lit(0.5);
        let flow = JacobiFlow::new(&m.jacobi_operator(p, xi, &frame0));
        let g = kp.ncols();
        let killing_basis = if g == 0 {
            DMatrix::zeros(0, 0)
        } else {
            let mut stacked = DMatrix::zeros(2 * frame0.ncols(), g);
            stacked.view_mut((0, 0), (frame0.ncols(), g)).copy_from(&(frame0.transpose() * &kp));
            stacked.view_mut((frame0.ncols(), 0), (frame0.ncols(), g)).copy_from(&(frame0.transpose() * &kx));
            // right singular vectors of the nonzero singular values
            let kernel = linalg::null_space(&stacked, rel);
            Subspace::from_orthonormal(kernel).complement(rel).basis().clone()
        };
        Ok(Self { action: action.clone(), p: p.clone(), xi: xi.clone(), frame0, tn, nu, shape, flow, killing_basis, tol: *tol })
    }

    /// Seeded regular point and seeded unit normal direction.
    pub fn from_seed(action: &Action<T>, seed: u64, tol: &Tolerances) -> Result<Self, TransversalError> {
        let p = action.find_regular_point(seed, tol);
        let nu = action.normal_space(&p, tol);
        if nu.is_empty() {
            return Err(TransversalError::NoNormalDirection);
        }
        let xi = nu.embed(&random_unit(&mut seeded(seed, 1), nu.dim()));
        Self::new(action, &p, &xi, tol)
    }

    pub fn action(&self) -> &Action<T> {
        &self.action
    }

    pub fn base_point(&self) -> &DVector<T> {
        &self.p
    }

    pub fn direction(&self) -> &DVector<T> {
        &self.xi
    }

    /// Dimension of the manifold (size of frame coordinates).
    pub fn dim(&self) -> usize {
        self.frame0.ncols()
    }

    pub fn orbit_tangent(&self) -> &Subspace<T> {
        &self.tn
    }

    /// Normal space of the orbit at `p` inside `T_p M`.
    pub fn normal_space(&self) -> &Subspace<T> {
        &self.nu
    }

    /// Shape operator `S_ξ` in the basis of [`Self::orbit_tangent`].
    pub fn shape_operator(&self) -> &DMatrix<T> {
        &self.shape
    }

    pub fn flow(&self) -> &JacobiFlow<T> {
        &self.flow
    }

    /// `(γ(t), γ'(t))` in ambient coordinates.
    pub fn point(&self, t: T) -> (DVector<T>, DVector<T>) {
        self.action.manifold().geodesic(&self.p, &self.xi, t)
    }

    /// Parallel frame at `t` (ambient × dim).
    pub fn frame(&self, t: T) -> DMatrix<T> {
        self.action.manifold().transport_frame(&self.p, &self.xi, t, &self.frame0)
    }

    /// Initial data `(J(0), J'(0))` (columns, frame coordinates) of a basis
    /// of the N-Jacobi fields: `(u, -S u)` for `u ∈ T_pN` and `(0, w)` for
    /// `w ∈ ν_pN`.
    pub fn n_jacobi_space(&self) -> (DMatrix<T>, DMatrix<T>) {
        let n = self.dim();
        let mut y0 = DMatrix::zeros(n, n);
        let mut d0 = DMatrix::zeros(n, n);
        let et = self.frame0.transpose();
        let t = self.tn.dim();
        let su = self.tn.basis() * &self.shape;
        for j in 0..t {
            y0.set_column(j, &(&et * self.tn.vector(j)));
            d0.set_column(j, &-(&et * su.column(j)));
        }
        for (j, w) in self.nu.vectors().iter().enumerate() {
            d0.set_column(t + j, &(&et * w));
        }
        (y0, d0)
    }

    /// Killing fields `A_i γ(t)` and their covariant derivatives
    /// `A_i γ'(t)` in frame coordinates (one column per generator).
    pub fn killing(&self, t: T) -> (DMatrix<T>, DMatrix<T>) {
        let (x, dx) = self.point(t);
        let e = self.frame(t);
        let gens = self.action.rep().generators();
        let mut v = DMatrix::zeros(self.dim(), gens.len());
        let mut d = DMatrix::zeros(self.dim(), gens.len());
        for (i, a) in gens.iter().enumerate() {
            v.set_column(i, &(e.transpose() * (a * &x)));
            d.set_column(i, &(e.transpose() * (a * &dx)));
        }
        (v, d)
    }

    /// Independent Killing restrictions `Z(t)`, `Z'(t)` (the space Υ).
    pub fn upsilon(&self, t: T) -> (DMatrix<T>, DMatrix<T>) {
        if self.killing_basis.ncols() == 0 {
            return (DMatrix::zeros(self.dim(), 0), DMatrix::zeros(self.dim(), 0));
        }
        let (v, d) = self.killing(t);
        (&v * &self.killing_basis, &d * &self.killing_basis)
    }

    pub fn upsilon_dim(&self) -> usize {
        self.killing_basis.ncols()
    }

    /// Orthonormal basis of the Killing restrictions as grid functions
    /// (frame coordinates stacked over the sampled times).
    pub fn killing_restrictions(&self, times: &[T]) -> Subspace<T> {
        let n = self.dim();
        let g = self.action.rep().generators().len();
        let mut m = DMatrix::zeros(n * times.len(), g);
        for (k, &t) in times.iter().enumerate() {
            m.view_mut((k * n, 0), (n, g)).copy_from(&self.killing(t).0);
        }
        Subspace::column_span(&m, T::lit(self.tol.rank))
    }

    /// Orthonormal basis (frame coordinates) of `V_t`: `Z(t)` with
    /// directions where `Z` degenerates replaced by the matching
    /// combinations of `Z'(t)`.
    pub fn vertical_basis(&self, t: T) -> DMatrix<T> {
        let (z, zd) = self.upsilon(t);
        vertical_from(&z, &zd)
    }

    pub fn vertical_projector(&self, t: T) -> DMatrix<T> {
        let w = self.vertical_basis(t);
        &w * w.transpose()
    }

    /// `A_t = Q'Q - QQ'` with `Q' = P Z' Z⁺ + (P Z' Z⁺)^T`; near times where
    /// `Z` degenerates, the average of the two neighbours.
    pub fn a_tensor(&self, t: T) -> DMatrix<T> {
        let (z, zd) = self.upsilon(t);
        let n = self.dim();
        if z.ncols() == 0 {
            return DMatrix::zeros(n, n);
        }
        let sv = linalg::singular_values(&z);
        let cond = sv.last().copied().unwrap_or_else(T::zero) / sv[0].max(T::lit(1e-300));
        if cond >= T::lit(1e-6) {
            return a_from(&z, &zd);
        }
        let mut delta = T::lit(1e-4);
        for _ in 0..4 {
            let (zl, zdl) = self.upsilon(t - delta);
            let (zr, zdr) = self.upsilon(t + delta);
            let ok = |z: &DMatrix<T>| {
                let s = linalg::singular_values(z);
                s.last().copied().unwrap_or_else(T::zero) / s[0].max(T::lit(1e-300)) >= T::lit(1e-6)
            };
            if ok(&zl) && ok(&zr) {
                return (a_from(&zl, &zdl) + a_from(&zr, &zdr)) * T::lit(0.5);
            }
            delta *= T::lit(10.0);
        }
        a_from(&z, &zd)
    }

    /// `A_t` from a five-point central difference of the vertical projector.
    pub fn a_tensor_fd(&self, t: T, h: T) -> DMatrix<T> {
        let q = |s: T| self.vertical_projector(s);
        let dq = (q(t - h - h) - q(t - h) * T::lit(8.0) + q(t + h) * T::lit(8.0) - q(t + h + h)) / (T::lit(12.0) * h);
        let q0 = q(t);
        &dq * &q0 - &q0 * &dq
    }
}

fn vertical_from<T: Real>(z: &DMatrix<T>, zd: &DMatrix<T>) -> DMatrix<T> {
    let (n, r) = z.shape();
    if r == 0 {
        return DMatrix::zeros(n, 0);
    }
    let svd = z.clone().svd(true, true);
    let u = svd.u.expect("u");
    let vt = svd.v_t.expect("v_t");
    let scale = z.norm().max(zd.norm()).max(T::lit(1e-300));
    let mut cols = Vec::with_capacity(r);
    for (j, &s) in svd.singular_values.iter().enumerate() {
        if s > T::lit(1e-8) * scale {
            cols.push(u.column(j).into_owned());
        } else {
            cols.push(zd * vt.row(j).transpose());
        }
    }
    linalg::orthonormalize_columns(&linalg::from_columns(n, &cols), T::lit(1e-9))
}

fn a_from<T: Real>(z: &DMatrix<T>, zd: &DMatrix<T>) -> DMatrix<T> {
    let n = z.nrows();
    let zp = pinv(z, T::lit(1e-12));
    let q = z * &zp;
    let p = DMatrix::identity(n, n) - &q;
    let half = &p * zd * &zp;
    let dq = &half + half.transpose();
    &dq * &q - &q * &dq
}

/// A time where a matrix family of fields drops rank.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalTime<T: Real> {
    pub t: T,
    pub multiplicity: usize,
    /// Smallest singular value at `t`, relative to the field scale.
    pub sigma: T,
    /// Found at the right end of the interval.
    pub endpoint: bool,
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
fn golden<T: Real>(mut lo: T, mut hi: T, f: impl Fn(T) -> T) -> T {
    let r = T::lit(0.618_033_988_749_894_9);
    let mut x1 = hi - (hi - lo) * r;
    let mut x2 = lo + (hi - lo) * r;
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo <= T::lit(1e-13) * (T::one() + hi.abs()) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - (hi - lo) * r;
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + (hi - lo) * r;
            f2 = f(x2);
        }
    }
    (lo + hi) * T::lit(0.5)
}

/// Relative singular values `σ / max(1, σ_max)`, ascending.
fn rel_sv<T: Real>(m: &DMatrix<T>) -> Vec<T> {
    let mut sv = linalg::singular_values(m);
    let scale = sv.first().copied().unwrap_or_else(T::one).max(T::one());
    sv.iter_mut().for_each(|s| *s /= scale);
    sv.reverse();
    sv
}

/// Scans `σ_min(F(t))` on `times` for local minima after `skip` samples,
/// refines them and keeps the ones where `F` is singular.
fn scan_critical<T: Real>(times: &[T], skip: usize, f: impl Fn(T) -> DMatrix<T>) -> Vec<CriticalTime<T>> {
    let smin = |t: T| rel_sv(&f(t)).first().copied().unwrap_or_else(T::one);
    let s: Vec<T> = times.iter().map(|&t| smin(t)).collect();
    let cut = T::lit(MULTIPLICITY_CUTOFF);
    let mut out: Vec<CriticalTime<T>> = Vec::new();
    let last = times.len() - 1;
    for k in skip.max(1)..last {
        if s[k] <= s[k - 1] && s[k] < s[k + 1] && s[k] < T::lit(0.05) {
            let t = golden(times[k - 1], times[k + 1], smin);
            let sv = rel_sv(&f(t));
            if sv[0] < cut {
                let multiplicity = sv.iter().filter(|&&x| x < cut).count();
                if out.last().is_none_or(|c| (c.t - t).abs() > T::lit(1e-9)) {
                    out.push(CriticalTime { t, multiplicity, sigma: sv[0], endpoint: false });
                }
            }
        }
    }
    if s[last] < s[last - 1] {
        let sv = rel_sv(&f(times[last]));
        if sv[0] < T::lit(1e-5) {
            let multiplicity = sv.iter().filter(|&&x| x < T::lit(1e-5)).count();
            out.push(CriticalTime { t: times[last], multiplicity, sigma: sv[0], endpoint: true });
        }
    }
    out
}

fn grid<T: Real>(a: T, b: T, h: T) -> Result<(Vec<T>, T), TransversalError> {
    let n = check_step(a, b, h)?;
    let step = (b - a) / T::from_usize(n).expect("usize fits");
    Ok(((0..=n).map(|k| a + step * T::from_usize(k).expect("usize fits")).collect(), step))
}

/// Focal times of the orbit along the geodesic in `(a, b]`: zeros of the
/// N-Jacobi matrix solution.
pub fn focal_points<T: Real>(geod: &OrbitGeodesic<T>, a: T, b: T, h: T) -> Result<Vec<CriticalTime<T>>, TransversalError> {
    let (times, _) = grid(a, b, h)?;
    let (y0, d0) = geod.n_jacobi_space();
    Ok(scan_critical(&times, 2, |t| geod.flow.solve(t, &y0, &d0).0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VcReport<T: Real> {
    pub holds: bool,
    /// Largest principal angle between a vanishing N-Jacobi field and the
    /// span of Killing restrictions.
    pub worst_angle: T,
    pub focal: Vec<(CriticalTime<T>, T)>,
}

/// At each focal time the N-Jacobi fields vanishing there must be Killing
/// restrictions (compared as grid functions).
pub fn variational_completeness_probe<T: Real>(
    geod: &OrbitGeodesic<T>,
    a: T,
    b: T,
    h: T,
    tol: &Tolerances,
) -> Result<VcReport<T>, TransversalError> {
    let focal = focal_points(geod, a, b, h)?;
    let (times, _) = grid(a, b, h)?;
    let stride = (times.len() / 200).max(1);
    let sample: Vec<T> = times.iter().step_by(stride).copied().collect();
    let killing = geod.killing_restrictions(&sample);
    let (y0, d0) = geod.n_jacobi_space();
    let n = geod.dim();
    let mut worst = T::zero();
    let mut rows = Vec::new();
    for c in focal {
        let y = geod.flow.solve(c.t, &y0, &d0).0;
        let svd = y.clone().svd(false, true);
        let vt = svd.v_t.expect("v_t");
        let scale = svd.singular_values.iter().copied().fold(T::one(), |a, b| a.max(b));
        let ker: Vec<DVector<T>> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] < T::lit(MULTIPLICITY_CUTOFF) * scale)
            .map(|i| vt.row(i).transpose())
            .collect();
        let kd = linalg::from_columns(n, &ker);
        let (ky0, kd0) = (&y0 * &kd, &d0 * &kd);
        let mut gm = DMatrix::zeros(n * sample.len(), ker.len());
        for (k, &t) in sample.iter().enumerate() {
            gm.view_mut((k * n, 0), (n, ker.len())).copy_from(&geod.flow.solve(t, &ky0, &kd0).0);
        }
        let fields = Subspace::column_span(&gm, T::lit(tol.rank));
        let angle = killing.containment_residual(&fields).min(T::one()).asin();
        worst = worst.max(angle);
        rows.push((c, angle));
    }
    Ok(VcReport { holds: worst < T::lit(1e-6), worst_angle: worst, focal: rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscalaReport<T: Real> {
    pub xi: DVector<T>,
    pub eigenvalues: Vec<T>,
    /// Per eigenfield: sup over the grid of the distance of `(1 - λ s) u`
    /// from the orbit tangent space at `γ(s)`.
    pub tangency: Vec<T>,
    pub worst_tangency: T,
    /// Largest principal angle between `T_pN` and `T_qN` at `q = γ(s1)`.
    pub tangent_angle: T,
    pub s1: T,
    pub draws: usize,
    pub holds: bool,
}

/// For a linear action: every eigenfield `J(s) = (1 - λ s) u` of the
/// Weingarten operator must stay tangent to the orbits along `γ`.
pub fn discala_olmos_probe<T: Real>(
    action: &Action<T>,
    p: &DVector<T>,
    seed: u64,
    tol: &Tolerances,
) -> Result<DiscalaReport<T>, TransversalError> {
    if action.manifold().kind() != ModelKind::Euclidean {
        return Err(TransversalError::Inapplicable("the eigenfield test is formulated for linear actions".into()));
    }
    let nu = action.normal_space(p, tol);
    if nu.is_empty() {
        return Err(TransversalError::NoNormalDirection);
    }
    const DRAWS: usize = 64;
    for draw in 0..DRAWS {
        let xi = nu.embed(&random_unit(&mut seeded(seed, draw as u64), nu.dim()));
        let geod = OrbitGeodesic::new(action, p, &xi, tol)?;
        if geod.tn.is_empty() {
            // point orbit: no eigenfields to test
            return Ok(DiscalaReport {
                xi,
                eigenvalues: Vec::new(),
                tangency: Vec::new(),
                worst_tangency: T::zero(),
                tangent_angle: T::zero(),
                s1: T::zero(),
                draws: draw + 1,
                holds: true,
            });
        }
        let eig = geod.shape.clone().symmetric_eigen();
        let lam: Vec<T> = eig.eigenvalues.iter().copied().collect();
        if lam.is_empty() || lam.iter().any(|l| l.abs() < T::lit(1e-6)) {
            continue;
        }
        let lmax = lam.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
        let s_max = T::lit(1.5) / lmax;
        let steps = 300;
        let mut tangency = Vec::with_capacity(lam.len());
        for (j, &l) in lam.iter().enumerate() {
            let u = geod.tn.basis() * eig.eigenvectors.column(j);
            let mut worst = T::zero();
            for k in 0..=steps {
                let s = s_max * T::from_usize(k).unwrap() / T::from_usize(steps).unwrap();
                let x = p + &xi * s;
                let jv = &u * (T::one() - l * s);
                let tangent = action.orbit_tangent(&x, tol);
                worst = worst.max(tangent.residual(&jv));
            }
            tangency.push(worst);
        }
        let positive = lam.iter().filter(|&&l| l > T::zero()).fold(T::zero(), |a, &b| a.max(b));
        let s1 = T::lit(0.37) / if positive > T::zero() { positive } else { lmax };
        let q = p + &xi * s1;
        let tq = action.orbit_tangent(&q, tol);
        let tangent_angle = geod.tn.max_principal_angle(&tq);
        let worst_tangency = tangency.iter().copied().fold(T::zero(), |a, b| a.max(b));
        let holds = worst_tangency < T::lit(1e-8) && tangent_angle < T::lit(1e-8);
        return Ok(DiscalaReport { xi, eigenvalues: lam, tangency, worst_tangency, tangent_angle, s1, draws: draw + 1, holds });
    }
    Err(TransversalError::NoGenericDirection { draws: DRAWS })
}

/// `ω(J1, J2) = <J1', J2> - <J1, J2'>` at one time, frame coordinates.
pub fn symplectic_form<T: Real>(j1: &DVector<T>, dj1: &DVector<T>, j2: &DVector<T>, dj2: &DVector<T>) -> T {
    dj1.dot(j2) - j1.dot(dj2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymplecticReport<T: Real> {
    /// `max_t |ω(t) - ω(a)|` for a seeded pair of Jacobi fields.
    pub drift: T,
    pub lambda_max: T,
    pub upsilon_max: T,
}

pub fn symplectic_check<T: Real>(geod: &OrbitGeodesic<T>, a: T, b: T, h: T, seed: u64) -> Result<SymplecticReport<T>, TransversalError> {
    let (times, _) = grid(a, b, h)?;
    let n = geod.dim();
    let mut rng = seeded(seed, 3);
    let r0 = DMatrix::from_fn(n, 2, |_, _| T::lit(rng.sample::<f64, _>(rand_distr::StandardNormal)));
    let r1 = DMatrix::from_fn(n, 2, |_, _| T::lit(rng.sample::<f64, _>(rand_distr::StandardNormal)));
    let (y0, d0) = geod.n_jacobi_space();
    let omega_max = |y: &DMatrix<T>, d: &DMatrix<T>| {
        let w = d.transpose() * y - y.transpose() * d;
        linalg::max_abs(&w)
    };
    let mut report = SymplecticReport { drift: T::zero(), lambda_max: T::zero(), upsilon_max: T::zero() };
    let mut w0 = None;
    for &t in &times {
        let (y, d) = geod.flow.solve(t, &r0, &r1);
        let w = symplectic_form(&y.column(0).into_owned(), &d.column(0).into_owned(), &y.column(1).into_owned(), &d.column(1).into_owned());
        let base = *w0.get_or_insert(w);
        report.drift = report.drift.max((w - base).abs());
        let (ly, ld) = geod.flow.solve(t, &y0, &d0);
        report.lambda_max = report.lambda_max.max(omega_max(&ly, &ld));
        let (uy, ud) = geod.killing(t);
        if uy.ncols() > 0 {
            report.upsilon_max = report.upsilon_max.max(omega_max(&uy, &ud));
        }
    }
    Ok(report)
}

/// Bundles, A-tensor and the ∇^h-parallel horizontal frame sampled on a
/// half-step grid `t_j = a + j h / 2`.
#[derive(Debug, Clone)]
pub struct TransversalSystem<T: Real> {
    geod: OrbitGeodesic<T>,
    a: T,
    h: T,
    steps: usize,
    rank: usize,
    projectors: Vec<DMatrix<T>>,
    atensor: Vec<DMatrix<T>>,
    frames: Vec<DMatrix<T>>,
    rcal: Vec<DMatrix<T>>,
}

/// Sub-steps per half step in the horizontal frame construction.
const FRAME_SUBSTEPS: usize = 4;

impl<T: Real> TransversalSystem<T> {
    pub fn build(geod: &OrbitGeodesic<T>, a: T, b: T, h: T) -> Result<Self, TransversalError> {
        let (_, step) = grid(a, b, h)?;
        let steps = check_step(a, b, h)?;
        let n = geod.dim();
        let r = geod.upsilon_dim();
        let half = step * T::lit(0.5);
        let count = 2 * steps + 1;
        let k = geod.flow.operator().clone();
        let mut projectors = Vec::with_capacity(count);
        let mut atensor = Vec::with_capacity(count);
        let mut frames = Vec::with_capacity(count);
        let mut rcal = Vec::with_capacity(count);
        let w0 = geod.vertical_basis(a);
        let mut e = Subspace::from_orthonormal(w0).complement(T::lit(1e-9)).basis().clone();
        for j in 0..count {
            let t = a + half * T::from_usize(j).unwrap();
            if j > 0 {
                let dt = half / T::from_usize(FRAME_SUBSTEPS).unwrap();
                for s in 1..=FRAME_SUBSTEPS {
                    let ts = t - half + dt * T::from_usize(s).unwrap();
                    let p = DMatrix::identity(n, n) - geod.vertical_projector(ts);
                    e = polar_factor(&(p * &e));
                }
            }
            let w = geod.vertical_basis(t);
            if w.ncols() != r {
                return Err(TransversalError::RankJump { expected: r, got: w.ncols(), t: t.as_f64() });
            }
            let q = &w * w.transpose();
            let at = geod.a_tensor(t);
            let rc = e.transpose() * (&k + at.transpose() * &at * T::lit(3.0)) * &e;
            projectors.push(q);
            frames.push(e.clone());
            rcal.push((&rc + rc.transpose()) * T::lit(0.5));
            atensor.push(at);
        }
        Ok(Self { geod: geod.clone(), a, h: step, steps, rank: r, projectors, atensor, frames, rcal })
    }

    pub fn geodesic(&self) -> &OrbitGeodesic<T> {
        &self.geod
    }

    pub fn step(&self) -> T {
        self.h
    }

    /// Rank of the vertical bundle.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn horizontal_dim(&self) -> usize {
        self.geod.dim() - self.rank
    }

    /// Integer grid `a + k h`.
    pub fn times(&self) -> Vec<T> {
        (0..=self.steps).map(|k| self.a + self.h * T::from_usize(k).unwrap()).collect()
    }

    fn half_time(&self, j: usize) -> T {
        self.a + self.h * T::lit(0.5) * T::from_usize(j).unwrap()
    }

    /// `ℛ` at half-grid index `j`, in the horizontal frame.
    pub fn curvature_operator(&self, j: usize) -> &DMatrix<T> {
        &self.rcal[j]
    }

    pub fn horizontal_frame(&self, j: usize) -> &DMatrix<T> {
        &self.frames[j]
    }

    pub fn a_tensor_at(&self, j: usize) -> &DMatrix<T> {
        &self.atensor[j]
    }

    pub fn half_grid_len(&self) -> usize {
        self.rcal.len()
    }

    /// Linear interpolation of `ℛ` at an arbitrary time.
    fn rcal_at(&self, t: T) -> DMatrix<T> {
        let u = ((t - self.a) / (self.h * T::lit(0.5))).max(T::zero());
        let j = u.floor().to_usize().unwrap_or(0).min(self.rcal.len() - 2);
        let w = (u - T::from_usize(j).unwrap()).min(T::one());
        &self.rcal[j] * (T::one() - w) + &self.rcal[j + 1] * w
    }

    /// Pointwise invariants over the half grid.
    pub fn invariants(&self) -> BundleInvariants<T> {
        let mut inv = BundleInvariants {
            antisymmetry: T::zero(),
            block_diagonal: T::zero(),
            frame_vertical: T::zero(),
            frame_orthonormality: T::zero(),
            min_curvature_eigenvalue: T::max_value().unwrap_or_else(|| T::lit(f64::MAX)),
        };
        let n = self.geod.dim();
        for j in 0..self.rcal.len() {
            let a = &self.atensor[j];
            let q = &self.projectors[j];
            let p = DMatrix::identity(n, n) - q;
            inv.antisymmetry = inv.antisymmetry.max(linalg::max_abs(&(a + a.transpose())));
            inv.block_diagonal = inv.block_diagonal.max(linalg::max_abs(&(q * a * q)).max(linalg::max_abs(&(&p * a * &p))));
            let e = &self.frames[j];
            inv.frame_vertical = inv.frame_vertical.max(linalg::max_abs(&(q * e)));
            inv.frame_orthonormality = inv
                .frame_orthonormality
                .max(linalg::max_abs(&(e.transpose() * e - DMatrix::identity(e.ncols(), e.ncols()))));
            if self.rcal[j].nrows() > 0 {
                let ev = self.rcal[j].clone().symmetric_eigen().eigenvalues;
                inv.min_curvature_eigenvalue = inv.min_curvature_eigenvalue.min(ev.min());
            }
        }
        inv
    }

    /// `max |Q J̃' + A J̃|` over N-Jacobi fields `J`, where `J̃ = J - V` and
    /// `V ∈ Υ` has `V(t) = Q J(t)` (so `J̃(t)` is horizontal).
    pub fn claim_vertical_derivative(&self) -> T {
        let (y0, d0) = self.geod.n_jacobi_space();
        let stride = (self.steps / 200).max(1);
        let mut worst = T::zero();
        for k in (2..self.steps).step_by(stride) {
            let j = 2 * k;
            let t = self.half_time(j);
            let (z, zd) = self.geod.upsilon(t);
            if z.ncols() > 0 {
                let sv = linalg::singular_values(&z);
                if sv.last().copied().unwrap_or_else(T::zero) < T::lit(1e-6) * sv[0] {
                    continue;
                }
            }
            let (y, d) = self.geod.flow.solve(t, &y0, &d0);
            let q = &self.projectors[j];
            let c = pinv(&z, T::lit(1e-12)) * (q * &y);
            let yt = &y - &z * &c;
            let dt = &d - &zd * &c;
            worst = worst.max(linalg::max_abs(&(q * &dt + &self.atensor[j] * &yt)));
        }
        worst
    }

    /// `max |E_h' - A E_h|` with `E_h'` from five-point differences.
    pub fn claim_frame_derivative(&self) -> T {
        let hh = self.h * T::lit(0.5);
        let mut worst = T::zero();
        let f = &self.frames;
        for j in 2..f.len() - 2 {
            if self.singular_near(j) {
                continue;
            }
            let d = (&f[j - 2] - &f[j - 1] * T::lit(8.0) + &f[j + 1] * T::lit(8.0) - &f[j + 2]) / (T::lit(12.0) * hh);
            worst = worst.max(linalg::max_abs(&(d - &self.atensor[j] * &f[j])));
        }
        worst
    }

    fn singular_near(&self, j: usize) -> bool {
        let lo = j.saturating_sub(2);
        let hi = (j + 2).min(self.rcal.len() - 1);
        (lo..=hi).any(|i| {
            let (z, _) = self.geod.upsilon(self.half_time(i));
            if z.ncols() == 0 {
                return false;
            }
            let sv = linalg::singular_values(&z);
            sv.last().copied().unwrap_or_else(T::zero) < T::lit(1e-3) * sv[0]
        })
    }

    /// Integrates `y'' + ℛ y = 0` (horizontal-frame coordinates) from grid
    /// index `k0` to the end; returns the values on the integer grid from
    /// `k0` on.
    pub fn transversal_integrate(&self, y0: &DMatrix<T>, d0: &DMatrix<T>, k0: usize) -> Vec<(DMatrix<T>, DMatrix<T>)> {
        let mut y = y0.clone();
        let mut d = d0.clone();
        let mut out = vec![(y.clone(), d.clone())];
        for k in k0..self.steps {
            let (ny, nd) = rk4_step(&y, &d, self.h, &self.rcal[2 * k], &self.rcal[2 * k + 1], &self.rcal[2 * k + 2]);
            y = ny;
            d = nd;
            out.push((y.clone(), d.clone()));
        }
        out
    }

    /// Sup-norm mismatch between horizontal projections `E_h^T J` of the
    /// N-Jacobi fields and solutions of the transversal equation started at
    /// `a + 2h` from the same data.
    pub fn projected_lambda_residual(&self) -> T {
        let (y0, d0) = self.geod.n_jacobi_space();
        let proj: Vec<DMatrix<T>> = (0..=self.steps)
            .map(|k| {
                let t = self.half_time(2 * k);
                self.frames[2 * k].transpose() * self.geod.flow.solve(t, &y0, &d0).0
            })
            .collect();
        let k0 = 2;
        let deriv = (&proj[k0 - 2] - &proj[k0 - 1] * T::lit(8.0) + &proj[k0 + 1] * T::lit(8.0) - &proj[k0 + 2]) / (T::lit(12.0) * self.h);
        let sol = self.transversal_integrate(&proj[k0], &deriv, k0);
        sol.iter()
            .enumerate()
            .fold(T::zero(), |w, (i, (y, _))| w.max(linalg::max_abs(&(y - &proj[k0 + i]))))
    }

    /// Conjugate times of `y'' + ℛ y = 0, y(a) = 0` and the index of the
    /// index form on `[a, b]` (finite elements at 256 and 512 cells).
    pub fn conjugate_scan(&self) -> Result<ConjugateReport<T>, TransversalError> {
        let m = self.horizontal_dim();
        let times = self.times();
        let sol = self.transversal_integrate(&DMatrix::zeros(m, m), &DMatrix::identity(m, m), 0);
        let h = self.h;
        let hermite = |t: T| -> DMatrix<T> {
            let u = ((t - self.a) / h).max(T::zero());
            let k = u.floor().to_usize().unwrap_or(0).min(self.steps - 1);
            let s = (u - T::from_usize(k).unwrap()).min(T::one());
            let (y0, d0) = &sol[k];
            let (y1, d1) = &sol[k + 1];
            let s2 = s * s;
            let s3 = s2 * s;
            let two = T::lit(2.0);
            let three = T::lit(3.0);
            let h00 = two * s3 - three * s2 + T::one();
            let h10 = s3 - two * s2 + s;
            let h01 = -two * s3 + three * s2;
            let h11 = s3 - s2;
            y0 * h00 + d0 * (h10 * h) + y1 * h01 + d1 * (h11 * h)
        };
        let critical = scan_critical(&times, 2, hermite);
        let coarse = self.index_form_negatives(256);
        let fine = self.index_form_negatives(512);
        if coarse != fine {
            return Err(TransversalError::IndexUnstable { coarse, fine });
        }
        let interior: usize = critical.iter().filter(|c| !c.endpoint).map(|c| c.multiplicity).sum();
        Ok(ConjugateReport { times: critical, index: fine, sturm_consistent: interior == fine })
    }

    /// Negative directions of the index form discretized with `cells`
    /// piecewise-linear elements (Dirichlet ends), counted by block `LDL^T`
    /// inertia.
    pub fn index_form_negatives(&self, cells: usize) -> usize {
        let (diag, off) = self.index_form_blocks(cells);
        let mut negatives = 0;
        let mut prev: Option<DMatrix<T>> = None;
        for (k, d) in diag.into_iter().enumerate() {
            let mut d = d;
            if let Some(s) = &prev {
                let b = &off[k - 1];
                let sinv = s.clone().try_inverse().unwrap_or_else(|| pinv(s, T::lit(1e-14)));
                d -= b.transpose() * sinv * b;
            }
            let d = (&d + d.transpose()) * T::lit(0.5);
            negatives += d.clone().symmetric_eigen().eigenvalues.iter().filter(|&&x| x < T::zero()).count();
            prev = Some(d);
        }
        negatives
    }

    /// Diagonal blocks (interior nodes) and couplings between consecutive
    /// interior nodes of the discretized index form.
    fn index_form_blocks(&self, cells: usize) -> (Vec<DMatrix<T>>, Vec<DMatrix<T>>) {
        let m = self.horizontal_dim();
        if m == 0 || cells < 2 {
            return (Vec::new(), Vec::new());
        }
        let b = self.a + self.h * T::from_usize(self.steps).unwrap();
        let len = (b - self.a) / T::from_usize(cells).unwrap();
        let node = |k: usize| self.a + len * T::from_usize(k).unwrap();
        let id = DMatrix::<T>::identity(m, m);
        let six = T::lit(6.0);
        // element blocks (ll, lr, rr): stiffness minus ℛ-weighted Simpson mass
        let elems: Vec<(DMatrix<T>, DMatrix<T>, DMatrix<T>)> = (0..cells)
            .map(|e| {
                let r0 = self.rcal_at(node(e));
                let rm = self.rcal_at(node(e) + len * T::lit(0.5));
                let r1 = self.rcal_at(node(e + 1));
                let ll = &id / len - (&r0 + &rm) * (len / six);
                let lr = -(&id / len) - &rm * (len / six);
                let rr = &id / len - (&rm + &r1) * (len / six);
                (ll, lr, rr)
            })
            .collect();
        let diag = (1..cells).map(|k| &elems[k - 1].2 + &elems[k].0).collect();
        let off = (1..cells - 1).map(|k| elems[k].1.clone()).collect();
        (diag, off)
    }

    /// The bump field `Z = φ Z0` with `Z0` constant in the horizontal frame,
    /// `φ = 1` on `[t0-1, t0+1]`, linear ramps to 0 at `t0 ± N`.
    pub fn bump(&self, t0: T, window: T, z0: &DVector<T>) -> Result<BumpReport<T>, TransversalError> {
        let b = self.a + self.h * T::from_usize(self.steps).unwrap();
        let (lo, hi) = (t0 - window, t0 + window);
        if lo < self.a || hi > b || window <= T::one() {
            return Err(TransversalError::Window { lo: lo.as_f64(), hi: hi.as_f64() });
        }
        let z = z0 / z0.norm();
        let ramp = window - T::one();
        let phi = |t: T| {
            let d = (t - t0).abs();
            if d <= T::one() {
                (T::one(), T::zero())
            } else if d >= window {
                (T::zero(), T::zero())
            } else {
                ((window - d) / ramp, T::one() / ramp)
            }
        };
        let hh = self.h * T::lit(0.5);
        let mut c = T::zero();
        let mut energy = T::zero();
        let mut curv = T::zero();
        for j in 0..self.rcal.len() - 1 {
            let (t_l, t_r) = (self.half_time(j), self.half_time(j + 1));
            if t_r <= lo || t_l >= hi {
                continue;
            }
            let q = |jj: usize| z.dot(&(&self.rcal[jj] * &z));
            let (pl, _) = phi(t_l);
            let (pr, _) = phi(t_r);
            let (_, dm) = phi((t_l + t_r) * T::lit(0.5));
            energy += dm * dm * hh;
            curv += (pl * pl * q(j) + pr * pr * q(j + 1)) * hh * T::lit(0.5);
            if t_l >= t0 - T::one() && t_r <= t0 + T::one() {
                c += (q(j) + q(j + 1)) * hh * T::lit(0.5);
            }
        }
        let value = energy - curv;
        Ok(BumpReport { c, energy, value, negative: value < T::zero(), predicted: energy < c })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BundleInvariants<T: Real> {
    pub antisymmetry: T,
    /// `max(|Q A Q|, |P A P|)`: `A` must swap the two bundles.
    pub block_diagonal: T,
    pub frame_vertical: T,
    pub frame_orthonormality: T,
    pub min_curvature_eigenvalue: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateReport<T: Real> {
    pub times: Vec<CriticalTime<T>>,
    pub index: usize,
    /// Index equals the number of interior conjugate times with multiplicity.
    pub sturm_consistent: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpReport<T: Real> {
    /// `∫_{t0-1}^{t0+1} <ℛ Z0, Z0>`.
    pub c: T,
    /// `∫ φ'^2`.
    pub energy: T,
    /// `I(Z, Z)`.
    pub value: T,
    pub negative: bool,
    /// `∫ φ'^2 < C`, the sufficient condition for negativity.
    pub predicted: bool,
}

/// O'Neill's `A_X` at a regular point `x` for horizontal unit `X`, as an
/// ambient matrix acting on horizontal vectors: `A_X Y = -(Z⁺)^T Z'^T Y`
/// with `Z = (A_i x)` and `Z' = (∇_X A_i x)`.
pub fn oneill_a<T: Real>(action: &Action<T>, x: &DVector<T>, dir: &DVector<T>) -> DMatrix<T> {
    let m = action.manifold();
    let z = action.killing(x);
    let mut zd = DMatrix::zeros(z.nrows(), z.ncols());
    for (i, a) in action.rep().generators().iter().enumerate() {
        zd.set_column(i, &m.tangent_project(x, &(a * dir)));
    }
    -(pinv(&z, T::lit(1e-10)).transpose() * zd.transpose())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneillConfig {
    pub eps: f64,
    pub optimizer: OptimizerConfig,
    /// Step of the five-point difference used on the A-tensor path.
    pub fd_step: f64,
}

impl Default for OneillConfig {
    fn default() -> Self {
        Self { eps: 0.1, optimizer: OptimizerConfig { starts: 8, evaluations: 4000, seed: 0 }, fd_step: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneillReport<T: Real> {
    pub k_plane: T,
    pub a_norm: T,
    /// `K(σ) + 3 |A_X Y|^2`.
    pub formula: T,
    /// Quotient curvature from orbit distances (Richardson over ε, ε/2).
    pub fd_estimate: T,
    pub fd_residual: T,
    /// The formula evaluated with `A` from differences of the vertical
    /// projector along the geodesic in direction `X`.
    pub a_path: T,
    pub a_path_residual: T,
}

/// Curvature `K` of a constant-curvature right isosceles triangle with legs
/// `eps` and hypotenuse `c`: solves `cos(√K c) = cos²(√K eps)`.
pub fn curvature_from_triangle<T: Real>(eps: T, c: T) -> T {
    let hyp = |k: T| -> T {
        let x = k * eps * eps;
        if x.abs() < T::lit(1e-12) {
            return T::lit(2.0).sqrt() * eps * (T::one() - x / T::lit(12.0));
        }
        let r2 = T::lit(2.0).sqrt();
        if k > T::zero() {
            let w = k.sqrt();
            T::lit(2.0) * ((w * eps).sin().abs() / r2).asin() / w
        } else {
            let w = (-k).sqrt();
            T::lit(2.0) * ((w * eps).sinh() / r2).asinh() / w
        }
    };
    let top = (T::pi() / (T::lit(2.0) * eps)).powi(2) * T::lit(0.99);
    let (mut lo, mut hi) = (-top, top);
    for _ in 0..300 {
        let mid = (lo + hi) * T::lit(0.5);
        if hyp(mid) > c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) * T::lit(0.5)
}

/// Checks `K(σ*) = K(σ) + 3 |A_X Y|^2` at a regular point.
pub fn oneill_check<T: Real>(
    action: &Action<T>,
    p: &DVector<T>,
    x: &DVector<T>,
    y: &DVector<T>,
    cfg: &OneillConfig,
    tol: &Tolerances,
) -> Result<OneillReport<T>, TransversalError> {
    let m = action.manifold();
    let k_plane = m.sectional_curvature(p, x, y);
    let a = oneill_a(action, p, x);
    let a_norm = (&a * y).norm();
    let formula = k_plane + T::lit(3.0) * a_norm * a_norm;

    let eps = T::lit(cfg.eps);
    let estimate = |e: T| {
        let x1 = m.geodesic(p, x, e).0;
        let x2 = m.geodesic(p, y, e).0;
        let c = quotient_distance(action, &x1, &x2, &cfg.optimizer).distance;
        curvature_from_triangle(e, c)
    };
    let k1 = estimate(eps);
    let k2 = estimate(eps * T::lit(0.5));
    let fd_estimate = (k2 * T::lit(4.0) - k1) / T::lit(3.0);

    let geod = OrbitGeodesic::new(action, p, x, tol)?;
    let at = geod.a_tensor_fd(T::zero(), T::lit(cfg.fd_step));
    let yc = geod.frame(T::zero()).transpose() * y;
    let ap = (&at * yc).norm();
    let a_path = k_plane + T::lit(3.0) * ap * ap;
    Ok(OneillReport {
        k_plane,
        a_norm,
        formula,
        fd_estimate,
        fd_residual: (fd_estimate - formula).abs(),
        a_path,
        a_path_residual: (a_path - formula).abs(),
    })
}

/// Supremum of `K(σ) + 3|A_X Y|^2` over horizontal planes at a regular
/// point (basis pairs plus seeded random planes).
pub fn quotient_curvature_sup<T: Real>(action: &Action<T>, x: &DVector<T>, seed: u64, tol: &Tolerances) -> T {
    let hz = action.normal_space(x, tol);
    if hz.dim() < 2 {
        return T::zero();
    }
    let m = action.manifold();
    let value = |u: &DVector<T>, v: &DVector<T>| {
        let a = oneill_a(action, x, u);
        let av = (&a * v).norm();
        m.sectional_curvature(x, u, v) + T::lit(3.0) * av * av
    };
    let vs = hz.vectors();
    let mut best = T::lit(f64::MIN);
    for i in 0..vs.len() {
        for j in i + 1..vs.len() {
            best = best.max(value(&vs[i], &vs[j]));
        }
    }
    if hz.dim() > 2 {
        let mut rng = seeded(seed, 5);
        for _ in 0..32 {
            let u = hz.embed(&random_unit(&mut rng, hz.dim()));
            let w = hz.embed(&random_normal(&mut rng, hz.dim()));
            let v = &w - &u * u.dot(&w);
            if v.norm() > T::lit(1e-6) {
                best = best.max(value(&u, &(&v / v.norm())));
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct RescaleReport<T: Real> {
    pub lambdas: Vec<T>,
    /// `λ² κ(exp_p(λ v))`.
    pub values: Vec<T>,
}

impl<T: Real> RescaleReport<T> {
    pub fn decreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0] + T::lit(1e-12))
    }

    pub fn last(&self) -> T {
        self.values.last().copied().unwrap_or_else(T::zero)
    }
}

/// Rescaled quotient curvature approaching a (singular) point `p` along the
/// direction `v` of the slice.
pub fn rescale_probe<T: Real>(
    action: &Action<T>,
    p: &DVector<T>,
    v: &DVector<T>,
    lambdas: &[T],
    seed: u64,
    tol: &Tolerances,
) -> RescaleReport<T> {
    let m = action.manifold();
    let values = lambdas
        .iter()
        .map(|&l| {
            let x = m.geodesic(p, v, l).0;
            l * l * quotient_curvature_sup(action, &x, seed, tol).max(T::zero())
        })
        .collect();
    RescaleReport { lambdas: lambdas.to_vec(), values }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootnoteReport<T: Real> {
    /// Speed of the curve as written.
    pub raw_speed: T,
    pub unit_speed_residual: T,
    /// Tangential part of the second derivative (finite differences).
    pub geodesic_residual: T,
    pub on_manifold_residual: T,
    /// `max |<γ', A_i γ>|`.
    pub normal_residual: T,
}

/// The curve `((cos t, sin t, 0), (R sin(t/R²), R cos(t/R²), 0))` on
/// `S²(1) × S²(R)`, reparametrized by arclength and checked on `[0, t_max]`.
pub fn footnote_geodesic_check<T: Real>(action: &Action<T>, r: T, t_max: T, step: T) -> FootnoteReport<T> {
    let m = action.manifold();
    let r2 = r * r;
    let curve = |t: T| -> (DVector<T>, DVector<T>) {
        let (s1, c1) = t.sin_cos();
        let (s2, c2) = (t / r2).sin_cos();
        let x = DVector::from_vec(vec![c1, s1, T::zero(), r * s2, r * c2, T::zero()]);
        let dx = DVector::from_vec(vec![-s1, c1, T::zero(), c2 / r, -s2 / r, T::zero()]);
        (x, dx)
    };
    let speed = (T::one() + T::one() / r2).sqrt();
    let unit = |s: T| {
        let (x, dx) = curve(s / speed);
        (x, dx / speed)
    };
    let n = (t_max / step).ceil().to_usize().unwrap_or(1).max(1);
    let fd = T::lit(1e-3);
    let mut rep = FootnoteReport {
        raw_speed: speed,
        unit_speed_residual: T::zero(),
        geodesic_residual: T::zero(),
        on_manifold_residual: T::zero(),
        normal_residual: T::zero(),
    };
    for k in 0..=n {
        let s = t_max * T::from_usize(k).unwrap() / T::from_usize(n).unwrap();
        let (x, dx) = unit(s);
        rep.unit_speed_residual = rep.unit_speed_residual.max((dx.norm() - T::one()).abs());
        rep.on_manifold_residual = rep.on_manifold_residual.max(m.residual(&x));
        let acc = (unit(s + fd).0 - &x * T::lit(2.0) + unit(s - fd).0) / (fd * fd);
        rep.geodesic_residual = rep.geodesic_residual.max(m.tangent_project(&x, &acc).norm());
        for a in action.rep().generators() {
            rep.normal_residual = rep.normal_residual.max(dx.dot(&(a * &x)).abs());
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::build;
    use proptest::prelude::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn closed_form_matches_rk4_on_sphere() {
        let k = DMatrix::from_diagonal(&v(&[1.0, 1.0, 0.0]));
        let flow = JacobiFlow::new(&k);
        let (y0, d0) = (DMatrix::zeros(3, 1), DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]));
        let h = 1e-2;
        let (mut y, mut d) = (y0.clone(), d0.clone());
        for i in 0..300 {
            let (ny, nd) = rk4_step(&y, &d, h, &k, &k, &k);
            y = ny;
            d = nd;
            let t = h * (i + 1) as f64;
            let exact = flow.solve(t, &y0, &d0).0;
            assert!((&y - &exact).norm() < 1e-8);
            assert!((exact[0] - t.sin()).abs() < 1e-14);
        }
        // flat: J0 + t J0'
        let flat = JacobiFlow::<f64>::new(&DMatrix::zeros(2, 2));
        let (y, _) = flat.solve(2.5, &DMatrix::from_column_slice(2, 1, &[1.0, 2.0]), &DMatrix::from_column_slice(2, 1, &[-1.0, 0.5]));
        assert!((y[0] + 1.5).abs() < 1e-15 && (y[1] - 3.25).abs() < 1e-15);
        assert!(matches!(check_step(0.0, 1.0, 0.02), Err(TransversalError::StepRejected { .. })));
    }

    #[test]
    fn position_normal_gives_minus_identity() {
        let action = build::su2_adjoint_action();
        let p = v(&[0.0, 0.0, 2.0]);
        let geod = OrbitGeodesic::new(&action, &p, &v(&[0.0, 0.0, 1.0]), &tol()).unwrap();
        let s = geod.shape_operator();
        assert!((s + DMatrix::identity(2, 2) * 0.5).norm() < 1e-12);
        // inward: (1 - s/r) u vanishes at s = r with multiplicity 2
        let inward = OrbitGeodesic::new(&action, &p, &v(&[0.0, 0.0, -1.0]), &tol()).unwrap();
        let f = focal_points(&inward, 0.0, 3.0, 1e-3).unwrap();
        assert_eq!(f.len(), 1);
        assert!((f[0].t - 2.0).abs() < 1e-8 && f[0].multiplicity == 2);
        assert!(matches!(
            OrbitGeodesic::new(&action, &p, &v(&[1.0, 0.0, 0.0]), &tol()),
            Err(TransversalError::NotNormal { .. })
        ));
    }

    #[test]
    fn n_jacobi_space_dimensions() {
        let hopf = build::hopf();
        let g = OrbitGeodesic::from_seed(&hopf, 0, &tol()).unwrap();
        let (y0, d0) = g.n_jacobi_space();
        assert_eq!(y0.ncols(), 3);
        let mut stacked = DMatrix::zeros(6, 3);
        stacked.view_mut((0, 0), (3, 3)).copy_from(&y0);
        stacked.view_mut((3, 0), (3, 3)).copy_from(&d0);
        assert_eq!(linalg::rank(&stacked, 1e-9), 3);
        // a point orbit: J(0) = 0, J'(0) free
        let trivial = build::trivial_r2();
        let g = OrbitGeodesic::from_seed(&trivial, 0, &tol()).unwrap();
        let (y0, d0) = g.n_jacobi_space();
        assert!(y0.norm() < 1e-15 && linalg::rank(&d0, 1e-9) == 2);
        assert!(focal_points(&g, 0.0, 3.0, 1e-3).unwrap().is_empty());
    }

    #[test]
    fn killing_restrictions_examples() {
        let trivial = OrbitGeodesic::from_seed(&build::trivial_r2(), 0, &tol()).unwrap();
        assert_eq!(trivial.killing_restrictions(&[0.0, 0.5, 1.0]).dim(), 0);
        let rot = build::rot_r2();
        let p = v(&[1.0, 0.0]);
        let g = OrbitGeodesic::new(&rot, &p, &v(&[1.0, 0.0]), &tol()).unwrap();
        assert_eq!(g.killing_restrictions(&[0.0, 0.5, 1.0]).dim(), 1);
        // |A γ(t)| = 1 + t
        let (k, _) = g.killing(2.0);
        assert!((k.norm() - 3.0).abs() < 1e-14);
        let hopf = OrbitGeodesic::from_seed(&build::hopf(), 0, &tol()).unwrap();
        assert_eq!(hopf.killing_restrictions(&[0.0, 0.3, 0.9]).dim(), 1);
    }

    #[test]
    fn variational_completeness_examples() {
        let rot = build::rot_r2();
        let g = OrbitGeodesic::new(&rot, &v(&[1.0, 0.0]), &v(&[-1.0, 0.0]), &tol()).unwrap();
        let r = variational_completeness_probe(&g, 0.0, std::f64::consts::PI, 1e-3, &tol()).unwrap();
        assert!(r.holds);
        assert_eq!(r.focal.len(), 1);
        let action = build::su2_adjoint_action();
        let g = OrbitGeodesic::new(&action, &v(&[0.0, 0.0, 1.0]), &v(&[0.0, 0.0, -1.0]), &tol()).unwrap();
        let r = variational_completeness_probe(&g, 0.0, std::f64::consts::PI, 1e-3, &tol()).unwrap();
        assert!(r.holds && r.worst_angle < 1e-6);
        assert!((r.focal[0].0.t - 1.0).abs() < 1e-8);
    }

    #[test]
    fn hopf_a_tensor_has_unit_norm_and_matches_fd() {
        let g = OrbitGeodesic::from_seed(&build::hopf(), 4, &tol()).unwrap();
        for t in [0.0, 0.4, 1.3] {
            let a = g.a_tensor(t);
            let fd = g.a_tensor_fd(t, 1e-3);
            assert!((&a - &fd).norm() < 1e-9);
            assert!((&a + a.transpose()).norm() < 1e-12);
            let (_, dx) = g.point(t);
            let e = g.frame(t);
            let tangent = e.transpose() * &dx;
            let q = g.vertical_projector(t);
            let hz = Subspace::from_orthonormal(Subspace::column_span(&q, 1e-9).complement(1e-9).basis().clone());
            let y = hz.orthogonal_part(&Subspace::span(3, std::slice::from_ref(&tangent), 1e-12), 1e-9).vector(0);
            assert!(((&a * &y).norm() - 1.0).abs() < 1e-10);
            // A swaps the bundles isometrically here: |A V| = 1 for unit vertical V
            let w = g.vertical_basis(t).column(0).into_owned();
            assert!(((&a * &w).norm() - 1.0).abs() < 1e-10);
            assert!((q * (&a * &w)).norm() < 1e-10);
        }
    }

    #[test]
    fn rotation_through_origin_keeps_rank() {
        let g = OrbitGeodesic::new(&build::rot_r2(), &v(&[0.5, 0.0]), &v(&[-1.0, 0.0]), &tol()).unwrap();
        let sys = TransversalSystem::build(&g, 0.0, 1.0, 1e-2).unwrap();
        assert_eq!(sys.rank(), 1);
        // at the singular time the vertical line is the limit of tangent lines
        let w = g.vertical_basis(0.5);
        assert!((w[(1, 0)].abs() - 1.0).abs() < 1e-12);
        let trivial = OrbitGeodesic::from_seed(&build::trivial_r2(), 0, &tol()).unwrap();
        assert_eq!(TransversalSystem::build(&trivial, 0.0, 1.0, 1e-2).unwrap().rank(), 0);
    }

    #[test]
    fn hopf_transversal_system() {
        let g = OrbitGeodesic::from_seed(&build::hopf(), 0, &tol()).unwrap();
        let sys = TransversalSystem::build(&g, 0.0, std::f64::consts::PI, 1e-3).unwrap();
        assert_eq!(sys.rank(), 1);
        let inv = sys.invariants();
        assert!(inv.antisymmetry < 1e-12 && inv.block_diagonal < 1e-8 && inv.frame_vertical < 1e-8);
        assert!(inv.min_curvature_eigenvalue > -1e-9);
        let c = sys.conjugate_scan().unwrap();
        let first = c.times.iter().find(|x| !x.endpoint).unwrap();
        assert!((first.t - std::f64::consts::FRAC_PI_2).abs() < 1e-4);
        assert_eq!(c.index, 1);
        assert!(c.sturm_consistent);
        assert!(sys.claim_vertical_derivative() < 1e-6);
        assert!(sys.claim_frame_derivative() < 1e-6, "{}", sys.claim_frame_derivative());
        assert!(sys.projected_lambda_residual() < 1e-6, "{}", sys.projected_lambda_residual());
    }

    #[test]
    fn flat_index_form_is_positive() {
        let g = OrbitGeodesic::from_seed(&build::trivial_r2(), 0, &tol()).unwrap();
        let sys = TransversalSystem::build(&g, 0.0, 3.0, 1e-2).unwrap();
        let c = sys.conjugate_scan().unwrap();
        assert!(c.times.is_empty() && c.index == 0);
    }

    #[test]
    fn index_inertia_matches_dense_eigenvalues() {
        let g = OrbitGeodesic::from_seed(&build::hopf(), 1, &tol()).unwrap();
        let sys = TransversalSystem::build(&g, 0.0, 4.0, 1e-2).unwrap();
        // with ℛ = diag(0, 4) the Dirichlet index on [0, 4] counts k with
        // (kπ/4)^2 < 4, i.e. k = 1, 2
        assert_eq!(sys.index_form_negatives(256), 2);
        let (diag, off) = sys.index_form_blocks(64);
        let m = diag[0].nrows();
        let n = diag.len() * m;
        let mut dense = DMatrix::zeros(n, n);
        for (k, d) in diag.iter().enumerate() {
            dense.view_mut((k * m, k * m), (m, m)).copy_from(d);
        }
        for (k, b) in off.iter().enumerate() {
            dense.view_mut((k * m, (k + 1) * m), (m, m)).copy_from(b);
            dense.view_mut(((k + 1) * m, k * m), (m, m)).copy_from(&b.transpose());
        }
        let dense_neg = dense.symmetric_eigen().eigenvalues.iter().filter(|&&x| x < 0.0).count();
        assert_eq!(dense_neg, sys.index_form_negatives(64));
    }

    #[test]
    fn bump_field_has_negative_index_form() {
        let g = OrbitGeodesic::from_seed(&build::hopf(), 2, &tol()).unwrap();
        let sys = TransversalSystem::build(&g, 0.0, 12.0, 1e-2).unwrap();
        let j = sys.half_grid_len() / 2;
        let r = sys.curvature_operator(j).clone();
        let e = r.symmetric_eigen();
        let top = e.eigenvalues.imax();
        let z0 = e.eigenvectors.column(top).into_owned();
        let b = sys.bump(6.0, 4.0, &z0).unwrap();
        assert!((b.energy - 2.0 / 3.0).abs() < 1e-9);
        assert!((b.c - 8.0).abs() < 1e-6);
        assert!(b.predicted && b.negative);
    }

    #[test]
    fn symplectic_form_is_conserved() {
        for action in [build::hopf(), build::su2_adjoint_action(), build::so3_s2xs2(2f64.powf(0.25))] {
            let g = OrbitGeodesic::from_seed(&action, 3, &tol()).unwrap();
            let r = symplectic_check(&g, 0.0, std::f64::consts::PI, 1e-3, 0).unwrap();
            assert!(r.drift < 1e-8 && r.lambda_max < 1e-10 && r.upsilon_max < 1e-10, "{r:?}");
        }
        let (a, b) = (v(&[1.0, 2.0]), v(&[0.3, -1.0]));
        assert_eq!(symplectic_form(&a, &b, &a, &b), 0.0);
    }

    #[test]
    fn discala_olmos_examples() {
        let adj = build::su2_adjoint_action();
        let r = discala_olmos_probe(&adj, &v(&[0.0, 0.0, 2.0]), 0, &tol()).unwrap();
        assert!(r.holds);
        assert!(r.eigenvalues.iter().all(|l| (l.abs() - 0.5).abs() < 1e-12));
        let sym = Action::linear(build::so3_sym_traceless());
        let p = sym.find_regular_point(0, &tol());
        let r = discala_olmos_probe(&sym, &p, 0, &tol()).unwrap();
        assert!(r.holds, "{r:?}");
        let dbl = Action::linear(build::su2_diag_double());
        let p = dbl.find_regular_point(0, &tol());
        let r = discala_olmos_probe(&dbl, &p, 0, &tol()).unwrap();
        assert!(!r.holds && r.worst_tangency > 1e-6);
    }

    #[test]
    fn hopf_oneill() {
        let hopf = build::hopf();
        let p = v(&[1.0, 0.0, 0.0, 0.0]);
        // horizontal at p: orthogonal to p and J p = e2
        let (x, y) = (v(&[0.0, 0.0, 1.0, 0.0]), v(&[0.0, 0.0, 0.0, 1.0]));
        let r = oneill_check(&hopf, &p, &x, &y, &OneillConfig::default(), &tol()).unwrap();
        assert!((r.k_plane - 1.0).abs() < 1e-12);
        assert!((r.a_norm - 1.0).abs() < 1e-12);
        assert!((r.fd_estimate - 4.0).abs() < 1e-2, "{r:?}");
        assert!(r.a_path_residual < 1e-6);
        assert!((curvature_from_triangle(0.1, 0.1 * 2f64.sqrt()) - 0.0).abs() < 1e-8);
    }

    #[test]
    fn trivial_oneill_is_zero() {
        let t = build::trivial_r2();
        let p = v(&[0.3, 0.4]);
        let r = oneill_check(&t, &p, &v(&[1.0, 0.0]), &v(&[0.0, 1.0]), &OneillConfig::default(), &tol()).unwrap();
        assert!(r.formula.abs() < 1e-15 && r.fd_estimate.abs() < 1e-6);
    }

    #[test]
    fn rescaled_curvature_vanishes_at_polar_slice() {
        let a = build::su2_diag_s5();
        let p = v(&[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]) / 2f64.sqrt();
        let nu = a.normal_space(&p, &tol());
        let dir = nu.embed(&random_unit(&mut seeded(0, 0), nu.dim()));
        let lambdas: Vec<f64> = (1..=6).map(|k| 0.5f64.powi(k)).collect();
        let r = rescale_probe(&a, &p, &dir, &lambdas, 0, &tol());
        assert!(r.decreasing(), "{r:?}");
        assert!(r.last() < 1e-2);
        let triv = rescale_probe(&build::trivial_r2(), &v(&[0.0, 0.0]), &v(&[1.0, 0.0]), &lambdas, 0, &tol());
        assert!(triv.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn footnote_curve() {
        let r = 2f64.powf(0.25);
        let rep = footnote_geodesic_check(&build::so3_s2xs2(r), r, 20.0, 1e-2);
        assert!((rep.raw_speed - (1.0 + 1.0 / r.powi(2)).sqrt()).abs() < 1e-15);
        assert!(rep.unit_speed_residual < 1e-12);
        assert!(rep.geodesic_residual < 1e-5);
        assert!(rep.on_manifold_residual < 1e-12);
        assert!(rep.normal_residual < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn bundle_invariants_hold_along_seeded_geodesics(seed in 0u64..10_000) {
            for action in [build::hopf(), build::so2_s2(), build::su2_adjoint_action()] {
                let g = OrbitGeodesic::from_seed(&action, seed, &tol()).unwrap();
                let sys = TransversalSystem::build(&g, 0.0, 1.0, 1e-2).unwrap();
                let inv = sys.invariants();
                prop_assert!(inv.antisymmetry < 1e-8);
                prop_assert!(inv.block_diagonal < 1e-8);
                prop_assert!(inv.frame_vertical < 1e-8);
                prop_assert!(inv.frame_orthonormality < 1e-10);
                prop_assert!(inv.min_curvature_eigenvalue > -1e-9);
            }
        }

        #[test]
        fn a_tensor_vanishes_for_polar_actions(seed in 0u64..10_000) {
            for action in [build::so2_s2(), build::su2_adjoint_action(), build::so3_s2xs2(2f64.powf(0.25))] {
                let g = OrbitGeodesic::from_seed(&action, seed, &tol()).unwrap();
                for t in [0.1, 0.35, 0.6] {
                    prop_assert!(g.a_tensor_fd(t, 1e-3).norm() < 2e-6);
                }
            }
        }
    }
}
