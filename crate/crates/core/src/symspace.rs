//! Symmetric pairs `(g, theta)`: the Cartan split `g = k + p`, maximal
//! abelian subspaces of `p`, the curvature tensor of `G/K` at the base point
//! and a sampled totally-geodesic probe along once-broken geodesics.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::liealg::{centralizer_in, is_abelian_subspace, LieAlgebra, LieError};
use crate::linalg::{self, random_normal, random_unit, Subspace, Tolerances};
use crate::manifold::ModelManifold;
use crate::scalar::Real;
use crate::{seeded, Verdict};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymspaceError {
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error("involution has shape {rows}x{cols}, algebra has dimension {dim}")]
    Shape { rows: usize, cols: usize, dim: usize },
    #[error("theta^2 != I, residual {residual:e}")]
    NotInvolutive { residual: f64 },
    #[error("theta is not orthogonal for the inner product, residual {residual:e}")]
    NotOrthogonal { residual: f64 },
    #[error("theta is not an automorphism, residual {residual:e} at basis pair ({i}, {j}) (1-based)")]
    NotAutomorphism { i: usize, j: usize, residual: f64 },
    #[error("p is zero-dimensional")]
    EmptyP,
    #[error("could not certify a maximal abelian subspace after {attempts} draws")]
    NotMaximal { attempts: usize },
    #[error("vector is not in p (out-of-span residual {residual:e})")]
    NotInP { residual: f64 },
    #[error("vectors are numerically dependent")]
    Dependent,
    #[error("sampler legs must satisfy 0 < min <= max (got {min}, {max})")]
    DegenerateLeg { min: f64, max: f64 },
    #[error("subspace is not tangent to the manifold at the base point (residual {residual:e})")]
    NotTangent { residual: f64 },
}

/// A Lie algebra with an involutive automorphism and its eigenspace split.
#[derive(Debug, Clone)]
pub struct SymmetricPair<T: Real> {
    algebra: LieAlgebra<T>,
    involution: DMatrix<T>,
    k: Subspace<T>,
    p: Subspace<T>,
}

const ANCHOR_SEED: u64 = 0x5eed_a11c;

impl<T: Real> SymmetricPair<T> {
    /// Splits `alg` into the `+1` and `-1` eigenspaces of `theta` after
    /// checking that `theta` is an orthogonal involutive automorphism. The
    /// algebra must be expressed in an orthonormal basis.
    pub fn cartan_decompose(alg: &LieAlgebra<T>, theta: &DMatrix<T>, tol: &Tolerances) -> Result<Self, SymspaceError> {
        let n = alg.dim();
        if theta.shape() != (n, n) {
            return Err(SymspaceError::Shape { rows: theta.nrows(), cols: theta.ncols(), dim: n });
        }
        if !alg.is_orthonormal() {
            return Err(LieError::NotOrthonormal.into());
        }
        let eps = T::lit(tol.residual) * T::lit(100.0);
        let id = DMatrix::identity(n, n);
        let inv = linalg::max_abs(&(theta * theta - &id));
        if inv > eps {
            return Err(SymspaceError::NotInvolutive { residual: inv.as_f64() });
        }
        let orth = linalg::max_abs(&(theta.transpose() * theta - &id));
        if orth > eps {
            return Err(SymspaceError::NotOrthogonal { residual: orth.as_f64() });
        }
        let cols: Vec<DVector<T>> = (0..n).map(|i| theta.column(i).into_owned()).collect();
        for i in 0..n {
            for j in i + 1..n {
                let lhs = theta * alg.bracket_unchecked(&crate::liealg::unit(n, i), &crate::liealg::unit(n, j));
                let rhs = alg.bracket_unchecked(&cols[i], &cols[j]);
                let r = linalg::max_abs(&DMatrix::from_column_slice(n, 1, (lhs - rhs).as_slice()));
                if r > eps {
                    return Err(SymspaceError::NotAutomorphism { i: i + 1, j: j + 1, residual: r.as_f64() });
                }
            }
        }
        let rel = T::lit(tol.rank);
        let k = Subspace::column_span(&(&id + theta), rel);
        let p = Subspace::column_span(&(&id - theta), rel);
        Ok(Self { algebra: alg.clone(), involution: theta.clone(), k, p })
    }

    /// Involution `X -> d X d^{-1}` read off in the realization; covers inner
    /// automorphisms `Ad_g` and conjugation-type outer ones.
    pub fn involution_by_conjugation(alg: &LieAlgebra<T>, d: &DMatrix<T>) -> Result<DMatrix<T>, LieError> {
        let r = alg.realization().ok_or(LieError::NoRealization)?;
        let d_inv = d.clone().try_inverse().ok_or(LieError::NoRealization)?;
        let n = alg.dim();
        let mut theta = DMatrix::zeros(n, n);
        for (j, rj) in r.iter().enumerate() {
            theta.set_column(j, &alg.from_matrix(&(d * rj * &d_inv))?);
        }
        Ok(theta)
    }

    pub fn algebra(&self) -> &LieAlgebra<T> {
        &self.algebra
    }

    pub fn involution(&self) -> &DMatrix<T> {
        &self.involution
    }

    pub fn k(&self) -> &Subspace<T> {
        &self.k
    }

    pub fn p(&self) -> &Subspace<T> {
        &self.p
    }

    /// Worst out-of-span residual of `[k,k] ⊂ k`, `[k,p] ⊂ p`, `[p,p] ⊂ k`.
    pub fn grading_residual(&self) -> T {
        let alg = &self.algebra;
        let (ks, ps) = (self.k.vectors(), self.p.vectors());
        let mut worst = T::zero();
        for a in &ks {
            for b in &ks {
                worst = worst.max(self.k.residual(&alg.bracket_unchecked(a, b)));
            }
            for b in &ps {
                worst = worst.max(self.p.residual(&alg.bracket_unchecked(a, b)));
            }
        }
        for a in &ps {
            for b in &ps {
                worst = worst.max(self.k.residual(&alg.bracket_unchecked(a, b)));
            }
        }
        worst
    }

    /// Maximal abelian subspace `a ⊂ p` as the centralizer of a generic
    /// element, certified by re-computing the centralizer of eight generic
    /// elements of the result.
    ///
    /// The first draw is taken inside the centralizer of a fixed anchor
    /// element, so results for different seeds coincide whenever the anchor
    /// is generic (it always is outside a null set); later draws fall back to
    /// all of `p`.
    pub fn maximal_abelian(&self, seed: u64, tol: &Tolerances) -> Result<Subspace<T>, SymspaceError> {
        if self.p.is_empty() {
            return Err(SymspaceError::EmptyP);
        }
        let alg = &self.algebra;
        let anchor = {
            let mut rng = seeded(ANCHOR_SEED, 0);
            let x = self.p.embed(&random_normal(&mut rng, self.p.dim()));
            centralizer_in(alg, &x, &self.p, tol)?
        };
        const ATTEMPTS: usize = 16;
        for attempt in 0..ATTEMPTS {
            let mut rng = seeded(seed, attempt as u64);
            let base = if attempt == 0 { &anchor } else { &self.p };
            let x = base.embed(&random_normal(&mut rng, base.dim()));
            let a = centralizer_in(alg, &x, &self.p, tol)?;
            if self.certify_maximal(&a, &mut rng, tol)? {
                return Ok(a);
            }
        }
        Err(SymspaceError::NotMaximal { attempts: ATTEMPTS })
    }

    fn certify_maximal<R: Rng>(&self, a: &Subspace<T>, rng: &mut R, tol: &Tolerances) -> Result<bool, SymspaceError> {
        if a.is_empty() || !is_abelian_subspace(&self.algebra, a, tol)?.holds {
            return Ok(false);
        }
        for _ in 0..8 {
            let y = a.embed(&random_normal(rng, a.dim()));
            let c = centralizer_in(&self.algebra, &y, &self.p, tol)?;
            if !c.same_as(a, T::lit(1e-8)) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn require_p(&self, v: &DVector<T>, tol: &Tolerances) -> Result<(), SymspaceError> {
        if v.len() != self.algebra.dim() {
            return Err(LieError::DimensionMismatch { expected: self.algebra.dim(), got: v.len() }.into());
        }
        let r = self.p.residual(v);
        if r > T::lit(tol.residual) * T::lit(100.0) * v.norm().max(T::one()) {
            return Err(SymspaceError::NotInP { residual: r.as_f64() });
        }
        Ok(())
    }

    /// `R(X, Y) Z = -[[X, Y], Z]` for `X, Y, Z` in `p`.
    pub fn curvature_operator(
        &self,
        x: &DVector<T>,
        y: &DVector<T>,
        z: &DVector<T>,
        tol: &Tolerances,
    ) -> Result<DVector<T>, SymspaceError> {
        self.require_p(x, tol)?;
        self.require_p(y, tol)?;
        self.require_p(z, tol)?;
        Ok(-self.algebra.bracket_unchecked(&self.algebra.bracket_unchecked(x, y), z))
    }

    /// `<R(X,Y)Y, X> / (|X|^2 |Y|^2 - <X,Y>^2)`.
    pub fn sectional_curvature(&self, x: &DVector<T>, y: &DVector<T>, tol: &Tolerances) -> Result<T, SymspaceError> {
        let area2 = x.norm_squared() * y.norm_squared() - x.dot(y).powi(2);
        if area2 <= T::lit(1e-12) * x.norm_squared() * y.norm_squared() {
            return Err(SymspaceError::Dependent);
        }
        Ok(self.curvature_operator(x, y, y, tol)?.dot(x) / area2)
    }

    /// Square of the largest structure constant (at least 1); curvature
    /// residuals are judged relative to it.
    pub fn curvature_scale(&self) -> T {
        let n = self.algebra.dim();
        let mut s = T::one();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    s = s.max(self.algebra.structure_constant(i, j, k).abs());
                }
            }
        }
        s * s
    }
}

/// Sampling parameters for the broken-geodesic probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSampler {
    pub geodesics: usize,
    pub leg_min: f64,
    pub leg_max: f64,
    pub seed: u64,
}

impl Default for ProbeSampler {
    fn default() -> Self {
        Self { geodesics: 100, leg_min: 0.1, leg_max: 1.5, seed: 0 }
    }
}

impl ProbeSampler {
    fn validate(&self) -> Result<(), SymspaceError> {
        if !(self.leg_min > 0.0 && self.leg_min <= self.leg_max) {
            return Err(SymspaceError::DegenerateLeg { min: self.leg_min, max: self.leg_max });
        }
        Ok(())
    }
}

/// The worst broken geodesic found by the probe.
#[derive(Debug, Clone, PartialEq)]
pub struct BrokenGeodesic<T: Real> {
    pub index: usize,
    /// Length of the first leg (the break time).
    pub break_time: T,
    pub second_leg: T,
    pub residual: T,
}

fn leg<T: Real, R: Rng>(rng: &mut R, s: &ProbeSampler) -> T {
    T::lit(if s.leg_max > s.leg_min { rng.random_range(s.leg_min..s.leg_max) } else { s.leg_min })
}

/// Worst residual of `R(u,v)w` against `span(frame)` over basis triples.
fn triple_residual<T: Real>(frame: &Subspace<T>, curv: impl Fn(&DVector<T>, &DVector<T>, &DVector<T>) -> DVector<T>) -> T {
    let vs = frame.vectors();
    let mut worst = T::zero();
    for u in &vs {
        for v in &vs {
            for w in &vs {
                worst = worst.max(frame.residual(&curv(u, v, w)));
            }
        }
    }
    worst
}

fn summarize<T: Real>(results: Vec<BrokenGeodesic<T>>, limit: T) -> Verdict<T, BrokenGeodesic<T>> {
    let worst = results.into_iter().fold(None::<BrokenGeodesic<T>>, |acc, g| match acc {
        Some(a) if a.residual >= g.residual => Some(a),
        _ => Some(g),
    });
    let residual = worst.as_ref().map_or(T::zero(), |g| g.residual);
    let holds = residual <= limit;
    Verdict { holds, residual, witness: if holds { None } else { worst } }
}

/// Samples `S`-admissible once-broken geodesics from the base point of
/// `G/K` and tests `R(Pu, Pv) Pw ∈ P(S)` at the far end.
///
/// Transport along `exp(tX)·o` is the differential of the transvection, so
/// at the end point `g·o` the transported space is `Ad_g S` and the
/// curvature is evaluated with brackets in `Ad_g p`.
pub fn cartan_hermann_probe_pair<T: Real>(
    pair: &SymmetricPair<T>,
    s: &Subspace<T>,
    sampler: &ProbeSampler,
    tol: &Tolerances,
) -> Result<Verdict<T, BrokenGeodesic<T>>, SymspaceError> {
    sampler.validate()?;
    let alg = pair.algebra();
    if alg.realization().is_none() {
        return Err(LieError::NoRealization.into());
    }
    if s.ambient() != alg.dim() {
        return Err(LieError::DimensionMismatch { expected: alg.dim(), got: s.ambient() }.into());
    }
    let in_p = pair.p().containment_residual(s);
    if in_p > T::lit(1e-8) {
        return Err(SymspaceError::NotInP { residual: in_p.as_f64() });
    }
    if s.is_empty() {
        return Ok(Verdict { holds: true, residual: T::zero(), witness: None });
    }
    let rel = T::lit(tol.rank);
    let results: Result<Vec<_>, SymspaceError> = (0..sampler.geodesics)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeded(sampler.seed, i as u64);
            let x = s.embed(&random_unit(&mut rng, s.dim()));
            let t0: T = leg(&mut rng, sampler);
            let y0 = s.embed(&random_unit(&mut rng, s.dim()));
            let s1: T = leg(&mut rng, sampler);
            let g = alg.exp(&(x * t0))? * alg.exp(&(y0 * s1))?;
            let ad = alg.adjoint_action(&g)?;
            let moved = s.mapped(&ad, rel);
            let residual = triple_residual(&moved, |u, v, w| -alg.bracket_unchecked(&alg.bracket_unchecked(u, v), w));
            Ok(BrokenGeodesic { index: i, break_time: t0, second_leg: s1, residual })
        })
        .collect();
    let limit = T::lit(tol.residual) * pair.curvature_scale();
    Ok(summarize(results?, limit))
}

/// The same probe on a model manifold with closed-form transport.
pub fn cartan_hermann_probe_model<T: Real>(
    model: &ModelManifold<T>,
    p: &DVector<T>,
    s: &Subspace<T>,
    sampler: &ProbeSampler,
    tol: &Tolerances,
) -> Result<Verdict<T, BrokenGeodesic<T>>, SymspaceError> {
    sampler.validate()?;
    let tp = model.tangent_space(p);
    let off = tp.containment_residual(s);
    if off > T::lit(1e-8) {
        return Err(SymspaceError::NotTangent { residual: off.as_f64() });
    }
    if s.is_empty() {
        return Ok(Verdict { holds: true, residual: T::zero(), witness: None });
    }
    let results: Vec<_> = (0..sampler.geodesics)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeded(sampler.seed, i as u64);
            let x = s.embed(&random_unit(&mut rng, s.dim()));
            let t0: T = leg(&mut rng, sampler);
            let (q1, _) = model.geodesic(p, &x, t0);
            let frame1 = model.transport_frame(p, &x, t0, s.basis());
            let y = &frame1 * random_unit(&mut rng, s.dim());
            let s1: T = leg(&mut rng, sampler);
            let (q2, _) = model.geodesic(&q1, &y, s1);
            let frame2 = model.transport_frame(&q1, &y, s1, &frame1);
            let moved = Subspace::from_orthonormal(linalg::orthonormalize_columns(&frame2, T::lit(1e-12)));
            let residual = triple_residual(&moved, |u, v, w| model.curvature(&q2, u, v, w));
            BrokenGeodesic { index: i, break_time: t0, second_leg: s1, residual }
        })
        .collect();
    let kmax = model.radii().into_iter().fold(T::one(), |a, r| a.max(T::one() / (r * r)));
    Ok(summarize(results, T::lit(tol.residual) * kmax))
}
