//! Polarity decisions for isometric actions given infinitesimally.
//!
//! A representation is polar iff at a regular point `p` the normal space
//! `Σ = (span{A_i p})^⊥` satisfies `<A_i v, w> = 0` for all `v, w ∈ Σ`;
//! this is bilinear, so checking basis pairs is exact.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::liealg::{is_abelian_subspace, is_lie_triple_system, LieAlgebra, LieError, PairWitness};
use crate::linalg::{self, random_normal, Subspace, Tolerances};
use crate::manifold::{ModelKind, ModelManifold};
use crate::scalar::Real;
use crate::symspace::SymmetricPair;
use crate::{seeded, Verdict};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolarityError {
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error("expected {expected} generators (one per basis element), got {got}")]
    GeneratorCount { expected: usize, got: usize },
    #[error("generator {index} has shape {rows}x{cols}, expected {dim}x{dim}")]
    GeneratorShape { index: usize, rows: usize, cols: usize, dim: usize },
    #[error("generator {index} is not antisymmetric (residual {residual:e})")]
    NotAntisymmetric { index: usize, residual: f64 },
    #[error("generators do not reproduce the bracket at ({i}, {j}) (1-based), residual {residual:e}")]
    NotRepresentation { i: usize, j: usize, residual: f64 },
    #[error("generator {index} does not preserve the manifold (residual {residual:e})")]
    NotTangent { index: usize, residual: f64 },
    #[error("manifold lives in dimension {manifold}, representation in {space}")]
    AmbientMismatch { manifold: usize, space: usize },
    #[error("point is not on the manifold (residual {residual:e})")]
    OffManifold { residual: f64 },
    #[error("{0}")]
    Inapplicable(String),
}

/// A representation of `algebra` by antisymmetric matrices on `R^space_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalRep<T: Real> {
    algebra: LieAlgebra<T>,
    generators: Vec<DMatrix<T>>,
    space_dim: usize,
    on_sphere: bool,
}

impl<T: Real> OrthogonalRep<T> {
    /// Validates antisymmetry and the homomorphism property. The algebra
    /// must be in an orthonormal basis (kernels are then subalgebras with
    /// orthonormal coordinates).
    pub fn new(
        algebra: LieAlgebra<T>,
        generators: Vec<DMatrix<T>>,
        space_dim: usize,
        on_sphere: bool,
        tol: &Tolerances,
    ) -> Result<Self, PolarityError> {
        if !algebra.is_orthonormal() {
            return Err(LieError::NotOrthonormal.into());
        }
        if generators.len() != algebra.dim() {
            return Err(PolarityError::GeneratorCount { expected: algebra.dim(), got: generators.len() });
        }
        for (index, a) in generators.iter().enumerate() {
            if a.shape() != (space_dim, space_dim) {
                return Err(PolarityError::GeneratorShape { index: index + 1, rows: a.nrows(), cols: a.ncols(), dim: space_dim });
            }
        }
        let scale = generators.iter().fold(T::one(), |s, a| s.max(linalg::max_abs(a)));
        let eps = T::lit(tol.residual) * T::lit(100.0) * scale;
        for (index, a) in generators.iter().enumerate() {
            let r = linalg::max_abs(&(a + a.transpose()));
            if r > eps {
                return Err(PolarityError::NotAntisymmetric { index: index + 1, residual: r.as_f64() });
            }
        }
        let n = algebra.dim();
        for i in 0..n {
            for j in i + 1..n {
                let mut d = &generators[i] * &generators[j] - &generators[j] * &generators[i];
                for (k, g) in generators.iter().enumerate() {
                    d -= g * algebra.structure_constant(i, j, k);
                }
                let r = linalg::max_abs(&d);
                if r > eps * scale {
                    return Err(PolarityError::NotRepresentation { i: i + 1, j: j + 1, residual: r.as_f64() });
                }
            }
        }
        Ok(Self { algebra, generators, space_dim, on_sphere })
    }

    /// `ad` on the algebra itself (orthonormal basis, invariant inner product).
    pub fn adjoint(algebra: &LieAlgebra<T>, tol: &Tolerances) -> Result<Self, PolarityError> {
        let n = algebra.dim();
        let gens = (0..n).map(|i| algebra.ad(&crate::liealg::unit(n, i))).collect();
        Self::new(algebra.clone(), gens, n, false, tol)
    }

    pub fn trivial(algebra: &LieAlgebra<T>, space_dim: usize) -> Self {
        let gens = vec![DMatrix::zeros(space_dim, space_dim); algebra.dim()];
        Self { algebra: algebra.clone(), generators: gens, space_dim, on_sphere: false }
    }

    /// `V ⊕ W` for two representations of the same algebra.
    pub fn direct_sum(&self, other: &Self) -> Result<Self, PolarityError> {
        if self.algebra.dim() != other.algebra.dim() {
            return Err(LieError::DimensionMismatch { expected: self.algebra.dim(), got: other.algebra.dim() }.into());
        }
        let (a, b) = (self.space_dim, other.space_dim);
        let gens = self
            .generators
            .iter()
            .zip(&other.generators)
            .map(|(x, y)| block_diag(x, y))
            .collect();
        Ok(Self { algebra: self.algebra.clone(), generators: gens, space_dim: a + b, on_sphere: false })
    }

    /// Representation of `g ⊕ h` on `V ⊕ W`, each factor acting on its own
    /// summand.
    pub fn external_sum(&self, other: &Self) -> Self {
        let (a, b) = (self.space_dim, other.space_dim);
        let mut gens: Vec<DMatrix<T>> = self.generators.iter().map(|x| block_diag(x, &DMatrix::zeros(b, b))).collect();
        gens.extend(other.generators.iter().map(|y| block_diag(&DMatrix::zeros(a, a), y)));
        Self {
            algebra: self.algebra.direct_sum(&other.algebra),
            generators: gens,
            space_dim: a + b,
            on_sphere: false,
        }
    }

    /// Isotropy representation of `k` on `p` for a symmetric pair.
    pub fn isotropy(pair: &SymmetricPair<T>, tol: &Tolerances) -> Result<Self, PolarityError> {
        let alg = pair.algebra();
        let k = alg.subalgebra(pair.k(), tol)?;
        let p = pair.p().basis();
        let gens = pair.k().vectors().iter().map(|x| p.transpose() * alg.ad(x) * p).collect();
        Self::new(k, gens, pair.p().dim(), false, tol)
    }

    /// The same representation considered on the unit sphere of `V`.
    pub fn on_sphere(mut self) -> Self {
        self.on_sphere = true;
        self
    }

    pub fn algebra(&self) -> &LieAlgebra<T> {
        &self.algebra
    }

    pub fn generators(&self) -> &[DMatrix<T>] {
        &self.generators
    }

    pub fn space_dim(&self) -> usize {
        self.space_dim
    }

    pub fn restricted_to_sphere(&self) -> bool {
        self.on_sphere
    }

    /// `sum_i x_i A_i`.
    pub fn generator(&self, x: &DVector<T>) -> DMatrix<T> {
        let mut m = DMatrix::zeros(self.space_dim, self.space_dim);
        for (a, &c) in self.generators.iter().zip(x.iter()) {
            m += a * c;
        }
        m
    }

    /// Group element `exp(sum_i x_i A_i)`.
    pub fn group_element(&self, x: &DVector<T>) -> DMatrix<T> {
        linalg::expm(&self.generator(x))
    }

    /// Largest generator entry; pairing tolerances scale with it.
    pub fn scale(&self) -> T {
        self.generators.iter().fold(T::one(), |s, a| s.max(linalg::max_abs(a)))
    }
}

fn block_diag<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let (n, m) = (a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((n, n), (m, m)).copy_from(b);
    out
}

/// A linear isometric action restricted to an invariant model manifold.
#[derive(Debug, Clone)]
pub struct Action<T: Real> {
    rep: OrthogonalRep<T>,
    manifold: ModelManifold<T>,
}

/// Number of random draws used to find a regular point.
pub const REGULAR_DRAWS: usize = 64;

impl<T: Real> Action<T> {
    /// `V` itself, or its unit sphere when the representation says so.
    pub fn linear(rep: OrthogonalRep<T>) -> Self {
        let n = rep.space_dim;
        let manifold = if rep.on_sphere { ModelManifold::unit_sphere(n) } else { ModelManifold::euclidean(n) };
        Self { rep, manifold }
    }

    /// Action on an invariant model manifold; generators are checked to be
    /// tangent at seeded points.
    pub fn on(rep: OrthogonalRep<T>, manifold: ModelManifold<T>) -> Result<Self, PolarityError> {
        if manifold.ambient_dim() != rep.space_dim {
            return Err(PolarityError::AmbientMismatch { manifold: manifold.ambient_dim(), space: rep.space_dim });
        }
        let mut rng = seeded(0x7a9, 0);
        for _ in 0..4 {
            let p = manifold.normalize(&random_normal(&mut rng, rep.space_dim));
            for (index, a) in rep.generators.iter().enumerate() {
                let v = a * &p;
                let r = (&v - manifold.tangent_project(&p, &v)).norm();
                if r > T::lit(1e-9) * rep.scale() {
                    return Err(PolarityError::NotTangent { index: index + 1, residual: r.as_f64() });
                }
            }
        }
        Ok(Self { rep, manifold })
    }

    pub fn rep(&self) -> &OrthogonalRep<T> {
        &self.rep
    }

    pub fn manifold(&self) -> &ModelManifold<T> {
        &self.manifold
    }

    /// Killing fields at `x` as columns `A_i x`.
    pub fn killing(&self, x: &DVector<T>) -> DMatrix<T> {
        let mut m = DMatrix::zeros(self.rep.space_dim, self.rep.generators.len());
        for (i, a) in self.rep.generators.iter().enumerate() {
            m.set_column(i, &(a * x));
        }
        m
    }

    pub fn orbit_tangent(&self, x: &DVector<T>, tol: &Tolerances) -> Subspace<T> {
        Subspace::column_span(&self.killing(x), T::lit(tol.rank))
    }

    pub fn orbit_rank(&self, x: &DVector<T>, tol: &Tolerances) -> usize {
        linalg::rank(&self.killing(x), T::lit(tol.rank))
    }

    /// Normal space of the orbit inside `T_x M`.
    pub fn normal_space(&self, x: &DVector<T>, tol: &Tolerances) -> Subspace<T> {
        let rel = T::lit(tol.rank);
        self.manifold.tangent_space(x).orthogonal_part(&self.orbit_tangent(x, tol), rel)
    }

    /// The draw of maximal orbit rank among [`REGULAR_DRAWS`] seeded points
    /// (ties broken towards the best-conditioned orbit tangent).
    pub fn find_regular_point(&self, seed: u64, tol: &Tolerances) -> DVector<T> {
        let mut rng = seeded(seed, 0);
        let mut best: Option<(usize, T, DVector<T>)> = None;
        for _ in 0..REGULAR_DRAWS {
            let x = self.manifold.normalize(&random_normal(&mut rng, self.rep.space_dim));
            let k = self.killing(&x);
            let r = linalg::rank(&k, T::lit(tol.rank));
            let cond = if r == 0 { T::zero() } else { linalg::singular_values(&k)[r - 1] };
            let better = match &best {
                None => true,
                Some((br, bc, _)) => r > *br || (r == *br && cond > *bc),
            };
            if better {
                best = Some((r, cond, x));
            }
        }
        best.expect("at least one draw").2
    }

    /// Codimension of a principal orbit in the manifold.
    pub fn cohomogeneity(&self, seed: u64, tol: &Tolerances) -> usize {
        let x = self.find_regular_point(seed, tol);
        self.manifold.dim() - self.orbit_rank(&x, tol)
    }

    fn check_point(&self, x: &DVector<T>) -> Result<(), PolarityError> {
        if x.len() != self.rep.space_dim {
            return Err(LieError::DimensionMismatch { expected: self.rep.space_dim, got: x.len() }.into());
        }
        let r = self.manifold.residual(x);
        if r > T::lit(1e-8) {
            return Err(PolarityError::OffManifold { residual: r.as_f64() });
        }
        Ok(())
    }

    /// Isotropy algebra `{X : X·x = 0}` in coordinates of the algebra.
    pub fn isotropy_algebra(&self, x: &DVector<T>, tol: &Tolerances) -> Subspace<T> {
        let n = self.rep.generators.len();
        if n == 0 {
            return Subspace::zero(0);
        }
        let k = self.killing(x);
        Subspace::from_orthonormal(linalg::null_space(&k, T::lit(tol.rank)))
    }

    /// Representation of the isotropy algebra on the normal space of the
    /// orbit through `x` (coordinates in the orthonormal basis of that
    /// space, returned alongside).
    pub fn slice_rep(&self, x: &DVector<T>, tol: &Tolerances) -> Result<(OrthogonalRep<T>, Subspace<T>), PolarityError> {
        self.check_point(x)?;
        let iso = self.isotropy_algebra(x, tol);
        let nu = self.normal_space(x, tol);
        let n = nu.basis();
        let algebra = if iso.is_empty() { LieAlgebra::abelian(0) } else { self.rep.algebra.subalgebra(&iso, tol)? };
        let gens = iso.vectors().iter().map(|c| n.transpose() * self.rep.generator(c) * n).collect();
        Ok((OrthogonalRep::new(algebra, gens, nu.dim(), false, tol)?, nu))
    }

    /// Polarity on the model manifold: the exact pairing test for linear
    /// and sphere actions; on products of spheres only cohomogeneity ≤ 1
    /// is decidable here (such actions are always polar).
    pub fn polarity(&self, seed: u64, tol: &Tolerances) -> Result<PolarityVerdict<T>, PolarityError> {
        match self.manifold.kind() {
            ModelKind::Euclidean | ModelKind::UnitSphere => {
                let x = self.find_regular_point(seed, tol);
                Ok(pairing_test(&self.rep, &x, self.manifold.kind() == ModelKind::UnitSphere, tol))
            }
            ModelKind::ProductOfSpheres => {
                let x = self.find_regular_point(seed, tol);
                let nu = self.normal_space(&x, tol);
                if nu.dim() <= 1 {
                    Ok(PolarityVerdict {
                        polar: true,
                        robust: true,
                        cohomogeneity: nu.dim(),
                        section: Some(nu),
                        witness: None,
                        residual: T::zero(),
                    })
                } else {
                    Err(PolarityError::Inapplicable(format!(
                        "polarity on a product of spheres is only decided for cohomogeneity <= 1 (got {})",
                        nu.dim()
                    )))
                }
            }
        }
    }
}

/// Why a polarity test failed.
#[derive(Debug, Clone, PartialEq)]
pub enum PolarityWitness<T: Real> {
    /// `<A_generator v, w> = pairing` with `v, w` in the candidate section.
    /// For homogeneous spaces `A_generator` is `ad(h_j)` restricted to `m`.
    Pairing { generator: usize, v: DVector<T>, w: DVector<T>, pairing: T },
    /// `[u, [v, w]]` leaves the candidate section by `residual`.
    TripleSystem { u: DVector<T>, v: DVector<T>, w: DVector<T>, residual: T },
}

impl<T: Real> PolarityWitness<T> {
    pub fn magnitude(&self) -> T {
        match self {
            Self::Pairing { pairing, .. } => pairing.abs(),
            Self::TripleSystem { residual, .. } => *residual,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarityVerdict<T: Real> {
    pub polar: bool,
    /// False when a negative verdict rests on a witness below
    /// `Tolerances::robust_witness` (i.e. the answer is indeterminate).
    pub robust: bool,
    pub cohomogeneity: usize,
    pub section: Option<Subspace<T>>,
    pub witness: Option<PolarityWitness<T>>,
    /// Largest pairing (or triple-system residual) seen.
    pub residual: T,
}

fn pairing_test<T: Real>(rep: &OrthogonalRep<T>, x: &DVector<T>, sphere: bool, tol: &Tolerances) -> PolarityVerdict<T> {
    let action = Action { rep: rep.clone(), manifold: ModelManifold::euclidean(rep.space_dim) };
    let sigma = action.orbit_tangent(x, tol).complement(T::lit(tol.rank));
    let vs = sigma.vectors();
    let mut worst = T::zero();
    let mut at = None;
    for (g, a) in rep.generators.iter().enumerate() {
        for (i, v) in vs.iter().enumerate() {
            let av = a * v;
            for w in &vs[i + 1..] {
                let pr = av.dot(w);
                if pr.abs() > worst {
                    worst = pr.abs();
                    at = Some((g, v.clone(), w.clone(), pr));
                }
            }
        }
    }
    let polar = worst <= T::lit(tol.residual) * rep.scale();
    let cohomogeneity = sigma.dim() - usize::from(sphere && sigma.dim() > 0);
    PolarityVerdict {
        polar,
        robust: polar || worst >= T::lit(tol.robust_witness),
        cohomogeneity,
        section: polar.then_some(sigma),
        witness: if polar { None } else { at.map(|(generator, v, w, pairing)| PolarityWitness::Pairing { generator, v, w, pairing }) },
        residual: worst,
    }
}

pub fn find_regular_point<T: Real>(rep: &OrthogonalRep<T>, seed: u64, tol: &Tolerances) -> DVector<T> {
    Action::linear(rep.clone()).find_regular_point(seed, tol)
}

pub fn cohomogeneity<T: Real>(rep: &OrthogonalRep<T>, seed: u64, tol: &Tolerances) -> usize {
    Action::linear(rep.clone()).cohomogeneity(seed, tol)
}

/// Exact pairing test at a seeded regular point.
pub fn is_polar_rep<T: Real>(rep: &OrthogonalRep<T>, seed: u64, tol: &Tolerances) -> PolarityVerdict<T> {
    let x = find_regular_point(rep, seed, tol);
    pairing_test(rep, &x, rep.on_sphere, tol)
}

/// The pairing test with `Σ` taken at a caller-supplied point (meaningful
/// only when that point is regular).
pub fn is_polar_rep_at<T: Real>(rep: &OrthogonalRep<T>, x: &DVector<T>, tol: &Tolerances) -> PolarityVerdict<T> {
    pairing_test(rep, x, rep.on_sphere, tol)
}

pub fn slice_rep<T: Real>(rep: &OrthogonalRep<T>, x: &DVector<T>, tol: &Tolerances) -> Result<OrthogonalRep<T>, PolarityError> {
    Ok(Action::linear(rep.clone()).slice_rep(x, tol)?.0)
}

/// Polarity of a subgroup action on a symmetric space, decided at a
/// regularized base point.
#[derive(Debug, Clone)]
pub struct HomogeneousPolarity<T: Real> {
    pub verdict: PolarityVerdict<T>,
    /// `Ad_{g^{-1}} h` for the chosen conjugator `g`.
    pub conjugated: Subspace<T>,
    pub conjugator: DMatrix<T>,
    /// Orbit dimension at the base point, `rank π_p(Ad_{g^{-1}} h)`.
    pub orbit_dim: usize,
    pub triple_residual: T,
    pub orthogonality_residual: T,
}

/// Number of conjugations tried when regularizing the base point.
pub const CONJUGATION_DRAWS: usize = 64;

/// `m = p ∩ h^⊥` (after conjugating `h` so the base point is regular) must be
/// a Lie triple system with `[m, m] ⊥ h`.
pub fn is_polar_homogeneous<T: Real>(
    pair: &SymmetricPair<T>,
    h: &Subspace<T>,
    seed: u64,
    tol: &Tolerances,
) -> Result<HomogeneousPolarity<T>, PolarityError> {
    let alg = pair.algebra();
    if h.ambient() != alg.dim() {
        return Err(LieError::DimensionMismatch { expected: alg.dim(), got: h.ambient() }.into());
    }
    let scale = (0..alg.dim())
        .flat_map(|i| (0..alg.dim()).flat_map(move |j| (0..alg.dim()).map(move |k| (i, j, k))))
        .fold(T::one(), |s, (i, j, k)| s.max(alg.structure_constant(i, j, k).abs()));
    let closure = alg.closure_residual(h);
    if closure > T::lit(tol.residual) * T::lit(100.0) * scale {
        return Err(LieError::NotSubalgebra { residual: closure.as_f64() }.into());
    }
    let rel = T::lit(tol.rank);
    let p = pair.p();
    let mut rng = seeded(seed, 0);
    let mut best: Option<(usize, T, DMatrix<T>, Subspace<T>)> = None;
    for draw in 0..CONJUGATION_DRAWS {
        let g = if draw == 0 {
            let n = alg.realization().ok_or(LieError::NoRealization)?[0].nrows();
            DMatrix::identity(n, n)
        } else {
            alg.exp(&random_normal(&mut rng, alg.dim()))?
        };
        let g_inv = g.transpose();
        let hc = h.mapped(&alg.adjoint_action(&g_inv)?, rel);
        let proj = p.basis().transpose() * hc.basis();
        let r = linalg::rank(&proj, rel);
        let cond = if r == 0 { T::zero() } else { linalg::singular_values(&proj)[r - 1] };
        let better = match &best {
            None => true,
            Some((br, bc, ..)) => r > *br || (r == *br && cond > *bc),
        };
        if better {
            best = Some((r, cond, g, hc));
        }
    }
    let (orbit_dim, _, conjugator, conjugated) = best.expect("at least one draw");
    let m = p.orthogonal_part(&conjugated, rel);

    let lts = is_lie_triple_system(alg, &m, tol)?;
    let ms = m.vectors();
    let mut worst = T::zero();
    let mut at = None;
    for (j, hj) in conjugated.vectors().iter().enumerate() {
        for a in 0..ms.len() {
            for b in a + 1..ms.len() {
                let pr = alg.bracket_unchecked(&ms[a], &ms[b]).dot(hj);
                if pr.abs() > worst {
                    worst = pr.abs();
                    at = Some((j, a, b, pr));
                }
            }
        }
    }
    let orth_ok = worst <= T::lit(tol.residual) * scale;
    let polar = lts.holds && orth_ok;
    let witness = if polar {
        None
    } else if !lts.holds {
        lts.witness.map(|w| {
            let (u, v, x) = w.indices;
            PolarityWitness::TripleSystem { u: ms[u].clone(), v: ms[v].clone(), w: ms[x].clone(), residual: w.residual }
        })
    } else {
        at.map(|(generator, a, b, pairing)| PolarityWitness::Pairing { generator, v: ms[a].clone(), w: ms[b].clone(), pairing })
    };
    let residual = lts.residual.max(worst);
    let robust = polar || witness.as_ref().is_some_and(|w| w.magnitude() >= T::lit(tol.robust_witness));
    Ok(HomogeneousPolarity {
        verdict: PolarityVerdict {
            polar,
            robust,
            cohomogeneity: m.dim(),
            section: polar.then(|| m.clone()),
            witness,
            residual,
        },
        conjugated,
        conjugator,
        orbit_dim,
        triple_residual: lts.residual,
        orthogonality_residual: worst,
    })
}

#[derive(Debug, Clone)]
pub struct Hyperpolarity<T: Real> {
    pub polar: HomogeneousPolarity<T>,
    /// Abelianness of the candidate section `m`.
    pub abelian: Verdict<T, PairWitness<T>>,
    pub hyperpolar: bool,
}

pub fn is_hyperpolar_homogeneous<T: Real>(
    pair: &SymmetricPair<T>,
    h: &Subspace<T>,
    seed: u64,
    tol: &Tolerances,
) -> Result<Hyperpolarity<T>, PolarityError> {
    let polar = is_polar_homogeneous(pair, h, seed, tol)?;
    let m = pair.p().orthogonal_part(&polar.conjugated, T::lit(tol.rank));
    let abelian = is_abelian_subspace(pair.algebra(), &m, tol)?;
    let hyperpolar = polar.verdict.polar && abelian.holds;
    Ok(Hyperpolarity { polar, abelian, hyperpolar })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbifoldVerdict<T: Real> {
    pub orbifold_point: bool,
    pub slice_cohomogeneity: usize,
    /// Decided by "cohomogeneity ≤ 2" without running the pairing test.
    pub shortcut: bool,
    pub slice_verdict: Option<PolarityVerdict<T>>,
}

/// A point of the orbit space is an orbifold point iff the slice
/// representation is polar.
pub fn orbifold_point_test<T: Real>(
    action: &Action<T>,
    x: &DVector<T>,
    seed: u64,
    tol: &Tolerances,
) -> Result<OrbifoldVerdict<T>, PolarityError> {
    let (slice, _) = action.slice_rep(x, tol)?;
    let c = cohomogeneity(&slice, seed, tol);
    if c <= 2 {
        return Ok(OrbifoldVerdict { orbifold_point: true, slice_cohomogeneity: c, shortcut: true, slice_verdict: None });
    }
    let v = is_polar_rep(&slice, seed, tol);
    Ok(OrbifoldVerdict { orbifold_point: v.polar, slice_cohomogeneity: c, shortcut: false, slice_verdict: Some(v) })
}
