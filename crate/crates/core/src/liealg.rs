//! Finite-dimensional real Lie algebras given by structure constants.
//!
//! Elements are coordinate vectors in a fixed basis `e_1..e_n`, with
//! `[e_i, e_j] = sum_k c[i][j][k] e_k`. Classical compact algebras carry a
//! faithful real matrix realization, which is what the group-level code
//! exponentiates.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{self, Subspace, Tolerances};
use crate::scalar::Real;
use crate::Verdict;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LieError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unsupported classical algebra {family}({n})")]
    Unsupported { family: ClassicalFamily, n: usize },
    #[error("structure constants not antisymmetric at ({i}, {j}, {k}) (1-based), residual {residual:e}")]
    NotAntisymmetric { i: usize, j: usize, k: usize, residual: f64 },
    #[error("Jacobi identity fails at basis triple ({i}, {j}, {k}) (1-based), residual {residual:e}")]
    Jacobi { i: usize, j: usize, k: usize, residual: f64 },
    #[error("inner product is not symmetric positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    InnerNotPositive { min_eigenvalue: f64 },
    #[error("realization does not reproduce the structure constants, residual {residual:e}")]
    Realization { residual: f64 },
    #[error("subspace is not closed under the bracket, residual {residual:e}")]
    NotSubalgebra { residual: f64 },
    #[error("operation requires a matrix realization")]
    NoRealization,
    #[error("operation requires an orthonormal basis (inner product = identity)")]
    NotOrthonormal,
}

/// Classical compact families with a built-in realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassicalFamily {
    SpecialUnitary,
    SpecialOrthogonal,
    Unitary,
    Torus,
}

impl fmt::Display for ClassicalFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::SpecialUnitary => "su",
            Self::SpecialOrthogonal => "so",
            Self::Unitary => "u",
            Self::Torus => "t",
        };
        f.write_str(s)
    }
}

/// A Lie algebra with structure constants, an inner product on the
/// coordinate space and an optional matrix realization.
#[derive(Debug, Clone, PartialEq)]
pub struct LieAlgebra<T: Real> {
    dim: usize,
    structure: Vec<T>,
    inner: DMatrix<T>,
    realization: Option<Vec<DMatrix<T>>>,
    /// Multiplier `s` in the realization trace form `<X, Y> = -s tr(XY)`.
    trace_scale: T,
}

impl<T: Real> LieAlgebra<T> {
    /// Validates and wraps raw data. `structure` is indexed `(i * dim + j) * dim + k`.
    pub fn new(
        dim: usize,
        structure: Vec<T>,
        inner: DMatrix<T>,
        realization: Option<Vec<DMatrix<T>>>,
        tol: &Tolerances,
    ) -> Result<Self, LieError> {
        if structure.len() != dim * dim * dim {
            return Err(LieError::DimensionMismatch { expected: dim * dim * dim, got: structure.len() });
        }
        if inner.shape() != (dim, dim) {
            return Err(LieError::DimensionMismatch { expected: dim, got: inner.nrows() });
        }
        let alg = Self { dim, structure, inner, realization, trace_scale: T::one() };
        alg.validate(tol)?;
        Ok(alg)
    }

    /// The abelian algebra of dimension `dim` with the Euclidean inner product.
    pub fn abelian(dim: usize) -> Self {
        Self {
            dim,
            structure: vec![T::zero(); dim * dim * dim],
            inner: DMatrix::identity(dim, dim),
            realization: None,
            trace_scale: T::one(),
        }
    }

    /// Builds the algebra spanned by real matrices, orthonormalized under
    /// `<X, Y> = -trace_scale * tr(XY)`; structure constants come from
    /// commutators.
    pub fn from_realization(
        matrices: &[DMatrix<T>],
        trace_scale: T,
        tol: &Tolerances,
    ) -> Result<Self, LieError> {
        let form = |a: &DMatrix<T>, b: &DMatrix<T>| -(a * b).trace() * trace_scale;
        let mut basis: Vec<DMatrix<T>> = Vec::new();
        for m in matrices {
            let mut v = m.clone();
            for _ in 0..2 {
                for q in &basis {
                    let d = form(q, &v);
                    v -= q * d;
                }
            }
            let n2 = form(&v, &v);
            if n2 > T::lit(1e-20) {
                basis.push(v / n2.sqrt());
            }
        }
        let dim = basis.len();
        let mut structure = vec![T::zero(); dim * dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                let br = &basis[i] * &basis[j] - &basis[j] * &basis[i];
                for k in 0..dim {
                    structure[(i * dim + j) * dim + k] = form(&br, &basis[k]);
                }
            }
        }
        let alg = Self {
            dim,
            structure,
            inner: DMatrix::identity(dim, dim),
            realization: Some(basis),
            trace_scale,
        };
        alg.validate(tol)?;
        Ok(alg)
    }

    /// `su(n)`, `so(n)`, `u(n)` or the torus `t^n`, with `<X,Y> = -tr(XY)` on the
    /// real form of the realization (`-tr/2` for `so(n)`, so that
    /// `so(3)` and `su(2)` share structure constants).
    pub fn classical(family: ClassicalFamily, n: usize) -> Result<Self, LieError> {
        let tol = Tolerances::default();
        let ok = match family {
            ClassicalFamily::SpecialUnitary | ClassicalFamily::SpecialOrthogonal => n >= 2,
            ClassicalFamily::Unitary | ClassicalFamily::Torus => n >= 1,
        };
        if !ok {
            return Err(LieError::Unsupported { family, n });
        }
        let one = T::one();
        let half = T::lit(0.5);
        match family {
            ClassicalFamily::SpecialOrthogonal => {
                let mut mats = Vec::new();
                let pairs: Vec<(usize, usize)> = if n == 3 {
                    // Hodge order: rotations about x, y, z.
                    vec![(1, 2), (2, 0), (0, 1)]
                } else {
                    (0..n).flat_map(|j| (j + 1..n).map(move |k| (j, k))).collect()
                };
                for (j, k) in pairs {
                    let mut m = DMatrix::zeros(n, n);
                    m[(k, j)] = one;
                    m[(j, k)] = -one;
                    mats.push(m);
                }
                Self::from_realization(&mats, half, &tol)
            }
            ClassicalFamily::SpecialUnitary | ClassicalFamily::Unitary => {
                let mut mats = Vec::new();
                for j in 0..n {
                    for k in j + 1..n {
                        // -i (E_jk + E_kj) / 2
                        let re = DMatrix::zeros(n, n);
                        let mut im = DMatrix::zeros(n, n);
                        im[(j, k)] = -half;
                        im[(k, j)] = -half;
                        mats.push(realify(&re, &im));
                        // (E_kj - E_jk) / 2
                        let mut re = DMatrix::zeros(n, n);
                        re[(k, j)] = half;
                        re[(j, k)] = -half;
                        mats.push(realify(&re, &DMatrix::zeros(n, n)));
                    }
                }
                for l in 0..n.saturating_sub(1) {
                    let mut im = DMatrix::zeros(n, n);
                    im[(l, l)] = -half;
                    im[(l + 1, l + 1)] = half;
                    mats.push(realify(&DMatrix::zeros(n, n), &im));
                }
                if family == ClassicalFamily::Unitary {
                    let im = DMatrix::from_diagonal_element(n, n, -one);
                    mats.push(realify(&DMatrix::zeros(n, n), &im));
                }
                Self::from_realization(&mats, one, &tol)
            }
            ClassicalFamily::Torus => {
                let mats: Vec<_> = (0..n)
                    .map(|l| {
                        let mut im = DMatrix::zeros(n, n);
                        im[(l, l)] = -one;
                        realify(&DMatrix::zeros(n, n), &im)
                    })
                    .collect();
                Self::from_realization(&mats, one, &tol)
            }
        }
    }

    /// `self ⊕ other` with block-diagonal realization (when both have one and
    /// share the trace normalization).
    pub fn direct_sum(&self, other: &Self) -> Self {
        let (a, b) = (self.dim, other.dim);
        let n = a + b;
        let mut structure = vec![T::zero(); n * n * n];
        for i in 0..a {
            for j in 0..a {
                for k in 0..a {
                    structure[(i * n + j) * n + k] = self.c(i, j, k);
                }
            }
        }
        for i in 0..b {
            for j in 0..b {
                for k in 0..b {
                    structure[((a + i) * n + a + j) * n + a + k] = other.c(i, j, k);
                }
            }
        }
        let mut inner = DMatrix::zeros(n, n);
        inner.view_mut((0, 0), (a, a)).copy_from(&self.inner);
        inner.view_mut((a, a), (b, b)).copy_from(&other.inner);
        let realization = match (&self.realization, &other.realization) {
            (Some(ra), Some(rb)) if self.trace_scale == other.trace_scale => {
                let (sa, sb) = (ra.first().map_or(0, |m| m.nrows()), rb.first().map_or(0, |m| m.nrows()));
                let mut out = Vec::with_capacity(n);
                for m in ra {
                    let mut big = DMatrix::zeros(sa + sb, sa + sb);
                    big.view_mut((0, 0), (sa, sa)).copy_from(m);
                    out.push(big);
                }
                for m in rb {
                    let mut big = DMatrix::zeros(sa + sb, sa + sb);
                    big.view_mut((sa, sa), (sb, sb)).copy_from(m);
                    out.push(big);
                }
                Some(out)
            }
            _ => None,
        };
        Self { dim: n, structure, inner, realization, trace_scale: self.trace_scale }
    }

    fn validate(&self, tol: &Tolerances) -> Result<(), LieError> {
        let n = self.dim;
        let scale = self.structure.iter().fold(T::one(), |a, &b| a.max(b.abs()));
        let eps = T::lit(tol.residual) * scale;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let r = (self.c(i, j, k) + self.c(j, i, k)).abs();
                    if r > eps {
                        return Err(LieError::NotAntisymmetric { i: i + 1, j: j + 1, k: k + 1, residual: r.as_f64() });
                    }
                }
            }
        }
        if let Some((i, j, k, r)) = self.worst_jacobi() {
            if r > eps * scale * T::lit(10.0) {
                return Err(LieError::Jacobi { i: i + 1, j: j + 1, k: k + 1, residual: r.as_f64() });
            }
        }
        let asym = linalg::max_abs(&(&self.inner - self.inner.transpose()));
        let min_eig = if n == 0 {
            T::one()
        } else {
            self.inner.clone().symmetric_eigen().eigenvalues.iter().copied().fold(T::max_value().unwrap(), |a, b| a.min(b))
        };
        if asym > eps || min_eig <= T::zero() {
            return Err(LieError::InnerNotPositive { min_eigenvalue: min_eig.as_f64() });
        }
        if self.realization.is_some() {
            let r = self.realization_residual();
            if r > T::lit(tol.residual.max(1e-9)) * scale * T::lit(10.0) {
                return Err(LieError::Realization { residual: r.as_f64() });
            }
        }
        Ok(())
    }

    #[inline]
    fn c(&self, i: usize, j: usize, k: usize) -> T {
        self.structure[(i * self.dim + j) * self.dim + k]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Structure constant `c[i][j][k]` (0-based).
    pub fn structure_constant(&self, i: usize, j: usize, k: usize) -> T {
        self.c(i, j, k)
    }

    pub fn inner(&self) -> &DMatrix<T> {
        &self.inner
    }

    pub fn realization(&self) -> Option<&[DMatrix<T>]> {
        self.realization.as_deref()
    }

    pub fn trace_scale(&self) -> T {
        self.trace_scale
    }

    /// True when the inner product is the identity in this basis.
    pub fn is_orthonormal(&self) -> bool {
        linalg::max_abs(&(&self.inner - DMatrix::identity(self.dim, self.dim))) < T::lit(1e-10)
    }

    /// Isomorphic algebra expressed in a basis that is orthonormal for the
    /// inner product (`f = e L^{-T}` with `inner = L L^T`), together with the
    /// matrix taking new coordinates to old ones.
    pub fn orthonormalized(&self) -> (Self, DMatrix<T>) {
        let n = self.dim;
        let chol = self.inner.clone().cholesky().expect("inner product validated positive definite");
        let l = chol.l();
        let change = l.transpose().try_inverse().expect("triangular factor invertible");
        // new basis f_a = sum_i change[i][a] e_i
        let mut structure = vec![T::zero(); n * n * n];
        let back = l.transpose();
        for a in 0..n {
            for b in 0..n {
                let br = self.bracket_unchecked(&change.column(a).into_owned(), &change.column(b).into_owned());
                let coords = &back * br;
                for c in 0..n {
                    structure[(a * n + b) * n + c] = coords[c];
                }
            }
        }
        let realization = self.realization.as_ref().map(|r| {
            (0..n)
                .map(|a| {
                    let mut m = DMatrix::zeros(r[0].nrows(), r[0].ncols());
                    for i in 0..n {
                        m += &r[i] * change[(i, a)];
                    }
                    m
                })
                .collect()
        });
        (
            Self { dim: n, structure, inner: DMatrix::identity(n, n), realization, trace_scale: self.trace_scale },
            change,
        )
    }

    fn check_len(&self, v: &DVector<T>) -> Result<(), LieError> {
        if v.len() != self.dim {
            return Err(LieError::DimensionMismatch { expected: self.dim, got: v.len() });
        }
        Ok(())
    }

    /// `[X, Y]` by contraction with the structure tensor.
    pub fn bracket(&self, x: &DVector<T>, y: &DVector<T>) -> Result<DVector<T>, LieError> {
        self.check_len(x)?;
        self.check_len(y)?;
        Ok(self.bracket_unchecked(x, y))
    }

    pub(crate) fn bracket_unchecked(&self, x: &DVector<T>, y: &DVector<T>) -> DVector<T> {
        let n = self.dim;
        let mut out = DVector::zeros(n);
        for i in 0..n {
            let xi = x[i];
            if xi == T::zero() {
                continue;
            }
            for j in 0..n {
                let w = xi * y[j];
                if w == T::zero() {
                    continue;
                }
                let base = (i * n + j) * n;
                for k in 0..n {
                    out[k] += w * self.structure[base + k];
                }
            }
        }
        out
    }

    /// Matrix of `ad X` acting on coordinates.
    pub fn ad(&self, x: &DVector<T>) -> DMatrix<T> {
        let n = self.dim;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            if x[i] == T::zero() {
                continue;
            }
            for j in 0..n {
                for k in 0..n {
                    m[(k, j)] += x[i] * self.c(i, j, k);
                }
            }
        }
        m
    }

    /// Killing form `B(X, Y) = tr(ad X ad Y)`.
    pub fn killing_form(&self, x: &DVector<T>, y: &DVector<T>) -> Result<T, LieError> {
        self.check_len(x)?;
        self.check_len(y)?;
        Ok((self.ad(x) * self.ad(y)).trace())
    }

    /// Gram matrix of the Killing form in the coordinate basis.
    pub fn killing_matrix(&self) -> DMatrix<T> {
        let n = self.dim;
        let ads: Vec<_> = (0..n).map(|i| self.ad(&unit(n, i))).collect();
        DMatrix::from_fn(n, n, |i, j| (&ads[i] * &ads[j]).trace())
    }

    /// `<X, Y>` for the algebra's inner product.
    pub fn inner_product(&self, x: &DVector<T>, y: &DVector<T>) -> T {
        (x.transpose() * &self.inner * y)[(0, 0)]
    }

    /// Worst Jacobi residual over basis triples as `(i, j, k, residual)`.
    pub fn worst_jacobi(&self) -> Option<(usize, usize, usize, T)> {
        let n = self.dim;
        let mut worst: Option<(usize, usize, usize, T)> = None;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut r = T::zero();
                    for m in 0..n {
                        let mut s = T::zero();
                        for l in 0..n {
                            s += self.c(i, j, l) * self.c(l, k, m)
                                + self.c(j, k, l) * self.c(l, i, m)
                                + self.c(k, i, l) * self.c(l, j, m);
                        }
                        r = r.max(s.abs());
                    }
                    if worst.is_none_or(|w| r > w.3) {
                        worst = Some((i, j, k, r));
                    }
                }
            }
        }
        worst
    }

    /// Largest Jacobi residual over basis triples.
    pub fn jacobi_residual(&self) -> T {
        self.worst_jacobi().map_or(T::zero(), |w| w.3)
    }

    /// Largest entry of `[R_i, R_j] - sum_k c_ijk R_k` over the realization.
    pub fn realization_residual(&self) -> T {
        let Some(r) = &self.realization else { return T::zero() };
        let n = self.dim;
        let mut worst = T::zero();
        for i in 0..n {
            for j in 0..n {
                let mut m = &r[i] * &r[j] - &r[j] * &r[i];
                for k in 0..n {
                    m -= &r[k] * self.c(i, j, k);
                }
                worst = worst.max(linalg::max_abs(&m));
            }
        }
        worst
    }

    /// Realization matrix of the element with coordinates `x`.
    pub fn to_matrix(&self, x: &DVector<T>) -> Result<DMatrix<T>, LieError> {
        let r = self.realization.as_ref().ok_or(LieError::NoRealization)?;
        self.check_len(x)?;
        let mut m = DMatrix::zeros(r[0].nrows(), r[0].ncols());
        for (i, ri) in r.iter().enumerate() {
            m += ri * x[i];
        }
        Ok(m)
    }

    /// Coordinates of a matrix lying in the span of the realization.
    pub fn from_matrix(&self, m: &DMatrix<T>) -> Result<DVector<T>, LieError> {
        let r = self.realization.as_ref().ok_or(LieError::NoRealization)?;
        let n = self.dim;
        let form = |a: &DMatrix<T>, b: &DMatrix<T>| -(a * b).trace() * self.trace_scale;
        let rhs = DVector::from_iterator(n, r.iter().map(|ri| form(ri, m)));
        let gram = DMatrix::from_fn(n, n, |i, j| form(&r[i], &r[j]));
        Ok(gram.lu().solve(&rhs).expect("realization basis is linearly independent"))
    }

    /// `exp(X)` in the realization.
    pub fn exp(&self, x: &DVector<T>) -> Result<DMatrix<T>, LieError> {
        Ok(linalg::expm(&self.to_matrix(x)?))
    }

    /// Matrix of `Ad_g` on coordinates for a group element `g` given in the
    /// realization.
    pub fn adjoint_action(&self, g: &DMatrix<T>) -> Result<DMatrix<T>, LieError> {
        let r = self.realization.as_ref().ok_or(LieError::NoRealization)?;
        let g_inv = g.clone().try_inverse().expect("group element invertible");
        let n = self.dim;
        let mut out = DMatrix::zeros(n, n);
        for (j, rj) in r.iter().enumerate() {
            let moved = g * rj * &g_inv;
            out.set_column(j, &self.from_matrix(&moved)?);
        }
        Ok(out)
    }

    /// Subalgebra spanned by an (orthonormal) subspace, with structure
    /// constants in that basis. Fails when the span is not bracket closed.
    pub fn subalgebra(&self, sub: &Subspace<T>, tol: &Tolerances) -> Result<Self, LieError> {
        if !self.is_orthonormal() {
            return Err(LieError::NotOrthonormal);
        }
        let d = sub.dim();
        let vs = sub.vectors();
        let mut structure = vec![T::zero(); d * d * d];
        let mut worst = T::zero();
        for a in 0..d {
            for b in 0..d {
                let br = self.bracket_unchecked(&vs[a], &vs[b]);
                worst = worst.max(sub.residual(&br));
                let coords = sub.coordinates(&br);
                for c in 0..d {
                    structure[(a * d + b) * d + c] = coords[c];
                }
            }
        }
        let scale = self.structure.iter().fold(T::one(), |a, &b| a.max(b.abs()));
        if worst > T::lit(tol.residual) * scale * T::lit(100.0) {
            return Err(LieError::NotSubalgebra { residual: worst.as_f64() });
        }
        let realization = self.realization.as_ref().map(|r| {
            vs.iter()
                .map(|v| {
                    let mut m = DMatrix::zeros(r[0].nrows(), r[0].ncols());
                    for (i, ri) in r.iter().enumerate() {
                        m += ri * v[i];
                    }
                    m
                })
                .collect()
        });
        Ok(Self { dim: d, structure, inner: DMatrix::identity(d, d), realization, trace_scale: self.trace_scale })
    }

    /// Largest out-of-span residual of `[u, v]` over basis pairs of `sub`.
    pub fn closure_residual(&self, sub: &Subspace<T>) -> T {
        let vs = sub.vectors();
        let mut worst = T::zero();
        for a in 0..vs.len() {
            for b in a + 1..vs.len() {
                worst = worst.max(sub.residual(&self.bracket_unchecked(&vs[a], &vs[b])));
            }
        }
        worst
    }

    /// Subspace of the whole algebra.
    pub fn whole(&self) -> Subspace<T> {
        Subspace::full(self.dim)
    }
}

/// Embeds the complex matrix `re + i im` as a real matrix of twice the size.
pub fn realify<T: Real>(re: &DMatrix<T>, im: &DMatrix<T>) -> DMatrix<T> {
    let n = re.nrows();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(re);
    m.view_mut((n, n), (n, n)).copy_from(re);
    m.view_mut((0, n), (n, n)).copy_from(&(-im));
    m.view_mut((n, 0), (n, n)).copy_from(im);
    m
}

/// `i`-th standard basis vector.
pub fn unit<T: Real>(n: usize, i: usize) -> DVector<T> {
    let mut v = DVector::zeros(n);
    v[i] = T::one();
    v
}

/// Indices (0-based) of a failing basis triple and its residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripleWitness<T: Real> {
    pub indices: (usize, usize, usize),
    pub residual: T,
}

/// Indices (0-based) of a non-commuting basis pair and `|[u, v]|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairWitness<T: Real> {
    pub indices: (usize, usize),
    pub norm: T,
}

fn bracket_scale<T: Real>(alg: &LieAlgebra<T>) -> T {
    alg.structure.iter().fold(T::one(), |a, &b| a.max(b.abs()))
}

/// Whether `[u, [v, w]]` stays in `m` for all basis triples of `m`.
pub fn is_lie_triple_system<T: Real>(
    alg: &LieAlgebra<T>,
    m: &Subspace<T>,
    tol: &Tolerances,
) -> Result<Verdict<T, TripleWitness<T>>, LieError> {
    if m.ambient() != alg.dim() {
        return Err(LieError::DimensionMismatch { expected: alg.dim(), got: m.ambient() });
    }
    let vs = m.vectors();
    let d = vs.len();
    let mut worst = T::zero();
    let mut at = None;
    for v in 0..d {
        for w in v + 1..d {
            let inner = alg.bracket_unchecked(&vs[v], &vs[w]);
            for u in 0..d {
                let r = m.residual(&alg.bracket_unchecked(&vs[u], &inner));
                if r > worst {
                    worst = r;
                    at = Some((u, v, w));
                }
            }
        }
    }
    let s = bracket_scale(alg);
    let holds = worst <= T::lit(tol.residual) * s * s;
    Ok(Verdict {
        holds,
        residual: worst,
        witness: if holds { None } else { at.map(|indices| TripleWitness { indices, residual: worst }) },
    })
}

/// Whether all basis brackets of `m` vanish.
pub fn is_abelian_subspace<T: Real>(
    alg: &LieAlgebra<T>,
    m: &Subspace<T>,
    tol: &Tolerances,
) -> Result<Verdict<T, PairWitness<T>>, LieError> {
    if m.ambient() != alg.dim() {
        return Err(LieError::DimensionMismatch { expected: alg.dim(), got: m.ambient() });
    }
    let vs = m.vectors();
    let eps = T::lit(tol.residual) * bracket_scale(alg);
    let mut worst = T::zero();
    let mut first = None;
    for a in 0..vs.len() {
        for b in a + 1..vs.len() {
            let nrm = alg.bracket_unchecked(&vs[a], &vs[b]).norm();
            if nrm > eps && first.is_none() {
                first = Some(PairWitness { indices: (a, b), norm: nrm });
            }
            worst = worst.max(nrm);
        }
    }
    Ok(Verdict { holds: first.is_none(), residual: worst, witness: first })
}

/// `{Y in W : [X, Y] = 0}` as a numerical kernel.
pub fn centralizer_in<T: Real>(
    alg: &LieAlgebra<T>,
    x: &DVector<T>,
    w: &Subspace<T>,
    tol: &Tolerances,
) -> Result<Subspace<T>, LieError> {
    alg.check_len(x)?;
    if w.ambient() != alg.dim() {
        return Err(LieError::DimensionMismatch { expected: alg.dim(), got: w.ambient() });
    }
    if w.dim() == 0 {
        return Ok(w.clone());
    }
    let image = alg.ad(x) * w.basis();
    let rel = T::lit(tol.rank);
    // Compare against the scale of X so that X = 0 (or tiny) keeps all of W.
    let scale = x.norm() * bracket_scale(alg);
    if linalg::singular_values(&image).first().copied().unwrap_or_else(T::zero) <= scale * rel {
        return Ok(w.clone());
    }
    let coeffs = linalg::null_space(&image, rel);
    let basis = linalg::orthonormalize_columns(&(w.basis() * coeffs), rel);
    Ok(Subspace::from_orthonormal(basis))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_normal, random_orthogonal};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn su2() -> LieAlgebra<f64> {
        LieAlgebra::classical(ClassicalFamily::SpecialUnitary, 2).unwrap()
    }

    /// Independent oracle: commutators of the 2x2 complex matrices -i sigma_k / 2,
    /// expanded by hand into the real and imaginary parts.
    fn pauli_commutator_oracle() -> [[[f64; 3]; 3]; 3] {
        // X_k = -i sigma_k / 2 ; [X_a, X_b] = eps_abc X_c
        let mut c = [[[0.0; 3]; 3]; 3];
        let eps = |a: usize, b: usize, k: usize| -> f64 {
            match (a, b, k) {
                (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
                (1, 0, 2) | (2, 1, 0) | (0, 2, 1) => -1.0,
                _ => 0.0,
            }
        };
        for (a, ca) in c.iter_mut().enumerate() {
            for (b, cab) in ca.iter_mut().enumerate() {
                for (k, v) in cab.iter_mut().enumerate() {
                    *v = eps(a, b, k);
                }
            }
        }
        c
    }

    #[test]
    fn torus_is_abelian() {
        let t = LieAlgebra::<f64>::classical(ClassicalFamily::Torus, 2).unwrap();
        assert_eq!(t.dim(), 2);
        assert!(t.structure.iter().all(|&c| c == 0.0));
        let x = DVector::from_vec(vec![1.0, 2.0]);
        let y = DVector::from_vec(vec![-3.0, 0.5]);
        assert_eq!(t.bracket(&x, &y).unwrap().norm(), 0.0);
        assert_eq!(t.killing_form(&x, &y).unwrap(), 0.0);
    }

    #[test]
    fn su2_brackets_are_cyclic() {
        let l = su2();
        assert_eq!(l.dim(), 3);
        let oracle = pauli_commutator_oracle();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    assert!((l.structure_constant(i, j, k) - oracle[i][j][k]).abs() < 1e-14);
                }
            }
        }
        let e3 = l.bracket(&unit(3, 0), &unit(3, 1)).unwrap();
        assert!((e3 - unit::<f64>(3, 2)).norm() < 1e-14);
    }

    #[test]
    fn so3_matches_su2_structure_constants() {
        let so3 = LieAlgebra::<f64>::classical(ClassicalFamily::SpecialOrthogonal, 3).unwrap();
        let su = su2();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    assert!((so3.structure_constant(i, j, k) - su.structure_constant(i, j, k)).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn killing_form_su2_is_minus_two() {
        let l = su2();
        let b = l.killing_form(&unit(3, 0), &unit(3, 0)).unwrap();
        assert!((b + 2.0).abs() < 1e-13);
    }

    #[test]
    fn classical_rejects_small_n() {
        assert!(matches!(
            LieAlgebra::<f64>::classical(ClassicalFamily::SpecialUnitary, 1),
            Err(LieError::Unsupported { .. })
        ));
        assert!(LieAlgebra::<f64>::classical(ClassicalFamily::Torus, 0).is_err());
    }

    #[test]
    fn dimensions_of_families() {
        let dims = [
            (ClassicalFamily::SpecialUnitary, 3, 8),
            (ClassicalFamily::SpecialOrthogonal, 4, 6),
            (ClassicalFamily::Unitary, 2, 4),
            (ClassicalFamily::Torus, 3, 3),
        ];
        for (f, n, d) in dims {
            let l = LieAlgebra::<f64>::classical(f, n).unwrap();
            assert_eq!(l.dim(), d, "{f}({n})");
            assert!(l.jacobi_residual() < 1e-10);
        }
    }

    #[test]
    fn bracket_dimension_mismatch() {
        let l = su2();
        let bad = DVector::zeros(2);
        assert!(matches!(l.bracket(&bad, &unit(3, 0)), Err(LieError::DimensionMismatch { .. })));
    }

    #[test]
    fn centralizer_examples() {
        let tol = Tolerances::default();
        let l = su2();
        let all = l.whole();
        let z = centralizer_in(&l, &DVector::zeros(3), &all, &tol).unwrap();
        assert_eq!(z.dim(), 3);
        let c = centralizer_in(&l, &unit(3, 0), &all, &tol).unwrap();
        assert_eq!(c.dim(), 1);
        assert!(c.residual(&unit(3, 0)) < 1e-14);
        let t = LieAlgebra::<f64>::classical(ClassicalFamily::Torus, 3).unwrap();
        let ct = centralizer_in(&t, &DVector::from_vec(vec![1.0, 2.0, 3.0]), &t.whole(), &tol).unwrap();
        assert_eq!(ct.dim(), 3);
    }

    #[test]
    fn random_planes_in_su3_are_not_triple_systems() {
        let tol = Tolerances::default();
        let l = LieAlgebra::<f64>::classical(ClassicalFamily::SpecialUnitary, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let m = Subspace::span(8, &[random_normal(&mut rng, 8), random_normal(&mut rng, 8)], 1e-9);
            let v = is_lie_triple_system(&l, &m, &tol).unwrap();
            assert!(!v.holds);
            assert!(v.witness.unwrap().residual > 1e-3);
        }
    }

    #[test]
    fn lines_and_abelian_spaces_are_triple_systems() {
        let tol = Tolerances::default();
        let l = LieAlgebra::<f64>::classical(ClassicalFamily::SpecialUnitary, 3).unwrap();
        let line = Subspace::span(8, &[unit(8, 3)], 1e-9);
        assert!(is_lie_triple_system(&l, &line, &tol).unwrap().holds);
        assert!(is_abelian_subspace(&l, &line, &tol).unwrap().holds);
        // diagonal (Cartan) subalgebra: last two basis vectors
        let cartan = Subspace::span(8, &[unit(8, 6), unit(8, 7)], 1e-9);
        assert!(is_abelian_subspace(&l, &cartan, &tol).unwrap().holds);
        assert!(is_lie_triple_system(&l, &cartan, &tol).unwrap().holds);
    }

    #[test]
    fn predicates_survive_rebasing() {
        let tol = Tolerances::default();
        let l = LieAlgebra::<f64>::classical(ClassicalFamily::SpecialUnitary, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let m = Subspace::span(8, &[random_normal(&mut rng, 8), random_normal(&mut rng, 8)], 1e-9);
            let q = random_orthogonal::<f64, _>(&mut rng, 2);
            let r = m.rebased(&q);
            assert_eq!(
                is_lie_triple_system(&l, &m, &tol).unwrap().holds,
                is_lie_triple_system(&l, &r, &tol).unwrap().holds
            );
            assert_eq!(
                is_abelian_subspace(&l, &m, &tol).unwrap().holds,
                is_abelian_subspace(&l, &r, &tol).unwrap().holds
            );
        }
    }

    #[test]
    fn structure_validation_reports_offending_index() {
        let mut c = vec![0.0; 27];
        c[5] = 1.0; // [e1,e2] = e3 without the antisymmetric partner
        let err = LieAlgebra::new(3, c, DMatrix::identity(3, 3), None, &Tolerances::default()).unwrap_err();
        assert_eq!(err, LieError::NotAntisymmetric { i: 1, j: 2, k: 3, residual: 1.0 });
    }

    #[test]
    fn orthonormalization_preserves_brackets() {
        let l = su2();
        let mut inner = DMatrix::identity(3, 3);
        inner[(0, 0)] = 4.0;
        let skewed = LieAlgebra::new(3, l.structure.clone(), inner, None, &Tolerances::default()).unwrap();
        let (o, change) = skewed.orthonormalized();
        assert!(o.is_orthonormal());
        let x = DVector::from_vec(vec![0.3, -1.0, 0.2]);
        let y = DVector::from_vec(vec![1.1, 0.4, -0.7]);
        let lhs = &change * o.bracket(&x, &y).unwrap();
        let rhs = skewed.bracket(&(&change * &x), &(&change * &y)).unwrap();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn single_precision_su2() {
        let l = LieAlgebra::<f32>::classical(ClassicalFamily::SpecialUnitary, 2).unwrap();
        let b = l.bracket(&unit(3, 1), &unit(3, 2)).unwrap();
        assert!((b - unit::<f32>(3, 0)).norm() < 1e-6);
        assert!((l.killing_form(&unit(3, 2), &unit(3, 2)).unwrap() + 2.0).abs() < 1e-5);
    }

    fn family(k: usize) -> (ClassicalFamily, usize) {
        [
            (ClassicalFamily::SpecialUnitary, 2),
            (ClassicalFamily::SpecialUnitary, 3),
            (ClassicalFamily::SpecialOrthogonal, 3),
            (ClassicalFamily::SpecialOrthogonal, 4),
            (ClassicalFamily::Unitary, 2),
            (ClassicalFamily::Torus, 3),
        ][k]
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        #[test]
        fn built_algebras_satisfy_jacobi(k in 0usize..6) {
            let (f, n) = family(k);
            let l = LieAlgebra::<f64>::classical(f, n).unwrap();
            proptest::prop_assert!(l.jacobi_residual() < 1e-10);
            proptest::prop_assert!(l.realization_residual() < 1e-10);
        }

        #[test]
        fn killing_form_is_symmetric_and_invariant(k in 0usize..6, seed in 0u64..100_000) {
            let (f, n) = family(k);
            let l = LieAlgebra::<f64>::classical(f, n).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..16 {
                let (x, y, z) = (random_normal(&mut rng, l.dim()), random_normal(&mut rng, l.dim()), random_normal(&mut rng, l.dim()));
                let b = |u: &DVector<f64>, v: &DVector<f64>| l.killing_form(u, v).unwrap();
                proptest::prop_assert!((b(&x, &y) - b(&y, &x)).abs() < 1e-9);
                // B([x, y], z) = -B(y, [x, z])
                let lhs = b(&l.bracket(&x, &y).unwrap(), &z);
                let rhs = -b(&y, &l.bracket(&x, &z).unwrap());
                proptest::prop_assert!((lhs - rhs).abs() < 1e-9, "{} vs {}", lhs, rhs);
            }
        }

        #[test]
        fn killing_form_sign(k in 0usize..6) {
            let (f, n) = family(k);
            let l = LieAlgebra::<f64>::classical(f, n).unwrap();
            let ev = l.killing_matrix().symmetric_eigen().eigenvalues;
            let semisimple = matches!(f, ClassicalFamily::SpecialUnitary | ClassicalFamily::SpecialOrthogonal);
            proptest::prop_assert!(ev.iter().all(|&e| e < 1e-10));
            if semisimple {
                proptest::prop_assert!(ev.iter().all(|&e| e < -1e-6));
            }
        }

        #[test]
        fn predicates_are_basis_independent(seed in 0u64..100_000, d in 1usize..4) {
            let tol = Tolerances::default();
            let l = LieAlgebra::<f64>::classical(ClassicalFamily::SpecialUnitary, 3).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vs: Vec<_> = (0..d).map(|_| random_normal(&mut rng, 8)).collect();
            let m = Subspace::span(8, &vs, 1e-9);
            let r = m.rebased(&random_orthogonal::<f64, _>(&mut rng, m.dim()));
            proptest::prop_assert_eq!(
                is_lie_triple_system(&l, &m, &tol).unwrap().holds,
                is_lie_triple_system(&l, &r, &tol).unwrap().holds
            );
            proptest::prop_assert_eq!(
                is_abelian_subspace(&l, &m, &tol).unwrap().holds,
                is_abelian_subspace(&l, &r, &tol).unwrap().holds
            );
        }
    }
}
