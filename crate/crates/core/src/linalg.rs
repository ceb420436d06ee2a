//! Dense linear-algebra helpers: numerical rank, kernels, orthonormal bases
//! and the [`Subspace`] type that every "is contained in" test reduces to.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::scalar::Real;

/// Numerical thresholds shared across modules.
///
/// All subspace equalities and inclusions are singular-value rank tests at
/// `rank` relative to the largest singular value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative singular-value cutoff for rank and kernel decisions.
    pub rank: f64,
    /// Absolute residual accepted for "lies in span" / "vanishes" predicates,
    /// measured on unit-scale inputs.
    pub residual: f64,
    /// A negative verdict is robust only when its witness exceeds this.
    pub robust_witness: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rank: 1e-9, residual: 1e-9, robust_witness: 1e-6 }
    }
}

impl Tolerances {
    /// Looser defaults suitable for single precision.
    pub fn single_precision() -> Self {
        Self { rank: 1e-4, residual: 1e-4, robust_witness: 1e-2 }
    }
}

/// Full right-singular basis and singular values of `m` (rows may be fewer
/// than columns; the matrix is zero-padded so `V` is always square).
fn svd_right<T: Real>(m: &DMatrix<T>) -> (Vec<T>, DMatrix<T>) {
    let (r, c) = m.shape();
    if c == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let padded = if r < c {
        let mut p = DMatrix::zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let sv = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut v = DMatrix::zeros(c, c);
    for (col, &i) in order.iter().enumerate() {
        for k in 0..c {
            v[(k, col)] = v_t[(i, k)];
        }
    }
    (sv, v)
}

/// Singular values in descending order.
pub fn singular_values<T: Real>(m: &DMatrix<T>) -> Vec<T> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<T> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

fn cutoff<T: Real>(largest: T, rel: T) -> T {
    // Below this absolute level everything is treated as zero, so X = 0
    // yields a full kernel rather than a noise-driven one.
    let floor = T::lit(1e-13);
    (largest * rel).max(floor)
}

/// Numerical rank with a relative singular-value threshold.
pub fn rank<T: Real>(m: &DMatrix<T>, rel: T) -> usize {
    let sv = singular_values(m);
    match sv.first() {
        None => 0,
        Some(&s0) => {
            let thr = cutoff(s0, rel);
            sv.iter().filter(|&&s| s > thr).count()
        }
    }
}

/// Orthonormal basis (as columns) of the kernel of `m`.
pub fn null_space<T: Real>(m: &DMatrix<T>, rel: T) -> DMatrix<T> {
    let c = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(c, c);
    }
    let (sv, v) = svd_right(m);
    let thr = cutoff(sv.first().copied().unwrap_or_else(T::zero), rel);
    let r = sv.iter().filter(|&&s| s > thr).count();
    v.columns(r, c - r).into_owned()
}

/// Orthonormal basis (as columns) of the column space of `m`.
pub fn column_space<T: Real>(m: &DMatrix<T>, rel: T) -> DMatrix<T> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return DMatrix::zeros(rows, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let s0 = svd.singular_values.iter().copied().fold(T::zero(), |a, b| a.max(b));
    let thr = cutoff(s0, rel);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > thr)
        .collect();
    let mut out = DMatrix::zeros(rows, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        out.set_column(j, &u.column(i));
    }
    orthonormalize_columns(&out, rel)
}

/// Modified Gram-Schmidt with a second re-orthogonalization pass. Columns whose
/// remaining norm falls below `rel` times their original norm are dropped, so
/// the output order follows the input order.
pub fn orthonormalize_columns<T: Real>(m: &DMatrix<T>, rel: T) -> DMatrix<T> {
    let mut kept: Vec<DVector<T>> = Vec::new();
    let scale = m.column_iter().map(|c| c.norm()).fold(T::zero(), |a, b| a.max(b));
    let thr = cutoff(scale, rel.max(T::lit(1e-12)));
    for col in m.column_iter() {
        let mut v = col.into_owned();
        for _pass in 0..2 {
            for q in &kept {
                let d = q.dot(&v);
                v.axpy(-d, q, T::one());
            }
        }
        let n = v.norm();
        if n > thr {
            kept.push(v / n);
        }
    }
    from_columns(m.nrows(), &kept)
}

/// Stacks vectors as matrix columns.
pub fn from_columns<T: Real>(rows: usize, cols: &[DVector<T>]) -> DMatrix<T> {
    let mut out = DMatrix::zeros(rows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        out.set_column(j, c);
    }
    out
}

/// Standard normal vector from a seeded generator.
pub fn random_normal<T: Real, R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<T> {
    DVector::from_iterator(n, (0..n).map(|_| T::lit(rng.sample::<f64, _>(StandardNormal))))
}

/// Uniformly distributed unit vector.
pub fn random_unit<T: Real, R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<T> {
    loop {
        let v = random_normal::<T, R>(rng, n);
        let nv = v.norm();
        if nv > T::lit(1e-6) {
            return v / nv;
        }
    }
}

/// Random orthogonal `n x n` matrix (QR of a Gaussian matrix with sign fix).
pub fn random_orthogonal<T: Real, R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<T> {
    let g = DMatrix::from_fn(n, n, |_, _| T::lit(rng.sample::<f64, _>(StandardNormal)));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < T::zero() {
            let neg = -q.column(j);
            q.set_column(j, &neg);
        }
    }
    q
}

/// Matrix exponential.
pub fn expm<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    m.clone().exp()
}

/// Largest absolute entry.
pub fn max_abs<T: Real>(m: &DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |a, &b| a.max(b.abs()))
}

/// An ordered orthonormal basis inside a coordinate space of dimension
/// `ambient`. Houses Lie subalgebras, complements, sections and probes.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace<T: Real> {
    ambient: usize,
    basis: DMatrix<T>,
}

impl<T: Real> Subspace<T> {
    /// Orthonormalizes the given spanning vectors (dependent ones dropped).
    pub fn span(ambient: usize, vectors: &[DVector<T>], rel: T) -> Self {
        assert!(vectors.iter().all(|v| v.len() == ambient), "vector outside ambient space");
        let m = from_columns(ambient, vectors);
        Self { ambient, basis: orthonormalize_columns(&m, rel) }
    }

    /// Span of the columns of `m`.
    pub fn column_span(m: &DMatrix<T>, rel: T) -> Self {
        Self { ambient: m.nrows(), basis: column_space(m, rel) }
    }

    /// Wraps columns that are already orthonormal. Debug builds verify it.
    pub fn from_orthonormal(basis: DMatrix<T>) -> Self {
        let s = Self { ambient: basis.nrows(), basis };
        debug_assert!(s.gram_residual() < T::lit(1e-6), "basis not orthonormal");
        s
    }

    pub fn full(ambient: usize) -> Self {
        Self { ambient, basis: DMatrix::identity(ambient, ambient) }
    }

    pub fn zero(ambient: usize) -> Self {
        Self { ambient, basis: DMatrix::zeros(ambient, 0) }
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.dim() == 0
    }

    /// Basis vectors as columns.
    pub fn basis(&self) -> &DMatrix<T> {
        &self.basis
    }

    pub fn vector(&self, i: usize) -> DVector<T> {
        self.basis.column(i).into_owned()
    }

    pub fn vectors(&self) -> Vec<DVector<T>> {
        (0..self.dim()).map(|i| self.vector(i)).collect()
    }

    /// `max |B^T B - I|`.
    pub fn gram_residual(&self) -> T {
        let g = self.basis.transpose() * &self.basis;
        max_abs(&(g - DMatrix::identity(self.dim(), self.dim())))
    }

    /// Orthogonal projection of `v` onto the subspace.
    pub fn project(&self, v: &DVector<T>) -> DVector<T> {
        &self.basis * (self.basis.transpose() * v)
    }

    /// Coordinates of `v` in this basis (`B^T v`).
    pub fn coordinates(&self, v: &DVector<T>) -> DVector<T> {
        self.basis.transpose() * v
    }

    /// Vector with the given basis coordinates.
    pub fn embed(&self, coords: &DVector<T>) -> DVector<T> {
        &self.basis * coords
    }

    /// Norm of the component of `v` orthogonal to the subspace.
    pub fn residual(&self, v: &DVector<T>) -> T {
        (v - self.project(v)).norm()
    }

    /// Orthogonal complement in the ambient space.
    pub fn complement(&self, rel: T) -> Self {
        let m = self.basis.transpose();
        let basis = if self.dim() == 0 {
            DMatrix::identity(self.ambient, self.ambient)
        } else {
            null_space(&m, rel)
        };
        Self { ambient: self.ambient, basis }
    }

    /// `self ∩ other^⊥`.
    pub fn orthogonal_part(&self, other: &Self, rel: T) -> Self {
        assert_eq!(self.ambient, other.ambient);
        if self.dim() == 0 || other.dim() == 0 {
            return self.clone();
        }
        let m = other.basis.transpose() * &self.basis;
        let coeffs = null_space(&m, rel);
        let basis = orthonormalize_columns(&(&self.basis * coeffs), rel);
        Self { ambient: self.ambient, basis }
    }

    /// `self ∩ other`.
    pub fn intersect(&self, other: &Self, rel: T) -> Self {
        let perp = other.complement(rel);
        self.orthogonal_part(&perp, rel)
    }

    /// Sum of two subspaces.
    pub fn sum(&self, other: &Self, rel: T) -> Self {
        assert_eq!(self.ambient, other.ambient);
        let mut vs = self.vectors();
        vs.extend(other.vectors());
        Self::span(self.ambient, &vs, rel)
    }

    /// Cosines of the principal angles with `other` (descending).
    pub fn principal_cosines(&self, other: &Self) -> Vec<T> {
        let m = self.basis.transpose() * &other.basis;
        singular_values(&m).into_iter().map(|s| s.min(T::one())).collect()
    }

    /// Largest principal angle; `pi/2` when dimensions differ.
    pub fn max_principal_angle(&self, other: &Self) -> T {
        if self.dim() != other.dim() {
            return T::frac_pi_2();
        }
        if self.dim() == 0 {
            return T::zero();
        }
        // sin of the largest angle is the spectral norm of (I - P) B_other,
        // which stays accurate where acos of the cosines would not.
        let r = &other.basis - &self.basis * (self.basis.transpose() * &other.basis);
        let s = singular_values(&r).first().copied().unwrap_or_else(T::zero);
        s.min(T::one()).asin()
    }

    /// Largest out-of-span residual of the other subspace's basis.
    pub fn containment_residual(&self, other: &Self) -> T {
        other.vectors().iter().fold(T::zero(), |a, v| a.max(self.residual(v)))
    }

    /// Whether two subspaces agree (equal dimension, every vector of one
    /// lies in the other within `tol`).
    pub fn same_as(&self, other: &Self, tol: T) -> bool {
        self.dim() == other.dim() && self.containment_residual(other) <= tol
    }

    /// Replaces the basis by `B Q` for an orthogonal `k x k` matrix `Q`.
    pub fn rebased(&self, q: &DMatrix<T>) -> Self {
        Self { ambient: self.ambient, basis: &self.basis * q }
    }

    /// Image under a linear map of the ambient space.
    pub fn mapped(&self, m: &DMatrix<T>, rel: T) -> Self {
        Self::column_span(&(m * &self.basis), rel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn null_space_of_wide_matrix_is_complete() {
        let m = DMatrix::<f64>::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let k = null_space(&m, 1e-9);
        assert_eq!(k.ncols(), 2);
        assert!((m * &k).norm() < 1e-14);
    }

    #[test]
    fn null_space_of_zero_is_everything() {
        let m = DMatrix::<f64>::zeros(2, 3);
        assert_eq!(null_space(&m, 1e-9).ncols(), 3);
    }

    #[test]
    fn rank_ignores_rounding() {
        let m = DMatrix::<f64>::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0 + 1e-15]);
        assert_eq!(rank(&m, 1e-9), 1);
    }

    #[test]
    fn gram_schmidt_drops_dependent_columns() {
        let m = DMatrix::<f64>::from_column_slice(3, 3, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
        let q = orthonormalize_columns(&m, 1e-9);
        assert_eq!(q.ncols(), 2);
        assert!(max_abs(&(q.transpose() * &q - DMatrix::identity(2, 2))) < 1e-15);
    }

    #[test]
    fn complement_and_intersection() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Subspace::span(5, &[random_normal(&mut rng, 5), random_normal(&mut rng, 5)], 1e-9);
        let c = a.complement(1e-9);
        assert_eq!(c.dim(), 3);
        assert!(max_abs(&(a.basis().transpose() * c.basis())) < 1e-12);
        assert_eq!(a.intersect(&c, 1e-9).dim(), 0);
        assert!(a.intersect(&a, 1e-9).same_as(&a, 1e-10));
        assert!(a.sum(&c, 1e-9).same_as(&Subspace::full(5), 1e-10));
    }

    #[test]
    fn principal_angle_of_rotated_basis_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = Subspace::span(4, &[random_normal(&mut rng, 4), random_normal(&mut rng, 4)], 1e-9);
        let q = random_orthogonal::<f64, _>(&mut rng, 2);
        let b = a.rebased(&q);
        assert!(a.max_principal_angle(&b) < 1e-12);
        assert!(b.gram_residual() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn spans_are_orthonormal(seed in 0u64..100_000, n in 1usize..8, k in 0usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut vs: Vec<DVector<f64>> = (0..k).map(|_| random_normal(&mut rng, n)).collect();
            if k > 1 {
                // a dependent column must be dropped
                vs.push(&vs[0] * 2.0 - &vs[1]);
            }
            let s = Subspace::span(n, &vs, 1e-9);
            proptest::prop_assert!(s.gram_residual() < 1e-12);
            proptest::prop_assert_eq!(s.ambient(), n);
            proptest::prop_assert_eq!(s.dim(), k.min(n));
            proptest::prop_assert!(s.sum(&s.complement(1e-9), 1e-9).same_as(&Subspace::full(n), 1e-10));
        }
    }
}
