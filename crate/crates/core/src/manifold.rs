//! Model manifolds with closed-form geodesics, parallel transport and
//! curvature: Euclidean space, round spheres and Riemannian products of
//! round spheres, all embedded in a coordinate space `R^N`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Subspace;
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ManifoldError {
    #[error("radius must be positive, got {0}")]
    Radius(f64),
    #[error("factor dimensions must be positive")]
    EmptyFactor,
    #[error("{dims} factor dimensions for {radii} radii")]
    Shape { dims: usize, radii: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Euclidean,
    UnitSphere,
    ProductOfSpheres,
}

/// One Riemannian factor occupying a block of coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Factor<T: Real> {
    Flat { dim: usize },
    /// Sphere of the given radius inside `R^ambient`.
    Sphere { ambient: usize, radius: T },
}

impl<T: Real> Factor<T> {
    fn ambient(&self) -> usize {
        match *self {
            Factor::Flat { dim } => dim,
            Factor::Sphere { ambient, .. } => ambient,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelManifold<T: Real> {
    factors: Vec<Factor<T>>,
    offsets: Vec<usize>,
    ambient: usize,
}

impl<T: Real> ModelManifold<T> {
    fn from_factors(factors: Vec<Factor<T>>) -> Self {
        let mut offsets = Vec::with_capacity(factors.len());
        let mut at = 0;
        for f in &factors {
            offsets.push(at);
            at += f.ambient();
        }
        Self { factors, offsets, ambient: at }
    }

    pub fn euclidean(n: usize) -> Self {
        Self::from_factors(vec![Factor::Flat { dim: n }])
    }

    /// The unit sphere `S^{n-1}` in `R^n`.
    pub fn unit_sphere(n: usize) -> Self {
        Self::from_factors(vec![Factor::Sphere { ambient: n, radius: T::one() }])
    }

    /// `S(r_1) x ... x S(r_k)` with factor `i` inside `R^{dims[i]}`.
    pub fn product_of_spheres(dims: &[usize], radii: &[T]) -> Result<Self, ManifoldError> {
        if dims.len() != radii.len() || dims.is_empty() {
            return Err(ManifoldError::Shape { dims: dims.len(), radii: radii.len() });
        }
        let mut factors = Vec::new();
        for (&d, &r) in dims.iter().zip(radii) {
            if d == 0 {
                return Err(ManifoldError::EmptyFactor);
            }
            if r <= T::zero() {
                return Err(ManifoldError::Radius(r.as_f64()));
            }
            factors.push(Factor::Sphere { ambient: d, radius: r });
        }
        Ok(Self::from_factors(factors))
    }

    pub fn kind(&self) -> ModelKind {
        match self.factors.as_slice() {
            [Factor::Flat { .. }] => ModelKind::Euclidean,
            [Factor::Sphere { .. }] => ModelKind::UnitSphere,
            _ => ModelKind::ProductOfSpheres,
        }
    }

    pub fn factors(&self) -> &[Factor<T>] {
        &self.factors
    }

    pub fn radii(&self) -> Vec<T> {
        self.factors
            .iter()
            .filter_map(|f| match *f {
                Factor::Sphere { radius, .. } => Some(radius),
                Factor::Flat { .. } => None,
            })
            .collect()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    /// Intrinsic dimension.
    pub fn dim(&self) -> usize {
        self.factors
            .iter()
            .map(|f| match *f {
                Factor::Flat { dim } => dim,
                Factor::Sphere { ambient, .. } => ambient - 1,
            })
            .sum()
    }

    fn blocks(&self) -> impl Iterator<Item = (usize, Factor<T>)> + '_ {
        self.offsets.iter().copied().zip(self.factors.iter().copied())
    }

    /// Largest deviation of `p` from the manifold.
    pub fn residual(&self, p: &DVector<T>) -> T {
        let mut worst = T::zero();
        for (o, f) in self.blocks() {
            if let Factor::Sphere { ambient, radius } = f {
                worst = worst.max((p.rows(o, ambient).norm() - radius).abs());
            }
        }
        worst
    }

    /// Radial projection of a point onto the manifold (blocks near zero are
    /// left alone).
    pub fn normalize(&self, p: &DVector<T>) -> DVector<T> {
        let mut out = p.clone();
        for (o, f) in self.blocks() {
            if let Factor::Sphere { ambient, radius } = f {
                let n = p.rows(o, ambient).norm();
                if n > T::zero() {
                    let scaled = p.rows(o, ambient) * (radius / n);
                    out.rows_mut(o, ambient).copy_from(&scaled);
                }
            }
        }
        out
    }

    /// Removes the radial components of `v` at `p`.
    pub fn tangent_project(&self, p: &DVector<T>, v: &DVector<T>) -> DVector<T> {
        let mut out = v.clone();
        for (o, f) in self.blocks() {
            if let Factor::Sphere { ambient, .. } = f {
                let pb = p.rows(o, ambient);
                let n2 = pb.norm_squared();
                if n2 > T::zero() {
                    let c = pb.dot(&v.rows(o, ambient)) / n2;
                    let proj = v.rows(o, ambient) - pb * c;
                    out.rows_mut(o, ambient).copy_from(&proj);
                }
            }
        }
        out
    }

    /// Orthonormal basis of `T_p M` as a subspace of the coordinate space.
    pub fn tangent_space(&self, p: &DVector<T>) -> Subspace<T> {
        let mut cols = Vec::new();
        for (o, f) in self.blocks() {
            match f {
                Factor::Flat { dim } => {
                    for i in 0..dim {
                        let mut e = DVector::zeros(self.ambient);
                        e[o + i] = T::one();
                        cols.push(e);
                    }
                }
                Factor::Sphere { ambient, .. } => {
                    let pb = p.rows(o, ambient).into_owned();
                    let radial = Subspace::span(ambient, &[pb], T::lit(1e-12));
                    for v in radial.complement(T::lit(1e-12)).vectors() {
                        let mut e = DVector::zeros(self.ambient);
                        e.rows_mut(o, ambient).copy_from(&v);
                        cols.push(e);
                    }
                }
            }
        }
        Subspace::from_orthonormal(crate::linalg::from_columns(self.ambient, &cols))
    }

    /// `(gamma(t), gamma'(t))` for the geodesic with `gamma(0) = p`, `gamma'(0) = v`.
    pub fn geodesic(&self, p: &DVector<T>, v: &DVector<T>, t: T) -> (DVector<T>, DVector<T>) {
        let mut x = DVector::zeros(self.ambient);
        let mut dx = DVector::zeros(self.ambient);
        for (o, f) in self.blocks() {
            let n = f.ambient();
            let pb = p.rows(o, n);
            let vb = v.rows(o, n);
            match f {
                Factor::Flat { .. } => {
                    x.rows_mut(o, n).copy_from(&(pb + vb * t));
                    dx.rows_mut(o, n).copy_from(&vb);
                }
                Factor::Sphere { radius, .. } => {
                    let s = vb.norm();
                    if s == T::zero() {
                        x.rows_mut(o, n).copy_from(&pb);
                        continue;
                    }
                    let th = s * t / radius;
                    let (sn, cs) = th.sin_cos();
                    x.rows_mut(o, n).copy_from(&(pb * cs + vb * (radius / s * sn)));
                    dx.rows_mut(o, n).copy_from(&(pb * (-(s / radius) * sn) + vb * cs));
                }
            }
        }
        (x, dx)
    }

    /// Parallel transport of the tangent vector `w` along the geodesic with
    /// initial data `(p, v)` from time 0 to `t`.
    pub fn transport(&self, p: &DVector<T>, v: &DVector<T>, t: T, w: &DVector<T>) -> DVector<T> {
        let mut out = w.clone();
        for (o, f) in self.blocks() {
            if let Factor::Sphere { ambient: n, radius } = f {
                let vb = v.rows(o, n);
                let s = vb.norm();
                if s == T::zero() {
                    continue;
                }
                let vh = vb / s;
                let ph = p.rows(o, n) / radius;
                let wb = w.rows(o, n);
                let a = wb.dot(&vh);
                let (sn, cs) = (s * t / radius).sin_cos();
                let moved = wb - &vh * a + (ph * (-sn) + vh * cs) * a;
                out.rows_mut(o, n).copy_from(&moved);
            }
        }
        out
    }

    /// Transports every column of `frame`.
    pub fn transport_frame(&self, p: &DVector<T>, v: &DVector<T>, t: T, frame: &DMatrix<T>) -> DMatrix<T> {
        let mut out = frame.clone();
        for j in 0..frame.ncols() {
            let moved = self.transport(p, v, t, &frame.column(j).into_owned());
            out.set_column(j, &moved);
        }
        out
    }

    /// Riemann tensor `R(x, y) z` at `p`, with the convention that the
    /// sectional curvature is `<R(x, y) y, x>` on orthonormal pairs.
    pub fn curvature(&self, _p: &DVector<T>, x: &DVector<T>, y: &DVector<T>, z: &DVector<T>) -> DVector<T> {
        let mut out = DVector::zeros(self.ambient);
        for (o, f) in self.blocks() {
            if let Factor::Sphere { ambient: n, radius } = f {
                let k = T::one() / (radius * radius);
                let (xb, yb, zb) = (x.rows(o, n), y.rows(o, n), z.rows(o, n));
                let r = (xb * yb.dot(&zb) - yb * xb.dot(&zb)) * k;
                out.rows_mut(o, n).copy_from(&r);
            }
        }
        out
    }

    /// Sectional curvature of the plane spanned by `x`, `y` at `p`.
    pub fn sectional_curvature(&self, p: &DVector<T>, x: &DVector<T>, y: &DVector<T>) -> T {
        let area2 = x.norm_squared() * y.norm_squared() - x.dot(y).powi(2);
        self.curvature(p, x, y, y).dot(x) / area2
    }

    /// Matrix of `w -> R(w, v) v` on the columns of an orthonormal frame.
    pub fn jacobi_operator(&self, p: &DVector<T>, v: &DVector<T>, frame: &DMatrix<T>) -> DMatrix<T> {
        let m = frame.ncols();
        let img: Vec<DVector<T>> =
            (0..m).map(|j| self.curvature(p, &frame.column(j).into_owned(), v, v)).collect();
        let k = DMatrix::from_fn(m, m, |i, j| frame.column(i).dot(&img[j]));
        (&k + k.transpose()) * T::lit(0.5)
    }

    /// Riemannian distance (product of Euclidean and great-circle distances).
    pub fn distance(&self, p: &DVector<T>, q: &DVector<T>) -> T {
        let mut acc = T::zero();
        for (o, f) in self.blocks() {
            let n = f.ambient();
            let chord = (p.rows(o, n) - q.rows(o, n)).norm();
            let d = match f {
                Factor::Flat { .. } => chord,
                Factor::Sphere { radius, .. } => {
                    let half = (chord / (radius + radius)).min(T::one());
                    radius * (half.asin() + half.asin())
                }
            };
            acc += d * d;
        }
        acc.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn sphere_geodesic_stays_on_sphere_and_closes() {
        let s = ModelManifold::<f64>::unit_sphere(3);
        let p = v(&[1.0, 0.0, 0.0]);
        let dir = v(&[0.0, 0.6, 0.8]);
        for k in 0..20 {
            let t = 0.3 * k as f64;
            let (x, dx) = s.geodesic(&p, &dir, t);
            assert!(s.residual(&x) < 1e-14);
            assert!(x.dot(&dx).abs() < 1e-14);
            assert!((dx.norm() - 1.0).abs() < 1e-14);
        }
        let (x, _) = s.geodesic(&p, &dir, 2.0 * std::f64::consts::PI);
        assert!((x - p).norm() < 1e-13);
    }

    #[test]
    fn transport_is_isometric_and_tangent() {
        let m = ModelManifold::<f64>::product_of_spheres(&[3, 3], &[1.0, 2f64.powf(0.25)]).unwrap();
        let p = m.normalize(&v(&[1.0, 0.2, -0.3, 0.1, 1.0, 0.4]));
        let tp = m.tangent_space(&p);
        assert_eq!(tp.dim(), 4);
        let dir = tp.vector(0) * 0.7 + tp.vector(3) * 0.4;
        let frame = tp.basis().clone();
        let moved = m.transport_frame(&p, &dir, 1.3, &frame);
        let (x, dx) = m.geodesic(&p, &dir, 1.3);
        assert!((moved.transpose() * &moved - DMatrix::identity(4, 4)).norm() < 1e-13);
        for j in 0..4 {
            let c = moved.column(j).into_owned();
            assert!((m.tangent_project(&x, &c) - &c).norm() < 1e-13);
        }
        // the velocity is transported to itself
        assert!((m.transport(&p, &dir, 1.3, &dir) - dx).norm() < 1e-13);
    }

    #[test]
    fn curvature_of_round_factors() {
        let m = ModelManifold::<f64>::product_of_spheres(&[3, 3], &[1.0, 2.0]).unwrap();
        let p = v(&[1.0, 0.0, 0.0, 0.0, 0.0, 2.0]);
        let x = v(&[0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let y = v(&[0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let z = v(&[0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let w = v(&[0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert!((m.sectional_curvature(&p, &x, &y) - 1.0).abs() < 1e-15);
        assert!((m.sectional_curvature(&p, &z, &w) - 0.25).abs() < 1e-15);
        assert!(m.sectional_curvature(&p, &x, &z).abs() < 1e-15);
        let e = ModelManifold::<f64>::euclidean(3);
        assert_eq!(e.sectional_curvature(&p.rows(0, 3).into_owned(), &x.rows(0, 3).into_owned(), &y.rows(0, 3).into_owned()), 0.0);
    }

    #[test]
    fn great_circle_distance() {
        let s = ModelManifold::<f64>::unit_sphere(2);
        let d = s.distance(&v(&[1.0, 0.0]), &v(&[0.0, 1.0]));
        assert!((d - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }
}
