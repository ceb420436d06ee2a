//! Built-in example systems.

use serde::{Deserialize, Serialize};

use crate::linalg::Subspace;
use crate::polarity::Action;
use crate::symspace::SymmetricPair;

/// Constructors for the algebraic data behind catalog entries.
pub mod build {
    use nalgebra::{DMatrix, DVector};

    use crate::liealg::{realify, ClassicalFamily, LieAlgebra};
    use crate::linalg::{Subspace, Tolerances};
    use crate::manifold::ModelManifold;
    use crate::polarity::{Action, OrthogonalRep};
    use crate::symspace::SymmetricPair;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    pub fn su(n: usize) -> LieAlgebra<f64> {
        LieAlgebra::classical(ClassicalFamily::SpecialUnitary, n).expect("n >= 2")
    }

    pub fn so(n: usize) -> LieAlgebra<f64> {
        LieAlgebra::classical(ClassicalFamily::SpecialOrthogonal, n).expect("n >= 2")
    }

    /// `diag(±1)` acting on the realified `C^n`; `flip` marks `-1` entries
    /// of the complex diagonal, `conj` adds complex conjugation.
    fn realified_diag(n: usize, flip: &[usize], conj: bool) -> DMatrix<f64> {
        let mut d = DMatrix::identity(2 * n, 2 * n);
        for &i in flip {
            d[(i, i)] = -1.0;
            d[(n + i, n + i)] = -1.0;
        }
        if conj {
            for i in n..2 * n {
                d[(i, i)] = -d[(i, i)];
            }
        }
        d
    }

    /// `su(n) / so(n)` with `theta` = complex conjugation.
    pub fn conjugation_pair(n: usize) -> SymmetricPair<f64> {
        let l = su(n);
        let theta = SymmetricPair::involution_by_conjugation(&l, &realified_diag(n, &[], true)).expect("realized");
        SymmetricPair::cartan_decompose(&l, &theta, &tol()).expect("conjugation is an involution")
    }

    /// `su(3) / s(u(1) + u(2))`, the complex projective plane.
    pub fn cp2_pair() -> SymmetricPair<f64> {
        let l = su(3);
        let theta = SymmetricPair::involution_by_conjugation(&l, &realified_diag(3, &[0], false)).expect("realized");
        SymmetricPair::cartan_decompose(&l, &theta, &tol()).expect("inner involution")
    }

    /// Traceless imaginary diagonal matrices of `su(3)`.
    pub fn diagonal_torus(pair: &SymmetricPair<f64>) -> Subspace<f64> {
        let l = pair.algebra();
        let vs: Vec<DVector<f64>> = [[1.0, -1.0, 0.0], [1.0, 1.0, -2.0]]
            .iter()
            .map(|d| l.from_matrix(&realify(&DMatrix::zeros(3, 3), &DMatrix::from_diagonal(&DVector::from_row_slice(d)))).unwrap())
            .collect();
        Subspace::span(l.dim(), &vs, 1e-12)
    }

    /// `s(u(1) + u(2)) ⊂ su(3)`: the fixed algebra of `Ad diag(-1, 1, 1)`.
    pub fn s_u1_u2(l: &LieAlgebra<f64>) -> Subspace<f64> {
        let theta = SymmetricPair::involution_by_conjugation(l, &realified_diag(3, &[0], false)).expect("realized");
        Subspace::column_span(&(DMatrix::identity(l.dim(), l.dim()) + theta), 1e-9)
    }

    pub fn su2_adjoint() -> OrthogonalRep<f64> {
        OrthogonalRep::adjoint(&su(2), &tol()).expect("adjoint representation")
    }

    pub fn su2_adjoint_action() -> Action<f64> {
        Action::linear(su2_adjoint())
    }

    /// Frobenius-orthonormal basis of traceless symmetric `3x3` matrices.
    pub fn sym_traceless_basis() -> Vec<DMatrix<f64>> {
        let mut out = vec![
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0, 0.0])) / 2f64.sqrt(),
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, -2.0])) / 6f64.sqrt(),
        ];
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let mut m = DMatrix::zeros(3, 3);
            m[(i, j)] = 1.0 / 2f64.sqrt();
            m[(j, i)] = 1.0 / 2f64.sqrt();
            out.push(m);
        }
        out
    }

    /// Coordinates of `diag(d)` (trace removed) in [`sym_traceless_basis`].
    pub fn sym_traceless_coords(d: &[f64; 3]) -> DVector<f64> {
        let m = DMatrix::from_diagonal(&DVector::from_row_slice(d));
        DVector::from_iterator(5, sym_traceless_basis().iter().map(|e| e.dot(&m)))
    }

    /// `so(3)` on traceless symmetric matrices by `S -> [X, S]`.
    pub fn so3_sym_traceless() -> OrthogonalRep<f64> {
        let l = so(3);
        let basis = sym_traceless_basis();
        let gens = l
            .realization()
            .expect("realized")
            .iter()
            .map(|x| DMatrix::from_fn(5, 5, |a, b| basis[a].dot(&(x * &basis[b] - &basis[b] * x))))
            .collect();
        OrthogonalRep::new(l, gens, 5, false, &tol()).expect("representation")
    }

    /// `su(2)` acting diagonally on two copies of itself.
    pub fn su2_diag_double() -> OrthogonalRep<f64> {
        let a = su2_adjoint();
        a.direct_sum(&a).expect("same algebra")
    }

    /// Isotropy representation of `su(3)/so(3)`.
    pub fn su3_so3_srep() -> OrthogonalRep<f64> {
        OrthogonalRep::isotropy(&conjugation_pair(3), &tol()).expect("isotropy representation")
    }

    fn circle(generator: DMatrix<f64>, sphere: bool) -> Action<f64> {
        let n = generator.nrows();
        let rep = OrthogonalRep::new(LieAlgebra::abelian(1), vec![generator], n, false, &tol()).expect("antisymmetric");
        Action::linear(if sphere { rep.on_sphere() } else { rep })
    }

    fn rotation(n: usize, blocks: &[(usize, usize)]) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(n, n);
        for &(a, b) in blocks {
            j[(b, a)] = 1.0;
            j[(a, b)] = -1.0;
        }
        j
    }

    /// Hopf circle action on `S^3 ⊂ C^2`.
    pub fn hopf() -> Action<f64> {
        circle(rotation(4, &[(0, 1), (2, 3)]), true)
    }

    /// Rotations about the `z` axis on the unit `S^2`.
    pub fn so2_s2() -> Action<f64> {
        circle(rotation(3, &[(0, 1)]), true)
    }

    pub fn rot_r2() -> Action<f64> {
        circle(rotation(2, &[(0, 1)]), false)
    }

    pub fn trivial_r2() -> Action<f64> {
        Action::linear(OrthogonalRep::trivial(&LieAlgebra::abelian(1), 2))
    }

    /// Diagonal rotations on `S^2(1) × S^2(r)`.
    pub fn so3_s2xs2(r: f64) -> Action<f64> {
        let l = so(3);
        let std = OrthogonalRep::new(l.clone(), l.realization().unwrap().to_vec(), 3, false, &tol()).expect("standard rep");
        let rep = std.direct_sum(&std).expect("same algebra");
        let m = ModelManifold::product_of_spheres(&[3, 3], &[1.0, r]).expect("positive radii");
        Action::on(rep, m).expect("factors preserved")
    }

    /// `su(2)` acting diagonally on `S^5 ⊂ R^3 ⊕ R^3`.
    pub fn su2_diag_s5() -> Action<f64> {
        Action::linear(su2_diag_double().on_sphere())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryKind {
    Representation,
    HomogeneousPair,
    SphereAction,
    ProductSpheresAction,
}

/// Where an expected value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    /// Stated in the literature.
    Literature,
    /// Computed by an independent oracle.
    Derived,
    /// Immediate from the definitions.
    Trivial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub check: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub verdict: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub value: Option<f64>,
    /// Allowed `|value - expected|`.
    pub tolerance: f64,
    pub origin: Origin,
}

impl Expectation {
    fn verdict(check: &str, verdict: bool, origin: Origin) -> Self {
        Self { check: check.into(), verdict: Some(verdict), value: None, tolerance: 0.0, origin }
    }

    fn value(check: &str, value: f64, tolerance: f64, origin: Origin) -> Self {
        Self { check: check.into(), verdict: None, value: Some(value), tolerance, origin }
    }

    pub fn matches(&self, verdict: Option<bool>, value: Option<f64>) -> bool {
        let v_ok = self.verdict.is_none_or(|e| verdict == Some(e));
        let x_ok = self.value.is_none_or(|e| value.is_some_and(|x| (x - e).abs() <= self.tolerance));
        v_ok && x_ok
    }
}

/// A model ready for analysis.
#[derive(Debug, Clone)]
pub enum System {
    /// An isometric action on a model manifold (linear, sphere or product).
    Action(Action<f64>),
    /// A subgroup `H` (given by its Lie algebra) acting on `G/K`.
    Pair { pair: SymmetricPair<f64>, h: Subspace<f64> },
}

#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub kind: EntryKind,
    pub description: &'static str,
    pub parameters: serde_json::Value,
    pub expected: Vec<Expectation>,
}

impl CatalogEntry {
    /// Rebuilds the model from the entry's parameters.
    pub fn build(&self) -> System {
        use build::*;
        match self.name {
            "su2_adjoint" => System::Action(su2_adjoint_action()),
            "so3_sym_traceless" => System::Action(Action::linear(so3_sym_traceless())),
            "su2_diag_double" => System::Action(Action::linear(su2_diag_double())),
            "hopf_s1_s3" => System::Action(hopf()),
            "so2_s2" => System::Action(so2_s2()),
            "t2_cp2" => {
                let pair = cp2_pair();
                let h = diagonal_torus(&pair);
                System::Pair { pair, h }
            }
            "hermann_su3" => {
                let pair = conjugation_pair(3);
                let h = s_u1_u2(pair.algebra());
                System::Pair { pair, h }
            }
            "so3_s2xs2" => System::Action(so3_s2xs2(self.parameters["radius"].as_f64().unwrap_or_else(default_radius))),
            "su3_so3" => {
                let pair = conjugation_pair(3);
                let h = pair.k().clone();
                System::Pair { pair, h }
            }
            "su3_so3_srep" => System::Action(Action::linear(su3_so3_srep())),
            "su2_diag_s5" => System::Action(su2_diag_s5()),
            "rot_r2" => System::Action(rot_r2()),
            "trivial_r2" => System::Action(trivial_r2()),
            other => unreachable!("catalog entry {other} has no builder"),
        }
    }

    pub fn expectation(&self, check: &str) -> Option<&Expectation> {
        self.expected.iter().find(|e| e.check == check)
    }
}

/// `R = 2^(1/4)`, so `R^2` is irrational.
pub fn default_radius() -> f64 {
    2f64.powf(0.25)
}

/// All built-in entries, in a fixed order.
pub fn catalog_list() -> Vec<CatalogEntry> {
    use serde_json::json;
    use Origin::*;
    let e = |check: &str, v: bool, o: Origin| Expectation::verdict(check, v, o);
    let x = |check: &str, v: f64, t: f64, o: Origin| Expectation::value(check, v, t, o);
    vec![
        CatalogEntry {
            name: "su2_adjoint",
            kind: EntryKind::Representation,
            description: "adjoint representation of SU(2) on R^3",
            parameters: json!({}),
            expected: vec![
                e("polarity", true, Literature),
                x("cohomogeneity", 1.0, 0.0, Derived),
                x("weyl", 2.0, 0.0, Derived),
                e("variational-completeness", true, Literature),
                e("reduction-isometry", true, Literature),
            ],
        },
        CatalogEntry {
            name: "so3_sym_traceless",
            kind: EntryKind::Representation,
            description: "SO(3) acting by conjugation on traceless symmetric 3x3 matrices",
            parameters: json!({}),
            expected: vec![
                e("polarity", true, Literature),
                x("cohomogeneity", 2.0, 0.0, Literature),
                x("weyl", 6.0, 0.0, Derived),
                e("reduction-isometry", true, Literature),
                e("orbifold-points", true, Literature),
            ],
        },
        CatalogEntry {
            name: "su2_diag_double",
            kind: EntryKind::Representation,
            description: "SU(2) acting diagonally on R^3 + R^3 (two adjoint copies)",
            parameters: json!({}),
            expected: vec![
                e("polarity", false, Derived),
                x("cohomogeneity", 3.0, 0.0, Derived),
                e("variational-completeness", false, Derived),
            ],
        },
        CatalogEntry {
            name: "hopf_s1_s3",
            kind: EntryKind::SphereAction,
            description: "Hopf circle action on S^3",
            parameters: json!({}),
            expected: vec![
                e("polarity", false, Derived),
                x("cohomogeneity", 2.0, 0.0, Trivial),
                x("oneill", 4.0, 1e-2, Derived),
                x("transversal", std::f64::consts::FRAC_PI_2, 1e-4, Derived),
                e("variational-completeness", false, Derived),
            ],
        },
        CatalogEntry {
            name: "so2_s2",
            kind: EntryKind::SphereAction,
            description: "rotations of S^2 about an axis",
            parameters: json!({}),
            expected: vec![
                e("polarity", true, Trivial),
                x("cohomogeneity", 1.0, 0.0, Trivial),
                e("variational-completeness", true, Literature),
            ],
        },
        CatalogEntry {
            name: "t2_cp2",
            kind: EntryKind::HomogeneousPair,
            description: "maximal torus of SU(3) acting on CP^2",
            parameters: json!({}),
            expected: vec![
                e("polarity", true, Literature),
                e("hyperpolarity", false, Literature),
                x("cohomogeneity", 2.0, 0.0, Derived),
            ],
        },
        CatalogEntry {
            name: "hermann_su3",
            kind: EntryKind::HomogeneousPair,
            description: "S(U(1) x U(2)) acting on SU(3)/SO(3) (symmetric subgroup)",
            parameters: json!({}),
            expected: vec![e("polarity", true, Literature), e("hyperpolarity", true, Literature)],
        },
        CatalogEntry {
            name: "so3_s2xs2",
            kind: EntryKind::ProductSpheresAction,
            description: "SO(3) acting diagonally on S^2(1) x S^2(R)",
            parameters: json!({ "radius": default_radius() }),
            expected: vec![e("polarity", true, Trivial), x("cohomogeneity", 1.0, 0.0, Trivial)],
        },
        CatalogEntry {
            name: "su3_so3",
            kind: EntryKind::HomogeneousPair,
            description: "SO(3) acting on SU(3)/SO(3) (isotropy action)",
            parameters: json!({}),
            expected: vec![
                e("polarity", true, Literature),
                e("hyperpolarity", true, Literature),
                x("weyl", 6.0, 0.0, Derived),
                e("cartan-probe", true, Literature),
            ],
        },
        CatalogEntry {
            name: "su3_so3_srep",
            kind: EntryKind::Representation,
            description: "isotropy representation of SU(3)/SO(3) on R^5",
            parameters: json!({}),
            expected: vec![
                e("polarity", true, Literature),
                x("cohomogeneity", 2.0, 0.0, Derived),
                x("weyl", 6.0, 0.0, Derived),
                e("variational-completeness", true, Literature),
            ],
        },
        CatalogEntry {
            name: "su2_diag_s5",
            kind: EntryKind::SphereAction,
            description: "SU(2) acting diagonally on S^5 in R^3 + R^3",
            parameters: json!({}),
            expected: vec![e("polarity", false, Derived), e("rescale-probe", true, Literature)],
        },
        CatalogEntry {
            name: "rot_r2",
            kind: EntryKind::Representation,
            description: "rotations of the plane",
            parameters: json!({}),
            expected: vec![e("polarity", true, Trivial), x("cohomogeneity", 1.0, 0.0, Trivial)],
        },
        CatalogEntry {
            name: "trivial_r2",
            kind: EntryKind::Representation,
            description: "trivial circle action on the plane",
            parameters: json!({}),
            expected: vec![e("polarity", true, Trivial), x("cohomogeneity", 2.0, 0.0, Trivial)],
        },
    ]
}

pub fn entry(name: &str) -> Option<CatalogEntry> {
    catalog_list().into_iter().find(|e| e.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn names_are_unique_and_entries_build() {
        let list = catalog_list();
        assert!(list.len() >= 8);
        let names: HashSet<_> = list.iter().map(|e| e.name).collect();
        assert_eq!(names.len(), list.len());
        for e in &list {
            match e.build() {
                System::Action(a) => assert_eq!(a.rep().generators().len(), a.rep().algebra().dim()),
                System::Pair { pair, h } => {
                    assert!(pair.grading_residual() < 1e-12);
                    assert!(pair.algebra().closure_residual(&h) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn footnote_radius_squared_is_sqrt_two() {
        let e = entry("so3_s2xs2").unwrap();
        let r = e.parameters["radius"].as_f64().unwrap();
        assert!((r * r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn expectation_matching() {
        let x = Expectation::value("oneill", 4.0, 1e-2, Origin::Derived);
        assert!(x.matches(Some(true), Some(4.005)));
        assert!(!x.matches(Some(true), Some(4.02)));
        assert!(!x.matches(Some(true), None));
        let v = Expectation::verdict("polarity", false, Origin::Derived);
        assert!(v.matches(Some(false), None) && !v.matches(Some(true), None));
    }
}
