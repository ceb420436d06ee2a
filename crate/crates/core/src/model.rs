//! JSON model documents.
//!
//! ```json
//! { "schema": 1, "kind": "algebra", "dim": 3,
//!   "structure": [[1, 2, 3, 1], [2, 3, 1, 1], [3, 1, 2, 1]] }
//! ```
//!
//! Structure entries are 1-based `[i, j, k, c]` meaning `[e_i, e_j] = c e_k`;
//! every entry implies its antisymmetric partner. Matrices are
//! row-major. A non-identity `inner` is orthonormalized away at load time
//! (generators, involution and subalgebra rows are rewritten accordingly).

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use thiserror::Error;

use crate::catalog::System;
use crate::liealg::{LieAlgebra, LieError};
use crate::linalg::{Subspace, Tolerances};
use crate::manifold::{ManifoldError, ModelManifold};
use crate::polarity::{Action, OrthogonalRep, PolarityError};
use crate::symspace::{SymmetricPair, SymspaceError};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed document: {0}")]
    Json(String),
    #[error("field `{field}`: {message}")]
    Schema { field: String, message: String },
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error(transparent)]
    Symspace(#[from] SymspaceError),
    #[error(transparent)]
    Polarity(#[from] PolarityError),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
}

fn schema(field: impl Into<String>, message: impl Into<String>) -> ModelError {
    ModelError::Schema { field: field.into(), message: message.into() }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    schema: u32,
    kind: String,
    dim: usize,
    #[serde(default)]
    structure: Vec<Vec<f64>>,
    inner: Option<Vec<f64>>,
    realization: Option<Vec<Vec<f64>>>,
    involution: Option<Vec<f64>>,
    subalgebra: Option<Vec<Vec<f64>>>,
    generators: Option<Vec<Vec<f64>>>,
    manifold: Option<ManifoldSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifoldSpec {
    kind: String,
    #[serde(default)]
    radii: Vec<f64>,
    /// Ambient dimension of each sphere factor (default 3 each).
    dims: Option<Vec<usize>>,
}

/// A validated model.
#[derive(Debug, Clone)]
pub enum LoadedModel {
    Algebra(LieAlgebra<f64>),
    System(System),
}

pub fn load_model_file(path: &Path) -> Result<LoadedModel, ModelError> {
    let text = std::fs::read_to_string(path).map_err(|e| ModelError::Io { path: path.display().to_string(), message: e.to_string() })?;
    load_model(&text)
}

pub fn load_model(text: &str) -> Result<LoadedModel, ModelError> {
    let doc: Document = serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))?;
    if doc.schema != SCHEMA_VERSION {
        return Err(schema("schema", format!("unsupported version {} (expected {SCHEMA_VERSION})", doc.schema)));
    }
    let tol = Tolerances::default();
    let n = doc.dim;
    let structure = structure_tensor(n, &doc.structure)?;
    let inner = match &doc.inner {
        Some(v) => square("inner", v, n)?,
        None => DMatrix::identity(n, n),
    };
    let realization = match &doc.realization {
        Some(ms) => {
            if ms.len() != n {
                return Err(schema("realization", format!("expected {n} matrices, got {}", ms.len())));
            }
            let side = side_of("realization[0]", ms.first().map_or(0, Vec::len))?;
            Some(ms.iter().enumerate().map(|(i, m)| square(&format!("realization[{i}]"), m, side)).collect::<Result<Vec<_>, _>>()?)
        }
        None => None,
    };
    let raw = LieAlgebra::new(n, structure, inner, realization, &tol)?;
    // new coordinates -> old coordinates
    let (alg, change) = if raw.is_orthonormal() { (raw, DMatrix::identity(n, n)) } else { raw.orthonormalized() };
    let to_new = change.clone().try_inverse().expect("change of basis is invertible");

    let generators = |field: &str| -> Result<(Vec<DMatrix<f64>>, usize), ModelError> {
        let gs = doc.generators.as_ref().ok_or_else(|| schema(field, "required for this kind"))?;
        if gs.len() != n {
            return Err(schema(field, format!("expected {n} matrices, got {}", gs.len())));
        }
        let side = side_of("generators[0]", gs.first().map_or(0, Vec::len))?;
        let old: Vec<DMatrix<f64>> =
            gs.iter().enumerate().map(|(i, m)| square(&format!("generators[{i}]"), m, side)).collect::<Result<_, _>>()?;
        let new = (0..n)
            .map(|a| (0..n).fold(DMatrix::zeros(side, side), |acc, i| acc + &old[i] * change[(i, a)]))
            .collect();
        Ok((new, side))
    };

    match doc.kind.as_str() {
        "algebra" => Ok(LoadedModel::Algebra(alg)),
        "representation" | "sphere-action" | "product-spheres-action" => {
            let (gens, side) = generators("generators")?;
            let manifold = match (&doc.manifold, doc.kind.as_str()) {
                (Some(m), _) => manifold(m, side)?,
                (None, "representation") => ModelManifold::euclidean(side),
                (None, "sphere-action") => ModelManifold::unit_sphere(side),
                (None, _) => return Err(schema("manifold", "required for product-spheres-action")),
            };
            let on_sphere = matches!(manifold.kind(), crate::manifold::ModelKind::UnitSphere);
            let rep = OrthogonalRep::new(alg, gens, side, on_sphere, &tol)?;
            let action = if on_sphere || manifold.kind() == crate::manifold::ModelKind::Euclidean {
                Action::linear(rep)
            } else {
                Action::on(rep, manifold)?
            };
            Ok(LoadedModel::System(System::Action(action)))
        }
        "homogeneous-pair" => {
            let theta_old = square("involution", doc.involution.as_ref().ok_or_else(|| schema("involution", "required for homogeneous-pair"))?, n)?;
            let theta = &to_new * theta_old * &change;
            let pair = SymmetricPair::cartan_decompose(&alg, &theta, &tol)?;
            let h = match &doc.subalgebra {
                Some(rows) => {
                    let vs = rows
                        .iter()
                        .enumerate()
                        .map(|(i, r)| {
                            if r.len() != n {
                                return Err(schema(format!("subalgebra[{i}]"), format!("expected {n} coordinates, got {}", r.len())));
                            }
                            Ok(&to_new * DVector::from_column_slice(r))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    let h = Subspace::span(n, &vs, tol.rank);
                    let closure = alg.closure_residual(&h);
                    if closure > 1e-8 {
                        return Err(LieError::NotSubalgebra { residual: closure }.into());
                    }
                    h
                }
                None => pair.k().clone(),
            };
            Ok(LoadedModel::System(System::Pair { pair, h }))
        }
        other => Err(schema("kind", format!("unknown kind `{other}`"))),
    }
}

fn structure_tensor(n: usize, rows: &[Vec<f64>]) -> Result<Vec<f64>, ModelError> {
    let mut c = vec![0.0; n * n * n];
    let idx = |i: usize, j: usize, k: usize| (i * n + j) * n + k;
    let mut parsed = Vec::with_capacity(rows.len());
    for (r, row) in rows.iter().enumerate() {
        let field = format!("structure[{r}]");
        if row.len() != 4 {
            return Err(schema(field, format!("expected [i, j, k, c], got {} numbers", row.len())));
        }
        let mut ijk = [0usize; 3];
        for (slot, &x) in ijk.iter_mut().zip(&row[..3]) {
            if x.fract() != 0.0 || x < 1.0 || x > n as f64 {
                return Err(schema(field, format!("index {x} outside 1..={n}")));
            }
            *slot = x as usize - 1;
        }
        if !row[3].is_finite() {
            return Err(schema(field, "coefficient is not finite"));
        }
        parsed.push((ijk, row[3]));
    }
    // every entry implies its antisymmetric partner; conflicting entries
    // are reported at the offending triple
    let mut given = vec![None::<f64>; n * n * n];
    for &([i, j, k], v) in &parsed {
        let residual = if i == j {
            v.abs()
        } else {
            let same = given[idx(i, j, k)].map_or(0.0, |x| (x - v).abs());
            let partner = given[idx(j, i, k)].map_or(0.0, |x| (x + v).abs());
            same.max(partner)
        };
        if residual > 0.0 {
            return Err(LieError::NotAntisymmetric { i: i + 1, j: j + 1, k: k + 1, residual }.into());
        }
        given[idx(i, j, k)] = Some(v);
        c[idx(i, j, k)] = v;
        if i != j {
            c[idx(j, i, k)] = -v;
        }
    }
    Ok(c)
}

fn side_of(field: &str, len: usize) -> Result<usize, ModelError> {
    let side = (len as f64).sqrt().round() as usize;
    if side * side != len || side == 0 {
        return Err(schema(field, format!("{len} entries do not form a square matrix")));
    }
    Ok(side)
}

fn square(field: &str, v: &[f64], side: usize) -> Result<DMatrix<f64>, ModelError> {
    if v.len() != side * side {
        return Err(schema(field, format!("expected {} entries, got {}", side * side, v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(schema(field, "entries must be finite"));
    }
    Ok(DMatrix::from_row_slice(side, side, v))
}

fn manifold(spec: &ManifoldSpec, side: usize) -> Result<ModelManifold<f64>, ModelError> {
    match spec.kind.as_str() {
        "euclidean" => Ok(ModelManifold::euclidean(side)),
        "sphere" => {
            if spec.radii.iter().any(|&r| r != 1.0) {
                return Err(schema("manifold.radii", "only the unit sphere is supported"));
            }
            Ok(ModelManifold::unit_sphere(side))
        }
        "product-spheres" => {
            let dims = spec.dims.clone().unwrap_or_else(|| vec![3; spec.radii.len()]);
            if dims.len() != spec.radii.len() || dims.iter().sum::<usize>() != side {
                return Err(schema("manifold", format!("factor dimensions {dims:?} do not add up to {side}")));
            }
            Ok(ModelManifold::product_of_spheres(&dims, &spec.radii)?)
        }
        other => Err(schema("manifold.kind", format!("unknown manifold `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_abelian_document() {
        match load_model(r#"{"schema": 1, "kind": "algebra", "dim": 2, "structure": []}"#).unwrap() {
            LoadedModel::Algebra(a) => {
                assert_eq!(a.dim(), 2);
                assert_eq!(a.jacobi_residual(), 0.0);
            }
            _ => panic!("expected an algebra"),
        }
    }

    #[test]
    fn cyclic_structure_is_su2() {
        let doc = r#"{"schema": 1, "kind": "algebra", "dim": 3,
            "structure": [[1,2,3,1],[2,3,1,1],[3,1,2,1]]}"#;
        let LoadedModel::Algebra(a) = load_model(doc).unwrap() else { panic!() };
        let su2 = crate::catalog::build::su(2);
        // same structure constants up to the overall scale of the form
        let ratio = su2.structure_constant(0, 1, 2) / a.structure_constant(0, 1, 2);
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    assert!((su2.structure_constant(i, j, k).abs() - ratio.abs() * a.structure_constant(i, j, k).abs()).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn antisymmetry_violation_names_the_triple() {
        let doc = r#"{"schema": 1, "kind": "algebra", "dim": 3,
            "structure": [[1,2,3,1],[2,1,3,1]]}"#;
        let err = load_model(doc).unwrap_err();
        match err {
            ModelError::Lie(LieError::NotAntisymmetric { i, j, k, .. }) => assert_eq!((i, j, k), (2, 1, 3)),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn jacobi_failure_rejected() {
        let doc = r#"{"schema": 1, "kind": "algebra", "dim": 3, "structure": [[1,2,3,1],[2,3,2,1]]}"#;
        assert!(matches!(load_model(doc), Err(ModelError::Lie(LieError::Jacobi { .. }))));
    }

    #[test]
    fn schema_errors_are_field_level() {
        let bad_index = r#"{"schema": 1, "kind": "algebra", "dim": 2, "structure": [[1,3,1,1]]}"#;
        assert!(load_model(bad_index).unwrap_err().to_string().contains("structure[0]"));
        let version = r#"{"schema": 2, "kind": "algebra", "dim": 1}"#;
        assert!(load_model(version).unwrap_err().to_string().contains("schema"));
        let unknown = r#"{"schema": 1, "kind": "algebra", "dim": 1, "colour": 3}"#;
        assert!(matches!(load_model(unknown), Err(ModelError::Json(_))));
        let missing = r#"{"schema": 1, "kind": "representation", "dim": 1}"#;
        assert!(load_model(missing).unwrap_err().to_string().contains("generators"));
    }

    #[test]
    fn circle_representation_with_scaled_inner_product() {
        // inner = 4 rescales the generator by 1/2 after orthonormalization
        let doc = r#"{"schema": 1, "kind": "representation", "dim": 1, "inner": [4.0],
            "generators": [[0, -2, 2, 0]]}"#;
        let LoadedModel::System(System::Action(a)) = load_model(doc).unwrap() else { panic!() };
        assert!((a.rep().generators()[0][(1, 0)] - 1.0).abs() < 1e-15);
        assert_eq!(a.cohomogeneity(0, &Tolerances::default()), 1);
    }

    #[test]
    fn non_antisymmetric_generator_rejected() {
        let doc = r#"{"schema": 1, "kind": "representation", "dim": 1, "generators": [[1, 0, 0, 1]]}"#;
        assert!(matches!(load_model(doc), Err(ModelError::Polarity(_))));
    }

    #[test]
    fn product_action_document() {
        let mut gens = Vec::new();
        for (a, b) in [(1, 2), (2, 0), (0, 1)] {
            let mut m = vec![0.0; 36];
            for off in [0, 3] {
                m[(b + off) * 6 + a + off] = 1.0;
                m[(a + off) * 6 + b + off] = -1.0;
            }
            gens.push(m);
        }
        let doc = serde_json::json!({
            "schema": 1, "kind": "product-spheres-action", "dim": 3,
            "structure": [[1, 2, 3, 1], [2, 3, 1, 1], [3, 1, 2, 1]],
            "inner": [2, 0, 0, 0, 2, 0, 0, 0, 2],
            "generators": gens,
            "manifold": {"kind": "product-spheres", "radii": [1.0, 1.5]}
        });
        let LoadedModel::System(System::Action(a)) = load_model(&doc.to_string()).unwrap() else { panic!() };
        assert_eq!(a.cohomogeneity(0, &Tolerances::default()), 1);
    }
}
