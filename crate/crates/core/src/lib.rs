//! Numerical decision procedures for polar, hyperpolar and variationally
//! complete isometric actions of compact Lie groups.
//!
//! Every kernel is generic over [`Real`] (`f32` or `f64`); the `*64` aliases
//! below fix double precision, which is what the catalog and CLI use.

pub mod scalar;
pub mod linalg;
pub mod liealg;
pub mod manifold;
pub mod symspace;
pub mod polarity;
pub mod weyl;
pub mod transversal;
pub mod catalog;
pub mod model;
pub mod analysis;
pub mod report;

pub use linalg::{Subspace, Tolerances};
pub use liealg::{ClassicalFamily, LieAlgebra, LieError};
pub use manifold::{ModelKind, ModelManifold};
pub use scalar::Real;
pub use polarity::{Action, OrthogonalRep, PolarityVerdict};
pub use symspace::{ProbeSampler, SymmetricPair};
pub use transversal::{OrbitGeodesic, TransversalSystem};
pub use catalog::{catalog_list, CatalogEntry, System};
pub use analysis::{analyze, Check, Settings};
pub use report::{AnalysisReport, Record, Status};

/// Outcome of a predicate: whether it holds, the worst residual seen, and a
/// witness when it fails.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict<T, W> {
    pub holds: bool,
    pub residual: T,
    pub witness: Option<W>,
}

pub type LieAlgebra64 = LieAlgebra<f64>;
pub type Subspace64 = Subspace<f64>;
pub type SymmetricPair64 = SymmetricPair<f64>;
pub type ModelManifold64 = ModelManifold<f64>;
pub type OrthogonalRep64 = OrthogonalRep<f64>;
pub type Action64 = Action<f64>;

/// Deterministic generator for `(seed, stream)`; streams keep parallel
/// tasks independent of scheduling order.
pub(crate) fn seeded(seed: u64, stream: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
