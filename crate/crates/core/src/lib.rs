//! Tied contact between linear-elastic bodies with non-matching meshes.
//!
//! Bodies are coupled with standard mortar constraints. The resulting
//! saddle-point system can be solved directly (GCR) or reduced by exact
//! elimination of slave displacements and multipliers to a symmetric
//! positive definite system solved by preconditioned CG.
//!
//! ```
//! use tiedcontact::krylov::PreconditionerKind;
//! use tiedcontact::pipeline::{run, Method, RunConfig};
//!
//! let config = RunConfig::new(3, 4, 1.5, Method::Condensed, PreconditionerKind::SSOR_DEFAULT);
//! let out = run(&config).unwrap();
//! assert!(out.report.converged);
//! assert!(out.full_rel_residual() < 1e-7);
//! ```

pub mod condense;
pub mod elasticity;
pub mod krylov;
pub mod mesh;
pub mod mortar;
pub mod pipeline;
pub mod system;
pub mod vtk;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] mesh::MeshError),
    #[error(transparent)]
    Elasticity(#[from] elasticity::ElasticityError),
    #[error(transparent)]
    Mortar(#[from] mortar::MortarError),
    #[error(transparent)]
    System(#[from] system::SystemError),
    #[error(transparent)]
    Condense(#[from] condense::CondenseError),
    #[error(transparent)]
    Linalg(#[from] krylov::LinalgError),
    #[error("configuration error: {0}")]
    Config(String),
}

impl From<system::BuildError> for Error {
    fn from(e: system::BuildError) -> Self {
        match e {
            system::BuildError::Elasticity(e) => Self::Elasticity(e),
            system::BuildError::Mortar(e) => Self::Mortar(e),
            system::BuildError::System(e) => Self::System(e),
        }
    }
}
