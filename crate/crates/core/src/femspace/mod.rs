//! Finite element spaces: reference elements, dof maps, the rescaled trial
//! space, the constrained test space and inter-level transfer.

pub mod dofs;
pub mod quadrature;
pub mod reference;
pub mod spaces;
pub mod transfer;

pub use dofs::{ElementGeometry, LagrangeSpace, RtSpace};
pub use quadrature::{gauss_legendre, EdgeQuadrature, TriangleQuadrature};
pub use reference::{LagrangeRef, RtRef, Tabulation};
pub use spaces::{DofKind, TestSpace, TrialSpace};
pub use transfer::{test_inclusion, test_transfer, trial_prolongation};
