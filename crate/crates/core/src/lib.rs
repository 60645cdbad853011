//! Analysis of linear DAEs `d/dt E x = A x` and descriptor systems `[E, A, B]`.
//!
//! The crate decides regularity, computes canonical forms, certifies
//! stability with Lyapunov-type inequalities, recasts stable systems in
//! dissipative-Hamiltonian form, stabilizes descriptor systems through a
//! Bernoulli equation and works with the Dirac/Lagrange geometric picture.

pub mod dh;
pub mod error;
pub mod geometry;
pub mod numerics;
pub mod oracle;
pub mod pencil;
pub mod recipes;
pub mod stability;
pub mod stabilize;
pub mod subspace;

pub use dh::{DhFactorization, DhMode, DhStabilityReport, DhStable, DhValidity};
pub use error::{Error, Result};
pub use geometry::{DissipativeStructure, GeoStable, GeometricReport, LagrangianStructure, StructureReport};
pub use oracle::{EnergyReport, Trajectory};
pub use numerics::{Complex64, Region, RealSchurResult, ToleranceConfig};
pub use pencil::{
    BlockEntry, BlockKind, DescriptorSystem, MatrixPencil, QuasiKroneckerForm, SpectrumEntry,
};
pub use stability::{LyapunovCertificate, StabilityClass, StabilityVerdict};
pub use stabilize::{PhDescriptor, RefinedDecomposition, StabilizationCertificate};
pub use subspace::{CompareMode, Comparison, Subspace};
