//! Discrete Laplace eigenfunctions on structured grids, their nodal domains,
//! and numerical checks of the inequalities that bound nodal inner radii.
//!
//! The modules build on each other: [`grid`] assembles the operator,
//! [`eigen`] computes the low spectrum, [`nodal`] decomposes eigenfunctions,
//! [`chain`] runs the cube-cover argument for a single nodal domain, and
//! [`poincare`] and [`harmonic`] hold the local inequalities it relies on.

pub mod chain;
pub mod eigen;
pub mod experiments;
pub mod grid;
pub mod harmonic;
pub mod io;
pub mod linalg;
pub mod nodal;
pub mod poincare;
pub mod svg;

pub use chain::{ChainReport, ChainSummary, CubeCover, Exponents, HoleRecord};
pub use eigen::EigenPair;
pub use grid::{BoundaryCondition, DomainKind, GridDomain, SparseSymOp};
pub use harmonic::{MeasureEstimate, ObstacleSet};
pub use io::{ConstantEntry, Constants, EigenBundle};
pub use nodal::{InnerRadiusResult, NodalDecomposition, NodalDomain, Sign};
pub use poincare::{CapacityProblem, CapacitySolution, ProjectionPoincare};
