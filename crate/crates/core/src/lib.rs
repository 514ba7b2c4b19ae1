//! Numerical realization of the infinite-horizon discounted Lagrangian
//! problem on compact Riemannian manifolds: the characteristic flow, its
//! curvature and Lagrangian Grassmannian machinery, the synthesis of the
//! optimal feedback, and an independent direct-minimization oracle.

pub mod curvature;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod grassmann;
pub mod io;
pub mod oracle;
pub mod synthesis;

pub use error::{Error, Result};
pub use flow::{Boundedness, EquilibriumInfo, EquilibriumKind, Flow, Hamiltonian, Tolerances, Trajectory};
pub use geometry::{ChartId, CotangentState, ManifoldKind, ManifoldSpec, PotentialSpec, SphereBasis, TrigTerm};
