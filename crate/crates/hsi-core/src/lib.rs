//! Finite-dimensional calculators for twisted symplectic instanton homology:
//! SU(2) holonomy models of extended moduli spaces, elementary-cobordism
//! Lagrangian correspondences with their rewrite calculus, the model Dehn
//! twist on cotangent bundles of spheres, and the integer homological
//! machinery (Smith normal form, graded groups, surgery bookkeeping) that
//! pins down the groups for concrete 3-manifold families.

pub mod cerf;
pub mod corresp;
pub mod homology;
pub mod moduli;
pub mod su2;
pub mod tol;
pub mod twist;
pub mod words;

pub use tol::Tol;
