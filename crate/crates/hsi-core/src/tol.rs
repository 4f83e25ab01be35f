//! Central tolerance configuration.
//!
//! All numeric thresholds used across the crate live here so that the CLI can
//! override them uniformly: `arith` for elementary group arithmetic, `relation`
//! for moduli-space defining relations (looser, to absorb accumulation over
//! higher genus), `solver` for iterative root finding.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tol {
    /// Arithmetic tolerance (unit-norm drift, algebraic identities).
    pub arith: f64,
    /// Relation residual tolerance (holonomy products, moment conditions).
    pub relation: f64,
    /// Solver tolerance (bisection residuals).
    pub solver: f64,
}

impl Default for Tol {
    fn default() -> Self {
        Tol {
            arith: 1e-12,
            relation: 1e-9,
            solver: 1e-8,
        }
    }
}

impl Tol {
    pub const fn new(arith: f64, relation: f64, solver: f64) -> Self {
        Tol {
            arith,
            relation,
            solver,
        }
    }
}
