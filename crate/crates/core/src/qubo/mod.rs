//! Objective representations: higher-order pseudo-Boolean polynomials for the
//! co-k-plex problem, their quadratization into QUBO form, and the Ising form
//! consumed by the samplers.

mod ising;
mod polynomial;

pub use ising::{gauge_transform, qubo_to_ising, CompiledIsing, IsingProblem, QuboProblem, Var};
pub use polynomial::{
    build_cokplex_polynomial, enumerate_induced_stars, enumerate_spanning_stars, quadratize, PenaltyRule,
    PseudoBooleanPolynomial, Sense, Star, StarScope, DEFAULT_STAR_BUDGET,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FormulationError {
    #[error("star enumeration budget exceeded ({budget} subsets)")]
    StarBudgetExceeded { budget: usize },
    #[error("star size k must be at least 1")]
    InvalidK,
    #[error("assignment is missing variable {0}")]
    MissingVariable(String),
    #[error("quadratic term on a single variable {0}")]
    DegenerateCoupler(String),
    #[error("malformed problem file: {0}")]
    Syntax(String),
}
