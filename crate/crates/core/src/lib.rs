//! Finite-dimensional Morse theory for variational problems, checked across a
//! ladder of Galerkin levels, with a truncated Levi-Civita field for the
//! hyperfinite view.

pub mod critical;
pub mod galerkin;
pub mod ladder;
pub mod morse;
pub mod nonarch;
pub mod problem;

pub use critical::{deflated_search, filter_window, CriticalError, CriticalPoint, SolverConfig};
pub use galerkin::{build_level, CoefficientVector, GalerkinError, LevelSpace, QuadratureSpec};
pub use ladder::{
    match_points, psu_diagnostic, run_ladder, LadderConfig, LadderError, LevelReport, MatchedFamily, PsuDiagnostic,
    PsuStatus, StabilizationTrace, Window,
};
pub use morse::{morse_polynomial, verify_morse_relation, MorseError, MorseRelationReport, NatPoly, WindowKind};
pub use nonarch::{classify, shadow, Classification, Exponent, LeviCivitaNumber, NonArchError};
pub use problem::{chafee_infante, FunctionalSpec, Integrand, ModelProblem, ProblemError, ProblemSource};
