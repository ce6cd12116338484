//! Rigorous constant chains and measure certificates for the quadratic
//! family `f_a(x) = x² − a` near `a = 2`.
//!
//! The pipeline is: [`quadratic`] derives the starting constants and
//! geometry bounds for a parameter window, [`orbit`] verifies the
//! orbit-dependent hypotheses by interval iteration, [`chain`] evaluates the
//! auxiliary constants and checks the inequalities between them, and
//! [`certificate`] binds everything into a serializable record. [`tuner`]
//! searches the free mixing fractions for the smallest excluded fraction.
//!
//! All real quantities are [`arith::RInterval`] enclosures with outward
//! rounding; integer quantities obtained by flooring are only returned when
//! the floor is unambiguous.

pub mod arith;
pub mod certificate;
pub mod chain;
pub mod orbit;
pub mod quadratic;
pub mod tuner;

pub use arith::{ArithError, Decimal, Precision, RInterval};
pub use chain::{
    AuxChain, ConditionReport, FormulaMode, FreeChoices, GeometryBounds, StartingConstants, Verdict,
};
