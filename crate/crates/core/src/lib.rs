//! Numerical verification of weighted inequalities for limits of power means
//! (geometric-mean type operators) on homogeneous groups.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod groups;
pub mod inequalities;
pub mod operators;
pub mod quadrature;
pub mod sharpness;

pub use error::{Error, Result};
pub use groups::{GroupLaw, GroupPoint, GroupSpec, NormKind, QuasiNorm, Space, SphereMeasure};
pub use inequalities::{verify, FunctionalValue, InequalityCase, RadiusGrid, Theorem, VerificationReport};
pub use operators::{Support, TestFunction, Weight};
pub use quadrature::{IntegralResult, Integrand, QuadratureConfig};
pub use sharpness::{BlowupReport, SharpnessReport, WitnessBound};
