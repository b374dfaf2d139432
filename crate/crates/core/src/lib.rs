//! Robust approximation of bounded-width constraint satisfaction problems.
//!
//! The pipeline: solve the basic SDP relaxation ([`sdp`]), round the vectors
//! through thresholds, layers and random hyperplanes into a weak Prague instance
//! ([`rounding`], [`prague`]), close it under polymorphisms ([`algebra`]) and solve
//! it by local consistency ([`consistency`]).

pub mod algebra;
pub mod binarize;
pub mod cli;
pub mod consistency;
pub mod error;
pub mod generate;
pub mod instance;
pub mod io;
pub mod prague;
pub mod rounding;
pub mod sdp;

pub use error::{Error, Result};
pub use instance::{
    brute_force_opt, value, Assignment, Constraint, ConstraintLanguage, Domain, Fraction, Instance, Relation, Witness,
};
