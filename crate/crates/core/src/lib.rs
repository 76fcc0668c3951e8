//! Twisted elliptic Calogero-Moser systems built from outer automorphisms of
//! simple Lie algebras, with numerical verification of their structure.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cm_system;
pub mod elliptic;
pub mod error;
pub mod kzb;
pub mod lattice_charclass;
pub mod lie_twist;
pub mod rational;
pub mod report;
pub mod rmatrix;
pub mod table2;
pub mod verify;

pub use error::{Error, Result};
