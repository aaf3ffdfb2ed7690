//! Gravity-coupled solid-liquid phase transition in a rigid vertical column.
//!
//! The crate provides the thermodynamic model ([`model`], [`thermo`]), the
//! stationary states ([`equilibrium`]), time integration ([`evolution`]),
//! balance-law audits ([`diagnostics`]) and a small file/CLI layer
//! ([`cli_io`]).

// negated comparisons are used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod model;
pub mod thermo;
pub mod tridiag;
pub mod equilibrium;
pub mod evolution;
pub mod diagnostics;
pub mod cli_io;

pub use error::{Error, Result};
pub use model::{ColumnDomain, DimensionlessGroups, DomainSpec, MaterialParams, StateField};
