//! Unified Newton-Raphson power flow for hybrid AC/DC networks.
//!
//! AC buses are modelled per phase, DC buses per pole. Interfacing converters
//! couple the two through their positive sequence (and optionally the
//! negative sequence) and carry a conduction, switching and filter loss
//! model.
//!
//! ```
//! use acdc_pf::{io, solver::{PowerFlow, SolverOptions}};
//!
//! let case = io::parse_case(include_str!("../../../cases/hybrid_balanced.toml")).unwrap();
//! let solution = PowerFlow::new(&case).unwrap().solve(&SolverOptions::default()).unwrap();
//! assert!(solution.converged);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod converter;
pub mod grid;
pub mod io;
pub mod oracle;
pub mod residuals;
pub mod solver;
pub mod synthetic;

#[cfg(test)]
pub(crate) mod test_support;

pub use grid::{CaseData, NetworkCase};
