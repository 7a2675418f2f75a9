//! Transitionless (counterdiabatic) and adiabatic intra-cavity state transfer
//! in a two-cavity optomechanical system.
//!
//! The crate builds coupling schedules ([`pulses`]), the Heisenberg mode
//! matrices and Fock-space Hamiltonians ([`models`]), integrates them in the
//! mode-vector, state-vector and Lindblad pictures ([`dynamics`]), extracts
//! populations and transfer fidelities ([`observables`]), and runs the
//! declarative scenarios behind the `tqd` command-line tool ([`scenarios`]).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod fock;
pub mod models;
pub mod observables;
pub mod pulses;
pub mod scenarios;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
