//! Unbalanced three-phase distribution network studies: power flow, short-circuit,
//! optimal power flow and the fault-current-constrained OPF that couples the
//! pre-fault network with one faulted copy per scenario through the generator
//! dispatch.

pub mod compare;
pub mod error;
pub mod fcopf;
pub mod netmodel;
pub mod nlp;
pub mod opf;
pub mod phasor;
pub mod powerflow;
pub mod shortcircuit;
pub mod study;

pub use error::{Error, Result};
