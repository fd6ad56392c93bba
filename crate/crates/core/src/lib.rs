//! Pseudo-spectral Littlewood–Paley toolkit on the periodic box.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dyadic;
pub mod elliptic;
pub mod error;
pub mod evolution;
pub mod interp;
pub mod io;
pub mod lab;
pub mod lagrangian;
pub mod norms;
pub mod paraproduct;
pub mod spectral;

pub use error::{Error, Result};
