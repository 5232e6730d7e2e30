#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bessel;
pub mod cli;
pub mod config;
pub mod counterexample;
pub mod elliptic;
pub mod error;
pub mod fields;
pub mod io;
pub mod linalg;
pub mod operators;
pub mod spectrum;
pub mod timestepping;

pub use error::{Error, Result};
