#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attack;
pub mod error;
pub mod experiments;
pub mod guard;
pub mod linalg;
pub mod spectral;
pub mod ssm;
pub mod stats;

pub use error::{Error, Result};
