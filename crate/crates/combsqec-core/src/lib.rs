#![cfg_attr(not(test), no_std)]
//! Strategic quantum error-correcting codes represented as quantum combs.

extern crate alloc;

pub mod combs;
pub mod conditions;
pub mod error;
pub mod exec;
pub mod library;
pub mod linalg;
pub mod model;
pub mod optimize;
pub mod random;
pub mod tensor;

pub use error::{Error, Result};
