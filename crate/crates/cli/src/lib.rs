//! Batch front end: scenario files, CSV output and verification.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod run;
pub mod verify;
