#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod fp;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod powermin;
pub mod solver;
pub mod sumrate;
pub mod surrogate;
