// `!(x > 0.0)` style checks must also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cone;
pub mod engine;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod modeling;
pub mod params;
pub mod phase1;
pub mod phase2;
pub mod problems;
pub mod residuals;
pub mod scaling;
pub mod solver;
