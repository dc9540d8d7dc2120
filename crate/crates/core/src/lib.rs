//! Numerical tools for orbits of families of vector fields: controlled flows,
//! l1-limits of flow compositions, field enlargement, bracket chains and
//! accessibility analysis on coordinate charts.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod algebra;
pub mod catalog;
pub mod cli;
pub mod compose;
pub mod error;
pub mod fields;
pub mod flow;
pub mod linalg;
pub mod orbit;
pub mod space;

pub use error::{Error, Result};
pub use fields::{FieldFamily, LbMethod, LbRecord, VectorField};
pub use flow::{Control, ControlPiece, ExistenceCertificate, FlowConfig, FlowResult};
pub use space::{Ball, ChartSpace, L1Coefficients, NormKind, Point};
