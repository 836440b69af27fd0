// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array;
pub mod engine;
pub mod geometry;
pub mod output;
pub mod radio;
pub mod scenario;
pub mod sim;
