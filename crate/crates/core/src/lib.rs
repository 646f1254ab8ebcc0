// negated comparisons are how NaN is rejected throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod glm;
pub mod check;
pub mod synth;
pub mod mi;
pub mod report;
