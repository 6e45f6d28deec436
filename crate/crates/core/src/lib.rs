#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clogit;
pub mod error;
pub mod evalstats;
pub mod featurize;
pub mod genmodels;
pub mod graph;
pub mod io;
pub mod mixlogit;
pub mod optim;
pub mod par;
