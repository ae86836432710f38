#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conditioned;
pub mod corridor;
pub mod drift;
pub mod error;
pub mod exact;
pub mod pwl;
pub mod quad;
pub mod reweighting;
pub mod rng;
pub mod special;
pub mod stats;
pub mod verify;
pub mod cli;
pub mod config;
