//! Event maps of closed-loop flows, automatic domain splitting and interval
//! bounds for certifying smooth feedback controllers.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod da;

pub use da::{Scalar, TaylorMap, TaylorPoly};
pub mod flow;
pub mod interval;
pub mod controllers;
pub mod event;
pub mod scenarios;
pub mod ads;
pub mod config;
pub mod pipeline;
