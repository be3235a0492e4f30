//! Crop cost and price analysis: Törnqvist–Theil productivity indices,
//! translog cost-system estimation, input-demand elasticities and
//! support-price policy evaluation.
//!
//! The computation modules are pure functions over validated, immutable
//! inputs. [`cli`] wires them into batch commands; [`batch`] evaluates many
//! crops or scenarios at once, in parallel when the `parallel` feature is
//! enabled.

pub mod batch;
pub mod cli;
pub mod data_model;
pub mod elasticities;
pub mod index_numbers;
pub mod par;
pub mod policy;
pub mod translog;
