//! Linear branch-flow modelling and optimal reconfiguration of radial
//! distribution feeders.
//!
//! The power-flow kernels are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix them to `f64`.

// `!(x > 0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acpf;
pub mod dense;
pub mod error;
pub mod fixtures;
pub mod linear_flow;
pub mod network;
pub mod reconfig;
pub mod scalar;

pub use error::{Error, Result};
pub use network::BusId;
pub use scalar::Scalar;

pub type Network = network::Network<f64>;
pub type BusRecord = network::BusRecord<f64>;
pub type BranchRecord = network::BranchRecord<f64>;
pub type NetworkParts = network::NetworkParts<f64>;
pub type AcSolution = acpf::AcSolution<f64>;
pub type LinearSolution = linear_flow::LinearSolution<f64>;
pub type MiqpModel = reconfig::MiqpModel;
pub type ReconfigSolution = reconfig::ReconfigSolution;
