//! Robustness verification for polynomial networks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alpha;
pub mod bab;
pub mod commands;
pub mod conv;
pub mod dataset;
pub mod error;
pub mod ibp;
pub mod interval;
pub mod model_io;
pub mod network;
pub mod optimize;
pub mod oracle;
pub mod train;

pub use error::{Error, Result};
pub use interval::{Interval, IntervalBox};
pub use network::{CcpNetwork, NcpNetwork, Network, Objective};
