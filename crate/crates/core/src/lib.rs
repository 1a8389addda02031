//! Probabilistic carbon emission flow analysis for power grids.
//!
//! A run samples wind, PV, load and EV demand, dispatches conventional
//! units, solves a DC power flow with losses, and traces emissions from
//! generators to every load and branch by proportional sharing. The
//! [`virtual_bus`] module contracts runs of buses with a common intensity so
//! each scenario solves a much smaller system with identical results.

pub mod cef;
pub mod error;
pub mod mcs;
pub mod network;
pub mod powerflow;
pub mod report;
pub mod stochastic;
pub mod virtual_bus;

pub use cef::{CarbonSolution, CefSolver, FlowGraph};
pub use error::{Error, Result};
pub use mcs::{run_mcs, Mode, ResultSet, RunConfig};
pub use network::{load_network, Network, NetworkIndex};
pub use powerflow::{DispatchResult, FlowSolution, ScenarioSample};
pub use virtual_bus::VirtualBusPartition;
