//! Scenario dispatch, DC power flow and branch losses.

mod dc;
mod dispatch;
mod flowfile;

pub use dc::{dc_power_flow, DcPowerFlow, FlowSolution};
pub use dispatch::{dispatch, DispatchResult, ScenarioSample};
pub use flowfile::read_flow_file;
