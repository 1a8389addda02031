//! Carbon emission flow: bus intensities by proportional sharing, emission
//! allocation to loads and losses, and per-generator tracing.

mod graph;
mod intensity;

pub use graph::{build_flow_graph, FedLoss, FlowEdge, FlowGraph, FlowNode, Injection, BALANCE_TOLERANCE, FLOW_EPSILON};
pub use intensity::{
    allocate_emissions, solve_intensities, solve_intensities_with, trace_generator_responsibility,
    trace_generator_responsibility_with, CarbonSolution, CefSolver, Responsibility,
};
