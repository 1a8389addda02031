use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

use super::dc::FlowSolution;
use crate::error::{Error, Result};
use crate::network::{Network, NetworkIndex};

#[derive(Debug, Deserialize)]
struct Row {
    branch_id: u32,
    p_send_mw: f64,
    p_recv_mw: f64,
}

/// Reads externally computed branch flows (`branch_id,p_send_mw,p_recv_mw`).
///
/// Every branch must appear exactly once. Bus injections are derived from
/// the flows, so the result is balanced by construction; the slack residual
/// is left at zero.
pub fn read_flow_file(path: impl AsRef<Path>, net: &Network, idx: &NetworkIndex) -> Result<FlowSolution> {
    let path = path.as_ref();
    let bad = |message: String| Error::FlowFile {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::FlowFile {
                path: path.to_path_buf(),
                message: e.to_string(),
            },
            _ => Error::Csv(e),
        })?;
    let position: HashMap<u32, usize> = net.branches.iter().enumerate().map(|(k, b)| (b.id, k)).collect();
    let m = net.branches.len();
    let mut p_send = vec![f64::NAN; m];
    let mut loss = vec![0.0; m];
    for (line, row) in reader.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| bad(format!("row {}: {e}", line + 1)))?;
        let k = *position
            .get(&row.branch_id)
            .ok_or_else(|| bad(format!("unknown branch {}", row.branch_id)))?;
        if !p_send[k].is_nan() {
            return Err(bad(format!("branch {} listed twice", row.branch_id)));
        }
        let (s, r) = (row.p_send_mw, row.p_recv_mw);
        if !(s.is_finite() && r.is_finite()) {
            return Err(bad(format!("branch {}: non-finite flow", row.branch_id)));
        }
        if s * r < 0.0 || r.abs() > s.abs() + 1e-9 {
            return Err(bad(format!(
                "branch {}: receiving end {r} MW inconsistent with sending end {s} MW",
                row.branch_id
            )));
        }
        p_send[k] = s;
        loss[k] = (s.abs() - r.abs()).max(0.0);
    }
    if let Some(k) = p_send.iter().position(|p| p.is_nan()) {
        return Err(bad(format!("branch {} missing", net.branches[k].id)));
    }
    let mut flow = FlowSolution {
        p_send,
        loss,
        injection: vec![0.0; idx.bus_count()],
        slack_residual: 0.0,
    };
    for (k, &(a, b)) in idx.branch_ends.iter().enumerate() {
        let (send, recv) = (flow.p_send[k], flow.p_recv(k));
        if send >= 0.0 {
            flow.injection[a] += send;
            flow.injection[b] -= recv;
        } else {
            flow.injection[b] += -send;
            flow.injection[a] -= -recv;
        }
    }
    Ok(flow)
}
