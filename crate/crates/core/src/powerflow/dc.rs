use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Col, Side};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{Network, NetworkIndex};

/// Directed branch flows of one operating point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowSolution {
    /// Sending-end flow per branch, MW; positive means from-bus to to-bus.
    pub p_send: Vec<f64>,
    /// MW, `|p_send| - |p_recv|`. A loss larger than the sending-end flow
    /// leaves `p_recv` with the opposite sign: both ends feed the branch.
    pub loss: Vec<f64>,
    /// Net injection per bus position, MW. The slack entry holds the value
    /// implied by the solved flows.
    pub injection: Vec<f64>,
    /// MW the slack bus absorbed beyond the injection it was given.
    pub slack_residual: f64,
}

impl FlowSolution {
    /// Receiving-end flow, signed like `p_send`.
    pub fn p_recv(&self, k: usize) -> f64 {
        let s = self.p_send[k];
        s.signum() * (s.abs() - self.loss[k])
    }

    pub fn total_loss(&self) -> f64 {
        self.loss.iter().sum()
    }

    /// Largest `|injection - (outgoing sending-end - incoming receiving-end)|`.
    pub fn max_balance_error(&self, branch_ends: &[(usize, usize)]) -> f64 {
        let mut net = self.injection.clone();
        for (k, &(a, b)) in branch_ends.iter().enumerate() {
            let (send, recv) = (self.p_send[k], self.p_recv(k));
            if send >= 0.0 {
                net[a] -= send;
                net[b] += recv;
            } else {
                net[b] -= -send;
                net[a] += -recv;
            }
        }
        net.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// DC power flow with the reduced susceptance matrix factorized once.
pub struct DcPowerFlow {
    base_mva: f64,
    slack: usize,
    /// Bus position to row in the reduced system (`usize::MAX` for slack).
    reduced: Vec<usize>,
    branch_ends: Vec<(usize, usize)>,
    susceptance: Vec<f64>,
    resistance: Vec<f64>,
    factor: Llt<usize, f64>,
}

impl std::fmt::Debug for DcPowerFlow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DcPowerFlow")
            .field("buses", &self.reduced.len())
            .field("branches", &self.branch_ends.len())
            .field("slack", &self.slack)
            .finish()
    }
}

impl DcPowerFlow {
    pub fn new(net: &Network, idx: &NetworkIndex) -> Result<Self> {
        let branches: Vec<(usize, usize, f64, f64)> = net
            .branches
            .iter()
            .zip(&idx.branch_ends)
            .map(|(b, &(from, to))| (from, to, b.susceptance, b.resistance))
            .collect();
        Self::from_branches(idx.bus_count(), idx.slack_bus, &branches, net.base_mva)
    }

    /// `branches` are `(from, to, susceptance pu, resistance pu)` by bus position.
    pub fn from_branches(
        bus_count: usize,
        slack: usize,
        branches: &[(usize, usize, f64, f64)],
        base_mva: f64,
    ) -> Result<Self> {
        if slack >= bus_count {
            return Err(Error::InvalidParameter(format!("slack position {slack} out of range")));
        }
        // Every bus must reach the slack or the reduced matrix is singular.
        let mut parent: Vec<usize> = (0..bus_count).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &(a, b, _, _) in branches {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
        }
        let root = find(&mut parent, slack);
        if let Some(stray) = (0..bus_count).find(|&i| find(&mut parent, i) != root) {
            return Err(Error::Numerical(format!(
                "singular susceptance matrix: bus position {stray} has no path to the slack bus"
            )));
        }

        let mut reduced = vec![usize::MAX; bus_count];
        let mut next = 0;
        for (i, r) in reduced.iter_mut().enumerate() {
            if i != slack {
                *r = next;
                next += 1;
            }
        }
        let dim = bus_count - 1;
        let mut triplets = Vec::with_capacity(4 * branches.len());
        for &(a, b, bsus, _) in branches {
            let (ra, rb) = (reduced[a], reduced[b]);
            if ra != usize::MAX {
                triplets.push(Triplet::new(ra, ra, bsus));
            }
            if rb != usize::MAX {
                triplets.push(Triplet::new(rb, rb, bsus));
            }
            if ra != usize::MAX && rb != usize::MAX {
                triplets.push(Triplet::new(ra, rb, -bsus));
                triplets.push(Triplet::new(rb, ra, -bsus));
            }
        }
        let factor = if dim == 0 {
            None
        } else {
            let mat = SparseColMat::<usize, f64>::try_new_from_triplets(dim, dim, &triplets)
                .map_err(|e| Error::Numerical(format!("susceptance matrix assembly: {e:?}")))?;
            Some(
                mat.sp_cholesky(Side::Lower)
                    .map_err(|e| Error::Numerical(format!("susceptance factorization: {e:?}")))?,
            )
        };
        let factor = match factor {
            Some(f) => f,
            None => {
                // Single-bus network: factor a 1x1 identity so solve() stays uniform.
                let one = SparseColMat::<usize, f64>::try_new_from_triplets(1, 1, &[Triplet::new(0, 0, 1.0)])
                    .expect("1x1 matrix");
                one.sp_cholesky(Side::Lower).expect("identity is positive definite")
            }
        };
        Ok(DcPowerFlow {
            base_mva,
            slack,
            reduced,
            branch_ends: branches.iter().map(|&(a, b, _, _)| (a, b)).collect(),
            susceptance: branches.iter().map(|b| b.2).collect(),
            resistance: branches.iter().map(|b| b.3).collect(),
            factor,
        })
    }

    pub fn branch_ends(&self) -> &[(usize, usize)] {
        &self.branch_ends
    }

    /// Lossless flows for per-bus injections in MW. The slack entry of
    /// `injections` is ignored and replaced by the balancing value.
    pub fn solve(&self, injections: &[f64]) -> Result<FlowSolution> {
        let n = self.reduced.len();
        if injections.len() != n {
            return Err(Error::InvalidParameter(format!(
                "{} injections for {n} buses",
                injections.len()
            )));
        }
        let mut theta = vec![0.0; n];
        if n > 1 {
            let mut rhs = Col::<f64>::zeros(n - 1);
            for (i, &r) in self.reduced.iter().enumerate() {
                if r != usize::MAX {
                    rhs[r] = injections[i] / self.base_mva;
                }
            }
            self.factor.solve_in_place(rhs.as_mat_mut());
            for (i, &r) in self.reduced.iter().enumerate() {
                if r != usize::MAX {
                    theta[i] = rhs[r];
                }
            }
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Numerical("non-finite bus angle in DC solve".into()));
        }
        let p_send: Vec<f64> = self
            .branch_ends
            .iter()
            .zip(&self.susceptance)
            .map(|(&(a, b), &bsus)| bsus * (theta[a] - theta[b]) * self.base_mva)
            .collect();
        let mut injection = injections.to_vec();
        let others: f64 = injection
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != self.slack)
            .map(|(_, x)| x)
            .sum();
        let implied = -others;
        let slack_residual = implied - injection[self.slack];
        injection[self.slack] = implied;
        Ok(FlowSolution {
            loss: vec![0.0; p_send.len()],
            p_send,
            injection,
            slack_residual,
        })
    }

    /// Resistive losses with one rebalancing pass.
    ///
    /// Each branch loss `r (P/base)^2 base` is taken from the lossless flow
    /// and charged half to each end bus; the slack picks up the total and
    /// the flows are re-solved once. Sending and receiving ends then differ
    /// by exactly the loss and every bus balances exactly. When the re-solved
    /// flow is below half the loss, both ends end up feeding the branch.
    pub fn estimate_losses(&self, lossless: &FlowSolution) -> Result<FlowSolution> {
        let loss: Vec<f64> = lossless
            .p_send
            .iter()
            .zip(&self.resistance)
            .map(|(p, r)| {
                let pu = p / self.base_mva;
                r * pu * pu * self.base_mva
            })
            .collect();
        if loss.iter().all(|&l| l == 0.0) {
            return Ok(lossless.clone());
        }
        let mut inj = lossless.injection.clone();
        for (k, &(a, b)) in self.branch_ends.iter().enumerate() {
            inj[a] -= 0.5 * loss[k];
            inj[b] -= 0.5 * loss[k];
        }
        let mid = self.solve(&inj)?;
        let mut p_send = mid.p_send;
        for (k, p) in p_send.iter_mut().enumerate() {
            let half = 0.5 * loss[k];
            *p = if *p >= 0.0 { *p + half } else { *p - half };
        }
        let mut injection = mid.injection;
        for (k, &(a, b)) in self.branch_ends.iter().enumerate() {
            injection[a] += 0.5 * loss[k];
            injection[b] += 0.5 * loss[k];
        }
        let slack_residual = injection[self.slack] - lossless.injection[self.slack];
        Ok(FlowSolution {
            p_send,
            loss,
            injection,
            slack_residual,
        })
    }
}

/// One-shot DC power flow on a validated network.
pub fn dc_power_flow(net: &Network, injections: &[f64]) -> Result<FlowSolution> {
    let idx = NetworkIndex::new(net)?;
    DcPowerFlow::new(net, &idx)?.solve(injections)
}
