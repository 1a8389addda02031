use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use serde::Serialize;

use super::types::{BusKind, GeneratorKind, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    DuplicateId,
    UnknownBus,
    SelfLoop,
    NonPositiveSusceptance,
    NegativeResistance,
    SlackCount,
    MissingSlackGenerator,
    Disconnected,
    NonRadialFeeder,
    DanglingReference,
    MissingModel,
    InvalidParameter,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Offending element, e.g. `bus 12`, `branch 7`, `generator G2`.
    pub element: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.element, self.message)
    }
}

struct Report(Vec<Violation>);

impl Report {
    fn push(&mut self, kind: ViolationKind, element: impl Into<String>, message: impl Into<String>) {
        self.0.push(Violation {
            kind,
            element: element.into(),
            message: message.into(),
        });
    }
}

fn finite_nonneg(x: f64) -> bool {
    x.is_finite() && x >= 0.0
}

/// Every violated network invariant. Empty iff the network is valid.
pub fn validate(net: &Network) -> Vec<Violation> {
    let mut r = Report(Vec::new());

    if !(net.base_mva.is_finite() && net.base_mva > 0.0) {
        r.push(ViolationKind::InvalidParameter, "network", format!("base_mva must be > 0, got {}", net.base_mva));
    }
    if !(0.0..1.0).contains(&net.penetration_target) {
        r.push(
            ViolationKind::InvalidParameter,
            "network",
            format!("penetration_target must be in [0, 1), got {}", net.penetration_target),
        );
    }

    let mut bus_index: HashMap<u32, usize> = HashMap::with_capacity(net.buses.len());
    for (i, b) in net.buses.iter().enumerate() {
        if bus_index.insert(b.id, i).is_some() {
            r.push(ViolationKind::DuplicateId, format!("bus {}", b.id), "bus id appears more than once");
        }
    }

    let slacks: Vec<u32> = net.buses.iter().filter(|b| b.kind == BusKind::Slack).map(|b| b.id).collect();
    if slacks.len() != 1 {
        r.push(
            ViolationKind::SlackCount,
            "network",
            format!("expected exactly one slack bus, found {} {:?}", slacks.len(), slacks),
        );
    } else if !net
        .generators
        .iter()
        .any(|g| g.bus == slacks[0] && g.kind == GeneratorKind::Conventional)
    {
        r.push(
            ViolationKind::MissingSlackGenerator,
            format!("bus {}", slacks[0]),
            "slack bus has no conventional generator",
        );
    }

    let mut branch_ids = HashSet::new();
    for br in &net.branches {
        let el = format!("branch {}", br.id);
        if !branch_ids.insert(br.id) {
            r.push(ViolationKind::DuplicateId, el.clone(), "branch id appears more than once");
        }
        for end in [br.from_bus, br.to_bus] {
            if !bus_index.contains_key(&end) {
                r.push(ViolationKind::UnknownBus, el.clone(), format!("references unknown bus {end}"));
            }
        }
        if br.from_bus == br.to_bus {
            r.push(ViolationKind::SelfLoop, el.clone(), "from_bus equals to_bus");
        }
        if !(br.susceptance.is_finite() && br.susceptance > 0.0) {
            r.push(ViolationKind::NonPositiveSusceptance, el.clone(), format!("susceptance {} <= 0", br.susceptance));
        }
        if !finite_nonneg(br.resistance) {
            r.push(ViolationKind::NegativeResistance, el, format!("resistance {} < 0", br.resistance));
        }
    }

    let mut gen_ids = HashSet::new();
    for g in &net.generators {
        let el = format!("generator {}", g.id);
        if !gen_ids.insert(g.id.as_str()) {
            r.push(ViolationKind::DuplicateId, el.clone(), "generator id appears more than once");
        }
        if !bus_index.contains_key(&g.bus) {
            r.push(ViolationKind::UnknownBus, el.clone(), format!("references unknown bus {}", g.bus));
        }
        if !finite_nonneg(g.rated_output) {
            r.push(ViolationKind::InvalidParameter, el.clone(), "rated_output must be >= 0");
        }
        if !finite_nonneg(g.participation_factor) {
            r.push(ViolationKind::InvalidParameter, el.clone(), "participation_factor must be >= 0");
        }
        if let Some(e) = g.fixed_intensity {
            if !finite_nonneg(e) {
                r.push(ViolationKind::InvalidParameter, el.clone(), "fixed_intensity must be >= 0");
            }
        }
        match g.kind {
            GeneratorKind::Conventional => {
                let (Some(p_lim), Some(cei)) = (g.max_output, g.cei.as_ref()) else {
                    r.push(ViolationKind::MissingModel, el, "conventional unit needs max_output and cei");
                    continue;
                };
                if g.rated_output > p_lim {
                    r.push(
                        ViolationKind::InvalidParameter,
                        el.clone(),
                        format!("rated_output {} exceeds max_output {}", g.rated_output, p_lim),
                    );
                }
                if cei.p_rate != g.rated_output || cei.p_lim != p_lim {
                    r.push(
                        ViolationKind::InvalidParameter,
                        el.clone(),
                        "cei p_rate/p_lim disagree with rated_output/max_output",
                    );
                }
                let lowest = cei.min_intensity();
                if lowest.is_nan() || lowest < 0.0 {
                    r.push(ViolationKind::InvalidParameter, el, "marginal intensity negative within (0, p_lim]");
                }
            }
            GeneratorKind::Wind => match (g.weibull, g.turbine) {
                (Some(w), Some(t)) => {
                    if let Err(e) = w.check() {
                        r.push(ViolationKind::InvalidParameter, el.clone(), e.to_string());
                    }
                    if let Err(e) = t.check() {
                        r.push(ViolationKind::InvalidParameter, el, e.to_string());
                    }
                }
                _ => r.push(ViolationKind::MissingModel, el, "wind unit needs weibull and turbine"),
            },
            GeneratorKind::DerPv => match g.beta {
                Some(b) if b.alpha > 0.0 && b.beta > 0.0 && b.alpha.is_finite() && b.beta.is_finite() => {}
                Some(_) => r.push(ViolationKind::InvalidParameter, el, "beta requires alpha > 0 and beta > 0"),
                None => r.push(ViolationKind::MissingModel, el, "DER unit needs beta"),
            },
        }
    }

    for (i, l) in net.loads.iter().enumerate() {
        let el = format!("load {i} (bus {})", l.bus);
        if !bus_index.contains_key(&l.bus) {
            r.push(ViolationKind::UnknownBus, el.clone(), format!("references unknown bus {}", l.bus));
        }
        if !(finite_nonneg(l.normal.mu) && finite_nonneg(l.normal.sigma)) {
            r.push(ViolationKind::InvalidParameter, el, "normal requires mu >= 0 and sigma >= 0");
        }
    }
    for (i, ev) in net.ev_stations.iter().enumerate() {
        let el = format!("ev_station {i} (bus {})", ev.bus);
        if !bus_index.contains_key(&ev.bus) {
            r.push(ViolationKind::UnknownBus, el.clone(), format!("references unknown bus {}", ev.bus));
        }
        if let Err(e) = ev.weibull.check() {
            r.push(ViolationKind::InvalidParameter, el, e.to_string());
        }
    }
    for b in &net.buses {
        if let Some(i) = b.base_load_ref {
            if net.loads.get(i).map(|l| l.bus) != Some(b.id) {
                r.push(ViolationKind::DanglingReference, format!("bus {}", b.id), format!("base_load_ref {i} does not name a load on this bus"));
            }
        }
        if let Some(i) = b.ev_station_ref {
            if net.ev_stations.get(i).map(|e| e.bus) != Some(b.id) {
                r.push(ViolationKind::DanglingReference, format!("bus {}", b.id), format!("ev_station_ref {i} does not name a station on this bus"));
            }
        }
    }

    topology_checks(net, &bus_index, &mut r);
    r.0
}

fn topology_checks(net: &Network, bus_index: &HashMap<u32, usize>, r: &mut Report) {
    let n = net.buses.len();
    if n == 0 {
        r.push(ViolationKind::Disconnected, "network", "network has no buses");
        return;
    }
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (k, br) in net.branches.iter().enumerate() {
        if let (Some(&a), Some(&b)) = (bus_index.get(&br.from_bus), bus_index.get(&br.to_bus)) {
            if a != b {
                adj[a].push((b, k));
                adj[b].push((a, k));
            }
        }
    }

    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(u) = queue.pop_front() {
        for &(v, _) in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    for (i, b) in net.buses.iter().enumerate() {
        if !seen[i] {
            r.push(ViolationKind::Disconnected, format!("bus {}", b.id), "not connected to the rest of the network");
        }
    }

    // Each connected group of distribution buses must be a tree attached to
    // the rest of the network through exactly one branch.
    let is_dist = |i: usize| net.buses[i].kind == BusKind::Distribution;
    let mut group = vec![usize::MAX; n];
    for start in 0..n {
        if !is_dist(start) || group[start] != usize::MAX {
            continue;
        }
        let mut members = vec![start];
        group[start] = start;
        let mut head = 0;
        while head < members.len() {
            let u = members[head];
            head += 1;
            for &(v, _) in &adj[u] {
                if is_dist(v) && group[v] == usize::MAX {
                    group[v] = start;
                    members.push(v);
                }
            }
        }
        let mut internal = 0usize;
        let mut external = 0usize;
        for &u in &members {
            for &(v, _) in &adj[u] {
                if is_dist(v) {
                    internal += 1;
                } else {
                    external += 1;
                }
            }
        }
        internal /= 2;
        if internal + 1 != members.len() || external > 1 {
            let root = members.iter().map(|&i| net.buses[i].id).min().unwrap_or_default();
            r.push(
                ViolationKind::NonRadialFeeder,
                format!("feeder at bus {root}"),
                format!(
                    "{} buses, {} internal branches, {} upstream connections (need a tree with one upstream connection)",
                    members.len(),
                    internal,
                    external
                ),
            );
        }
    }
}
