use serde::{Deserialize, Serialize};

use crate::stochastic::{BetaParams, MarginalCeiParams, NormalParams, WeibullParams, WindTurbineParams};

pub type BusId = u32;
pub type BranchId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BusKind {
    Transmission,
    Distribution,
    Slack,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: BusId,
    pub kind: BusKind,
    /// Index into [`Network::loads`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_load_ref: Option<usize>,
    /// Index into [`Network::ev_stations`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ev_station_ref: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: BranchId,
    pub from_bus: BusId,
    pub to_bus: BusId,
    /// Per-unit on the network's `base_mva`.
    pub susceptance: f64,
    /// Per-unit on the network's `base_mva`.
    #[serde(default)]
    pub resistance: f64,
    /// MW.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Conventional,
    Wind,
    DerPv,
}

impl GeneratorKind {
    pub fn is_renewable(self) -> bool {
        !matches!(self, GeneratorKind::Conventional)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: String,
    pub bus: BusId,
    pub kind: GeneratorKind,
    /// `P_rate`, MW: design-optimal output (conventional) or nameplate (RES).
    pub rated_output: f64,
    /// `P_Glim`, MW. Conventional units only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_output: Option<f64>,
    /// Conventional units only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cei: Option<MarginalCeiParams>,
    /// tCO2/MWh for wind and DER units.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_intensity: Option<f64>,
    /// Wind speed distribution. Wind units only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weibull: Option<WeibullParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turbine: Option<WindTurbineParams>,
    /// Capacity-factor distribution. DER units only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<BetaParams>,
    #[serde(default)]
    pub participation_factor: f64,
    /// Reference capacity used when rescaling renewables to a penetration level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nominal_output: Option<f64>,
}

impl Generator {
    pub fn p_lim(&self) -> f64 {
        self.max_output.unwrap_or(self.rated_output)
    }

    /// Expected available output, MW, before any curtailment.
    pub fn expected_output(&self) -> f64 {
        match self.kind {
            GeneratorKind::Conventional => 0.0,
            GeneratorKind::Wind => match (&self.turbine, &self.weibull) {
                (Some(t), Some(w)) => self.rated_output * t.expected_capacity_factor(w),
                _ => 0.0,
            },
            GeneratorKind::DerPv => self.rated_output * self.beta.unwrap_or_default().mean(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadSpec {
    pub bus: BusId,
    pub normal: NormalParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvStationSpec {
    pub bus: BusId,
    pub weibull: WeibullParams,
}

/// Static grid description. Powers in MW, intensities in tCO2/MWh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
    #[serde(default)]
    pub loads: Vec<LoadSpec>,
    #[serde(default)]
    pub ev_stations: Vec<EvStationSpec>,
    #[serde(default)]
    pub penetration_target: f64,
}

impl Network {
    pub fn generator(&self, id: &str) -> Option<(usize, &Generator)> {
        self.generators.iter().enumerate().find(|(_, g)| g.id == id)
    }

    /// Expected total consumption (base loads plus EV stations), MW.
    pub fn expected_load(&self) -> f64 {
        self.loads.iter().map(|l| l.normal.mu).sum::<f64>()
            + self.ev_stations.iter().map(|e| e.weibull.mean()).sum::<f64>()
    }

    /// Expected available renewable output, MW.
    pub fn expected_renewable(&self) -> f64 {
        self.generators.iter().map(Generator::expected_output).sum()
    }
}
