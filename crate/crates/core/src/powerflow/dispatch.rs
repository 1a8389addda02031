use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{GeneratorKind, Network, NetworkIndex};
use crate::stochastic::wind_power;

/// One draw of every stochastic input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSample {
    pub index: u64,
    /// m/s, one per wind unit in generator order.
    pub wind_speeds: Vec<f64>,
    /// In `[0, 1]`, one per DER unit in generator order.
    pub der_factors: Vec<f64>,
    /// MW, one per [`Network::loads`] entry.
    pub base_loads: Vec<f64>,
    /// MW, one per [`Network::ev_stations`] entry.
    pub ev_demands: Vec<f64>,
}

impl ScenarioSample {
    pub fn check(&self, net: &Network) -> Result<()> {
        let count = |k| net.generators.iter().filter(|g| g.kind == k).count();
        let shapes = [
            ("wind_speeds", self.wind_speeds.len(), count(GeneratorKind::Wind)),
            ("der_factors", self.der_factors.len(), count(GeneratorKind::DerPv)),
            ("base_loads", self.base_loads.len(), net.loads.len()),
            ("ev_demands", self.ev_demands.len(), net.ev_stations.len()),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(Error::InvalidParameter(format!(
                    "scenario {}: {name} has {got} entries, network needs {want}",
                    self.index
                )));
            }
        }
        let all = self
            .wind_speeds
            .iter()
            .chain(&self.der_factors)
            .chain(&self.base_loads)
            .chain(&self.ev_demands);
        if let Some(bad) = all.copied().find(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "scenario {}: sample value {bad} is not a finite non-negative number",
                self.index
            )));
        }
        Ok(())
    }

    /// Consumption per bus position (base load plus EV demand), MW.
    pub fn bus_consumption(&self, idx: &NetworkIndex) -> Vec<f64> {
        let mut c = vec![0.0; idx.bus_count()];
        for (v, &b) in self.base_loads.iter().zip(&idx.load_bus) {
            c[b] += v;
        }
        for (v, &b) in self.ev_demands.iter().zip(&idx.ev_bus) {
            c[b] += v;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispatchResult {
    /// MW per generator.
    pub output: Vec<f64>,
    /// tCO2/MWh per generator at its output.
    pub intensity: Vec<f64>,
    /// MW of available renewable output not used, per generator.
    pub curtailment: Vec<f64>,
    /// MW the slack unit carries beyond its proportional share.
    pub slack_residual: f64,
}

impl DispatchResult {
    pub fn total_output(&self) -> f64 {
        self.output.iter().sum()
    }

    /// Net injection (generation minus consumption) per bus position.
    pub fn injections(&self, idx: &NetworkIndex, consumption: &[f64]) -> Vec<f64> {
        let mut inj: Vec<f64> = consumption.iter().map(|c| -c).collect();
        for (p, &b) in self.output.iter().zip(&idx.generator_bus) {
            inj[b] += p;
        }
        inj
    }

    /// Hands `losses` MW to the slack unit and re-evaluates its intensity.
    pub fn absorb_losses(&mut self, net: &Network, idx: &NetworkIndex, losses: f64) -> Result<()> {
        let s = idx.slack_generator;
        let g = &net.generators[s];
        let out = self.output[s] + losses;
        if out > g.p_lim() + 1e-9 {
            return Err(Error::Infeasible(format!(
                "slack unit {} needs {out:.3} MW including losses, above its {} MW limit",
                g.id,
                g.p_lim()
            )));
        }
        self.output[s] = out.min(g.p_lim());
        self.slack_residual += losses;
        self.intensity[s] = unit_intensity(net, s, self.output[s])?;
        Ok(())
    }
}

fn unit_intensity(net: &Network, gen: usize, output: f64) -> Result<f64> {
    let g = &net.generators[gen];
    match (&g.kind, &g.cei) {
        (GeneratorKind::Conventional, Some(cei)) => cei
            .intensity(output)
            .map_err(|e| Error::Infeasible(format!("generator {}: {e}", g.id))),
        _ => Ok(g.fixed_intensity.unwrap_or(0.0)),
    }
}

/// Available renewable output per generator (zero for conventional), MW.
pub(crate) fn renewable_availability(net: &Network, s: &ScenarioSample) -> Vec<f64> {
    let mut wind = s.wind_speeds.iter();
    let mut der = s.der_factors.iter();
    net.generators
        .iter()
        .map(|g| match g.kind {
            GeneratorKind::Conventional => 0.0,
            GeneratorKind::Wind => {
                let v = *wind.next().expect("sample checked");
                wind_power(v, g.rated_output, g.turbine.as_ref().expect("validated"))
            }
            GeneratorKind::DerPv => g.rated_output * der.next().expect("sample checked"),
        })
        .collect()
}

/// Closes the gap between consumption and renewable output.
///
/// Renewables run at their available output. A positive remainder is shared
/// among conventional units in proportion to their participation factors,
/// clamped to `[0, P_Glim]` with the excess re-shared; anything left goes to
/// the slack unit, then to any unit with headroom. A surplus curtails every
/// renewable unit by the same fraction and idles conventional units.
pub fn dispatch(net: &Network, idx: &NetworkIndex, s: &ScenarioSample) -> Result<DispatchResult> {
    s.check(net)?;
    let n = net.generators.len();
    let available = renewable_availability(net, s);
    let load: f64 = s.base_loads.iter().sum::<f64>() + s.ev_demands.iter().sum::<f64>();
    let res_total: f64 = available.iter().sum();

    let mut output = vec![0.0; n];
    let mut curtailment = vec![0.0; n];
    let mut slack_residual = 0.0;

    if res_total > load {
        let keep = load / res_total;
        for i in 0..n {
            output[i] = available[i] * keep;
            curtailment[i] = available[i] - output[i];
        }
    } else {
        output.clone_from(&available);
        let mut remaining = load - res_total;
        let conventional: Vec<usize> = (0..n)
            .filter(|&i| net.generators[i].kind == GeneratorKind::Conventional)
            .collect();
        let capacity: f64 = conventional.iter().map(|&i| net.generators[i].p_lim()).sum();
        if remaining > capacity + 1e-9 {
            return Err(Error::Infeasible(format!(
                "net load {remaining:.3} MW exceeds conventional capacity {capacity:.3} MW"
            )));
        }

        let mut active: Vec<usize> = conventional
            .iter()
            .copied()
            .filter(|&i| net.generators[i].participation_factor > 0.0)
            .collect();
        while remaining > 0.0 && !active.is_empty() {
            let total_factor: f64 = active.iter().map(|&i| net.generators[i].participation_factor).sum();
            let pool = remaining;
            let mut saturated = false;
            for &i in &active {
                let g = &net.generators[i];
                let share = pool * g.participation_factor / total_factor;
                let headroom = g.p_lim() - output[i];
                let given = share.min(headroom);
                saturated |= given < share;
                output[i] += given;
                remaining -= given;
            }
            if !saturated {
                remaining = 0.0;
                break;
            }
            active.retain(|&i| output[i] < net.generators[i].p_lim());
        }

        if remaining > 0.0 {
            let order = std::iter::once(idx.slack_generator).chain(conventional.iter().copied());
            for i in order {
                let headroom = net.generators[i].p_lim() - output[i];
                let given = remaining.min(headroom.max(0.0));
                if i == idx.slack_generator {
                    slack_residual += given;
                }
                output[i] += given;
                remaining -= given;
                if remaining <= 0.0 {
                    break;
                }
            }
        }
        if remaining > 1e-9 {
            return Err(Error::Infeasible(format!(
                "{remaining:.3} MW unserved after dispatch"
            )));
        }
    }

    let intensity = (0..n).map(|i| unit_intensity(net, i, output[i])).collect::<Result<Vec<_>>>()?;
    Ok(DispatchResult {
        output,
        intensity,
        curtailment,
        slack_residual,
    })
}
