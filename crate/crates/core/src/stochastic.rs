//! Probability models for the stochastic inputs and the output-dependent
//! carbon intensity of conventional units.
//!
//! Every sampler is a pure function of its parameters and an [`RngStream`].
//! Weibull and normal draws go through their inverse CDF so that each draw
//! consumes exactly one uniform (two for a rejected negative load).

use rand::distr::Open01;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two-parameter Weibull distribution, `F(x) = 1 - exp(-(x/lambda)^k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullParams {
    pub lambda: f64,
    pub k: f64,
}

impl WeibullParams {
    pub fn new(lambda: f64, k: f64) -> Result<Self> {
        let p = WeibullParams { lambda, k };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite() && self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "weibull requires lambda > 0 and k > 0, got lambda={} k={}",
                self.lambda, self.k
            )));
        }
        Ok(())
    }

    /// Inverse CDF. `u` in `[0, 1)`.
    #[inline]
    pub fn quantile(&self, u: f64) -> f64 {
        self.lambda * (-(-u).ln_1p()).powf(1.0 / self.k)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            -(-(x / self.lambda).powf(self.k)).exp_m1()
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let z = x / self.lambda;
        (self.k / self.lambda) * z.powf(self.k - 1.0) * (-z.powf(self.k)).exp()
    }

    pub fn mean(&self) -> f64 {
        self.lambda * libm::tgamma(1.0 + 1.0 / self.k)
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        self.quantile(rng.uniform())
    }
}

/// Normal distribution `N(mu, sigma^2)` in MW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalParams {
    pub mu: f64,
    pub sigma: f64,
}

impl NormalParams {
    pub fn quantile(&self, u: f64) -> f64 {
        self.mu + self.sigma * standard_normal_quantile(u)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if self.sigma == 0.0 {
            return if x < self.mu { 0.0 } else { 1.0 };
        }
        0.5 * libm::erfc(-(x - self.mu) / (self.sigma * std::f64::consts::SQRT_2))
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let z = (x - self.mu) / self.sigma;
        (-0.5 * z * z).exp() / (self.sigma * (2.0 * std::f64::consts::PI).sqrt())
    }

    /// Untruncated draw.
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        if self.sigma == 0.0 {
            return self.mu;
        }
        self.quantile(rng.open_uniform())
    }

    /// Draw truncated below at zero: one resample, then clamp.
    pub fn sample_nonnegative(&self, rng: &mut RngStream) -> f64 {
        let x = self.sample(rng);
        if x >= 0.0 {
            return x;
        }
        self.sample(rng).max(0.0)
    }
}

/// Beta shape parameters for the DER capacity factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for BetaParams {
    fn default() -> Self {
        BetaParams {
            alpha: 2.0,
            beta: 2.0,
        }
    }
}

impl BetaParams {
    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        Beta::new(self.alpha, self.beta)
            .expect("beta parameters are validated with the network")
            .sample(rng)
    }
}

/// Cut-in, rated, and cut-out speeds (m/s) of a wind farm power curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindTurbineParams {
    pub v_in: f64,
    pub v_rate: f64,
    pub v_out: f64,
}

impl Default for WindTurbineParams {
    fn default() -> Self {
        WindTurbineParams {
            v_in: 3.0,
            v_rate: 12.0,
            v_out: 25.0,
        }
    }
}

impl WindTurbineParams {
    pub fn check(&self) -> Result<()> {
        if !(0.0 <= self.v_in && self.v_in < self.v_rate && self.v_rate < self.v_out) {
            return Err(Error::InvalidParameter(format!(
                "turbine requires 0 <= v_in < v_rate < v_out, got {} / {} / {}",
                self.v_in, self.v_rate, self.v_out
            )));
        }
        Ok(())
    }

    /// Expected output as a fraction of rated power when the wind speed is
    /// Weibull distributed.
    pub fn expected_capacity_factor(&self, wind: &WeibullParams) -> f64 {
        // Ramp segment by composite Simpson; the flat segment is exact.
        const INTERVALS: usize = 2000;
        let h = (self.v_rate - self.v_in) / INTERVALS as f64;
        let f = |x: f64| wind_power(x, 1.0, self) * wind.pdf(x);
        let mut acc = f(self.v_in) + f(self.v_rate - 1e-12);
        for i in 1..INTERVALS {
            let x = self.v_in + i as f64 * h;
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        acc * h / 3.0 + wind.cdf(self.v_out) - wind.cdf(self.v_rate)
    }
}

/// Power curve of a wind farm rated `p_rate` MW at wind speed `speed` m/s.
///
/// Zero below cut-in and above cut-out, rated output on `[v_rate, v_out]`,
/// linear ramp `p_rate * (x - v_in) / (v_rate - v_in)` in between.
#[inline]
pub fn wind_power(speed: f64, p_rate: f64, t: &WindTurbineParams) -> f64 {
    if speed < t.v_in || speed > t.v_out {
        0.0
    } else if speed >= t.v_rate {
        p_rate
    } else {
        p_rate * (speed - t.v_in) / (t.v_rate - t.v_in)
    }
}

/// Piecewise-linear marginal carbon intensity of a conventional unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalCeiParams {
    pub a_down: f64,
    pub b_down: f64,
    pub a_over: f64,
    pub b_over: f64,
    /// Design-optimal output, MW.
    pub p_rate: f64,
    /// Maximum output, MW.
    pub p_lim: f64,
}

impl MarginalCeiParams {
    /// Constant intensity independent of output.
    pub fn flat(intensity: f64, p_rate: f64, p_lim: f64) -> Self {
        MarginalCeiParams {
            a_down: intensity,
            b_down: 0.0,
            a_over: intensity,
            b_over: 0.0,
            p_rate,
            p_lim,
        }
    }

    /// Smallest intensity over `(0, p_lim]`; the curve is linear on each
    /// segment so the extremes sit at the segment ends.
    pub fn min_intensity(&self) -> f64 {
        let lower = self.a_down.min(self.a_down - self.b_down * self.p_rate);
        if self.p_lim > self.p_rate {
            let upper = (self.a_over + self.b_over * self.p_rate)
                .min(self.a_over + self.b_over * self.p_lim);
            lower.min(upper)
        } else {
            lower
        }
    }

    pub fn intensity(&self, output: f64) -> Result<f64> {
        const SLACK: f64 = 1e-9;
        if !(output >= -SLACK && output <= self.p_lim + SLACK) {
            return Err(Error::InvalidParameter(format!(
                "output {output} MW outside [0, {}] MW",
                self.p_lim
            )));
        }
        Ok(marginal_cei(output.clamp(0.0, self.p_lim), self))
    }
}

/// Intensity at `output` MW; `output == p_rate` belongs to the lower segment.
#[inline]
pub fn marginal_cei(output: f64, p: &MarginalCeiParams) -> f64 {
    if output <= p.p_rate {
        p.a_down - p.b_down * output
    } else {
        p.a_over + p.b_over * output
    }
}

/// Deterministic random stream for one scenario: ChaCha8 keyed by the
/// master seed, with the scenario index selecting the stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    index: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        RngStream { seed, index, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform on `(0, 1)`.
    #[inline]
    pub fn open_uniform(&mut self) -> f64 {
        self.rng.sample(Open01)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

pub fn weibull_sample(p: &WeibullParams, rng: &mut RngStream) -> f64 {
    p.sample(rng)
}

/// Aggregate charging power of an EV station, MW. Same transform as
/// [`weibull_sample`].
pub fn ev_demand_sample(p: &WeibullParams, rng: &mut RngStream) -> f64 {
    p.sample(rng)
}

pub fn base_load_sample(p: &NormalParams, rng: &mut RngStream) -> f64 {
    p.sample_nonnegative(rng)
}

/// Standard normal quantile for `u` in `(0, 1)`.
///
/// Acklam's rational approximation (relative error 1.15e-9) refined by one
/// Halley step against `erfc`, which brings it to near machine precision.
pub fn standard_normal_quantile(u: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if u <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if u >= 1.0 {
        return f64::INFINITY;
    }

    let x = if u < P_LOW {
        let q = (-2.0 * u.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if u <= 1.0 - P_LOW {
        let q = u - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (-u).ln_1p()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    // Halley step on Phi(x) - u; the upper half uses the complement so the
    // residual keeps its precision.
    let e = if x > 0.0 {
        (1.0 - u) - 0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
    } else {
        0.5 * libm::erfc(-x / std::f64::consts::SQRT_2) - u
    };
    let d = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    x - d / (1.0 + 0.5 * x * d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weibull_quantile_fixed_points() {
        let p = WeibullParams::new(8.0, 2.0).unwrap();
        assert_eq!(p.quantile(0.0), 0.0);
        let at_lambda = p.quantile(1.0 - (-1.0f64).exp());
        assert!((at_lambda - 8.0).abs() < 1e-12);
    }

    #[test]
    fn weibull_median_matches_numeric_inversion() {
        // Bisection on the CDF as an independent inverse.
        let p = WeibullParams::new(8.0, 2.0).unwrap();
        let (mut lo, mut hi) = (0.0, 100.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if p.cdf(mid) < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo - 8.0 * std::f64::consts::LN_2.sqrt()).abs() < 1e-9);
        assert!((p.quantile(0.5) - lo).abs() < 1e-12);
    }

    #[test]
    fn weibull_rejects_bad_params() {
        assert!(WeibullParams::new(0.0, 2.0).is_err());
        assert!(WeibullParams::new(1.0, -1.0).is_err());
    }

    #[test]
    fn wind_power_curve() {
        let t = WindTurbineParams::default();
        assert_eq!(wind_power(2.9, 50.0, &t), 0.0);
        assert_eq!(wind_power(12.0, 50.0, &t), 50.0);
        assert_eq!(wind_power(7.5, 50.0, &t), 25.0);
        assert_eq!(wind_power(25.0, 50.0, &t), 50.0);
        assert_eq!(wind_power(25.1, 50.0, &t), 0.0);
    }

    #[test]
    fn capacity_factor_against_sampling() {
        let t = WindTurbineParams::default();
        let w = WeibullParams::new(8.0, 2.0).unwrap();
        let cf = t.expected_capacity_factor(&w);
        let mut rng = RngStream::new(11, 0);
        let n = 200_000;
        let mc: f64 = (0..n)
            .map(|_| wind_power(w.sample(&mut rng), 1.0, &t))
            .sum::<f64>()
            / n as f64;
        assert!((cf - mc).abs() < 3e-3, "cf={cf} mc={mc}");
    }

    #[test]
    fn marginal_cei_segments() {
        let flat = MarginalCeiParams::flat(0.9, 100.0, 200.0);
        for p in [0.0, 50.0, 100.0, 150.0, 200.0] {
            assert_eq!(flat.intensity(p).unwrap(), 0.9);
        }
        let p = MarginalCeiParams {
            a_down: 0.95,
            b_down: 0.0005,
            a_over: 0.7,
            b_over: 0.001,
            p_rate: 200.0,
            p_lim: 300.0,
        };
        assert_eq!(p.intensity(0.0).unwrap(), 0.95);
        assert!((p.intensity(200.0).unwrap() - 0.85).abs() < 1e-15);
        assert!((p.intensity(250.0).unwrap() - 0.95).abs() < 1e-15);
        assert!(p.intensity(300.5).is_err());
        assert!(p.intensity(-1.0).is_err());
    }

    #[test]
    fn normal_zero_sigma_is_exact() {
        let p = NormalParams { mu: 42.5, sigma: 0.0 };
        let mut rng = RngStream::new(1, 2);
        for _ in 0..10 {
            assert_eq!(base_load_sample(&p, &mut rng), 42.5);
        }
    }

    #[test]
    fn truncated_normal_is_nonnegative() {
        let p = NormalParams { mu: 0.0, sigma: 1.0 };
        let mut rng = RngStream::new(3, 0);
        assert!((0..10_000).all(|_| base_load_sample(&p, &mut rng) >= 0.0));
    }

    #[test]
    fn normal_quantile_symmetry_and_tails() {
        for u in [1e-12, 1e-6, 0.01, 0.2, 0.5] {
            let a = standard_normal_quantile(u);
            let b = standard_normal_quantile(1.0 - u);
            assert!((a + b).abs() < 1e-6 * a.abs().max(1.0), "u={u}");
        }
        assert_eq!(standard_normal_quantile(0.5), 0.0);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut a = RngStream::new(9, 4);
        let mut b = RngStream::new(9, 4);
        let mut c = RngStream::new(9, 5);
        let xa: Vec<f64> = (0..5).map(|_| a.uniform()).collect();
        let xb: Vec<f64> = (0..5).map(|_| b.uniform()).collect();
        let xc: Vec<f64> = (0..5).map(|_| c.uniform()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }

    #[test]
    fn ev_and_weibull_share_transform() {
        let p = WeibullParams::new(2.0, 1.0).unwrap();
        let mut a = RngStream::new(5, 1);
        let mut b = a.clone();
        assert_eq!(ev_demand_sample(&p, &mut a), weibull_sample(&p, &mut b));
    }
}
