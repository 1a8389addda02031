use serde::Serialize;

/// Fixed-range histogram; values outside the range land in the end bins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        assert!(bins >= 2, "histogram needs at least two bins");
        let hi = if hi > lo { hi } else { lo + 1.0 };
        Histogram {
            lo,
            hi,
            counts: vec![0; bins],
        }
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins() as f64
    }

    pub fn bin_of(&self, x: f64) -> usize {
        let b = ((x - self.lo) / self.width()).floor();
        if b.is_nan() || b < 0.0 {
            0
        } else {
            (b as usize).min(self.bins() - 1)
        }
    }

    pub fn add(&mut self, x: f64) {
        let b = self.bin_of(x);
        self.counts[b] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn merge(&mut self, other: &Histogram) {
        assert!(
            self.lo == other.lo && self.hi == other.hi && self.bins() == other.bins(),
            "merging histograms with different binning"
        );
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }
}

/// Streaming count, mean, second central moment, extremes and histogram.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsAccumulator {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
    pub min: f64,
    pub max: f64,
    pub histogram: Histogram,
}

impl StatsAccumulator {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        StatsAccumulator {
            count: 0,
            mean: 0.0,
            m2: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            histogram: Histogram::new(lo, hi, bins),
        }
    }

    /// An empty accumulator with the same binning.
    pub fn empty_like(&self) -> Self {
        let h = &self.histogram;
        StatsAccumulator::new(h.lo, h.hi, h.bins())
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
        self.min = self.min.min(x);
        self.max = self.max.max(x);
        self.histogram.add(x);
    }

    pub fn merge(&mut self, other: &StatsAccumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta = other.mean - self.mean;
        self.mean += delta * nb / n;
        self.m2 += other.m2 + delta * delta * na * nb / n;
        self.count += other.count;
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
        self.histogram.merge(&other.histogram);
    }

    /// Sample variance with the `n - 1` denominator; zero below two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Quantile interpolated inside the histogram bin where the cumulative
    /// count crosses `p`, limited to the observed range.
    pub fn quantile(&self, p: f64) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        let target = p.clamp(0.0, 1.0) * self.count as f64;
        let h = &self.histogram;
        let mut below = 0.0;
        let mut q = h.hi;
        for (b, &c) in h.counts.iter().enumerate() {
            let c = c as f64;
            if c > 0.0 && below + c >= target {
                q = h.lo + h.width() * (b as f64 + (target - below) / c);
                break;
            }
            below += c;
        }
        q.clamp(self.min, self.max)
    }
}

/// Probability density and cumulative distribution over histogram bins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalDistribution {
    /// Bin edges, one more than the bins.
    pub edges: Vec<f64>,
    pub pdf: Vec<f64>,
    /// Cumulative probability at each bin's upper edge.
    pub cdf: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1]))
    }
}

pub fn empirical_distribution(acc: &StatsAccumulator) -> EmpiricalDistribution {
    let h = &acc.histogram;
    let n = h.total();
    let width = h.width();
    let edges = (0..=h.bins()).map(|b| h.lo + width * b as f64).collect();
    let pdf = h
        .counts
        .iter()
        .map(|&c| if n == 0 { 0.0 } else { c as f64 / (n as f64 * width) })
        .collect();
    let mut running = 0u64;
    let mut cdf: Vec<f64> = h
        .counts
        .iter()
        .map(|&c| {
            running += c;
            if n == 0 {
                0.0
            } else {
                running as f64 / n as f64
            }
        })
        .collect();
    if n > 0 {
        // Integer running sums make the last entry exactly one already.
        *cdf.last_mut().expect("at least two bins") = 1.0;
    }
    EmpiricalDistribution { edges, pdf, cdf }
}
