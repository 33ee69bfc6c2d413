use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Running mean and variance (Welford).
#[derive(Clone, Copy, Debug, Default)]
pub struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; 0 with fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate {
            mean: self.mean(),
            std_error: self.std_error(),
            samples: self.count,
        }
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub mean: f64,
    pub half_width: f64,
    pub level: f64,
    pub samples: u64,
    /// Set for proportions; `low`/`high` are then clamped to `[0, 1]`.
    #[serde(default)]
    pub unit: bool,
}

impl ConfidenceInterval {
    /// Normal-approximation interval `mean +- z_{(1+level)/2} * se`.
    pub fn normal(est: Estimate, level: f64) -> Self {
        Self {
            mean: est.mean,
            half_width: normal_quantile(0.5 + level / 2.0) * est.std_error,
            level,
            samples: est.samples,
            unit: false,
        }
    }

    /// Wald interval for a success frequency.
    pub fn proportion(successes: u64, trials: u64, level: f64) -> Self {
        let p = successes as f64 / trials as f64;
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        let est = Estimate {
            mean: p,
            std_error: se,
            samples: trials,
        };
        Self {
            unit: true,
            ..Self::normal(est, level)
        }
    }

    pub fn low(&self) -> f64 {
        let lo = self.mean - self.half_width;
        if self.unit { lo.max(0.0) } else { lo }
    }

    pub fn high(&self) -> f64 {
        let hi = self.mean + self.half_width;
        if self.unit { hi.min(1.0) } else { hi }
    }
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Upper critical value of the chi-square law with `df` degrees of freedom
/// at significance `alpha`.
pub fn chi_square_critical(df: u64, alpha: f64) -> f64 {
    if df == 0 {
        return 0.0;
    }
    ChiSquared::new(df as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(1.0 - alpha)
}

/// Batch-means estimate for an autocorrelated series: the mean of `batches`
/// contiguous block averages and their standard error.
pub fn batch_means(values: &[f64], batches: usize) -> Estimate {
    let batches = batches.clamp(1, values.len().max(1));
    let size = values.len() / batches;
    if size == 0 {
        return values.iter().copied().collect::<Moments>().estimate();
    }
    let blocks: Moments = values
        .chunks(size)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    Estimate {
        mean: values.iter().sum::<f64>() / values.len() as f64,
        std_error: blocks.std_error(),
        samples: values.len() as u64,
    }
}
