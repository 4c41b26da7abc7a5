use serde::{Deserialize, Serialize};

/// Running mean and variance of every return seen so far.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueNormalizer {
    pub count: f64,
    pub mean: f64,
    /// Sum of squared deviations from the mean.
    pub m2: f64,
}

impl Default for ValueNormalizer {
    fn default() -> Self {
        Self {
            count: 0.0,
            mean: 0.0,
            m2: 0.0,
        }
    }
}

const MIN_STD: f64 = 1e-4;

impl ValueNormalizer {
    /// Merges a batch with the parallel-variance update.
    pub fn update(&mut self, xs: &[f64]) {
        if xs.is_empty() {
            return;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let m2 = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
        let total = self.count + n;
        let delta = mean - self.mean;
        self.mean += delta * n / total;
        self.m2 += m2 + delta * delta * self.count * n / total;
        self.count = total;
    }

    pub fn std(&self) -> f64 {
        if self.count < 2.0 {
            1.0
        } else {
            (self.m2 / self.count).sqrt().max(MIN_STD)
        }
    }

    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.mean) / self.std()
    }

    pub fn denormalize(&self, y: f64) -> f64 {
        y * self.std() + self.mean
    }
}
