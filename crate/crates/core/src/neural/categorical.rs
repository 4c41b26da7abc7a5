use rand::Rng;

use crate::error::{Error, Result};

/// Categorical distribution parameterised by logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Categorical {
    log_probs: Vec<f64>,
}

impl Categorical {
    pub fn from_logits(logits: &[f64]) -> Result<Self> {
        if logits.is_empty() {
            return Err(Error::Dimension { expected: 1, got: 0 });
        }
        if logits.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("logits"));
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
        Ok(Self {
            log_probs: logits.iter().map(|&z| z - lse).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|l| l.exp()).collect()
    }

    pub fn log_prob(&self, index: usize) -> f64 {
        self.log_probs[index]
    }

    /// `-Σ p log p`.
    pub fn entropy(&self) -> f64 {
        -self.log_probs.iter().map(|&l| l.exp() * l).sum::<f64>()
    }

    pub fn log_prob_and_entropy(&self, index: usize) -> (f64, f64) {
        (self.log_prob(index), self.entropy())
    }

    /// Inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, l) in self.log_probs.iter().enumerate() {
            acc += l.exp();
            if u < acc {
                return i;
            }
        }
        self.log_probs.len() - 1
    }

    /// Most probable index; ties go to the lowest index.
    pub fn mode(&self) -> usize {
        let mut best = 0;
        for (i, &l) in self.log_probs.iter().enumerate() {
            if l > self.log_probs[best] {
                best = i;
            }
        }
        best
    }

    /// `∂ log p[index] / ∂ logits`, accumulated into `out` with weight `w`.
    pub fn add_log_prob_grad(&self, index: usize, w: f64, out: &mut [f64]) {
        for (j, (o, &l)) in out.iter_mut().zip(&self.log_probs).enumerate() {
            let indicator = if j == index { 1.0 } else { 0.0 };
            *o += w * (indicator - l.exp());
        }
    }

    /// `∂ entropy / ∂ logits = -p (log p + H)`, accumulated with weight `w`.
    pub fn add_entropy_grad(&self, w: f64, out: &mut [f64]) {
        let h = self.entropy();
        for (o, &l) in out.iter_mut().zip(&self.log_probs) {
            *o -= w * l.exp() * (l + h);
        }
    }
}
