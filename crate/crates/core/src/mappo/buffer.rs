use ndarray::Array2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRecord {
    pub agent: usize,
    pub observation: Vec<f64>,
    pub global: Vec<f64>,
    pub action: usize,
    /// Behaviour-policy log-probability of `action`.
    pub log_prob: f64,
    /// Critic estimate in return units.
    pub value: f64,
    pub reward: f64,
    pub done: bool,
}

/// Records of one iteration, step-major: record `t * agents + j` belongs to
/// agent `j` at step `t`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBuffer {
    pub agents: usize,
    pub records: Vec<TransitionRecord>,
    /// Value of the state after the last step, per agent.
    pub bootstrap: Option<Vec<f64>>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn new(agents: usize) -> Self {
        Self {
            agents,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn steps(&self) -> usize {
        if self.agents == 0 {
            0
        } else {
            self.records.len() / self.agents
        }
    }

    pub fn record(&self, step: usize, agent: usize) -> &TransitionRecord {
        &self.records[step * self.agents + agent]
    }

    pub fn has_advantages(&self) -> bool {
        !self.records.is_empty() && self.advantages.len() == self.records.len()
    }

    /// Stacks the observations of `indices` into rows.
    pub fn observations(&self, indices: &[usize]) -> Array2<f64> {
        stack(indices, |i| &self.records[i].observation)
    }

    pub fn globals(&self, indices: &[usize]) -> Array2<f64> {
        stack(indices, |i| &self.records[i].global)
    }

    /// Fills `advantages` and `returns` by per-agent GAE, without normalising.
    pub fn compute_gae(&mut self, gamma: f64, lambda: f64) -> Result<()> {
        let bootstrap = self.bootstrap.as_ref().ok_or(Error::MissingBootstrap)?;
        if bootstrap.len() != self.agents || self.records.len() % self.agents.max(1) != 0 {
            return Err(Error::Dimension {
                expected: self.agents,
                got: bootstrap.len(),
            });
        }
        let steps = self.steps();
        let n = self.records.len();
        let mut adv = vec![0.0; n];
        for j in 0..self.agents {
            let mut next_value = bootstrap[j];
            let mut next_adv = 0.0;
            for t in (0..steps).rev() {
                let rec = &self.records[t * self.agents + j];
                let live = if rec.done { 0.0 } else { 1.0 };
                let delta = rec.reward + gamma * live * next_value - rec.value;
                next_adv = delta + gamma * lambda * live * next_adv;
                adv[t * self.agents + j] = next_adv;
                next_value = rec.value;
            }
        }
        self.returns = adv.iter().zip(&self.records).map(|(a, r)| a + r.value).collect();
        self.advantages = adv;
        Ok(())
    }

    /// Shifts and scales the advantages to zero mean and unit deviation.
    pub fn normalize_advantages(&mut self) {
        normalize(&mut self.advantages);
    }
}

fn stack<'a, F: Fn(usize) -> &'a Vec<f64>>(indices: &[usize], row: F) -> Array2<f64> {
    let dim = indices.first().map_or(0, |&i| row(i).len());
    let mut m = Array2::zeros((indices.len(), dim));
    for (mut dst, &i) in m.rows_mut().into_iter().zip(indices) {
        dst.as_slice_mut().expect("row-major").copy_from_slice(row(i));
    }
    m
}

/// Population mean and standard deviation normalisation in place.
pub fn normalize(xs: &mut [f64]) {
    if xs.is_empty() {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    // Two passes keep the residual mean at rounding level.
    let scale = if std > 1e-12 { 1.0 / std } else { 1.0 };
    for x in xs.iter_mut() {
        *x = (*x - mean) * scale;
    }
    let residual = xs.iter().sum::<f64>() / n;
    for x in xs.iter_mut() {
        *x -= residual;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn buffer(rewards: &[f64], values: &[f64], dones: &[bool], bootstrap: f64) -> RolloutBuffer {
        let mut b = RolloutBuffer::new(1);
        for ((&r, &v), &d) in rewards.iter().zip(values).zip(dones) {
            b.records.push(TransitionRecord {
                agent: 0,
                observation: vec![0.0],
                global: vec![0.0],
                action: 0,
                log_prob: 0.0,
                value: v,
                reward: r,
                done: d,
            });
        }
        b.bootstrap = Some(vec![bootstrap]);
        b
    }

    #[test]
    fn single_terminal_step() {
        let mut b = buffer(&[1.0], &[0.5], &[true], 0.0);
        b.compute_gae(0.99, 0.95).unwrap();
        assert!((b.advantages[0] - 0.5).abs() < 1e-12);
        assert!((b.returns[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_steps_with_bootstrap() {
        let mut b = buffer(&[1.0, 1.0], &[0.5, 0.5], &[false, false], 0.5);
        b.compute_gae(0.99, 0.95).unwrap();
        assert!((b.advantages[1] - 0.995).abs() < 1e-12);
        assert!((b.advantages[0] - (0.995 + 0.9405 * 0.995)).abs() < 1e-12);
        assert!((b.advantages[0] - 1.9308).abs() < 1e-4);
    }

    #[test]
    fn two_steps_terminal_masks_bootstrap() {
        let mut b = buffer(&[1.0, 1.0], &[0.5, 0.5], &[false, true], 123.0);
        b.compute_gae(0.99, 0.95).unwrap();
        assert!((b.advantages[1] - 0.5).abs() < 1e-12);
        assert!((b.advantages[0] - (0.995 + 0.9405 * 0.5)).abs() < 1e-12);
    }

    #[test]
    fn missing_bootstrap() {
        let mut b = buffer(&[1.0], &[0.5], &[true], 0.0);
        b.bootstrap = None;
        assert!(matches!(b.compute_gae(0.99, 0.95), Err(Error::MissingBootstrap)));
    }

    #[test]
    fn agents_are_independent() {
        let mut b = RolloutBuffer::new(2);
        for t in 0..3 {
            for j in 0..2 {
                b.records.push(TransitionRecord {
                    agent: j,
                    observation: vec![],
                    global: vec![],
                    action: 0,
                    log_prob: 0.0,
                    value: 0.0,
                    reward: if j == 0 { 1.0 } else { 0.0 },
                    done: t == 2,
                });
            }
        }
        b.bootstrap = Some(vec![0.0, 0.0]);
        b.compute_gae(1.0, 1.0).unwrap();
        assert_eq!(b.advantages[0], 3.0);
        assert_eq!(b.advantages[1], 0.0);
        assert_eq!(b.record(1, 0).agent, 0);
    }

    #[test]
    fn normalisation_moments() {
        let mut xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 3.7 + 1e6).collect();
        normalize(&mut xs);
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() <= 1e-10);
        assert!((std - 1.0).abs() <= 1e-6);
    }
}
