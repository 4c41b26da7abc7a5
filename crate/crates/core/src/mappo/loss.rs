use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::neural::{Categorical, MlpParams};

/// Inputs for one actor minibatch.
#[derive(Debug, Clone, Copy)]
pub struct ActorBatch<'a> {
    pub observations: ArrayView2<'a, f64>,
    pub actions: &'a [usize],
    pub old_log_probs: &'a [f64],
    pub advantages: &'a [f64],
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ActorStats {
    pub objective: f64,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    pub entropy: f64,
}

/// Clipped surrogate plus entropy bonus, averaged over the batch.
///
/// Returns the objective and its gradient with respect to the actor
/// parameters; the update ascends it.
pub fn actor_objective(
    params: &MlpParams,
    batch: ActorBatch<'_>,
    clip: f64,
    entropy_coef: f64,
) -> Result<(ActorStats, Vec<f64>)> {
    let n = batch.actions.len();
    if batch.observations.nrows() != n || batch.old_log_probs.len() != n || batch.advantages.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: batch.observations.nrows(),
        });
    }
    if n == 0 {
        return Ok((ActorStats::default(), vec![0.0; params.len()]));
    }
    let (logits, cache) = params.forward(batch.observations)?;
    let k = params.output_dim();
    let inv_n = 1.0 / n as f64;
    let mut grad_logits = Array2::<f64>::zeros((n, k));
    let mut stats = ActorStats::default();
    let mut clipped = 0usize;
    for (i, mut g) in grad_logits.rows_mut().into_iter().enumerate() {
        let dist = Categorical::from_logits(logits.row(i).as_slice().expect("row-major"))?;
        let a = batch.actions[i];
        if a >= k {
            return Err(Error::Dimension { expected: k, got: a + 1 });
        }
        let ratio = (dist.log_prob(a) - batch.old_log_probs[i]).exp();
        if !ratio.is_finite() {
            return Err(Error::NonFinite("probability ratio"));
        }
        let adv = batch.advantages[i];
        let unclipped = ratio * adv;
        let bounded = ratio.clamp(1.0 - clip, 1.0 + clip) * adv;
        let entropy = dist.entropy();
        stats.objective += unclipped.min(bounded) + entropy_coef * entropy;
        stats.mean_ratio += ratio;
        stats.entropy += entropy;
        if (ratio - 1.0).abs() > clip {
            clipped += 1;
        }
        let g = g.as_slice_mut().expect("row-major");
        if unclipped <= bounded {
            dist.add_log_prob_grad(a, unclipped * inv_n, g);
        }
        dist.add_entropy_grad(entropy_coef * inv_n, g);
    }
    stats.objective *= inv_n;
    stats.mean_ratio *= inv_n;
    stats.entropy *= inv_n;
    stats.clip_fraction = clipped as f64 * inv_n;
    let grads = params.gradient(&cache, grad_logits.view())?;
    Ok((stats, grads.params))
}

/// Inputs for one critic minibatch, all in the critic's output units.
#[derive(Debug, Clone, Copy)]
pub struct CriticBatch<'a> {
    pub globals: ArrayView2<'a, f64>,
    pub returns: &'a [f64],
    pub old_values: &'a [f64],
}

/// Mean of `max((V - R)^2, (clip(V, V_old - clip, V_old + clip) - R)^2)` and
/// its parameter gradient.
pub fn critic_loss(params: &MlpParams, batch: CriticBatch<'_>, clip: f64) -> Result<(f64, Vec<f64>)> {
    let n = batch.returns.len();
    if batch.globals.nrows() != n || batch.old_values.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: batch.globals.nrows(),
        });
    }
    if n == 0 {
        return Ok((0.0, vec![0.0; params.len()]));
    }
    let (values, cache) = params.forward(batch.globals)?;
    let inv_n = 1.0 / n as f64;
    let mut grad = Array2::<f64>::zeros((n, 1));
    let mut loss = 0.0;
    for i in 0..n {
        let (v, r, old) = (values[[i, 0]], batch.returns[i], batch.old_values[i]);
        let (l, g) = clipped_value_term(v, old, r, clip);
        loss += l;
        grad[[i, 0]] = g * inv_n;
    }
    let grads = params.gradient(&cache, grad.view())?;
    Ok((loss * inv_n, grads.params))
}

/// One sample's clipped value loss and its derivative in `v`.
pub fn clipped_value_term(v: f64, old: f64, target: f64, clip: f64) -> (f64, f64) {
    let unclipped = (v - target).powi(2);
    let vc = old + (v - old).clamp(-clip, clip);
    let clipped = (vc - target).powi(2);
    if unclipped >= clipped {
        (unclipped, 2.0 * (v - target))
    } else {
        (clipped, 0.0)
    }
}
