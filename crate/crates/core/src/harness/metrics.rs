use serde::{Deserialize, Serialize};

use super::config::{Method, Scenario};

/// Evaluation results of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub study: String,
    pub scenario: Scenario,
    pub method: Method,
    /// Distinguishes runs inside a study, e.g. a reward-grid point.
    pub label: String,
    pub agents: usize,
    pub seed: u64,
    pub episode: usize,
    /// Sum of rewards over all agents and steps.
    pub reward: f64,
    pub emv_speed: f64,
    pub av_speed: f64,
    pub collisions: usize,
    /// Mean unified risk over every (step, agent) pair.
    pub mean_risk: f64,
    pub emv_risk: f64,
    /// Mean same-lane bumper gap to the leader (m).
    pub safety_distance: f64,
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Self { mean: f64::NAN, std: f64::NAN };
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

/// Aggregate over all episodes and seeds sharing a key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub study: String,
    pub scenario: Scenario,
    pub method: Method,
    pub label: String,
    pub agents: usize,
    pub episodes: usize,
    pub reward_mean: f64,
    pub reward_std: f64,
    pub emv_speed_mean: f64,
    pub emv_speed_std: f64,
    pub av_speed_mean: f64,
    pub av_speed_std: f64,
    pub collisions_mean: f64,
    pub collisions_std: f64,
    pub mean_risk_mean: f64,
    pub mean_risk_std: f64,
    pub emv_risk_mean: f64,
    pub emv_risk_std: f64,
    pub safety_distance_mean: f64,
    pub safety_distance_std: f64,
}

impl AggregateRow {
    pub fn emv_speed(&self) -> Stat {
        Stat { mean: self.emv_speed_mean, std: self.emv_speed_std }
    }
}

fn key(m: &EpisodeMetrics) -> (&str, Scenario, Method, &str, usize) {
    (&m.study, m.scenario, m.method, &m.label, m.agents)
}

/// One row per distinct (study, scenario, method, label, agents), in order
/// of first appearance.
pub fn aggregate(rows: &[EpisodeMetrics]) -> Vec<AggregateRow> {
    let mut keys = Vec::new();
    for r in rows {
        if !keys.contains(&key(r)) {
            keys.push(key(r));
        }
    }
    keys.into_iter()
        .map(|k| {
            let group: Vec<&EpisodeMetrics> = rows.iter().filter(|r| key(r) == k).collect();
            let stat = |f: fn(&EpisodeMetrics) -> f64| Stat::of(&group.iter().map(|r| f(r)).collect::<Vec<_>>());
            let reward = stat(|r| r.reward);
            let emv = stat(|r| r.emv_speed);
            let av = stat(|r| r.av_speed);
            let col = stat(|r| r.collisions as f64);
            let risk = stat(|r| r.mean_risk);
            let emv_risk = stat(|r| r.emv_risk);
            let gap = stat(|r| r.safety_distance);
            AggregateRow {
                study: k.0.to_string(),
                scenario: k.1,
                method: k.2,
                label: k.3.to_string(),
                agents: k.4,
                episodes: group.len(),
                reward_mean: reward.mean,
                reward_std: reward.std,
                emv_speed_mean: emv.mean,
                emv_speed_std: emv.std,
                av_speed_mean: av.mean,
                av_speed_std: av.std,
                collisions_mean: col.mean,
                collisions_std: col.std,
                mean_risk_mean: risk.mean,
                mean_risk_std: risk.std,
                emv_risk_mean: emv_risk.mean,
                emv_risk_std: emv_risk.std,
                safety_distance_mean: gap.mean,
                safety_distance_std: gap.std,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: Method, seed: u64, reward: f64) -> EpisodeMetrics {
        EpisodeMetrics {
            study: "compare".into(),
            scenario: Scenario::Road,
            method,
            label: String::new(),
            agents: 10,
            seed,
            episode: 0,
            reward,
            emv_speed: 20.0,
            av_speed: 15.0,
            collisions: 0,
            mean_risk: 0.1,
            emv_risk: 0.2,
            safety_distance: 12.0,
        }
    }

    #[test]
    fn sample_std() {
        let s = Stat::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(Stat::of(&[7.0]).std, 0.0);
    }

    #[test]
    fn groups_in_first_appearance_order() {
        let rows = vec![
            row(Method::Gipps, 0, 1.0),
            row(Method::Mappo, 0, 5.0),
            row(Method::Gipps, 1, 3.0),
        ];
        let agg = aggregate(&rows);
        assert_eq!(agg.len(), 2);
        assert_eq!(agg[0].method, Method::Gipps);
        assert_eq!(agg[0].episodes, 2);
        assert_eq!(agg[0].reward_mean, 2.0);
        assert_eq!(agg[0].collisions_mean, 0.0);
        assert_eq!(agg[1].reward_std, 0.0);
    }
}
