use std::io::Write;

use serde::{Deserialize, Serialize};

use super::action::Action;
use super::{Env, StepOutcome};
use crate::error::Result;

/// One line of an exported episode trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub agent: usize,
    pub s: f64,
    pub lane: usize,
    pub v: f64,
    pub action: Action,
    pub reward: f64,
    pub risk: f64,
}

/// Writes newline-delimited JSON trace records.
pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    /// Records the post-step state of every agent.
    pub fn record(&mut self, env: &Env, actions: &[Action], outcome: &StepOutcome) -> Result<()> {
        let step = env.step_index();
        for (i, agent) in env.agents().iter().enumerate() {
            let rec = TraceRecord {
                step,
                agent: agent.id,
                s: agent.s,
                lane: agent.lane,
                v: agent.v,
                action: actions[i],
                reward: outcome.rewards[i],
                risk: outcome.risks[i],
            };
            serde_json::to_writer(&mut self.out, &rec)?;
            self.out
                .write_all(b"\n")
                .map_err(|e| crate::error::Error::io("<trace>", e))?;
        }
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
