use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::executor::{execute, ChunkedPair, Program};
use crate::relation::{reachable_states_through, Relation, Target};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardConfig<S> {
    pub mu: S,
    pub gamma: S,
    pub prefer_forward_entailment: bool,
}

impl<S: Scalar> Default for RewardConfig<S> {
    fn default() -> Self {
        RewardConfig { mu: S::one(), gamma: S::of(0.5), prefer_forward_entailment: true }
    }
}

impl<S: Scalar> RewardConfig<S> {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > S::zero() && self.mu.is_finite()) {
            return Err(Error::Config(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.gamma > S::zero() && self.gamma <= S::one()) {
            return Err(Error::Config(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RewardOutcome {
    Correct,
    /// Correct, but the final state is ≡ and positive reward was withheld.
    CorrectSuppressed,
    /// Wrong, and the target stayed reachable until the last step.
    Wrong,
    /// Wrong, and the target became unreachable at step `at < m`.
    Terminated { at: usize },
}

impl RewardOutcome {
    pub fn is_correct(self) -> bool {
        matches!(self, RewardOutcome::Correct | RewardOutcome::CorrectSuppressed)
    }
}

/// Per-step rewards. `values.len()` is the number of rewarded steps, which is
/// shorter than `m` after early termination.
#[derive(Clone, Debug, PartialEq)]
pub struct Rewards<S> {
    pub values: Vec<S>,
    pub outcome: RewardOutcome,
}

impl<S: Scalar> Rewards<S> {
    pub fn total(&self) -> S {
        self.values.iter().copied().sum()
    }
}

/// First step after which `target` can no longer be met, given the projected
/// action sets of the remaining chunks. `None` if it stays reachable.
pub fn termination_step(pair: &ChunkedPair, states: &[Relation], target: Target) -> Option<usize> {
    let sets = pair.projected_action_sets();
    (1..states.len()).find(|&t| {
        let reach = reachable_states_through(states[t], sets[t..].iter().copied());
        !target.is_reachable_in(reach)
    })
}

/// Step rewards for `program` against `target`.
///
/// A correct program earns `mu` per step (0 when its final state is ≡ and
/// `prefer_forward_entailment` is set). A wrong program is cut at the first
/// step `k` from which the target is unreachable: steps before `k` receive
/// `-gamma^(m-t) mu`, step `k` receives `-mu`, later steps nothing. When
/// `k = m` this is the plain discounted penalty.
pub fn reward<S: Scalar>(
    pair: &ChunkedPair,
    program: &Program,
    target: impl Into<Target>,
    cfg: &RewardConfig<S>,
) -> Result<Rewards<S>> {
    let target = target.into();
    let trace = execute(pair, program)?;
    let m = trace.m();
    if target.is_met_by(trace.final_state()) {
        if cfg.prefer_forward_entailment && trace.final_state() == Relation::Equivalence {
            return Ok(Rewards { values: vec![S::zero(); m], outcome: RewardOutcome::CorrectSuppressed });
        }
        return Ok(Rewards { values: vec![cfg.mu; m], outcome: RewardOutcome::Correct });
    }
    let k = termination_step(pair, &trace.states, target).unwrap_or(m);
    let mut values: Vec<S> = (1..k).map(|t| -cfg.gamma.powi((m - t) as i32) * cfg.mu).collect();
    values.push(-cfg.mu);
    let outcome = if k < m { RewardOutcome::Terminated { at: k } } else { RewardOutcome::Wrong };
    Ok(Rewards { values, outcome })
}
