//! Rewards, objectives, program revision and the training loop.

pub mod augment;
pub mod objective;
pub mod revision;
pub mod reward;

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::executor::{final_state, ChunkedPair};
use crate::knowledge::{build_queue, Lexicon, ProposalQueue};
use crate::policy::Policy;
use crate::relation::{ActionRelation, Target};
use crate::scalar::Scalar;

pub use augment::{mutual_entailment, relation_augmentation};
pub use objective::{hybrid, reinforce, Objective};
pub use revision::{grid_search, introspective_revision, IrConfig, Revision, RevisionEntry, RevisionSource};
pub use reward::{reward, RewardConfig, RewardOutcome, Rewards};

/// A chunked pair and what its program must execute to.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainExample {
    pub pair: ChunkedPair,
    pub target: Target,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub mu: f64,
    pub gamma: f64,
    pub prefer_forward_entailment: bool,
    #[serde(rename = "M")]
    pub max_steps: usize,
    pub epsilon: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Run introspective revision; off gives plain REINFORCE.
    pub revision: bool,
    /// Feed knowledge proposals to revision; off leaves only answer-driven
    /// revision.
    pub knowledge: bool,
    pub relation_augmentation: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mu: 1.0,
            gamma: 0.5,
            prefer_forward_entailment: true,
            max_steps: 3,
            epsilon: 0.2,
            lambda: 0.5,
            epochs: 20,
            learning_rate: 0.5,
            batch_size: 16,
            seed: 0,
            revision: true,
            knowledge: true,
            relation_augmentation: true,
        }
    }
}

impl TrainConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn reward_config<S: Scalar>(&self) -> RewardConfig<S> {
        RewardConfig { mu: S::of(self.mu), gamma: S::of(self.gamma), prefer_forward_entailment: self.prefer_forward_entailment }
    }

    pub fn ir_config<S: Scalar>(&self) -> IrConfig<S> {
        IrConfig { max_steps: self.max_steps, epsilon: S::of(self.epsilon), lambda: S::of(self.lambda) }
    }

    pub fn validate(&self) -> Result<()> {
        self.reward_config::<f64>().validate()?;
        self.ir_config::<f64>().validate()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Revision bookkeeping for one epoch. The four episode categories are
/// disjoint and sum to `episodes`; the per-relation maps count accepted
/// edits by their new relation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RevisionStats {
    pub episodes: usize,
    pub knowledge_only: usize,
    pub answer_only: usize,
    pub both: usize,
    pub unrevised: usize,
    pub knowledge_edits: usize,
    pub answer_edits: usize,
    pub knowledge_by_relation: BTreeMap<ActionRelation, usize>,
    pub answer_by_relation: BTreeMap<ActionRelation, usize>,
}

impl RevisionStats {
    fn record(&mut self, rev: Option<&Revision>) {
        self.episodes += 1;
        let Some(rev) = rev else {
            self.unrevised += 1;
            return;
        };
        match (rev.used(RevisionSource::Knowledge), rev.used(RevisionSource::Answer)) {
            (true, true) => self.both += 1,
            (true, false) => self.knowledge_only += 1,
            (false, true) => self.answer_only += 1,
            (false, false) => self.unrevised += 1,
        }
        for e in &rev.log {
            let (count, map) = match e.source {
                RevisionSource::Knowledge => (&mut self.knowledge_edits, &mut self.knowledge_by_relation),
                RevisionSource::Answer => (&mut self.answer_edits, &mut self.answer_by_relation),
            };
            *count += 1;
            *map.entry(e.new).or_default() += 1;
        }
    }

    /// Structural consistency of the counts.
    pub fn is_consistent(&self) -> bool {
        self.knowledge_only + self.answer_only + self.both + self.unrevised == self.episodes
            && self.knowledge_by_relation.values().sum::<usize>() == self.knowledge_edits
            && self.answer_by_relation.values().sum::<usize>() == self.answer_edits
            && self.answer_edits == self.answer_only + self.both
            && self.knowledge_edits >= self.knowledge_only + self.both
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub episodes: usize,
    /// Greedy label accuracy on the un-augmented training examples after
    /// the epoch's updates.
    pub train_accuracy: f64,
    /// Mean over episodes of the mean step reward of the sampled program.
    pub mean_reward: f64,
    pub mean_objective: f64,
    pub sampled_correct: usize,
    pub revisions: RevisionStats,
}

struct EpisodeResult<S, G> {
    grad: G,
    objective: S,
    mean_reward: S,
    correct: bool,
    revision: Option<Revision>,
}

/// Random stream for one episode, fixed by seed, epoch and example index so
/// rollouts can run in any order.
pub fn episode_rng(seed: u64, epoch: usize, ordinal: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((epoch as u64) << 32) | ordinal as u64);
    rng
}

fn run_episode<S: Scalar, P: Policy<S>>(
    policy: &P,
    ex: &TrainExample,
    lex: &Lexicon,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<EpisodeResult<S, P::Grad>> {
    let reward_cfg = cfg.reward_config::<S>();
    let probs = policy.distributions(&ex.pair, lex)?;
    let program = crate::executor::Program::new(probs.iter().map(|d| d.sample(rng)).collect());
    let rewards = reward(&ex.pair, &program, ex.target, &reward_cfg)?;
    let j = reinforce(policy, &ex.pair, lex, &program, &probs, &rewards.values)?;
    let mean_reward = rewards.total() / S::of(program.len() as f64);
    let correct = rewards.outcome.is_correct();
    if !cfg.revision {
        return Ok(EpisodeResult { grad: j.grad, objective: j.value, mean_reward, correct, revision: None });
    }
    let ir_cfg = cfg.ir_config::<S>();
    let phi = if cfg.knowledge { build_queue(&ex.pair, lex, &probs) } else { ProposalQueue::new() };
    let rev = introspective_revision(&ex.pair, &program, ex.target, phi, &probs, &ir_cfg, rng)?;
    let revised_rewards = reward(&ex.pair, &rev.program, ex.target, &reward_cfg)?;
    let j_rev = reinforce(policy, &ex.pair, lex, &rev.program, &probs, &revised_rewards.values)?;
    let h = hybrid(policy, j, j_rev, ir_cfg.lambda);
    Ok(EpisodeResult { grad: h.grad, objective: h.value, mean_reward, correct, revision: Some(rev) })
}

/// Greedy label accuracy of `policy` on `data`.
pub fn greedy_accuracy<S: Scalar, P: Policy<S>>(policy: &P, data: &[TrainExample], lex: &Lexicon) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let hits = data
        .par_iter()
        .map(|ex| {
            let prog = policy.greedy_program(&ex.pair, lex)?;
            Ok(crate::relation::group(final_state(&ex.pair, &prog)?) == ex.target.label())
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(hits.iter().filter(|h| **h).count() as f64 / data.len() as f64)
}

/// Minibatch SGD on the hybrid objective. `on_epoch` sees each epoch's
/// metrics as soon as they are computed.
pub fn train<S: Scalar, P: Policy<S> + Sync>(
    policy: &mut P,
    data: &[TrainExample],
    lex: &Lexicon,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<Vec<EpochMetrics>> {
    cfg.validate()?;
    let episodes = if cfg.relation_augmentation {
        relation_augmentation(data, |p| mutual_entailment(p, lex))
    } else {
        data.to_vec()
    };
    let lr = S::of(cfg.learning_rate);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..episodes.len()).collect();
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        shuffle_rng.set_stream(u64::MAX - epoch as u64);
        order.shuffle(&mut shuffle_rng);

        let mut stats = RevisionStats::default();
        let (mut reward_sum, mut objective_sum, mut sampled_correct) = (0.0, 0.0, 0);
        for batch in order.chunks(cfg.batch_size) {
            let snapshot: &P = policy;
            let results = batch
                .par_iter()
                .map(|&i| {
                    let mut rng = episode_rng(cfg.seed, epoch, i);
                    run_episode(snapshot, &episodes[i], lex, cfg, &mut rng)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut grad = policy.zero_grad();
            for (r, &i) in results.iter().zip(batch) {
                if !r.objective.is_finite() {
                    return Err(Error::NonFinite(format!("objective at epoch {epoch}, example {i}")));
                }
                policy.add_grads(&mut grad, &r.grad);
                objective_sum += r.objective.as_f64();
                reward_sum += r.mean_reward.as_f64();
                sampled_correct += r.correct as usize;
                stats.record(r.revision.as_ref());
            }
            policy.scale_grad(&mut grad, S::one() / S::of(batch.len() as f64));
            policy.descend(&grad, lr)?;
        }
        let n = episodes.len().max(1) as f64;
        let metrics = EpochMetrics {
            epoch: epoch + 1,
            episodes: episodes.len(),
            train_accuracy: greedy_accuracy(policy, data, lex)?,
            mean_reward: reward_sum / n,
            mean_objective: objective_sum / n,
            sampled_correct,
            revisions: stats,
        };
        on_epoch(&metrics);
        history.push(metrics);
    }
    Ok(history)
}
