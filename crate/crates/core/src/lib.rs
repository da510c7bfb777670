//! Natural-logic inference over chunked sentence pairs.
//!
//! A policy picks one local relation per hypothesis chunk; the executor
//! projects each through its chunk's monotonicity context and joins the
//! results left to right. The final state decides the label. Numeric code is
//! generic over [`Scalar`] (`f32` or `f64`); the `*F64`/`*F32` aliases below
//! fix the common choices.

pub mod chunker;
pub mod datagen;
pub mod error;
pub mod executor;
pub mod io;
pub mod knowledge;
pub mod metrics;
pub mod policy;
pub mod projection;
pub mod relation;
pub mod scalar;
pub mod trainer;

pub use chunker::{chunk, chunk_and_mark, mark_projectivity, Chunk, ChunkRules, Sentence};
pub use error::{Error, Result};
pub use executor::{execute, ChunkedPair, Program, Trace};
pub use knowledge::{Lexicon, Proposal, ProposalQueue};
pub use policy::{FeatureVector, LinearPolicy, Policy, PolicyParams, StepDistribution};
pub use projection::{Monotonicity, ProjectivityContext};
pub use relation::{ActionRelation, NliLabel, Relation, RelationSet, Target};
pub use scalar::Scalar;
pub use trainer::{TrainConfig, TrainExample};

pub type LinearPolicyF64 = LinearPolicy<f64>;
pub type LinearPolicyF32 = LinearPolicy<f32>;
pub type StepDistributionF64 = StepDistribution<f64>;
pub type StepDistributionF32 = StepDistribution<f32>;
pub type ProposalQueueF64 = ProposalQueue<f64>;
pub type ProposalQueueF32 = ProposalQueue<f32>;
pub type RewardConfigF64 = trainer::RewardConfig<f64>;
pub type RewardConfigF32 = trainer::RewardConfig<f32>;
pub type IrConfigF64 = trainer::IrConfig<f64>;
pub type IrConfigF32 = trainer::IrConfig<f32>;
