//! Left-to-right execution of relation programs over chunked sentence pairs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::chunker::{chunk_and_mark, Chunk, ChunkRules, Sentence};
use crate::error::{Error, Result};
use crate::relation::{group, ActionRelation, NliLabel, Relation, RelationSet, Target};

/// Default upper bound on `m` for exhaustive program enumeration (5^8 programs).
pub const DEFAULT_ENUMERATION_CAP: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChunkedPair {
    pub premise: Vec<Chunk>,
    pub hypothesis: Vec<Chunk>,
}

impl ChunkedPair {
    pub fn new(premise: Vec<Chunk>, hypothesis: Vec<Chunk>) -> Result<Self> {
        if hypothesis.is_empty() {
            return Err(Error::EmptySentence);
        }
        Ok(ChunkedPair { premise, hypothesis })
    }

    /// Chunks and marks both sentences with the fragment rules.
    pub fn from_sentences(premise: &Sentence, hypothesis: &Sentence, rules: &ChunkRules) -> Self {
        ChunkedPair {
            premise: chunk_and_mark(premise, rules),
            hypothesis: chunk_and_mark(hypothesis, rules),
        }
    }

    pub fn parse(premise: &str, hypothesis: &str, rules: &ChunkRules) -> Result<Self> {
        Ok(Self::from_sentences(&Sentence::parse(premise)?, &Sentence::parse(hypothesis)?, rules))
    }

    /// Number of hypothesis chunks, i.e. program length.
    pub fn m(&self) -> usize {
        self.hypothesis.len()
    }

    /// Hypothesis chunk `t` (1-based).
    pub fn chunk(&self, t: usize) -> &Chunk {
        &self.hypothesis[t - 1]
    }

    /// Per-step sets of relations a single action can project to.
    pub fn projected_action_sets(&self) -> Vec<RelationSet> {
        self.hypothesis
            .iter()
            .map(|c| ActionRelation::ALL.iter().map(|a| c.context.project(a.to_relation())).collect())
            .collect()
    }
}

/// One action per hypothesis chunk.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Program(Vec<ActionRelation>);

impl Program {
    pub fn new(relations: Vec<ActionRelation>) -> Self {
        Program(relations)
    }

    pub fn uniform(r: ActionRelation, m: usize) -> Self {
        Program(vec![r; m])
    }

    pub fn relations(&self) -> &[ActionRelation] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Relation at step `t` (1-based).
    pub fn at(&self, t: usize) -> ActionRelation {
        self.0[t - 1]
    }

    /// Copy with step `t` (1-based) replaced by `r`.
    pub fn fix(&self, t: usize, r: ActionRelation) -> Result<Program> {
        if t == 0 || t > self.0.len() {
            return Err(Error::StepOutOfRange { t, m: self.0.len() });
        }
        let mut out = self.clone();
        out.0[t - 1] = r;
        Ok(out)
    }

    pub fn into_inner(self) -> Vec<ActionRelation> {
        self.0
    }
}

impl From<Vec<ActionRelation>> for Program {
    fn from(v: Vec<ActionRelation>) -> Self {
        Program(v)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, r) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{r}")?;
        }
        f.write_str("]")
    }
}

/// Result of executing a program: projected relations, states `z_0..z_m`,
/// label and 1-based rationale steps.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub projected: Vec<Relation>,
    pub states: Vec<Relation>,
    pub label: NliLabel,
    pub rationales: Vec<usize>,
}

impl Trace {
    pub fn final_state(&self) -> Relation {
        *self.states.last().expect("states always holds z_0")
    }

    pub fn m(&self) -> usize {
        self.projected.len()
    }

    /// `z_1..z_m`, without the initial state.
    pub fn step_states(&self) -> &[Relation] {
        &self.states[1..]
    }
}

/// Runs `prog` over the hypothesis chunks of `pair`, starting from `z_0 = ≡`.
pub fn execute(pair: &ChunkedPair, prog: &Program) -> Result<Trace> {
    check_length(pair, prog)?;
    let projected: Vec<Relation> = pair
        .hypothesis
        .iter()
        .zip(prog.relations())
        .map(|(c, a)| c.context.project(a.to_relation()))
        .collect();
    let mut states = Vec::with_capacity(projected.len() + 1);
    states.push(Relation::Equivalence);
    for r in &projected {
        let prev = *states.last().unwrap();
        states.push(prev.join(*r));
    }
    let label = group(*states.last().unwrap());
    let rationales = rationale_steps(&states, label);
    Ok(Trace { projected, states, label, rationales })
}

/// Final state only; no allocation beyond the check.
pub fn final_state(pair: &ChunkedPair, prog: &Program) -> Result<Relation> {
    check_length(pair, prog)?;
    Ok(pair
        .hypothesis
        .iter()
        .zip(prog.relations())
        .fold(Relation::Equivalence, |z, (c, a)| z.join(c.context.project(a.to_relation()))))
}

fn check_length(pair: &ChunkedPair, prog: &Program) -> Result<()> {
    if prog.len() != pair.m() {
        return Err(Error::LengthMismatch { expected: pair.m(), got: prog.len() });
    }
    Ok(())
}

fn rationale_steps(states: &[Relation], label: NliLabel) -> Vec<usize> {
    (1..states.len())
        .filter(|&t| group(states[t]) == label && states[t] != states[t - 1])
        .collect()
}

/// Steps `t` whose state already points at the final label and differs from
/// the previous state.
pub fn extract_rationales(trace: &Trace) -> Vec<usize> {
    rationale_steps(&trace.states, trace.label)
}

/// Every program over the five actions whose execution meets `target`.
/// Programs are listed in lexicographic action order.
pub fn enumerate_programs(
    pair: &ChunkedPair,
    target: impl Into<Target>,
    cap: usize,
) -> Result<Vec<Program>> {
    let target = target.into();
    let m = pair.m();
    if m > cap {
        return Err(Error::CapExceeded { m, cap });
    }
    let steps: Vec<[Relation; ActionRelation::COUNT]> = pair
        .hypothesis
        .iter()
        .map(|c| ActionRelation::ALL.map(|a| c.context.project(a.to_relation())))
        .collect();
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(m);
    enumerate_rec(&steps, Relation::Equivalence, target, &mut current, &mut out);
    Ok(out)
}

fn enumerate_rec(
    steps: &[[Relation; ActionRelation::COUNT]],
    z: Relation,
    target: Target,
    current: &mut Vec<ActionRelation>,
    out: &mut Vec<Program>,
) {
    let t = current.len();
    if t == steps.len() {
        if target.is_met_by(z) {
            out.push(Program::new(current.clone()));
        }
        return;
    }
    for a in ActionRelation::ALL {
        current.push(a);
        enumerate_rec(steps, z.join(steps[t][a.index()]), target, current, out);
        current.pop();
    }
}
