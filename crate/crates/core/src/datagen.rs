//! Synthetic monotonicity datasets with gold programs, states and rationales.
//!
//! Sentences follow `[prefix] quantifier subject predicate`. A replacement
//! swaps one slot between premise and hypothesis; gold labels come from
//! executing the gold program, never from hand annotation.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chunker::{ChunkRules, Sentence};
use crate::error::{Error, Result};
use crate::executor::{execute, ChunkedPair, Program};
use crate::metrics::{rationale_phrases, TokenSet};
use crate::relation::{ActionRelation, NliLabel, Relation, Target};
use crate::trainer::TrainExample;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Subject,
    Predicate,
}

/// `narrow` relates to `broad` by `relation` (⊏ or alternation).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Replacement {
    pub narrow: String,
    pub broad: String,
    pub relation: ActionRelation,
    pub slot: Slot,
}

impl Replacement {
    pub fn new(narrow: &str, broad: &str, relation: ActionRelation, slot: Slot) -> Self {
        Replacement { narrow: narrow.into(), broad: broad.into(), relation, slot }
    }

    /// `narrow>broad` for entailments, `narrow|broad` for alternations.
    pub fn name(&self) -> String {
        let sep = if self.relation == ActionRelation::NegAlt { "|" } else { ">" };
        format!("{}{sep}{}", self.narrow, self.broad)
    }

    /// Premise phrase, hypothesis phrase and local relation for one direction.
    fn oriented(&self, forward: bool) -> (&str, &str, ActionRelation) {
        match (self.relation, forward) {
            (ActionRelation::ForwardEntailment, true) => (&self.narrow, &self.broad, ActionRelation::ForwardEntailment),
            (ActionRelation::ForwardEntailment, false) => (&self.broad, &self.narrow, ActionRelation::ReverseEntailment),
            (r, true) => (&self.narrow, &self.broad, r),
            (r, false) => (&self.broad, &self.narrow, r),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenSpec {
    pub seed: u64,
    pub train_size: usize,
    pub test_size: usize,
    /// Extra test examples carrying a noise prefix, tagged `test_noise`.
    pub noise_test_size: usize,
    pub two_hop_size: usize,
    pub quantifiers: Vec<String>,
    pub replacements: Vec<Replacement>,
    /// Quantifiers seen with every replacement in training.
    pub pivot_quantifiers: Vec<String>,
    /// Replacements (by [`Replacement::name`]) seen with every quantifier in
    /// training.
    pub pivot_replacements: Vec<String>,
    /// Subject fillers used when the predicate is replaced.
    pub subjects: Vec<String>,
    /// Predicate fillers used when the subject is replaced.
    pub predicates: Vec<String>,
    pub noise_prefixes: Vec<String>,
    pub two_hop_quantifiers: Vec<String>,
}

impl Default for GenSpec {
    fn default() -> Self {
        use ActionRelation::{ForwardEntailment as F, NegAlt as N};
        use Slot::{Predicate as P, Subject as S};
        let strs = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        GenSpec {
            seed: 13,
            train_size: 1200,
            test_size: 1200,
            noise_test_size: 200,
            two_hop_size: 200,
            quantifiers: strs(&["some", "several", "all", "no", "not all"]),
            replacements: vec![
                Replacement::new("dogs", "animals", F, S),
                Replacement::new("puppies", "dogs", F, S),
                Replacement::new("small dogs", "dogs", F, S),
                Replacement::new("cats", "animals", F, S),
                Replacement::new("kittens", "cats", F, S),
                Replacement::new("sparrows", "birds", F, S),
                Replacement::new("dogs", "cats", N, S),
                Replacement::new("sprint", "run", F, P),
                Replacement::new("run", "move", F, P),
                Replacement::new("run quickly", "run", F, P),
                Replacement::new("walk", "move", F, P),
                Replacement::new("dance", "move", F, P),
                Replacement::new("run", "sleep", N, P),
                Replacement::new("sit", "stand", N, P),
            ],
            pivot_quantifiers: strs(&["some"]),
            pivot_replacements: strs(&["dogs>animals"]),
            subjects: strs(&["dogs", "cats", "birds", "small dogs", "big cats", "young birds", "animals", "puppies"]),
            predicates: strs(&["run", "sleep", "sing", "swim", "jump quickly", "walk slowly", "dance happily", "move"]),
            noise_prefixes: strs(&["near the shore", "in the park", "today", "by the river"]),
            two_hop_quantifiers: strs(&["the"]),
        }
    }
}

impl GenSpec {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    fn replacement_index(&self, name: &str) -> Result<usize> {
        self.replacements
            .iter()
            .position(|r| r.name() == name)
            .ok_or_else(|| Error::Generation(format!("pivot replacement `{name}` is not in the replacement list")))
    }

    /// `(quantifier, replacement)` index pairs of the train and test grids.
    pub fn split_combinations(&self) -> Result<(Vec<Combination>, Vec<Combination>)> {
        if self.quantifiers.is_empty() || self.replacements.is_empty() {
            return Err(Error::Generation("need at least one quantifier and one replacement".into()));
        }
        let pq: BTreeSet<usize> = self
            .pivot_quantifiers
            .iter()
            .map(|q| {
                self.quantifiers
                    .iter()
                    .position(|x| x == q)
                    .ok_or_else(|| Error::Generation(format!("pivot quantifier `{q}` is not in the quantifier list")))
            })
            .collect::<Result<_>>()?;
        let pr: BTreeSet<usize> =
            self.pivot_replacements.iter().map(|r| self.replacement_index(r)).collect::<Result<_>>()?;
        if pq.is_empty() || pq.len() == self.quantifiers.len() {
            return Err(Error::Generation("pivot quantifiers must be a non-empty proper subset".into()));
        }
        if pr.is_empty() || pr.len() == self.replacements.len() {
            return Err(Error::Generation("pivot replacements must be a non-empty proper subset".into()));
        }
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for q in 0..self.quantifiers.len() {
            for r in 0..self.replacements.len() {
                if pq.contains(&q) || pr.contains(&r) {
                    train.push((q, r));
                } else {
                    test.push((q, r));
                }
            }
        }
        Ok((train, test))
    }
}

/// `(quantifier index, replacement index)`.
pub type Combination = (usize, usize);

/// One generated pair with its gold annotations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub premise: String,
    pub hypothesis: String,
    pub label: NliLabel,
    pub gold_program: Program,
    /// `z_1..z_m`
    pub gold_states: Vec<Relation>,
    pub gold_rationale_tokens: Vec<usize>,
    pub gold_rationale_phrases: Vec<TokenSet>,
    pub split_tag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantifier: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub replacements: Vec<String>,
}

impl LabeledExample {
    pub fn chunked(&self, rules: &ChunkRules) -> Result<ChunkedPair> {
        ChunkedPair::parse(&self.premise, &self.hypothesis, rules)
    }

    pub fn to_train_example(&self, rules: &ChunkRules) -> Result<TrainExample> {
        Ok(TrainExample { pair: self.chunked(rules)?, target: Target::Label(self.label) })
    }
}

/// Labels a pair whose chunkings line up one-to-one. Chunks that differ get
/// the relations in `changes`, left to right; identical chunks get ≡.
pub fn label_pair(
    premise: &str,
    hypothesis: &str,
    changes: &[ActionRelation],
    rules: &ChunkRules,
    split_tag: &str,
) -> Result<LabeledExample> {
    let (p, h) = (Sentence::parse(premise)?, Sentence::parse(hypothesis)?);
    for tok in p.tokens().iter().chain(h.tokens()) {
        if !rules.knows(tok) {
            return Err(Error::Vocabulary(tok.clone()));
        }
    }
    let pair = ChunkedPair::from_sentences(&p, &h, rules);
    if pair.premise.len() != pair.hypothesis.len() {
        return Err(Error::Generation(format!("`{premise}` and `{hypothesis}` chunk differently")));
    }
    let mut pending = changes.iter();
    let mut program = Vec::with_capacity(pair.m());
    for (pc, hc) in pair.premise.iter().zip(&pair.hypothesis) {
        if pc.tokens == hc.tokens {
            program.push(ActionRelation::Equivalence);
        } else {
            let r = pending.next().ok_or_else(|| {
                Error::Generation(format!("`{premise}` / `{hypothesis}` differ in more chunks than given relations"))
            })?;
            program.push(*r);
        }
    }
    if pending.next().is_some() {
        return Err(Error::Generation(format!("`{premise}` / `{hypothesis}` differ in fewer chunks than given relations")));
    }
    let gold_program = Program::new(program);
    let trace = execute(&pair, &gold_program)?;
    let phrases = rationale_phrases(&pair, &trace);
    Ok(LabeledExample {
        premise: p.text(),
        hypothesis: h.text(),
        label: trace.label,
        gold_states: trace.step_states().to_vec(),
        gold_rationale_tokens: phrases.iter().flatten().copied().collect(),
        gold_rationale_phrases: phrases,
        gold_program,
        split_tag: split_tag.into(),
        quantifier: None,
        replacements: Vec::new(),
    })
}

fn sentence(prefix: Option<&str>, quantifier: &str, subject: &str, predicate: &str) -> String {
    let mut parts: Vec<&str> = Vec::with_capacity(4);
    parts.extend(prefix);
    parts.extend([quantifier, subject, predicate]);
    parts.join(" ")
}

fn pick<'a, R: Rng>(rng: &mut R, xs: &'a [String], what: &str) -> Result<&'a str> {
    xs.choose(rng).map(String::as_str).ok_or_else(|| Error::Generation(format!("no {what} to choose from")))
}

/// One example for a quantifier and a single replacement.
fn single_example<R: Rng>(
    spec: &GenSpec,
    rules: &ChunkRules,
    q: usize,
    r: usize,
    prefix: Option<&str>,
    tag: &str,
    rng: &mut R,
) -> Result<LabeledExample> {
    let rep = &spec.replacements[r];
    let (p_phrase, h_phrase, local) = rep.oriented(rng.gen_bool(0.5));
    let quant = &spec.quantifiers[q];
    let (premise, hypothesis) = match rep.slot {
        Slot::Subject => {
            let pred = pick(rng, &spec.predicates, "predicates")?;
            (sentence(prefix, quant, p_phrase, pred), sentence(prefix, quant, h_phrase, pred))
        }
        Slot::Predicate => {
            let subj = pick(rng, &spec.subjects, "subjects")?;
            (sentence(prefix, quant, subj, p_phrase), sentence(prefix, quant, subj, h_phrase))
        }
    };
    let mut ex = label_pair(&premise, &hypothesis, &[local], rules, tag)?;
    ex.quantifier = Some(quant.clone());
    ex.replacements = vec![rep.name()];
    Ok(ex)
}

/// Train/test/noised-test sets over the compositional grid, plus the 2-hop
/// set when `two_hop_size > 0`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GeneratedData {
    pub train: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
    pub test_noise: Vec<LabeledExample>,
    pub two_hop: Vec<LabeledExample>,
}

/// Cycles through the grid combinations in a seeded random order so every
/// combination is represented about equally.
fn fill<R: Rng>(
    spec: &GenSpec,
    rules: &ChunkRules,
    combos: &[(usize, usize)],
    n: usize,
    noise: bool,
    tag: &str,
    rng: &mut R,
) -> Result<Vec<LabeledExample>> {
    let mut order = combos.to_vec();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if i % order.len() == 0 {
            order.shuffle(rng);
        }
        let (q, r) = order[i % order.len()];
        let prefix = if noise { Some(pick(rng, &spec.noise_prefixes, "noise prefixes")?) } else { None };
        out.push(single_example(spec, rules, q, r, prefix, tag, rng)?);
    }
    Ok(out)
}

pub fn generate(spec: &GenSpec, rules: &ChunkRules) -> Result<GeneratedData> {
    let (train_combos, test_combos) = spec.split_combinations()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let train = fill(spec, rules, &train_combos, spec.train_size, false, "train", &mut rng)?;
    let test = fill(spec, rules, &test_combos, spec.test_size, false, "test", &mut rng)?;
    let test_noise = fill(spec, rules, &test_combos, spec.noise_test_size, true, "test_noise", &mut rng)?;
    let two_hop = if spec.two_hop_size > 0 { generate_2hop(spec, rules)? } else { Vec::new() };
    Ok(GeneratedData { train, test, test_noise, two_hop })
}

/// Pairs that replace both the subject and the predicate, under the
/// `two_hop_quantifiers`.
pub fn generate_2hop(spec: &GenSpec, rules: &ChunkRules) -> Result<Vec<LabeledExample>> {
    let subj: Vec<&Replacement> = spec.replacements.iter().filter(|r| r.slot == Slot::Subject).collect();
    let pred: Vec<&Replacement> = spec.replacements.iter().filter(|r| r.slot == Slot::Predicate).collect();
    if subj.is_empty() || pred.is_empty() {
        return Err(Error::Generation("2-hop pairs need a subject and a predicate replacement".into()));
    }
    if spec.two_hop_quantifiers.is_empty() {
        return Err(Error::Generation("no 2-hop quantifiers".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x2_4f9);
    (0..spec.two_hop_size)
        .map(|_| {
            let quant = pick(&mut rng, &spec.two_hop_quantifiers, "2-hop quantifiers")?;
            let s = subj.choose(&mut rng).expect("non-empty");
            let p = pred.choose(&mut rng).expect("non-empty");
            let (ps, hs, r1) = s.oriented(rng.gen_bool(0.5));
            let (pp, hp, r2) = p.oriented(rng.gen_bool(0.5));
            let mut ex = label_pair(
                &sentence(None, quant, ps, pp),
                &sentence(None, quant, hs, hp),
                &[r1, r2],
                rules,
                "2hop",
            )?;
            ex.quantifier = Some(quant.to_string());
            ex.replacements = vec![s.name(), p.name()];
            Ok(ex)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::executor::final_state;
    use ActionRelation as A;
    use Relation::*;

    fn rules() -> ChunkRules {
        ChunkRules::fragment()
    }

    #[test]
    fn some_hypernym_entails() {
        let ex = label_pair("some dogs run", "some animals run", &[A::ForwardEntailment], &rules(), "t").unwrap();
        assert_eq!(ex.label, NliLabel::Entailment);
        assert_eq!(ex.gold_program.relations(), &[A::ForwardEntailment, A::Equivalence]);
        assert_eq!(ex.gold_states, vec![ForwardEntailment, ForwardEntailment]);
        assert_eq!(ex.gold_rationale_tokens, vec![0, 1]);
    }

    #[test]
    fn no_flips_direction() {
        let ex = label_pair("no animals run", "no dogs run", &[A::ReverseEntailment], &rules(), "t").unwrap();
        assert_eq!(ex.label, NliLabel::Entailment);
        assert_eq!(ex.gold_states, vec![ForwardEntailment, ForwardEntailment]);
    }

    #[test]
    fn identical_pair() {
        let ex = label_pair("all dogs run", "all dogs run", &[], &rules(), "t").unwrap();
        assert_eq!(ex.label, NliLabel::Entailment);
        assert_eq!(ex.gold_program, Program::uniform(A::Equivalence, 2));
        assert!(ex.gold_rationale_tokens.is_empty());
    }

    #[test]
    fn vocabulary_and_shape_errors() {
        assert!(matches!(
            label_pair("some dogs run", "some wombats run", &[A::ForwardEntailment], &rules(), "t"),
            Err(Error::Vocabulary(w)) if w == "wombats"
        ));
        assert!(label_pair("some dogs run", "some animals run", &[], &rules(), "t").is_err());
        assert!(label_pair("some dogs run", "some dogs run", &[A::NegAlt], &rules(), "t").is_err());
    }

    #[test]
    fn split_is_disjoint_and_complete() {
        let spec = GenSpec::default();
        let (train, test) = spec.split_combinations().unwrap();
        let q = spec.quantifiers.len();
        let r = spec.replacements.len();
        assert_eq!(train.len(), q + r - 1);
        assert_eq!(test.len(), (q - 1) * (r - 1));
        let tr: BTreeSet<_> = train.iter().collect();
        assert!(test.iter().all(|c| !tr.contains(c)));
    }

    #[test]
    fn bad_pivots() {
        let mut spec = GenSpec { pivot_quantifiers: vec![], ..GenSpec::default() };
        assert!(spec.split_combinations().is_err());
        spec.pivot_quantifiers = spec.quantifiers.clone();
        assert!(spec.split_combinations().is_err());
        spec.pivot_quantifiers = vec!["few".into()];
        assert!(spec.split_combinations().is_err());
    }

    #[test]
    fn generated_data_is_self_consistent_and_reproducible() {
        let spec = GenSpec { train_size: 150, test_size: 150, noise_test_size: 40, two_hop_size: 40, ..GenSpec::default() };
        let a = generate(&spec, &rules()).unwrap();
        let b = generate(&spec, &rules()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let (train_c, _) = spec.split_combinations().unwrap();
        let train_names: BTreeSet<(String, String)> = train_c
            .iter()
            .map(|(q, r)| (spec.quantifiers[*q].clone(), spec.replacements[*r].name()))
            .collect();
        for ex in a.train.iter().chain(&a.test).chain(&a.test_noise).chain(&a.two_hop) {
            let pair = ex.chunked(&rules()).unwrap();
            let trace = execute(&pair, &ex.gold_program).unwrap();
            assert_eq!(trace.label, ex.label);
            assert_eq!(trace.step_states(), ex.gold_states.as_slice());
        }
        for ex in &a.test {
            let key = (ex.quantifier.clone().unwrap(), ex.replacements[0].clone());
            assert!(!train_names.contains(&key), "{key:?} leaked into test");
        }
        for ex in &a.two_hop {
            let non_eq = ex.gold_program.relations().iter().filter(|r| **r != A::Equivalence).count();
            assert_eq!(non_eq, 2);
        }
        assert!(a.test_noise.iter().all(|e| e.gold_program.len() > 2));
        let labels: BTreeSet<NliLabel> = a.test.iter().map(|e| e.label).collect();
        assert_eq!(labels.len(), 3);
    }

    #[test]
    fn two_hop_compositions() {
        let ex = label_pair("the puppies sprint", "the dogs run", &[A::ForwardEntailment, A::ForwardEntailment], &rules(), "2hop").unwrap();
        assert_eq!(ex.gold_states, vec![ForwardEntailment, ForwardEntailment]);
        let ex = label_pair("the puppies run", "the dogs sleep", &[A::ForwardEntailment, A::NegAlt], &rules(), "2hop").unwrap();
        assert_eq!(ex.gold_states, vec![ForwardEntailment, Alternation]);
        assert_eq!(ex.label, NliLabel::Contradiction);
        let none = GenSpec { replacements: vec![], two_hop_size: 5, ..GenSpec::default() };
        assert!(generate_2hop(&none, &rules()).is_err());
        let pair = ex.chunked(&rules()).unwrap();
        assert_eq!(final_state(&pair, &ex.gold_program).unwrap(), Alternation);
    }

    #[test]
    fn spec_toml_round_trip() {
        let spec = GenSpec::default();
        assert_eq!(GenSpec::parse(&spec.to_toml()).unwrap(), spec);
        let partial = GenSpec::parse("seed = 3\ntrain_size = 10").unwrap();
        assert_eq!(partial.seed, 3);
        assert_eq!(partial.quantifiers, GenSpec::default().quantifiers);
    }
}
