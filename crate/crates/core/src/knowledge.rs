//! Embedded lexical knowledge and the relation proposals derived from it.
//!
//! The lexicon is a plain edge list:
//!
//! ```text
//! # comment
//! syn kid child
//! hyper animals dogs      # animals is a hypernym of dogs, so dogs ⊏ animals
//! ant ocean fountain
//! ```

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chunker::Chunk;
use crate::error::{Error, Result};
use crate::executor::ChunkedPair;
use crate::policy::StepDistribution;
use crate::relation::ActionRelation;
use crate::scalar::Scalar;

const DEFAULT_LEXICON: &str = include_str!("../data/lexicon.txt");

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Lexicon {
    /// token → synonym-class representative (smallest member)
    canon: BTreeMap<String, String>,
    /// canonical token → all canonical hypernyms, transitively
    ancestors: BTreeMap<String, BTreeSet<String>>,
    /// canonical antonym pairs, stored in both orders
    antonyms: BTreeSet<(String, String)>,
    edges: usize,
}

impl Lexicon {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The lexicon shipped with the crate.
    pub fn fragment() -> Self {
        static CELL: std::sync::OnceLock<Lexicon> = std::sync::OnceLock::new();
        CELL.get_or_init(|| Self::parse(DEFAULT_LEXICON).expect("bundled lexicon is valid")).clone()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut syn = Vec::new();
        let mut hyper = Vec::new();
        let mut ant = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [kind, a, b] = fields[..] else {
                return Err(Error::Lexicon(format!("line {}: expected `kind word word`", lineno + 1)));
            };
            let pair = (a.to_lowercase(), b.to_lowercase());
            match kind {
                "syn" => syn.push(pair),
                "hyper" => hyper.push(pair),
                "ant" => ant.push(pair),
                other => {
                    return Err(Error::Lexicon(format!("line {}: unknown edge kind `{other}`", lineno + 1)))
                }
            }
        }
        Self::from_edges(&syn, &hyper, &ant)
    }

    /// `hyper` pairs are `(parent, child)`.
    pub fn from_edges(
        syn: &[(String, String)],
        hyper: &[(String, String)],
        ant: &[(String, String)],
    ) -> Result<Self> {
        let mut classes: Vec<BTreeSet<String>> = Vec::new();
        for (a, b) in syn {
            let ia = classes.iter().position(|c| c.contains(a));
            let ib = classes.iter().position(|c| c.contains(b));
            match (ia, ib) {
                (Some(i), Some(j)) if i == j => {}
                (Some(i), Some(j)) => {
                    let moved = classes.remove(i.max(j));
                    classes[i.min(j)].extend(moved);
                }
                (Some(i), None) => {
                    classes[i].insert(b.clone());
                }
                (None, Some(j)) => {
                    classes[j].insert(a.clone());
                }
                (None, None) => classes.push([a.clone(), b.clone()].into()),
            }
        }
        let mut canon = BTreeMap::new();
        for class in &classes {
            let rep = class.iter().next().expect("non-empty class").clone();
            for w in class {
                canon.insert(w.clone(), rep.clone());
            }
        }
        let lookup = |w: &String| canon.get(w).cloned().unwrap_or_else(|| w.clone());

        let mut parents: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (p, c) in hyper {
            let (p, c) = (lookup(p), lookup(c));
            if p == c {
                return Err(Error::Lexicon(format!("`{}` is its own hypernym", p)));
            }
            parents.entry(c).or_default().insert(p);
        }
        let mut ancestors = BTreeMap::new();
        for child in parents.keys() {
            let mut seen = BTreeSet::new();
            let mut stack: Vec<&String> = parents[child].iter().collect();
            while let Some(p) = stack.pop() {
                if p == child {
                    return Err(Error::Lexicon(format!("hypernym cycle through `{child}`")));
                }
                if seen.insert(p.clone()) {
                    if let Some(pp) = parents.get(p) {
                        stack.extend(pp.iter());
                    }
                }
            }
            ancestors.insert(child.clone(), seen);
        }

        let mut antonyms = BTreeSet::new();
        for (a, b) in ant {
            let (a, b) = (lookup(a), lookup(b));
            if a == b {
                return Err(Error::Lexicon(format!("`{a}` is both a synonym and an antonym")));
            }
            antonyms.insert((a.clone(), b.clone()));
            antonyms.insert((b, a));
        }
        Ok(Lexicon { canon, ancestors, antonyms, edges: syn.len() + hyper.len() + ant.len() })
    }

    pub fn is_empty(&self) -> bool {
        self.edges == 0
    }

    pub fn canonical<'a>(&'a self, tok: &'a str) -> &'a str {
        self.canon.get(tok).map(String::as_str).unwrap_or(tok)
    }

    /// Equal after synonym closure.
    pub fn same(&self, u: &str, v: &str) -> bool {
        self.canonical(u) == self.canonical(v)
    }

    pub fn is_synonym(&self, u: &str, v: &str) -> bool {
        u != v && self.same(u, v)
    }

    /// `u` is a (transitive) hypernym of `v`, i.e. `v ⊏ u`.
    pub fn is_hypernym(&self, u: &str, v: &str) -> bool {
        self.ancestors
            .get(self.canonical(v))
            .is_some_and(|a| a.contains(self.canonical(u)))
    }

    pub fn are_antonyms(&self, u: &str, v: &str) -> bool {
        self.antonyms
            .contains(&(self.canonical(u).to_string(), self.canonical(v).to_string()))
    }

    pub fn related(&self, u: &str, v: &str) -> bool {
        self.same(u, v) || self.is_hypernym(u, v) || self.is_hypernym(v, u) || self.are_antonyms(u, v)
    }

    fn canonical_seq(&self, tokens: &[String]) -> Vec<String> {
        tokens.iter().map(|t| self.canonical(t).to_string()).collect()
    }

    /// `s ⊂ s̃`: `s` is a proper (not necessarily contiguous) sub-phrase of
    /// `s̃`, comparing tokens after synonym closure.
    pub fn is_sub_phrase(&self, s: &[String], s_tilde: &[String]) -> bool {
        let (a, b) = (self.canonical_seq(s), self.canonical_seq(s_tilde));
        a.len() < b.len() && is_subsequence(&a, &b)
    }

    pub fn phrases_equal(&self, s: &[String], s_tilde: &[String]) -> bool {
        self.canonical_seq(s) == self.canonical_seq(s_tilde)
    }

    /// Number of tokens in `s` that are related to some token of `s_tilde`.
    pub fn overlap(&self, s: &[String], s_tilde: &[String]) -> usize {
        s.iter().filter(|u| s_tilde.iter().any(|v| self.related(u, v))).count()
    }
}

fn is_subsequence(a: &[String], b: &[String]) -> bool {
    let mut it = b.iter();
    a.iter().all(|x| it.any(|y| y == x))
}

/// The premise chunk sharing the most related tokens with `hyp`; ties go to
/// the leftmost chunk and zero overlap gives `None`.
pub fn align<'a>(hyp: &Chunk, premise: &'a [Chunk], lex: &Lexicon) -> Option<&'a Chunk> {
    let mut best: Option<(&Chunk, usize)> = None;
    for c in premise {
        let score = lex.overlap(&hyp.tokens, &c.tokens);
        if score > 0 && best.is_none_or(|(_, s)| score > s) {
            best = Some((c, score));
        }
    }
    best.map(|(c, _)| c)
}

/// Which knowledge rule licensed a proposal, or `GridSearch` for label-driven
/// single-edit candidates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalRule {
    /// `s = s̃` → ≡
    SamePhrase,
    /// `s ⊂ s̃` → ≡ and ⊏
    SubPhrase,
    /// `s̃ ⊂ s` → ⊐
    SuperPhrase,
    /// a hypothesis token is a hypernym of a premise token → ⊏
    HypernymInHypothesis,
    /// a premise token is a hypernym of a hypothesis token → ⊐
    HypernymInPremise,
    /// an antonym pair → alternation
    Antonym,
    GridSearch,
}

/// A knowledge-suggested relation `relation` at hypothesis step `t` (1-based),
/// carrying the policy's probability for it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proposal<S> {
    pub t: usize,
    pub relation: ActionRelation,
    pub prob: S,
    pub rule: ProposalRule,
}

impl<S: Scalar> Proposal<S> {
    /// Max-heap order: larger probability first, then smaller `t`, then the
    /// fixed relation order.
    fn priority_cmp(&self, other: &Self) -> Ordering {
        self.prob
            .partial_cmp(&other.prob)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.t.cmp(&self.t))
            .then_with(|| other.relation.cmp(&self.relation))
    }
}

impl<S: fmt::Display> fmt::Display for Proposal<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.t, self.relation, self.prob)
    }
}

/// Rule application for one aligned chunk pair. Returns zero or more
/// proposals; the equivalence and forward-entailment rules overlap on
/// sub-phrases and both fire.
pub fn propose<S: Scalar>(
    t: usize,
    s: &Chunk,
    s_tilde: &Chunk,
    lex: &Lexicon,
    probs: &StepDistribution<S>,
) -> Vec<Proposal<S>> {
    let (hs, ps) = (&s.tokens, &s_tilde.tokens);
    let any_pair = |f: &dyn Fn(&str, &str) -> bool| hs.iter().any(|u| ps.iter().any(|v| f(u, v)));
    let mut found: Vec<(ActionRelation, ProposalRule)> = Vec::new();

    let sub = lex.is_sub_phrase(hs, ps);
    if lex.phrases_equal(hs, ps) {
        found.push((ActionRelation::Equivalence, ProposalRule::SamePhrase));
    } else if sub {
        found.push((ActionRelation::Equivalence, ProposalRule::SubPhrase));
    }
    if sub {
        found.push((ActionRelation::ForwardEntailment, ProposalRule::SubPhrase));
    } else if any_pair(&|u, v| lex.is_hypernym(u, v)) {
        found.push((ActionRelation::ForwardEntailment, ProposalRule::HypernymInHypothesis));
    }
    if lex.is_sub_phrase(ps, hs) {
        found.push((ActionRelation::ReverseEntailment, ProposalRule::SuperPhrase));
    } else if any_pair(&|u, v| lex.is_hypernym(v, u)) {
        found.push((ActionRelation::ReverseEntailment, ProposalRule::HypernymInPremise));
    }
    if any_pair(&|u, v| lex.are_antonyms(u, v)) {
        found.push((ActionRelation::NegAlt, ProposalRule::Antonym));
    }

    found
        .into_iter()
        .map(|(relation, rule)| Proposal { t, relation, prob: probs.prob(relation), rule })
        .collect()
}

/// Priority queue of proposals (Φ).
#[derive(Clone, Debug, Default)]
pub struct ProposalQueue<S> {
    heap: BinaryHeap<Ranked<S>>,
}

#[derive(Clone, Debug)]
struct Ranked<S>(Proposal<S>);

impl<S: Scalar> PartialEq for Ranked<S> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<S: Scalar> Eq for Ranked<S> {}
impl<S: Scalar> PartialOrd for Ranked<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<S: Scalar> Ord for Ranked<S> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.priority_cmp(&other.0)
    }
}

impl<S: Scalar> ProposalQueue<S> {
    pub fn new() -> Self {
        ProposalQueue { heap: BinaryHeap::new() }
    }

    pub fn push(&mut self, p: Proposal<S>) {
        self.heap.push(Ranked(p));
    }

    /// Removes and returns the highest-priority proposal.
    pub fn pop(&mut self) -> Option<Proposal<S>> {
        self.heap.pop().map(|r| r.0)
    }

    pub fn peek(&self) -> Option<&Proposal<S>> {
        self.heap.peek().map(|r| &r.0)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Whether some queued proposal suggests `relation` at step `t`.
    pub fn contains(&self, t: usize, relation: ActionRelation) -> bool {
        self.heap.iter().any(|r| r.0.t == t && r.0.relation == relation)
    }

    /// All proposals in pop order, without consuming the queue.
    pub fn sorted(&self) -> Vec<Proposal<S>> {
        let mut v: Vec<Ranked<S>> = self.heap.iter().cloned().collect();
        v.sort_by(|a, b| b.cmp(a));
        v.into_iter().map(|r| r.0).collect()
    }
}

impl<S: Scalar> FromIterator<Proposal<S>> for ProposalQueue<S> {
    fn from_iter<I: IntoIterator<Item = Proposal<S>>>(iter: I) -> Self {
        ProposalQueue { heap: iter.into_iter().map(Ranked).collect() }
    }
}

/// Proposals for every hypothesis chunk that aligns to some premise chunk.
/// `probs[t - 1]` is the policy distribution at step `t`.
pub fn build_queue<S: Scalar>(
    pair: &ChunkedPair,
    lex: &Lexicon,
    probs: &[StepDistribution<S>],
) -> ProposalQueue<S> {
    debug_assert_eq!(probs.len(), pair.m());
    pair.hypothesis
        .iter()
        .zip(probs)
        .enumerate()
        .filter_map(|(i, (s, p))| align(s, &pair.premise, lex).map(|s_tilde| propose(i + 1, s, s_tilde, lex, p)))
        .flatten()
        .collect()
}
