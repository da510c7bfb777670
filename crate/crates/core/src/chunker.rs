//! Deterministic chunking and projectivity marking for a small controlled
//! English fragment.
//!
//! A chunk is either a maximal noun phrase (an optional quantifier followed by
//! determiners, adjectives and nouns) or a maximal run of other tokens between
//! noun phrases. Each chunk's projectivity is that of its first token, using a
//! flat scope: a trigger governs every token after it up to the end of the
//! sentence.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projection::{Monotonicity, ProjectivityContext};

const DEFAULT_FRAGMENT: &str = include_str!("../data/fragment.toml");

/// A lower-cased, whitespace-free token sequence.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sentence {
    tokens: Vec<String>,
}

impl Sentence {
    /// Lower-cases, splits on whitespace, drops bare punctuation and splits the
    /// clitic `n't` off its host (`doesn't` → `does n't`).
    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = Vec::new();
        for raw in text.split_whitespace() {
            let word: String = raw
                .trim_matches(|c: char| matches!(c, ',' | '.' | ';' | ':' | '!' | '?'))
                .to_lowercase();
            if word.is_empty() {
                continue;
            }
            match word.strip_suffix("n't") {
                Some(host) if !host.is_empty() => {
                    tokens.push(host.to_string());
                    tokens.push("n't".to_string());
                }
                _ => tokens.push(word),
            }
        }
        Self::from_tokens(tokens)
    }

    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptySentence);
        }
        if let Some(bad) = tokens.iter().find(|t| t.is_empty() || t.chars().any(char::is_whitespace)) {
            return Err(Error::Parse(format!("invalid token `{bad}`")));
        }
        Ok(Sentence { tokens })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

/// A contiguous span of a sentence together with the projectivity of its
/// first token. `start..end` is half-open over token indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Chunk {
    pub tokens: Vec<String>,
    pub start: usize,
    pub end: usize,
    pub context: ProjectivityContext,
}

impl Chunk {
    pub fn new(tokens: Vec<String>, start: usize, context: ProjectivityContext) -> Self {
        let end = start + tokens.len();
        Chunk { tokens, start, end, context }
    }

    /// Builds an upward chunk from space-separated words; handy in fixtures.
    pub fn from_text(text: &str, start: usize) -> Self {
        let tokens: Vec<String> = text.split_whitespace().map(str::to_string).collect();
        Chunk::new(tokens, start, ProjectivityContext::upward())
    }

    pub fn with_context(mut self, context: impl Into<ProjectivityContext>) -> Self {
        self.context = context.into();
        self
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn token_indices(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum QuantifierKind {
    Universal,
    Existential,
    Negative,
}

impl QuantifierKind {
    fn restrictor(self) -> Monotonicity {
        match self {
            QuantifierKind::Universal => Monotonicity::AllArg1,
            QuantifierKind::Existential => Monotonicity::SomeArg1,
            QuantifierKind::Negative => Monotonicity::Not,
        }
    }

    fn scope(self) -> Monotonicity {
        match self {
            QuantifierKind::Universal => Monotonicity::AllArg2,
            QuantifierKind::Existential => Monotonicity::SomeArg2,
            QuantifierKind::Negative => Monotonicity::Not,
        }
    }
}

/// On-disk form of the fragment grammar.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrammarFile {
    #[serde(default)]
    pub universal_quantifiers: Vec<String>,
    #[serde(default)]
    pub existential_quantifiers: Vec<String>,
    #[serde(default)]
    pub negative_quantifiers: Vec<String>,
    #[serde(default)]
    pub negators: Vec<String>,
    #[serde(default)]
    pub determiners: Vec<String>,
    #[serde(default)]
    pub adjectives: Vec<String>,
    #[serde(default)]
    pub nouns: Vec<String>,
    #[serde(default)]
    pub verbs: Vec<String>,
    #[serde(default)]
    pub adverbs: Vec<String>,
    #[serde(default)]
    pub prepositions: Vec<String>,
}

/// Closed word classes of the fragment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChunkRules {
    universal: BTreeSet<String>,
    existential: BTreeSet<String>,
    negative: BTreeSet<String>,
    negators: BTreeSet<String>,
    determiners: BTreeSet<String>,
    adjectives: BTreeSet<String>,
    nouns: BTreeSet<String>,
    verbs: BTreeSet<String>,
    adverbs: BTreeSet<String>,
    prepositions: BTreeSet<String>,
}

impl ChunkRules {
    pub fn from_file_contents(file: GrammarFile) -> Result<Self> {
        let set = |v: Vec<String>| -> BTreeSet<String> {
            v.into_iter().map(|w| w.trim().to_lowercase()).filter(|w| !w.is_empty()).collect()
        };
        let rules = ChunkRules {
            universal: set(file.universal_quantifiers),
            existential: set(file.existential_quantifiers),
            negative: set(file.negative_quantifiers),
            negators: set(file.negators),
            determiners: set(file.determiners),
            adjectives: set(file.adjectives),
            nouns: set(file.nouns),
            verbs: set(file.verbs),
            adverbs: set(file.adverbs),
            prepositions: set(file.prepositions),
        };
        rules.check_disjoint()?;
        Ok(rules)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: GrammarFile =
            toml::from_str(text).map_err(|e| Error::Parse(format!("grammar file: {e}")))?;
        Self::from_file_contents(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// The grammar shipped with the crate.
    pub fn fragment() -> Self {
        static CELL: std::sync::OnceLock<ChunkRules> = std::sync::OnceLock::new();
        CELL.get_or_init(|| Self::parse(DEFAULT_FRAGMENT).expect("bundled grammar is valid")).clone()
    }

    fn classes(&self) -> [(&'static str, &BTreeSet<String>); 10] {
        [
            ("universal_quantifiers", &self.universal),
            ("existential_quantifiers", &self.existential),
            ("negative_quantifiers", &self.negative),
            ("negators", &self.negators),
            ("determiners", &self.determiners),
            ("adjectives", &self.adjectives),
            ("nouns", &self.nouns),
            ("verbs", &self.verbs),
            ("adverbs", &self.adverbs),
            ("prepositions", &self.prepositions),
        ]
    }

    fn check_disjoint(&self) -> Result<()> {
        let classes = self.classes();
        for (i, (name_a, a)) in classes.iter().enumerate() {
            for (name_b, b) in &classes[i + 1..] {
                if let Some(w) = a.intersection(b).next() {
                    return Err(Error::Parse(format!(
                        "grammar word `{w}` is listed as both {name_a} and {name_b}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn quantifier(&self, tok: &str) -> Option<QuantifierKind> {
        if self.universal.contains(tok) {
            Some(QuantifierKind::Universal)
        } else if self.existential.contains(tok) {
            Some(QuantifierKind::Existential)
        } else if self.negative.contains(tok) {
            Some(QuantifierKind::Negative)
        } else {
            None
        }
    }

    pub fn is_quantifier(&self, tok: &str) -> bool {
        self.quantifier(tok).is_some()
    }

    pub fn is_negator(&self, tok: &str) -> bool {
        self.negators.contains(tok)
    }

    fn continues_noun_phrase(&self, tok: &str) -> bool {
        self.determiners.contains(tok) || self.adjectives.contains(tok) || self.nouns.contains(tok)
    }

    fn starts_noun_phrase(&self, tok: &str) -> bool {
        self.is_quantifier(tok) || self.continues_noun_phrase(tok)
    }

    /// Whether `tok` belongs to any word class.
    pub fn knows(&self, tok: &str) -> bool {
        self.classes().iter().any(|(_, set)| set.contains(tok))
    }
}

impl Default for ChunkRules {
    fn default() -> Self {
        Self::fragment()
    }
}

/// Splits a sentence into noun-phrase chunks and the filler spans between
/// them. Contexts are left upward; see [`mark_projectivity`].
pub fn chunk(sentence: &Sentence, rules: &ChunkRules) -> Vec<Chunk> {
    let toks = sentence.tokens();
    let mut chunks = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let mut j = i + 1;
        if rules.starts_noun_phrase(&toks[i]) {
            while j < toks.len() && rules.continues_noun_phrase(&toks[j]) {
                j += 1;
            }
        } else {
            while j < toks.len() && !rules.starts_noun_phrase(&toks[j]) {
                j += 1;
            }
        }
        chunks.push(Chunk::new(toks[i..j].to_vec(), i, ProjectivityContext::upward()));
        i = j;
    }
    chunks
}

/// Assigns every chunk the projectivity of its first token.
///
/// A quantifier's own noun phrase gets its restrictor row and all later chunks
/// its scope row; a negator puts every later chunk under `not`. Nested
/// triggers compose. Existing contexts are ignored, so the function is
/// idempotent.
pub fn mark_projectivity(chunks: &[Chunk], rules: &ChunkRules) -> Vec<Chunk> {
    let mut active: Vec<Monotonicity> = Vec::new();
    chunks
        .iter()
        .map(|c| {
            let mut layers = active.clone();
            if let Some(q) = c.tokens.first().and_then(|t| rules.quantifier(t)) {
                layers.push(q.restrictor());
                active.push(q.scope());
            }
            for tok in &c.tokens {
                if rules.is_negator(tok) {
                    active.push(Monotonicity::Not);
                }
            }
            Chunk { context: ProjectivityContext::from_layers(layers), ..c.clone() }
        })
        .collect()
}

/// `chunk` followed by `mark_projectivity`.
pub fn chunk_and_mark(sentence: &Sentence, rules: &ChunkRules) -> Vec<Chunk> {
    mark_projectivity(&chunk(sentence, rules), rules)
}
