//! Per-step relation policy.
//!
//! The shipped policy is a linear softmax over hand-built alignment features.
//! Features for step `t` look at the whole premise but only at hypothesis
//! chunk `t` and its index, never at later chunks or at the hypothesis
//! length.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::executor::{ChunkedPair, Program};
use crate::knowledge::{align, Lexicon};
use crate::projection::Monotonicity;
use crate::relation::ActionRelation;
use crate::scalar::Scalar;

pub const FEATURE_NAMES: [&str; 17] = [
    "bias",
    "exact_match",
    "sub_phrase",
    "super_phrase",
    "synonym",
    "hypernym_in_hypothesis",
    "hypernym_in_premise",
    "antonym",
    "overlap_ratio",
    "aligned",
    "inverse_position",
    "ctx_upward",
    "ctx_all_arg1",
    "ctx_all_arg2",
    "ctx_some_arg1",
    "ctx_some_arg2",
    "ctx_not",
];

pub const NUM_FEATURES: usize = FEATURE_NAMES.len();

const CTX_OFFSET: usize = 11;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector<S>(pub Vec<S>);

impl<S: Scalar> FeatureVector<S> {
    pub fn zeros(n: usize) -> Self {
        FeatureVector(vec![S::zero(); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<S> {
        FEATURE_NAMES.iter().position(|n| *n == name).and_then(|i| self.0.get(i).copied())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

/// Features of hypothesis chunk `t` (1-based) against its aligned premise chunk.
pub fn featurize<S: Scalar>(pair: &ChunkedPair, t: usize, lex: &Lexicon) -> FeatureVector<S> {
    let flag = |b: bool| if b { S::one() } else { S::zero() };
    let s = pair.chunk(t);
    let mut x = FeatureVector::zeros(NUM_FEATURES);
    x.0[0] = S::one();
    if let Some(st) = align(s, &pair.premise, lex) {
        let (hs, ps) = (&s.tokens, &st.tokens);
        let any_pair = |f: &dyn Fn(&str, &str) -> bool| hs.iter().any(|u| ps.iter().any(|v| f(u, v)));
        x.0[1] = flag(lex.phrases_equal(hs, ps));
        x.0[2] = flag(lex.is_sub_phrase(hs, ps));
        x.0[3] = flag(lex.is_sub_phrase(ps, hs));
        x.0[4] = flag(any_pair(&|u, v| lex.is_synonym(u, v)));
        x.0[5] = flag(any_pair(&|u, v| lex.is_hypernym(u, v)));
        x.0[6] = flag(any_pair(&|u, v| lex.is_hypernym(v, u)));
        x.0[7] = flag(any_pair(&|u, v| lex.are_antonyms(u, v)));
        x.0[8] = S::of(lex.overlap(hs, ps) as f64 / hs.len().max(1) as f64);
        x.0[9] = S::one();
    }
    x.0[10] = S::one() / S::of(t as f64);
    let layers = s.context.layers();
    if layers.is_empty() {
        x.0[CTX_OFFSET] = S::one();
    }
    for m in layers {
        if *m != Monotonicity::UpwardDefault {
            x.0[CTX_OFFSET + m.index()] = S::one();
        }
    }
    x
}

/// A distribution over the five actions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepDistribution<S> {
    probs: [S; ActionRelation::COUNT],
}

impl<S: Scalar> StepDistribution<S> {
    pub fn uniform() -> Self {
        StepDistribution { probs: [S::one() / S::of(ActionRelation::COUNT as f64); ActionRelation::COUNT] }
    }

    pub fn point_mass(a: ActionRelation) -> Self {
        let mut probs = [S::zero(); ActionRelation::COUNT];
        probs[a.index()] = S::one();
        StepDistribution { probs }
    }

    /// Validates non-negativity and normalization (within `1e-6` so `f32`
    /// distributions pass too).
    pub fn new(probs: [S; ActionRelation::COUNT]) -> Result<Self> {
        let sum: S = probs.iter().copied().sum();
        if probs.iter().any(|p| !p.is_finite() || *p < S::zero()) || (sum - S::one()).abs() > S::of(1e-6) {
            return Err(Error::NonFinite(format!("invalid distribution {probs:?}")));
        }
        Ok(StepDistribution { probs })
    }

    /// Softmax of raw scores.
    pub fn softmax(scores: [S; ActionRelation::COUNT]) -> Result<Self> {
        if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
            return Err(Error::NonFinite(format!("policy score {bad}")));
        }
        let max = scores.iter().copied().fold(S::neg_infinity(), S::max);
        let exp = scores.map(|s| (s - max).exp());
        let total: S = exp.iter().copied().sum();
        Ok(StepDistribution { probs: exp.map(|e| e / total) })
    }

    pub fn prob(&self, a: ActionRelation) -> S {
        self.probs[a.index()]
    }

    pub fn probs(&self) -> &[S; ActionRelation::COUNT] {
        &self.probs
    }

    /// Most probable action; ties resolve to the earlier action in
    /// `ActionRelation::ALL`.
    pub fn argmax(&self) -> ActionRelation {
        let mut best = 0;
        for i in 1..ActionRelation::COUNT {
            if self.probs[i] > self.probs[best] {
                best = i;
            }
        }
        ActionRelation::ALL[best]
    }

    /// Inverse-CDF draw using one uniform from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ActionRelation {
        let u: f64 = rng.gen();
        let mut cum = 0.0;
        let mut last_positive = ActionRelation::ALL[0];
        for a in ActionRelation::ALL {
            let p = self.probs[a.index()].as_f64();
            if p > 0.0 {
                last_positive = a;
            }
            cum += p;
            if u < cum {
                return a;
            }
        }
        last_positive
    }
}

/// Weight matrix, one row per action. Also used for gradients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams<S> {
    n_features: usize,
    weights: Vec<S>,
}

impl<S: Scalar> PolicyParams<S> {
    pub fn zeros(n_features: usize) -> Self {
        PolicyParams { n_features, weights: vec![S::zero(); ActionRelation::COUNT * n_features] }
    }

    pub fn from_rows(rows: Vec<Vec<S>>) -> Result<Self> {
        if rows.len() != ActionRelation::COUNT {
            return Err(Error::Parse(format!("expected {} rows, got {}", ActionRelation::COUNT, rows.len())));
        }
        let n_features = rows[0].len();
        if rows.iter().any(|r| r.len() != n_features) {
            return Err(Error::Parse("ragged weight rows".into()));
        }
        Ok(PolicyParams { n_features, weights: rows.concat() })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, a: ActionRelation) -> &[S] {
        let n = self.n_features;
        &self.weights[a.index() * n..(a.index() + 1) * n]
    }

    pub fn get(&self, a: ActionRelation, j: usize) -> S {
        self.weights[a.index() * self.n_features + j]
    }

    pub fn get_mut(&mut self, a: ActionRelation, j: usize) -> &mut S {
        &mut self.weights[a.index() * self.n_features + j]
    }

    pub fn as_slice(&self) -> &[S] {
        &self.weights
    }

    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.weights
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &PolicyParams<S>, scale: S) {
        debug_assert_eq!(self.weights.len(), other.weights.len());
        for (w, g) in self.weights.iter_mut().zip(&other.weights) {
            *w = *w + scale * *g;
        }
    }

    pub fn scale(&mut self, k: S) {
        for w in &mut self.weights {
            *w = *w * k;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|w| w.is_zero())
    }

    pub fn max_abs(&self) -> S {
        self.weights.iter().fold(S::zero(), |m, w| m.max(w.abs()))
    }
}

/// Softmax of `params · features`.
pub fn distribution<S: Scalar>(params: &PolicyParams<S>, features: &FeatureVector<S>) -> Result<StepDistribution<S>> {
    if features.len() != params.n_features() {
        return Err(Error::LengthMismatch { expected: params.n_features(), got: features.len() });
    }
    let scores = ActionRelation::ALL.map(|a| {
        params.row(a).iter().zip(&features.0).map(|(w, x)| *w * *x).sum::<S>()
    });
    StepDistribution::softmax(scores)
}

/// `∇ log p[action] = (onehot(action) − p) ⊗ features`, accumulated into
/// `grad` with weight `scale`.
pub fn accumulate_grad_log_prob<S: Scalar>(
    probs: &StepDistribution<S>,
    features: &FeatureVector<S>,
    action: ActionRelation,
    scale: S,
    grad: &mut PolicyParams<S>,
) {
    for a in ActionRelation::ALL {
        let indicator = if a == action { S::one() } else { S::zero() };
        let coeff = scale * (indicator - probs.prob(a));
        if coeff.is_zero() {
            continue;
        }
        for (j, x) in features.0.iter().enumerate() {
            let g = grad.get_mut(a, j);
            *g = *g + coeff * *x;
        }
    }
}

pub fn grad_log_prob<S: Scalar>(
    params: &PolicyParams<S>,
    features: &FeatureVector<S>,
    action: ActionRelation,
) -> Result<PolicyParams<S>> {
    let probs = distribution(params, features)?;
    let mut grad = PolicyParams::zeros(params.n_features());
    accumulate_grad_log_prob(&probs, features, action, S::one(), &mut grad);
    Ok(grad)
}

/// The interface the trainer drives. A different model can stand in for the
/// linear policy as long as it maps `(pair, t)` to a distribution and
/// accumulates score-function gradients into its own parameter type.
pub trait Policy<S: Scalar>: Sync {
    type Grad: Clone + Send + Sync;

    fn step_distribution(&self, pair: &ChunkedPair, t: usize, lex: &Lexicon) -> Result<StepDistribution<S>>;

    fn distributions(&self, pair: &ChunkedPair, lex: &Lexicon) -> Result<Vec<StepDistribution<S>>> {
        (1..=pair.m()).map(|t| self.step_distribution(pair, t, lex)).collect()
    }

    /// Argmax decoding, as used at test time.
    fn greedy_program(&self, pair: &ChunkedPair, lex: &Lexicon) -> Result<Program> {
        Ok(Program::new(self.distributions(pair, lex)?.iter().map(StepDistribution::argmax).collect()))
    }

    fn zero_grad(&self) -> Self::Grad;

    /// `grad += scale * ∇ log p_t[action]`.
    fn accumulate(
        &self,
        pair: &ChunkedPair,
        t: usize,
        lex: &Lexicon,
        action: ActionRelation,
        scale: S,
        grad: &mut Self::Grad,
    ) -> Result<()>;

    fn add_grads(&self, into: &mut Self::Grad, other: &Self::Grad);

    fn scale_grad(&self, grad: &mut Self::Grad, k: S);

    /// Gradient-descent step `θ ← θ − lr · grad`.
    fn descend(&mut self, grad: &Self::Grad, lr: S) -> Result<()>;
}

/// Linear softmax policy over [`featurize`] features.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearPolicy<S> {
    pub params: PolicyParams<S>,
}

impl<S: Scalar> Default for LinearPolicy<S> {
    fn default() -> Self {
        Self::zeros()
    }
}

impl<S: Scalar> LinearPolicy<S> {
    /// All-zero weights: the uniform policy.
    pub fn zeros() -> Self {
        LinearPolicy { params: PolicyParams::zeros(NUM_FEATURES) }
    }

    /// Text checkpoint: a header with the scalar type and feature names, then
    /// one line of weights per action. Numbers use the shortest exact
    /// representation, so the output is byte-stable.
    pub fn to_checkpoint(&self) -> String {
        let mut out = String::new();
        out.push_str("natlog-policy 1\n");
        let _ = writeln!(out, "scalar {}", std::any::type_name::<S>());
        let _ = writeln!(out, "features {}", FEATURE_NAMES.join(" "));
        for a in ActionRelation::ALL {
            let _ = write!(out, "{}", a.name());
            for w in self.params.row(a) {
                let _ = write!(out, " {w:e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Parse(format!("checkpoint: {m}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next() != Some("natlog-policy 1") {
            return Err(bad("missing `natlog-policy 1` header"));
        }
        let scalar = lines.next().and_then(|l| l.strip_prefix("scalar ")).ok_or_else(|| bad("missing scalar line"))?;
        if scalar != std::any::type_name::<S>() {
            return Err(bad(&format!("stored as {scalar}, loading as {}", std::any::type_name::<S>())));
        }
        let names: Vec<&str> = lines
            .next()
            .and_then(|l| l.strip_prefix("features "))
            .ok_or_else(|| bad("missing features line"))?
            .split_whitespace()
            .collect();
        if names != FEATURE_NAMES {
            return Err(bad("feature names do not match this build"));
        }
        let mut rows = Vec::new();
        for a in ActionRelation::ALL {
            let line = lines.next().ok_or_else(|| bad("missing weight row"))?;
            let mut fields = line.split_whitespace();
            if fields.next() != Some(a.name()) {
                return Err(bad(&format!("expected row `{}`", a.name())));
            }
            let row = fields
                .map(|f| f.parse::<S>().map_err(|_| bad(&format!("bad number `{f}`"))))
                .collect::<Result<Vec<S>>>()?;
            rows.push(row);
        }
        let params = PolicyParams::from_rows(rows)?;
        if params.n_features() != NUM_FEATURES || !params.is_finite() {
            return Err(bad("weights have the wrong shape or are not finite"));
        }
        Ok(LinearPolicy { params })
    }
}

impl<S: Scalar> Policy<S> for LinearPolicy<S> {
    type Grad = PolicyParams<S>;

    fn step_distribution(&self, pair: &ChunkedPair, t: usize, lex: &Lexicon) -> Result<StepDistribution<S>> {
        distribution(&self.params, &featurize(pair, t, lex))
    }

    fn zero_grad(&self) -> Self::Grad {
        PolicyParams::zeros(self.params.n_features())
    }

    fn accumulate(
        &self,
        pair: &ChunkedPair,
        t: usize,
        lex: &Lexicon,
        action: ActionRelation,
        scale: S,
        grad: &mut Self::Grad,
    ) -> Result<()> {
        let x = featurize(pair, t, lex);
        let p = distribution(&self.params, &x)?;
        accumulate_grad_log_prob(&p, &x, action, scale, grad);
        Ok(())
    }

    fn add_grads(&self, into: &mut Self::Grad, other: &Self::Grad) {
        into.add_scaled(other, S::one());
    }

    fn scale_grad(&self, grad: &mut Self::Grad, k: S) {
        grad.scale(k);
    }

    fn descend(&mut self, grad: &Self::Grad, lr: S) -> Result<()> {
        let mut next = self.params.clone();
        next.add_scaled(grad, -lr);
        if !next.is_finite() {
            return Err(Error::NonFinite("policy weights after update".into()));
        }
        self.params = next;
        Ok(())
    }
}
