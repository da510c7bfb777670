//! Label, state and rationale metrics.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chunker::ChunkRules;
use crate::datagen::LabeledExample;
use crate::error::{Error, Result};
use crate::executor::{execute, ChunkedPair, Trace};
use crate::knowledge::Lexicon;
use crate::policy::Policy;
use crate::relation::{NliLabel, Relation};
use crate::scalar::Scalar;

pub type TokenSet = BTreeSet<usize>;

/// `|pred ∩ gold| / |pred ∪ gold|`, and 1 when both are empty.
pub fn iou(pred: &TokenSet, gold: &TokenSet) -> f64 {
    let union = pred.union(gold).count();
    if union == 0 {
        return 1.0;
    }
    pred.intersection(gold).count() as f64 / union as f64
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Match counts behind a precision/recall pair; sums across examples give
/// micro-averaged scores.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub matched: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl MatchCounts {
    pub fn add(&mut self, other: MatchCounts) {
        self.matched += other.matched;
        self.predicted += other.predicted;
        self.gold += other.gold;
    }

    /// With nothing predicted, precision is 1 if there was also nothing to
    /// find and 0 otherwise; recall likewise.
    pub fn prf(&self) -> Prf {
        let ratio = |num: usize, den: usize, other: usize| {
            if den == 0 {
                if other == 0 { 1.0 } else { 0.0 }
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(self.matched, self.predicted, self.gold);
        let recall = ratio(self.matched, self.gold, self.predicted);
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        Prf { precision, recall, f1 }
    }
}

/// One-to-one matching of predicted to gold phrases at IOU ≥ 0.5, taking
/// pairs in descending IOU and breaking ties by the leftmost phrases.
pub fn phrase_matches(pred: &[TokenSet], gold: &[TokenSet]) -> MatchCounts {
    let first = |s: &TokenSet| s.iter().next().copied().unwrap_or(usize::MAX);
    let mut pairs: Vec<(f64, &TokenSet, &TokenSet, usize, usize)> = Vec::new();
    for (i, p) in pred.iter().enumerate() {
        for (j, g) in gold.iter().enumerate() {
            let v = iou(p, g);
            if v >= 0.5 {
                pairs.push((v, p, g, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| first(a.1).cmp(&first(b.1)))
            .then_with(|| a.1.cmp(b.1))
            .then_with(|| first(a.2).cmp(&first(b.2)))
            .then_with(|| a.2.cmp(b.2))
    });
    let (mut used_p, mut used_g) = (vec![false; pred.len()], vec![false; gold.len()]);
    let mut matched = 0;
    for (_, _, _, i, j) in pairs {
        if !used_p[i] && !used_g[j] {
            used_p[i] = true;
            used_g[j] = true;
            matched += 1;
        }
    }
    MatchCounts { matched, predicted: pred.len(), gold: gold.len() }
}

pub fn phrasal_prf(pred: &[TokenSet], gold: &[TokenSet]) -> Prf {
    phrase_matches(pred, gold).prf()
}

/// Fraction of positions where predicted and gold states agree, pooled over
/// all sequences.
pub fn state_accuracy(pred: &[Vec<Relation>], gold: &[Vec<Relation>]) -> Result<f64> {
    if pred.len() != gold.len() {
        return Err(Error::LengthMismatch { expected: gold.len(), got: pred.len() });
    }
    let (mut hit, mut total) = (0usize, 0usize);
    for (p, g) in pred.iter().zip(gold) {
        if p.len() != g.len() {
            return Err(Error::LengthMismatch { expected: g.len(), got: p.len() });
        }
        hit += p.iter().zip(g).filter(|(a, b)| a == b).count();
        total += g.len();
    }
    Ok(if total == 0 { 1.0 } else { hit as f64 / total as f64 })
}

/// Entailment versus everything else.
pub fn collapse(label: NliLabel) -> bool {
    label == NliLabel::Entailment
}

pub fn label_accuracy(pred: &[NliLabel], gold: &[NliLabel], collapse_binary: bool) -> Result<f64> {
    if pred.len() != gold.len() {
        return Err(Error::LengthMismatch { expected: gold.len(), got: pred.len() });
    }
    if gold.is_empty() {
        return Ok(0.0);
    }
    let hits = pred
        .iter()
        .zip(gold)
        .filter(|(p, g)| if collapse_binary { collapse(**p) == collapse(**g) } else { p == g })
        .count();
    Ok(hits as f64 / gold.len() as f64)
}

/// Hypothesis token sets of the rationale chunks of `trace`, one per chunk.
pub fn rationale_phrases(pair: &ChunkedPair, trace: &Trace) -> Vec<TokenSet> {
    trace.rationales.iter().map(|&t| pair.chunk(t).token_indices().collect()).collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub examples: usize,
    pub label_accuracy: f64,
    pub binary_label_accuracy: f64,
    pub state_accuracy: f64,
    /// Mean per-example IOU of rationale token sets.
    pub rationale_iou: f64,
    pub rationale_precision: f64,
    pub rationale_recall: f64,
    pub rationale_f1: f64,
}

/// Greedy predictions for one example.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: NliLabel,
    pub trace: Trace,
    pub rationale_tokens: TokenSet,
    pub rationale_phrases: Vec<TokenSet>,
}

pub fn predict<S: Scalar, P: Policy<S>>(policy: &P, pair: &ChunkedPair, lex: &Lexicon) -> Result<Prediction> {
    let program = policy.greedy_program(pair, lex)?;
    let trace = execute(pair, &program)?;
    let phrases = rationale_phrases(pair, &trace);
    Ok(Prediction {
        label: trace.label,
        rationale_tokens: phrases.iter().flatten().copied().collect(),
        rationale_phrases: phrases,
        trace,
    })
}

/// Scores greedy decoding of `policy` against the gold annotations of `data`.
/// State accuracy only covers examples whose hypothesis chunking matches the
/// length of the gold state sequence.
pub fn evaluate<S: Scalar, P: Policy<S>>(
    policy: &P,
    data: &[LabeledExample],
    rules: &ChunkRules,
    lex: &Lexicon,
) -> Result<EvalReport> {
    let preds = data
        .par_iter()
        .map(|ex| predict(policy, &ex.chunked(rules)?, lex))
        .collect::<Result<Vec<_>>>()?;
    let pred_labels: Vec<NliLabel> = preds.iter().map(|p| p.label).collect();
    let gold_labels: Vec<NliLabel> = data.iter().map(|e| e.label).collect();
    let (mut ps, mut gs) = (Vec::new(), Vec::new());
    let mut counts = MatchCounts::default();
    let mut iou_sum = 0.0;
    for (p, ex) in preds.iter().zip(data) {
        if p.trace.step_states().len() == ex.gold_states.len() {
            ps.push(p.trace.step_states().to_vec());
            gs.push(ex.gold_states.clone());
        }
        let gold_tokens: TokenSet = ex.gold_rationale_tokens.iter().copied().collect();
        iou_sum += iou(&p.rationale_tokens, &gold_tokens);
        counts.add(phrase_matches(&p.rationale_phrases, &ex.gold_rationale_phrases));
    }
    let prf = counts.prf();
    Ok(EvalReport {
        examples: data.len(),
        label_accuracy: label_accuracy(&pred_labels, &gold_labels, false)?,
        binary_label_accuracy: label_accuracy(&pred_labels, &gold_labels, true)?,
        state_accuracy: state_accuracy(&ps, &gs)?,
        rationale_iou: if data.is_empty() { 0.0 } else { iou_sum / data.len() as f64 },
        rationale_precision: prf.precision,
        rationale_recall: prf.recall,
        rationale_f1: prf.f1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Relation::*;

    fn set(xs: &[usize]) -> TokenSet {
        xs.iter().copied().collect()
    }

    #[test]
    fn iou_cases() {
        assert_eq!(iou(&set(&[1, 2]), &set(&[1, 2])), 1.0);
        assert_eq!(iou(&set(&[1]), &set(&[2])), 0.0);
        assert_eq!(iou(&set(&[1, 2, 3]), &set(&[2, 3, 4])), 0.5);
        assert_eq!(iou(&set(&[]), &set(&[])), 1.0);
        assert_eq!(iou(&set(&[]), &set(&[3])), 0.0);
    }

    #[test]
    fn prf_cases() {
        let g = vec![set(&[0, 1]), set(&[4])];
        assert_eq!(phrasal_prf(&g, &g), Prf { precision: 1.0, recall: 1.0, f1: 1.0 });
        let r = phrasal_prf(&[set(&[4]), set(&[7])], &[set(&[4])]);
        assert_eq!((r.precision, r.recall), (0.5, 1.0));
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(phrasal_prf(&[], &[]), Prf { precision: 1.0, recall: 1.0, f1: 1.0 });
        assert_eq!(phrasal_prf(&[], &[set(&[1])]), Prf::default());
    }

    #[test]
    fn hand_partial_overlaps() {
        // pred A={0,1,2} vs gold X={1,2} (2/3) and Y={2,3} (1/4)
        // pred B={2,3,4} vs X (1/4) and Y (2/3)
        // pred C={5,6} vs Z={6} (1/2)
        // pred D={6,7} vs Z (1/2), tie with C; C is further left
        let pred = [set(&[0, 1, 2]), set(&[2, 3, 4]), set(&[6, 7]), set(&[5, 6])];
        let gold = [set(&[1, 2]), set(&[2, 3]), set(&[6])];
        let m = phrase_matches(&pred, &gold);
        assert_eq!(m, MatchCounts { matched: 3, predicted: 4, gold: 3 });
        let r = m.prf();
        assert_eq!((r.precision, r.recall), (0.75, 1.0));
        assert!((r.f1 - 6.0 / 7.0).abs() < 1e-15);
        // one gold phrase cannot absorb two predictions
        let m = phrase_matches(&[set(&[1, 2]), set(&[1, 2, 3])], &[set(&[1, 2])]);
        assert_eq!(m.matched, 1);
    }

    #[test]
    fn state_accuracy_cases() {
        let g = vec![vec![ForwardEntailment, Alternation]];
        assert_eq!(state_accuracy(&g, &g).unwrap(), 1.0);
        assert_eq!(state_accuracy(&[vec![Independence, Cover]], &g).unwrap(), 0.0);
        assert_eq!(state_accuracy(&[vec![ForwardEntailment, Independence]], &g).unwrap(), 0.5);
        assert!(state_accuracy(&[vec![ForwardEntailment]], &g).is_err());
    }

    #[test]
    fn label_accuracy_cases() {
        use NliLabel::*;
        let gold = [Entailment, Contradiction, Neutral, Neutral];
        assert_eq!(label_accuracy(&gold, &gold, false).unwrap(), 1.0);
        assert_eq!(label_accuracy(&[Neutral, Entailment, Entailment, Contradiction], &gold, false).unwrap(), 0.0);
        // by hand: 3-way hits at 0 and 3; 2-way also counts 1 (C vs N)
        let pred = [Entailment, Neutral, Entailment, Neutral];
        assert_eq!(label_accuracy(&pred, &gold, false).unwrap(), 0.5);
        assert_eq!(label_accuracy(&pred, &gold, true).unwrap(), 0.75);
    }

    fn arb_sets() -> impl Strategy<Value = Vec<TokenSet>> {
        proptest::collection::vec(proptest::collection::btree_set(0usize..8, 0..4), 0..5)
    }

    proptest! {
        #[test]
        fn bounds_and_symmetry(a in proptest::collection::btree_set(0usize..10, 0..6), b in proptest::collection::btree_set(0usize..10, 0..6)) {
            let v = iou(&a, &b);
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(v, iou(&b, &a));
        }

        #[test]
        fn prf_permutation_invariant(pred in arb_sets(), gold in arb_sets()) {
            let r = phrasal_prf(&pred, &gold);
            let mut rev = pred.clone();
            rev.reverse();
            prop_assert_eq!(r, phrasal_prf(&rev, &gold));
            for v in [r.precision, r.recall, r.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            if r.precision > 0.0 && r.recall > 0.0 {
                let h = 2.0 * r.precision * r.recall / (r.precision + r.recall);
                prop_assert!((r.f1 - h).abs() < 1e-12);
            }
        }
    }
}
