use crate::executor::ChunkedPair;
use crate::knowledge::Lexicon;
use crate::relation::{NliLabel, Relation, Target};

use super::TrainExample;

/// True when premise and hypothesis are the same token sequence once
/// synonyms are identified, i.e. the pair entails in both directions.
pub fn mutual_entailment(pair: &ChunkedPair, lex: &Lexicon) -> bool {
    let flat = |chunks: &[crate::chunker::Chunk]| -> Vec<String> {
        chunks.iter().flat_map(|c| c.tokens.iter().cloned()).collect()
    };
    lex.phrases_equal(&flat(&pair.premise), &flat(&pair.hypothesis))
}

/// Appends, for every entailment example not flagged by `skip`, the swapped
/// pair whose program must end in ⊐. Originals come first, in order.
pub fn relation_augmentation(data: &[TrainExample], skip: impl Fn(&ChunkedPair) -> bool) -> Vec<TrainExample> {
    let mut out = data.to_vec();
    for ex in data {
        if ex.target != Target::Label(NliLabel::Entailment) || skip(&ex.pair) {
            continue;
        }
        let swapped = ChunkedPair { premise: ex.pair.hypothesis.clone(), hypothesis: ex.pair.premise.clone() };
        if swapped.hypothesis.is_empty() {
            continue;
        }
        out.push(TrainExample { pair: swapped, target: Target::State(Relation::ReverseEntailment) });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunker::ChunkRules;
    use crate::executor::{enumerate_programs, execute, Program};
    use crate::relation::ActionRelation as A;

    fn ex(p: &str, h: &str, label: NliLabel) -> TrainExample {
        TrainExample { pair: ChunkedPair::parse(p, h, &ChunkRules::fragment()).unwrap(), target: label.into() }
    }

    #[test]
    fn swaps_entailment() {
        let lex = Lexicon::fragment();
        let data = vec![ex("some small dogs run", "some dogs run", NliLabel::Entailment)];
        let out = relation_augmentation(&data, |p| mutual_entailment(p, &lex));
        assert_eq!(out.len(), 2);
        assert_eq!(out[0], data[0]);
        assert_eq!(out[1].target, Target::State(Relation::ReverseEntailment));
        assert_eq!(out[1].pair.hypothesis[0].text(), "some small dogs");
        // by hand: small dogs ⊐ dogs at the subject, ≡ at the verb
        let gold = Program::new(vec![A::ReverseEntailment, A::Equivalence]);
        assert_eq!(execute(&out[1].pair, &gold).unwrap().final_state(), Relation::ReverseEntailment);
        assert!(enumerate_programs(&out[1].pair, out[1].target, 8).unwrap().contains(&gold));
    }

    #[test]
    fn skips_mutual_entailment() {
        let lex = Lexicon::fragment();
        let data = vec![
            ex("some dogs run", "some dogs run", NliLabel::Entailment),
            ex("the kid sings", "the child sings", NliLabel::Entailment),
        ];
        assert_eq!(relation_augmentation(&data, |p| mutual_entailment(p, &lex)), data);
    }

    #[test]
    fn other_labels_untouched() {
        let lex = Lexicon::fragment();
        let data = vec![
            ex("the dog runs", "the dog sleeps", NliLabel::Contradiction),
            ex("some animals run", "some dogs run", NliLabel::Neutral),
        ];
        assert_eq!(relation_augmentation(&data, |p| mutual_entailment(p, &lex)), data);
    }
}
