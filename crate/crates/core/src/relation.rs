//! The seven natural-logic relations, their composition table, the merged
//! five-way action space and the three-way label grouping.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// A natural-logic relation between two spans `x` and `y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `x ≡ y`
    Equivalence,
    /// `x ⊏ y`
    ForwardEntailment,
    /// `x ⊐ y`
    ReverseEntailment,
    /// `x ∧ y`
    Negation,
    /// `x | y`
    Alternation,
    /// `x ⌣ y`
    Cover,
    /// `x # y`
    Independence,
}

use Relation::{
    Alternation as ALT, Cover as COV, Equivalence as EQ, ForwardEntailment as FWD,
    Independence as IND, Negation as NEG, ReverseEntailment as REV,
};

/// Composition table, row `a` joined with column `b`, both in `Relation::ALL` order.
const JOIN: [[Relation; 7]; 7] = [
    [EQ, FWD, REV, NEG, ALT, COV, IND],
    [FWD, FWD, IND, ALT, ALT, IND, IND],
    [REV, IND, REV, COV, IND, COV, IND],
    [NEG, COV, ALT, EQ, REV, FWD, IND],
    [ALT, IND, ALT, FWD, IND, FWD, IND],
    [COV, COV, IND, REV, REV, IND, IND],
    [IND, IND, IND, IND, IND, IND, IND],
];

impl Relation {
    pub const ALL: [Relation; 7] = [EQ, FWD, REV, NEG, ALT, COV, IND];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn symbol(self) -> &'static str {
        match self {
            EQ => "≡",
            FWD => "⊏",
            REV => "⊐",
            NEG => "∧",
            ALT => "|",
            COV => "⌣",
            IND => "#",
        }
    }

    /// Stable textual name used in every file format.
    pub fn name(self) -> &'static str {
        match self {
            EQ => "equivalence",
            FWD => "forward_entailment",
            REV => "reverse_entailment",
            NEG => "negation",
            ALT => "alternation",
            COV => "cover",
            IND => "independence",
        }
    }

    /// The relation obtained by composing `self` (row) with `other` (column).
    pub fn join(self, other: Relation) -> Relation {
        JOIN[self.index()][other.index()]
    }

    pub fn group(self) -> NliLabel {
        group(self)
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Relation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Relation::ALL
            .into_iter()
            .find(|r| r.name() == s || r.symbol() == s)
            .ok_or_else(|| Error::Parse(format!("unknown relation `{s}`")))
    }
}

pub fn join(a: Relation, b: Relation) -> Relation {
    a.join(b)
}

/// Three-way NLI label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NliLabel {
    Entailment,
    Contradiction,
    Neutral,
}

impl NliLabel {
    pub const ALL: [NliLabel; 3] = [NliLabel::Entailment, NliLabel::Contradiction, NliLabel::Neutral];

    pub fn name(self) -> &'static str {
        match self {
            NliLabel::Entailment => "entailment",
            NliLabel::Contradiction => "contradiction",
            NliLabel::Neutral => "neutral",
        }
    }

    /// Two-way collapse: contradiction and neutral both become non-entailment.
    pub fn is_entailment(self) -> bool {
        self == NliLabel::Entailment
    }
}

impl fmt::Display for NliLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NliLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NliLabel::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown label `{s}`")))
    }
}

/// `{≡,⊏}` → entailment, `{∧,|}` → contradiction, `{⊐,⌣,#}` → neutral.
pub fn group(r: Relation) -> NliLabel {
    match r {
        EQ | FWD => NliLabel::Entailment,
        NEG | ALT => NliLabel::Contradiction,
        REV | COV | IND => NliLabel::Neutral,
    }
}

/// The five relations a policy chooses between: negation and alternation are
/// merged and cover is never proposed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionRelation {
    Equivalence,
    ForwardEntailment,
    ReverseEntailment,
    NegAlt,
    Independence,
}

impl ActionRelation {
    /// Also the fixed tie-breaking order.
    pub const ALL: [ActionRelation; 5] = [
        ActionRelation::Equivalence,
        ActionRelation::ForwardEntailment,
        ActionRelation::ReverseEntailment,
        ActionRelation::NegAlt,
        ActionRelation::Independence,
    ];

    pub const COUNT: usize = 5;

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<ActionRelation> {
        Self::ALL.get(i).copied()
    }

    /// The merged action executes as alternation.
    pub fn to_relation(self) -> Relation {
        match self {
            ActionRelation::Equivalence => EQ,
            ActionRelation::ForwardEntailment => FWD,
            ActionRelation::ReverseEntailment => REV,
            ActionRelation::NegAlt => ALT,
            ActionRelation::Independence => IND,
        }
    }

    /// `None` for cover, which has no action.
    pub fn from_relation(r: Relation) -> Option<ActionRelation> {
        match r {
            EQ => Some(ActionRelation::Equivalence),
            FWD => Some(ActionRelation::ForwardEntailment),
            REV => Some(ActionRelation::ReverseEntailment),
            NEG | ALT => Some(ActionRelation::NegAlt),
            IND => Some(ActionRelation::Independence),
            COV => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActionRelation::NegAlt => "neg_alt",
            other => other.to_relation().name(),
        }
    }

    pub fn symbol(self) -> &'static str {
        self.to_relation().symbol()
    }
}

impl fmt::Display for ActionRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for ActionRelation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActionRelation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown action relation `{s}`")))
    }
}

/// Small bitset over the seven relations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct RelationSet(u8);

impl RelationSet {
    pub const EMPTY: RelationSet = RelationSet(0);

    pub fn singleton(r: Relation) -> Self {
        RelationSet(1 << r.index())
    }

    /// The relations the five actions execute as.
    pub fn actions() -> Self {
        ActionRelation::ALL.iter().map(|a| a.to_relation()).collect()
    }

    pub fn insert(&mut self, r: Relation) {
        self.0 |= 1 << r.index();
    }

    pub fn contains(self, r: Relation) -> bool {
        self.0 & (1 << r.index()) != 0
    }

    pub fn union(self, other: RelationSet) -> RelationSet {
        RelationSet(self.0 | other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Relation> {
        Relation::ALL.into_iter().filter(move |r| self.contains(*r))
    }

    pub fn labels(self) -> BTreeSet<NliLabel> {
        self.iter().map(group).collect()
    }

    /// `{ a ⋈ b | a ∈ self, b ∈ steps }`
    pub fn join_all(self, steps: RelationSet) -> RelationSet {
        let mut out = RelationSet::EMPTY;
        for a in self.iter() {
            for b in steps.iter() {
                out.insert(a.join(b));
            }
        }
        out
    }
}

impl FromIterator<Relation> for RelationSet {
    fn from_iter<I: IntoIterator<Item = Relation>>(iter: I) -> Self {
        let mut set = RelationSet::EMPTY;
        for r in iter {
            set.insert(r);
        }
        set
    }
}

/// States reachable from `z` by composing at most one relation from each of the
/// given per-step sets, in order.
pub fn reachable_states_through<I>(z: Relation, steps: I) -> RelationSet
where
    I: IntoIterator<Item = RelationSet>,
{
    let mut reach = RelationSet::singleton(z);
    for step in steps {
        reach = reach.union(reach.join_all(step));
    }
    reach
}

/// States reachable from `z` by composing sequences of at most `steps` actions.
/// Iterates to a fixed point, so large `steps` cost no more than a handful.
pub fn reachable_states(z: Relation, steps: usize) -> RelationSet {
    let actions = RelationSet::actions();
    let mut reach = RelationSet::singleton(z);
    for _ in 0..steps {
        let next = reach.union(reach.join_all(actions));
        if next == reach {
            break;
        }
        reach = next;
    }
    reach
}

/// Labels reachable from `z` within `steps` action compositions.
pub fn reachable(z: Relation, steps: usize) -> BTreeSet<NliLabel> {
    reachable_states(z, steps).labels()
}

/// What a program has to execute to: an NLI label, or (for swapped
/// entailment samples) an exact final relation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Label(NliLabel),
    State(Relation),
}

impl Target {
    pub fn is_met_by(self, final_state: Relation) -> bool {
        match self {
            Target::Label(label) => group(final_state) == label,
            Target::State(r) => final_state == r,
        }
    }

    pub fn is_reachable_in(self, states: RelationSet) -> bool {
        states.iter().any(|s| self.is_met_by(s))
    }

    /// The NLI label a program meeting this target predicts.
    pub fn label(self) -> NliLabel {
        match self {
            Target::Label(l) => l,
            Target::State(r) => group(r),
        }
    }
}

impl From<NliLabel> for Target {
    fn from(l: NliLabel) -> Self {
        Target::Label(l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn join_examples() {
        assert_eq!(join(FWD, FWD), FWD);
        assert_eq!(join(NEG, NEG), EQ);
        for x in Relation::ALL {
            assert_eq!(join(EQ, x), x);
            assert_eq!(join(x, EQ), x);
            assert_eq!(join(IND, x), IND);
            assert_eq!(join(x, IND), IND);
        }
    }

    #[test]
    fn grouping() {
        assert_eq!(group(FWD), NliLabel::Entailment);
        assert_eq!(group(COV), NliLabel::Neutral);
        assert_eq!(group(ALT), NliLabel::Contradiction);
        assert_eq!(group(EQ), NliLabel::Entailment);
        assert_eq!(group(NEG), NliLabel::Contradiction);
        assert_eq!(group(REV), NliLabel::Neutral);
        assert_eq!(group(IND), NliLabel::Neutral);
    }

    #[test]
    fn negalt_executes_as_alternation() {
        assert_eq!(ActionRelation::NegAlt.to_relation(), ALT);
        assert_eq!(ActionRelation::from_relation(NEG), Some(ActionRelation::NegAlt));
        assert_eq!(ActionRelation::from_relation(COV), None);
        // the merged pair disagrees on double application
        assert_eq!(join(NEG, NEG), EQ);
        assert_eq!(join(ALT, ALT), IND);
    }

    #[test]
    fn reachable_trivial_cases() {
        for k in 0..5 {
            assert_eq!(reachable(IND, k), BTreeSet::from([NliLabel::Neutral]));
        }
        assert_eq!(reachable(EQ, 0), BTreeSet::from([NliLabel::Entailment]));
    }

    fn brute_force_labels(z: Relation, k: usize) -> BTreeSet<NliLabel> {
        let mut out = BTreeSet::new();
        let mut stack = vec![(z, 0usize)];
        while let Some((s, depth)) = stack.pop() {
            out.insert(group(s));
            if depth < k {
                for a in ActionRelation::ALL {
                    stack.push((s.join(a.to_relation()), depth + 1));
                }
            }
        }
        out
    }

    #[test]
    fn reachable_forward_two_steps() {
        // ⊏ then any two actions: ⊏, #, | are the only states
        let expected = brute_force_labels(FWD, 2);
        assert_eq!(
            expected,
            BTreeSet::from([NliLabel::Entailment, NliLabel::Contradiction, NliLabel::Neutral])
        );
        assert_eq!(reachable(FWD, 2), expected);
        assert_eq!(
            reachable_states(FWD, 2),
            [FWD, ALT, IND].into_iter().collect::<RelationSet>()
        );
        assert_eq!(reachable(REV, 3), BTreeSet::from([NliLabel::Neutral]));
    }

    #[test]
    fn reachable_matches_brute_force_up_to_three() {
        for z in Relation::ALL {
            for k in 0..=3 {
                assert_eq!(reachable(z, k), brute_force_labels(z, k), "z={z} k={k}");
            }
        }
    }

    #[test]
    fn names_round_trip() {
        for r in Relation::ALL {
            assert_eq!(r.name().parse::<Relation>().unwrap(), r);
            let json = serde_json::to_string(&r).unwrap();
            assert_eq!(json, format!("\"{}\"", r.name()));
            assert_eq!(serde_json::from_str::<Relation>(&json).unwrap(), r);
        }
        for a in ActionRelation::ALL {
            assert_eq!(a.name().parse::<ActionRelation>().unwrap(), a);
            let json = serde_json::to_string(&a).unwrap();
            assert_eq!(json, format!("\"{}\"", a.name()));
            assert_eq!(serde_json::from_str::<ActionRelation>(&json).unwrap(), a);
        }
        for l in NliLabel::ALL {
            let json = serde_json::to_string(&l).unwrap();
            assert_eq!(serde_json::from_str::<NliLabel>(&json).unwrap(), l);
            assert_eq!(l.name().parse::<NliLabel>().unwrap(), l);
        }
        assert!("nope".parse::<Relation>().is_err());
    }

    fn any_relation() -> impl Strategy<Value = Relation> {
        (0usize..7).prop_map(|i| Relation::ALL[i])
    }

    proptest! {
        #[test]
        fn independence_is_absorbing_along_any_chain(
            z in any_relation(),
            chain in proptest::collection::vec(any_relation(), 0..6),
        ) {
            let mut s = z.join(IND);
            for r in chain {
                s = s.join(r);
                prop_assert_eq!(s, IND);
            }
        }

        #[test]
        fn target_label_agrees_with_grouping(r in any_relation()) {
            prop_assert!(Target::Label(group(r)).is_met_by(r));
            prop_assert!(Target::State(r).is_met_by(r));
        }
    }
}
