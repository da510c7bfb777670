//! Projectivity: how a quantifier or connective remaps the relation of a
//! substituted argument.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;
use crate::relation::Relation::{self, *};

/// A primitive projectivity signature, one row of the projection table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Monotonicity {
    UpwardDefault,
    AllArg1,
    AllArg2,
    SomeArg1,
    SomeArg2,
    Not,
}

impl Monotonicity {
    pub const ALL: [Monotonicity; 6] = [
        Monotonicity::UpwardDefault,
        Monotonicity::AllArg1,
        Monotonicity::AllArg2,
        Monotonicity::SomeArg1,
        Monotonicity::SomeArg2,
        Monotonicity::Not,
    ];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Monotonicity::UpwardDefault => "upward-default",
            Monotonicity::AllArg1 => "all-arg1",
            Monotonicity::AllArg2 => "all-arg2",
            Monotonicity::SomeArg1 => "some-arg1",
            Monotonicity::SomeArg2 => "some-arg2",
            Monotonicity::Not => "not",
        }
    }

    /// Images of `Relation::ALL` in order.
    pub fn table(self) -> [Relation; 7] {
        match self {
            Monotonicity::UpwardDefault => Relation::ALL,
            Monotonicity::AllArg1 => [
                Equivalence,
                ReverseEntailment,
                ForwardEntailment,
                Alternation,
                Independence,
                Alternation,
                Independence,
            ],
            Monotonicity::AllArg2 => [
                Equivalence,
                ForwardEntailment,
                ReverseEntailment,
                Alternation,
                Alternation,
                Independence,
                Independence,
            ],
            Monotonicity::SomeArg1 | Monotonicity::SomeArg2 => [
                Equivalence,
                ForwardEntailment,
                ReverseEntailment,
                Cover,
                Independence,
                Cover,
                Independence,
            ],
            Monotonicity::Not => [
                Equivalence,
                ReverseEntailment,
                ForwardEntailment,
                Negation,
                Cover,
                Alternation,
                Independence,
            ],
        }
    }

    pub fn apply(self, r: Relation) -> Relation {
        self.table()[r.index()]
    }
}

impl FromStr for Monotonicity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Monotonicity::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown projectivity `{s}`")))
    }
}

/// The projection in force for one chunk.
///
/// Nested triggers compose: `layers` lists signatures from the outermost
/// trigger inwards, and the innermost is applied to the relation first. An
/// empty layer list is the upward (identity) context.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct ProjectivityContext {
    layers: Vec<Monotonicity>,
}

impl ProjectivityContext {
    pub fn upward() -> Self {
        Self::default()
    }

    pub fn single(m: Monotonicity) -> Self {
        Self::from_layers(vec![m])
    }

    /// Upward layers are identities and are dropped.
    pub fn from_layers(layers: Vec<Monotonicity>) -> Self {
        let layers = layers
            .into_iter()
            .filter(|m| *m != Monotonicity::UpwardDefault)
            .collect();
        ProjectivityContext { layers }
    }

    /// Wraps `self` inside an outer trigger.
    pub fn within(&self, outer: Monotonicity) -> Self {
        let mut layers = Vec::with_capacity(self.layers.len() + 1);
        layers.push(outer);
        layers.extend_from_slice(&self.layers);
        Self::from_layers(layers)
    }

    pub fn layers(&self) -> &[Monotonicity] {
        &self.layers
    }

    pub fn is_upward(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn project(&self, r: Relation) -> Relation {
        self.layers.iter().rev().fold(r, |acc, m| m.apply(acc))
    }

    /// The full `Relation → Relation` map.
    pub fn table(&self) -> [Relation; 7] {
        Relation::ALL.map(|r| self.project(r))
    }

    pub fn name(&self) -> String {
        if self.layers.is_empty() {
            Monotonicity::UpwardDefault.name().to_string()
        } else {
            self.layers.iter().map(|m| m.name()).collect::<Vec<_>>().join("+")
        }
    }
}

impl From<Monotonicity> for ProjectivityContext {
    fn from(m: Monotonicity) -> Self {
        ProjectivityContext::single(m)
    }
}

impl fmt::Display for ProjectivityContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for ProjectivityContext {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let layers = s
            .split('+')
            .map(str::parse)
            .collect::<Result<Vec<Monotonicity>, _>>()?;
        Ok(ProjectivityContext::from_layers(layers))
    }
}

impl Serialize for ProjectivityContext {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for ProjectivityContext {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn project(ctx: &ProjectivityContext, r: Relation) -> Relation {
    ctx.project(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let not = ProjectivityContext::single(Monotonicity::Not);
        assert_eq!(not.project(ForwardEntailment), ReverseEntailment);
        let all1 = ProjectivityContext::single(Monotonicity::AllArg1);
        assert_eq!(all1.project(ForwardEntailment), ReverseEntailment);
        assert_eq!(ProjectivityContext::upward().project(Negation), Negation);
    }

    #[test]
    fn upward_is_identity() {
        for r in Relation::ALL {
            assert_eq!(ProjectivityContext::upward().project(r), r);
            assert_eq!(Monotonicity::UpwardDefault.apply(r), r);
        }
    }

    #[test]
    fn double_negation_cancels() {
        let ctx = ProjectivityContext::from_layers(vec![Monotonicity::Not, Monotonicity::Not]);
        assert_eq!(ctx.table(), Relation::ALL);
    }

    #[test]
    fn composition_applies_innermost_first() {
        // "not all X ..." : the restrictor sees all-arg1, then not
        let ctx = ProjectivityContext::single(Monotonicity::AllArg1).within(Monotonicity::Not);
        assert_eq!(ctx.name(), "not+all-arg1");
        assert_eq!(ctx.project(ForwardEntailment), ForwardEntailment);
        // all-arg1(|) = #, and not(#) = #
        assert_eq!(ctx.project(Alternation), Independence);
        let ctx2 = ProjectivityContext::single(Monotonicity::AllArg2).within(Monotonicity::Not);
        assert_eq!(ctx2.project(ForwardEntailment), ReverseEntailment);
        // all-arg2(|) = |, not(|) = ⌣
        assert_eq!(ctx2.project(Alternation), Cover);
    }

    #[test]
    fn names_round_trip() {
        for m in Monotonicity::ALL {
            let ctx = ProjectivityContext::single(m);
            assert_eq!(ctx.name().parse::<ProjectivityContext>().unwrap(), ctx);
        }
        let nested: ProjectivityContext = "not+some-arg2".parse().unwrap();
        assert_eq!(nested.layers(), &[Monotonicity::Not, Monotonicity::SomeArg2]);
        let json = serde_json::to_string(&nested).unwrap();
        assert_eq!(json, "\"not+some-arg2\"");
        assert_eq!(serde_json::from_str::<ProjectivityContext>(&json).unwrap(), nested);
        assert!("sideways".parse::<ProjectivityContext>().is_err());
    }
}
