use std::collections::{BTreeMap, BTreeSet};

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::GraphError;
use crate::graph::{ordered_pair, CiStatement, Variable};

/// Structured premise: declared variables, correlated pairs and CI statements.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawFacts")]
pub struct PremiseFacts {
    variables: BTreeSet<Variable>,
    correlations: BTreeSet<(Variable, Variable)>,
    independencies: BTreeSet<CiStatement>,
}

#[derive(Deserialize)]
struct RawFacts {
    variables: BTreeSet<Variable>,
    #[serde(default)]
    correlations: Vec<(Variable, Variable)>,
    #[serde(default)]
    independencies: BTreeSet<CiStatement>,
}

impl TryFrom<RawFacts> for PremiseFacts {
    type Error = GraphError;

    fn try_from(r: RawFacts) -> Result<Self, Self::Error> {
        PremiseFacts::new(r.variables, r.correlations, r.independencies)
    }
}

impl PremiseFacts {
    /// Validates that every referenced variable is declared, pairs are
    /// distinct, and no pair is both correlated and marginally independent.
    pub fn new(
        variables: impl IntoIterator<Item = Variable>,
        correlations: impl IntoIterator<Item = (Variable, Variable)>,
        independencies: impl IntoIterator<Item = CiStatement>,
    ) -> Result<Self, GraphError> {
        let variables: BTreeSet<Variable> = variables.into_iter().collect();
        let declared = |v: &Variable| -> Result<(), GraphError> {
            if variables.contains(v) {
                Ok(())
            } else {
                Err(GraphError::UnknownVariable(v.to_string()))
            }
        };
        let mut corr = BTreeSet::new();
        for (a, b) in correlations {
            declared(&a)?;
            declared(&b)?;
            if a == b {
                return Err(GraphError::InvalidInput(format!(
                    "{a} correlates with itself"
                )));
            }
            corr.insert(ordered_pair(a, b));
        }
        let independencies: BTreeSet<CiStatement> = independencies.into_iter().collect();
        for s in &independencies {
            for v in s.variables() {
                declared(v)?;
            }
            if s.is_marginal() && corr.contains(&(s.x().clone(), s.y().clone())) {
                return Err(GraphError::InvalidInput(format!(
                    "{} and {} are stated both correlated and independent",
                    s.x(),
                    s.y()
                )));
            }
        }
        Ok(PremiseFacts {
            variables,
            correlations: corr,
            independencies,
        })
    }

    /// The premise a faithful DAG with statements `ci` would produce: every
    /// pair without a marginal independence is correlated.
    pub fn from_ci_set(
        variables: impl IntoIterator<Item = Variable>,
        ci: &BTreeSet<CiStatement>,
    ) -> Result<Self, GraphError> {
        let variables: BTreeSet<Variable> = variables.into_iter().collect();
        let vs: Vec<&Variable> = variables.iter().collect();
        let mut corr = Vec::new();
        for (i, a) in vs.iter().enumerate() {
            for b in &vs[i + 1..] {
                let marginal = ci
                    .iter()
                    .any(|s| s.is_marginal() && s.x() == *a && s.y() == *b);
                if !marginal {
                    corr.push(((*a).clone(), (*b).clone()));
                }
            }
        }
        Self::new(variables, corr, ci.iter().cloned())
    }

    pub fn variables(&self) -> &BTreeSet<Variable> {
        &self.variables
    }

    pub fn correlations(&self) -> &BTreeSet<(Variable, Variable)> {
        &self.correlations
    }

    pub fn independencies(&self) -> &BTreeSet<CiStatement> {
        &self.independencies
    }

    pub fn is_correlated(&self, a: &Variable, b: &Variable) -> bool {
        self.correlations
            .contains(&ordered_pair(a.clone(), b.clone()))
    }

    /// Number of CI statements about each pair that has at least one.
    pub fn statements_per_pair(&self) -> BTreeMap<(Variable, Variable), Vec<&CiStatement>> {
        let mut out: BTreeMap<(Variable, Variable), Vec<&CiStatement>> = BTreeMap::new();
        for s in &self.independencies {
            out.entry((s.x().clone(), s.y().clone()))
                .or_default()
                .push(s);
        }
        out
    }
}

/// Every separating set recorded per non-adjacent pair, keyed by `(x, y)` with `x < y`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct SeparationSets {
    sets: BTreeMap<(Variable, Variable), Vec<BTreeSet<Variable>>>,
}

impl SeparationSets {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `given` for the pair; duplicates are ignored and the list stays sorted.
    pub fn insert(
        &mut self,
        a: Variable,
        b: Variable,
        given: BTreeSet<Variable>,
    ) -> Result<(), GraphError> {
        if a == b || given.contains(&a) || given.contains(&b) {
            return Err(GraphError::InvalidInput(format!(
                "invalid separating set for {a}, {b}"
            )));
        }
        let list = self.sets.entry(ordered_pair(a, b)).or_default();
        if let Err(pos) = list.binary_search(&given) {
            list.insert(pos, given);
        }
        Ok(())
    }

    pub fn get(&self, a: &Variable, b: &Variable) -> Option<&[BTreeSet<Variable>]> {
        self.sets
            .get(&ordered_pair(a.clone(), b.clone()))
            .map(Vec::as_slice)
    }

    pub fn contains_pair(&self, a: &Variable, b: &Variable) -> bool {
        self.get(a, b).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(Variable, Variable), &Vec<BTreeSet<Variable>>)> {
        self.sets.iter()
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }
}

impl Serialize for SeparationSets {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut m = serializer.serialize_map(Some(self.sets.len()))?;
        for ((a, b), sets) in &self.sets {
            m.serialize_entry(&format!("{a},{b}"), sets)?;
        }
        m.end()
    }
}
