use std::borrow::Borrow;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::GraphError;

/// A named random variable, e.g. `A` or `X2`.
///
/// Names start with an ASCII uppercase letter followed by ASCII letters,
/// digits or underscores. Variables are totally ordered by name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Variable(String);

impl Variable {
    pub fn new(name: impl Into<String>) -> Result<Self, GraphError> {
        let name = name.into();
        if is_identifier(&name) {
            Ok(Variable(name))
        } else {
            Err(GraphError::InvalidVariable(name))
        }
    }

    pub fn name(&self) -> &str {
        &self.0
    }

    /// The first `n` letters of the alphabet, `A`, `B`, ...
    pub fn letters(n: usize) -> Result<Vec<Variable>, GraphError> {
        if n > 26 {
            return Err(GraphError::TooManyNodes(n));
        }
        Ok((0..n as u8)
            .map(|i| Variable(((b'A' + i) as char).to_string()))
            .collect())
    }
}

/// True if `s` is a valid variable name.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_uppercase() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for Variable {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variable::new(s)
    }
}

impl TryFrom<String> for Variable {
    type Error = GraphError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Variable::new(s)
    }
}

impl TryFrom<&str> for Variable {
    type Error = GraphError;

    fn try_from(s: &str) -> Result<Self, Self::Error> {
        Variable::new(s)
    }
}

impl From<Variable> for String {
    fn from(v: Variable) -> String {
        v.0
    }
}

impl Borrow<str> for Variable {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl AsRef<str> for Variable {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Shorthand for building variables in tests and examples. Panics on invalid names.
pub fn var(name: &str) -> Variable {
    Variable::new(name).expect("valid variable name")
}

/// Orders a pair so that the smaller variable comes first.
pub fn ordered_pair(a: Variable, b: Variable) -> (Variable, Variable) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}
