//! Prompt templates and their renderer.
//!
//! Templates use Python `str.format` conventions: `{name}` is a placeholder
//! and `{{` / `}}` are literal braces. Graph bindings are serialized the way
//! Python's `json.dumps` would print them (`", "` and `": "` separators).

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Baseline,
    Skeleton,
    VStructures,
    Meek,
    Hypothesis,
}

impl Stage {
    pub const PIPELINE: [Stage; 4] = [
        Stage::Skeleton,
        Stage::VStructures,
        Stage::Meek,
        Stage::Hypothesis,
    ];
    pub const ALL: [Stage; 5] = [
        Stage::Baseline,
        Stage::Skeleton,
        Stage::VStructures,
        Stage::Meek,
        Stage::Hypothesis,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Baseline => "baseline",
            Stage::Skeleton => "skeleton",
            Stage::VStructures => "v-structures",
            Stage::Meek => "meek",
            Stage::Hypothesis => "hypothesis",
        }
    }

    /// 1-based position in the four-stage pipeline; the baseline counts as
    /// the final (verdict) stage.
    pub fn number(self) -> usize {
        match self {
            Stage::Skeleton => 1,
            Stage::VStructures => 2,
            Stage::Meek => 3,
            Stage::Hypothesis | Stage::Baseline => 4,
        }
    }

    pub fn template(self) -> &'static PromptTemplate {
        &TEMPLATES[self as usize]
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s || st.as_str().replace('-', "_") == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub stage: Stage,
    pub text: &'static str,
}

static TEMPLATES: [PromptTemplate; 5] = [
    PromptTemplate {
        stage: Stage::Baseline,
        text: include_str!("../templates/baseline.txt"),
    },
    PromptTemplate {
        stage: Stage::Skeleton,
        text: include_str!("../templates/skeleton.txt"),
    },
    PromptTemplate {
        stage: Stage::VStructures,
        text: include_str!("../templates/v_structures.txt"),
    },
    PromptTemplate {
        stage: Stage::Meek,
        text: include_str!("../templates/meek.txt"),
    },
    PromptTemplate {
        stage: Stage::Hypothesis,
        text: include_str!("../templates/hypothesis.txt"),
    },
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("no binding for placeholder {{{0}}}")]
    Missing(String),
    #[error("unbalanced brace at byte {0}")]
    Unbalanced(usize),
}

enum Piece<'a> {
    Literal(&'a str),
    Placeholder(&'a str),
}

fn pieces(text: &str) -> Result<Vec<Piece<'_>>, RenderError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let (mut i, mut start) = (0, 0);
    while i < bytes.len() {
        match bytes[i] {
            b'{' | b'}' if bytes.get(i + 1) == Some(&bytes[i]) => {
                out.push(Piece::Literal(&text[start..=i]));
                i += 2;
                start = i;
            }
            b'{' => {
                let end = text[i..].find('}').ok_or(RenderError::Unbalanced(i))? + i;
                out.push(Piece::Literal(&text[start..i]));
                out.push(Piece::Placeholder(&text[i + 1..end]));
                i = end + 1;
                start = i;
            }
            b'}' => return Err(RenderError::Unbalanced(i)),
            _ => i += 1,
        }
    }
    out.push(Piece::Literal(&text[start..]));
    Ok(out)
}

impl PromptTemplate {
    /// Placeholder names in order of appearance.
    pub fn placeholders(&self) -> Vec<&'static str> {
        pieces(self.text)
            .expect("bundled templates are well formed")
            .into_iter()
            .filter_map(|p| match p {
                Piece::Placeholder(name) => Some(name),
                Piece::Literal(_) => None,
            })
            .collect()
    }

    /// Text up to the first placeholder, with escaped braces resolved.
    pub fn static_prefix(&self) -> String {
        let mut out = String::new();
        for p in pieces(self.text).expect("bundled templates are well formed") {
            match p {
                Piece::Literal(s) => out.push_str(s),
                Piece::Placeholder(_) => break,
            }
        }
        out
    }

    pub fn render(&self, bindings: &BTreeMap<&str, String>) -> Result<String, RenderError> {
        render_str(self.text, bindings)
    }
}

pub fn render_str(text: &str, bindings: &BTreeMap<&str, String>) -> Result<String, RenderError> {
    let mut out = String::with_capacity(text.len() + 256);
    for p in pieces(text)? {
        match p {
            Piece::Literal(s) => out.push_str(s),
            Piece::Placeholder(name) => {
                let v = bindings
                    .get(name)
                    .ok_or_else(|| RenderError::Missing(name.to_string()))?;
                out.push_str(v);
            }
        }
    }
    Ok(out)
}

/// Python `json.dumps`-style separators on a compact single line.
struct PyFormatter;

impl serde_json::ser::Formatter for PyFormatter {
    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        if first {
            Ok(())
        } else {
            w.write_all(b", ")
        }
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        if first {
            Ok(())
        } else {
            w.write_all(b", ")
        }
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        w.write_all(b": ")
    }
}

pub fn py_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, PyFormatter);
    value.serialize(&mut ser).expect("in-memory serialization");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}
