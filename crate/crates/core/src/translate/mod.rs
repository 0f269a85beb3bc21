//! Prompt templates and per-strategy output parsing. The merge in [`text`]
//! turns a title plus a parsed description into classifier input.

mod json;
mod schema;
pub mod templates;
pub mod text;

use std::fmt;

use serde_json::Value;

use crate::model::StrategyKind;

pub use json::extract_json_object;
pub use schema::{
    canonical_id, AnalysisBlock, AnalysisSummary, ElementInconsistency, Finding, GraphObject,
    InconsistencyReport, ManipulationSummary, MetadataAnalysis, MetadataFlags, ObjectList,
    PrimarySubject, QualityFactors, RelationalGraph, Relationship, SceneElement, SceneGraphDoc,
    SceneRelation, TwoSentenceDescription,
};
pub use templates::{render_prompt, PromptTemplate, PROMPT_VERSION};
pub use text::{clean_title, count_sentences, merge, split_sentences, TitleError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Location {
    /// Byte offset into the raw response.
    Offset(usize),
    /// JSON path such as `$.relationships[2].confidence`.
    Path(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub location: Location,
    pub reason: String,
}

impl ParseError {
    pub fn at_offset(offset: usize, reason: impl Into<String>) -> Self {
        Self {
            location: Location::Offset(offset),
            reason: reason.into(),
        }
    }

    pub fn at_path(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            location: Location::Path(path.into()),
            reason: reason.into(),
        }
    }

    pub(crate) fn shifted(mut self, by: usize) -> Self {
        if let Location::Offset(o) = &mut self.location {
            *o += by;
        }
        self
    }

    pub fn offset(&self) -> Option<usize> {
        match self.location {
            Location::Offset(o) => Some(o),
            Location::Path(_) => None,
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.location {
            Location::Offset(o) => write!(f, "{} (at byte {o})", self.reason),
            Location::Path(p) => write!(f, "{} (at {p})", self.reason),
        }
    }
}

/// The typed result of parsing one strategy's output.
#[derive(Debug, Clone, PartialEq)]
pub enum ParsedOutput {
    ObjectList(ObjectList),
    SimpleDescription(TwoSentenceDescription),
    StructuredDescription(TwoSentenceDescription),
    RelationalMapping(RelationalGraph),
    InconsistencyDetection(InconsistencyReport),
    SceneGraph(SceneGraphDoc),
}

impl ParsedOutput {
    pub fn strategy(&self) -> StrategyKind {
        match self {
            ParsedOutput::ObjectList(_) => StrategyKind::ListOfObjects,
            ParsedOutput::SimpleDescription(_) => StrategyKind::SimpleDescription,
            ParsedOutput::StructuredDescription(_) => StrategyKind::StructuredDescription,
            ParsedOutput::RelationalMapping(_) => StrategyKind::RelationalMapping,
            ParsedOutput::InconsistencyDetection(_) => StrategyKind::InconsistencyDetection,
            ParsedOutput::SceneGraph(_) => StrategyKind::SceneGraph,
        }
    }

    /// Structured JSON form, as stored in the dataset `parsed` field.
    pub fn to_value(&self) -> Value {
        let v = match self {
            ParsedOutput::ObjectList(l) => serde_json::to_value(l),
            ParsedOutput::SimpleDescription(d) | ParsedOutput::StructuredDescription(d) => {
                serde_json::to_value(d)
            }
            ParsedOutput::RelationalMapping(g) => serde_json::to_value(g),
            ParsedOutput::InconsistencyDetection(r) => Ok(r.to_value()),
            ParsedOutput::SceneGraph(s) => serde_json::to_value(s),
        };
        v.expect("parsed outputs always serialize")
    }

    /// Inverse of [`ParsedOutput::to_value`]; re-validates every invariant.
    pub fn from_value(strategy: StrategyKind, value: &Value) -> Result<Self, ParseError> {
        Ok(match strategy {
            StrategyKind::ListOfObjects => ParsedOutput::ObjectList(ObjectList::from_value(value)?),
            StrategyKind::SimpleDescription => {
                ParsedOutput::SimpleDescription(TwoSentenceDescription::from_value(value)?)
            }
            StrategyKind::StructuredDescription => {
                ParsedOutput::StructuredDescription(TwoSentenceDescription::from_value(value)?)
            }
            StrategyKind::RelationalMapping => {
                ParsedOutput::RelationalMapping(RelationalGraph::from_value(value)?)
            }
            StrategyKind::InconsistencyDetection => {
                ParsedOutput::InconsistencyDetection(InconsistencyReport::from_value(value)?)
            }
            StrategyKind::SceneGraph => ParsedOutput::SceneGraph(SceneGraphDoc::from_value(value)?),
        })
    }
}

/// Parses a raw model response for `strategy`.
///
/// JSON strategies tolerate code fences and surrounding prose; the first
/// balanced top-level object is taken. Never panics on any input.
pub fn parse_output(strategy: StrategyKind, raw: &str) -> Result<ParsedOutput, ParseError> {
    if raw.trim().is_empty() {
        return Err(ParseError::at_offset(0, "empty response"));
    }
    match strategy {
        StrategyKind::ListOfObjects => ObjectList::parse(raw).map(ParsedOutput::ObjectList),
        StrategyKind::SimpleDescription => {
            TwoSentenceDescription::parse(raw).map(ParsedOutput::SimpleDescription)
        }
        StrategyKind::StructuredDescription => {
            TwoSentenceDescription::parse(raw).map(ParsedOutput::StructuredDescription)
        }
        json_strategy => {
            let value = extract_json_object(raw)?;
            ParsedOutput::from_value(json_strategy, &value)
        }
    }
}

/// Compact JSON with object keys sorted at every level.
pub fn canonical_json(value: &Value) -> String {
    fn sorted(v: &Value) -> Value {
        match v {
            Value::Object(m) => {
                let mut entries: Vec<_> = m.iter().collect();
                entries.sort_by(|a, b| a.0.cmp(b.0));
                Value::Object(entries.into_iter().map(|(k, v)| (k.clone(), sorted(v))).collect())
            }
            Value::Array(a) => Value::Array(a.iter().map(sorted).collect()),
            other => other.clone(),
        }
    }
    sorted(value).to_string()
}

/// Flattens a parsed output into the description text (T_desc).
pub fn to_description_text(parsed: &ParsedOutput) -> String {
    match parsed {
        ParsedOutput::ObjectList(l) => l.items().join(", "),
        ParsedOutput::SimpleDescription(d) | ParsedOutput::StructuredDescription(d) => d.text(),
        json => canonical_json(&json.to_value()),
    }
}

/// Natural-language content of a parsed output: the description itself for
/// text strategies, and every string leaf (keys excluded) for JSON strategies,
/// each closed as its own sentence.
pub fn content_text(parsed: &ParsedOutput) -> String {
    match parsed {
        ParsedOutput::ObjectList(l) => l.items().join(", "),
        ParsedOutput::SimpleDescription(d) | ParsedOutput::StructuredDescription(d) => d.text(),
        json => {
            let value = json.to_value();
            let mut leaves = Vec::new();
            collect_strings(&value, &mut leaves);
            leaves
                .into_iter()
                .map(str::trim)
                .filter(|s| s.chars().any(char::is_alphanumeric))
                .map(|s| {
                    if s.ends_with(['.', '!', '?']) {
                        s.to_string()
                    } else {
                        format!("{s}.")
                    }
                })
                .collect::<Vec<_>>()
                .join(" ")
        }
    }
}

/// Depth-first in canonical (sorted-key) order so output is deterministic.
fn collect_strings<'a>(v: &'a Value, out: &mut Vec<&'a str>) {
    match v {
        Value::String(s) => out.push(s),
        Value::Array(a) => a.iter().for_each(|x| collect_strings(x, out)),
        Value::Object(m) => {
            let mut keys: Vec<_> = m.keys().collect();
            keys.sort();
            for k in keys {
                // Object ids are identifiers, not content.
                if k != "id" && k != "subject_id" && k != "object_id" {
                    collect_strings(&m[k], out);
                }
            }
        }
        _ => {}
    }
}
