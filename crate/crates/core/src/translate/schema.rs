//! Typed structures for each strategy's output, and validation from JSON.

use std::collections::HashSet;

use serde::Serialize;
use serde_json::{Map, Value};

use super::ParseError;

/// A cursor into a JSON value that remembers its path for error messages.
#[derive(Clone)]
struct Node<'a> {
    value: &'a Value,
    path: String,
}

impl<'a> Node<'a> {
    fn err(&self, reason: impl Into<String>) -> ParseError {
        ParseError::at_path(self.path.clone(), reason)
    }

    fn object(&self) -> Result<&'a Map<String, Value>, ParseError> {
        self.value
            .as_object()
            .ok_or_else(|| self.err(format!("expected object, got {}", kind(self.value))))
    }

    fn field(&self, key: &str) -> Result<Node<'a>, ParseError> {
        let obj = self.object()?;
        let value = obj
            .get(key)
            .filter(|v| !v.is_null())
            .ok_or_else(|| self.err(format!("missing field: {key}")))?;
        Ok(Node {
            value,
            path: format!("{}.{key}", self.path),
        })
    }

    fn opt_field(&self, key: &str) -> Result<Option<Node<'a>>, ParseError> {
        Ok(self
            .object()?
            .get(key)
            .filter(|v| !v.is_null())
            .map(|value| Node {
                value,
                path: format!("{}.{key}", self.path),
            }))
    }

    fn string(&self) -> Result<String, ParseError> {
        self.value
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| self.err(format!("expected string, got {}", kind(self.value))))
    }

    fn nonempty_string(&self) -> Result<String, ParseError> {
        let s = self.string()?;
        if s.trim().is_empty() {
            return Err(self.err("empty string"));
        }
        Ok(s)
    }

    /// Object ids: strings or numbers, canonicalized so "1" and 1 agree.
    fn id(&self) -> Result<String, ParseError> {
        let raw = match self.value {
            Value::String(s) => s.trim().to_string(),
            Value::Number(n) => n.to_string(),
            other => return Err(self.err(format!("expected id, got {}", kind(other)))),
        };
        if raw.is_empty() {
            return Err(self.err("empty id"));
        }
        Ok(canonical_id(&raw))
    }

    /// A score in [0, 1]; numeric strings are accepted.
    fn score(&self) -> Result<f64, ParseError> {
        let x = match self.value {
            Value::Number(n) => n.as_f64(),
            Value::String(s) => s.trim().parse::<f64>().ok(),
            _ => None,
        }
        .ok_or_else(|| self.err(format!("expected number, got {}", kind(self.value))))?;
        if !x.is_finite() || !(0.0..=1.0).contains(&x) {
            return Err(self.err(format!("out-of-range confidence: {x}")));
        }
        Ok(x)
    }

    fn boolean(&self) -> Result<bool, ParseError> {
        match self.value {
            Value::Bool(b) => Ok(*b),
            Value::String(s) if s.eq_ignore_ascii_case("true") => Ok(true),
            Value::String(s) if s.eq_ignore_ascii_case("false") => Ok(false),
            other => Err(self.err(format!("expected boolean, got {}", kind(other)))),
        }
    }

    fn array(&self) -> Result<Vec<Node<'a>>, ParseError> {
        let items = self
            .value
            .as_array()
            .ok_or_else(|| self.err(format!("expected array, got {}", kind(self.value))))?;
        Ok(items
            .iter()
            .enumerate()
            .map(|(i, value)| Node {
                value,
                path: format!("{}[{i}]", self.path),
            })
            .collect())
    }

    /// Missing or null lists read as empty.
    fn list(&self, key: &str) -> Result<Vec<Node<'a>>, ParseError> {
        match self.opt_field(key)? {
            Some(f) => f.array(),
            None => Ok(Vec::new()),
        }
    }

    fn string_list(&self, key: &str) -> Result<Vec<String>, ParseError> {
        self.list(key)?.iter().map(|n| n.string()).collect()
    }

    fn value_list(&self, key: &str) -> Result<Vec<Value>, ParseError> {
        Ok(self.list(key)?.into_iter().map(|n| n.value.clone()).collect())
    }

    fn opt_string(&self, key: &str) -> Result<String, ParseError> {
        match self.opt_field(key)? {
            Some(f) => f.string(),
            None => Ok(String::new()),
        }
    }

    fn req_string(&self, key: &str) -> Result<String, ParseError> {
        self.field(key)?.string()
    }

    fn req_score(&self, key: &str) -> Result<f64, ParseError> {
        self.field(key)?.score()
    }
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

/// "01", "1", "1.0" and 1 all canonicalize to "1".
pub fn canonical_id(raw: &str) -> String {
    if let Ok(n) = raw.parse::<i64>() {
        return n.to_string();
    }
    match raw.parse::<f64>() {
        Ok(x) if x.is_finite() && x.fract() == 0.0 && x.abs() < 9.0e15 => (x as i64).to_string(),
        _ => raw.to_string(),
    }
}

fn root(value: &Value) -> Node<'_> {
    Node { value, path: "$".into() }
}

// ---------------------------------------------------------------------------
// List of objects

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ObjectList {
    items: Vec<String>,
}

impl ObjectList {
    /// Items are trimmed; empty items are rejected.
    pub fn new(items: Vec<String>) -> Result<Self, ParseError> {
        let items: Vec<String> = items.into_iter().map(|s| s.trim().to_string()).collect();
        if let Some(i) = items.iter().position(String::is_empty) {
            return Err(ParseError::at_path(format!("$.items[{i}]"), "empty object name"));
        }
        Ok(Self { items })
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Splits on commas and newlines that are not inside double quotes.
    pub fn parse(raw: &str) -> Result<Self, ParseError> {
        let mut items = Vec::new();
        let mut current = String::new();
        let mut in_quotes = false;
        for c in raw.chars() {
            match c {
                '"' | '\u{201C}' | '\u{201D}' => {
                    in_quotes = !in_quotes;
                    current.push(c);
                }
                ',' | '\n' | '\r' if !in_quotes => items.push(std::mem::take(&mut current)),
                _ => current.push(c),
            }
        }
        items.push(current);
        let items: Vec<String> = items
            .into_iter()
            .map(|s| clean_item(&s))
            .filter(|s| !s.is_empty())
            .collect();
        if items.is_empty() {
            return Err(ParseError::at_offset(0, "no objects found"));
        }
        Self::new(items)
    }

    pub(crate) fn from_value(value: &Value) -> Result<Self, ParseError> {
        let node = root(value);
        let items = node
            .field("items")?
            .array()?
            .iter()
            .map(|n| n.nonempty_string())
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(items)
    }
}

/// Strips list bullets and code-fence markers.
fn clean_item(s: &str) -> String {
    let s = s.trim();
    if s.starts_with("```") {
        return String::new();
    }
    let s = s.trim_start_matches(['-', '*', '\u{2022}']).trim();
    s.trim_end_matches('.').trim().to_string()
}

// ---------------------------------------------------------------------------
// Two-sentence descriptions

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TwoSentenceDescription {
    pub sentence1: String,
    /// Empty only when the source had a single sentence (`strict` is false).
    pub sentence2: String,
    pub strict: bool,
}

impl TwoSentenceDescription {
    /// Extra sentences beyond the second are folded into `sentence2`.
    pub fn parse(raw: &str) -> Result<Self, ParseError> {
        let sentences = super::text::split_sentences(raw);
        match sentences.len() {
            0 => Err(ParseError::at_offset(0, "zero sentences")),
            1 => Ok(Self {
                sentence1: sentences[0].clone(),
                sentence2: String::new(),
                strict: false,
            }),
            n => Ok(Self {
                sentence1: sentences[0].clone(),
                sentence2: sentences[1..].join(" "),
                strict: n == 2,
            }),
        }
    }

    pub(crate) fn from_value(value: &Value) -> Result<Self, ParseError> {
        let node = root(value);
        let sentence1 = node.field("sentence1")?.nonempty_string()?;
        let sentence2 = node.req_string("sentence2")?;
        let strict = node.field("strict")?.boolean()?;
        if strict && sentence2.trim().is_empty() {
            return Err(ParseError::at_path("$.sentence2", "empty string"));
        }
        Ok(Self {
            sentence1,
            sentence2,
            strict,
        })
    }

    pub fn text(&self) -> String {
        if self.sentence2.is_empty() {
            self.sentence1.clone()
        } else {
            format!("{} {}", self.sentence1, self.sentence2)
        }
    }
}

// ---------------------------------------------------------------------------
// Relational mapping

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphObject {
    pub id: String,
    pub name: String,
    pub location: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Relationship {
    pub subject_id: String,
    pub relation: String,
    pub object_id: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationalGraph {
    pub objects: Vec<GraphObject>,
    pub relationships: Vec<Relationship>,
}

impl RelationalGraph {
    pub(crate) fn from_value(value: &Value) -> Result<Self, ParseError> {
        let node = root(value);
        let mut objects = Vec::new();
        let mut ids = HashSet::new();
        for o in node.list("objects")? {
            let id_node = o.field("id")?;
            let id = id_node.id()?;
            if !ids.insert(id.clone()) {
                return Err(id_node.err(format!("duplicate id: {id}")));
            }
            objects.push(GraphObject {
                id,
                name: o.field("name")?.nonempty_string()?,
                location: o.opt_string("location")?,
            });
        }

        let mut relationships = Vec::new();
        for r in node.list("relationships")? {
            let endpoint = |key: &str| -> Result<String, ParseError> {
                let f = r.field(key)?;
                let id = f.id()?;
                if !ids.contains(&id) {
                    return Err(f.err(format!("dangling id: {id}")));
                }
                Ok(id)
            };
            let subject_id = endpoint("subject_id")?;
            let object_id = endpoint("object_id")?;
            relationships.push(Relationship {
                subject_id,
                relation: r.field("relation")?.nonempty_string()?,
                object_id,
                confidence: r.req_score("confidence")?,
            });
        }
        Ok(Self {
            objects,
            relationships,
        })
    }
}

// ---------------------------------------------------------------------------
// Inconsistency detection

/// One anomaly. Which optional fields are present depends on the block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub object: Option<String>,
    pub description: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_to: Option<String>,
    pub confidence: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub affected_objects: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisBlock {
    pub findings: Vec<Finding>,
    /// Overall coherence or edge quality in [0, 1].
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetadataFlags {
    pub jpeg_artifacts: bool,
    pub compression_inconsistencies: bool,
    pub noise_patterns: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManipulationSummary {
    pub manipulation_likelihood: f64,
    pub most_suspicious_elements: Vec<String>,
    pub overall_assessment: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InconsistencyReport {
    pub lighting: AnalysisBlock,
    pub perspective: AnalysisBlock,
    pub boundary: AnalysisBlock,
    pub resolution: AnalysisBlock,
    pub metadata: MetadataFlags,
    pub summary: ManipulationSummary,
}

/// (block key, findings key, score key)
const BLOCK_KEYS: [(&str, &str, &str); 4] = [
    ("lighting_analysis", "inconsistencies", "overall_lighting_coherence"),
    ("perspective_analysis", "inconsistencies", "overall_perspective_coherence"),
    ("boundary_analysis", "suspicious_edges", "overall_edge_quality"),
    ("resolution_analysis", "inconsistencies", "overall_resolution_coherence"),
];

impl InconsistencyReport {
    pub fn blocks(&self) -> [&AnalysisBlock; 4] {
        [&self.lighting, &self.perspective, &self.boundary, &self.resolution]
    }

    pub(crate) fn from_value(value: &Value) -> Result<Self, ParseError> {
        let node = root(value);
        let mut blocks = Vec::with_capacity(4);
        for (block_key, list_key, score_key) in BLOCK_KEYS {
            let block = node.field(block_key)?;
            let findings = block
                .list(list_key)?
                .iter()
                .map(parse_finding)
                .collect::<Result<Vec<_>, _>>()?;
            blocks.push(AnalysisBlock {
                findings,
                score: block.req_score(score_key)?,
            });
        }
        let [lighting, perspective, boundary, resolution]: [AnalysisBlock; 4] =
            blocks.try_into().expect("four blocks");

        let meta = node.field("metadata_analysis")?;
        let metadata = MetadataFlags {
            jpeg_artifacts: meta.field("jpeg_artifacts")?.boolean()?,
            compression_inconsistencies: meta.field("compression_inconsistencies")?.boolean()?,
            noise_patterns: meta.value_list("noise_patterns")?,
        };

        let summary = node.field("summary")?;
        let summary = ManipulationSummary {
            manipulation_likelihood: summary.req_score("manipulation_likelihood")?,
            most_suspicious_elements: summary.string_list("most_suspicious_elements")?,
            overall_assessment: summary.opt_string("overall_assessment")?,
        };

        Ok(Self {
            lighting,
            perspective,
            boundary,
            resolution,
            metadata,
            summary,
        })
    }

    pub(crate) fn to_value(&self) -> Value {
        let mut root = Map::new();
        for ((block_key, list_key, score_key), block) in BLOCK_KEYS.iter().zip(self.blocks()) {
            let mut b = Map::new();
            b.insert(
                (*list_key).into(),
                serde_json::to_value(&block.findings).expect("findings serialize"),
            );
            b.insert((*score_key).into(), Value::from(block.score));
            root.insert((*block_key).into(), Value::Object(b));
        }
        root.insert(
            "metadata_analysis".into(),
            serde_json::to_value(&self.metadata).expect("metadata serialize"),
        );
        root.insert(
            "summary".into(),
            serde_json::to_value(&self.summary).expect("summary serialize"),
        );
        Value::Object(root)
    }
}

fn parse_finding(node: &Node<'_>) -> Result<Finding, ParseError> {
    let opt = |key: &str| -> Result<Option<String>, ParseError> {
        node.opt_field(key)?.map(|f| f.string()).transpose()
    };
    let affected_objects = match node.opt_field("affected_objects")? {
        Some(_) => Some(node.string_list("affected_objects")?),
        None => None,
    };
    Ok(Finding {
        object: opt("object")?,
        description: node.opt_string("description")?,
        location: opt("location")?,
        relative_to: opt("relative_to")?,
        confidence: node.req_score("confidence")?,
        affected_objects,
    })
}

// ---------------------------------------------------------------------------
// Scene graph

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrimarySubject {
    pub description: String,
    pub confidence: f64,
    pub typical_context: bool,
    pub context_notes: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneRelation {
    pub related_to: String,
    pub relationship_type: String,
    pub confidence: f64,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElementInconsistency {
    #[serde(rename = "type")]
    pub kind: String,
    pub description: String,
    pub severity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneElement {
    pub object: String,
    pub location: String,
    pub confidence: f64,
    pub relationships: Vec<SceneRelation>,
    pub inconsistencies: Vec<ElementInconsistency>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityFactors {
    pub resolution: f64,
    pub clarity: f64,
    pub lighting: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetadataAnalysis {
    pub image_quality: f64,
    pub quality_factors: QualityFactors,
    pub potential_manipulations: Vec<Value>,
    pub technical_artifacts: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisSummary {
    pub scene_complexity: f64,
    pub manipulation_likelihood: f64,
    pub overall_consistency: f64,
    pub key_observations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneGraphDoc {
    pub primary_subject: PrimarySubject,
    pub scene_elements: Vec<SceneElement>,
    pub metadata_analysis: MetadataAnalysis,
    pub analysis_summary: AnalysisSummary,
}

impl SceneGraphDoc {
    /// Relationship targets that name no scene element (case-insensitive).
    pub fn dangling_relations(&self) -> Vec<&str> {
        let names: HashSet<String> = self
            .scene_elements
            .iter()
            .map(|e| e.object.trim().to_lowercase())
            .collect();
        self.scene_elements
            .iter()
            .flat_map(|e| &e.relationships)
            .map(|r| r.related_to.as_str())
            .filter(|name| !names.contains(&name.trim().to_lowercase()))
            .collect()
    }

    pub(crate) fn from_value(value: &Value) -> Result<Self, ParseError> {
        let node = root(value);

        let ps = node.field("primary_subject")?;
        let primary_subject = PrimarySubject {
            description: ps.opt_string("description")?,
            confidence: ps.req_score("confidence")?,
            typical_context: ps.field("typical_context")?.boolean()?,
            context_notes: ps.opt_string("context_notes")?,
        };

        let mut scene_elements = Vec::new();
        for el in node.list("scene_elements")? {
            let relationships = el
                .list("relationships")?
                .iter()
                .map(|r| {
                    Ok(SceneRelation {
                        related_to: r.field("related_to")?.nonempty_string()?,
                        relationship_type: r.field("relationship_type")?.nonempty_string()?,
                        confidence: r.req_score("confidence")?,
                        description: r.opt_string("description")?,
                    })
                })
                .collect::<Result<Vec<_>, ParseError>>()?;
            let inconsistencies = el
                .list("inconsistencies")?
                .iter()
                .map(|i| {
                    Ok(ElementInconsistency {
                        kind: i.opt_string("type")?,
                        description: i.opt_string("description")?,
                        severity: i.req_score("severity")?,
                    })
                })
                .collect::<Result<Vec<_>, ParseError>>()?;
            scene_elements.push(SceneElement {
                object: el.field("object")?.nonempty_string()?,
                location: el.opt_string("location")?,
                confidence: el.req_score("confidence")?,
                relationships,
                inconsistencies,
            });
        }

        let meta = node.field("metadata_analysis")?;
        let qf = meta.field("quality_factors")?;
        let metadata_analysis = MetadataAnalysis {
            image_quality: meta.req_score("image_quality")?,
            quality_factors: QualityFactors {
                resolution: qf.req_score("resolution")?,
                clarity: qf.req_score("clarity")?,
                lighting: qf.req_score("lighting")?,
            },
            potential_manipulations: meta.value_list("potential_manipulations")?,
            technical_artifacts: meta.value_list("technical_artifacts")?,
        };

        let summary = node.field("analysis_summary")?;
        let analysis_summary = AnalysisSummary {
            scene_complexity: summary.req_score("scene_complexity")?,
            manipulation_likelihood: summary.req_score("manipulation_likelihood")?,
            overall_consistency: summary.req_score("overall_consistency")?,
            key_observations: summary.string_list("key_observations")?,
        };

        Ok(Self {
            primary_subject,
            scene_elements,
            metadata_analysis,
            analysis_summary,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn id_canonicalization() {
        assert_eq!(canonical_id("1"), "1");
        assert_eq!(canonical_id("01"), "1");
        assert_eq!(canonical_id("1.0"), "1");
        assert_eq!(canonical_id("a7"), "a7");
        assert_eq!(root(&json!(3)).id().unwrap(), "3");
        assert_eq!(root(&json!(" 3 ")).id().unwrap(), "3");
        assert!(root(&json!(null)).id().is_err());
        assert!(root(&json!("")).id().is_err());
    }

    #[test]
    fn scores_accept_numeric_strings_and_reject_out_of_range() {
        assert_eq!(root(&json!("0.5")).score().unwrap(), 0.5);
        assert_eq!(root(&json!(1)).score().unwrap(), 1.0);
        let err = root(&json!(1.2)).score().unwrap_err();
        assert!(err.reason.contains("out-of-range"));
        assert!(root(&json!(-0.1)).score().is_err());
        assert!(root(&json!("float_between_0_and_1")).score().is_err());
    }

    #[test]
    fn object_list_respects_quotes() {
        let l = ObjectList::parse(r#"fence, sign reading "Glove World, Inc", tent"#).unwrap();
        assert_eq!(l.items(), ["fence", "sign reading \"Glove World, Inc\"", "tent"]);
        let l = ObjectList::parse("- car\n- bus\n").unwrap();
        assert_eq!(l.items(), ["car", "bus"]);
        assert!(ObjectList::parse(" , ,\n").is_err());
    }

    #[test]
    fn two_sentences_non_strict_cases() {
        let one = TwoSentenceDescription::parse("Just one sentence here.").unwrap();
        assert!(!one.strict);
        assert!(one.sentence2.is_empty());
        assert_eq!(one.text(), "Just one sentence here.");
        let three = TwoSentenceDescription::parse("Alpha. Beta c. Delta e.").unwrap();
        assert!(!three.strict);
        assert_eq!(three.sentence2, "Beta c. Delta e.");
        assert!(TwoSentenceDescription::parse("?!").is_err());
    }

    #[test]
    fn relational_duplicate_ids_rejected() {
        let v = json!({"objects": [{"id": "1", "name": "a"}, {"id": 1, "name": "b"}], "relationships": []});
        let err = RelationalGraph::from_value(&v).unwrap_err();
        assert!(err.reason.contains("duplicate id: 1"), "{err}");
    }

    #[test]
    fn scene_graph_dangling_names_are_flagged_not_rejected() {
        let v = json!({
            "primary_subject": {"description": "d", "confidence": 0.9, "typical_context": true, "context_notes": ""},
            "scene_elements": [
                {"object": "Fence", "location": "l", "confidence": 0.8,
                 "relationships": [{"related_to": "Concrete Statues", "relationship_type": "Encloses", "confidence": 0.9, "description": ""},
                                   {"related_to": "fence", "relationship_type": "Self", "confidence": 0.1, "description": ""}],
                 "inconsistencies": []}
            ],
            "metadata_analysis": {"image_quality": 0.75, "quality_factors": {"resolution": 0.8, "clarity": 0.8, "lighting": 0.7},
                                  "potential_manipulations": [], "technical_artifacts": [{"type": "noise"}]},
            "analysis_summary": {"scene_complexity": 0.6, "manipulation_likelihood": 0.05, "overall_consistency": 0.95, "key_observations": []}
        });
        let doc = SceneGraphDoc::from_value(&v).unwrap();
        assert_eq!(doc.dangling_relations(), ["Concrete Statues"]);
    }
}
