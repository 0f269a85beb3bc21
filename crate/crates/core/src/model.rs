//! Domain types shared across the toolchain: samples, the label taxonomy,
//! strategy identifiers and the dataset line format.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::translate::ParsedOutput;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown {kind} label: {value}")]
pub struct LabelError {
    kind: &'static str,
    value: String,
}

macro_rules! label_enum {
    (
        $(#[$meta:meta])*
        $name:ident, $kind:literal, [$($variant:ident = $code:literal, $text:literal;)+]
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($variant,)+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant,)+];

            pub fn code(self) -> u8 {
                match self {
                    $($name::$variant => $code,)+
                }
            }

            pub fn from_code(code: u8) -> Result<Self, LabelError> {
                match code {
                    $($code => Ok($name::$variant),)+
                    other => Err(LabelError { kind: $kind, value: other.to_string() }),
                }
            }

            pub fn name(self) -> &'static str {
                match self {
                    $($name::$variant => $text,)+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        /// Accepts either the integer code or the variant name.
        impl FromStr for $name {
            type Err = LabelError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let s = s.trim();
                if let Ok(code) = s.parse::<u8>() {
                    return Self::from_code(code);
                }
                Self::ALL
                    .iter()
                    .copied()
                    .find(|l| l.name().eq_ignore_ascii_case(s))
                    .ok_or_else(|| LabelError { kind: $kind, value: s.to_string() })
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_u8(self.code())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let value = Value::deserialize(deserializer)?;
                let parsed = match &value {
                    Value::Number(n) => n
                        .as_u64()
                        .and_then(|c| u8::try_from(c).ok())
                        .ok_or_else(|| LabelError { kind: $kind, value: n.to_string() })
                        .and_then($name::from_code),
                    Value::String(s) => s.parse(),
                    other => Err(LabelError { kind: $kind, value: other.to_string() }),
                };
                parsed.map_err(serde::de::Error::custom)
            }
        }
    };
}

label_enum!(
    /// Six-way content label. Codes follow the canonical listing order.
    Label6, "6-way", [
        True = 0, "True";
        SatireParody = 1, "Satire/Parody";
        MisleadingContent = 2, "Misleading Content";
        ManipulatedContent = 3, "Manipulated Content";
        FalseContent = 4, "False Content";
        ImposterContent = 5, "Imposter Content";
    ]
);

label_enum!(
    /// Three-way label, always ingested from the source column.
    Label3, "3-way", [
        True = 0, "True";
        FakeWithTrueText = 1, "Fake with true text";
        FakeWithFalseText = 2, "Fake with false text";
    ]
);

label_enum!(
    /// Binary label. Codes match the zero-shot mapping (FAKE → 0, REAL → 1).
    Label2, "2-way", [
        Fake = 0, "Fake";
        Real = 1, "Real";
    ]
);

/// Cross-check helper only; authoritative 2-way labels come from the corpus.
pub fn collapse_labels(l6: Label6) -> Label2 {
    match l6 {
        Label6::True => Label2::Real,
        _ => Label2::Fake,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    ListOfObjects,
    SimpleDescription,
    StructuredDescription,
    RelationalMapping,
    InconsistencyDetection,
    SceneGraph,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 6] = [
        StrategyKind::ListOfObjects,
        StrategyKind::SimpleDescription,
        StrategyKind::StructuredDescription,
        StrategyKind::RelationalMapping,
        StrategyKind::InconsistencyDetection,
        StrategyKind::SceneGraph,
    ];

    /// Stable identifier used in file names and JSON.
    pub fn slug(self) -> &'static str {
        match self {
            StrategyKind::ListOfObjects => "list_of_objects",
            StrategyKind::SimpleDescription => "simple_description",
            StrategyKind::StructuredDescription => "structured_description",
            StrategyKind::RelationalMapping => "relational_mapping",
            StrategyKind::InconsistencyDetection => "inconsistency_detection",
            StrategyKind::SceneGraph => "scene_graph",
        }
    }

    /// Human-readable name used in report tables.
    pub fn title(self) -> &'static str {
        match self {
            StrategyKind::ListOfObjects => "List of Objects",
            StrategyKind::SimpleDescription => "Simple Image Description",
            StrategyKind::StructuredDescription => "Structured Image Description",
            StrategyKind::RelationalMapping => "Relational Mapping",
            StrategyKind::InconsistencyDetection => "Inconsistency Detection",
            StrategyKind::SceneGraph => "Scene Graph Analysis",
        }
    }

    /// Strategies whose output is a JSON document.
    pub fn is_json(self) -> bool {
        matches!(
            self,
            StrategyKind::RelationalMapping
                | StrategyKind::InconsistencyDetection
                | StrategyKind::SceneGraph
        )
    }

    /// Strategies scored with the graph form of structural retention.
    pub fn is_graph(self) -> bool {
        matches!(self, StrategyKind::RelationalMapping | StrategyKind::SceneGraph)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for StrategyKind {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.slug() == s || k.title().eq_ignore_ascii_case(s))
            .ok_or_else(|| LabelError {
                kind: "strategy",
                value: s.to_string(),
            })
    }
}

/// One corpus row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub title: String,
    pub image_ref: String,
    pub label6: Label6,
    pub label3: Label3,
    pub label2: Label2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Ok,
    ParseError,
    ApiError,
}

impl RecordStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordStatus::Ok => "ok",
            RecordStatus::ParseError => "parse_error",
            RecordStatus::ApiError => "api_error",
        }
    }
}

impl FromStr for RecordStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ok" => Ok(RecordStatus::Ok),
            "parse_error" => Ok(RecordStatus::ParseError),
            "api_error" => Ok(RecordStatus::ApiError),
            other => Err(format!("unknown status {other:?}")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecordError {
    #[error("parsed output present but status is {0}")]
    UnexpectedParsed(&'static str),
    #[error("status is ok but parsed output is missing")]
    MissingParsed,
    #[error("parsed output is {found} but strategy is {expected}")]
    StrategyMismatch {
        expected: StrategyKind,
        found: StrategyKind,
    },
}

/// One strategy's raw and parsed VLM output for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ConversionRecord {
    sample_id: String,
    strategy: StrategyKind,
    model_id: String,
    prompt_version: String,
    raw_output: String,
    parsed: Option<ParsedOutput>,
    status: RecordStatus,
}

impl ConversionRecord {
    pub fn ok(
        sample_id: impl Into<String>,
        model_id: impl Into<String>,
        prompt_version: impl Into<String>,
        raw_output: impl Into<String>,
        parsed: ParsedOutput,
    ) -> Self {
        Self {
            sample_id: sample_id.into(),
            strategy: parsed.strategy(),
            model_id: model_id.into(),
            prompt_version: prompt_version.into(),
            raw_output: raw_output.into(),
            parsed: Some(parsed),
            status: RecordStatus::Ok,
        }
    }

    pub fn failed(
        sample_id: impl Into<String>,
        strategy: StrategyKind,
        model_id: impl Into<String>,
        prompt_version: impl Into<String>,
        raw_output: impl Into<String>,
        status: RecordStatus,
    ) -> Self {
        debug_assert!(status != RecordStatus::Ok);
        Self {
            sample_id: sample_id.into(),
            strategy,
            model_id: model_id.into(),
            prompt_version: prompt_version.into(),
            raw_output: raw_output.into(),
            parsed: None,
            status,
        }
    }

    /// Checked constructor enforcing the status/parsed invariants.
    pub fn new(
        sample_id: String,
        strategy: StrategyKind,
        model_id: String,
        prompt_version: String,
        raw_output: String,
        parsed: Option<ParsedOutput>,
        status: RecordStatus,
    ) -> Result<Self, RecordError> {
        match (&parsed, status) {
            (Some(p), RecordStatus::Ok) if p.strategy() != strategy => {
                return Err(RecordError::StrategyMismatch {
                    expected: strategy,
                    found: p.strategy(),
                })
            }
            (Some(_), RecordStatus::Ok) | (None, RecordStatus::ParseError | RecordStatus::ApiError) => {}
            (None, RecordStatus::Ok) => return Err(RecordError::MissingParsed),
            (Some(_), s) => return Err(RecordError::UnexpectedParsed(s.as_str())),
        }
        Ok(Self {
            sample_id,
            strategy,
            model_id,
            prompt_version,
            raw_output,
            parsed,
            status,
        })
    }

    pub fn sample_id(&self) -> &str {
        &self.sample_id
    }
    pub fn strategy(&self) -> StrategyKind {
        self.strategy
    }
    pub fn model_id(&self) -> &str {
        &self.model_id
    }
    pub fn prompt_version(&self) -> &str {
        &self.prompt_version
    }
    pub fn raw_output(&self) -> &str {
        &self.raw_output
    }
    pub fn parsed(&self) -> Option<&ParsedOutput> {
        self.parsed.as_ref()
    }
    pub fn status(&self) -> RecordStatus {
        self.status
    }
}

/// A conversion record joined with the sample fields it is published with.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetLine {
    pub record: ConversionRecord,
    pub title: String,
    pub label2: Label2,
    pub label3: Label3,
    pub label6: Label6,
}

impl DatasetLine {
    pub fn new(record: ConversionRecord, sample: &Sample) -> Self {
        Self {
            record,
            title: sample.title.clone(),
            label2: sample.label2,
            label3: sample.label3,
            label6: sample.label6,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("dataset line is not a JSON object")]
    NotAnObject,
    #[error("missing field: {0}")]
    MissingField(&'static str),
    #[error("invalid field {field}: {reason}")]
    InvalidField { field: &'static str, reason: String },
}

const FIELDS: [&str; 11] = [
    "id",
    "title",
    "strategy",
    "model_id",
    "prompt_version",
    "raw_output",
    "parsed",
    "status",
    "label2",
    "label3",
    "label6",
];

/// Serializes one dataset line as compact JSON (keys sorted, no trailing newline).
pub fn encode_record(line: &DatasetLine) -> String {
    let r = &line.record;
    let mut obj = Map::new();
    obj.insert("id".into(), Value::String(r.sample_id.clone()));
    obj.insert("title".into(), Value::String(line.title.clone()));
    obj.insert("strategy".into(), Value::String(r.strategy.slug().into()));
    obj.insert("model_id".into(), Value::String(r.model_id.clone()));
    obj.insert("prompt_version".into(), Value::String(r.prompt_version.clone()));
    obj.insert("raw_output".into(), Value::String(r.raw_output.clone()));
    obj.insert(
        "parsed".into(),
        r.parsed.as_ref().map_or(Value::Null, ParsedOutput::to_value),
    );
    obj.insert("status".into(), Value::String(r.status.as_str().into()));
    obj.insert("label2".into(), Value::from(line.label2.code()));
    obj.insert("label3".into(), Value::from(line.label3.code()));
    obj.insert("label6".into(), Value::from(line.label6.code()));
    debug_assert_eq!(obj.len(), FIELDS.len());
    Value::Object(obj).to_string()
}

pub fn decode_record(line: &[u8]) -> Result<DatasetLine, DecodeError> {
    let value: Value =
        serde_json::from_slice(line).map_err(|e| DecodeError::Json(e.to_string()))?;
    let Value::Object(mut obj) = value else {
        return Err(DecodeError::NotAnObject);
    };

    fn take_str(obj: &mut Map<String, Value>, field: &'static str) -> Result<String, DecodeError> {
        match obj.remove(field) {
            None => Err(DecodeError::MissingField(field)),
            Some(Value::String(s)) => Ok(s),
            Some(other) => Err(DecodeError::InvalidField {
                field,
                reason: format!("expected string, got {other}"),
            }),
        }
    }
    fn take_label<L: for<'de> Deserialize<'de>>(
        obj: &mut Map<String, Value>,
        field: &'static str,
    ) -> Result<L, DecodeError> {
        let v = obj.remove(field).ok_or(DecodeError::MissingField(field))?;
        serde_json::from_value(v).map_err(|e| DecodeError::InvalidField {
            field,
            reason: e.to_string(),
        })
    }

    let sample_id = take_str(&mut obj, "id")?;
    let title = take_str(&mut obj, "title")?;
    let strategy: StrategyKind =
        take_str(&mut obj, "strategy")?
            .parse()
            .map_err(|e: LabelError| DecodeError::InvalidField {
                field: "strategy",
                reason: e.to_string(),
            })?;
    let model_id = take_str(&mut obj, "model_id")?;
    let prompt_version = take_str(&mut obj, "prompt_version")?;
    let raw_output = take_str(&mut obj, "raw_output")?;
    let status: RecordStatus = take_str(&mut obj, "status")?
        .parse()
        .map_err(|reason| DecodeError::InvalidField {
            field: "status",
            reason,
        })?;
    let parsed = match obj.remove("parsed") {
        None | Some(Value::Null) => None,
        Some(v) => Some(ParsedOutput::from_value(strategy, &v).map_err(|e| {
            DecodeError::InvalidField {
                field: "parsed",
                reason: e.to_string(),
            }
        })?),
    };
    let label2 = take_label(&mut obj, "label2")?;
    let label3 = take_label(&mut obj, "label3")?;
    let label6 = take_label(&mut obj, "label6")?;

    let record = ConversionRecord::new(
        sample_id,
        strategy,
        model_id,
        prompt_version,
        raw_output,
        parsed,
        status,
    )
    .map_err(|e| DecodeError::InvalidField {
        field: "status",
        reason: e.to_string(),
    })?;

    Ok(DatasetLine {
        record,
        title,
        label2,
        label3,
        label6,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::translate::ObjectList;

    fn sample() -> Sample {
        Sample {
            id: "abc1".into(),
            title: "Chihuahua in a hat".into(),
            image_ref: "https://example.org/a.jpg".into(),
            label6: Label6::SatireParody,
            label3: Label3::FakeWithTrueText,
            label2: Label2::Fake,
        }
    }

    #[test]
    fn collapse_examples() {
        assert_eq!(collapse_labels(Label6::True), Label2::Real);
        assert_eq!(collapse_labels(Label6::SatireParody), Label2::Fake);
        assert_eq!(collapse_labels(Label6::ManipulatedContent), Label2::Fake);
        let fakes = Label6::ALL
            .iter()
            .filter(|&&l| collapse_labels(l) == Label2::Fake)
            .count();
        assert_eq!(fakes, 5);
    }

    #[test]
    fn label_codes_are_bijective() {
        assert_eq!(Label6::ALL.len(), 6);
        for (i, l) in Label6::ALL.iter().enumerate() {
            assert_eq!(l.code() as usize, i);
            assert_eq!(Label6::from_code(l.code()).unwrap(), *l);
            assert_eq!(l.name().parse::<Label6>().unwrap(), *l);
            let json = serde_json::to_string(l).unwrap();
            assert_eq!(serde_json::from_str::<Label6>(&json).unwrap(), *l);
        }
        for l in Label3::ALL {
            assert_eq!(Label3::from_code(l.code()).unwrap(), *l);
            assert_eq!(l.name().parse::<Label3>().unwrap(), *l);
        }
        for l in Label2::ALL {
            assert_eq!(l.to_string().parse::<Label2>().unwrap(), *l);
        }
        assert!(Label6::from_code(6).is_err());
        assert!("sarcasm".parse::<Label6>().is_err());
    }

    #[test]
    fn strategy_slugs_round_trip() {
        for k in StrategyKind::ALL {
            assert_eq!(k.slug().parse::<StrategyKind>().unwrap(), k);
            assert_eq!(k.title().parse::<StrategyKind>().unwrap(), k);
        }
    }

    #[test]
    fn ok_record_round_trips_byte_identically() {
        let parsed = ParsedOutput::ObjectList(ObjectList::new(vec!["car".into(), "red bus".into()]).unwrap());
        let rec = ConversionRecord::ok("abc1", "mock-vlm", "v1", "car, red bus", parsed);
        let line = DatasetLine::new(rec, &sample());
        let encoded = encode_record(&line);
        let decoded = decode_record(encoded.as_bytes()).unwrap();
        assert_eq!(decoded, line);
        assert_eq!(encode_record(&decoded), encoded);
    }

    #[test]
    fn missing_strategy_is_named() {
        let raw = r#"{"id":"1","title":"t","model_id":"m","prompt_version":"v1","raw_output":"x","parsed":null,"status":"parse_error","label2":0,"label3":1,"label6":1}"#;
        let err = decode_record(raw.as_bytes()).unwrap_err();
        assert_eq!(err.to_string(), "missing field: strategy");
    }

    #[test]
    fn parse_error_without_parsed_decodes() {
        // Hand-built fixture: no "parsed" key at all.
        let raw = r#"{"id":"7","title":"Iguana eating a flower","strategy":"scene_graph","model_id":"m","prompt_version":"v1","raw_output":"{not json","status":"parse_error","label2":1,"label3":0,"label6":0}"#;
        let line = decode_record(raw.as_bytes()).unwrap();
        assert_eq!(line.record.status(), RecordStatus::ParseError);
        assert!(line.record.parsed().is_none());
        assert_eq!(line.record.strategy(), StrategyKind::SceneGraph);
        assert_eq!(line.label6, Label6::True);
    }

    #[test]
    fn ok_status_requires_parsed() {
        let raw = r#"{"id":"7","title":"t","strategy":"list_of_objects","model_id":"m","prompt_version":"v1","raw_output":"a","parsed":null,"status":"ok","label2":1,"label3":0,"label6":0}"#;
        assert!(matches!(
            decode_record(raw.as_bytes()),
            Err(DecodeError::InvalidField { field: "status", .. })
        ));
    }

    #[test]
    fn parsed_variant_must_match_strategy() {
        let parsed = ParsedOutput::ObjectList(ObjectList::new(vec!["a".into()]).unwrap());
        let err = ConversionRecord::new(
            "1".into(),
            StrategyKind::SceneGraph,
            "m".into(),
            "v1".into(),
            "a".into(),
            Some(parsed),
            RecordStatus::Ok,
        )
        .unwrap_err();
        assert!(matches!(err, RecordError::StrategyMismatch { .. }));
    }
}
