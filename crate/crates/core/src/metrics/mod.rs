//! Conversion-quality metrics: IPR, SCS, ISS, SIR, MTE and their geometric
//! mean CIQS, plus per-strategy aggregation.

pub mod aggregate;
pub mod lexicon;
pub mod wordnet;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::translate::{count_sentences, ParsedOutput, RelationalGraph, SceneGraphDoc};

pub use aggregate::{MetricReport, ReportMetadata, SampleMetrics, SirKind, StrategyMeans};
pub use lexicon::{
    content_words, is_generic, is_multiword, object_surrogate, text_phrases, SurrogateKind,
    GENERIC_TERMS_VERSION,
};
pub use wordnet::{WordNetDepthTable, WordNetError, D_MAX};

/// Node confidence assumed for relational graphs, whose schema has none.
pub const RELATIONAL_NODE_CONFIDENCE: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("negative CIQS component {name}: {value}")]
    NegativeComponent { name: &'static str, value: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid SCS weights: {0}")]
    InvalidWeights(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScsWeights {
    pub w_l: f64,
    pub w_s: f64,
    pub w_c: f64,
}

impl Default for ScsWeights {
    fn default() -> Self {
        Self {
            w_l: 0.3,
            w_s: 0.4,
            w_c: 0.3,
        }
    }
}

impl ScsWeights {
    pub fn new(w_l: f64, w_s: f64, w_c: f64) -> Result<Self, MetricError> {
        let w = Self { w_l, w_s, w_c };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), MetricError> {
        for (name, v) in [("w_l", self.w_l), ("w_s", self.w_s), ("w_c", self.w_c)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(MetricError::InvalidWeights(format!("{name} = {v} outside [0, 1]")));
            }
        }
        let sum = self.w_l + self.w_s + self.w_c;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(MetricError::InvalidWeights(format!("weights sum to {sum}")));
        }
        Ok(())
    }
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<(), MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::DimMismatch(a.len(), b.len()));
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity clamped to [-1, 1]; 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
    check_dims(a, b)?;
    let denom = norm(a) * norm(b);
    if denom == 0.0 {
        return Ok(0.0);
    }
    let c = dot(a, b) / denom;
    if !c.is_finite() {
        return Err(MetricError::NonFinite("cosine"));
    }
    Ok(c.clamp(-1.0, 1.0))
}

/// Image-text alignment from a cosine similarity.
pub fn ipr_from_cos(cos: f64) -> f64 {
    let s = (cos.clamp(-1.0, 1.0) + 1.0) / 2.0;
    1.0 - (-5.0 * s).exp()
}

/// Image-text alignment of two normalized projections.
pub fn ipr(p_i: &[f64], p_t: &[f64]) -> Result<f64, MetricError> {
    Ok(ipr_from_cos(cosine(p_i, p_t)?))
}

/// Object coverage and specificity of an object list.
pub fn scs<S: AsRef<str>>(objects: &[S], weights: &ScsWeights) -> f64 {
    let n = objects.len();
    if n == 0 {
        return 0.0;
    }
    let generic = objects.iter().filter(|o| is_generic(o.as_ref())).count();
    let multi = objects.iter().filter(|o| is_multiword(o.as_ref())).count();
    let l = (n as f64 / 10.0).min(1.0);
    let s = 1.0 - generic as f64 / n as f64;
    let c = multi as f64 / n as f64;
    weights.w_l * l + weights.w_s * s + weights.w_c * c
}

/// Mean normalized hypernym depth of the content words found in the table.
pub fn iss(text: &str, table: &WordNetDepthTable) -> f64 {
    let depths: Vec<f64> = content_words(text)
        .iter()
        .filter_map(|w| table.depth(w))
        .map(|d| d.min(D_MAX) as f64 / D_MAX as f64)
        .collect();
    if depths.is_empty() {
        return 0.0;
    }
    depths.iter().sum::<f64>() / depths.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub node_count: usize,
    pub edge_count: usize,
    pub distinct_relation_count: usize,
    pub conf_v: f64,
    pub conf_e: f64,
    pub edge_density: f64,
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl GraphSummary {
    /// Density uses ordered pairs. Multigraph outputs can exceed one edge per
    /// pair, so the value is capped at 1.
    pub fn new(
        node_count: usize,
        edge_count: usize,
        distinct_relation_count: usize,
        conf_v: f64,
        conf_e: f64,
    ) -> Self {
        let edge_density = if node_count < 2 {
            0.0
        } else {
            let pairs = node_count as f64 * (node_count as f64 - 1.0);
            (edge_count as f64 / pairs).min(1.0)
        };
        Self {
            node_count,
            edge_count,
            distinct_relation_count,
            conf_v: conf_v.clamp(0.0, 1.0),
            conf_e: conf_e.clamp(0.0, 1.0),
            edge_density,
        }
    }

    /// Edge confidence is 0 for a graph without edges.
    pub fn from_relational(g: &RelationalGraph) -> Self {
        let relations = distinct(g.relationships.iter().map(|r| r.relation.as_str()));
        Self::new(
            g.objects.len(),
            g.relationships.len(),
            relations,
            RELATIONAL_NODE_CONFIDENCE,
            mean(g.relationships.iter().map(|r| r.confidence)).unwrap_or(0.0),
        )
    }

    /// The primary subject counts as a node alongside the scene elements.
    pub fn from_scene_graph(doc: &SceneGraphDoc) -> Self {
        let node_conf = std::iter::once(doc.primary_subject.confidence)
            .chain(doc.scene_elements.iter().map(|e| e.confidence));
        let edges: Vec<_> = doc
            .scene_elements
            .iter()
            .flat_map(|e| &e.relationships)
            .collect();
        let relations = distinct(edges.iter().map(|r| r.relationship_type.as_str()));
        Self::new(
            doc.scene_elements.len() + 1,
            edges.len(),
            relations,
            mean(node_conf).unwrap_or(0.0),
            mean(edges.iter().map(|r| r.confidence)).unwrap_or(0.0),
        )
    }
}

fn distinct<'a>(labels: impl Iterator<Item = &'a str>) -> usize {
    labels
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect::<HashSet<_>>()
        .len()
}

/// Graph summary for graph-producing strategies; `None` otherwise.
pub fn graph_summary(parsed: &ParsedOutput) -> Option<GraphSummary> {
    match parsed {
        ParsedOutput::RelationalMapping(g) => Some(GraphSummary::from_relational(g)),
        ParsedOutput::SceneGraph(s) => Some(GraphSummary::from_scene_graph(s)),
        _ => None,
    }
}

/// Structural richness of a graph output.
pub fn sir_graph(g: &GraphSummary) -> f64 {
    let n_s = (g.node_count as f64 / 10.0).min(1.0);
    let r_d = (g.distinct_relation_count as f64 / 5.0).min(1.0);
    let c_s = (g.conf_v + g.conf_e) / 2.0;
    (n_s + g.edge_density + r_d + c_s) / 4.0
}

/// Structural richness of free text: sentence count over five, unclamped.
pub fn sir_text(text: &str) -> f64 {
    count_sentences(text) as f64 / 5.0
}

fn population_std(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt()
}

/// Modality transfer efficiency from raw (pre-normalization) projections.
pub fn mte(p_i_raw: &[f64], p_t_raw: &[f64]) -> Result<f64, MetricError> {
    let s = (cosine(p_i_raw, p_t_raw)? + 1.0) / 2.0;
    let (a, b) = (population_std(p_i_raw), population_std(p_t_raw));
    let hi = a.max(b);
    let c_r = if hi == 0.0 { 1.0 } else { a.min(b) / hi };
    Ok(0.7 * s + 0.3 * c_r)
}

/// Geometric mean of the five components.
pub fn ciqs(ipr: f64, scs: f64, iss: f64, sir: f64, mte: f64) -> Result<f64, MetricError> {
    let parts = [("ipr", ipr), ("scs", scs), ("iss", iss), ("sir", sir), ("mte", mte)];
    for (name, value) in parts {
        if !value.is_finite() {
            return Err(MetricError::NonFinite(name));
        }
        if value < 0.0 {
            return Err(MetricError::NegativeComponent { name, value });
        }
    }
    if parts.iter().any(|(_, v)| *v == 0.0) {
        return Ok(0.0);
    }
    // Log-space keeps the product from underflowing for tiny components.
    let log_mean = parts.iter().map(|(_, v)| v.ln()).sum::<f64>() / 5.0;
    Ok(log_mean.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StrategyKind;
    use crate::translate::parse_output;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn ipr_reference_points() {
        assert_eq!(ipr_from_cos(-1.0), 0.0);
        assert!(close(ipr_from_cos(1.0), 0.993_262_053_000_914_5, 1e-12));
        assert!(close(ipr_from_cos(0.0), 0.917_915_001_376_101_2, 1e-12));
        assert_eq!(ipr(&[1.0, 0.0], &[1.0]), Err(MetricError::DimMismatch(2, 1)));
    }

    #[test]
    fn scs_examples() {
        let w = ScsWeights::default();
        assert_eq!(scs::<&str>(&[], &w), 0.0);
        let ten: Vec<String> = (0..10).map(|i| format!("red car{i}")).collect();
        assert!(close(scs(&ten, &w), 1.0, 1e-12));
        assert!(close(scs(&["red car", "oak tree", "thing"], &w), 0.09 + 0.4 * 2.0 / 3.0 + 0.2, 1e-12));
    }

    #[test]
    fn weights_validation() {
        assert!(ScsWeights::new(0.5, 0.5, 0.0).is_ok());
        assert!(ScsWeights::new(0.5, 0.6, 0.0).is_err());
        assert!(ScsWeights::new(-0.1, 0.6, 0.5).is_err());
    }

    #[test]
    fn iss_examples() {
        let mini = WordNetDepthTable::bundled_mini();
        assert!(close(iss("The dog is an animal.", &mini), 0.5, 1e-12));
        assert_eq!(iss("nothing known here", &mini), 0.0);
        let ten = WordNetDepthTable::from_pairs([("alpha", 10), ("beta", 10)], "t");
        assert!(close(iss("alpha beta alpha", &ten), 0.5, 1e-12));
        let deep = WordNetDepthTable::from_pairs([("abyss", 27)], "t");
        assert_eq!(iss("abyss", &deep), 1.0);
    }

    #[test]
    fn sir_examples() {
        assert_eq!(sir_graph(&GraphSummary::new(10, 90, 5, 1.0, 1.0)), 1.0);
        let g = GraphSummary::new(4, 3, 2, 1.0, 0.9);
        assert_eq!(g.edge_density, 0.25);
        assert!(close(sir_graph(&g), 0.5, 1e-12));
        let empty = GraphSummary::new(0, 0, 0, RELATIONAL_NODE_CONFIDENCE, 0.0);
        assert!(close(sir_graph(&empty), 0.5 / 4.0, 1e-12));
        assert!(close(sir_text("One. Two."), 0.4, 1e-12));
        assert!(close(sir_text("One. Two. Three. Four. Five. Six. Seven."), 1.4, 1e-12));
    }

    #[test]
    fn mte_examples() {
        let v = [1.0, -2.0, 3.0];
        assert!(close(mte(&v, &v).unwrap(), 1.0, 1e-12));
        assert!(close(mte(&[1.0, -1.0, 0.0, 0.0], &[0.0, 0.0, 1.0, -1.0]).unwrap(), 0.65, 1e-12));
        assert!(close(mte(&[2.0, -2.0], &[1.0, -1.0]).unwrap(), 0.85, 1e-12));
        assert!(close(mte(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.7 * 0.5 + 0.3, 1e-12));
    }

    #[test]
    fn ciqs_examples() {
        assert_eq!(ciqs(1.0, 1.0, 1.0, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(ciqs(0.5, 0.0, 1.0, 1.0, 1.0).unwrap(), 0.0);
        assert!(matches!(
            ciqs(0.5, -0.1, 1.0, 1.0, 1.0),
            Err(MetricError::NegativeComponent { name: "scs", .. })
        ));
        let lo = ciqs(0.9176, 0.7417, 0.4635, 0.2030, 0.6498).unwrap();
        let direct = (0.9176f64 * 0.7417 * 0.4635 * 0.2030 * 0.6498).powf(0.2);
        assert!(close(lo, direct, 1e-12));
        assert!(close(lo, 0.5268, 0.01));
    }

    #[test]
    fn graph_summary_hand_fixture() {
        let raw = r#"{"objects":[{"id":"1","name":"cat","location":"left"},
            {"id":"2","name":"mat","location":"floor"},{"id":"3","name":"lamp","location":"right"}],
            "relationships":[{"subject_id":"1","relation":"on","object_id":"2","confidence":0.8},
            {"subject_id":"3","relation":"On ","object_id":"1","confidence":0.6}]}"#;
        let parsed = parse_output(StrategyKind::RelationalMapping, raw).unwrap();
        let g = graph_summary(&parsed).unwrap();
        assert_eq!((g.node_count, g.edge_count, g.distinct_relation_count), (3, 2, 1));
        assert!(close(g.edge_density, 2.0 / 6.0, 1e-12));
        assert!(close(g.conf_e, 0.7, 1e-12));
        assert_eq!(g.conf_v, 1.0);
        assert!(graph_summary(&parse_output(StrategyKind::SimpleDescription, "A. B.").unwrap()).is_none());
    }

    #[test]
    fn empty_relationships() {
        let raw = r#"{"objects":[{"id":"1","name":"cat","location":"left"}],"relationships":[]}"#;
        let g = graph_summary(&parse_output(StrategyKind::RelationalMapping, raw).unwrap()).unwrap();
        assert_eq!((g.edge_count, g.edge_density, g.conf_e), (0, 0.0, 0.0));
    }

    fn unit(v: Vec<f64>) -> Option<Vec<f64>> {
        let n = norm(&v);
        (n > 1e-6).then(|| v.iter().map(|x| x / n).collect())
    }

    proptest! {
        #[test]
        fn ipr_strictly_increasing(a in -1.0f64..1.0, b in -1.0f64..1.0) {
            prop_assume!((a - b).abs() > 1e-9);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(ipr_from_cos(lo) < ipr_from_cos(hi));
        }

        #[test]
        fn bounded_metrics(
            a in prop::collection::vec(-10.0f64..10.0, 6),
            b in prop::collection::vec(-10.0f64..10.0, 6),
        ) {
            let m = mte(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&m));
            if let (Some(ua), Some(ub)) = (unit(a), unit(b)) {
                let c = cosine(&ua, &ub).unwrap();
                prop_assert!((-1.0..=1.0).contains(&c));
                let i = ipr(&ua, &ub).unwrap();
                prop_assert!((0.0..1.0).contains(&i));
            }
        }

        #[test]
        fn scs_in_unit_interval(items in prop::collection::vec("[a-z ]{0,12}", 0..15)) {
            let v = scs(&items, &ScsWeights::default());
            prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
        }

        #[test]
        fn sir_graph_in_unit_interval(
            v in 0usize..30, e in 0usize..1000, r in 0usize..20,
            cv in 0.0f64..=1.0, ce in 0.0f64..=1.0,
        ) {
            let s = sir_graph(&GraphSummary::new(v, e, r, cv, ce));
            prop_assert!((0.0..=1.0).contains(&s));
        }

        #[test]
        fn ciqs_symmetric_and_scale_consistent(
            xs in prop::array::uniform5(0.0f64..2.0), k in 0.0f64..3.0, rot in 0usize..5,
        ) {
            let base = ciqs(xs[0], xs[1], xs[2], xs[3], xs[4]).unwrap();
            let mut r = xs;
            r.rotate_left(rot);
            r.swap(0, 1);
            let perm = ciqs(r[0], r[1], r[2], r[3], r[4]).unwrap();
            prop_assert!((base - perm).abs() <= 1e-9 * (1.0 + base));
            let scaled = ciqs(k * xs[0], k * xs[1], k * xs[2], k * xs[3], k * xs[4]).unwrap();
            prop_assert!((scaled - k * base).abs() <= 1e-9 * (1.0 + k * base));
            let max = xs.iter().cloned().fold(0.0, f64::max);
            prop_assert!(base <= max + 1e-12);
        }

        #[test]
        fn iss_order_invariant(mut words in prop::collection::vec(prop::sample::select(vec!["dog", "animal", "dogs", "cat", "the"]), 0..12), seed in any::<u64>()) {
            let mini = WordNetDepthTable::bundled_mini();
            let a = iss(&words.join(" "), &mini);
            let n = words.len();
            if n > 1 {
                words.rotate_left((seed as usize) % n);
            }
            let b = iss(&words.join(" "), &mini);
            prop_assert!((a - b).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
