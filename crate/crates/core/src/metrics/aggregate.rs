//! Per-sample metric rows and their per-strategy means.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ScsWeights, SurrogateKind};
use crate::model::StrategyKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SirKind {
    Graph,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub id: String,
    pub strategy: StrategyKind,
    pub ipr: f64,
    pub scs: f64,
    pub iss: f64,
    pub sir: f64,
    pub mte: f64,
    pub ciqs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyMeans {
    pub strategy: StrategyKind,
    pub n: usize,
    pub ipr: f64,
    pub scs: f64,
    pub iss: f64,
    pub sir: f64,
    pub mte: f64,
    /// Mean of per-sample CIQS values.
    pub ciqs: f64,
}

/// Everything needed to reproduce or interpret a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub seed: u64,
    pub provider_id: String,
    pub sample_count: usize,
    pub projection_dim: usize,
    pub std_kind: String,
    pub scs_weights: ScsWeights,
    pub generic_terms_version: String,
    pub relational_node_confidence: f64,
    pub depth_table_source: String,
    pub scs_surrogates: BTreeMap<String, SurrogateKind>,
    pub sir_kinds: BTreeMap<String, SirKind>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metadata: ReportMetadata,
    pub means: Vec<StrategyMeans>,
    pub samples: Vec<SampleMetrics>,
}

impl MetricReport {
    /// Sorts samples by (strategy, id) so that means are summed in a fixed
    /// order regardless of how rows were produced.
    pub fn new(metadata: ReportMetadata, mut samples: Vec<SampleMetrics>) -> Self {
        samples.sort_by(|a, b| (a.strategy, &a.id).cmp(&(b.strategy, &b.id)));
        let means = StrategyKind::ALL
            .iter()
            .filter_map(|&k| strategy_means(k, &samples))
            .collect();
        Self {
            metadata,
            means,
            samples,
        }
    }

    pub fn means_for(&self, strategy: StrategyKind) -> Option<&StrategyMeans> {
        self.means.iter().find(|m| m.strategy == strategy)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metric report serializes")
    }

    /// Aligned text table, one row per strategy.
    pub fn render_table(&self) -> String {
        let width = self
            .means
            .iter()
            .map(|m| m.strategy.title().len())
            .max()
            .unwrap_or(0)
            .max("Strategy".len());
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>4}  {:>7}  {:>7}  {:>7}  {:>7}  {:>7}  {:>7}",
            "Strategy", "n", "IPR", "SCS", "ISS", "SIR", "MTE", "CIQS"
        );
        for m in &self.means {
            let _ = writeln!(
                out,
                "{:<width$}  {:>4}  {:>7.4}  {:>7.4}  {:>7.4}  {:>7.4}  {:>7.4}  {:>7.4}",
                m.strategy.title(),
                m.n,
                m.ipr,
                m.scs,
                m.iss,
                m.sir,
                m.mte,
                m.ciqs
            );
        }
        out
    }
}

fn strategy_means(strategy: StrategyKind, samples: &[SampleMetrics]) -> Option<StrategyMeans> {
    let rows: Vec<&SampleMetrics> = samples.iter().filter(|s| s.strategy == strategy).collect();
    if rows.is_empty() {
        return None;
    }
    let n = rows.len() as f64;
    let avg = |f: fn(&SampleMetrics) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
    Some(StrategyMeans {
        strategy,
        n: rows.len(),
        ipr: avg(|r| r.ipr),
        scs: avg(|r| r.scs),
        iss: avg(|r| r.iss),
        sir: avg(|r| r.sir),
        mte: avg(|r| r.mte),
        ciqs: avg(|r| r.ciqs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn metadata() -> ReportMetadata {
        ReportMetadata {
            seed: 7,
            provider_id: "reference".into(),
            sample_count: 0,
            projection_dim: 196,
            std_kind: "population".into(),
            scs_weights: ScsWeights::default(),
            generic_terms_version: "generic-v1".into(),
            relational_node_confidence: 1.0,
            depth_table_source: "bundled-mini".into(),
            scs_surrogates: BTreeMap::new(),
            sir_kinds: BTreeMap::new(),
            notes: vec![],
        }
    }

    fn row(id: &str, strategy: StrategyKind, v: f64) -> SampleMetrics {
        SampleMetrics {
            id: id.into(),
            strategy,
            ipr: v,
            scs: v,
            iss: v,
            sir: v,
            mte: v,
            ciqs: v,
        }
    }

    #[test]
    fn means_per_strategy_in_listing_order() {
        let r = MetricReport::new(
            metadata(),
            vec![
                row("b", StrategyKind::SceneGraph, 0.2),
                row("a", StrategyKind::ListOfObjects, 0.5),
                row("a", StrategyKind::SceneGraph, 0.4),
            ],
        );
        assert_eq!(r.means.len(), 2);
        assert_eq!(r.means[0].strategy, StrategyKind::ListOfObjects);
        assert!((r.means_for(StrategyKind::SceneGraph).unwrap().sir - 0.3).abs() < 1e-12);
        assert_eq!(r.samples[1].id, "a");
        let table = r.render_table();
        assert!(table.lines().next().unwrap().contains("CIQS"));
        assert!(table.contains("List of Objects"));
        assert!(table.contains("0.3000"));
    }

    proptest! {
        #[test]
        fn mean_matches_brute_force(vals in prop::collection::vec(0.0f64..1.0, 1..60)) {
            let rows: Vec<_> = vals
                .iter()
                .enumerate()
                .map(|(i, v)| row(&format!("{i:03}"), StrategyKind::ListOfObjects, *v))
                .collect();
            let r = MetricReport::new(metadata(), rows);
            let mut brute = 0.0;
            for v in &vals {
                brute += v;
            }
            brute /= vals.len() as f64;
            prop_assert!((r.means[0].ciqs - brute).abs() <= 1e-9);
        }
    }
}
