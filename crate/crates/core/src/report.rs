//! Classification scoring against gold labels and table rendering.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Label2, Label3, Label6, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Two,
    Three,
    Six,
}

impl Task {
    pub fn num_classes(self) -> usize {
        match self {
            Task::Two => 2,
            Task::Three => 3,
            Task::Six => 6,
        }
    }

    pub fn class_names(self) -> Vec<&'static str> {
        match self {
            Task::Two => Label2::ALL.iter().map(|l| l.name()).collect(),
            Task::Three => Label3::ALL.iter().map(|l| l.name()).collect(),
            Task::Six => Label6::ALL.iter().map(|l| l.name()).collect(),
        }
    }

    pub fn gold_code(self, s: &Sample) -> u8 {
        match self {
            Task::Two => s.label2.code(),
            Task::Three => s.label3.code(),
            Task::Six => s.label6.code(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Two => "two",
            Task::Three => "three",
            Task::Six => "six",
        }
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "two" | "2" | "2-way" => Ok(Task::Two),
            "three" | "3" | "3-way" => Ok(Task::Three),
            "six" | "6" | "6-way" => Ok(Task::Six),
            other => Err(format!("unknown task {other:?} (expected two, three or six)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub pred: u8,
    pub task: Task,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PredictionFile {
    pub records: Vec<Prediction>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("cannot read {0}: {1}")]
    Io(String, String),
    #[error("prediction for unknown id {0:?}")]
    UnknownId(String),
    #[error("duplicate prediction for id {0:?}")]
    DuplicateId(String),
    #[error("prediction {pred} for id {id:?} is out of range for the {task:?} task")]
    CodeOutOfRange { id: String, pred: u8, task: Task },
    #[error("prediction for id {id:?} is for task {found:?}, expected {expected:?}")]
    TaskMismatch { id: String, found: Task, expected: Task },
    #[error("no predictions")]
    Empty,
}

impl PredictionFile {
    pub fn parse_jsonl(text: &str) -> Result<Self, ReportError> {
        let records = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| ReportError::Parse {
                    line: i + 1,
                    reason: e.to_string(),
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { records })
    }

    pub fn read(path: &Path) -> Result<Self, ReportError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ReportError::Io(path.display().to_string(), e.to_string()))?;
        Self::parse_jsonl(&text)
    }

    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("prediction serializes") + "\n")
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub model: String,
    pub task: Task,
    pub n: usize,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    #[serde(rename = "macro")]
    pub macro_avg: Averages,
    pub weighted: Averages,
    /// Rows are gold classes, columns predicted classes.
    pub confusion: Vec<Vec<usize>>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Scores parallel code vectors. Undefined ratios are 0.
pub fn score_codes(model: &str, task: Task, gold: &[u8], pred: &[u8]) -> EvalSummary {
    assert_eq!(gold.len(), pred.len(), "gold and prediction lengths differ");
    let k = task.num_classes();
    let mut confusion = vec![vec![0usize; k]; k];
    for (&g, &p) in gold.iter().zip(pred) {
        confusion[usize::from(g)][usize::from(p)] += 1;
    }
    let n = gold.len();
    let correct: usize = (0..k).map(|c| confusion[c][c]).sum();
    let names = task.class_names();
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = confusion[c][c];
            let support: usize = confusion[c].iter().sum();
            let predicted: usize = confusion.iter().map(|row| row[c]).sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                label: names[c].to_string(),
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect();
    let macro_avg = Averages {
        precision: per_class.iter().map(|c| c.precision).sum::<f64>() / k as f64,
        recall: per_class.iter().map(|c| c.recall).sum::<f64>() / k as f64,
        f1: per_class.iter().map(|c| c.f1).sum::<f64>() / k as f64,
    };
    let weighted_mean = |f: fn(&ClassMetrics) -> f64| {
        if n == 0 {
            0.0
        } else {
            per_class.iter().map(|c| f(c) * c.support as f64).sum::<f64>() / n as f64
        }
    };
    let weighted = Averages {
        precision: weighted_mean(|c| c.precision),
        recall: weighted_mean(|c| c.recall),
        f1: weighted_mean(|c| c.f1),
    };
    EvalSummary {
        model: model.to_string(),
        task,
        n,
        accuracy: ratio(correct, n),
        per_class,
        macro_avg,
        weighted,
        confusion,
    }
}

/// Scores predictions for `task` against gold samples.
pub fn evaluate(
    model: &str,
    preds: &PredictionFile,
    gold: &[Sample],
    task: Task,
) -> Result<EvalSummary, ReportError> {
    if preds.records.is_empty() {
        return Err(ReportError::Empty);
    }
    let by_id: HashMap<&str, &Sample> = gold.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut seen = HashSet::new();
    let mut g = Vec::with_capacity(preds.records.len());
    let mut p = Vec::with_capacity(preds.records.len());
    for r in &preds.records {
        if r.task != task {
            return Err(ReportError::TaskMismatch {
                id: r.id.clone(),
                found: r.task,
                expected: task,
            });
        }
        let sample = by_id
            .get(r.id.as_str())
            .ok_or_else(|| ReportError::UnknownId(r.id.clone()))?;
        if !seen.insert(r.id.as_str()) {
            return Err(ReportError::DuplicateId(r.id.clone()));
        }
        if usize::from(r.pred) >= task.num_classes() {
            return Err(ReportError::CodeOutOfRange {
                id: r.id.clone(),
                pred: r.pred,
                task,
            });
        }
        g.push(task.gold_code(sample));
        p.push(r.pred);
    }
    Ok(score_codes(model, task, &g, &p))
}

fn pct(x: f64) -> String {
    format!("{:.2}", x * 100.0)
}

/// Renders summaries as an aligned text table (weighted P/R/F1, percentages)
/// and a JSON document carrying both averaging conventions. Row order is by
/// model name, then task, independent of input order.
pub fn render_table(summaries: &[EvalSummary]) -> (String, serde_json::Value) {
    let mut rows: Vec<&EvalSummary> = summaries.iter().collect();
    rows.sort_by(|a, b| {
        (a.model.as_str(), a.task)
            .cmp(&(b.model.as_str(), b.task))
            .then(a.accuracy.total_cmp(&b.accuracy))
    });
    let name = |s: &EvalSummary| {
        if s.model.trim().is_empty() {
            "(unnamed)".to_string()
        } else {
            s.model.clone()
        }
    };
    let width = rows.iter().map(|s| name(s).len()).max().unwrap_or(0).max(5);
    let mut text = String::new();
    let _ = writeln!(text, "{:<width$} {:<5} {:>5} {:>5} {:>5} {:>5}", "Model", "Task", "Acc", "P", "R", "F1");
    for s in &rows {
        let _ = writeln!(
            text,
            "{:<width$} {:<5} {} {} {} {}",
            name(s),
            s.task.as_str(),
            pct(s.accuracy),
            pct(s.weighted.precision),
            pct(s.weighted.recall),
            pct(s.weighted.f1)
        );
    }
    let json = serde_json::json!({
        "averaging": { "table": "weighted", "also_reported": "macro" },
        "summaries": rows,
    });
    (text, json)
}
