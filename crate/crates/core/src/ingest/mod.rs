//! Corpus loading and stratified subsampling.

pub mod cache;
pub mod sampling;

use std::collections::HashSet;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{collapse_labels, Label2, Label3, Label6, LabelError, Sample};
use crate::translate::clean_title;

pub use cache::{FetchError, FetchedImage, ImageCache, ManifestEntry};
pub use sampling::{allocate, class_counts, stratified_sample, SamplingError, SamplingPlan};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMap {
    pub id: String,
    pub title: String,
    pub image_url: String,
    pub label2: String,
    pub label3: String,
    pub label6: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            id: "id".into(),
            title: "clean_title".into(),
            image_url: "image_url".into(),
            label2: "2_way_label".into(),
            label3: "3_way_label".into(),
            label6: "6_way_label".into(),
        }
    }
}

/// How integer codes in the six-way column map onto [`Label6`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label6Coding {
    /// Codes are [`Label6::code`] values.
    #[default]
    Listing,
    /// Original corpus order: 3 = imposter, 4 = false connection,
    /// 5 = manipulated.
    Fakeddit,
}

impl Label6Coding {
    fn decode(self, code: u8) -> Result<Label6, LabelError> {
        let listing = match (self, code) {
            (Label6Coding::Fakeddit, 3) => 5,
            (Label6Coding::Fakeddit, 5) => 3,
            (_, c) => c,
        };
        Label6::from_code(listing)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSource {
    pub path: PathBuf,
    #[serde(default)]
    pub columns: ColumnMap,
    #[serde(default)]
    pub label6_coding: Label6Coding,
}

impl CorpusSource {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            columns: ColumnMap::default(),
            label6_coding: Label6Coding::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corpus {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("corpus header is missing columns: {}", .0.join(", "))]
    MissingColumns(Vec<String>),
    #[error("line {line}: {reason}")]
    BadRow { line: u64, reason: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: u64, id: String },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadReport {
    pub samples: Vec<Sample>,
    pub skipped_empty_title: usize,
    pub skipped_missing_image: usize,
    /// Ids whose 2-way label disagrees with the collapse of their 6-way label.
    pub label2_mismatches: Vec<String>,
}

impl LoadReport {
    pub fn skipped(&self) -> usize {
        self.skipped_empty_title + self.skipped_missing_image
    }
}

/// Accepts a code (integral floats such as "1.0" included) or a label name.
fn parse_code(field: &str) -> Option<u8> {
    let f = field.trim();
    f.parse::<u8>().ok().or_else(|| {
        f.parse::<f64>()
            .ok()
            .filter(|x| x.fract() == 0.0 && (0.0..=255.0).contains(x))
            .map(|x| x as u8)
    })
}

fn parse_label<L: FromStr<Err = LabelError>>(
    field: &str,
    from_code: impl Fn(u8) -> Result<L, LabelError>,
) -> Result<L, LabelError> {
    match parse_code(field) {
        Some(c) => from_code(c),
        None => field.parse(),
    }
}

fn is_missing(field: &str) -> bool {
    let f = field.trim();
    f.is_empty() || f.eq_ignore_ascii_case("nan") || f.eq_ignore_ascii_case("none")
}

/// Reads a tab-separated corpus. Rows with an empty title or no image
/// reference are skipped and counted; malformed labels are errors.
pub fn load_corpus(src: &CorpusSource) -> Result<LoadReport, IngestError> {
    let file = File::open(&src.path).map_err(|source| IngestError::Io {
        path: src.path.clone(),
        source,
    })?;
    read_corpus(file, src)
}

pub fn read_corpus<R: std::io::Read>(reader: R, src: &CorpusSource) -> Result<LoadReport, IngestError> {
    let csv_err = |source| IngestError::Csv {
        path: src.path.clone(),
        source,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let c = &src.columns;
    let wanted = [&c.id, &c.title, &c.image_url, &c.label2, &c.label3, &c.label6];
    let mut missing = Vec::new();
    let mut idx = [0usize; 6];
    for (slot, name) in idx.iter_mut().zip(wanted) {
        match header.iter().position(|h| h.trim() == name.as_str()) {
            Some(i) => *slot = i,
            None => missing.push(name.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(IngestError::MissingColumns(missing));
    }
    let [i_id, i_title, i_url, i_l2, i_l3, i_l6] = idx;

    let mut report = LoadReport::default();
    let mut seen = HashSet::new();
    for row in rdr.records() {
        let row = row.map_err(csv_err)?;
        let line = row.position().map_or(0, |p| p.line());
        let get = |i: usize| row.get(i).unwrap_or("");
        let bad = |reason: String| IngestError::BadRow { line, reason };

        let id = get(i_id).trim().to_string();
        if id.is_empty() {
            return Err(bad("empty id".into()));
        }
        let title = match clean_title(get(i_title)) {
            Ok(t) if !is_missing(&t) => t,
            _ => {
                report.skipped_empty_title += 1;
                continue;
            }
        };
        if is_missing(get(i_url)) {
            report.skipped_missing_image += 1;
            continue;
        }
        let label6 = parse_label(get(i_l6), |c| src.label6_coding.decode(c))
            .map_err(|e| bad(e.to_string()))?;
        let label3 = parse_label(get(i_l3), Label3::from_code).map_err(|e| bad(e.to_string()))?;
        let label2 = parse_label(get(i_l2), Label2::from_code).map_err(|e| bad(e.to_string()))?;
        if !seen.insert(id.clone()) {
            return Err(IngestError::DuplicateId { line, id });
        }
        if collapse_labels(label6) != label2 {
            report.label2_mismatches.push(id.clone());
        }
        report.samples.push(Sample {
            id,
            title,
            image_ref: get(i_url).trim().to_string(),
            label6,
            label3,
            label2,
        });
    }
    Ok(report)
}

/// Writes samples as JSON lines.
pub fn write_samples(path: &Path, samples: &[Sample]) -> std::io::Result<()> {
    let mut out = String::new();
    for s in samples {
        out.push_str(&serde_json::to_string(s).map_err(std::io::Error::other)?);
        out.push('\n');
    }
    crate::util::write_atomic(path, out.as_bytes())
}

pub fn read_samples(path: &Path) -> std::io::Result<Vec<Sample>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| {
                std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("{}:{}: {e}", path.display(), i + 1),
                )
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "id\tclean_title\timage_url\t2_way_label\t3_way_label\t6_way_label";

    fn load(text: &str) -> Result<LoadReport, IngestError> {
        read_corpus(text.as_bytes(), &CorpusSource::new("mem.tsv"))
    }

    #[test]
    fn three_rows() {
        let text = format!(
            "{HEADER}\na\tfirst post\thttp://x/a.jpg\t1\t0\t0\nb\tsecond\thttp://x/b.jpg\t0\t2\t4\nc\tthird \"quoted\"\thttp://x/c.jpg\t0.0\t1\t1\n"
        );
        let r = load(&text).unwrap();
        assert_eq!(r.samples.len(), 3);
        assert_eq!(r.samples[1].label6, Label6::FalseContent);
        assert_eq!(r.samples[2].title, "third \"quoted\"");
        assert_eq!(r.samples[2].label2, Label2::Fake);
        assert!(r.label2_mismatches.is_empty());
    }

    #[test]
    fn skips_are_counted() {
        let text = format!("{HEADER}\na\t  \thttp://x/a.jpg\t1\t0\t0\nb\tok\tnan\t1\t0\t0\nc\tok\thttp://x\t1\t0\t0\n");
        let r = load(&text).unwrap();
        assert_eq!((r.skipped_empty_title, r.skipped_missing_image, r.samples.len()), (1, 1, 1));
    }

    #[test]
    fn shuffled_columns_give_same_samples() {
        let a = format!("{HEADER}\na\tt\tu\t1\t0\t0\nb\ts\tv\t0\t2\t3\n");
        let b = "6_way_label\timage_url\tid\t3_way_label\tclean_title\t2_way_label\textra\n0\tu\ta\t0\tt\t1\tz\n3\tv\tb\t2\ts\t0\tz\n";
        assert_eq!(load(&a).unwrap(), load(b).unwrap());
    }

    #[test]
    fn header_and_row_errors() {
        let err = load("id\tclean_title\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("image_url") && msg.contains("6_way_label"), "{msg}");
        let dup = format!("{HEADER}\na\tt\tu\t1\t0\t0\na\tt\tu\t1\t0\t0\n");
        assert!(matches!(load(&dup), Err(IngestError::DuplicateId { line: 3, .. })));
        let bad = format!("{HEADER}\na\tt\tu\t1\t0\t9\n");
        assert!(matches!(load(&bad), Err(IngestError::BadRow { line: 2, .. })));
    }

    #[test]
    fn label2_cross_check_and_coding() {
        let text = format!("{HEADER}\na\tt\tu\t0\t0\t0\nb\tt\tu\t0\t1\t5\n");
        let r = load(&text).unwrap();
        assert_eq!(r.label2_mismatches, ["a"]);
        assert_eq!(r.samples[1].label6, Label6::ImposterContent);
        let mut src = CorpusSource::new("mem.tsv");
        src.label6_coding = Label6Coding::Fakeddit;
        let r = read_corpus(text.as_bytes(), &src).unwrap();
        assert_eq!(r.samples[1].label6, Label6::ManipulatedContent);
    }
}
