//! Word → hypernym-depth table, loaded from a WordNet database directory or
//! from a plain `word<TAB>depth` table.
//!
//! The depth of a synset is the length of its longest hypernym chain to a
//! root (roots have depth 0). A word's depth is the maximum over all of its
//! noun and verb senses.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::lexicon::base_forms;

/// Normalizing constant for the specificity score.
pub const D_MAX: u32 = 20;

#[derive(Debug, Error)]
pub enum WordNetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Malformed {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("no data.noun or data.verb file in {0}")]
    NoDataFiles(PathBuf),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WordNetDepthTable {
    depths: HashMap<String, u32>,
    source: String,
}

/// The small table bundled for offline runs and tests.
const MINI_TABLE: &str = include_str!("../../testdata/depth_table_mini.tsv");

impl WordNetDepthTable {
    pub fn from_pairs<I, S>(pairs: I, source: impl Into<String>) -> Self
    where
        I: IntoIterator<Item = (S, u32)>,
        S: Into<String>,
    {
        let mut depths = HashMap::new();
        for (w, d) in pairs {
            let e = depths.entry(w.into().to_lowercase()).or_insert(d);
            *e = (*e).max(d);
        }
        Self {
            depths,
            source: source.into(),
        }
    }

    pub fn bundled_mini() -> Self {
        Self::parse_tsv(MINI_TABLE, Path::new("<bundled>"))
            .expect("bundled depth table is well-formed")
            .with_source("bundled-mini")
    }

    fn with_source(mut self, source: &str) -> Self {
        self.source = source.to_string();
        self
    }

    /// Loads either a WordNet `dict` directory or a two-column table file.
    pub fn load(path: &Path) -> Result<Self, WordNetError> {
        if path.is_dir() {
            Self::from_wordnet_dir(path)
        } else {
            let text = fs::read_to_string(path).map_err(|source| WordNetError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            Ok(Self::parse_tsv(&text, path)?.with_source(&path.display().to_string()))
        }
    }

    fn parse_tsv(text: &str, path: &Path) -> Result<Self, WordNetError> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = |reason: &str| WordNetError::Malformed {
                path: path.to_path_buf(),
                line: i + 1,
                reason: reason.to_string(),
            };
            let (word, depth) = line
                .split_once(['\t', ' '])
                .ok_or_else(|| malformed("expected word and depth"))?;
            let depth: u32 = depth.trim().parse().map_err(|_| malformed("depth is not an integer"))?;
            pairs.push((word.trim().to_string(), depth));
        }
        Ok(Self::from_pairs(pairs, ""))
    }

    /// Reads `data.noun` and `data.verb` from a WordNet database directory.
    pub fn from_wordnet_dir(dir: &Path) -> Result<Self, WordNetError> {
        let mut graph = SynsetGraph::default();
        let mut found = false;
        for (file, pos) in [("data.noun", 'n'), ("data.verb", 'v')] {
            let path = dir.join(file);
            if !path.exists() {
                continue;
            }
            found = true;
            let text = fs::read_to_string(&path).map_err(|source| WordNetError::Io {
                path: path.clone(),
                source,
            })?;
            graph.parse_data_file(&text, pos, &path)?;
        }
        if !found {
            return Err(WordNetError::NoDataFiles(dir.to_path_buf()));
        }
        Ok(graph.into_table(&dir.display().to_string()))
    }

    /// Exact lookup, falling back to regular inflection base forms.
    pub fn depth(&self, word: &str) -> Option<u32> {
        let word = word.to_lowercase();
        if let Some(&d) = self.depths.get(&word) {
            return Some(d);
        }
        base_forms(&word)
            .iter()
            .filter_map(|b| self.depths.get(b).copied())
            .max()
    }

    pub fn len(&self) -> usize {
        self.depths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depths.is_empty()
    }

    pub fn max_depth(&self) -> u32 {
        self.depths.values().copied().max().unwrap_or(0)
    }

    /// Where the table came from, for report metadata.
    pub fn source(&self) -> &str {
        &self.source
    }
}

type SynsetKey = (char, String);

#[derive(Default)]
struct SynsetGraph {
    hypernyms: HashMap<SynsetKey, Vec<SynsetKey>>,
    lemmas: HashMap<SynsetKey, Vec<String>>,
}

impl SynsetGraph {
    fn parse_data_file(&mut self, text: &str, pos: char, path: &Path) -> Result<(), WordNetError> {
        for (i, line) in text.lines().enumerate() {
            // License header lines start with two spaces.
            if line.starts_with(' ') || line.trim().is_empty() {
                continue;
            }
            let malformed = |reason: String| WordNetError::Malformed {
                path: path.to_path_buf(),
                line: i + 1,
                reason,
            };
            let data = line.split(" | ").next().unwrap_or(line);
            let fields: Vec<&str> = data.split_whitespace().collect();
            let get = |idx: usize| {
                fields
                    .get(idx)
                    .copied()
                    .ok_or_else(|| malformed(format!("truncated record (field {idx})")))
            };

            let offset = get(0)?.to_string();
            let w_cnt = usize::from_str_radix(get(3)?, 16)
                .map_err(|_| malformed("bad word count".into()))?;
            let mut words = Vec::with_capacity(w_cnt);
            for w in 0..w_cnt {
                let lemma = get(4 + 2 * w)?;
                // Adjective markers like "(a)" never occur in noun/verb files,
                // but strip them defensively.
                let lemma = lemma.split('(').next().unwrap_or(lemma);
                words.push(lemma.to_lowercase());
            }
            let p_idx = 4 + 2 * w_cnt;
            let p_cnt: usize = get(p_idx)?
                .parse()
                .map_err(|_| malformed("bad pointer count".into()))?;
            let mut parents = Vec::new();
            for p in 0..p_cnt {
                let base = p_idx + 1 + 4 * p;
                let symbol = get(base)?;
                if symbol == "@" || symbol == "@i" {
                    let target = get(base + 1)?.to_string();
                    let target_pos = get(base + 2)?.chars().next().unwrap_or(pos);
                    parents.push((target_pos, target));
                }
            }
            let key = (pos, offset);
            self.hypernyms.insert(key.clone(), parents);
            self.lemmas.insert(key, words);
        }
        Ok(())
    }

    fn into_table(self, source: &str) -> WordNetDepthTable {
        let mut memo: HashMap<SynsetKey, u32> = HashMap::new();
        let mut pairs = Vec::new();
        for (key, words) in &self.lemmas {
            let d = self.depth_of(key, &mut memo, &mut Vec::new());
            pairs.extend(words.iter().map(|w| (w.clone(), d)));
        }
        WordNetDepthTable::from_pairs(pairs, source)
    }

    fn depth_of(
        &self,
        key: &SynsetKey,
        memo: &mut HashMap<SynsetKey, u32>,
        stack: &mut Vec<SynsetKey>,
    ) -> u32 {
        if let Some(&d) = memo.get(key) {
            return d;
        }
        // A cycle or a pointer to a missing synset ends the chain here.
        if stack.contains(key) {
            return 0;
        }
        stack.push(key.clone());
        let depth = self
            .hypernyms
            .get(key)
            .into_iter()
            .flatten()
            .filter(|p| self.hypernyms.contains_key(*p))
            .map(|p| 1 + self.depth_of(p, memo, stack))
            .max()
            .unwrap_or(0);
        stack.pop();
        memo.insert(key.clone(), depth);
        depth
    }
}
