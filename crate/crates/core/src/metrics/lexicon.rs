//! Bundled word lists and tokenization rules used by the coverage and
//! specificity scores.

use std::collections::HashSet;
use std::sync::OnceLock;

use crate::translate::{content_text, ParsedOutput};

/// Version tag of the generic-term list; recorded in every metric report.
pub const GENERIC_TERMS_VERSION: &str = "generic-v1";

const GENERIC_TERMS: &[&str] = &[
    "object", "thing", "item", "stuff", "element", "area", "background", "shape",
];

const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any",
    "are", "around", "as", "at", "be", "because", "been", "before", "being", "below", "between",
    "both", "but", "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each",
    "either", "few", "for", "from", "further", "had", "has", "have", "having", "he", "her",
    "here", "hers", "herself", "him", "himself", "his", "how", "however", "if", "in", "into",
    "is", "it", "its", "itself", "just", "like", "likely", "may", "me", "might", "more", "most",
    "much", "must", "my", "myself", "no", "nor", "not", "now", "of", "off", "on", "once", "only",
    "or", "other", "our", "ours", "ourselves", "out", "over", "own", "perhaps", "same", "shall",
    "she", "should", "so", "some", "such", "than", "that", "the", "their", "theirs", "them",
    "themselves", "then", "there", "these", "they", "this", "those", "through", "to", "too",
    "under", "until", "up", "upon", "very", "was", "we", "were", "what", "when", "where",
    "whether", "which", "while", "who", "whom", "whose", "why", "will", "with", "within",
    "without", "would", "yet", "you", "your", "yours", "yourself", "yourselves",
];

fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| STOPWORDS.iter().copied().collect())
}

pub fn is_stopword(word: &str) -> bool {
    stopwords().contains(word)
}

/// Lowercase alphabetic tokens of length >= 2 that are not stopwords,
/// in text order with repetitions kept.
pub fn content_words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphabetic())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_lowercase)
        .filter(|t| !is_stopword(t))
        .collect()
}

/// Candidate base forms for an inflected English word (noun then verb
/// detachment rules), most specific rule first.
pub fn base_forms(word: &str) -> Vec<String> {
    const RULES: &[(&str, &str)] = &[
        ("ses", "s"),
        ("xes", "x"),
        ("zes", "z"),
        ("ches", "ch"),
        ("shes", "sh"),
        ("men", "man"),
        ("ies", "y"),
        ("s", ""),
        ("es", "e"),
        ("es", ""),
        ("ed", "e"),
        ("ed", ""),
        ("ing", "e"),
        ("ing", ""),
    ];
    let mut out = Vec::new();
    for (suffix, replacement) in RULES {
        if let Some(stem) = word.strip_suffix(suffix) {
            if !stem.is_empty() {
                let form = format!("{stem}{replacement}");
                if !out.contains(&form) {
                    out.push(form);
                }
            }
        }
    }
    out
}

fn head_token(item: &str) -> Option<String> {
    item.split(|c: char| !c.is_alphabetic())
        .rfind(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Whether the head noun (last alphabetic token) of an object name is generic.
pub fn is_generic(item: &str) -> bool {
    let Some(head) = head_token(item) else {
        return true;
    };
    GENERIC_TERMS.contains(&head.as_str())
        || base_forms(&head)
            .iter()
            .any(|b| GENERIC_TERMS.contains(&b.as_str()))
}

pub fn is_multiword(item: &str) -> bool {
    item.split_whitespace().count() >= 2
}

/// How the object list fed to the coverage score was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateKind {
    /// The strategy's own object list.
    Direct,
    /// Node names of a graph output.
    GraphNodes,
    /// Noun-like phrases extracted from free text.
    TextPhrases,
}

/// Object names used for the coverage score of any strategy.
pub fn object_surrogate(parsed: &ParsedOutput) -> (Vec<String>, SurrogateKind) {
    match parsed {
        ParsedOutput::ObjectList(l) => (l.items().to_vec(), SurrogateKind::Direct),
        ParsedOutput::RelationalMapping(g) => (
            g.objects.iter().map(|o| o.name.clone()).collect(),
            SurrogateKind::GraphNodes,
        ),
        ParsedOutput::SceneGraph(s) => (
            s.scene_elements.iter().map(|e| e.object.clone()).collect(),
            SurrogateKind::GraphNodes,
        ),
        other => (text_phrases(&content_text(other)), SurrogateKind::TextPhrases),
    }
}

/// Maximal runs of content tokens, broken at stopwords, punctuation and
/// non-alphabetic tokens; each run contributes its last one or two tokens.
/// Phrases are deduplicated case-insensitively in first-seen order.
pub fn text_phrases(text: &str) -> Vec<String> {
    let mut phrases: Vec<String> = Vec::new();
    let mut seen = HashSet::new();
    let mut run: Vec<&str> = Vec::new();

    let mut flush = |run: &mut Vec<&str>| {
        if !run.is_empty() {
            let tail = &run[run.len().saturating_sub(2)..];
            let phrase = tail.join(" ");
            if seen.insert(phrase.to_lowercase()) {
                phrases.push(phrase);
            }
            run.clear();
        }
    };

    for raw in text.split_whitespace() {
        let breaks_after = raw.ends_with([',', '.', ';', ':', '!', '?', ')']);
        let token = raw.trim_matches(|c: char| !c.is_alphabetic());
        let usable = token.chars().count() >= 2
            && token.chars().all(|c| c.is_alphabetic() || c == '-' || c == '\'')
            && !is_stopword(&token.to_lowercase());
        if usable {
            run.push(token);
        } else {
            flush(&mut run);
        }
        if breaks_after {
            flush(&mut run);
        }
    }
    flush(&mut run);
    phrases
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn content_word_rules() {
        assert_eq!(
            content_words("The dog, a 3-legged Animal, is x here!"),
            ["dog", "legged", "animal"]
        );
        assert!(content_words("a an the of").is_empty());
    }

    #[test]
    fn generic_head_noun() {
        assert!(is_generic("thing"));
        assert!(is_generic("red and white object"));
        assert!(is_generic("small things"));
        assert!(!is_generic("object detector"));
        assert!(!is_generic("oak tree"));
        assert!(is_generic("1234"));
    }

    #[test]
    fn base_form_candidates() {
        assert!(base_forms("dogs").contains(&"dog".to_string()));
        assert!(base_forms("boxes").contains(&"box".to_string()));
        assert!(base_forms("ponies").contains(&"pony".to_string()));
        assert!(base_forms("women").contains(&"woman".to_string()));
        assert!(base_forms("s").is_empty());
    }

    #[test]
    fn phrases_from_description() {
        let p = text_phrases("A small, white teapot sits on a brown table.");
        assert_eq!(p, ["small", "teapot sits", "brown table"]);
        assert!(text_phrases("").is_empty());
    }
}
