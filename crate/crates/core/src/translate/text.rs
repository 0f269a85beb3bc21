//! Sentence segmentation and title handling.

use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

/// Tokens ending in '.' that do not close a sentence.
const ABBREVIATIONS: &[&str] = &[
    "Mr.", "Mrs.", "Ms.", "Dr.", "Prof.", "Sr.", "Jr.", "St.", "Mt.", "Gen.", "Gov.", "Sen.",
    "Rep.", "Rev.", "Lt.", "Col.", "Capt.", "Sgt.", "Inc.", "Ltd.", "Co.", "Corp.", "vs.", "No.",
    "e.g.", "i.e.", "U.S.", "U.K.", "U.N.", "E.U.", "D.C.", "a.m.", "p.m.", "approx.",
];

const CLOSERS: &[char] = &['"', '\'', ')', ']', '\u{201D}', '\u{2019}'];

fn is_abbreviation(text_before: &str) -> bool {
    let word = text_before
        .rsplit(|c: char| c.is_whitespace())
        .next()
        .unwrap_or("");
    // "then-U.S." or "(Dr." still count.
    let word = word.rsplit(['-', '(', '"', '\u{201C}']).next().unwrap_or(word);
    if ABBREVIATIONS.contains(&word) {
        return true;
    }
    // Single initials such as "J." in "J. Smith".
    let mut chars = word.chars();
    matches!(
        (chars.next(), chars.next(), chars.next()),
        (Some(c), Some('.'), None) if c.is_uppercase()
    )
}

/// Splits text into sentences on '.', '!' or '?' followed by whitespace or
/// end of input, skipping known abbreviations and initials.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut sentences = Vec::new();
    let mut start = 0;
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;

    while i < chars.len() {
        let (pos, c) = chars[i];
        if !matches!(c, '.' | '!' | '?') {
            i += 1;
            continue;
        }
        // Absorb runs like "?!" or '."'.
        let mut j = i + 1;
        while j < chars.len() && (matches!(chars[j].1, '.' | '!' | '?') || CLOSERS.contains(&chars[j].1)) {
            j += 1;
        }
        let at_boundary = j == chars.len() || chars[j].1.is_whitespace();
        let end = if j == chars.len() { text.len() } else { chars[j].0 };
        if at_boundary && !(c == '.' && j == i + 1 && is_abbreviation(&text[start..=pos])) {
            push_sentence(&mut sentences, &text[start..end]);
            start = end;
        }
        i = j;
    }
    push_sentence(&mut sentences, &text[start..]);
    sentences
}

fn push_sentence(out: &mut Vec<String>, s: &str) {
    let s = s.trim();
    if s.chars().any(char::is_alphanumeric) {
        out.push(s.to_string());
    }
}

pub fn count_sentences(text: &str) -> usize {
    split_sentences(text).len()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TitleError {
    #[error("title empty after cleaning")]
    Empty,
}

/// Zero-width and bidi format characters that carry no visible content.
fn is_invisible_format(c: char) -> bool {
    matches!(
        c,
        '\u{00AD}'
            | '\u{200B}'..='\u{200F}'
            | '\u{202A}'..='\u{202E}'
            | '\u{2060}'..='\u{2064}'
            | '\u{2066}'..='\u{2069}'
            | '\u{FEFF}'
    )
}

/// NFC-normalizes and collapses whitespace runs. Control and zero-width
/// characters are dropped.
pub fn clean_title(title: &str) -> Result<String, TitleError> {
    let mut out = String::with_capacity(title.len());
    let mut pending_space = false;
    for c in title.nfc() {
        if c.is_whitespace() {
            pending_space = true;
        } else if c.is_control() || is_invisible_format(c) {
            continue;
        } else {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        }
    }
    if out.is_empty() {
        return Err(TitleError::Empty);
    }
    Ok(out)
}

/// Title first, one space, then the flattened description.
pub fn merge(t_clean: &str, t_desc: &str) -> String {
    debug_assert!(!t_clean.is_empty() && !t_desc.is_empty());
    let mut out = String::with_capacity(t_clean.len() + 1 + t_desc.len());
    out.push_str(t_clean);
    out.push(' ');
    out.push_str(t_desc);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn description_with_abbreviation() {
        let text = "Nikki Haley, then-U.S. Ambassador to the United Nations, speaks at a podium, surrounded by other officials.  They appear to be at a press conference or similar official event.";
        let s = split_sentences(text);
        assert_eq!(s.len(), 2, "{s:?}");
        assert!(s[0].ends_with("officials."));
        assert!(s[1].starts_with("They appear"));
    }

    #[test]
    fn segmentation_edge_cases() {
        assert_eq!(split_sentences(""), Vec::<String>::new());
        assert_eq!(split_sentences("   "), Vec::<String>::new());
        assert_eq!(split_sentences("No terminator"), vec!["No terminator"]);
        assert_eq!(split_sentences("Wait?! Yes."), vec!["Wait?!", "Yes."]);
        assert_eq!(split_sentences("It costs 3.5 dollars. Cheap."), vec!["It costs 3.5 dollars.", "Cheap."]);
        assert_eq!(split_sentences("He said \"stop.\" Then left."), vec!["He said \"stop.\"", "Then left."]);
        assert_eq!(split_sentences("Dr. Smith met J. Doe today."), vec!["Dr. Smith met J. Doe today."]);
        assert_eq!(split_sentences("..."), Vec::<String>::new());
        assert_eq!(count_sentences("One. Two. Three. Four. Five."), 5);
    }

    #[test]
    fn whitespace_collapse() {
        assert_eq!(clean_title("Hello\t\tworld ").unwrap(), "Hello world");
        assert_eq!(clean_title("  a \n b  ").unwrap(), "a b");
    }

    #[test]
    fn clean_title_is_identity_on_clean_input() {
        let t = "Use plastic tubing to make a more accurate teapot spout";
        assert_eq!(clean_title(t).unwrap(), t);
    }

    #[test]
    fn nfc_and_zero_width_joiner() {
        // Hand-built table: NFD "e" + U+0301 -> U+00E9, "n" + U+0303 -> U+00F1; U+200D dropped.
        let input = "Cafe\u{301} man\u{303}ana\u{200D} news\u{0007}";
        let expected = "Caf\u{e9} ma\u{f1}ana news";
        assert_eq!(clean_title(input).unwrap(), expected);
    }

    #[test]
    fn empty_after_cleaning() {
        assert_eq!(clean_title(" \t\u{200B}\u{0001} "), Err(TitleError::Empty));
    }

    #[test]
    fn merge_examples() {
        assert_eq!(merge("Title", "desc"), "Title desc");
    }

    proptest! {
        #[test]
        fn merge_length_and_prefix(a in "[^\\s]{1,20}( [^\\s]{1,20}){0,3}", b in ".{1,60}") {
            prop_assume!(!b.is_empty());
            let m = merge(&a, &b);
            prop_assert!(m.starts_with(&a));
            prop_assert_eq!(m.len(), a.len() + 1 + b.len());
        }

        #[test]
        fn clean_title_is_idempotent(s in "\\PC{0,40}") {
            if let Ok(once) = clean_title(&s) {
                prop_assert_eq!(clean_title(&once).unwrap(), once.clone());
                prop_assert!(!once.contains("  "));
                prop_assert_eq!(once.trim(), once.as_str());
            }
        }

        #[test]
        fn segmentation_never_panics(s in "\\PC{0,120}") {
            for sentence in split_sentences(&s) {
                prop_assert!(!sentence.is_empty());
            }
        }
    }
}
