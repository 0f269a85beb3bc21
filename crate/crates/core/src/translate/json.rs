//! Locating the JSON document inside a free-form model response.

use serde_json::Value;

use super::ParseError;

/// Returns the body of the first fenced code block, or the input unchanged.
/// The returned offset is the byte position of the body within `raw`.
fn strip_code_fence(raw: &str) -> (&str, usize) {
    let Some(open) = raw.find("```") else {
        return (raw, 0);
    };
    let after = open + 3;
    // Skip an info string such as "json" up to the end of that line.
    let body_start = match raw[after..].find('\n') {
        Some(nl) if raw[after..after + nl].trim().chars().all(|c| c.is_ascii_alphanumeric()) => {
            after + nl + 1
        }
        _ => after,
    };
    match raw[body_start..].find("```") {
        Some(close) => (&raw[body_start..body_start + close], body_start),
        None => (&raw[body_start..], body_start),
    }
}

/// Finds the first balanced top-level `{...}` object, honouring string
/// literals and escapes. Returns the slice and its byte offset.
fn first_balanced_object(s: &str) -> Result<(&str, usize), ParseError> {
    let start = s
        .find('{')
        .ok_or_else(|| ParseError::at_offset(0, "no JSON object found"))?;
    let mut depth = 0usize;
    let mut in_str = false;
    let mut escaped = false;
    for (i, c) in s[start..].char_indices() {
        if in_str {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_str = true,
            '{' | '[' => depth += 1,
            '}' | ']' => {
                depth = depth.saturating_sub(1);
                if depth == 0 {
                    let end = start + i + c.len_utf8();
                    return Ok((&s[start..end], start));
                }
            }
            _ => {}
        }
    }
    Err(ParseError::at_offset(start, "unbalanced JSON object"))
}

/// Strips code fences and surrounding prose, then parses the first object.
pub fn extract_json_object(raw: &str) -> Result<Value, ParseError> {
    let (body, fence_offset) = strip_code_fence(raw);
    let (object, obj_offset) = first_balanced_object(body).map_err(|e| e.shifted(fence_offset))?;
    let base = fence_offset + obj_offset;
    serde_json::from_str::<Value>(object).map_err(|e| {
        let offset = byte_offset(object, e.line(), e.column());
        ParseError::at_offset(base + offset, format!("invalid JSON: {e}"))
    })
}

fn byte_offset(s: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = s.split_inclusive('\n').take(line - 1).map(str::len).sum();
    (line_start + column.saturating_sub(1)).min(s.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bare_object() {
        let v = extract_json_object(r#"{"a": 1}"#).unwrap();
        assert_eq!(v["a"], 1);
    }

    #[test]
    fn fenced_with_prose() {
        let raw = "Here is the analysis:\n```json\n{\"a\": {\"b\": [1, 2]}}\n```\nHope this helps.";
        let v = extract_json_object(raw).unwrap();
        assert_eq!(v["a"]["b"][1], 2);
    }

    #[test]
    fn braces_inside_strings_are_ignored() {
        let raw = r#"Sure! {"text": "a } tricky { value", "n": 2} trailing {"x": 1}"#;
        let v = extract_json_object(raw).unwrap();
        assert_eq!(v["n"], 2);
        assert!(v.get("x").is_none());
    }

    #[test]
    fn errors_carry_positions() {
        let err = extract_json_object("prose only").unwrap_err();
        assert!(err.reason.contains("no JSON object"));
        let err = extract_json_object("xx {\"a\": [1, 2").unwrap_err();
        assert_eq!(err.offset(), Some(3));
        let err = extract_json_object("{\"a\": tru}").unwrap_err();
        assert!(err.reason.starts_with("invalid JSON"));
        assert!(err.offset().is_some());
    }
}
