use crate::store::FormatClass;

const DELIMITERS: [char; 4] = [',', '\t', ';', '|'];
const SNIFF_LINES: usize = 10;
const MAX_CELL_WORDS: usize = 3;
const MAX_CELL_LEN: usize = 128;

/// Sniff the format class of a raw payload. Total and deterministic.
///
/// Rules, in order:
/// 1. a payload that parses as a JSON object or array is `SemiStructured`;
/// 2. if, for one delimiter, the first ten non-empty lines all split into
///    the same number (at least two) of cell-like fields, it is `Structured`;
/// 3. anything else is `Unstructured`.
///
/// A cell is "cell-like" when it holds at most three words, is at most 128
/// bytes and does not end a sentence. This keeps comma-rich prose out of the
/// structured class.
pub fn classify_format(payload: &[u8]) -> FormatClass {
    let Ok(text) = std::str::from_utf8(payload) else {
        return FormatClass::Unstructured;
    };
    let trimmed = text.trim();
    if (trimmed.starts_with('{') || trimmed.starts_with('['))
        && matches!(
            serde_json::from_str::<serde_json::Value>(trimmed),
            Ok(serde_json::Value::Object(_) | serde_json::Value::Array(_))
        )
    {
        return FormatClass::SemiStructured;
    }
    match sniff_delimiter(text) {
        Some(_) => FormatClass::Structured,
        None => FormatClass::Unstructured,
    }
}

/// Delimiter for which `text` reads as a consistent table, if any.
pub fn sniff_delimiter(text: &str) -> Option<char> {
    let lines: Vec<&str> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .take(SNIFF_LINES)
        .collect();
    if lines.is_empty() {
        return None;
    }
    DELIMITERS
        .into_iter()
        .find(|&d| consistent_table(&lines, d))
}

fn consistent_table(lines: &[&str], delim: char) -> bool {
    let width = lines[0].split(delim).count();
    width >= 2
        && lines.iter().all(|line| {
            let cells: Vec<&str> = line.split(delim).collect();
            cells.len() == width && cells.iter().all(|c| cell_like(c))
        })
}

fn cell_like(cell: &str) -> bool {
    let cell = cell.trim();
    if cell.len() > MAX_CELL_LEN || cell.split_whitespace().count() > MAX_CELL_WORDS {
        return false;
    }
    // A lone `?` is the conventional missing-value marker.
    let sentence_end = cell.ends_with(['.', '!', '?']) && cell != "?";
    !sentence_end || cell.parse::<f64>().is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn csv_is_structured() {
        assert_eq!(classify_format(b"a,b,c\n1,2,3\n"), FormatClass::Structured);
        assert_eq!(classify_format(b"a\tb\n1\t2"), FormatClass::Structured);
        assert_eq!(classify_format(b"x;y\n1.;2\n"), FormatClass::Structured);
        assert_eq!(
            classify_format(b"race,weight\nCaucasian,?\n"),
            FormatClass::Structured
        );
    }

    #[test]
    fn json_is_semi_structured() {
        assert_eq!(
            classify_format(b"{\"patient\": {\"age\": 50}}"),
            FormatClass::SemiStructured
        );
        assert_eq!(
            classify_format(b"{\"a\": 1, \"b\": 2}"),
            FormatClass::SemiStructured
        );
        assert_eq!(classify_format(b"[1, 2]"), FormatClass::SemiStructured);
    }

    #[test]
    fn prose_is_unstructured() {
        assert_eq!(
            classify_format(b"Pt reports dizziness after metformin."),
            FormatClass::Unstructured
        );
        assert_eq!(
            classify_format(b"Patient 12, female, seen today. Reports fatigue."),
            FormatClass::Unstructured
        );
        assert_eq!(classify_format(b"{not json"), FormatClass::Unstructured);
        assert_eq!(classify_format(b""), FormatClass::Unstructured);
        assert_eq!(
            classify_format(&[0xff, 0xfe, b',', b'a']),
            FormatClass::Unstructured
        );
    }

    #[test]
    fn ragged_rows_are_not_a_table() {
        assert_eq!(classify_format(b"a,b,c\n1,2\n"), FormatClass::Unstructured);
    }

    proptest! {
        #[test]
        fn total_and_deterministic(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
            let a = classify_format(&bytes);
            prop_assert_eq!(a, classify_format(&bytes));
        }
    }
}
