//! Flat `key=value` records.
//!
//! Log files hold one record per line with fields separated by TAB.
//! Document files (job specs, `lakelet.conf`) hold one field per line.
//! Values escape `\`, TAB, CR and LF with a backslash.

use std::fmt::Write as _;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Record {
    fields: Vec<(String, String)>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum KvError {
    #[error("line {line}: field `{field}` has no `=`")]
    MissingEquals { line: usize, field: String },
    #[error("line {line}: bad escape in `{field}`")]
    BadEscape { line: usize, field: String },
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("field `{key}`: cannot parse `{value}`")]
    BadValue { key: String, value: String },
}

impl Record {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.push(key, value);
        self
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.fields.push((key.to_owned(), value.to_string()));
    }

    /// First value stored under `key`.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Every value stored under `key`, in order.
    pub fn get_all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.fields
            .iter()
            .filter(move |(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str, KvError> {
        self.get(key)
            .ok_or_else(|| KvError::MissingField(key.to_owned()))
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, KvError> {
        let raw = self.require(key)?;
        raw.parse().map_err(|_| KvError::BadValue {
            key: key.to_owned(),
            value: raw.to_owned(),
        })
    }

    pub fn fields(&self) -> &[(String, String)] {
        &self.fields
    }

    /// Single-line encoding, no trailing newline.
    pub fn to_line(&self) -> String {
        let mut out = String::new();
        for (i, (k, v)) in self.fields.iter().enumerate() {
            if i > 0 {
                out.push('\t');
            }
            let _ = write!(out, "{k}=");
            escape_into(v, &mut out);
        }
        out
    }

    pub fn from_line(line: &str, line_no: usize) -> Result<Self, KvError> {
        let mut fields = Vec::new();
        for field in line.split('\t').filter(|f| !f.is_empty()) {
            fields.push(split_field(field, line_no)?);
        }
        Ok(Self { fields })
    }

    /// Multi-line document; blank lines and `#` comments are skipped.
    pub fn from_document(text: &str) -> Result<Self, KvError> {
        let mut fields = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = split_field(line, i + 1)?;
            fields.push((k.trim().to_owned(), v.trim().to_owned()));
        }
        Ok(Self { fields })
    }

    pub fn to_document(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.fields {
            let _ = write!(out, "{k}=");
            escape_into(v, &mut out);
            out.push('\n');
        }
        out
    }
}

fn split_field(field: &str, line: usize) -> Result<(String, String), KvError> {
    let (k, v) = field
        .split_once('=')
        .ok_or_else(|| KvError::MissingEquals {
            line,
            field: field.to_owned(),
        })?;
    let v = unescape(v).ok_or_else(|| KvError::BadEscape {
        line,
        field: field.to_owned(),
    })?;
    Ok((k.to_owned(), v))
}

fn escape_into(value: &str, out: &mut String) {
    for c in value.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
}

fn unescape(value: &str) -> Option<String> {
    let mut out = String::with_capacity(value.len());
    let mut chars = value.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next()? {
            '\\' => out.push('\\'),
            't' => out.push('\t'),
            'n' => out.push('\n'),
            'r' => out.push('\r'),
            _ => return None,
        }
    }
    Some(out)
}

/// Complete lines of an append-only log. A trailing fragment without a
/// newline is a torn write and is ignored.
pub(crate) fn complete_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let complete = match text.rfind('\n') {
        Some(end) => &text[..=end],
        None => "",
    };
    complete
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn line_round_trip_with_awkward_values() {
        let rec = Record::new()
            .with("detail", "tab\there\nnewline \\ slash")
            .with("n", 3);
        let line = rec.to_line();
        assert!(!line.contains('\n'));
        assert_eq!(Record::from_line(&line, 1).unwrap(), rec);
    }

    #[test]
    fn document_skips_comments_and_keeps_repeats() {
        let doc = "# job\njob_id = j1\n\ntask=1:100\ntask=2:200\n";
        let rec = Record::from_document(doc).unwrap();
        assert_eq!(rec.get("job_id"), Some("j1"));
        assert_eq!(rec.get_all("task").collect::<Vec<_>>(), ["1:100", "2:200"]);
    }

    #[test]
    fn torn_tail_is_ignored() {
        let lines: Vec<_> = complete_lines("a=1\nb=2\nc=").collect();
        assert_eq!(lines, [(1, "a=1"), (2, "b=2")]);
    }

    #[test]
    fn missing_equals_is_an_error() {
        assert!(matches!(
            Record::from_line("oops", 4),
            Err(KvError::MissingEquals { line: 4, .. })
        ));
    }

    proptest! {
        #[test]
        fn any_value_survives_a_line(v in ".*") {
            let rec = Record::new().with("v", &v);
            let back = Record::from_line(&rec.to_line(), 1).unwrap();
            prop_assert_eq!(back.get("v"), Some(v.as_str()));
        }
    }
}
