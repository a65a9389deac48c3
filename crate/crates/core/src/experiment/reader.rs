//! Schema-on-read: build an analytics table from raw lake entities at
//! query time. Every read goes through the guard and is audited.

use std::collections::{BTreeMap, HashMap};

use super::notes::extract_note;
use super::uci::{lake_columns, ENCOUNTER_ID};
use crate::analytics::{RawTable, Value};
use crate::catalog::{sniff_delimiter, SearchQuery};
use crate::lake::{Lake, LakeError};
use crate::security::Ticket;
use crate::store::FormatClass;
use crate::warehouse::flatten_json;

/// Lake entities read as encounter rows, ordered by encounter id.
#[derive(Debug, Clone, PartialEq)]
pub struct LakeView {
    pub table: RawTable,
    pub encounter_ids: Vec<u64>,
    /// Entities that yielded no readable encounter, plus repeated ids after
    /// the first.
    pub skipped: usize,
}

impl LakeView {
    pub fn row_of(&self) -> HashMap<u64, usize> {
        self.encounter_ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i))
            .collect()
    }
}

fn delimited_rows(text: &str, hint: Option<&[String]>) -> Vec<BTreeMap<String, String>> {
    let delimiter = sniff_delimiter(text).unwrap_or(',');
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(delimiter as u8)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<String>> = reader
        .records()
        .filter_map(Result::ok)
        .map(|r| r.iter().map(|c| c.trim().to_owned()).collect())
        .filter(|r: &Vec<String>| r.iter().any(|c| !c.is_empty()))
        .collect();
    let header = match hint {
        Some(h) => h.to_vec(),
        None if !rows.is_empty() => rows.remove(0),
        None => return Vec::new(),
    };
    rows.into_iter()
        .filter(|r| r.len() == header.len())
        .map(|r| header.iter().cloned().zip(r).collect())
        .collect()
}

fn json_rows(bytes: &[u8]) -> Vec<BTreeMap<String, String>> {
    let Ok(doc) = serde_json::from_slice::<serde_json::Value>(bytes) else {
        return Vec::new();
    };
    vec![flatten_json(&doc)
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .collect()]
}

/// Field maps an entity holds, according to its catalogued format.
pub fn read_fields(
    bytes: &[u8],
    format: FormatClass,
    hint: Option<&[String]>,
) -> Vec<BTreeMap<String, String>> {
    match format {
        FormatClass::Structured => {
            std::str::from_utf8(bytes).map_or(Vec::new(), |t| delimited_rows(t, hint))
        }
        FormatClass::SemiStructured => json_rows(bytes),
        FormatClass::Unstructured => {
            std::str::from_utf8(bytes).map_or(Vec::new(), |t| vec![extract_note(t)])
        }
    }
}

/// Read every catalogued entity and project it onto the lake's encounter
/// columns. Attributes a source lacks are missing.
pub fn read_lake_table(lake: &Lake, ticket: &Ticket) -> Result<LakeView, LakeError> {
    let columns = lake_columns();
    let mut rows: Vec<(u64, Vec<Value>)> = Vec::new();
    let mut skipped = 0;
    for entry in lake.search(&SearchQuery::all()) {
        let bytes = lake.get_blob(entry.entity, ticket)?;
        let maps = read_fields(
            &bytes,
            entry.technical.format,
            entry.technical.schema_hint.as_deref(),
        );
        if maps.is_empty() {
            skipped += 1;
        }
        for fields in maps {
            let Some(id) = fields
                .get(ENCOUNTER_ID)
                .and_then(|v| v.trim().parse::<f64>().ok())
            else {
                skipped += 1;
                continue;
            };
            let values = columns
                .iter()
                .map(|(name, kind)| {
                    fields
                        .get(name)
                        .map_or(Value::Missing, |raw| Value::parse(raw, *kind))
                })
                .collect();
            rows.push((id as u64, values));
        }
    }
    rows.sort_by_key(|(id, _)| *id);
    let before = rows.len();
    rows.dedup_by_key(|(id, _)| *id);
    skipped += before - rows.len();

    let mut table = RawTable::new(columns);
    let mut encounter_ids = Vec::with_capacity(rows.len());
    for (id, values) in rows {
        encounter_ids.push(id);
        table.push(values);
    }
    Ok(LakeView {
        table,
        encounter_ids,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delimited_with_and_without_hint() {
        let rows = read_fields(b"a,b\n1,2\n3,4\n", FormatClass::Structured, None);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1]["b"], "4");
        let hint = vec!["x".to_owned(), "y".to_owned()];
        let rows = read_fields(b"1,2\n", FormatClass::Structured, Some(&hint));
        assert_eq!(rows[0]["y"], "2");
    }

    #[test]
    fn json_nulls_are_absent() {
        let rows = read_fields(
            br#"{"a": null, "b": {"c": 2}}"#,
            FormatClass::SemiStructured,
            None,
        );
        assert_eq!(rows[0].len(), 1);
        assert_eq!(rows[0]["b.c"], "2");
        assert!(read_fields(b"{oops", FormatClass::SemiStructured, None).is_empty());
    }
}
