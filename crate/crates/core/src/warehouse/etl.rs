use std::collections::HashMap;

use super::{Cell, ColumnType, WarehouseSchema};
use crate::catalog::{classify_format, sniff_delimiter};
use crate::clock::{Clock, Work};
use crate::ingest::IngestRecord;
use crate::store::FormatClass;

/// Name reported as dropped when a whole free-text payload is refused.
const TEXT_FIELD: &str = "text";

#[derive(Debug, Clone, PartialEq)]
pub struct EtlResult {
    /// Cells in schema column order; `None` when the record is rejected.
    pub row: Option<Vec<Cell>>,
    pub dropped_fields: Vec<String>,
    pub reject_reason: Option<String>,
    pub format: FormatClass,
    pub etl_micros: u64,
}

impl EtlResult {
    pub fn accepted(&self) -> bool {
        self.row.is_some()
    }

    pub fn etl_millis(&self) -> f64 {
        self.etl_micros as f64 / 1_000.0
    }
}

fn is_missing(v: &str) -> bool {
    let v = v.trim();
    v.is_empty() || v == "?" || v.eq_ignore_ascii_case("na") || v.eq_ignore_ascii_case("null")
}

/// Flatten a JSON document into dotted leaf paths. Array elements are keyed
/// by position; `null` leaves carry no value.
pub fn flatten_json(value: &serde_json::Value) -> Vec<(String, Option<String>)> {
    fn walk(prefix: &str, v: &serde_json::Value, out: &mut Vec<(String, Option<String>)>) {
        let join = |k: &str| {
            if prefix.is_empty() {
                k.to_owned()
            } else {
                format!("{prefix}.{k}")
            }
        };
        match v {
            serde_json::Value::Object(map) => {
                for (k, child) in map {
                    walk(&join(k), child, out);
                }
            }
            serde_json::Value::Array(items) => {
                for (i, child) in items.iter().enumerate() {
                    walk(&join(&i.to_string()), child, out);
                }
            }
            serde_json::Value::Null => out.push((prefix.to_owned(), None)),
            serde_json::Value::String(s) => out.push((prefix.to_owned(), Some(s.clone()))),
            other => out.push((prefix.to_owned(), Some(other.to_string()))),
        }
    }
    let mut out = Vec::new();
    walk("", value, &mut out);
    out
}

fn extract_delimited(record: &IngestRecord) -> Result<Vec<(String, Option<String>)>, String> {
    let text =
        std::str::from_utf8(&record.payload).map_err(|_| "payload is not UTF-8".to_owned())?;
    let delimiter = sniff_delimiter(text).unwrap_or(',');
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(delimiter as u8)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| format!("malformed delimited row: {e}"))?;
        if row.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        rows.push(row.iter().map(|c| c.trim().to_owned()).collect::<Vec<_>>());
    }
    let header = match &record.schema_hint {
        Some(h) => h.clone(),
        None if !rows.is_empty() => rows.remove(0),
        None => return Err("no header row".into()),
    };
    let [row] = rows.as_slice() else {
        return Err(format!("expected one data row, found {}", rows.len()));
    };
    if row.len() != header.len() {
        return Err(format!(
            "row has {} fields, header has {}",
            row.len(),
            header.len()
        ));
    }
    Ok(header
        .into_iter()
        .zip(row.iter().cloned())
        .map(|(k, v)| (k, (!is_missing(&v)).then_some(v)))
        .collect())
}

fn coerce(raw: &str, ty: &ColumnType) -> Option<Cell> {
    let raw = raw.trim();
    match ty {
        ColumnType::Integer => raw.parse::<i64>().ok().map(Cell::Int).or_else(|| {
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.fract() == 0.0 && v.abs() < 9.0e15)
                .map(|v| Cell::Int(v as i64))
        }),
        ColumnType::Real => raw
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Cell::Real),
        ColumnType::Categorical(allowed) => allowed
            .iter()
            .any(|a| a == raw)
            .then(|| Cell::Cat(raw.to_owned())),
    }
}

fn reject(
    format: FormatClass,
    dropped: Vec<String>,
    reason: String,
    start: u64,
    clock: &dyn Clock,
) -> EtlResult {
    EtlResult {
        row: None,
        dropped_fields: dropped,
        reject_reason: Some(reason),
        format,
        etl_micros: clock.now_micros().saturating_sub(start),
    }
}

/// Extract, transform and validate one record against `schema`, charging
/// each phase to `clock`.
pub fn etl_transform(
    record: &IngestRecord,
    schema: &WarehouseSchema,
    clock: &dyn Clock,
) -> EtlResult {
    let start = clock.now_micros();
    let format = record.format.unwrap_or_else(|| {
        clock.charge(Work::Classify {
            bytes: record.payload.len(),
        });
        classify_format(&record.payload)
    });

    let fields = match format {
        FormatClass::Structured => extract_delimited(record),
        FormatClass::SemiStructured => serde_json::from_slice::<serde_json::Value>(&record.payload)
            .map(|v| flatten_json(&v))
            .map_err(|e| format!("malformed JSON: {e}")),
        FormatClass::Unstructured => {
            return reject(
                format,
                vec![TEXT_FIELD.to_owned()],
                "free text has no schema columns".into(),
                start,
                clock,
            )
        }
    };
    let fields = match fields {
        Ok(f) => f,
        Err(reason) => return reject(format, Vec::new(), reason, start, clock),
    };
    clock.charge(Work::Parse {
        fields: fields.len(),
    });

    let mut dropped = Vec::new();
    let mut by_name: HashMap<&str, Option<&str>> = HashMap::new();
    for (name, value) in &fields {
        if schema.column_index(name).is_some() {
            by_name.insert(name, value.as_deref());
        } else {
            dropped.push(name.clone());
        }
    }
    clock.charge(Work::Transform {
        fields: by_name.len(),
    });

    let mut cells = Vec::with_capacity(schema.columns.len());
    for (name, ty) in &schema.columns {
        let cell = match by_name.get(name.as_str()).copied().flatten() {
            None => Cell::Null,
            Some(v) if is_missing(v) => Cell::Null,
            Some(v) => match coerce(v, ty) {
                Some(c) => c,
                None if schema.strict => {
                    clock.charge(Work::Validate {
                        fields: schema.columns.len(),
                    });
                    return reject(
                        format,
                        dropped,
                        format!("column `{name}`: `{v}` is not a valid {ty}"),
                        start,
                        clock,
                    );
                }
                None => {
                    dropped.push(name.clone());
                    Cell::Null
                }
            },
        };
        cells.push(cell);
    }
    clock.charge(Work::Validate {
        fields: schema.columns.len(),
    });

    EtlResult {
        row: Some(cells),
        dropped_fields: dropped,
        reject_reason: None,
        format,
        etl_micros: clock.now_micros() - start,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::SourceKind;
    use crate::clock::{SimClock, WorkModel};
    use proptest::prelude::*;

    fn schema(strict: bool) -> WarehouseSchema {
        WarehouseSchema::new(
            "t",
            vec![
                ("id".into(), ColumnType::Integer),
                ("bmi".into(), ColumnType::Real),
                (
                    "sex".into(),
                    ColumnType::Categorical(vec!["F".into(), "M".into()]),
                ),
            ],
            strict,
        )
    }

    fn rec(payload: &str) -> IngestRecord {
        IngestRecord::new(payload.as_bytes().to_vec(), SourceKind::Event, "t", 0)
    }

    fn clock() -> SimClock {
        SimClock::metered(0, WorkModel::default())
    }

    #[test]
    fn csv_with_inline_header() {
        let r = etl_transform(&rec("id,bmi,sex\n7,31.5,F\n"), &schema(true), &clock());
        assert_eq!(
            r.row.unwrap(),
            [Cell::Int(7), Cell::Real(31.5), Cell::Cat("F".into())]
        );
        assert!(r.dropped_fields.is_empty());
        assert!(r.etl_micros > 0);
    }

    #[test]
    fn quoted_fields_and_missing() {
        let mut r = rec("\"7\",?,\"M\"");
        r.schema_hint = Some(vec!["id".into(), "bmi".into(), "sex".into()]);
        let out = etl_transform(&r, &schema(true), &clock());
        assert_eq!(
            out.row.unwrap(),
            [Cell::Int(7), Cell::Null, Cell::Cat("M".into())]
        );
    }

    #[test]
    fn domain_violation_strict_vs_lenient() {
        let r = rec("id,bmi,sex\n7,31.5,X\n");
        let strict = etl_transform(&r, &schema(true), &clock());
        assert!(!strict.accepted());
        assert!(strict.reject_reason.unwrap().contains("sex"));
        let lenient = etl_transform(&r, &schema(false), &clock());
        assert_eq!(lenient.row.unwrap()[2], Cell::Null);
        assert_eq!(lenient.dropped_fields, ["sex"]);
    }

    #[test]
    fn multi_row_payload_rejected() {
        let r = etl_transform(&rec("id,bmi,sex\n1,2,F\n3,4,M\n"), &schema(true), &clock());
        assert!(r.reject_reason.unwrap().contains("one data row"));
    }

    #[test]
    fn json_nested_extras_dropped() {
        let doc =
            r#"{"id": 3.0, "sex": "M", "lab": {"a1c": 7.5, "glucose": 140, "notes": [null]}}"#;
        let r = etl_transform(&rec(doc), &schema(true), &clock());
        assert_eq!(
            r.row.unwrap(),
            [Cell::Int(3), Cell::Null, Cell::Cat("M".into())]
        );
        assert_eq!(r.dropped_fields, ["lab.a1c", "lab.glucose", "lab.notes.0"]);
    }

    #[test]
    fn text_rejected_whole() {
        let r = etl_transform(
            &rec("Patient reports blurred vision."),
            &schema(true),
            &clock(),
        );
        assert!(!r.accepted());
        assert_eq!(r.dropped_fields, ["text"]);
        assert_eq!(r.format, FormatClass::Unstructured);
    }

    /// Count leaves by walking the document independently of `flatten_json`.
    fn leaf_count(v: &serde_json::Value) -> usize {
        match v {
            serde_json::Value::Object(m) => m.values().map(leaf_count).sum(),
            serde_json::Value::Array(a) => a.iter().map(leaf_count).sum(),
            _ => 1,
        }
    }

    proptest! {
        #[test]
        fn extra_nested_fields_are_all_dropped(extra in prop::collection::btree_map("[a-z]{1,6}", 0i32..100, 0..6)) {
            let mut doc = serde_json::json!({"id": 1, "bmi": 22.5, "sex": "F"});
            let nested: serde_json::Map<String, serde_json::Value> =
                extra.iter().map(|(k, v)| (k.clone(), serde_json::json!(v))).collect();
            doc["detail"] = serde_json::json!({"inner": nested});
            let expected = leaf_count(&doc["detail"]);
            let r = etl_transform(&rec(&doc.to_string()), &schema(true), &clock());
            prop_assert!(r.accepted());
            prop_assert_eq!(r.dropped_fields.len(), expected);
        }
    }
}
