use std::path::{Path, PathBuf};

use super::{ingest_record, IngestError, IngestRecord, IngestReport};
use crate::catalog::{classify_format, sniff_delimiter, BusinessMeta, SourceKind};
use crate::clock::Work;
use crate::lake::Lake;
use crate::security::Ticket;
use crate::store::FormatClass;

#[derive(Debug, Clone, Default)]
pub struct BulkOptions {
    /// Split structured files into one entity per data row. The header row
    /// becomes the rows' schema hint.
    pub split_records: bool,
    /// Overrides the per-file source name (the file name by default).
    pub source_name: Option<String>,
    pub business: BusinessMeta,
}

fn source_name(path: &Path, opts: &BulkOptions) -> String {
    opts.source_name.clone().unwrap_or_else(|| {
        path.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string())
    })
}

/// Ingest files as-is. Stops at the first unreadable path; everything
/// committed before it stays committed and is carried in the error.
pub fn ingest_bulk<P: AsRef<Path>>(
    lake: &Lake,
    paths: &[P],
    opts: &BulkOptions,
    ticket: &Ticket,
) -> Result<IngestReport, IngestError> {
    let mut report = IngestReport::default();
    for path in paths {
        let path = path.as_ref();
        let da_time = lake.clock().now_millis();
        let bytes = match std::fs::read(path) {
            Ok(b) => b,
            Err(source) => {
                return Err(IngestError::IoFailure {
                    path: PathBuf::from(path),
                    source,
                    partial: Box::new(report),
                })
            }
        };
        let name = source_name(path, opts);
        lake.clock().charge(Work::Classify { bytes: bytes.len() });
        let format = classify_format(&bytes);
        let delimiter = (format == FormatClass::Structured)
            .then(|| std::str::from_utf8(&bytes).ok().and_then(sniff_delimiter))
            .flatten();
        let header = delimiter.map(|d| header_of(&bytes, d));

        match (opts.split_records, delimiter) {
            (true, Some(_)) => {
                let header = header.expect("structured file has a header");
                for row in data_rows(&bytes) {
                    let mut record = IngestRecord::new(
                        row.to_vec(),
                        SourceKind::Bulk,
                        &name,
                        lake.clock().now_millis(),
                    );
                    record.schema_hint = Some(header.clone());
                    record.format = Some(FormatClass::Structured);
                    report
                        .entries
                        .push(ingest_record(lake, record, &opts.business, ticket)?);
                }
            }
            _ => {
                let mut record = IngestRecord::new(bytes, SourceKind::Bulk, &name, da_time);
                record.schema_hint = header;
                record.format = Some(format);
                report
                    .entries
                    .push(ingest_record(lake, record, &opts.business, ticket)?);
            }
        }
    }
    Ok(report)
}

fn header_of(bytes: &[u8], delimiter: char) -> Vec<String> {
    let text = String::from_utf8_lossy(bytes);
    text.lines()
        .find(|l| !l.trim().is_empty())
        .map(|l| l.split(delimiter).map(|c| c.trim().to_owned()).collect())
        .unwrap_or_default()
}

/// Non-empty lines after the header, without their terminators.
fn data_rows(bytes: &[u8]) -> impl Iterator<Item = &[u8]> {
    bytes
        .split(|&b| b == b'\n')
        .map(|l| l.strip_suffix(b"\r").unwrap_or(l))
        .filter(|l| !l.iter().all(u8::is_ascii_whitespace))
        .skip(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::SearchQuery;
    use crate::ingest::testutil::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn three_files_three_entries() {
        let dir = tempfile::tempdir().unwrap();
        let paths = [
            write(dir.path(), "a.csv", "x,y\n1,2\n"),
            write(dir.path(), "b.json", "{\"k\": [1, 2]}"),
            write(dir.path(), "c.txt", "free text note"),
        ];
        let lake = metered_lake();
        let t = writer(&lake);
        let report = ingest_bulk(&lake, &paths, &BulkOptions::default(), &t).unwrap();
        assert_eq!(report.count(), 3);
        assert_eq!(lake.catalog().len(), 3);
        let formats: Vec<_> = report.entries.iter().map(|e| e.format).collect();
        assert_eq!(
            formats,
            [
                FormatClass::Structured,
                FormatClass::SemiStructured,
                FormatClass::Unstructured
            ]
        );
        let csv = lake.catalog().get(report.entries[0].id).unwrap();
        assert_eq!(
            csv.technical.schema_hint,
            Some(vec!["x".into(), "y".into()])
        );
        for (e, p) in report.entries.iter().zip(&paths) {
            assert_eq!(
                &*lake.get_blob(e.id, &t).unwrap(),
                &std::fs::read(p).unwrap()[..]
            );
        }
    }

    #[test]
    fn split_csv_one_entity_per_row() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = String::from("patient,age,a1c\n");
        for i in 0..100 {
            body.push_str(&format!("{i},{},{}\r\n", 40 + i % 30, 5 + i % 4));
        }
        let path = write(dir.path(), "encounters.csv", &body);
        let lake = metered_lake();
        let t = writer(&lake);
        let opts = BulkOptions {
            split_records: true,
            ..Default::default()
        };
        let report = ingest_bulk(&lake, &[&path], &opts, &t).unwrap();
        assert_eq!(report.count(), 100);
        let entries = lake.search(&SearchQuery::all().source_kind(SourceKind::Bulk));
        assert_eq!(entries.len(), 100);
        assert!(entries
            .iter()
            .all(|e| e.operational.source_name == "encounters.csv"));
        assert_eq!(
            &*lake.get_blob(report.entries[7].id, &t).unwrap(),
            b"7,47,8"
        );
    }

    #[test]
    fn unreadable_path_keeps_prior_commits() {
        let dir = tempfile::tempdir().unwrap();
        let good = write(dir.path(), "ok.txt", "hello");
        let missing = dir.path().join("missing.csv");
        let lake = metered_lake();
        let t = writer(&lake);
        let err =
            ingest_bulk(&lake, &[good, missing.clone()], &BulkOptions::default(), &t).unwrap_err();
        match err {
            IngestError::IoFailure { path, partial, .. } => {
                assert_eq!(path, missing);
                assert_eq!(partial.count(), 1);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(lake.catalog().len(), 1);
    }
}
