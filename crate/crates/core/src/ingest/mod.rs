//! Ingestion connectors: bulk files, event documents and a TCP stream.
//!
//! Every connector follows the same path per record: stamp the arrival time
//! `da_time`, store the bytes untouched, then register metadata, which stamps
//! `ml_time`. The ingestion time of a record is `ml_time - da_time`.

mod bulk;
mod stream;

use std::path::PathBuf;

pub use bulk::{ingest_bulk, BulkOptions};
pub use stream::{ingest_stream, StreamListener, StreamOptions, MAX_FRAME_BYTES};

use crate::catalog::{classify_format, BusinessMeta, Provenance, SourceKind, TechnicalMeta};
use crate::clock::Work;
use crate::lake::{Lake, LakeError};
use crate::security::Ticket;
use crate::store::{EntityId, FormatClass};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("negative ingestion interval: ml_time {ml_time} < da_time {da_time}")]
    NegativeInterval { ml_time: u64, da_time: u64 },
    #[error(transparent)]
    Lake(#[from] LakeError),
    #[error("cannot read {path}: {source}")]
    IoFailure {
        path: PathBuf,
        source: std::io::Error,
        /// Records committed before the failure.
        partial: Box<IngestReport>,
    },
    #[error("cannot bind {addr}: {source}")]
    BindFailure {
        addr: String,
        source: std::io::Error,
    },
    #[error("stream i/o: {0}")]
    Stream(std::io::Error),
}

impl IngestError {
    pub fn is_access_denied(&self) -> bool {
        matches!(self, IngestError::Lake(e) if e.is_access_denied())
    }
}

/// Ingestion time of one record: `ml_time - da_time` in milliseconds.
pub fn ingestion_time(ml_time: u64, da_time: u64) -> Result<u64, IngestError> {
    ml_time
        .checked_sub(da_time)
        .ok_or(IngestError::NegativeInterval { ml_time, da_time })
}

/// A record as it arrives at the lake.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestRecord {
    pub payload: Vec<u8>,
    pub source_kind: SourceKind,
    pub source_name: String,
    pub da_time: u64,
    /// Column names, when the connector already knows them.
    pub schema_hint: Option<Vec<String>>,
    /// Format class, when the connector already knows it.
    pub format: Option<FormatClass>,
}

impl IngestRecord {
    pub fn new(payload: Vec<u8>, source_kind: SourceKind, source_name: &str, da_time: u64) -> Self {
        Self {
            payload,
            source_kind,
            source_name: source_name.to_owned(),
            da_time,
            schema_hint: None,
            format: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestEntry {
    pub id: EntityId,
    pub da_time: u64,
    pub ml_time: u64,
    pub it_millis: u64,
    pub format: FormatClass,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub entries: Vec<IngestEntry>,
    /// Stream frames dropped as oversized, non-UTF-8 or empty.
    pub rejected_frames: usize,
}

impl IngestReport {
    pub fn count(&self) -> usize {
        self.entries.len()
    }

    pub fn mean_it(&self) -> f64 {
        mean(self.entries.iter().map(|e| e.it_millis))
    }

    pub fn max_it(&self) -> u64 {
        self.entries.iter().map(|e| e.it_millis).max().unwrap_or(0)
    }

    pub fn mean_it_for(&self, format: FormatClass) -> Option<f64> {
        let its: Vec<u64> = self
            .entries
            .iter()
            .filter(|e| e.format == format)
            .map(|e| e.it_millis)
            .collect();
        (!its.is_empty()).then(|| mean(its.into_iter()))
    }

    pub fn extend(&mut self, other: IngestReport) {
        self.entries.extend(other.entries);
        self.rejected_frames += other.rejected_frames;
    }
}

pub(crate) fn mean(values: impl Iterator<Item = u64>) -> f64 {
    let (sum, n) = values.fold((0u128, 0u64), |(s, n), v| (s + v as u128, n + 1));
    if n == 0 {
        0.0
    } else {
        sum as f64 / n as f64
    }
}

/// Store one arrived record verbatim and register its metadata.
pub fn ingest_record(
    lake: &Lake,
    record: IngestRecord,
    business: &BusinessMeta,
    ticket: &Ticket,
) -> Result<IngestEntry, IngestError> {
    let format = match record.format {
        Some(f) => f,
        None => {
            lake.clock().charge(Work::Classify {
                bytes: record.payload.len(),
            });
            classify_format(&record.payload)
        }
    };
    let id = lake.put_blob(&record.payload, format, ticket)?;
    let technical = TechnicalMeta::describe(&record.payload, format, record.schema_hint);
    let entry = lake.register_entity(
        id,
        technical,
        Provenance {
            source_kind: record.source_kind,
            source_name: record.source_name,
            creator: ticket.principal.clone(),
            da_time: record.da_time,
        },
        business.clone(),
    )?;
    let ml_time = entry.operational.ml_time;
    Ok(IngestEntry {
        id,
        da_time: record.da_time,
        ml_time,
        it_millis: ingestion_time(ml_time, record.da_time)?,
        format,
    })
}

/// Ingest event documents (appointments, pharmacy purchases, clinical notes).
/// Each document becomes one entity, classified by content.
pub fn ingest_events<I>(
    lake: &Lake,
    documents: I,
    source_name: &str,
    business: &BusinessMeta,
    ticket: &Ticket,
) -> Result<IngestReport, IngestError>
where
    I: IntoIterator<Item = Vec<u8>>,
{
    let mut report = IngestReport::default();
    for doc in documents {
        let da_time = lake.clock().now_millis();
        let record = IngestRecord::new(doc, SourceKind::Event, source_name, da_time);
        report
            .entries
            .push(ingest_record(lake, record, business, ticket)?);
    }
    Ok(report)
}

#[cfg(test)]
pub(crate) mod testutil {
    use std::sync::Arc;

    use crate::clock::{Clock, SimClock, WorkModel};
    use crate::lake::Lake;
    use crate::security::{issue_ticket, Action, Policy, PolicySet, Secret, Ticket};

    pub fn secret() -> Secret {
        Secret::from_bytes(&[4u8; 32]).unwrap()
    }

    pub fn lake_with(clock: Arc<dyn Clock>) -> Lake {
        let policies = PolicySet::new(vec![Policy::new(
            "ingest",
            "store/**",
            [Action::Write, Action::Read],
        )
        .unwrap()]);
        Lake::in_memory(secret(), policies, clock)
    }

    pub fn metered_lake() -> Lake {
        lake_with(Arc::new(SimClock::metered(1_000_000, WorkModel::default())))
    }

    pub fn writer(lake: &Lake) -> Ticket {
        issue_ticket(
            "loader",
            ["ingest"],
            lake.clock().now_millis(),
            3_600_000,
            &secret(),
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;
    use crate::catalog::SearchQuery;
    use crate::security::issue_ticket;

    #[test]
    fn ingestion_time_is_a_subtraction() {
        assert_eq!(ingestion_time(1000, 400).unwrap(), 600);
        assert_eq!(ingestion_time(77, 77).unwrap(), 0);
        assert!(matches!(
            ingestion_time(399, 400),
            Err(IngestError::NegativeInterval { .. })
        ));
    }

    #[test]
    fn events_are_classified_and_timed() {
        let lake = metered_lake();
        let t = writer(&lake);
        let docs = vec![
            br#"{"appointment": {"patient": 12, "when": "2024-01-02"}}"#.to_vec(),
            b"Clinical note: pt reports dizziness after metformin.".to_vec(),
        ];
        let report =
            ingest_events(&lake, docs, "appointments", &BusinessMeta::default(), &t).unwrap();
        assert_eq!(report.count(), 2);
        assert_eq!(report.entries[0].format, FormatClass::SemiStructured);
        assert_eq!(report.entries[1].format, FormatClass::Unstructured);
        for e in &report.entries {
            let entry = lake.catalog().get(e.id).unwrap();
            assert_eq!(entry.operational.source_kind, SourceKind::Event);
            assert_eq!(
                e.it_millis,
                entry.operational.ml_time - entry.operational.da_time
            );
            assert!(e.it_millis > 0);
        }
        assert_eq!(
            lake.search(&SearchQuery::all().source_kind(SourceKind::Event))
                .len(),
            2
        );
    }

    #[test]
    fn empty_event_batch() {
        let lake = metered_lake();
        let t = writer(&lake);
        let report = ingest_events(&lake, Vec::new(), "x", &BusinessMeta::default(), &t).unwrap();
        assert_eq!(report.count(), 0);
        assert_eq!(report.mean_it(), 0.0);
    }

    #[test]
    fn events_need_write_permission() {
        let lake = metered_lake();
        let t = issue_ticket(
            "bob",
            ["visitor"],
            lake.clock().now_millis(),
            1_000,
            &secret(),
        )
        .unwrap();
        let err = ingest_events(
            &lake,
            vec![b"x".to_vec()],
            "x",
            &BusinessMeta::default(),
            &t,
        )
        .unwrap_err();
        assert!(err.is_access_denied());
    }

    #[test]
    fn stored_bytes_equal_input() {
        let lake = metered_lake();
        let t = writer(&lake);
        let doc = b"  raw\r\n bytes,, {".to_vec();
        let report =
            ingest_events(&lake, vec![doc.clone()], "x", &BusinessMeta::default(), &t).unwrap();
        assert_eq!(&*lake.get_blob(report.entries[0].id, &t).unwrap(), &doc[..]);
    }
}
