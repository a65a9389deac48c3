//! Schema-on-write baseline: a fixed table schema and an ETL step that
//! parses, coerces and validates every record before it is stored. Whatever
//! does not fit the schema is dropped or rejected.

mod etl;

use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex};

pub use etl::{etl_transform, flatten_json, EtlResult};

use crate::analytics::{normalize, AnalyticsError, ColumnKind, FeatureMatrix, RawTable, Value};
use crate::clock::Work;
use crate::ingest::{ingestion_time, mean, IngestRecord};
use crate::kv::Record;
use crate::security::{AccessDenied, Action, Guard, Ticket};
use crate::store::FormatClass;

pub const DW_REJECTS_LOG: &str = "dw_rejects.log";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnType {
    Integer,
    Real,
    /// Closed set of allowed values.
    Categorical(Vec<String>),
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnType::Integer => f.write_str("integer"),
            ColumnType::Real => f.write_str("real"),
            ColumnType::Categorical(_) => f.write_str("categorical"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum WarehouseError {
    #[error("schema line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error(transparent)]
    AccessDenied(#[from] AccessDenied),
    #[error("reject log i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WarehouseSchema {
    pub table: String,
    pub columns: Vec<(String, ColumnType)>,
    /// Reject a record on any type or domain violation. When false the
    /// offending value is nulled and reported as dropped.
    pub strict: bool,
}

impl WarehouseSchema {
    pub fn new(table: &str, columns: Vec<(String, ColumnType)>, strict: bool) -> Self {
        Self {
            table: table.to_owned(),
            columns,
            strict,
        }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|(n, _)| n == name)
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|(n, _)| n.as_str()).collect()
    }

    /// One column per line: `name<TAB>type[<TAB>cat1,cat2,...]` with type
    /// `integer`, `real` or `categorical`. `#` starts a comment.
    pub fn parse(table: &str, text: &str, strict: bool) -> Result<Self, WarehouseError> {
        let mut columns: Vec<(String, ColumnType)> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |message: String| WarehouseError::Schema {
                line: line_no,
                message,
            };
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            let name = parts[0].trim();
            if name.is_empty() {
                return Err(err("empty column name".into()));
            }
            if columns.iter().any(|(n, _)| n == name) {
                return Err(err(format!("duplicate column `{name}`")));
            }
            let ty = match (parts.get(1).map(|t| t.trim()), parts.get(2)) {
                (Some("integer"), None) => ColumnType::Integer,
                (Some("real"), None) => ColumnType::Real,
                (Some("categorical"), Some(cats)) => {
                    let cats: Vec<String> = cats
                        .split(',')
                        .map(|c| c.trim().to_owned())
                        .filter(|c| !c.is_empty())
                        .collect();
                    if cats.is_empty() {
                        return Err(err(format!("categorical column `{name}` lists no values")));
                    }
                    ColumnType::Categorical(cats)
                }
                (Some("categorical"), None) => {
                    return Err(err(format!("categorical column `{name}` lists no values")))
                }
                (Some(other), _) => return Err(err(format!("unknown type `{other}`"))),
                (None, _) => return Err(err(format!("column `{name}` has no type"))),
            };
            columns.push((name.to_owned(), ty));
        }
        if columns.is_empty() {
            return Err(WarehouseError::Schema {
                line: 0,
                message: "schema has no columns".into(),
            });
        }
        Ok(Self::new(table, columns, strict))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, ty) in &self.columns {
            match ty {
                ColumnType::Categorical(cats) => {
                    out.push_str(&format!("{name}\tcategorical\t{}\n", cats.join(",")))
                }
                other => out.push_str(&format!("{name}\t{other}\n")),
            }
        }
        out
    }

    pub fn resource(&self) -> String {
        format!("warehouse/{}", self.table)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Cat(String),
    Null,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Real(v) => write!(f, "{v}"),
            Cell::Cat(v) => f.write_str(v),
            Cell::Null => f.write_str("?"),
        }
    }
}

/// Totals over one load.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EtlOutcome {
    pub accepted_rows: usize,
    pub rejected_rows: usize,
    /// Per input record, in input order.
    pub dropped_fields: Vec<Vec<String>>,
    /// Per input record, in input order.
    pub etl_millis: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DwEntry {
    pub index: usize,
    pub da_time: u64,
    /// Absent for rejected records.
    pub ml_time: Option<u64>,
    pub it_millis: Option<u64>,
    pub format: FormatClass,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DwLoadReport {
    pub outcome: EtlOutcome,
    pub entries: Vec<DwEntry>,
}

impl DwLoadReport {
    /// Append `other`, renumbering its entries after ours.
    pub fn extend(&mut self, other: DwLoadReport) {
        let base = self.entries.len();
        self.outcome.accepted_rows += other.outcome.accepted_rows;
        self.outcome.rejected_rows += other.outcome.rejected_rows;
        self.outcome
            .dropped_fields
            .extend(other.outcome.dropped_fields);
        self.outcome.etl_millis.extend(other.outcome.etl_millis);
        self.entries
            .extend(other.entries.into_iter().map(|e| DwEntry {
                index: e.index + base,
                ..e
            }));
    }

    /// Mean ingestion time over accepted records.
    pub fn mean_it(&self) -> f64 {
        mean(self.entries.iter().filter_map(|e| e.it_millis))
    }

    pub fn mean_it_for(&self, format: FormatClass) -> Option<f64> {
        let its: Vec<u64> = self
            .entries
            .iter()
            .filter(|e| e.format == format)
            .filter_map(|e| e.it_millis)
            .collect();
        (!its.is_empty()).then(|| mean(its.into_iter()))
    }
}

/// A loaded row and the time its load committed.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredRow {
    pub cells: Vec<Cell>,
    pub ml_time: u64,
}

/// The warehouse table. Loads run one record at a time.
#[derive(Debug)]
pub struct Warehouse {
    schema: WarehouseSchema,
    guard: Arc<Guard>,
    rows: Mutex<Vec<StoredRow>>,
    rejects: Option<Mutex<File>>,
}

impl Warehouse {
    pub fn new(schema: WarehouseSchema, guard: Arc<Guard>) -> Self {
        Self {
            schema,
            guard,
            rows: Mutex::new(Vec::new()),
            rejects: None,
        }
    }

    /// Append rejected records to `path` as key=value lines.
    pub fn with_rejects_log(mut self, path: &Path) -> Result<Self, WarehouseError> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        self.rejects = Some(Mutex::new(file));
        Ok(self)
    }

    pub fn schema(&self) -> &WarehouseSchema {
        &self.schema
    }

    pub fn rows(&self) -> Vec<StoredRow> {
        self.rows.lock().expect("warehouse lock").clone()
    }

    pub fn len(&self) -> usize {
        self.rows.lock().expect("warehouse lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// ETL each record, then insert and commit the accepted ones. A
    /// record's `ml_time` is read only after all of its ETL work, so its
    /// ingestion time includes that work.
    pub fn dw_load(
        &self,
        records: &[IngestRecord],
        ticket: &Ticket,
    ) -> Result<DwLoadReport, WarehouseError> {
        let clock = self.guard.clock().clone();
        let resource = self.schema.resource();
        let mut report = DwLoadReport::default();
        for (index, record) in records.iter().enumerate() {
            self.guard
                .require(ticket, &resource, Action::Write, "load")?;
            let etl = etl_transform(record, &self.schema, clock.as_ref());
            report
                .outcome
                .dropped_fields
                .push(etl.dropped_fields.clone());
            report.outcome.etl_millis.push(etl.etl_millis());
            let entry = match etl.row {
                Some(cells) => {
                    let width: usize = cells.iter().map(|c| c.to_string().len() + 1).sum();
                    clock.charge(Work::WarehouseInsert { bytes: width });
                    clock.charge(Work::CatalogCommit);
                    let ml_time = clock.now_millis();
                    self.rows
                        .lock()
                        .expect("warehouse lock")
                        .push(StoredRow { cells, ml_time });
                    report.outcome.accepted_rows += 1;
                    DwEntry {
                        index,
                        da_time: record.da_time,
                        ml_time: Some(ml_time),
                        it_millis: Some(ingestion_time(ml_time, record.da_time).unwrap_or(0)),
                        format: etl.format,
                    }
                }
                None => {
                    report.outcome.rejected_rows += 1;
                    self.log_reject(record, &etl)?;
                    DwEntry {
                        index,
                        da_time: record.da_time,
                        ml_time: None,
                        it_millis: None,
                        format: etl.format,
                    }
                }
            };
            report.entries.push(entry);
        }
        Ok(report)
    }

    fn log_reject(&self, record: &IngestRecord, etl: &EtlResult) -> Result<(), WarehouseError> {
        let Some(file) = &self.rejects else {
            return Ok(());
        };
        let line = Record::new()
            .with("when", self.guard.clock().now_millis())
            .with("source", &record.source_name)
            .with("da_time", record.da_time)
            .with("format", etl.format.as_str())
            .with("reason", etl.reject_reason.as_deref().unwrap_or_default())
            .with("dropped", etl.dropped_fields.join(","))
            .to_line();
        let mut f = file.lock().expect("reject log lock");
        writeln!(f, "{line}")?;
        Ok(())
    }
}

/// Warehouse rows as an analytics table, restricted to `features` (all
/// columns when `None`).
pub fn warehouse_table(
    schema: &WarehouseSchema,
    rows: &[StoredRow],
    features: Option<&[&str]>,
) -> RawTable {
    let all = schema.column_names();
    let names: Vec<&str> = features.map(<[&str]>::to_vec).unwrap_or(all);
    let idx: Vec<usize> = names
        .iter()
        .filter_map(|n| schema.column_index(n))
        .collect();
    let mut table = RawTable::new(
        idx.iter()
            .map(|&i| {
                let (name, ty) = &schema.columns[i];
                let kind = match ty {
                    ColumnType::Categorical(_) => ColumnKind::Categorical,
                    _ => ColumnKind::Numeric,
                };
                (name.clone(), kind)
            })
            .collect(),
    );
    for row in rows {
        table.push(
            idx.iter()
                .map(|&i| match &row.cells[i] {
                    Cell::Int(v) => Value::Num(*v as f64),
                    Cell::Real(v) => Value::Num(*v),
                    Cell::Cat(s) => Value::Cat(s.clone()),
                    Cell::Null => Value::Missing,
                })
                .collect(),
        );
    }
    table
}

/// Normalized features over the warehouse's surviving columns only.
pub fn dw_feature_view(
    schema: &WarehouseSchema,
    rows: &[StoredRow],
    features: Option<&[&str]>,
) -> Result<FeatureMatrix, AnalyticsError> {
    normalize(&warehouse_table(schema, rows, features))
}
