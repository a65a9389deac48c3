//! Lake versus warehouse experiments on a diabetes encounter corpus.
//!
//! Both pipelines receive the same records on the same metered clock and
//! run as scheduled jobs. The ingestion comparison measures
//! `ml_time - da_time` per record. The clustering comparison runs k-means on
//! the lake's full attribute set and on the warehouse's surviving columns,
//! then scores both clusterings in the lake's feature space.

mod corpus;
mod notes;
mod reader;
mod uci;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub use corpus::{
    gen_corpus, load_uci_csv, Composition, Corpus, CorpusError, CorpusRecord, CorpusSpec,
    Encounter, BEST_INSULIN, DEFAULT_GROUPS, MIN_RECORDS, NOTES_SOURCE, SEMI_SOURCE,
    STRUCTURED_SOURCE,
};
pub use notes::{extract_note, render_note};
pub use reader::{read_fields, read_lake_table, LakeView};
pub use uci::{
    is_feature, lab_columns, lake_columns, warehouse_schema, LabTest, UciColumn, COMPLICATIONS,
    ENCOUNTER_ID, LABEL, LAB_TESTS, MEDICATION, MEDICATIONS, MED_VALUES, SUCCESS, UCI_COLUMNS,
};

use crate::analytics::{
    cluster_precision, kmeans, normalize, precision_of, AnalyticsError, ClusterModel,
    ClusterPrecision, FeatureMatrix, RawTable, Value, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::catalog::BusinessMeta;
use crate::clock::{Clock, SimClock, WorkModel};
use crate::ingest::{ingest_record, IngestError, IngestReport};
use crate::lake::{Lake, LakeError};
use crate::scheduler::{
    JobKind, JobPayload, JobSpec, NodeSpec, ResourceManager, Resources, RunError, SchedulerError,
};
use crate::security::{issue_ticket, Action, Policy, PolicySet, Secret, Ticket};
use crate::store::FormatClass;
use crate::warehouse::{
    dw_feature_view, Cell, DwLoadReport, StoredRow, Warehouse, WarehouseError, WarehouseSchema,
};

pub const DEFAULT_NODES: &str = "n1:8:16384,n2:8:16384";
pub const BENCH_PRINCIPAL: &str = "bench";
pub const RQ1_REPORT: &str = "rq1_report.tsv";
pub const RQ1_SERIES: &str = "rq1_series.tsv";
pub const RQ2_REPORT: &str = "rq2_report.tsv";
const BENCH_SECRET: &[u8; 32] = b"lakelet-experiment-signing-key!!";
const TICKET_TTL_MS: u64 = 365 * 24 * 3_600_000;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Lake(#[from] LakeError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Warehouse(#[from] WarehouseError),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("warehouse row for encounter {0} has no lake counterpart")]
    Unmatched(u64),
}

impl<E: Into<ExperimentError>> From<RunError<E>> for ExperimentError {
    fn from(e: RunError<E>) -> Self {
        match e {
            RunError::Scheduler(s) => ExperimentError::Scheduler(s),
            RunError::Job(j) => j.into(),
        }
    }
}

/// A lake and a warehouse sharing one metered clock, guard policies and
/// cluster.
#[derive(Debug)]
pub struct BenchEnv {
    pub clock: Arc<SimClock>,
    pub lake: Lake,
    pub warehouse: Warehouse,
    pub rm: ResourceManager,
    pub ticket: Ticket,
}

impl BenchEnv {
    pub fn new(schema: WarehouseSchema, model: WorkModel, nodes: Vec<NodeSpec>) -> Self {
        let clock = Arc::new(SimClock::metered(0, model));
        let secret = Secret::from_bytes(BENCH_SECRET).expect("32-byte key");
        let policies = PolicySet::new(vec![
            Policy::new("ingest", "store/*", [Action::Read, Action::Write]).expect("static policy"),
            Policy::new("ingest", "warehouse/*", [Action::Write]).expect("static policy"),
            Policy::new("analyst", "jobs/*", [Action::Submit, Action::Read])
                .expect("static policy"),
        ]);
        let lake = Lake::in_memory(secret.clone(), policies, clock.clone());
        let ticket = issue_ticket(
            BENCH_PRINCIPAL,
            ["ingest", "analyst"],
            0,
            TICKET_TTL_MS,
            &secret,
        )
        .expect("valid bench ticket");
        let warehouse = Warehouse::new(schema, lake.guard().clone());
        let rm = ResourceManager::new(nodes, lake.guard().clone());
        Self {
            clock,
            lake,
            warehouse,
            rm,
            ticket,
        }
    }

    /// Default cost model and cluster.
    pub fn standard(schema: WarehouseSchema) -> Self {
        Self::new(
            schema,
            WorkModel::default(),
            NodeSpec::parse_list(DEFAULT_NODES).expect("static node list"),
        )
    }

    /// Move to the next whole millisecond so every record arrives on a
    /// boundary and its ingestion time depends only on its own work.
    fn align(&self) -> u64 {
        let ms = self.clock.now_micros().div_ceil(1_000);
        self.clock.set_millis(ms);
        ms
    }

    fn job(id: &str, kind: JobKind, records: usize) -> JobSpec {
        JobSpec::new(
            id,
            JobPayload::new(kind).param("records", records),
            Resources::new(1, 512),
            vec![Resources::new(2, 2048)],
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeriesPoint {
    pub index: usize,
    pub format: FormatClass,
    pub it_lake: u64,
    /// `None` when the warehouse rejected the record.
    pub it_dw: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassRow {
    /// `None` for the all-records row.
    pub class: Option<FormatClass>,
    pub records: usize,
    pub lake_ingested: usize,
    pub dw_accepted: usize,
    pub mean_it_lake: Option<f64>,
    pub mean_it_dw: Option<f64>,
}

impl ClassRow {
    pub fn ratio(&self) -> Option<f64> {
        match (self.mean_it_lake, self.mean_it_dw) {
            (Some(l), Some(d)) if d > 0.0 => Some(l / d),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rq1Report {
    pub series: Vec<SeriesPoint>,
    /// Per format class, then all records.
    pub classes: Vec<ClassRow>,
    pub lake: IngestReport,
    pub dw: DwLoadReport,
}

impl Rq1Report {
    pub fn overall(&self) -> &ClassRow {
        self.classes.last().expect("report has an all-records row")
    }

    /// Mean lake ingestion time over mean warehouse ingestion time of the
    /// records the warehouse accepted.
    pub fn ratio(&self) -> Option<f64> {
        self.overall().ratio()
    }
}

/// Ingest `corpus` into both pipelines, one scheduled job each.
pub fn run_rq1(env: &BenchEnv, corpus: &Corpus) -> Result<Rq1Report, ExperimentError> {
    let business = BusinessMeta::new("diabetes", ["encounter"]);
    let lake = env.rm.run_job(
        BenchEnv::job("rq1-lake-ingest", JobKind::IngestBench, corpus.len()),
        &env.ticket,
        |_| -> Result<IngestReport, ExperimentError> {
            let mut report = IngestReport::default();
            for r in &corpus.records {
                let mut record = r.record.clone();
                record.da_time = env.align();
                report
                    .entries
                    .push(ingest_record(&env.lake, record, &business, &env.ticket)?);
            }
            Ok(report)
        },
    )?;
    let dw = env.rm.run_job(
        BenchEnv::job("rq1-dw-load", JobKind::IngestBench, corpus.len()),
        &env.ticket,
        |_| -> Result<DwLoadReport, ExperimentError> {
            let mut report = DwLoadReport::default();
            for r in &corpus.records {
                let mut record = r.record.clone();
                record.da_time = env.align();
                report.extend(
                    env.warehouse
                        .dw_load(std::slice::from_ref(&record), &env.ticket)?,
                );
            }
            Ok(report)
        },
    )?;

    let series = lake
        .entries
        .iter()
        .zip(&dw.entries)
        .enumerate()
        .map(|(index, (l, d))| SeriesPoint {
            index,
            format: l.format,
            it_lake: l.it_millis,
            it_dw: d.it_millis,
        })
        .collect::<Vec<_>>();
    let row = |class: Option<FormatClass>| {
        let pts: Vec<&SeriesPoint> = series
            .iter()
            .filter(|p| class.is_none_or(|c| p.format == c))
            .collect();
        let lake_its: Vec<u64> = pts.iter().map(|p| p.it_lake).collect();
        let dw_its: Vec<u64> = pts.iter().filter_map(|p| p.it_dw).collect();
        let mean =
            |v: &[u64]| (!v.is_empty()).then(|| v.iter().sum::<u64>() as f64 / v.len() as f64);
        ClassRow {
            class,
            records: pts.len(),
            lake_ingested: lake_its.len(),
            dw_accepted: dw_its.len(),
            mean_it_lake: mean(&lake_its),
            mean_it_dw: mean(&dw_its),
        }
    };
    let mut classes: Vec<ClassRow> = [
        FormatClass::Structured,
        FormatClass::SemiStructured,
        FormatClass::Unstructured,
    ]
    .into_iter()
    .map(|c| row(Some(c)))
    .collect();
    classes.push(row(None));
    Ok(Rq1Report {
        series,
        classes,
        lake,
        dw,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_owned(), |v| format!("{v:.4}"))
}

pub fn rq1_report_tsv(r: &Rq1Report) -> String {
    let mut s = String::from(
        "class\trecords\tlake_ingested\tdw_accepted\tmean_it_lake_ms\tmean_it_dw_ms\tratio\n",
    );
    for c in &r.classes {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            c.class.map_or("all", FormatClass::as_str),
            c.records,
            c.lake_ingested,
            c.dw_accepted,
            opt(c.mean_it_lake),
            opt(c.mean_it_dw),
            opt(c.ratio()),
        );
    }
    s
}

pub fn rq1_series_tsv(r: &Rq1Report) -> String {
    let mut s = String::from("index\tit_lake\tit_dw\n");
    for p in &r.series {
        let dw = p.it_dw.map_or_else(|| "NA".to_owned(), |v| v.to_string());
        let _ = writeln!(s, "{}\t{}\t{}", p.index, p.it_lake, dw);
    }
    s
}

pub fn write_rq1(dir: &Path, r: &Rq1Report) -> std::io::Result<[PathBuf; 2]> {
    std::fs::create_dir_all(dir)?;
    let report = dir.join(RQ1_REPORT);
    let series = dir.join(RQ1_SERIES);
    std::fs::write(&report, rq1_report_tsv(r))?;
    std::fs::write(&series, rq1_series_tsv(r))?;
    Ok([report, series])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rq2Row {
    pub rank: usize,
    pub lake: ClusterPrecision,
    pub dw: ClusterPrecision,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rq2Report {
    pub rows: Vec<Rq2Row>,
    pub lake_model: ClusterModel,
    pub dw_model: ClusterModel,
    /// Normalized lake features; also the space both clusterings are scored in.
    pub lake_matrix: FeatureMatrix,
    pub dw_dims: usize,
    /// Encounter id of each lake row.
    pub lake_ids: Vec<u64>,
    /// Encounter id of each warehouse row.
    pub dw_ids: Vec<u64>,
}

impl Rq2Report {
    /// Share of each reported lake cluster's members that belong to its most
    /// common planted group. Members without a known group are ignored.
    pub fn lake_purity(&self, groups: &BTreeMap<u64, usize>) -> Vec<f64> {
        let members = self.lake_model.members();
        self.rows
            .iter()
            .map(|row| {
                let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
                for &i in &members[row.lake.cluster_index] {
                    if let Some(&g) = groups.get(&self.lake_ids[i]) {
                        *counts.entry(g).or_default() += 1;
                    }
                }
                let total: usize = counts.values().sum();
                let top = counts.values().copied().max().unwrap_or(0);
                if total == 0 {
                    0.0
                } else {
                    top as f64 / total as f64
                }
            })
            .collect()
    }
}

/// The clustering attributes of a lake view.
pub fn feature_table(view: &LakeView) -> RawTable {
    let features: Vec<&str> = view
        .table
        .names
        .iter()
        .map(String::as_str)
        .filter(|n| is_feature(n))
        .collect();
    view.table
        .project(&features)
        .expect("feature names come from the table")
}

/// Per row: whether the encounter ended without readmission.
pub fn outcome_labels(view: &LakeView) -> Vec<bool> {
    let col = view
        .table
        .column_index(LABEL)
        .expect("lake views carry the label column");
    view.table
        .rows
        .iter()
        .map(|r| matches!(&r[col], Value::Cat(v) if v == SUCCESS))
        .collect()
}

fn encounter_id(schema: &WarehouseSchema, row: &StoredRow) -> Option<u64> {
    let i = schema.column_index(ENCOUNTER_ID)?;
    match row.cells[i] {
        Cell::Int(v) => u64::try_from(v).ok(),
        Cell::Real(v) if v >= 0.0 => Some(v as u64),
        _ => None,
    }
}

/// Cluster the lake view and the warehouse view with `k` clusters each and
/// score the largest ones in the lake's feature space. Requires both
/// pipelines to hold the corpus already.
pub fn run_rq2(env: &BenchEnv, k: usize, seed: u64) -> Result<Rq2Report, ExperimentError> {
    let (view, lake_matrix, lake_model) = env.rm.run_job(
        BenchEnv::job("rq2-lake-kmeans", JobKind::KMeans, k),
        &env.ticket,
        |_| -> Result<_, ExperimentError> {
            let view = read_lake_table(&env.lake, &env.ticket)?;
            let m = normalize(&feature_table(&view))?;
            let model = kmeans(&m, k, seed, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
            Ok((view, m, model))
        },
    )?;
    let schema = env.warehouse.schema();
    let (dw_ids, dw_dims, dw_model) = env.rm.run_job(
        BenchEnv::job("rq2-dw-kmeans", JobKind::KMeans, k),
        &env.ticket,
        |_| -> Result<_, ExperimentError> {
            let mut rows: Vec<(u64, StoredRow)> = env
                .warehouse
                .rows()
                .into_iter()
                .filter_map(|r| encounter_id(schema, &r).map(|id| (id, r)))
                .collect();
            rows.sort_by_key(|(id, _)| *id);
            rows.dedup_by_key(|(id, _)| *id);
            let (ids, rows): (Vec<u64>, Vec<StoredRow>) = rows.into_iter().unzip();
            let features: Vec<&str> = schema
                .column_names()
                .into_iter()
                .filter(|n| is_feature(n))
                .collect();
            let m = dw_feature_view(schema, &rows, Some(&features))?;
            let model = kmeans(&m, k, seed, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
            Ok((ids, m.dims(), model))
        },
    )?;

    let lake_row = view.row_of();
    let mapped = dw_ids
        .iter()
        .map(|id| {
            lake_row
                .get(id)
                .copied()
                .ok_or(ExperimentError::Unmatched(*id))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let dw_eval = lake_matrix.select_rows(&mapped);
    let lake_p = cluster_precision(&lake_model, &lake_matrix)?;
    let dw_p = precision_of(&dw_model.assignments, k, &dw_eval)?;
    let rows = lake_p
        .rows
        .into_iter()
        .zip(dw_p.rows)
        .enumerate()
        .map(|(i, (lake, dw))| Rq2Row {
            rank: i + 1,
            lake,
            dw,
        })
        .collect();
    Ok(Rq2Report {
        rows,
        lake_model,
        dw_model,
        lake_matrix,
        dw_dims,
        lake_ids: view.encounter_ids,
        dw_ids,
    })
}

pub fn rq2_report_tsv(r: &Rq2Report) -> String {
    let mut s = String::from("cluster\td_lake\td_dw\n");
    for row in &r.rows {
        let _ = writeln!(
            s,
            "{}\t{:.6}\t{:.6}",
            row.rank, row.lake.d_value, row.dw.d_value
        );
    }
    s
}

pub fn write_rq2(dir: &Path, r: &Rq2Report) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(RQ2_REPORT);
    std::fs::write(&path, rq2_report_tsv(r))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::AuditFilter;

    fn ingested(spec: &CorpusSpec, full: bool) -> (Corpus, BenchEnv, Rq1Report) {
        let corpus = gen_corpus(spec).unwrap();
        let env = BenchEnv::standard(corpus.warehouse_schema(full));
        let r = run_rq1(&env, &corpus).unwrap();
        (corpus, env, r)
    }

    #[test]
    fn rq1_lake_beats_warehouse_per_class() {
        let (corpus, env, r) = ingested(&CorpusSpec::new(300, 42), false);
        assert_eq!(r.series.len(), corpus.len());
        let unstructured = &r.classes[2];
        assert_eq!(unstructured.dw_accepted, 0);
        assert_eq!(
            unstructured.lake_ingested,
            corpus.count(FormatClass::Unstructured)
        );
        for c in r.classes.iter().filter(|c| c.dw_accepted > 0) {
            assert!(c.mean_it_lake.unwrap() < c.mean_it_dw.unwrap(), "{c:?}");
        }
        assert!(r.ratio().unwrap() <= 0.6, "{:?}", r.ratio());
        assert_eq!(env.warehouse.len(), r.overall().dw_accepted);
        assert!(env.rm.check_invariants().is_ok());
    }

    #[test]
    fn rq1_tsv_shapes() {
        let (_, _, r) = ingested(&CorpusSpec::new(100, 1), false);
        let series = rq1_series_tsv(&r);
        assert_eq!(series.lines().count(), 101);
        assert!(series.lines().skip(1).any(|l| l.ends_with("\tNA")));
        let report = rq1_report_tsv(&r);
        assert_eq!(report.lines().count(), 5);
        assert!(report
            .lines()
            .nth(3)
            .unwrap()
            .starts_with("Unstructured\t30\t30\t0\t"));
    }

    #[test]
    fn lake_view_reads_all_formats() {
        let (corpus, env, _) = ingested(&CorpusSpec::new(120, 9), false);
        let view = read_lake_table(&env.lake, &env.ticket).unwrap();
        assert_eq!(view.skipped, 0);
        assert_eq!(view.encounter_ids.len(), corpus.len());
        let reads = env
            .lake
            .query_audit(&AuditFilter::default())
            .into_iter()
            .filter(|e| e.detail == "get")
            .count();
        assert_eq!(reads, corpus.len());
        let hba1c = view.table.column_index("lab_detail.hba1c_value").unwrap();
        let present = view
            .table
            .rows
            .iter()
            .filter(|r| r[hba1c] != crate::analytics::Value::Missing)
            .count();
        assert_eq!(
            present,
            corpus.len() - corpus.count(FormatClass::Structured)
        );
    }

    #[test]
    fn rq2_lake_clusters_are_tighter() {
        let (corpus, env, _) = ingested(&CorpusSpec::new(600, 42), false);
        let r = run_rq2(&env, 8, 42).unwrap();
        assert_eq!(r.rows.len(), 4);
        assert!(r.dw_dims < r.lake_matrix.dims());
        for row in &r.rows {
            assert!(row.lake.d_value < row.dw.d_value, "{row:?}");
        }
        let purity = r.lake_purity(&corpus.groups());
        assert_eq!(purity.len(), 4);
        let tsv = rq2_report_tsv(&r);
        assert_eq!(tsv.lines().next(), Some("cluster\td_lake\td_dw"));
        assert_eq!(tsv.lines().count(), 5);
    }

    #[test]
    fn rq2_equal_when_warehouse_sees_everything() {
        let spec = CorpusSpec::new(200, 3).composition(Composition::new(1.0, 0.0, 0.0).unwrap());
        let (_, env, _) = ingested(&spec, true);
        let r = run_rq2(&env, 8, 3).unwrap();
        assert_eq!(r.dw_dims, r.lake_matrix.dims());
        for row in &r.rows {
            assert!((row.lake.d_value - row.dw.d_value).abs() < 1e-9, "{row:?}");
        }
    }
}
