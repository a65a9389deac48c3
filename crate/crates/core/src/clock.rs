//! Lake-wide time source.
//!
//! Every timestamp the lake records (arrival time, catalog commit time, audit
//! time, scheduler transitions) is read from a [`Clock`]. Production uses
//! [`WallClock`]; tests and benchmarks inject a [`SimClock`], optionally metered
//! by a [`WorkModel`] so that each unit of pipeline work advances simulated time
//! by a fixed, documented cost.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

/// A unit of pipeline work reported to the clock.
///
/// Wall clocks ignore these (real time passes on its own); metered simulated
/// clocks convert them into elapsed microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Work {
    /// Format sniffing over `bytes` of payload.
    Classify { bytes: usize },
    /// Writing `bytes` of payload into the object store.
    StoreWrite { bytes: usize },
    /// One catalog (or warehouse) commit.
    CatalogCommit,
    /// Extracting `fields` values out of a record.
    Parse { fields: usize },
    /// Type-coercing `fields` values.
    Transform { fields: usize },
    /// Validating `fields` values against a fixed schema.
    Validate { fields: usize },
    /// Inserting a `bytes`-wide row into the warehouse table.
    WarehouseInsert { bytes: usize },
    /// One discrete scheduler step.
    SchedulerStep,
}

/// Cost table, in microseconds, used by a metered [`SimClock`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkModel {
    pub classify_per_kib_us: u64,
    pub store_base_us: u64,
    pub store_per_kib_us: u64,
    pub commit_us: u64,
    pub parse_per_field_us: u64,
    /// Extra per-field transform cost of the warehouse ETL. Zero by default.
    pub transform_per_field_us: u64,
    pub validate_per_field_us: u64,
    pub scheduler_step_us: u64,
}

impl Default for WorkModel {
    fn default() -> Self {
        Self {
            classify_per_kib_us: 100,
            store_base_us: 800,
            store_per_kib_us: 200,
            commit_us: 1_000,
            parse_per_field_us: 25,
            transform_per_field_us: 0,
            validate_per_field_us: 15,
            scheduler_step_us: 1_000,
        }
    }
}

impl WorkModel {
    /// Simulated cost of `work` in microseconds.
    pub fn cost_us(&self, work: Work) -> u64 {
        fn kib(bytes: usize) -> u64 {
            (bytes as u64).div_ceil(1024)
        }
        match work {
            Work::Classify { bytes } => self.classify_per_kib_us * kib(bytes),
            Work::StoreWrite { bytes } | Work::WarehouseInsert { bytes } => {
                self.store_base_us + self.store_per_kib_us * kib(bytes)
            }
            Work::CatalogCommit => self.commit_us,
            Work::Parse { fields } => self.parse_per_field_us * fields as u64,
            Work::Transform { fields } => self.transform_per_field_us * fields as u64,
            Work::Validate { fields } => self.validate_per_field_us * fields as u64,
            Work::SchedulerStep => self.scheduler_step_us,
        }
    }
}

pub trait Clock: Send + Sync + fmt::Debug {
    /// Microseconds since the unix epoch.
    fn now_micros(&self) -> u64;

    /// Milliseconds since the unix epoch.
    fn now_millis(&self) -> u64 {
        self.now_micros() / 1_000
    }

    /// Report work performed by the caller.
    fn charge(&self, _work: Work) {}
}

/// Monotonic wall clock anchored to the system time at construction.
#[derive(Debug)]
pub struct WallClock {
    origin_micros: u64,
    start: Instant,
}

impl WallClock {
    pub fn new() -> Self {
        let origin_micros = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_micros() as u64)
            .unwrap_or(0);
        Self {
            origin_micros,
            start: Instant::now(),
        }
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now_micros(&self) -> u64 {
        self.origin_micros + self.start.elapsed().as_micros() as u64
    }
}

/// Manually driven clock. With a [`WorkModel`] attached, every
/// [`Clock::charge`] advances it by the modelled cost.
#[derive(Debug)]
pub struct SimClock {
    micros: AtomicU64,
    model: Option<WorkModel>,
}

impl SimClock {
    pub fn new(start_millis: u64) -> Self {
        Self {
            micros: AtomicU64::new(start_millis * 1_000),
            model: None,
        }
    }

    pub fn metered(start_millis: u64, model: WorkModel) -> Self {
        Self {
            micros: AtomicU64::new(start_millis * 1_000),
            model: Some(model),
        }
    }

    pub fn model(&self) -> Option<&WorkModel> {
        self.model.as_ref()
    }

    pub fn advance_millis(&self, ms: u64) {
        self.advance_micros(ms * 1_000);
    }

    pub fn advance_micros(&self, us: u64) {
        self.micros.fetch_add(us, Ordering::SeqCst);
    }

    /// Jump to an absolute time. Intended for tests that need a specific
    /// instant; moving backwards breaks the monotonic-pipeline property.
    pub fn set_millis(&self, ms: u64) {
        self.micros.store(ms * 1_000, Ordering::SeqCst);
    }
}

impl Clock for SimClock {
    fn now_micros(&self) -> u64 {
        self.micros.load(Ordering::SeqCst)
    }

    fn charge(&self, work: Work) {
        if let Some(model) = &self.model {
            self.advance_micros(model.cost_us(work));
        }
    }
}
