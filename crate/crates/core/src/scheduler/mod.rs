//! Resource negotiation for analytics jobs.
//!
//! A [`ResourceManager`] owns node capacity. Each submitted job gets an
//! application master (AM) container, the AM registers with the RM,
//! negotiates task containers, runs, reports completion and releases
//! everything it holds. Jobs move strictly along
//! `Submitted -> AmStarting -> AmRegistered -> Negotiating -> Running ->
//! (Succeeded | Failed) -> Released`.
//!
//! Placement is FIFO with first-fit over nodes in `node_id` order. A job's
//! AM is only started once the AM and all declared task requests fit
//! together; the task share is reserved at that point so an admitted job can
//! always reach `Running`.

mod rm;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

pub use rm::{
    job_resource, JobLog, NegotiationOutcome, NodeUsage, ResourceManager, RunError, JOBS_LOG,
    JOBS_RESOURCE,
};

use crate::kv::{KvError, Record};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Resources {
    pub cpu_slots: u32,
    pub memory_mb: u64,
}

impl Resources {
    pub fn new(cpu_slots: u32, memory_mb: u64) -> Self {
        Self {
            cpu_slots,
            memory_mb,
        }
    }

    pub fn fits_in(&self, free: Resources) -> bool {
        self.cpu_slots <= free.cpu_slots && self.memory_mb <= free.memory_mb
    }
}

impl fmt::Display for Resources {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.cpu_slots, self.memory_mb)
    }
}

impl FromStr for Resources {
    type Err = String;

    /// `cpu:memory_mb`
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (cpu, mem) = s
            .split_once(':')
            .ok_or_else(|| format!("expected cpu:memory_mb, got `{s}`"))?;
        Ok(Self {
            cpu_slots: cpu
                .trim()
                .parse()
                .map_err(|_| format!("bad cpu in `{s}`"))?,
            memory_mb: mem
                .trim()
                .parse()
                .map_err(|_| format!("bad memory in `{s}`"))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSpec {
    pub node_id: String,
    pub cpu_slots: u32,
    pub memory_mb: u64,
}

impl NodeSpec {
    pub fn new(node_id: &str, cpu_slots: u32, memory_mb: u64) -> Self {
        Self {
            node_id: node_id.to_owned(),
            cpu_slots,
            memory_mb,
        }
    }

    pub fn capacity(&self) -> Resources {
        Resources::new(self.cpu_slots, self.memory_mb)
    }

    /// Comma-separated `node_id:cpu:memory_mb` list.
    pub fn parse_list(s: &str) -> Result<Vec<NodeSpec>, String> {
        s.split(',')
            .filter(|n| !n.trim().is_empty())
            .map(|n| {
                let parts: Vec<&str> = n.trim().split(':').collect();
                let [id, cpu, mem] = parts[..] else {
                    return Err(format!("expected node:cpu:memory_mb, got `{n}`"));
                };
                let spec = NodeSpec::new(
                    id,
                    cpu.parse().map_err(|_| format!("bad cpu in `{n}`"))?,
                    mem.parse().map_err(|_| format!("bad memory in `{n}`"))?,
                );
                if spec.node_id.is_empty() || spec.cpu_slots == 0 || spec.memory_mb == 0 {
                    return Err(format!("node capacities must be positive in `{n}`"));
                }
                Ok(spec)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JobKind {
    KMeans,
    SvmTrain,
    IngestBench,
    Noop,
}

impl fmt::Display for JobKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JobKind::KMeans => "kmeans",
            JobKind::SvmTrain => "svm-train",
            JobKind::IngestBench => "ingest-bench",
            JobKind::Noop => "noop",
        })
    }
}

impl FromStr for JobKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "kmeans" | "k-means" => Ok(JobKind::KMeans),
            "svm-train" | "svm" => Ok(JobKind::SvmTrain),
            "ingest-bench" | "ingest" => Ok(JobKind::IngestBench),
            "noop" => Ok(JobKind::Noop),
            _ => Err(format!("unknown job kind `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JobPayload {
    pub kind: JobKind,
    pub params: BTreeMap<String, String>,
}

impl JobPayload {
    pub fn new(kind: JobKind) -> Self {
        Self {
            kind,
            params: BTreeMap::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_owned(), value.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JobSpec {
    pub job_id: String,
    pub payload: JobPayload,
    pub am_resources: Resources,
    pub task_resources: Vec<Resources>,
}

impl JobSpec {
    pub fn new(job_id: &str, payload: JobPayload, am: Resources, tasks: Vec<Resources>) -> Self {
        Self {
            job_id: job_id.to_owned(),
            payload,
            am_resources: am,
            task_resources: tasks,
        }
    }

    /// Parse a flat `key=value` spec document:
    ///
    /// ```text
    /// job_id=cluster-1
    /// kind=kmeans
    /// am=1:256
    /// task=2:512
    /// param.k=8
    /// ```
    pub fn from_document(text: &str) -> Result<Self, String> {
        let rec = Record::from_document(text).map_err(|e| e.to_string())?;
        let kv = |e: KvError| e.to_string();
        let kind: JobKind = rec.require("kind").map_err(kv)?.parse()?;
        let mut payload = JobPayload::new(kind);
        for (k, v) in rec.fields() {
            if let Some(name) = k.strip_prefix("param.") {
                payload.params.insert(name.to_owned(), v.clone());
            }
        }
        Ok(Self {
            job_id: rec.require("job_id").map_err(kv)?.to_owned(),
            payload,
            am_resources: rec.require("am").map_err(kv)?.parse()?,
            task_resources: rec
                .get_all("task")
                .map(str::parse)
                .collect::<Result<_, _>>()?,
        })
    }

    pub fn to_document(&self) -> String {
        let mut rec = Record::new()
            .with("job_id", &self.job_id)
            .with("kind", self.payload.kind)
            .with("am", self.am_resources);
        for t in &self.task_resources {
            rec.push("task", t);
        }
        for (k, v) in &self.payload.params {
            rec.push(&format!("param.{k}"), v);
        }
        rec.to_document()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContainerAllocation {
    pub container_id: String,
    pub node_id: String,
    pub cpu_slots: u32,
    pub memory_mb: u64,
    pub holder: String,
}

impl ContainerAllocation {
    pub fn resources(&self) -> Resources {
        Resources::new(self.cpu_slots, self.memory_mb)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JobState {
    Submitted,
    AmStarting,
    AmRegistered,
    Negotiating,
    Running,
    Succeeded,
    Failed,
    Released,
}

impl JobState {
    pub fn can_move_to(self, next: JobState) -> bool {
        use JobState::*;
        matches!(
            (self, next),
            (Submitted, AmStarting)
                | (AmStarting, AmRegistered)
                | (AmRegistered, Negotiating)
                | (Negotiating, Running)
                | (Running, Succeeded)
                | (Running, Failed)
                | (Succeeded, Released)
                | (Failed, Released)
        )
    }

    pub fn is_terminal(self) -> bool {
        self == JobState::Released
    }
}

impl fmt::Display for JobState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for JobState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use JobState::*;
        [
            Submitted,
            AmStarting,
            AmRegistered,
            Negotiating,
            Running,
            Succeeded,
            Failed,
            Released,
        ]
        .into_iter()
        .find(|st| st.to_string() == s)
        .ok_or_else(|| format!("unknown job state `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobStatus {
    pub state: JobState,
    pub progress: f64,
    pub detail: String,
}

/// Which actor answers a status poll.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatusSource {
    ResourceManager,
    ApplicationMaster,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JobOutcome {
    Succeeded,
    Failed(String),
}

#[derive(Debug, thiserror::Error)]
pub enum SchedulerError {
    #[error(transparent)]
    AccessDenied(#[from] crate::security::AccessDenied),
    #[error("invalid job spec: {0}")]
    InvalidSpec(String),
    #[error("unknown job `{0}`")]
    UnknownJob(String),
    #[error("job `{job}` is {state}; cannot {action}")]
    IllegalState {
        job: String,
        state: JobState,
        action: &'static str,
    },
    #[error("job `{0}` did not progress within the step budget")]
    Stalled(String),
    #[error("job log i/o: {0}")]
    Io(#[from] std::io::Error),
}
