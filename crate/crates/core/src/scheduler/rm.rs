use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use super::{
    ContainerAllocation, JobOutcome, JobSpec, JobState, JobStatus, NodeSpec, Resources,
    SchedulerError, StatusSource,
};
use crate::clock::Work;
use crate::kv::{complete_lines, Record};
use crate::security::{Action, Guard, Ticket};

pub const JOBS_LOG: &str = "jobs.log";
pub const JOBS_RESOURCE: &str = "jobs/*";
const STEP_BUDGET: usize = 10_000;

pub fn job_resource(job_id: &str) -> String {
    format!("jobs/{job_id}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeUsage {
    pub node_id: String,
    pub capacity: Resources,
    /// Held by granted containers.
    pub allocated: Resources,
    /// Held for admitted jobs that have not yet claimed it.
    pub reserved: Resources,
}

impl NodeUsage {
    pub fn free(&self) -> Resources {
        Resources::new(
            self.capacity.cpu_slots - self.allocated.cpu_slots - self.reserved.cpu_slots,
            self.capacity.memory_mb - self.allocated.memory_mb - self.reserved.memory_mb,
        )
    }
}

#[derive(Debug, Clone)]
pub struct NegotiationOutcome {
    /// Containers granted to this job during the call.
    pub granted: Vec<ContainerAllocation>,
    /// Requests queued until capacity frees up.
    pub deferred: usize,
}

#[derive(Debug)]
pub enum RunError<E> {
    Scheduler(SchedulerError),
    Job(E),
}

impl<E: fmt::Display> fmt::Display for RunError<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Scheduler(e) => e.fmt(f),
            RunError::Job(e) => write!(f, "job failed: {e}"),
        }
    }
}

impl<E: fmt::Debug + fmt::Display> std::error::Error for RunError<E> {}

impl<E> From<SchedulerError> for RunError<E> {
    fn from(e: SchedulerError) -> Self {
        RunError::Scheduler(e)
    }
}

/// Append-only record of job transitions and container grants.
#[derive(Debug)]
pub struct JobLog {
    path: PathBuf,
    file: Mutex<File>,
}

impl JobLog {
    pub fn open(path: impl Into<PathBuf>) -> std::io::Result<Self> {
        let path = path.into();
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self {
            path,
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn append(&self, rec: &Record) -> std::io::Result<()> {
        let mut f = self.file.lock().expect("job log lock");
        f.write_all(format!("{}\n", rec.to_line()).as_bytes())?;
        f.flush()
    }

    /// All complete records, in append order.
    pub fn read(path: &Path) -> Result<Vec<Record>, SchedulerError> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        complete_lines(&text)
            .map(|(n, l)| {
                Record::from_line(l, n).map_err(|e| SchedulerError::Io(std::io::Error::other(e)))
            })
            .collect()
    }

    /// Last recorded status of every job, keyed by job id.
    pub fn latest(path: &Path) -> Result<BTreeMap<String, JobStatus>, SchedulerError> {
        let mut out = BTreeMap::new();
        for rec in Self::read(path)? {
            if rec.get("event") != Some("transition") {
                continue;
            }
            let (Some(job), Some(Ok(state))) =
                (rec.get("job"), rec.get("to").map(str::parse::<JobState>))
            else {
                continue;
            };
            out.insert(
                job.to_owned(),
                JobStatus {
                    state,
                    progress: rec
                        .get("progress")
                        .and_then(|p| p.parse().ok())
                        .unwrap_or(0.0),
                    detail: rec.get("detail").unwrap_or_default().to_owned(),
                },
            );
        }
        Ok(out)
    }
}

#[derive(Debug)]
struct Node {
    spec: NodeSpec,
    allocated: Resources,
    reserved: Resources,
}

impl Node {
    fn free(&self) -> Resources {
        Resources::new(
            self.spec.cpu_slots - self.allocated.cpu_slots - self.reserved.cpu_slots,
            self.spec.memory_mb - self.allocated.memory_mb - self.reserved.memory_mb,
        )
    }
}

fn add(a: &mut Resources, b: Resources) {
    a.cpu_slots += b.cpu_slots;
    a.memory_mb += b.memory_mb;
}

fn sub(a: &mut Resources, b: Resources) {
    a.cpu_slots -= b.cpu_slots;
    a.memory_mb -= b.memory_mb;
}

#[derive(Debug)]
struct Job {
    spec: JobSpec,
    am_view: JobStatus,
    rm_view: JobStatus,
    am_container: Option<ContainerAllocation>,
    tasks: Vec<ContainerAllocation>,
    reservations: Vec<(String, Resources)>,
    deferred: usize,
}

#[derive(Debug)]
struct Deferred {
    job_id: String,
    request: Resources,
}

#[derive(Debug, Default)]
struct State {
    nodes: BTreeMap<String, Node>,
    jobs: HashMap<String, Job>,
    admission: VecDeque<String>,
    deferred: VecDeque<Deferred>,
    next_container: u64,
    steps: u64,
}

/// First node in id order with room for `req` after the extra holds in
/// `pending`.
fn first_fit(
    nodes: &BTreeMap<String, Node>,
    pending: &BTreeMap<&str, Resources>,
    req: Resources,
) -> Option<String> {
    nodes.iter().find_map(|(id, node)| {
        let mut free = node.free();
        if let Some(held) = pending.get(id.as_str()) {
            if !held.fits_in(free) {
                return None;
            }
            sub(&mut free, *held);
        }
        req.fits_in(free).then(|| id.clone())
    })
}

/// Sequential first-fit of every request, or `None` if any does not fit.
fn plan(nodes: &BTreeMap<String, Node>, reqs: &[Resources]) -> Option<Vec<String>> {
    let mut held: BTreeMap<&str, Resources> = BTreeMap::new();
    let mut placement = Vec::with_capacity(reqs.len());
    for &req in reqs {
        let node = first_fit(nodes, &held, req)?;
        let key = nodes
            .get_key_value(&node)
            .expect("planned node exists")
            .0
            .as_str();
        add(held.entry(key).or_default(), req);
        placement.push(node);
    }
    Some(placement)
}

/// Resource manager plus the per-job application master logic, driven by
/// explicit [`ResourceManager::step`] calls.
#[derive(Debug)]
pub struct ResourceManager {
    state: Mutex<State>,
    guard: Arc<Guard>,
    log: Option<JobLog>,
}

impl ResourceManager {
    pub fn new(nodes: Vec<NodeSpec>, guard: Arc<Guard>) -> Self {
        let nodes = nodes
            .into_iter()
            .map(|spec| {
                let node = Node {
                    spec,
                    allocated: Resources::default(),
                    reserved: Resources::default(),
                };
                (node.spec.node_id.clone(), node)
            })
            .collect();
        Self {
            state: Mutex::new(State {
                nodes,
                ..State::default()
            }),
            guard,
            log: None,
        }
    }

    pub fn with_log(mut self, log: JobLog) -> Self {
        self.log = Some(log);
        self
    }

    pub fn guard(&self) -> &Arc<Guard> {
        &self.guard
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, State> {
        self.state.lock().expect("scheduler lock")
    }

    fn write_log(&self, rec: Record) -> Result<(), SchedulerError> {
        match &self.log {
            Some(log) => Ok(log.append(&rec)?),
            None => Ok(()),
        }
    }

    fn transition(
        &self,
        st: &mut State,
        job_id: &str,
        to: JobState,
        progress: f64,
        detail: String,
    ) -> Result<(), SchedulerError> {
        let steps = st.steps;
        let job = st.jobs.get_mut(job_id).expect("transition on known job");
        let from = job.am_view.state;
        assert!(
            from.can_move_to(to),
            "illegal transition {from} -> {to} for {job_id}"
        );
        job.am_view = JobStatus {
            state: to,
            progress,
            detail: detail.clone(),
        };
        self.write_log(
            Record::new()
                .with("event", "transition")
                .with("when", self.guard.clock().now_millis())
                .with("step", steps)
                .with("job", job_id)
                .with("from", from)
                .with("to", to)
                .with("progress", progress)
                .with("detail", detail),
        )
    }

    fn allocate(
        &self,
        st: &mut State,
        job_id: &str,
        node_id: &str,
        req: Resources,
        from_reservation: bool,
    ) -> Result<ContainerAllocation, SchedulerError> {
        st.next_container += 1;
        let node = st.nodes.get_mut(node_id).expect("allocation on known node");
        if from_reservation {
            sub(&mut node.reserved, req);
        }
        add(&mut node.allocated, req);
        let c = ContainerAllocation {
            container_id: format!("container_{:06}", st.next_container),
            node_id: node_id.to_owned(),
            cpu_slots: req.cpu_slots,
            memory_mb: req.memory_mb,
            holder: job_id.to_owned(),
        };
        self.write_log(
            Record::new()
                .with("event", "grant")
                .with("when", self.guard.clock().now_millis())
                .with("step", st.steps)
                .with("job", job_id)
                .with("container", &c.container_id)
                .with("node", node_id)
                .with("resources", req),
        )?;
        Ok(c)
    }

    fn validate(&self, st: &State, spec: &JobSpec) -> Result<(), SchedulerError> {
        let invalid = |m: String| Err(SchedulerError::InvalidSpec(m));
        if spec.job_id.is_empty()
            || !spec
                .job_id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        {
            return invalid(format!(
                "job id `{}` must be non-empty [A-Za-z0-9._-]",
                spec.job_id
            ));
        }
        if st.jobs.contains_key(&spec.job_id) {
            return invalid(format!("job id `{}` already submitted", spec.job_id));
        }
        let all: Vec<Resources> = std::iter::once(spec.am_resources)
            .chain(spec.task_resources.iter().copied())
            .collect();
        if let Some(r) = all.iter().find(|r| r.cpu_slots == 0 || r.memory_mb == 0) {
            return invalid(format!(
                "request {r} must ask for at least one cpu slot and 1 MB"
            ));
        }
        let empty: BTreeMap<String, Node> = st
            .nodes
            .iter()
            .map(|(id, n)| {
                let node = Node {
                    spec: n.spec.clone(),
                    allocated: Resources::default(),
                    reserved: Resources::default(),
                };
                (id.clone(), node)
            })
            .collect();
        if plan(&empty, &all).is_none() {
            return invalid(format!(
                "AM {} plus {} task request(s) cannot be placed on the cluster",
                spec.am_resources,
                spec.task_resources.len()
            ));
        }
        Ok(())
    }

    /// Queue a job. Requires `Submit` on `jobs/*`. Nothing is placed until
    /// the next [`ResourceManager::step`].
    pub fn submit_job(&self, spec: JobSpec, ticket: &Ticket) -> Result<String, SchedulerError> {
        self.guard.require(
            ticket,
            JOBS_RESOURCE,
            Action::Submit,
            &format!("submit {}", spec.job_id),
        )?;
        let mut st = self.lock();
        self.validate(&st, &spec)?;
        let job_id = spec.job_id.clone();
        let status = JobStatus {
            state: JobState::Submitted,
            progress: 0.0,
            detail: "queued".into(),
        };
        st.jobs.insert(
            job_id.clone(),
            Job {
                spec,
                am_view: status.clone(),
                rm_view: status,
                am_container: None,
                tasks: Vec::new(),
                reservations: Vec::new(),
                deferred: 0,
            },
        );
        st.admission.push_back(job_id.clone());
        self.write_log(
            Record::new()
                .with("event", "transition")
                .with("when", self.guard.clock().now_millis())
                .with("step", st.steps)
                .with("job", &job_id)
                .with("from", "-")
                .with("to", JobState::Submitted)
                .with("progress", 0.0)
                .with("detail", "queued"),
        )?;
        Ok(job_id)
    }

    /// Advance the simulation by one step. Returns the number of job state
    /// transitions performed.
    pub fn step(&self) -> Result<usize, SchedulerError> {
        self.guard.clock().charge(Work::SchedulerStep);
        let mut st = self.lock();
        st.steps += 1;
        let mut moved = 0;

        let mut ids: Vec<String> = st.jobs.keys().cloned().collect();
        ids.sort();
        for id in &ids {
            match st.jobs[id].am_view.state {
                JobState::Succeeded | JobState::Failed => {
                    let p = st.jobs[id].am_view.progress;
                    self.transition(
                        &mut st,
                        id,
                        JobState::Released,
                        p,
                        "application master deregistered".into(),
                    )?;
                    moved += 1;
                }
                JobState::AmStarting => {
                    self.transition(
                        &mut st,
                        id,
                        JobState::AmRegistered,
                        0.0,
                        "application master registered".into(),
                    )?;
                    moved += 1;
                }
                _ => {}
            }
        }

        while let Some(head) = st.admission.front().cloned() {
            let spec = st.jobs[&head].spec.clone();
            let reqs: Vec<Resources> = std::iter::once(spec.am_resources)
                .chain(spec.task_resources.iter().copied())
                .collect();
            let Some(placement) = plan(&st.nodes, &reqs) else {
                break;
            };
            st.admission.pop_front();
            let am = self.allocate(&mut st, &head, &placement[0], spec.am_resources, false)?;
            for (node_id, &req) in placement[1..].iter().zip(&spec.task_resources) {
                add(
                    &mut st.nodes.get_mut(node_id).expect("planned node").reserved,
                    req,
                );
                st.jobs
                    .get_mut(&head)
                    .expect("admitted job")
                    .reservations
                    .push((node_id.clone(), req));
            }
            let detail = format!("application master {} on {}", am.container_id, am.node_id);
            st.jobs.get_mut(&head).expect("admitted job").am_container = Some(am);
            self.transition(&mut st, &head, JobState::AmStarting, 0.0, detail)?;
            moved += 1;
        }

        moved += self.grant_deferred(&mut st, None)?.1;

        for job in st.jobs.values_mut() {
            job.rm_view = job.am_view.clone();
        }
        Ok(moved)
    }

    /// Serve queued requests in FIFO order while the head fits. Returns the
    /// containers granted to `for_job` and the number of jobs that reached
    /// `Running`.
    fn grant_deferred(
        &self,
        st: &mut State,
        for_job: Option<&str>,
    ) -> Result<(Vec<ContainerAllocation>, usize), SchedulerError> {
        let mut mine = Vec::new();
        let mut running = 0;
        while let Some(head) = st.deferred.front() {
            let Some(node) = first_fit(&st.nodes, &BTreeMap::new(), head.request) else {
                break;
            };
            let Deferred { job_id, request } = st.deferred.pop_front().expect("head exists");
            let c = self.allocate(st, &job_id, &node, request, false)?;
            if for_job == Some(job_id.as_str()) {
                mine.push(c.clone());
            }
            let job = st.jobs.get_mut(&job_id).expect("deferred job");
            job.tasks.push(c);
            job.deferred -= 1;
            if job.deferred == 0 {
                let n = job.tasks.len();
                self.transition(
                    st,
                    &job_id,
                    JobState::Running,
                    0.0,
                    format!("{n} task container(s) granted"),
                )?;
                running += 1;
            }
        }
        Ok((mine, running))
    }

    /// AM-side container negotiation. Requests matching a reservation made
    /// at admission are granted from it; others are first-fit or queued.
    pub fn negotiate(
        &self,
        job_id: &str,
        requests: &[Resources],
    ) -> Result<NegotiationOutcome, SchedulerError> {
        let mut st = self.lock();
        let job = st
            .jobs
            .get(job_id)
            .ok_or_else(|| SchedulerError::UnknownJob(job_id.to_owned()))?;
        let state = job.am_view.state;
        if !matches!(state, JobState::AmRegistered | JobState::Negotiating) {
            return Err(SchedulerError::IllegalState {
                job: job_id.to_owned(),
                state,
                action: "negotiate",
            });
        }
        let largest_fit = |r: &Resources| st.nodes.values().any(|n| r.fits_in(n.spec.capacity()));
        if let Some(r) = requests
            .iter()
            .find(|r| r.cpu_slots == 0 || r.memory_mb == 0 || !largest_fit(r))
        {
            return Err(SchedulerError::InvalidSpec(format!(
                "request {r} can never be placed"
            )));
        }
        if state == JobState::AmRegistered {
            self.transition(
                &mut st,
                job_id,
                JobState::Negotiating,
                0.0,
                "negotiating containers".into(),
            )?;
        }

        let mut granted = Vec::new();
        for &req in requests {
            let job = st.jobs.get_mut(job_id).expect("known job");
            match job.reservations.iter().position(|(_, r)| *r == req) {
                Some(i) => {
                    let (node, _) = job.reservations.remove(i);
                    let c = self.allocate(&mut st, job_id, &node, req, true)?;
                    granted.push(c.clone());
                    st.jobs.get_mut(job_id).expect("known job").tasks.push(c);
                }
                None => {
                    job.deferred += 1;
                    st.deferred.push_back(Deferred {
                        job_id: job_id.to_owned(),
                        request: req,
                    });
                }
            }
        }
        let (more, _) = self.grant_deferred(&mut st, Some(job_id))?;
        granted.extend(more);

        let job = &st.jobs[job_id];
        let deferred = job.deferred;
        if deferred == 0 && job.am_view.state == JobState::Negotiating {
            let n = job.tasks.len();
            self.transition(
                &mut st,
                job_id,
                JobState::Running,
                0.0,
                format!("{n} task container(s) granted"),
            )?;
        }
        Ok(NegotiationOutcome { granted, deferred })
    }

    /// Progress report from a running AM. Progress never moves backwards.
    pub fn report_progress(
        &self,
        job_id: &str,
        progress: f64,
        detail: &str,
    ) -> Result<(), SchedulerError> {
        let mut st = self.lock();
        let job = st
            .jobs
            .get_mut(job_id)
            .ok_or_else(|| SchedulerError::UnknownJob(job_id.to_owned()))?;
        if job.am_view.state != JobState::Running {
            return Err(SchedulerError::IllegalState {
                job: job_id.to_owned(),
                state: job.am_view.state,
                action: "report progress",
            });
        }
        job.am_view.progress = progress.clamp(job.am_view.progress, 1.0);
        job.am_view.detail = detail.to_owned();
        Ok(())
    }

    /// Finish a running job and return everything it holds. The job becomes
    /// `Released` on the next step.
    pub fn complete_job(&self, job_id: &str, outcome: JobOutcome) -> Result<(), SchedulerError> {
        let mut st = self.lock();
        let job = st
            .jobs
            .get_mut(job_id)
            .ok_or_else(|| SchedulerError::UnknownJob(job_id.to_owned()))?;
        if job.am_view.state != JobState::Running {
            return Err(SchedulerError::IllegalState {
                job: job_id.to_owned(),
                state: job.am_view.state,
                action: "complete",
            });
        }
        let held: Vec<ContainerAllocation> =
            job.tasks.drain(..).chain(job.am_container.take()).collect();
        let reserved = std::mem::take(&mut job.reservations);
        for c in &held {
            sub(
                &mut st.nodes.get_mut(&c.node_id).expect("known node").allocated,
                c.resources(),
            );
            self.write_log(
                Record::new()
                    .with("event", "release")
                    .with("when", self.guard.clock().now_millis())
                    .with("step", st.steps)
                    .with("job", job_id)
                    .with("container", &c.container_id)
                    .with("node", &c.node_id),
            )?;
        }
        for (node, r) in reserved {
            sub(
                &mut st.nodes.get_mut(&node).expect("known node").reserved,
                r,
            );
        }
        let (to, detail) = match outcome {
            JobOutcome::Succeeded => (JobState::Succeeded, "completed".to_owned()),
            JobOutcome::Failed(reason) => (JobState::Failed, reason),
        };
        self.transition(&mut st, job_id, to, 1.0, detail)?;
        self.grant_deferred(&mut st, None)?;
        Ok(())
    }

    /// Requires `Read` on `jobs/<id>`. The RM view is refreshed once per step
    /// and may trail the AM view by one step.
    pub fn poll_status(
        &self,
        job_id: &str,
        ticket: &Ticket,
        source: StatusSource,
    ) -> Result<JobStatus, SchedulerError> {
        self.guard
            .require(ticket, &job_resource(job_id), Action::Read, "poll status")?;
        let st = self.lock();
        let job = st
            .jobs
            .get(job_id)
            .ok_or_else(|| SchedulerError::UnknownJob(job_id.to_owned()))?;
        Ok(match source {
            StatusSource::ResourceManager => job.rm_view.clone(),
            StatusSource::ApplicationMaster => job.am_view.clone(),
        })
    }

    pub fn state_of(&self, job_id: &str) -> Option<JobState> {
        self.lock().jobs.get(job_id).map(|j| j.am_view.state)
    }

    /// Containers currently held by `job_id`, AM first.
    pub fn containers(&self, job_id: &str) -> Vec<ContainerAllocation> {
        let st = self.lock();
        st.jobs
            .get(job_id)
            .map(|j| j.am_container.iter().chain(&j.tasks).cloned().collect())
            .unwrap_or_default()
    }

    pub fn nodes(&self) -> Vec<NodeUsage> {
        self.lock()
            .nodes
            .values()
            .map(|n| NodeUsage {
                node_id: n.spec.node_id.clone(),
                capacity: n.spec.capacity(),
                allocated: n.allocated,
                reserved: n.reserved,
            })
            .collect()
    }

    pub fn steps(&self) -> u64 {
        self.lock().steps
    }

    /// Recount node usage from the jobs' holdings and compare it with the
    /// node counters.
    pub fn check_invariants(&self) -> Result<(), String> {
        let st = self.lock();
        let mut alloc: BTreeMap<&str, Resources> = BTreeMap::new();
        let mut reserved: BTreeMap<&str, Resources> = BTreeMap::new();
        for (id, job) in &st.jobs {
            for c in job.am_container.iter().chain(&job.tasks) {
                if &c.holder != id {
                    return Err(format!(
                        "container {} held by {id} names {}",
                        c.container_id, c.holder
                    ));
                }
                add(alloc.entry(c.node_id.as_str()).or_default(), c.resources());
            }
            for (node, r) in &job.reservations {
                add(reserved.entry(node.as_str()).or_default(), *r);
            }
            if job.am_view.state == JobState::Released
                && (job.am_container.is_some() || !job.tasks.is_empty())
            {
                return Err(format!("released job {id} still holds containers"));
            }
        }
        for (id, node) in &st.nodes {
            let a = alloc.get(id.as_str()).copied().unwrap_or_default();
            let r = reserved.get(id.as_str()).copied().unwrap_or_default();
            if a != node.allocated || r != node.reserved {
                return Err(format!(
                    "node {id}: counters {:?}/{:?}, holdings {a:?}/{r:?}",
                    node.allocated, node.reserved
                ));
            }
            let mut used = a;
            add(&mut used, r);
            if !used.fits_in(node.spec.capacity()) {
                return Err(format!("node {id} over capacity: {used}"));
            }
        }
        Ok(())
    }

    fn step_until(
        &self,
        job_id: &str,
        done: impl Fn(JobState) -> bool,
    ) -> Result<(), SchedulerError> {
        for _ in 0..STEP_BUDGET {
            if self.state_of(job_id).is_some_and(&done) {
                return Ok(());
            }
            self.step()?;
        }
        Err(SchedulerError::Stalled(job_id.to_owned()))
    }

    /// Drive one job through its whole life cycle, running `work` while it
    /// holds its containers. A failed `work` marks the job `Failed`.
    pub fn run_job<T, E: fmt::Display>(
        &self,
        spec: JobSpec,
        ticket: &Ticket,
        work: impl FnOnce(&[ContainerAllocation]) -> Result<T, E>,
    ) -> Result<T, RunError<E>> {
        let tasks = spec.task_resources.clone();
        let id = self.submit_job(spec, ticket)?;
        self.step_until(&id, |s| s == JobState::AmRegistered)?;
        self.negotiate(&id, &tasks)?;
        self.step_until(&id, |s| s == JobState::Running)?;
        let result = work(&self.containers(&id));
        let outcome = match &result {
            Ok(_) => JobOutcome::Succeeded,
            Err(e) => JobOutcome::Failed(e.to_string()),
        };
        self.complete_job(&id, outcome)?;
        self.step_until(&id, JobState::is_terminal)?;
        result.map_err(RunError::Job)
    }
}
