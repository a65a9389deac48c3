use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Mutex;

use crate::kv::{self, Record};
use crate::security::Action;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Allow,
    Deny,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Allow => "Allow",
            Outcome::Deny => "Deny",
        })
    }
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "allow" => Ok(Outcome::Allow),
            "deny" => Ok(Outcome::Deny),
            _ => Err(format!("unknown outcome `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditEvent {
    pub when: u64,
    pub principal: String,
    pub resource: String,
    pub action: Action,
    pub outcome: Outcome,
    pub detail: String,
}

impl AuditEvent {
    fn to_record(&self) -> Record {
        Record::new()
            .with("when", self.when)
            .with("principal", &self.principal)
            .with("resource", &self.resource)
            .with("action", self.action)
            .with("outcome", self.outcome)
            .with("detail", &self.detail)
    }

    fn from_record(rec: &Record) -> Result<Self, kv::KvError> {
        let bad = |key: &str| kv::KvError::BadValue {
            key: key.to_owned(),
            value: rec.get(key).unwrap_or_default().to_owned(),
        };
        Ok(Self {
            when: rec.parse("when")?,
            principal: rec.require("principal")?.to_owned(),
            resource: rec.require("resource")?.to_owned(),
            action: rec.require("action")?.parse().map_err(|_| bad("action"))?,
            outcome: rec
                .require("outcome")?
                .parse()
                .map_err(|_| bad("outcome"))?,
            detail: rec.get("detail").unwrap_or_default().to_owned(),
        })
    }
}

/// Conjunctive filter; `None` clauses match everything. Time range is
/// half-open `[from, to)`.
#[derive(Debug, Clone, Default)]
pub struct AuditFilter {
    pub principal: Option<String>,
    pub resource: Option<String>,
    pub action: Option<Action>,
    pub outcome: Option<Outcome>,
    pub from: Option<u64>,
    pub to: Option<u64>,
}

impl AuditFilter {
    pub fn matches(&self, e: &AuditEvent) -> bool {
        self.principal.as_ref().is_none_or(|p| *p == e.principal)
            && self.resource.as_ref().is_none_or(|r| *r == e.resource)
            && self.action.is_none_or(|a| a == e.action)
            && self.outcome.is_none_or(|o| o == e.outcome)
            && self.from.is_none_or(|f| e.when >= f)
            && self.to.is_none_or(|t| e.when < t)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AuditError {
    #[error("audit log i/o: {0}")]
    Io(#[from] io::Error),
    #[error("audit log: {0}")]
    Corrupt(#[from] kv::KvError),
}

#[derive(Debug, Default)]
struct Inner {
    events: Vec<AuditEvent>,
    file: Option<File>,
}

/// Append-only audit trail. Appends are globally serialized and written
/// through to disk before [`AuditLog::append`] returns.
#[derive(Debug, Default)]
pub struct AuditLog {
    inner: Mutex<Inner>,
}

impl AuditLog {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, AuditError> {
        let path = path.as_ref();
        let mut events = Vec::new();
        if path.exists() {
            let text = std::fs::read_to_string(path)?;
            for (line_no, line) in kv::complete_lines(&text) {
                events.push(AuditEvent::from_record(&Record::from_line(line, line_no)?)?);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            inner: Mutex::new(Inner {
                events,
                file: Some(file),
            }),
        })
    }

    /// Append an event. `when` is raised to the previous event's time if it
    /// would otherwise go backwards, so the log stays time-ordered.
    pub fn append(&self, mut event: AuditEvent) -> Result<AuditEvent, AuditError> {
        let mut inner = self.inner.lock().expect("audit lock");
        if let Some(last) = inner.events.last() {
            event.when = event.when.max(last.when);
        }
        if let Some(file) = inner.file.as_mut() {
            let mut line = event.to_record().to_line();
            line.push('\n');
            file.write_all(line.as_bytes())?;
            file.flush()?;
        }
        inner.events.push(event.clone());
        Ok(event)
    }

    pub fn query(&self, filter: &AuditFilter) -> Vec<AuditEvent> {
        self.inner
            .lock()
            .expect("audit lock")
            .events
            .iter()
            .filter(|e| filter.matches(e))
            .cloned()
            .collect()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("audit lock").events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn event(when: u64, principal: &str, outcome: Outcome) -> AuditEvent {
        AuditEvent {
            when,
            principal: principal.into(),
            resource: "store/x".into(),
            action: Action::Read,
            outcome,
            detail: String::new(),
        }
    }

    #[test]
    fn deny_events_are_queryable() {
        let log = AuditLog::in_memory();
        log.append(event(1, "a", Outcome::Allow)).unwrap();
        log.append(event(2, "b", Outcome::Deny)).unwrap();
        let denied = log.query(&AuditFilter {
            outcome: Some(Outcome::Deny),
            ..Default::default()
        });
        assert_eq!(denied.len(), 1);
        assert_eq!(denied[0].principal, "b");
    }

    #[test]
    fn append_order_preserved_and_time_monotone() {
        let log = AuditLog::in_memory();
        for i in 0..100u64 {
            let who = if i % 2 == 0 { "even" } else { "odd" };
            log.append(event(100 - i, who, Outcome::Allow)).unwrap();
        }
        let all = log.query(&AuditFilter::default());
        assert_eq!(all.len(), 100);
        assert!(all.windows(2).all(|w| w[0].when <= w[1].when));
        assert!(all
            .iter()
            .enumerate()
            .all(|(i, e)| e.principal == if i % 2 == 0 { "even" } else { "odd" }));
    }

    #[test]
    fn reopen_is_a_prefix_extension() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("audit.log");
        let first = {
            let log = AuditLog::open(&path).unwrap();
            log.append(event(1, "a\tb", Outcome::Allow)).unwrap();
            log.query(&AuditFilter::default())
        };
        let log = AuditLog::open(&path).unwrap();
        log.append(event(5, "c", Outcome::Deny)).unwrap();
        let second = log.query(&AuditFilter::default());
        assert_eq!(&second[..first.len()], &first[..]);
        assert_eq!(second.len(), 2);
    }
}
