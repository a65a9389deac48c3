//! Per-invocation state: resolved config, clock, secret and ticket.

use std::path::PathBuf;
use std::sync::Arc;

use lakelet_core::clock::{Clock, SimClock, WallClock, WorkModel};
use lakelet_core::lake::Lake;
use lakelet_core::security::{PolicySet, Secret, Ticket, SECRET_ENV};

use crate::config::{ClockMode, LakeConfig};
use crate::{CliError, Format};

/// Simulated time carried between invocations, in microseconds.
pub const CLOCK_STATE: &str = "clock.state";

pub struct Session {
    pub cfg: LakeConfig,
    pub format: Format,
    ticket: Option<String>,
    pub clock: Arc<dyn Clock>,
    sim: Option<Arc<SimClock>>,
}

impl Session {
    pub fn start(cfg: LakeConfig, format: Format, ticket: Option<String>) -> Result<Self, CliError> {
        cfg.ensure_root().map_err(CliError::Failed)?;
        let (clock, sim): (Arc<dyn Clock>, _) = match cfg.clock {
            ClockMode::Wall => (Arc::new(WallClock::new()), None),
            ClockMode::Simulated => {
                let sim = Arc::new(SimClock::metered(0, WorkModel::default()));
                match std::fs::read_to_string(cfg.root.join(CLOCK_STATE)) {
                    Ok(text) => {
                        let us: u64 = text
                            .trim()
                            .parse()
                            .map_err(|_| CliError::failed(format!("corrupt {CLOCK_STATE}: `{}`", text.trim())))?;
                        sim.advance_micros(us);
                    }
                    Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                    Err(e) => return Err(e.into()),
                }
                (sim.clone() as Arc<dyn Clock>, Some(sim))
            }
        };
        Ok(Self {
            cfg,
            format,
            ticket,
            clock,
            sim,
        })
    }

    /// Persist simulated time for the next invocation.
    pub fn finish(&self) -> Result<(), CliError> {
        if let Some(sim) = &self.sim {
            std::fs::write(self.cfg.root.join(CLOCK_STATE), format!("{}\n", sim.now_micros()))?;
        }
        Ok(())
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.cfg.root.join(name)
    }

    pub fn secret(&self) -> Result<Secret, CliError> {
        Secret::from_env().map_err(|e| CliError::failed(format!("{e} (hex, set {SECRET_ENV})")))
    }

    /// The --ticket value, parsed. A missing or unreadable ticket is an
    /// access denial.
    pub fn ticket(&self) -> Result<Ticket, CliError> {
        let raw = self
            .ticket
            .as_deref()
            .ok_or_else(|| CliError::failed("access denied: this command needs --ticket"))?;
        raw.trim()
            .parse()
            .map_err(|e| CliError::failed(format!("access denied: {e}")))
    }

    /// Policies on disk; an absent file is an empty set.
    pub fn policies(&self) -> Result<PolicySet, CliError> {
        let path = self.cfg.policy_path();
        match std::fs::read_to_string(&path) {
            Ok(text) => PolicySet::parse(&text).map_err(|e| CliError::failed(format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(PolicySet::default()),
            Err(e) => Err(CliError::failed(format!("{}: {e}", path.display()))),
        }
    }

    pub fn save_policies(&self, set: &PolicySet) -> Result<(), CliError> {
        let path = self.cfg.policy_path();
        std::fs::write(&path, set.to_text()).map_err(|e| CliError::failed(format!("{}: {e}", path.display())))
    }

    pub fn lake(&self) -> Result<Lake, CliError> {
        Ok(Lake::open(&self.cfg.root, self.secret()?, self.policies()?, self.clock.clone())?)
    }
}
