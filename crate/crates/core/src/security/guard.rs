use std::sync::{Arc, RwLock};

use super::{Action, Decision, Identity, Policy, PolicySet, Secret, Ticket};
use crate::catalog::{AuditError, AuditEvent, AuditLog, Outcome};
use crate::clock::Clock;

#[derive(Debug, thiserror::Error)]
pub enum AccessDenied {
    #[error("access denied to {action} {resource}: {reason}")]
    Denied {
        resource: String,
        action: Action,
        reason: String,
    },
    #[error(transparent)]
    Audit(#[from] AuditError),
}

/// Policy enforcement point: every [`Guard::authorize`] call is decided
/// against the current policy set and recorded as exactly one audit event.
#[derive(Debug)]
pub struct Guard {
    secret: Secret,
    policies: RwLock<Arc<PolicySet>>,
    audit: Arc<AuditLog>,
    clock: Arc<dyn Clock>,
}

impl Guard {
    pub fn new(
        secret: Secret,
        policies: PolicySet,
        audit: Arc<AuditLog>,
        clock: Arc<dyn Clock>,
    ) -> Self {
        Self {
            secret,
            policies: RwLock::new(Arc::new(policies)),
            audit,
            clock,
        }
    }

    pub fn secret(&self) -> &Secret {
        &self.secret
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    pub fn audit(&self) -> &Arc<AuditLog> {
        &self.audit
    }

    pub fn policies(&self) -> Arc<PolicySet> {
        Arc::clone(&self.policies.read().expect("policy lock"))
    }

    /// Swap in a whole new policy set.
    pub fn replace_policies(&self, set: PolicySet) {
        *self.policies.write().expect("policy lock") = Arc::new(set);
    }

    pub fn add_policy(&self, policy: Policy) {
        let mut guard = self.policies.write().expect("policy lock");
        *guard = Arc::new(guard.with(policy));
    }

    pub fn authorize(
        &self,
        ticket: &Ticket,
        resource: &str,
        action: Action,
        detail: &str,
    ) -> Result<Decision, AuditError> {
        let now = self.clock.now_millis();
        let decision = self
            .policies()
            .authorize(ticket, resource, action, now, &self.secret);
        let (outcome, detail) = match &decision {
            Decision::Allow => (Outcome::Allow, detail.to_owned()),
            Decision::Deny(reason) if detail.is_empty() => (Outcome::Deny, reason.clone()),
            Decision::Deny(reason) => (Outcome::Deny, format!("{detail}: {reason}")),
        };
        self.audit.append(AuditEvent {
            when: now,
            principal: ticket.principal.clone(),
            resource: resource.to_owned(),
            action,
            outcome,
            detail,
        })?;
        Ok(decision)
    }

    /// [`Guard::authorize`], turning a deny into an error.
    pub fn require(
        &self,
        ticket: &Ticket,
        resource: &str,
        action: Action,
        detail: &str,
    ) -> Result<Identity, AccessDenied> {
        match self.authorize(ticket, resource, action, detail)? {
            Decision::Allow => Ok(Identity {
                principal: ticket.principal.clone(),
                roles: ticket.roles.clone(),
            }),
            Decision::Deny(reason) => Err(AccessDenied::Denied {
                resource: resource.to_owned(),
                action,
                reason,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::AuditFilter;
    use crate::clock::SimClock;
    use crate::security::issue_ticket;

    #[test]
    fn every_decision_is_audited() {
        let secret = Secret::from_bytes(&[3u8; 32]).unwrap();
        let audit = Arc::new(AuditLog::in_memory());
        let clock = Arc::new(SimClock::new(10));
        let guard = Guard::new(
            secret.clone(),
            PolicySet::new(vec![
                Policy::new("analyst", "store/*", [Action::Read]).unwrap()
            ]),
            Arc::clone(&audit),
            clock,
        );
        let t = issue_ticket("alice", ["analyst"], 0, 1_000, &secret).unwrap();
        assert!(guard.require(&t, "store/a", Action::Read, "").is_ok());
        assert!(guard.require(&t, "store/a", Action::Write, "").is_err());
        let events = audit.query(&AuditFilter::default());
        assert_eq!(events.len(), 2);
        assert_eq!(events[1].outcome, Outcome::Deny);
        assert_eq!(events[1].detail, "no matching policy");
        assert_eq!(events[0].when, 10);
    }
}
