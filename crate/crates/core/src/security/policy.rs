use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use super::{validate_ticket, Action, Secret, Ticket};

/// Glob over `/`-separated resource names.
///
/// `*` matches any run of characters inside one segment; a segment that is
/// exactly `**` matches zero or more whole segments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourcePattern {
    raw: String,
    segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Any,
    Glob(String),
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PolicyError {
    #[error("invalid resource pattern `{0}`")]
    BadPattern(String),
    #[error("policy for role `{0}` has no actions")]
    NoActions(String),
    #[error("invalid role `{0}`")]
    BadRole(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl ResourcePattern {
    pub fn new(raw: &str) -> Result<Self, PolicyError> {
        let bad = || PolicyError::BadPattern(raw.to_owned());
        if raw.is_empty() || raw.chars().any(char::is_whitespace) {
            return Err(bad());
        }
        let segments = raw
            .split('/')
            .map(|seg| match seg {
                "" => Err(bad()),
                "**" => Ok(Segment::Any),
                s if s.contains("**") => Err(bad()),
                s => Ok(Segment::Glob(s.to_owned())),
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            raw: raw.to_owned(),
            segments,
        })
    }

    pub fn as_str(&self) -> &str {
        &self.raw
    }

    pub fn matches(&self, resource: &str) -> bool {
        let parts: Vec<&str> = resource.split('/').collect();
        match_segments(&self.segments, &parts)
    }
}

impl fmt::Display for ResourcePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

fn match_segments(pattern: &[Segment], parts: &[&str]) -> bool {
    match pattern.split_first() {
        None => parts.is_empty(),
        Some((Segment::Any, rest)) => {
            (0..=parts.len()).any(|skip| match_segments(rest, &parts[skip..]))
        }
        Some((Segment::Glob(g), rest)) => match parts.split_first() {
            Some((head, tail)) => {
                glob_segment(g.as_bytes(), head.as_bytes()) && match_segments(rest, tail)
            }
            None => false,
        },
    }
}

/// Single-segment glob where `*` matches any run of bytes.
fn glob_segment(pat: &[u8], text: &[u8]) -> bool {
    let (mut p, mut t) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while t < text.len() {
        if p < pat.len() && pat[p] == b'*' {
            star = Some((p, t));
            p += 1;
        } else if p < pat.len() && pat[p] == text[t] {
            p += 1;
            t += 1;
        } else if let Some((sp, st)) = star {
            p = sp + 1;
            t = st + 1;
            star = Some((sp, st + 1));
        } else {
            return false;
        }
    }
    pat[p..].iter().all(|&c| c == b'*')
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    pub role: String,
    pub pattern: ResourcePattern,
    pub actions: BTreeSet<Action>,
}

impl Policy {
    pub fn new<I>(role: &str, pattern: &str, actions: I) -> Result<Self, PolicyError>
    where
        I: IntoIterator<Item = Action>,
    {
        if role.is_empty()
            || role
                .chars()
                .any(|c| c.is_whitespace() || c == ',' || c == '|')
        {
            return Err(PolicyError::BadRole(role.to_owned()));
        }
        let actions: BTreeSet<Action> = actions.into_iter().collect();
        if actions.is_empty() {
            return Err(PolicyError::NoActions(role.to_owned()));
        }
        Ok(Self {
            role: role.to_owned(),
            pattern: ResourcePattern::new(pattern)?,
            actions,
        })
    }

    pub fn permits(&self, roles: &BTreeSet<String>, resource: &str, action: Action) -> bool {
        roles.contains(&self.role)
            && self.actions.contains(&action)
            && self.pattern.matches(resource)
    }
}

impl fmt::Display for Policy {
    /// `role<TAB>pattern<TAB>Action,Action`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let actions: Vec<&str> = self.actions.iter().map(|a| a.as_str()).collect();
        write!(f, "{}\t{}\t{}", self.role, self.pattern, actions.join(","))
    }
}

impl FromStr for Policy {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse_err = |msg: String| PolicyError::Parse { line: 0, msg };
        let mut parts = s.split('\t');
        let (Some(role), Some(pattern), Some(actions), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(parse_err("expected role<TAB>pattern<TAB>actions".into()));
        };
        let actions = actions
            .split(',')
            .filter(|a| !a.trim().is_empty())
            .map(Action::from_str)
            .collect::<Result<Vec<_>, _>>()
            .map_err(parse_err)?;
        Policy::new(role, pattern, actions)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Allow,
    Deny(String),
}

impl Decision {
    pub fn is_allow(&self) -> bool {
        matches!(self, Decision::Allow)
    }
}

/// An immutable set of policies. Deny by default.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PolicySet {
    policies: Vec<Policy>,
}

impl PolicySet {
    pub fn new(policies: Vec<Policy>) -> Self {
        Self { policies }
    }

    pub fn policies(&self) -> &[Policy] {
        &self.policies
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    pub fn with(&self, policy: Policy) -> Self {
        let mut policies = self.policies.clone();
        policies.push(policy);
        Self { policies }
    }

    /// Allow iff the ticket is valid at `now` and some policy held by one of
    /// its roles covers `(resource, action)`.
    pub fn authorize(
        &self,
        ticket: &Ticket,
        resource: &str,
        action: Action,
        now: u64,
        secret: &Secret,
    ) -> Decision {
        let identity = match validate_ticket(ticket, now, secret) {
            Ok(id) => id,
            Err(e) => return Decision::Deny(e.to_string()),
        };
        if self
            .policies
            .iter()
            .any(|p| p.permits(&identity.roles, resource, action))
        {
            Decision::Allow
        } else {
            Decision::Deny("no matching policy".into())
        }
    }

    /// Line-delimited `role<TAB>pattern<TAB>actions`; blank and `#` lines skipped.
    pub fn parse(text: &str) -> Result<Self, PolicyError> {
        let mut policies = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let policy = line.parse().map_err(|e| match e {
                PolicyError::Parse { msg, .. } => PolicyError::Parse { line: i + 1, msg },
                other => PolicyError::Parse {
                    line: i + 1,
                    msg: other.to_string(),
                },
            })?;
            policies.push(policy);
        }
        Ok(Self { policies })
    }

    pub fn to_text(&self) -> String {
        self.policies.iter().map(|p| format!("{p}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::security::issue_ticket;

    fn secret() -> Secret {
        Secret::from_bytes(&[1u8; 32]).unwrap()
    }

    #[test]
    fn glob_semantics() {
        let p = ResourcePattern::new("store/*").unwrap();
        assert!(p.matches("store/ab12"));
        assert!(!p.matches("store/ab/12"));
        assert!(!p.matches("store"));
        let any = ResourcePattern::new("jobs/**").unwrap();
        assert!(any.matches("jobs"));
        assert!(any.matches("jobs/a/b/c"));
        let mid = ResourcePattern::new("a/**/z").unwrap();
        assert!(mid.matches("a/z") && mid.matches("a/b/c/z") && !mid.matches("a/b"));
        let infix = ResourcePattern::new("store/ab*").unwrap();
        assert!(infix.matches("store/ab12") && !infix.matches("store/cd12"));
    }

    #[test]
    fn bad_patterns_rejected() {
        for raw in ["", "a//b", "a**", "store/x**y", "a b"] {
            assert!(ResourcePattern::new(raw).is_err(), "{raw}");
        }
        assert!(matches!(
            Policy::new("r", "store/*", []),
            Err(PolicyError::NoActions(_))
        ));
    }

    #[test]
    fn read_policy_allows_read_not_write() {
        let set = PolicySet::new(vec![
            Policy::new("analyst", "store/*", [Action::Read]).unwrap()
        ]);
        let t = issue_ticket("alice", ["analyst"], 0, 1000, &secret()).unwrap();
        assert_eq!(
            set.authorize(&t, "store/ab12", Action::Read, 1, &secret()),
            Decision::Allow
        );
        assert_eq!(
            set.authorize(&t, "store/ab12", Action::Write, 1, &secret()),
            Decision::Deny("no matching policy".into())
        );
        assert!(!set
            .authorize(&t, "store/ab12", Action::Read, 1000, &secret())
            .is_allow());
    }

    #[test]
    fn empty_set_denies() {
        let t = issue_ticket("root", ["admin"], 0, 1000, &secret()).unwrap();
        for a in Action::ALL {
            assert!(!PolicySet::default()
                .authorize(&t, "store/x", a, 1, &secret())
                .is_allow());
        }
    }

    #[test]
    fn file_format_round_trip() {
        let text = "# roles\nanalyst\tstore/*\tRead\nclinician\tjobs/**\tSubmit,Read\n";
        let set = PolicySet::parse(text).unwrap();
        assert_eq!(set.policies().len(), 2);
        assert_eq!(PolicySet::parse(&set.to_text()).unwrap(), set);
        assert!(matches!(
            PolicySet::parse("ok\tstore/*\tRead\nbroken line\n"),
            Err(PolicyError::Parse { line: 2, .. })
        ));
    }
}
