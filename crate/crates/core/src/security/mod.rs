//! Ticket authentication and role-based authorization.
//!
//! A [`Ticket`] is a timestamped credential signed with HMAC-SHA256 under the
//! lake secret. It is valid on the half-open interval
//! `[issued_at, expires_at)`. Authorization matches the ticket's roles
//! against a [`PolicySet`]; with no matching policy the answer is deny.

mod guard;
mod policy;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use hmac::{Hmac, KeyInit, Mac};
use sha2::Sha256;

pub use guard::{AccessDenied, Guard};
pub use policy::{Decision, Policy, PolicyError, PolicySet, ResourcePattern};

type HmacSha256 = Hmac<Sha256>;

pub const SECRET_ENV: &str = "LAKELET_SECRET";
pub const MIN_SECRET_BYTES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Read,
    Write,
    Submit,
    Admin,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Read, Action::Write, Action::Submit, Action::Admin];

    pub fn as_str(self) -> &'static str {
        match self {
            Action::Read => "Read",
            Action::Write => "Write",
            Action::Submit => "Submit",
            Action::Admin => "Admin",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "read" => Ok(Action::Read),
            "write" => Ok(Action::Write),
            "submit" => Ok(Action::Submit),
            "admin" => Ok(Action::Admin),
            _ => Err(format!("unknown action `{s}`")),
        }
    }
}

/// Shared signing key.
#[derive(Clone, PartialEq, Eq)]
pub struct Secret(Vec<u8>);

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Secret(<{} bytes>)", self.0.len())
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SecretError {
    #[error("{SECRET_ENV} is not set")]
    Missing,
    #[error("secret is not valid hex")]
    NotHex,
    #[error("secret must be at least {MIN_SECRET_BYTES} bytes, got {0}")]
    TooShort(usize),
}

impl Secret {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SecretError> {
        if bytes.len() < MIN_SECRET_BYTES {
            return Err(SecretError::TooShort(bytes.len()));
        }
        Ok(Self(bytes.to_vec()))
    }

    pub fn from_hex(hex_str: &str) -> Result<Self, SecretError> {
        let bytes = hex::decode(hex_str.trim()).map_err(|_| SecretError::NotHex)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_env() -> Result<Self, SecretError> {
        let raw = std::env::var(SECRET_ENV).map_err(|_| SecretError::Missing)?;
        Self::from_hex(&raw)
    }

    fn mac(&self) -> HmacSha256 {
        HmacSha256::new_from_slice(&self.0).expect("HMAC accepts keys of any length")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ticket {
    pub principal: String,
    pub roles: BTreeSet<String>,
    pub issued_at: u64,
    pub expires_at: u64,
    pub signature: [u8; 32],
}

/// Identity carried by a validated ticket.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Identity {
    pub principal: String,
    pub roles: BTreeSet<String>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TicketError {
    #[error("invalid principal `{0}`")]
    InvalidPrincipal(String),
    #[error("invalid role `{0}`")]
    InvalidRole(String),
    #[error("ticket lifetime must be positive")]
    InvalidTtl,
    #[error("ticket expired at {expires_at} (now {now})")]
    Expired { expires_at: u64, now: u64 },
    #[error("ticket not valid before {issued_at} (now {now})")]
    NotYetValid { issued_at: u64, now: u64 },
    #[error("ticket signature does not verify")]
    BadSignature,
    #[error("malformed ticket: {0}")]
    Malformed(String),
}

fn check_name(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(|c| c == '|' || c == ',' || c.is_control())
}

/// Canonical, length-prefixed encoding of the signed fields.
fn signed_message(
    principal: &str,
    roles: &BTreeSet<String>,
    issued_at: u64,
    expires_at: u64,
) -> Vec<u8> {
    let mut msg = Vec::with_capacity(64);
    msg.extend_from_slice(b"lakelet-ticket-v1");
    msg.extend_from_slice(&(principal.len() as u64).to_be_bytes());
    msg.extend_from_slice(principal.as_bytes());
    msg.extend_from_slice(&(roles.len() as u64).to_be_bytes());
    for role in roles {
        msg.extend_from_slice(&(role.len() as u64).to_be_bytes());
        msg.extend_from_slice(role.as_bytes());
    }
    msg.extend_from_slice(&issued_at.to_be_bytes());
    msg.extend_from_slice(&expires_at.to_be_bytes());
    msg
}

pub fn issue_ticket<I, S>(
    principal: &str,
    roles: I,
    now: u64,
    ttl_ms: u64,
    secret: &Secret,
) -> Result<Ticket, TicketError>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    if !check_name(principal) {
        return Err(TicketError::InvalidPrincipal(principal.to_owned()));
    }
    if ttl_ms == 0 {
        return Err(TicketError::InvalidTtl);
    }
    let roles: BTreeSet<String> = roles.into_iter().map(Into::into).collect();
    if let Some(bad) = roles.iter().find(|r| !check_name(r)) {
        return Err(TicketError::InvalidRole(bad.clone()));
    }
    let expires_at = now.checked_add(ttl_ms).ok_or(TicketError::InvalidTtl)?;
    let mut mac = secret.mac();
    mac.update(&signed_message(principal, &roles, now, expires_at));
    let signature: [u8; 32] = mac.finalize().into_bytes().into();
    Ok(Ticket {
        principal: principal.to_owned(),
        roles,
        issued_at: now,
        expires_at,
        signature,
    })
}

/// Verify signature then the validity window `[issued_at, expires_at)`.
pub fn validate_ticket(
    ticket: &Ticket,
    now: u64,
    secret: &Secret,
) -> Result<Identity, TicketError> {
    let mut mac = secret.mac();
    mac.update(&signed_message(
        &ticket.principal,
        &ticket.roles,
        ticket.issued_at,
        ticket.expires_at,
    ));
    mac.verify_slice(&ticket.signature)
        .map_err(|_| TicketError::BadSignature)?;
    if now < ticket.issued_at {
        return Err(TicketError::NotYetValid {
            issued_at: ticket.issued_at,
            now,
        });
    }
    if now >= ticket.expires_at {
        return Err(TicketError::Expired {
            expires_at: ticket.expires_at,
            now,
        });
    }
    Ok(Identity {
        principal: ticket.principal.clone(),
        roles: ticket.roles.clone(),
    })
}

impl fmt::Display for Ticket {
    /// `principal|role1,role2|issued_at|expires_at|hex_signature`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let roles: Vec<&str> = self.roles.iter().map(String::as_str).collect();
        write!(
            f,
            "{}|{}|{}|{}|{}",
            self.principal,
            roles.join(","),
            self.issued_at,
            self.expires_at,
            hex::encode(self.signature)
        )
    }
}

impl FromStr for Ticket {
    type Err = TicketError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let malformed = |why: &str| TicketError::Malformed(why.to_owned());
        let parts: Vec<&str> = s.trim().split('|').collect();
        let [principal, roles, issued, expires, sig] = parts[..] else {
            return Err(malformed("expected 5 `|`-separated fields"));
        };
        let roles = roles
            .split(',')
            .filter(|r| !r.is_empty())
            .map(str::to_owned)
            .collect();
        let issued_at = issued.parse().map_err(|_| malformed("issued_at"))?;
        let expires_at = expires.parse().map_err(|_| malformed("expires_at"))?;
        let bytes = hex::decode(sig).map_err(|_| malformed("signature is not hex"))?;
        let signature: [u8; 32] = bytes
            .try_into()
            .map_err(|_| malformed("signature must be 32 bytes"))?;
        Ok(Ticket {
            principal: principal.to_owned(),
            roles,
            issued_at,
            expires_at,
            signature,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn secret() -> Secret {
        Secret::from_bytes(&[7u8; 32]).unwrap()
    }

    #[test]
    fn issue_sets_expiry_and_round_trips() {
        let t = issue_ticket("alice", ["analyst"], 0, 60_000, &secret()).unwrap();
        assert_eq!(t.expires_at, 60_000);
        let id = validate_ticket(&t, 0, &secret()).unwrap();
        assert_eq!(id.principal, "alice");
        assert_eq!(id.roles, BTreeSet::from(["analyst".to_owned()]));
    }

    #[test]
    fn zero_ttl_and_empty_principal_rejected() {
        assert_eq!(
            issue_ticket("alice", ["a"], 0, 0, &secret()),
            Err(TicketError::InvalidTtl)
        );
        assert!(matches!(
            issue_ticket("", ["a"], 0, 10, &secret()),
            Err(TicketError::InvalidPrincipal(_))
        ));
        assert!(matches!(
            issue_ticket("a|b", ["a"], 0, 10, &secret()),
            Err(TicketError::InvalidPrincipal(_))
        ));
    }

    #[test]
    fn validity_window_is_half_open() {
        let t = issue_ticket("alice", ["a"], 100, 50, &secret()).unwrap();
        assert!(validate_ticket(&t, 100, &secret()).is_ok());
        assert!(validate_ticket(&t, 149, &secret()).is_ok());
        assert!(matches!(
            validate_ticket(&t, 150, &secret()),
            Err(TicketError::Expired { .. })
        ));
        assert!(matches!(
            validate_ticket(&t, 99, &secret()),
            Err(TicketError::NotYetValid { .. })
        ));
    }

    #[test]
    fn wrong_secret_fails() {
        let t = issue_ticket("alice", ["a"], 0, 50, &secret()).unwrap();
        let other = Secret::from_bytes(&[8u8; 32]).unwrap();
        assert_eq!(
            validate_ticket(&t, 1, &other),
            Err(TicketError::BadSignature)
        );
    }

    #[test]
    fn wire_format() {
        let t = issue_ticket("alice", ["nurse", "analyst"], 5, 10, &secret()).unwrap();
        let line = t.to_string();
        let fields: Vec<_> = line.split('|').collect();
        assert_eq!(&fields[..4], ["alice", "analyst,nurse", "5", "15"]);
        assert_eq!(fields[4].len(), 64);
        assert_eq!(line.parse::<Ticket>().unwrap(), t);
        assert!("a|b|c".parse::<Ticket>().is_err());
    }

    #[test]
    fn secret_parsing() {
        assert_eq!(Secret::from_hex("zz"), Err(SecretError::NotHex));
        assert_eq!(Secret::from_hex("00ff"), Err(SecretError::TooShort(2)));
        assert!(Secret::from_hex(&"ab".repeat(32)).is_ok());
    }

    proptest! {
        #[test]
        fn flipping_any_role_bit_breaks_signature(byte in 0usize..7, bit in 0u8..7) {
            let t = issue_ticket("alice", ["analyst"], 0, 1000, &secret()).unwrap();
            let mut role = t.roles.iter().next().unwrap().clone().into_bytes();
            role[byte] ^= 1 << bit;
            let mut forged = t.clone();
            forged.roles = BTreeSet::from([String::from_utf8_lossy(&role).into_owned()]);
            prop_assert_eq!(validate_ticket(&forged, 1, &secret()), Err(TicketError::BadSignature));
        }
    }
}
