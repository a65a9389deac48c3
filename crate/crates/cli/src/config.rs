//! `lakelet.conf`: one `key=value` per line, `#` comments.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use lakelet_core::kv::Record;
use lakelet_core::scheduler::NodeSpec;

pub const CONFIG_FILE: &str = "lakelet.conf";
pub const DEFAULT_ROOT: &str = "lake";
pub const DEFAULT_POLICY_FILE: &str = "policies.tsv";
pub const DEFAULT_NODES: &str = "n1:8:16384,n2:8:16384";
const KEYS: [&str; 5] = ["root", "clock", "k", "nodes", "policy_file"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClockMode {
    Wall,
    /// Metered simulated time, persisted in the root between runs.
    Simulated,
}

impl FromStr for ClockMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "wall" => Ok(ClockMode::Wall),
            "simulated" => Ok(ClockMode::Simulated),
            other => Err(format!("clock must be `wall` or `simulated`, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LakeConfig {
    pub root: PathBuf,
    pub clock: ClockMode,
    pub k: usize,
    pub nodes: Vec<NodeSpec>,
    /// Relative paths resolve against `root`.
    pub policy_file: PathBuf,
}

impl Default for LakeConfig {
    fn default() -> Self {
        Self {
            root: PathBuf::from(DEFAULT_ROOT),
            clock: ClockMode::Wall,
            k: lakelet_core::analytics::DEFAULT_K,
            nodes: NodeSpec::parse_list(DEFAULT_NODES).expect("static node list"),
            policy_file: PathBuf::from(DEFAULT_POLICY_FILE),
        }
    }
}

impl LakeConfig {
    /// Apply the fields of a config document over `self`.
    pub fn apply_text(mut self, text: &str) -> Result<Self, String> {
        let doc = Record::from_document(text).map_err(|e| e.to_string())?;
        for (key, value) in doc.fields() {
            match key.as_str() {
                "root" => self.root = PathBuf::from(value),
                "clock" => self.clock = value.parse()?,
                "k" => {
                    self.k = value
                        .parse()
                        .ok()
                        .filter(|k| *k > 0)
                        .ok_or_else(|| format!("k must be a positive integer, got `{value}`"))?
                }
                "nodes" => self.nodes = NodeSpec::parse_list(value)?,
                "policy_file" => self.policy_file = PathBuf::from(value),
                other => return Err(format!("unknown config key `{other}` (expected one of {})", KEYS.join(", "))),
            }
        }
        Ok(self)
    }

    /// Defaults, then `config` (or `<root>/lakelet.conf` when present), then
    /// the explicit `root` and `clock` overrides.
    pub fn load(config: Option<&Path>, root: Option<&Path>, clock: Option<ClockMode>) -> Result<Self, String> {
        let mut cfg = LakeConfig::default();
        let path = match config {
            Some(p) => Some(p.to_path_buf()),
            None => {
                let candidate = root.unwrap_or(Path::new(DEFAULT_ROOT)).join(CONFIG_FILE);
                candidate.is_file().then_some(candidate)
            }
        };
        if let Some(path) = path {
            let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            cfg = cfg.apply_text(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        }
        if let Some(root) = root {
            cfg.root = root.to_path_buf();
        }
        if let Some(clock) = clock {
            cfg.clock = clock;
        }
        Ok(cfg)
    }

    /// Create the root if needed and check it accepts writes.
    pub fn ensure_root(&self) -> Result<(), String> {
        let fail = |e: std::io::Error| format!("root {}: {e}", self.root.display());
        std::fs::create_dir_all(&self.root).map_err(fail)?;
        let probe = self.root.join(".write-probe");
        std::fs::write(&probe, b"").map_err(fail)?;
        std::fs::remove_file(&probe).map_err(fail)
    }

    pub fn policy_path(&self) -> PathBuf {
        self.root.join(&self.policy_file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_key() {
        let cfg = LakeConfig::default()
            .apply_text("# lake\nroot=/tmp/x\nclock = simulated\nk=5\nnodes=a:2:1024\npolicy_file=p.tsv\n")
            .unwrap();
        assert_eq!(cfg.root, PathBuf::from("/tmp/x"));
        assert_eq!(cfg.clock, ClockMode::Simulated);
        assert_eq!(cfg.k, 5);
        assert_eq!(cfg.nodes, vec![NodeSpec::new("a", 2, 1024)]);
        assert_eq!(cfg.policy_path(), PathBuf::from("/tmp/x/p.tsv"));
    }

    #[test]
    fn rejects_bad_values() {
        let base = LakeConfig::default;
        assert!(base().apply_text("clock=both").is_err());
        assert!(base().apply_text("k=0").is_err());
        assert!(base().apply_text("colour=blue").is_err());
        assert!(base().apply_text("nodes=broken").is_err());
        assert!(base().apply_text("novalue").is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join(CONFIG_FILE), "clock=simulated\nk=3\n").unwrap();
        let cfg = LakeConfig::load(None, Some(dir.path()), None).unwrap();
        assert_eq!((cfg.clock, cfg.k), (ClockMode::Simulated, 3));
        let cfg = LakeConfig::load(None, Some(dir.path()), Some(ClockMode::Wall)).unwrap();
        assert_eq!(cfg.clock, ClockMode::Wall);
        cfg.ensure_root().unwrap();
        assert!(LakeConfig::load(Some(&dir.path().join("absent.conf")), None, None).is_err());
    }
}
