//! `lakelet` command-line front end.
//!
//! Exit codes: 0 on success, 1 when the command fails (including access
//! denials), 2 on a usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

mod commands;
pub mod config;
mod output;
mod session;

pub use output::{Format, Table};

use config::ClockMode;

#[derive(Debug, Parser)]
#[command(name = "lakelet", version, about = "Schema-on-read data lake for clinical records")]
struct Cli {
    /// Lake root directory [default: ./lake].
    #[arg(long, global = true, value_name = "DIR")]
    root: Option<PathBuf>,
    /// Config file [default: <root>/lakelet.conf when present].
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// `wall`, or `simulated` for metered time persisted in the root.
    #[arg(long, global = true, value_parser = parse_clock)]
    clock: Option<ClockMode>,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value = "tsv")]
    format: Format,
    /// Access ticket as printed by `ticket issue`.
    #[arg(long, global = true)]
    ticket: Option<String>,
    #[command(subcommand)]
    command: Command,
}

fn parse_clock(s: &str) -> Result<ClockMode, String> {
    s.parse()
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load data into the lake.
    #[command(subcommand)]
    Ingest(IngestCmd),
    /// Query metadata, lineage and the audit trail.
    #[command(subcommand)]
    Catalog(CatalogCmd),
    /// Issue and check access tickets. Needs LAKELET_SECRET.
    #[command(subcommand)]
    Ticket(TicketCmd),
    /// Manage access policies.
    #[command(subcommand)]
    Policy(PolicyCmd),
    /// Run jobs on the cluster scheduler.
    #[command(subcommand)]
    Job(JobCmd),
    /// Cluster patients and train outcome models over the lake.
    #[command(subcommand)]
    Analytics(AnalyticsCmd),
    /// Lake versus warehouse experiments on an in-memory environment.
    #[command(subcommand)]
    Bench(BenchCmd),
}

#[derive(Debug, Args)]
struct MetaArgs {
    /// Business tag; repeatable.
    #[arg(long = "tag", value_name = "TAG")]
    tags: Vec<String>,
    /// Business domain.
    #[arg(long, default_value = "")]
    domain: String,
}

#[derive(Debug, Subcommand)]
enum IngestCmd {
    /// Ingest files, one entity per file.
    Bulk {
        /// Store each data row of a delimited file as its own entity.
        #[arg(long)]
        split: bool,
        /// Source name [default: the file name].
        #[arg(long)]
        source: Option<String>,
        #[command(flatten)]
        meta: MetaArgs,
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Ingest event documents, one per line of FILE (stdin if absent or `-`).
    Events {
        #[arg(long)]
        source: String,
        #[command(flatten)]
        meta: MetaArgs,
        file: Option<PathBuf>,
    },
    /// Accept newline-delimited records over TCP.
    Stream {
        /// Address to bind, e.g. 127.0.0.1:0. The bound address is printed
        /// on stderr.
        #[arg(long)]
        listen: String,
        #[arg(long)]
        max_records: usize,
        /// Stop once this many connections have come and gone.
        #[arg(long)]
        max_connections: Option<usize>,
        #[arg(long, default_value = "stream")]
        source: String,
        #[command(flatten)]
        meta: MetaArgs,
    },
}

#[derive(Debug, Subcommand)]
enum CatalogCmd {
    /// List catalogued entities matching every given filter.
    Search {
        /// Structured, SemiStructured or Unstructured.
        #[arg(long)]
        class: Option<String>,
        /// Bulk, Event or Stream.
        #[arg(long)]
        source_kind: Option<String>,
        /// Required tag; repeatable.
        #[arg(long = "tag")]
        tags: Vec<String>,
        #[arg(long)]
        creator: Option<String>,
        /// Earliest metadata-load time, ms.
        #[arg(long)]
        from: Option<u64>,
        /// Latest metadata-load time, ms.
        #[arg(long)]
        to: Option<u64>,
    },
    /// Show an entity's ancestors, or record its parents with --parent.
    Lineage {
        #[arg(long)]
        id: String,
        /// Parent entity; repeatable. Recording needs a ticket.
        #[arg(long = "parent")]
        parents: Vec<String>,
        #[arg(long, requires = "parents")]
        transform: Option<String>,
    },
    /// Query the audit trail.
    Audit {
        #[arg(long)]
        principal: Option<String>,
        #[arg(long)]
        resource: Option<String>,
        #[arg(long)]
        action: Option<String>,
        /// Allow or Deny.
        #[arg(long)]
        outcome: Option<String>,
        #[arg(long)]
        from: Option<u64>,
        #[arg(long)]
        to: Option<u64>,
    },
}

#[derive(Debug, Subcommand)]
enum TicketCmd {
    /// Print a signed ticket.
    Issue {
        #[arg(long)]
        principal: String,
        /// Comma-separated roles.
        #[arg(long, value_delimiter = ',', required = true)]
        roles: Vec<String>,
        /// Lifetime in milliseconds.
        #[arg(long, default_value_t = 3_600_000)]
        ttl: u64,
    },
    /// Check the --ticket signature and validity window.
    Validate,
}

#[derive(Debug, Subcommand)]
enum PolicyCmd {
    /// Grant a role actions on a resource pattern. Needs Admin on
    /// `policies`, except for the first policy of an empty set.
    Add {
        #[arg(long)]
        role: String,
        #[arg(long)]
        pattern: String,
        /// Comma-separated: read, write, submit, admin.
        #[arg(long, value_delimiter = ',', required = true)]
        actions: Vec<String>,
    },
    List,
}

#[derive(Debug, Subcommand)]
enum JobCmd {
    /// Run a job to completion.
    Submit {
        /// Job document (`job_id=`, `kind=`, `am=`, `task=`, `param.<name>=`).
        #[arg(long, conflicts_with_all = ["id", "kind"])]
        spec: Option<PathBuf>,
        #[arg(long)]
        id: Option<String>,
        /// kmeans, svm-train, ingest-bench or noop.
        #[arg(long)]
        kind: Option<String>,
        /// Job parameter as name=value; repeatable.
        #[arg(long = "param", value_name = "NAME=VALUE")]
        params: Vec<String>,
        /// Master container, cpu:memory_mb.
        #[arg(long, default_value = "1:512")]
        am: String,
        /// Task container, cpu:memory_mb; repeatable.
        #[arg(long = "task", default_value = "2:2048")]
        tasks: Vec<String>,
    },
    /// Last recorded state of jobs the ticket may read.
    Status {
        #[arg(long)]
        id: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
enum AnalyticsCmd {
    /// Cluster every lake encounter and save the model.
    Cluster {
        #[arg(long)]
        model: PathBuf,
        /// Cluster count [default: from config].
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Train and certify one outcome model per cluster.
    Train {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = lakelet_core::analytics::DEFAULT_LAMBDA)]
        lambda: f64,
        #[arg(long, default_value_t = lakelet_core::analytics::DEFAULT_EPOCHS)]
        epochs: usize,
        /// Split and training seed [default: the clustering seed].
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-score saved outcome models on the current lake contents.
    Certify {
        #[arg(long)]
        model: PathBuf,
        /// Must match the training seed [default: the clustering seed].
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recommend a medication value for one encounter.
    Recommend {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        encounter: u64,
        #[arg(long, default_value = lakelet_core::experiment::MEDICATION)]
        medication: String,
        #[arg(long, value_delimiter = ',', default_value = "No,Steady,Up,Down")]
        candidates: Vec<String>,
    },
}

#[derive(Debug, Args)]
struct CorpusArgs {
    /// Generated corpus size.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Structured, semi-structured and unstructured shares.
    #[arg(long, default_value = "0.2,0.5,0.3")]
    composition: String,
    /// Use encounters from a CSV file instead of generating them.
    #[arg(long, value_name = "CSV")]
    data: Option<PathBuf>,
    /// Rows to read from --data.
    #[arg(long, requires = "data")]
    limit: Option<usize>,
    /// Report directory [default: the lake root].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum BenchCmd {
    /// Ingestion time of the lake against the warehouse. n defaults to 10000.
    Rq1 {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Extra warehouse transform cost per field, µs.
        #[arg(long, default_value_t = 0)]
        transform_us: u64,
    },
    /// Cluster precision of the lake against the warehouse. n defaults to 2000.
    Rq2 {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Cluster count [default: from config].
        #[arg(long)]
        k: Option<usize>,
        /// Give the warehouse schema every lake column.
        #[arg(long)]
        full_coverage: bool,
    },
}

/// Command failure. Usage errors exit 2, everything else 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failed(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn failed(msg: impl Into<String>) -> Self {
        CliError::Failed(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Failed(m) => m,
        }
    }
}

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Failed(e.to_string())
    }
}

/// Parse `args` (program name first), run the command and return its exit
/// code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match commands::dispatch(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "lakelet: {}", e.message());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exit(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("lakelet").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(exit(&[]).0, 2);
        assert_eq!(exit(&["ingest", "bulk"]).0, 2);
        assert_eq!(exit(&["catalog", "search", "--from", "soon"]).0, 2);
        assert_eq!(exit(&["--clock", "sundial", "policy", "list"]).0, 2);
    }

    #[test]
    fn help_and_version_exit_zero() {
        let (code, out, _) = exit(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("ingest"));
        assert_eq!(exit(&["--version"]).0, 0);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
