use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use lakelet_core::analytics::{
    certify, fit_outcome_models, holdout_split, kmeans, recommend, Encoder, FeatureMatrix, OutcomeModel,
    SavedModel, SvmParams, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use lakelet_core::catalog::{
    AuditEvent, AuditFilter, AuditLog, BusinessMeta, Catalog, CatalogEntry, LineageEdge, Outcome, SearchQuery,
    AUDIT_LOG,
};
use lakelet_core::clock::WorkModel;
use lakelet_core::experiment::{
    feature_table, gen_corpus, load_uci_csv, outcome_labels, read_lake_table, rq1_report_tsv, rq2_report_tsv,
    run_rq1, run_rq2, write_rq1, write_rq2, BenchEnv, Composition, Corpus, CorpusSpec, LakeView,
};
use lakelet_core::ingest::{ingest_bulk, ingest_events, BulkOptions, IngestError, IngestReport, StreamListener, StreamOptions};
use lakelet_core::lake::{entity_resource, Lake};
use lakelet_core::scheduler::{
    job_resource, JobKind, JobLog, JobPayload, JobSpec, ResourceManager, Resources, RunError, JOBS_LOG,
};
use lakelet_core::security::{issue_ticket, validate_ticket, Action, Policy, Ticket};
use lakelet_core::store::EntityId;

use crate::config::LakeConfig;
use crate::session::Session;
use crate::{
    AnalyticsCmd, BenchCmd, CatalogCmd, Cli, CliError, Command, CorpusArgs, IngestCmd, JobCmd, MetaArgs, PolicyCmd,
    Table, TicketCmd,
};

/// Resource guarding policy changes.
pub const POLICY_RESOURCE: &str = "policies";

const DEFAULT_RQ1_N: usize = 10_000;
const DEFAULT_RQ2_N: usize = 2_000;

type Res = Result<(), CliError>;

pub fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Res {
    let cfg = LakeConfig::load(cli.config.as_deref(), cli.root.as_deref(), cli.clock).map_err(CliError::Failed)?;
    let s = Session::start(cfg, cli.format, cli.ticket)?;
    let result = match cli.command {
        Command::Ingest(cmd) => ingest(&s, cmd, out, err),
        Command::Catalog(cmd) => catalog(&s, cmd, out),
        Command::Ticket(cmd) => ticket(&s, cmd, out),
        Command::Policy(cmd) => policy(&s, cmd, out),
        Command::Job(cmd) => job(&s, cmd, out),
        Command::Analytics(cmd) => analytics(&s, cmd, out),
        Command::Bench(cmd) => bench(&s, cmd, out),
    };
    let saved = s.finish();
    result.and(saved)
}

fn emit(s: &Session, out: &mut dyn Write, table: &Table) -> Res {
    out.write_all(table.render(s.format).as_bytes())?;
    out.flush()?;
    Ok(())
}

fn parse_arg<T: std::str::FromStr>(flag: &str, raw: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    raw.parse()
        .map_err(|e| CliError::usage(format!("invalid value for {flag}: {e}")))
}

fn parse_opt<T: std::str::FromStr>(flag: &str, raw: Option<&str>) -> Result<Option<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    raw.map(|r| parse_arg(flag, r)).transpose()
}

fn business(meta: &MetaArgs) -> BusinessMeta {
    BusinessMeta::new(&meta.domain, meta.tags.iter().cloned())
}

// ---- ingest ----

fn report_table(report: &IngestReport) -> Table {
    let mut t = Table::new(&["entity", "format", "da_time", "ml_time", "it_ms"]);
    for e in &report.entries {
        t.push([e.id.to_string(), e.format.to_string(), e.da_time.to_string(), e.ml_time.to_string(), e.it_millis.to_string()]);
    }
    t
}

fn ingest(s: &Session, cmd: IngestCmd, out: &mut dyn Write, err: &mut dyn Write) -> Res {
    let ticket = s.ticket()?;
    let lake = s.lake()?;
    let report = match cmd {
        IngestCmd::Bulk {
            split,
            source,
            meta,
            paths,
        } => {
            let opts = BulkOptions {
                split_records: split,
                source_name: source,
                business: business(&meta),
            };
            match ingest_bulk(&lake, &paths, &opts, &ticket) {
                Ok(r) => r,
                Err(IngestError::IoFailure { path, source, partial }) => {
                    emit(s, out, &report_table(&partial))?;
                    return Err(CliError::failed(format!(
                        "cannot read {}: {source} ({} entities committed before it)",
                        path.display(),
                        partial.count()
                    )));
                }
                Err(e) => return Err(e.into()),
            }
        }
        IngestCmd::Events { source, meta, file } => {
            let docs = read_documents(file.as_deref())?;
            ingest_events(&lake, docs, &source, &business(&meta), &ticket)?
        }
        IngestCmd::Stream {
            listen,
            max_records,
            max_connections,
            source,
            meta,
        } => {
            let listener = StreamListener::bind(&listen)?;
            writeln!(err, "listening\t{}", listener.local_addr()?)?;
            err.flush()?;
            let opts = StreamOptions {
                max_records,
                max_connections,
                source_name: source,
                business: business(&meta),
            };
            listener.run(&lake, &opts, &ticket)?
        }
    };
    emit(s, out, &report_table(&report))
}

/// Non-blank lines of `file`, or of stdin when absent or `-`.
fn read_documents(file: Option<&Path>) -> Result<Vec<Vec<u8>>, CliError> {
    let lines: Vec<String> = match file {
        Some(p) if p != Path::new("-") => std::fs::read_to_string(p)
            .map_err(|e| CliError::failed(format!("{}: {e}", p.display())))?
            .lines()
            .map(str::to_owned)
            .collect(),
        _ => std::io::stdin().lock().lines().collect::<Result<_, _>>()?,
    };
    Ok(lines
        .into_iter()
        .filter(|l| !l.trim().is_empty())
        .map(String::into_bytes)
        .collect())
}

// ---- catalog ----

fn entry_row(e: &CatalogEntry) -> Vec<String> {
    let tags: Vec<&str> = e.business.tags.iter().map(String::as_str).collect();
    vec![
        e.entity.to_string(),
        e.technical.format.to_string(),
        e.operational.source_kind.to_string(),
        e.operational.source_name.clone(),
        e.operational.creator.clone(),
        e.operational.da_time.to_string(),
        e.operational.ml_time.to_string(),
        e.technical.size_bytes.to_string(),
        e.operational.access_history_count.to_string(),
        e.business.domain.clone(),
        tags.join(","),
    ]
}

fn catalog(s: &Session, cmd: CatalogCmd, out: &mut dyn Write) -> Res {
    match cmd {
        CatalogCmd::Search {
            class,
            source_kind,
            tags,
            creator,
            from,
            to,
        } => {
            let query = SearchQuery {
                format: parse_opt("--class", class.as_deref())?,
                source_kind: parse_opt("--source-kind", source_kind.as_deref())?,
                tags: tags.into_iter().collect(),
                creator,
                from,
                to,
            };
            let cat = Catalog::open(&s.cfg.root, s.clock.clone())?;
            let mut t = Table::new(&[
                "entity", "format", "source_kind", "source", "creator", "da_time", "ml_time", "size_bytes", "accesses",
                "domain", "tags",
            ]);
            for e in cat.search(&query) {
                t.push(entry_row(&e));
            }
            emit(s, out, &t)
        }
        CatalogCmd::Lineage { id, parents, transform } => {
            let child: EntityId = parse_arg("--id", &id)?;
            let cat = if parents.is_empty() {
                Catalog::open(&s.cfg.root, s.clock.clone())?
            } else {
                let ticket = s.ticket()?;
                let lake = s.lake()?;
                lake.guard()
                    .require(&ticket, &entity_resource(child), Action::Write, "lineage")?;
                let edge = LineageEdge {
                    child,
                    parents: parents.iter().map(|p| parse_arg("--parent", p)).collect::<Result<_, _>>()?,
                    transform: transform.unwrap_or_default(),
                };
                lake.record_lineage(&edge)?;
                drop(lake);
                Catalog::open(&s.cfg.root, s.clock.clone())?
            };
            let mut t = Table::new(&["ancestor", "transform", "depth"]);
            for a in cat.lineage_of(child)? {
                t.push([a.id.to_string(), a.transform, a.depth.to_string()]);
            }
            emit(s, out, &t)
        }
        CatalogCmd::Audit {
            principal,
            resource,
            action,
            outcome,
            from,
            to,
        } => {
            let filter = AuditFilter {
                principal,
                resource,
                action: parse_opt::<Action>("--action", action.as_deref())?,
                outcome: parse_opt::<Outcome>("--outcome", outcome.as_deref())?,
                from,
                to,
            };
            let log = AuditLog::open(s.path(AUDIT_LOG))?;
            let mut t = Table::new(&["when", "principal", "resource", "action", "outcome", "detail"]);
            for e in log.query(&filter) {
                t.push([
                    e.when.to_string(),
                    e.principal,
                    e.resource,
                    e.action.to_string(),
                    e.outcome.to_string(),
                    e.detail,
                ]);
            }
            emit(s, out, &t)
        }
    }
}

// ---- tickets and policies ----

fn ticket(s: &Session, cmd: TicketCmd, out: &mut dyn Write) -> Res {
    let secret = s.secret()?;
    let now = s.clock.now_millis();
    match cmd {
        TicketCmd::Issue { principal, roles, ttl } => {
            let t = issue_ticket(&principal, roles, now, ttl, &secret)?;
            writeln!(out, "{t}")?;
            Ok(())
        }
        TicketCmd::Validate => {
            let t = s.ticket()?;
            let id = validate_ticket(&t, now, &secret).map_err(|e| CliError::failed(format!("invalid ticket: {e}")))?;
            let roles: Vec<&str> = id.roles.iter().map(String::as_str).collect();
            let mut table = Table::new(&["principal", "roles", "issued_at", "expires_at"]);
            table.push([id.principal, roles.join(","), t.issued_at.to_string(), t.expires_at.to_string()]);
            emit(s, out, &table)
        }
    }
}

fn policy(s: &Session, cmd: PolicyCmd, out: &mut dyn Write) -> Res {
    match cmd {
        PolicyCmd::Add { role, pattern, actions } => {
            let actions = actions
                .iter()
                .map(|a| parse_arg::<Action>("--actions", a))
                .collect::<Result<Vec<_>, _>>()?;
            let policy = Policy::new(&role, &pattern, actions).map_err(|e| CliError::usage(e.to_string()))?;
            let ticket = s.ticket()?;
            let lake = s.lake()?;
            let current = s.policies()?;
            if current.is_empty() {
                // Bootstrap: any validly signed ticket may create the first policy.
                let id = validate_ticket(&ticket, s.clock.now_millis(), lake.guard().secret())
                    .map_err(|e| CliError::failed(format!("access denied: {e}")))?;
                lake.append_audit(AuditEvent {
                    when: s.clock.now_millis(),
                    principal: id.principal,
                    resource: POLICY_RESOURCE.to_owned(),
                    action: Action::Admin,
                    outcome: Outcome::Allow,
                    detail: "bootstrap policy".to_owned(),
                })?;
            } else {
                lake.guard()
                    .require(&ticket, POLICY_RESOURCE, Action::Admin, "policy add")?;
            }
            s.save_policies(&current.with(policy))?;
            policy_list(s, out)
        }
        PolicyCmd::List => policy_list(s, out),
    }
}

fn policy_list(s: &Session, out: &mut dyn Write) -> Res {
    let mut t = Table::new(&["role", "pattern", "actions"]);
    for p in s.policies()?.policies() {
        let actions: Vec<&str> = p.actions.iter().map(|a| a.as_str()).collect();
        t.push([p.role.clone(), p.pattern.to_string(), actions.join(",")]);
    }
    emit(s, out, &t)
}

// ---- jobs ----

fn job_spec(
    spec: Option<PathBuf>,
    id: Option<String>,
    kind: Option<String>,
    params: &[String],
    am: &str,
    tasks: &[String],
) -> Result<JobSpec, CliError> {
    if let Some(path) = spec {
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::failed(format!("{}: {e}", path.display())))?;
        return JobSpec::from_document(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())));
    }
    let (Some(id), Some(kind)) = (id, kind) else {
        return Err(CliError::usage("job submit needs --spec, or both --id and --kind"));
    };
    let mut payload = JobPayload::new(parse_arg::<JobKind>("--kind", &kind)?);
    for p in params {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--param expects NAME=VALUE, got `{p}`")))?;
        payload = payload.param(k.trim(), v.trim());
    }
    let tasks = tasks
        .iter()
        .map(|t| parse_arg::<Resources>("--task", t))
        .collect::<Result<_, _>>()?;
    Ok(JobSpec::new(&id, payload, parse_arg("--am", am)?, tasks))
}

fn param<T: std::str::FromStr>(params: &BTreeMap<String, String>, key: &str, default: T) -> Result<T, String> {
    params.get(key).map_or(Ok(default), |v| {
        v.parse().map_err(|_| format!("bad job parameter {key}=`{v}`"))
    })
}

/// What a job does while it holds its containers.
fn job_work(s: &Session, lake: &Lake, ticket: &Ticket, payload: &JobPayload) -> Result<String, String> {
    let p = &payload.params;
    let seed = param(p, "seed", 42u64)?;
    match payload.kind {
        JobKind::Noop => Ok("ok".to_owned()),
        JobKind::KMeans | JobKind::SvmTrain => {
            let k = param(p, "k", s.cfg.k)?;
            let view = read_lake_table(lake, ticket).map_err(|e| e.to_string())?;
            let (_, m) = encode_view(&view).map_err(|e| e.message().to_owned())?;
            let model = kmeans(&m, k, seed, DEFAULT_TOL, DEFAULT_MAX_ITER).map_err(|e| e.to_string())?;
            if payload.kind == JobKind::KMeans {
                return Ok(format!("rows={} k={k} iterations={} inertia={:.6}", m.n(), model.iterations_run, model.inertia));
            }
            let models = fit_outcome_models(&m, &outcome_labels(&view), &model, &SvmParams::new(seed))
                .map_err(|e| e.to_string())?;
            let certified = models.iter().filter(|o| o.certified).count();
            Ok(format!("rows={} k={k} certified={certified}", m.n()))
        }
        JobKind::IngestBench => {
            let n = param(p, "records", 1_000usize)?;
            let corpus = gen_corpus(&CorpusSpec::new(n, seed)).map_err(|e| e.to_string())?;
            let env = BenchEnv::standard(corpus.warehouse_schema(false));
            let r = run_rq1(&env, &corpus).map_err(|e| e.to_string())?;
            let ratio = r.ratio().map_or("NA".to_owned(), |v| format!("{v:.6}"));
            Ok(format!("records={n} ratio={ratio}"))
        }
    }
}

fn job(s: &Session, cmd: JobCmd, out: &mut dyn Write) -> Res {
    let ticket = s.ticket()?;
    let lake = s.lake()?;
    let log_path = s.path(JOBS_LOG);
    match cmd {
        JobCmd::Submit {
            spec,
            id,
            kind,
            params,
            am,
            tasks,
        } => {
            let spec = job_spec(spec, id, kind, &params, &am, &tasks)?;
            if JobLog::latest(&log_path)?.contains_key(&spec.job_id) {
                return Err(CliError::failed(format!("job `{}` already exists", spec.job_id)));
            }
            let rm = ResourceManager::new(s.cfg.nodes.clone(), lake.guard().clone()).with_log(JobLog::open(&log_path)?);
            let (job_id, payload) = (spec.job_id.clone(), spec.payload.clone());
            let mut t = Table::new(&["job_id", "kind", "outcome", "detail"]);
            match rm.run_job(spec, &ticket, |_| job_work(s, &lake, &ticket, &payload)) {
                Ok(detail) => {
                    t.push([job_id, payload.kind.to_string(), "Succeeded".to_owned(), detail]);
                    emit(s, out, &t)
                }
                Err(RunError::Job(msg)) => {
                    t.push([job_id.clone(), payload.kind.to_string(), "Failed".to_owned(), msg.clone()]);
                    emit(s, out, &t)?;
                    Err(CliError::failed(format!("job `{job_id}` failed: {msg}")))
                }
                Err(RunError::Scheduler(e)) => Err(e.into()),
            }
        }
        JobCmd::Status { id } => {
            let latest = JobLog::latest(&log_path)?;
            let mut t = Table::new(&["job_id", "state", "progress", "detail"]);
            match id {
                Some(id) => {
                    lake.guard().require(&ticket, &job_resource(&id), Action::Read, "status")?;
                    let st = latest
                        .get(&id)
                        .ok_or_else(|| CliError::failed(format!("unknown job `{id}`")))?;
                    t.push([id.clone(), st.state.to_string(), format!("{:.2}", st.progress), st.detail.clone()]);
                }
                None => {
                    for (id, st) in &latest {
                        if lake.guard().authorize(&ticket, &job_resource(id), Action::Read, "status")?.is_allow() {
                            t.push([id.clone(), st.state.to_string(), format!("{:.2}", st.progress), st.detail.clone()]);
                        }
                    }
                }
            }
            emit(s, out, &t)
        }
    }
}

// ---- analytics ----

fn encode_view(view: &LakeView) -> Result<(Encoder, FeatureMatrix), CliError> {
    let table = feature_table(view);
    let enc = Encoder::fit(&table)?;
    let m = enc.transform(&table)?;
    Ok((enc, m))
}

fn load_model(path: &Path) -> Result<SavedModel, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::failed(format!("{}: {e}", path.display())))?;
    SavedModel::from_text(&text).map_err(|e| CliError::failed(format!("{}: {e}", path.display())))
}

fn save_model(path: &Path, model: &SavedModel) -> Res {
    std::fs::write(path, model.to_text()?).map_err(|e| CliError::failed(format!("{}: {e}", path.display())))
}

/// The lake's current rows, encoded with the model's encoder and assigned
/// to the model's clusters.
fn model_view(s: &Session, model: &mut SavedModel) -> Result<(LakeView, FeatureMatrix), CliError> {
    let ticket = s.ticket()?;
    let lake = s.lake()?;
    let view = read_lake_table(&lake, &ticket)?;
    let enc = model
        .encoder
        .as_ref()
        .ok_or_else(|| CliError::failed("model carries no encoder; re-run analytics cluster"))?;
    let m = enc.transform(&feature_table(&view))?;
    model.clusters.assignments = m
        .rows
        .iter()
        .map(|r| model.clusters.nearest(r).map(|(j, _)| j))
        .collect::<Result<_, _>>()?;
    Ok((view, m))
}

fn outcome_table(model: &SavedModel) -> Table {
    let sizes = model.clusters.sizes();
    let mut t = Table::new(&["cluster", "members", "holdout_accuracy", "certified"]);
    for o in &model.outcomes {
        t.push([
            o.cluster_index.to_string(),
            sizes.get(o.cluster_index).copied().unwrap_or(0).to_string(),
            format!("{:.4}", o.holdout_accuracy),
            o.certified.to_string(),
        ]);
    }
    t
}

/// Training fell back to an uncertified zero model for this split.
fn untrainable(train: &[usize], labels: &[bool]) -> bool {
    let positives = train.iter().filter(|&&i| labels[i]).count();
    positives == 0 || positives == train.len()
}

fn analytics(s: &Session, cmd: AnalyticsCmd, out: &mut dyn Write) -> Res {
    match cmd {
        AnalyticsCmd::Cluster { model, k, seed } => {
            let ticket = s.ticket()?;
            let lake = s.lake()?;
            let view = read_lake_table(&lake, &ticket)?;
            let (enc, m) = encode_view(&view)?;
            let clusters = kmeans(&m, k.unwrap_or(s.cfg.k), seed, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
            let mut t = Table::new(&["cluster", "members"]);
            for (j, n) in clusters.sizes().into_iter().enumerate() {
                t.push([j, n]);
            }
            save_model(
                &model,
                &SavedModel {
                    clusters,
                    feature_names: m.feature_names,
                    outcomes: Vec::new(),
                    encoder: Some(enc),
                },
            )?;
            emit(s, out, &t)
        }
        AnalyticsCmd::Train {
            model: path,
            lambda,
            epochs,
            seed,
        } => {
            let mut model = load_model(&path)?;
            let (view, m) = model_view(s, &mut model)?;
            let params = SvmParams {
                lambda,
                epochs,
                seed: seed.unwrap_or(model.clusters.seed),
            };
            model.outcomes = fit_outcome_models(&m, &outcome_labels(&view), &model.clusters, &params)?;
            save_model(&path, &model)?;
            emit(s, out, &outcome_table(&model))
        }
        AnalyticsCmd::Certify { model: path, seed } => {
            let mut model = load_model(&path)?;
            if model.outcomes.is_empty() {
                return Err(CliError::failed("model has no outcome models; run analytics train first"));
            }
            let (view, m) = model_view(s, &mut model)?;
            let labels = outcome_labels(&view);
            let seed = seed.unwrap_or(model.clusters.seed);
            let members = model.clusters.members();
            let mut outcomes = Vec::with_capacity(model.outcomes.len());
            for o in std::mem::take(&mut model.outcomes) {
                let cluster_members = members.get(o.cluster_index).map_or(&[][..], Vec::as_slice);
                let (train, hold) = holdout_split(cluster_members, seed.wrapping_add(o.cluster_index as u64));
                if untrainable(&train, &labels) || hold.is_empty() {
                    outcomes.push(OutcomeModel {
                        certified: false,
                        ..o
                    });
                    continue;
                }
                let hx: Vec<Vec<f64>> = hold.iter().map(|&i| m.rows[i].clone()).collect();
                let hy: Vec<bool> = hold.iter().map(|&i| labels[i]).collect();
                outcomes.push(certify(o, &hx, &hy)?);
            }
            model.outcomes = outcomes;
            save_model(&path, &model)?;
            emit(s, out, &outcome_table(&model))
        }
        AnalyticsCmd::Recommend {
            model: path,
            encounter,
            medication,
            candidates,
        } => {
            let model = load_model(&path)?;
            let enc = model
                .encoder
                .as_ref()
                .ok_or_else(|| CliError::failed("model carries no encoder; re-run analytics cluster"))?;
            let ticket = s.ticket()?;
            let lake = s.lake()?;
            let view = read_lake_table(&lake, &ticket)?;
            let row = *view
                .row_of()
                .get(&encounter)
                .ok_or_else(|| CliError::failed(format!("encounter {encounter} is not in the lake")))?;
            let table = feature_table(&view);
            let x = enc.encode(&table.names, &table.rows[row])?;
            let candidates: Vec<&str> = candidates.iter().map(String::as_str).collect();
            let r = recommend(&x, &model.clusters, &model.outcomes, &model.feature_names, &medication, &candidates)?;
            let mut t = Table::new(&["encounter", "cluster", "medication", "recommended", "score"]);
            t.push([
                encounter.to_string(),
                r.cluster_index.to_string(),
                medication,
                r.recommended_medication,
                format!("{:.6}", r.score),
            ]);
            emit(s, out, &t)
        }
    }
}

// ---- bench ----

fn corpus(args: &CorpusArgs, default_n: usize) -> Result<Corpus, CliError> {
    match &args.data {
        Some(path) => Ok(load_uci_csv(path, args.limit)?),
        None => {
            let composition: Composition = parse_arg("--composition", &args.composition)?;
            let spec = CorpusSpec::new(args.n.unwrap_or(default_n), args.seed).composition(composition);
            Ok(gen_corpus(&spec)?)
        }
    }
}

fn bench(s: &Session, cmd: BenchCmd, out: &mut dyn Write) -> Res {
    match cmd {
        BenchCmd::Rq1 { corpus: args, transform_us } => {
            let corpus = corpus(&args, DEFAULT_RQ1_N)?;
            let model = WorkModel {
                transform_per_field_us: transform_us,
                ..WorkModel::default()
            };
            let env = BenchEnv::new(corpus.warehouse_schema(false), model, s.cfg.nodes.clone());
            let report = run_rq1(&env, &corpus)?;
            write_rq1(args.out.as_deref().unwrap_or(&s.cfg.root), &report)?;
            emit(s, out, &Table::from_tsv(&rq1_report_tsv(&report)))
        }
        BenchCmd::Rq2 {
            corpus: args,
            k,
            full_coverage,
        } => {
            let corpus = corpus(&args, DEFAULT_RQ2_N)?;
            let env = BenchEnv::new(corpus.warehouse_schema(full_coverage), WorkModel::default(), s.cfg.nodes.clone());
            run_rq1(&env, &corpus)?;
            let report = run_rq2(&env, k.unwrap_or(s.cfg.k), args.seed)?;
            write_rq2(args.out.as_deref().unwrap_or(&s.cfg.root), &report)?;
            emit(s, out, &Table::from_tsv(&rq2_report_tsv(&report)))
        }
    }
}
