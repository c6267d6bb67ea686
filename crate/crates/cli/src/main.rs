mod export;

use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use wxflow_core::service::ErrorClass;
use wxflow_core::workflow::TaskName;
use wxflow_core::{demo, RunConfig, RunId, RunStatus, Service, ServiceConfig, ServiceError};

#[derive(Debug, Parser)]
#[command(name = "wxflow", version, about = "Nested-grid weather run service")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Serve the HTTP and WebSocket API.
    Serve(ServeArgs),
    /// Create and execute one run, blocking until it ends.
    Run(RunArgs),
    /// Write an analytics product to a file.
    Export(Box<export::ExportArgs>),
    /// Seed an empty data directory with two sample projects.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
struct DataDir {
    #[arg(long, default_value = "data")]
    data_dir: PathBuf,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[command(flatten)]
    data: DataDir,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Frame polling interval.
    #[arg(long, default_value_t = 60_000)]
    poll_ms: u64,
    /// Runs executed concurrently.
    #[arg(long, default_value_t = 2)]
    workers: usize,
    /// Default wall-clock delay per simulated hour.
    #[arg(long, default_value_t = 0)]
    pacing_ms: u64,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    data: DataDir,
    /// RunConfig JSON file.
    #[arg(long)]
    config: PathBuf,
    /// Derive the run from this run (and join its project).
    #[arg(long)]
    parent: Option<RunId>,
    /// Project to create the run in; a new project is made when neither
    /// this nor --parent is given.
    #[arg(long)]
    project: Option<u64>,
    /// Delay per simulated hour.
    #[arg(long, default_value_t = 100)]
    pacing_ms: u64,
    /// Run the model as fast as possible.
    #[arg(long)]
    no_pace: bool,
    /// Make the named task fail (fault injection).
    #[arg(long, value_parser = parse_task)]
    fail_task: Option<TaskName>,
}

#[derive(Debug, Args)]
struct DemoArgs {
    #[command(flatten)]
    data: DataDir,
    #[arg(long, default_value_t = 4)]
    workers: usize,
    #[arg(long, default_value_t = 0)]
    pacing_ms: u64,
}

fn parse_task(s: &str) -> Result<TaskName, String> {
    TaskName::ALL
        .into_iter()
        .find(|t| t.name() == s)
        .ok_or_else(|| format!("unknown task `{s}`"))
}

/// Failure reported as one JSON line on stderr.
#[derive(Debug)]
pub struct Failure {
    pub exit: u8,
    pub body: serde_json::Value,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure {
            exit: 2,
            body: json!({ "error": msg.into(), "code": "usage" }),
        }
    }

    fn execution(msg: impl Into<String>) -> Self {
        Failure {
            exit: 3,
            body: json!({ "error": msg.into(), "code": "execution_failed" }),
        }
    }
}

impl From<ServiceError> for Failure {
    fn from(e: ServiceError) -> Self {
        let exit = match e.class() {
            ErrorClass::Validation => 2,
            ErrorClass::NotFound => 4,
            ErrorClass::Conflict | ErrorClass::Internal => 1,
        };
        Failure { exit, body: e.to_json() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            exit: 1,
            body: json!({ "error": e.to_string(), "code": "io" }),
        }
    }
}

fn print_json(v: &serde_json::Value) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(v).expect("json"));
}

fn serve(a: ServeArgs) -> Result<(), Failure> {
    let _ = tracing_subscriber::fmt().with_writer(std::io::stderr).try_init();
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .map_err(|e| Failure::usage(format!("bad address: {e}")))?;
    let svc = Service::open(ServiceConfig {
        data_dir: a.data.data_dir,
        poll_interval_ms: a.poll_ms,
        worker_slots: a.workers,
        pacing_ms_default: a.pacing_ms,
    })?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(wxflow_server::run(svc, addr))?;
    Ok(())
}

fn run(a: RunArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&a.config)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", a.config.display())))?;
    let config: RunConfig =
        serde_json::from_str(&text).map_err(|e| Failure::from(ServiceError::Invalid(format!("bad config: {e}"))))?;
    let svc = Service::open(ServiceConfig {
        data_dir: a.data.data_dir,
        poll_interval_ms: 200,
        worker_slots: 1,
        pacing_ms_default: 0,
    })?;
    let out = run_in(&svc, a.parent, a.project, config, if a.no_pace { 0 } else { a.pacing_ms }, a.fail_task);
    svc.shutdown();
    out
}

fn run_in(
    svc: &Service,
    parent: Option<RunId>,
    project: Option<u64>,
    config: RunConfig,
    pacing_ms: u64,
    fail_task: Option<TaskName>,
) -> Result<(), Failure> {
    let project_id = match (project, parent) {
        (Some(p), _) => p,
        (None, Some(parent)) => svc.store().run(parent).map_err(ServiceError::from)?.project_id,
        (None, None) => {
            let name = if config.name.is_empty() { "cli" } else { &config.name };
            svc.create_project(name)?.project_id
        }
    };
    let r = svc.create_run(project_id, config, parent)?;
    if let Some(t) = fail_task {
        svc.inject_failure(r.run_id, t);
    }
    svc.start_run(r.run_id, Some(pacing_ms))?;
    let done = svc.wait_for_run(r.run_id, Duration::from_secs(24 * 3600))?;
    let detail = svc.run_detail(r.run_id)?;
    let tasks: Vec<_> = detail
        .tasks
        .iter()
        .filter(|t| t.attempt == done.attempt)
        .map(|t| {
            json!({
                "task": t.task,
                "status": t.status,
                "seconds": (t.ended_at - t.started_at).num_microseconds().unwrap_or(0) as f64 / 1e6,
                "reused_from": t.reused_from,
                "error": t.error,
            })
        })
        .collect();
    print_json(&json!({
        "run_id": done.run_id,
        "project_id": done.project_id,
        "dag_id": done.dag_id,
        "status": done.status,
        "hours": detail.progress,
        "tasks": tasks,
    }));
    match done.status {
        RunStatus::Success => Ok(()),
        s => {
            let why = detail
                .tasks
                .iter()
                .rev()
                .find_map(|t| t.error.as_ref().map(|e| format!(" at {}: {e}", t.task)))
                .unwrap_or_default();
            Err(Failure::execution(format!("run {} ended {s:?}{why}", done.run_id)))
        }
    }
}

fn demo(a: DemoArgs) -> Result<(), Failure> {
    let summary = demo::seed_dir(ServiceConfig {
        data_dir: a.data.data_dir,
        poll_interval_ms: 100,
        worker_slots: a.workers,
        pacing_ms_default: a.pacing_ms,
    })?;
    print_json(&serde_json::to_value(&summary).expect("json"));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            eprintln!("{}", Failure::usage(first).body);
            return ExitCode::from(2);
        }
    };
    let res = match cli.cmd {
        Cmd::Serve(a) => serve(a),
        Cmd::Run(a) => run(a),
        Cmd::Export(a) => export::export(*a),
        Cmd::Demo(a) => demo(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.body);
            ExitCode::from(f.exit)
        }
    }
}
