use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{plan_run, CacheIndex, DagPlan, RunLayout, TaskName};
use crate::artifact::{self, GEOGRID_MAGIC, ICBC_MAGIC, METGRID_MAGIC, REAL_MAGIC, UNGRIB_MAGIC};
use crate::config::RunConfig;
use crate::provenance::{RunId, Store, StoreError, TaskExecution, TaskStatus};
use crate::toymodel::stages::{self, StageData};
use crate::toymodel::{generate_icbc, run_model, DirSink, IcbcSeries, ModelError, RunControl};

/// Everything a run attempt needs besides its record.
pub struct ExecContext<'a> {
    pub store: &'a Store,
    pub data_dir: &'a Path,
    pub control: RunControl,
    /// Makes the named task fail, for exercising failure paths.
    pub fail_task: Option<TaskName>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ExecOutcome {
    Success { dag_id: u8, hours: u32 },
    Failed { task: TaskName, error: String },
    Aborted,
}

/// One line of `task.log`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskLogLine {
    pub ts: DateTime<Utc>,
    pub run_id: RunId,
    pub attempt: u32,
    pub task: TaskName,
    pub event: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

enum TaskError {
    Aborted,
    Failed(String),
}

fn failed(e: impl std::fmt::Display) -> TaskError {
    TaskError::Failed(e.to_string())
}

struct Attempt<'a> {
    ctx: &'a ExecContext<'a>,
    run_id: RunId,
    attempt: u32,
    config: RunConfig,
    layout: RunLayout,
    plan: DagPlan,
}

impl Attempt<'_> {
    fn log(&self, task: TaskName, event: &str, detail: Option<String>) {
        let line = TaskLogLine {
            ts: Utc::now(),
            run_id: self.run_id,
            attempt: self.attempt,
            task,
            event: event.to_string(),
            detail,
        };
        let path = self.layout.task_log();
        let res = std::fs::create_dir_all(self.layout.root()).and_then(|_| {
            let mut f = OpenOptions::new().create(true).append(true).open(&path)?;
            let mut s = serde_json::to_string(&line).expect("log line serializes");
            s.push('\n');
            f.write_all(s.as_bytes())
        });
        if let Err(e) = res {
            tracing::warn!(run_id = self.run_id, "task log: {e}");
        }
    }

    /// Relative path of `t`'s artifact: this run's own, or the reused one.
    fn input(&self, t: TaskName) -> Result<String, TaskError> {
        if self.plan.executes(t) {
            return Ok(self.own_artifact(t));
        }
        self.plan
            .reuse
            .get(&t)
            .map(|r| r.artifact_path.clone())
            .ok_or_else(|| failed(format!("no {t} result available")))
    }

    fn own_artifact(&self, t: TaskName) -> String {
        let l = &self.layout;
        match t {
            TaskName::WpsSetup => l.wps_namelist(),
            TaskName::Geogrid => l.geogrid(),
            TaskName::DownloadIcbc => l.icbc(self.config.icbc_source),
            TaskName::Ungrib => l.ungrib(),
            TaskName::Metgrid => l.metgrid(),
            TaskName::PrcSetup => l.prc_namelist(),
            TaskName::Real => l.real(),
            TaskName::WrfSim => format!("{}/out", l.rel_root()),
        }
    }

    fn run_task(&self, t: TaskName) -> Result<String, TaskError> {
        if self.ctx.fail_task == Some(t) {
            return Err(failed("injected failure"));
        }
        let c = &self.config;
        let out = self.own_artifact(t);
        let abs = |rel: &str| self.layout.abs(rel);
        match t {
            TaskName::WpsSetup => {
                let nl = json!({ "domains": c.domains, "start": c.start, "end": c.end });
                artifact::write_atomic(&abs(&out), &serde_json::to_vec_pretty(&nl).unwrap()).map_err(failed)?;
            }
            TaskName::Geogrid => {
                stages::geogrid(&c.domains).write(&abs(&out), GEOGRID_MAGIC).map_err(failed)?;
            }
            TaskName::DownloadIcbc => {
                generate_icbc(c.icbc_source, c.start, c.end, c.root())
                    .map_err(failed)?
                    .write(&abs(&out))
                    .map_err(failed)?;
            }
            TaskName::Ungrib => {
                let raw = IcbcSeries::read(&abs(&self.input(TaskName::DownloadIcbc)?), ICBC_MAGIC).map_err(failed)?;
                raw.ungrib().write(&abs(&out)).map_err(failed)?;
            }
            TaskName::Metgrid => {
                let geo = StageData::read(&abs(&self.input(TaskName::Geogrid)?), GEOGRID_MAGIC).map_err(failed)?;
                let ung = IcbcSeries::read(&abs(&self.input(TaskName::Ungrib)?), UNGRIB_MAGIC).map_err(failed)?;
                stages::metgrid(&geo, &ung)
                    .map_err(failed)?
                    .write(&abs(&out), METGRID_MAGIC)
                    .map_err(failed)?;
            }
            TaskName::PrcSetup => {
                let nl = json!({
                    "domains": c.domains,
                    "start": c.start,
                    "end": c.end,
                    "physics": c.physics,
                });
                artifact::write_atomic(&abs(&out), &serde_json::to_vec_pretty(&nl).unwrap()).map_err(failed)?;
            }
            TaskName::Real => {
                let met = StageData::read(&abs(&self.input(TaskName::Metgrid)?), METGRID_MAGIC).map_err(failed)?;
                stages::real(&met, &c.physics)
                    .map_err(failed)?
                    .write(&abs(&out), REAL_MAGIC)
                    .map_err(failed)?;
            }
            TaskName::WrfSim => {
                let input = StageData::read(&abs(&self.own_artifact(TaskName::Real)), REAL_MAGIC).map_err(failed)?;
                let mut sink = DirSink {
                    out_dir: self.layout.out_dir(),
                };
                std::fs::create_dir_all(&sink.out_dir).map_err(failed)?;
                match run_model(self.run_id, &input, &mut sink, &self.ctx.control) {
                    Ok(_) => {}
                    Err(ModelError::AbortRequested { .. }) => return Err(TaskError::Aborted),
                    Err(e) => return Err(failed(e)),
                }
            }
        }
        Ok(out)
    }

    fn record(&self, exec: TaskExecution) -> Result<(), StoreError> {
        self.ctx.store.record_task(exec)
    }
}

/// Runs the current attempt of a run that is already marked `running`.
///
/// Skipped cacheable tasks are recorded as reused; executed tasks are
/// recorded with their outcome. Stops at the first failure or on abort.
pub fn execute_run(ctx: &ExecContext<'_>, run_id: RunId) -> Result<ExecOutcome, StoreError> {
    let run = ctx.store.run(run_id)?;
    let index = CacheIndex::build(&ctx.store.successful_executions(), ctx.data_dir, Some(run_id));
    let plan = plan_run(&run.config, run_id, run.attempt, &index);
    ctx.store.set_dag(run_id, plan.dag_id)?;
    let a = Attempt {
        ctx,
        run_id,
        attempt: run.attempt,
        layout: RunLayout::new(ctx.data_dir, run_id),
        config: run.config,
        plan,
    };
    let hours = a.config.horizon_hours().unwrap_or(0);

    for t in TaskName::ALL {
        let signature = a.plan.signatures.get(t).to_string();
        if !a.plan.executes(t) {
            if let Some(r) = a.plan.reuse.get(&t) {
                let now = Utc::now();
                a.record(TaskExecution {
                    run_id,
                    attempt: a.attempt,
                    task: t,
                    signature,
                    status: TaskStatus::Reused,
                    started_at: now,
                    ended_at: now,
                    artifact_path: Some(r.artifact_path.clone()),
                    reused_from: Some(r.run_id),
                    error: None,
                })?;
                a.log(t, "reused", Some(format!("run {}", r.run_id)));
            }
            continue;
        }
        if ctx.control.aborted() {
            return Ok(ExecOutcome::Aborted);
        }
        a.log(t, "start", None);
        let started_at = Utc::now();
        let result = a.run_task(t);
        let mut exec = TaskExecution {
            run_id,
            attempt: a.attempt,
            task: t,
            signature,
            status: TaskStatus::Success,
            started_at,
            ended_at: Utc::now(),
            artifact_path: None,
            reused_from: None,
            error: None,
        };
        match result {
            Ok(path) => {
                exec.artifact_path = Some(path);
                a.record(exec)?;
                a.log(t, "success", None);
            }
            Err(TaskError::Aborted) => {
                exec.status = TaskStatus::Aborted;
                a.record(exec)?;
                a.log(t, "aborted", None);
                return Ok(ExecOutcome::Aborted);
            }
            Err(TaskError::Failed(error)) => {
                exec.status = TaskStatus::Failed;
                exec.error = Some(error.clone());
                a.record(exec)?;
                a.log(t, "failed", Some(error.clone()));
                return Ok(ExecOutcome::Failed { task: t, error });
            }
        }
    }
    Ok(ExecOutcome::Success {
        dag_id: a.plan.dag_id,
        hours,
    })
}
