//! Metadata store: projects, runs and their lineage, task executions, and
//! ensemble membership.
//!
//! State lives in memory behind a read/write lock and is persisted as an
//! append-only JSON-lines journal under `<data_dir>/meta/journal.jsonl`.
//! Every mutation is appended and synced before it becomes visible.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigReport, RunConfig};
use crate::toymodel::{IcbcSource, PhysicsSelection};
use crate::workflow::TaskName;

pub type ProjectId = u64;
pub type RunId = u64;
pub type EnsembleId = u64;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown project {0}")]
    UnknownProject(ProjectId),
    #[error("unknown run {0}")]
    UnknownRun(RunId),
    #[error("unknown parent run {0}")]
    UnknownParent(RunId),
    #[error("unknown ensemble {0}")]
    UnknownEnsemble(EnsembleId),
    #[error("configuration is invalid")]
    ValidationFailed(ConfigReport),
    #[error("run {run_id} cannot join ensemble: {reason}")]
    IncompatibleMember { run_id: RunId, reason: String },
    #[error("run {0} is running")]
    RunActive(RunId),
    #[error("run {run_id}: illegal transition {from:?} -> {to:?}")]
    InvalidTransition { run_id: RunId, from: RunStatus, to: RunStatus },
    #[error("store io: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt journal line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("store {0} is in use by another process")]
    Locked(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Project {
    pub project_id: ProjectId,
    pub name: String,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Configured,
    Running,
    Success,
    Failed,
    Aborted,
}

impl RunStatus {
    pub fn can_become(self, next: RunStatus) -> bool {
        use RunStatus::*;
        matches!(
            (self, next),
            (Configured, Running) | (Running, Success) | (Running, Failed) | (Running, Aborted) | (Failed, Running) | (Aborted, Running)
        )
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, RunStatus::Success | RunStatus::Failed | RunStatus::Aborted)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: RunId,
    pub project_id: ProjectId,
    pub parent_run_id: Option<RunId>,
    pub config: RunConfig,
    pub status: RunStatus,
    pub dag_id: Option<u8>,
    pub created_at: DateTime<Utc>,
    pub started_at: Option<DateTime<Utc>>,
    pub ended_at: Option<DateTime<Utc>>,
    pub attempt: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskStatus {
    Success,
    Failed,
    Reused,
    Aborted,
}

/// One task instance of one run attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskExecution {
    pub run_id: RunId,
    pub attempt: u32,
    pub task: TaskName,
    pub signature: String,
    pub status: TaskStatus,
    pub started_at: DateTime<Utc>,
    pub ended_at: DateTime<Utc>,
    pub artifact_path: Option<String>,
    pub reused_from: Option<RunId>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub ensemble_id: EnsembleId,
    pub project_id: ProjectId,
    pub name: String,
    /// Insertion-ordered, without duplicates.
    pub members: Vec<RunId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineageNode {
    pub run_id: RunId,
    pub parent_run_id: Option<RunId>,
    pub name: String,
    pub status: RunStatus,
    pub user: Option<String>,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub icbc_source: IcbcSource,
    pub physics: PhysicsSelection,
    pub dag_id: Option<u8>,
    pub attempt: u32,
    pub ensembles: Vec<EnsembleId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineageGraph {
    pub project_id: ProjectId,
    pub nodes: Vec<LineageNode>,
    /// `(parent, child)` pairs.
    pub edges: Vec<(RunId, RunId)>,
}

/// Archival dump of one project.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectBundle {
    pub project: Project,
    pub runs: Vec<RunRecord>,
    pub tasks: Vec<TaskExecution>,
    pub ensembles: Vec<EnsembleSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum Entry {
    Project(Project),
    Run(RunRecord),
    Task(TaskExecution),
    Ensemble(EnsembleSpec),
    DeleteRun { run_id: RunId },
}

#[derive(Debug, Default)]
struct State {
    projects: BTreeMap<ProjectId, Project>,
    runs: BTreeMap<RunId, RunRecord>,
    tasks: Vec<TaskExecution>,
    ensembles: BTreeMap<EnsembleId, EnsembleSpec>,
}

impl State {
    fn apply(&mut self, e: Entry) {
        match e {
            Entry::Project(p) => {
                self.projects.insert(p.project_id, p);
            }
            Entry::Run(r) => {
                self.runs.insert(r.run_id, r);
            }
            Entry::Task(t) => self.tasks.push(t),
            Entry::Ensemble(en) => {
                self.ensembles.insert(en.ensemble_id, en);
            }
            Entry::DeleteRun { run_id } => {
                let Some(gone) = self.runs.remove(&run_id) else {
                    return;
                };
                for r in self.runs.values_mut() {
                    if r.parent_run_id == Some(run_id) {
                        r.parent_run_id = gone.parent_run_id;
                    }
                }
                self.tasks.retain(|t| t.run_id != run_id);
                for t in &mut self.tasks {
                    if t.reused_from == Some(run_id) {
                        t.reused_from = None;
                        t.artifact_path = None;
                    }
                }
                for en in self.ensembles.values_mut() {
                    en.members.retain(|m| *m != run_id);
                }
            }
        }
    }

    fn run(&self, id: RunId) -> Result<&RunRecord, StoreError> {
        self.runs.get(&id).ok_or(StoreError::UnknownRun(id))
    }

    fn ensemble(&self, id: EnsembleId) -> Result<&EnsembleSpec, StoreError> {
        self.ensembles.get(&id).ok_or(StoreError::UnknownEnsemble(id))
    }

    fn next_project_id(&self) -> ProjectId {
        self.projects.keys().next_back().map_or(1, |k| k + 1)
    }

    fn next_run_id(&self, floor: RunId) -> RunId {
        self.runs.keys().next_back().map_or(1, |k| k + 1).max(floor)
    }

    fn next_ensemble_id(&self) -> EnsembleId {
        self.ensembles.keys().next_back().map_or(1, |k| k + 1)
    }
}

/// The embedded metadata store.
pub struct Store {
    dir: PathBuf,
    state: RwLock<State>,
    journal: Mutex<File>,
    // Run ids are never reused, even after deletion.
    run_id_floor: Mutex<RunId>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("dir", &self.dir).finish()
    }
}

impl Store {
    /// Opens (or creates) the store in `meta_dir`, replaying the journal.
    /// Runs left `running` by an unclean shutdown are marked `aborted`.
    /// The journal stays exclusively locked while the store is open.
    pub fn open(meta_dir: &Path) -> Result<Self, StoreError> {
        fs::create_dir_all(meta_dir)?;
        let path = meta_dir.join("journal.jsonl");
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        match file.try_lock() {
            Ok(()) => {}
            Err(fs::TryLockError::WouldBlock) => return Err(StoreError::Locked(meta_dir.display().to_string())),
            Err(fs::TryLockError::Error(e)) => return Err(e.into()),
        }
        let mut state = State::default();
        let mut max_run = 0;
        let mut valid_len = 0u64;
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            let mut lines = reader.split(b'\n').peekable();
            let mut n = 0usize;
            while let Some(line) = lines.next() {
                let line = line?;
                n += 1;
                let is_last = lines.peek().is_none();
                match serde_json::from_slice::<Entry>(&line) {
                    Ok(e) => {
                        if let Entry::Run(r) = &e {
                            max_run = max_run.max(r.run_id);
                        }
                        state.apply(e);
                        valid_len += line.len() as u64 + 1;
                    }
                    // A torn final write is dropped.
                    Err(_) if is_last => break,
                    Err(e) => {
                        return Err(StoreError::Corrupt {
                            line: n,
                            message: e.to_string(),
                        })
                    }
                }
            }
        }
        if file.metadata()?.len() > valid_len {
            file.set_len(valid_len)?;
        }
        let store = Self {
            dir: meta_dir.to_path_buf(),
            state: RwLock::new(state),
            journal: Mutex::new(file),
            run_id_floor: Mutex::new(max_run + 1),
        };
        store.recover_interrupted()?;
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn recover_interrupted(&self) -> Result<(), StoreError> {
        let stale: Vec<RunId> = self
            .state
            .read()
            .runs
            .values()
            .filter(|r| r.status == RunStatus::Running)
            .map(|r| r.run_id)
            .collect();
        for id in stale {
            self.set_status(id, RunStatus::Aborted)?;
        }
        Ok(())
    }

    fn commit(&self, state: &mut State, entries: Vec<Entry>) -> Result<(), StoreError> {
        let mut journal = self.journal.lock();
        let mut buf = Vec::new();
        for e in &entries {
            serde_json::to_writer(&mut buf, e).expect("entry serializes");
            buf.push(b'\n');
        }
        journal.write_all(&buf)?;
        journal.sync_data()?;
        for e in entries {
            state.apply(e);
        }
        Ok(())
    }

    pub fn create_project(&self, name: &str) -> Result<Project, StoreError> {
        let mut st = self.state.write();
        let p = Project {
            project_id: st.next_project_id(),
            name: name.to_string(),
            created_at: Utc::now(),
        };
        self.commit(&mut st, vec![Entry::Project(p.clone())])?;
        Ok(p)
    }

    pub fn project(&self, id: ProjectId) -> Result<Project, StoreError> {
        self.state.read().projects.get(&id).cloned().ok_or(StoreError::UnknownProject(id))
    }

    pub fn projects(&self) -> Vec<Project> {
        self.state.read().projects.values().cloned().collect()
    }

    /// Persists a new run in `configured` state after validating its config.
    pub fn create_run(
        &self,
        project_id: ProjectId,
        config: RunConfig,
        parent_run_id: Option<RunId>,
    ) -> Result<RunRecord, StoreError> {
        let report = config.validate();
        if !report.is_ok() {
            return Err(StoreError::ValidationFailed(report));
        }
        let mut st = self.state.write();
        if !st.projects.contains_key(&project_id) {
            return Err(StoreError::UnknownProject(project_id));
        }
        if let Some(p) = parent_run_id {
            match st.runs.get(&p) {
                Some(parent) if parent.project_id == project_id => {}
                _ => return Err(StoreError::UnknownParent(p)),
            }
        }
        let mut floor = self.run_id_floor.lock();
        let run = RunRecord {
            run_id: st.next_run_id(*floor),
            project_id,
            parent_run_id,
            config,
            status: RunStatus::Configured,
            dag_id: None,
            created_at: Utc::now(),
            started_at: None,
            ended_at: None,
            attempt: 1,
        };
        *floor = run.run_id + 1;
        self.commit(&mut st, vec![Entry::Run(run.clone())])?;
        Ok(run)
    }

    pub fn run(&self, id: RunId) -> Result<RunRecord, StoreError> {
        self.state.read().run(id).cloned()
    }

    pub fn runs_in_project(&self, project_id: ProjectId) -> Vec<RunRecord> {
        self.state
            .read()
            .runs
            .values()
            .filter(|r| r.project_id == project_id)
            .cloned()
            .collect()
    }

    pub fn all_runs(&self) -> Vec<RunRecord> {
        self.state.read().runs.values().cloned().collect()
    }

    /// Applies a status transition, rejecting moves outside the automaton.
    /// Entering `running` from `failed`/`aborted` starts a new attempt.
    pub fn set_status(&self, run_id: RunId, to: RunStatus) -> Result<RunRecord, StoreError> {
        let mut st = self.state.write();
        let mut r = st.run(run_id)?.clone();
        if !r.status.can_become(to) {
            return Err(StoreError::InvalidTransition {
                run_id,
                from: r.status,
                to,
            });
        }
        let now = Utc::now();
        if to == RunStatus::Running {
            if r.status != RunStatus::Configured {
                r.attempt += 1;
            }
            r.started_at = Some(now);
            r.ended_at = None;
        } else {
            r.ended_at = Some(now);
        }
        r.status = to;
        self.commit(&mut st, vec![Entry::Run(r.clone())])?;
        Ok(r)
    }

    pub fn set_dag(&self, run_id: RunId, dag_id: u8) -> Result<(), StoreError> {
        let mut st = self.state.write();
        let mut r = st.run(run_id)?.clone();
        r.dag_id = Some(dag_id);
        self.commit(&mut st, vec![Entry::Run(r)])
    }

    /// Appends one task execution row.
    pub fn record_task(&self, exec: TaskExecution) -> Result<(), StoreError> {
        let mut st = self.state.write();
        st.run(exec.run_id)?;
        self.commit(&mut st, vec![Entry::Task(exec)])
    }

    pub fn tasks_for(&self, run_id: RunId) -> Vec<TaskExecution> {
        self.state
            .read()
            .tasks
            .iter()
            .filter(|t| t.run_id == run_id)
            .cloned()
            .collect()
    }

    /// Executed (not reused) successful task rows across all projects.
    pub fn successful_executions(&self) -> Vec<TaskExecution> {
        self.state
            .read()
            .tasks
            .iter()
            .filter(|t| t.status == TaskStatus::Success)
            .cloned()
            .collect()
    }

    pub fn lineage_graph(&self, project_id: ProjectId) -> Result<LineageGraph, StoreError> {
        let st = self.state.read();
        if !st.projects.contains_key(&project_id) {
            return Err(StoreError::UnknownProject(project_id));
        }
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        for r in st.runs.values().filter(|r| r.project_id == project_id) {
            if let Some(p) = r.parent_run_id {
                edges.push((p, r.run_id));
            }
            nodes.push(LineageNode {
                run_id: r.run_id,
                parent_run_id: r.parent_run_id,
                name: r.config.name.clone(),
                status: r.status,
                user: r.config.user.clone(),
                start: r.config.start,
                end: r.config.end,
                icbc_source: r.config.icbc_source,
                physics: r.config.physics,
                dag_id: r.dag_id,
                attempt: r.attempt,
                ensembles: st
                    .ensembles
                    .values()
                    .filter(|e| e.members.contains(&r.run_id))
                    .map(|e| e.ensemble_id)
                    .collect(),
            });
        }
        Ok(LineageGraph {
            project_id,
            nodes,
            edges,
        })
    }

    pub fn create_ensemble(&self, project_id: ProjectId, name: &str) -> Result<EnsembleSpec, StoreError> {
        let mut st = self.state.write();
        if !st.projects.contains_key(&project_id) {
            return Err(StoreError::UnknownProject(project_id));
        }
        let e = EnsembleSpec {
            ensemble_id: st.next_ensemble_id(),
            project_id,
            name: name.to_string(),
            members: Vec::new(),
        };
        self.commit(&mut st, vec![Entry::Ensemble(e.clone())])?;
        Ok(e)
    }

    pub fn ensemble(&self, id: EnsembleId) -> Result<EnsembleSpec, StoreError> {
        self.state.read().ensemble(id).cloned()
    }

    pub fn ensembles_in_project(&self, project_id: ProjectId) -> Vec<EnsembleSpec> {
        self.state
            .read()
            .ensembles
            .values()
            .filter(|e| e.project_id == project_id)
            .cloned()
            .collect()
    }

    /// Idempotently adds or removes `run_id`. Members must be successful or
    /// running runs of the ensemble's project sharing the root grid and the
    /// simulated period of the current members.
    pub fn set_ensemble_membership(
        &self,
        ensemble_id: EnsembleId,
        run_id: RunId,
        member: bool,
    ) -> Result<EnsembleSpec, StoreError> {
        let mut st = self.state.write();
        let mut e = st.ensemble(ensemble_id)?.clone();
        let run = st.run(run_id)?;
        let present = e.members.contains(&run_id);
        if member == present {
            return Ok(e);
        }
        if member {
            let reject = |reason: &str| StoreError::IncompatibleMember {
                run_id,
                reason: reason.to_string(),
            };
            if run.project_id != e.project_id {
                return Err(reject("run belongs to another project"));
            }
            if !matches!(run.status, RunStatus::Success | RunStatus::Running) {
                return Err(reject("only successful or running runs can join"));
            }
            if let Some(first) = e.members.first() {
                let other = &st.run(*first)?.config;
                if other.domains[0] != run.config.domains[0] {
                    return Err(reject("root domain differs from the ensemble's"));
                }
                if other.start != run.config.start || other.end != run.config.end {
                    return Err(reject("simulated period differs from the ensemble's"));
                }
            }
            e.members.push(run_id);
        } else {
            e.members.retain(|m| *m != run_id);
        }
        self.commit(&mut st, vec![Entry::Ensemble(e.clone())])?;
        Ok(e)
    }

    /// Removes a run with its task rows and memberships. Children are
    /// re-parented to the deleted run's parent. Returns the ensembles that
    /// lost a member.
    pub fn delete_run(&self, run_id: RunId) -> Result<Vec<EnsembleId>, StoreError> {
        let mut st = self.state.write();
        let r = st.run(run_id)?;
        if r.status == RunStatus::Running {
            return Err(StoreError::RunActive(run_id));
        }
        let touched = st
            .ensembles
            .values()
            .filter(|e| e.members.contains(&run_id))
            .map(|e| e.ensemble_id)
            .collect();
        self.commit(&mut st, vec![Entry::DeleteRun { run_id }])?;
        Ok(touched)
    }

    pub fn export_project(&self, project_id: ProjectId) -> Result<ProjectBundle, StoreError> {
        let st = self.state.read();
        let project = st
            .projects
            .get(&project_id)
            .cloned()
            .ok_or(StoreError::UnknownProject(project_id))?;
        let runs: Vec<RunRecord> = st.runs.values().filter(|r| r.project_id == project_id).cloned().collect();
        let ids: BTreeSet<RunId> = runs.iter().map(|r| r.run_id).collect();
        Ok(ProjectBundle {
            project,
            runs,
            tasks: st.tasks.iter().filter(|t| ids.contains(&t.run_id)).cloned().collect(),
            ensembles: st
                .ensembles
                .values()
                .filter(|e| e.project_id == project_id)
                .cloned()
                .collect(),
        })
    }
}
