//! In-process service: metadata store, run engine, frame pollers and event
//! fan-out behind one handle shared by the HTTP server and the CLI.

mod error;
mod queries;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crossbeam_channel::{Receiver, RecvTimeoutError, Sender};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::events::{Event, EventBus, EventKind};
use crate::ingest::IngestStore;
use crate::provenance::{
    EnsembleId, EnsembleSpec, LineageGraph, Project, ProjectBundle, ProjectId, RunId, RunRecord, RunStatus, Store,
    StoreError, TaskExecution,
};
use crate::toymodel::RunControl;
use crate::workflow::{execute_run, ExecContext, ExecOutcome, RunLayout, TaskName};

pub use error::{ErrorClass, ServiceError};
pub use queries::{MapPayload, MapSource, ProjectionPayload, ProjectionPoint, SeriesPayload, SunburstPayload};

pub type Result<T> = std::result::Result<T, ServiceError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub poll_interval_ms: u64,
    pub worker_slots: usize,
    pub pacing_ms_default: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data"),
            poll_interval_ms: 60_000,
            worker_slots: 2,
            pacing_ms_default: 0,
        }
    }
}

/// Run record with its task rows and ingestion progress.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDetail {
    pub run: RunRecord,
    pub tasks: Vec<TaskExecution>,
    /// Ingested hours per domain.
    pub progress: BTreeMap<u32, u32>,
}

struct ActiveRun {
    control: RunControl,
    poller_stop: Mutex<Option<Sender<()>>>,
    poller: Mutex<Option<JoinHandle<()>>>,
}

impl ActiveRun {
    fn stop_poller(&self) {
        self.poller_stop.lock().take();
        if let Some(h) = self.poller.lock().take() {
            let _ = h.join();
        }
    }
}

struct Inner {
    cfg: ServiceConfig,
    store: Store,
    ingest: IngestStore,
    events: EventBus,
    active: Mutex<HashMap<RunId, Arc<ActiveRun>>>,
    faults: Mutex<HashMap<RunId, TaskName>>,
    queue: Mutex<Option<Sender<RunId>>>,
    workers: Mutex<Vec<JoinHandle<()>>>,
    closed: AtomicBool,
}

/// Cloneable handle to the running service.
#[derive(Clone)]
pub struct Service {
    inner: Arc<Inner>,
}

impl std::fmt::Debug for Service {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Service").field("data_dir", &self.inner.cfg.data_dir).finish()
    }
}

impl Service {
    /// Opens the data directory, recovers interrupted runs, reloads ingested
    /// frames from disk and starts the worker pool.
    pub fn open(cfg: ServiceConfig) -> Result<Self> {
        std::fs::create_dir_all(&cfg.data_dir)
            .map_err(|e| ServiceError::DataDirUnavailable(format!("{}: {e}", cfg.data_dir.display())))?;
        let probe = cfg.data_dir.join(".write_probe");
        std::fs::write(&probe, b"")
            .and_then(|_| std::fs::remove_file(&probe))
            .map_err(|e| ServiceError::DataDirUnavailable(format!("{}: {e}", cfg.data_dir.display())))?;
        let store = Store::open(&cfg.data_dir.join("meta"))?;
        let (tx, rx) = crossbeam_channel::unbounded();
        let inner = Arc::new(Inner {
            store,
            ingest: IngestStore::new(),
            events: EventBus::default(),
            active: Mutex::new(HashMap::new()),
            faults: Mutex::new(HashMap::new()),
            queue: Mutex::new(Some(tx)),
            workers: Mutex::new(Vec::new()),
            closed: AtomicBool::new(false),
            cfg,
        });
        for r in inner.store.all_runs() {
            if r.status == RunStatus::Configured {
                continue;
            }
            inner.track(&r);
            inner.ingest.poll(r.run_id, &inner.layout(r.run_id).out_dir())?;
        }
        let slots = inner.cfg.worker_slots.max(1);
        for k in 0..slots {
            let inner2 = inner.clone();
            let rx: Receiver<RunId> = rx.clone();
            let h = std::thread::Builder::new()
                .name(format!("run-worker-{k}"))
                .spawn(move || {
                    while let Ok(id) = rx.recv() {
                        inner2.execute(id);
                    }
                })
                .expect("spawn worker");
            inner.workers.lock().push(h);
        }
        Ok(Self { inner })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.cfg
    }

    pub fn data_dir(&self) -> &Path {
        &self.inner.cfg.data_dir
    }

    pub fn store(&self) -> &Store {
        &self.inner.store
    }

    pub fn ingest(&self) -> &IngestStore {
        &self.inner.ingest
    }

    pub fn events(&self) -> &EventBus {
        &self.inner.events
    }

    /// Makes `task` fail on the next attempt of `run_id`.
    pub fn inject_failure(&self, run_id: RunId, task: TaskName) {
        self.inner.faults.lock().insert(run_id, task);
    }

    pub fn create_project(&self, name: &str) -> Result<Project> {
        Ok(self.inner.store.create_project(name)?)
    }

    pub fn projects(&self) -> Vec<Project> {
        self.inner.store.projects()
    }

    pub fn lineage(&self, project_id: ProjectId) -> Result<LineageGraph> {
        Ok(self.inner.store.lineage_graph(project_id)?)
    }

    pub fn export_project(&self, project_id: ProjectId) -> Result<ProjectBundle> {
        Ok(self.inner.store.export_project(project_id)?)
    }

    pub fn create_run(&self, project_id: ProjectId, config: RunConfig, parent: Option<RunId>) -> Result<RunRecord> {
        let r = self.inner.store.create_run(project_id, config, parent)?;
        self.inner.publish_status(&r);
        Ok(r)
    }

    pub fn run_detail(&self, run_id: RunId) -> Result<RunDetail> {
        let run = self.inner.store.run(run_id)?;
        Ok(RunDetail {
            tasks: self.inner.store.tasks_for(run_id),
            progress: self.inner.ingest.progress(run_id).unwrap_or_default(),
            run,
        })
    }

    /// Queues a configured run. It is `running` from this point on.
    pub fn start_run(&self, run_id: RunId, pacing_ms: Option<u64>) -> Result<RunRecord> {
        self.inner.launch(run_id, RunStatus::Configured, pacing_ms)
    }

    /// Starts a new attempt of a failed or aborted run, discarding the
    /// previous attempt's frames.
    pub fn restart_run(&self, run_id: RunId, pacing_ms: Option<u64>) -> Result<RunRecord> {
        let r = self.inner.store.run(run_id)?;
        if !matches!(r.status, RunStatus::Failed | RunStatus::Aborted) {
            return Err(StoreError::InvalidTransition {
                run_id,
                from: r.status,
                to: RunStatus::Running,
            }
            .into());
        }
        self.inner.launch(run_id, r.status, pacing_ms)
    }

    /// Requests cooperative cancellation. The run becomes `aborted` once its
    /// current task stops.
    pub fn abort_run(&self, run_id: RunId) -> Result<RunRecord> {
        let r = self.inner.store.run(run_id)?;
        if r.status != RunStatus::Running {
            return Err(StoreError::InvalidTransition {
                run_id,
                from: r.status,
                to: RunStatus::Aborted,
            }
            .into());
        }
        if let Some(a) = self.inner.active.lock().get(&run_id) {
            a.control.abort.store(true, Ordering::SeqCst);
        }
        Ok(r)
    }

    /// Deletes a run that is not running, with its files and ingested data.
    pub fn delete_run(&self, run_id: RunId) -> Result<()> {
        let project_id = self.inner.store.run(run_id)?.project_id;
        let touched = self.inner.store.delete_run(run_id)?;
        self.inner.ingest.remove(run_id);
        let dir = self.inner.layout(run_id).root();
        if dir.exists() {
            std::fs::remove_dir_all(&dir)?;
        }
        for e in touched {
            self.inner
                .events
                .publish(Event::now(project_id, EventKind::EnsembleChanged { ensemble_id: e }));
        }
        Ok(())
    }

    /// Blocks until the run reaches a terminal status.
    pub fn wait_for_run(&self, run_id: RunId, timeout: Duration) -> Result<RunRecord> {
        let deadline = Instant::now() + timeout;
        loop {
            let r = self.inner.store.run(run_id)?;
            let settled = r.status.is_terminal() && !self.inner.active.lock().contains_key(&run_id);
            if settled || r.status == RunStatus::Configured {
                return Ok(r);
            }
            if Instant::now() >= deadline {
                return Err(ServiceError::Timeout(run_id));
            }
            std::thread::sleep(Duration::from_millis(5));
        }
    }

    pub fn create_ensemble(&self, project_id: ProjectId, name: &str) -> Result<EnsembleSpec> {
        let e = self.inner.store.create_ensemble(project_id, name)?;
        self.inner
            .events
            .publish(Event::now(project_id, EventKind::EnsembleChanged { ensemble_id: e.ensemble_id }));
        Ok(e)
    }

    pub fn ensemble(&self, id: EnsembleId) -> Result<EnsembleSpec> {
        Ok(self.inner.store.ensemble(id)?)
    }

    pub fn set_membership(&self, ensemble_id: EnsembleId, run_id: RunId, member: bool) -> Result<EnsembleSpec> {
        let before = self.inner.store.ensemble(ensemble_id)?;
        let e = self.inner.store.set_ensemble_membership(ensemble_id, run_id, member)?;
        if e.members != before.members {
            self.inner
                .events
                .publish(Event::now(e.project_id, EventKind::EnsembleChanged { ensemble_id }));
        }
        Ok(e)
    }

    /// Aborts in-flight runs, stops pollers and joins the workers. Runs still
    /// queued end up `aborted`.
    pub fn shutdown(&self) {
        if self.inner.closed.swap(true, Ordering::SeqCst) {
            return;
        }
        for a in self.inner.active.lock().values() {
            a.control.abort.store(true, Ordering::SeqCst);
        }
        self.inner.queue.lock().take();
        let workers: Vec<_> = self.inner.workers.lock().drain(..).collect();
        for h in workers {
            let _ = h.join();
        }
    }
}

impl Inner {
    fn layout(&self, run_id: RunId) -> RunLayout {
        RunLayout::new(&self.cfg.data_dir, run_id)
    }

    fn track(&self, r: &RunRecord) {
        self.ingest
            .register(r.run_id, &r.config.domains, r.config.horizon_hours().unwrap_or(0));
    }

    fn publish_status(&self, r: &RunRecord) {
        self.events.publish(Event::now(
            r.project_id,
            EventKind::RunStatus {
                run_id: r.run_id,
                status: r.status,
            },
        ));
    }

    fn launch(self: &Arc<Self>, run_id: RunId, from: RunStatus, pacing_ms: Option<u64>) -> Result<RunRecord> {
        if self.closed.load(Ordering::SeqCst) {
            return Err(ServiceError::ShuttingDown);
        }
        let current = self.store.run(run_id)?;
        if current.status != from || !from.can_become(RunStatus::Running) {
            return Err(StoreError::InvalidTransition {
                run_id,
                from: current.status,
                to: RunStatus::Running,
            }
            .into());
        }
        let out = self.layout(run_id).out_dir();
        if out.exists() {
            std::fs::remove_dir_all(&out)?;
        }
        self.track(&current);
        let r = self.store.set_status(run_id, RunStatus::Running)?;
        let active = Arc::new(ActiveRun {
            control: RunControl {
                pacing_ms: pacing_ms.unwrap_or(self.cfg.pacing_ms_default),
                abort: Arc::new(AtomicBool::new(false)),
            },
            poller_stop: Mutex::new(None),
            poller: Mutex::new(None),
        });
        let (stop_tx, stop_rx) = crossbeam_channel::bounded::<()>(0);
        let me = self.clone();
        let interval = Duration::from_millis(self.cfg.poll_interval_ms.max(1));
        let poller = std::thread::Builder::new()
            .name(format!("poll-{run_id}"))
            .spawn(move || loop {
                me.poll_once(run_id);
                match stop_rx.recv_timeout(interval) {
                    Err(RecvTimeoutError::Timeout) => continue,
                    _ => break,
                }
            })?;
        *active.poller_stop.lock() = Some(stop_tx);
        *active.poller.lock() = Some(poller);
        self.active.lock().insert(run_id, active);
        self.publish_status(&r);
        let queued = self.queue.lock().as_ref().map(|q| q.send(run_id).is_ok()).unwrap_or(false);
        if !queued {
            self.finish(run_id, RunStatus::Aborted);
            return Err(ServiceError::ShuttingDown);
        }
        Ok(r)
    }

    fn poll_once(&self, run_id: RunId) {
        let Ok(project_id) = self.store.run(run_id).map(|r| r.project_id) else {
            return;
        };
        match self.ingest.poll(run_id, &self.layout(run_id).out_dir()) {
            Ok(rep) => {
                for k in rep.ingested {
                    self.events.publish(Event::now(
                        project_id,
                        EventKind::Frame {
                            run_id,
                            domain_id: k.domain_id,
                            step_hour: k.step_hour,
                        },
                    ));
                }
            }
            Err(e) => tracing::warn!(run_id, "poll failed: {e}"),
        }
    }

    fn execute(&self, run_id: RunId) {
        let Some(active) = self.active.lock().get(&run_id).cloned() else {
            return;
        };
        let fail_task = self.faults.lock().remove(&run_id);
        let ctx = ExecContext {
            store: &self.store,
            data_dir: &self.cfg.data_dir,
            control: active.control.clone(),
            fail_task,
        };
        let status = match execute_run(&ctx, run_id) {
            Ok(ExecOutcome::Success { .. }) => RunStatus::Success,
            Ok(ExecOutcome::Failed { task, error }) => {
                tracing::warn!(run_id, %task, "task failed: {error}");
                RunStatus::Failed
            }
            Ok(ExecOutcome::Aborted) => RunStatus::Aborted,
            Err(e) => {
                tracing::error!(run_id, "run bookkeeping failed: {e}");
                RunStatus::Failed
            }
        };
        self.finish(run_id, status);
    }

    /// Stops the poller, ingests what is left on disk, then records the
    /// terminal status.
    fn finish(&self, run_id: RunId, status: RunStatus) {
        let active = self.active.lock().get(&run_id).cloned();
        if let Some(a) = &active {
            a.stop_poller();
        }
        self.poll_once(run_id);
        match self.store.set_status(run_id, status) {
            Ok(r) => self.publish_status(&r),
            Err(e) => tracing::error!(run_id, "cannot record {status:?}: {e}"),
        }
        self.active.lock().remove(&run_id);
    }
}
