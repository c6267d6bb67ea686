//! Task graph of one run: signatures, the reuse cache and DAG selection.

mod executor;
mod layout;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::artifact::{is_intact, GEOGRID_MAGIC, ICBC_MAGIC, METGRID_MAGIC, UNGRIB_MAGIC};
use crate::canonical::digest_hex;
use crate::config::RunConfig;
use crate::provenance::{RunId, TaskExecution, TaskStatus};
use crate::toymodel::icbc::RegionGeometry;

pub use executor::{execute_run, ExecContext, ExecOutcome, TaskLogLine};
pub use layout::RunLayout;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskName {
    WpsSetup,
    Geogrid,
    DownloadIcbc,
    Ungrib,
    Metgrid,
    PrcSetup,
    Real,
    WrfSim,
}

impl TaskName {
    /// Pipeline order.
    pub const ALL: [TaskName; 8] = [
        TaskName::WpsSetup,
        TaskName::Geogrid,
        TaskName::DownloadIcbc,
        TaskName::Ungrib,
        TaskName::Metgrid,
        TaskName::PrcSetup,
        TaskName::Real,
        TaskName::WrfSim,
    ];

    /// Tasks whose artifacts may be shared between runs.
    pub const CACHEABLE: [TaskName; 4] = [TaskName::Geogrid, TaskName::DownloadIcbc, TaskName::Ungrib, TaskName::Metgrid];

    pub fn name(self) -> &'static str {
        match self {
            TaskName::WpsSetup => "wps_setup",
            TaskName::Geogrid => "geogrid",
            TaskName::DownloadIcbc => "download_icbc",
            TaskName::Ungrib => "ungrib",
            TaskName::Metgrid => "metgrid",
            TaskName::PrcSetup => "prc_setup",
            TaskName::Real => "real",
            TaskName::WrfSim => "wrf_sim",
        }
    }

    pub fn is_cacheable(self) -> bool {
        Self::CACHEABLE.contains(&self)
    }

    /// Magic number of the artifact a cacheable task produces.
    pub fn artifact_magic(self) -> Option<&'static [u8; 8]> {
        match self {
            TaskName::Geogrid => Some(GEOGRID_MAGIC),
            TaskName::DownloadIcbc => Some(ICBC_MAGIC),
            TaskName::Ungrib => Some(UNGRIB_MAGIC),
            TaskName::Metgrid => Some(METGRID_MAGIC),
            _ => None,
        }
    }
}

impl fmt::Display for TaskName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Digests of every task of one run attempt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSignatures(pub BTreeMap<TaskName, String>);

impl TaskSignatures {
    pub fn get(&self, t: TaskName) -> &str {
        &self.0[&t]
    }
}

/// Computes the signature of every task.
///
/// Cacheable tasks hash exactly the inputs that determine their artifact,
/// chained through their upstream signatures. The remaining tasks include
/// the run and attempt so they never match another execution.
pub fn sign_tasks(config: &RunConfig, run_id: RunId, attempt: u32) -> TaskSignatures {
    let sign = |t: TaskName, params: serde_json::Value| digest_hex(&json!({ "task": t, "params": params }));
    let geogrid = sign(TaskName::Geogrid, json!({ "domains": config.domains }));
    let download = sign(
        TaskName::DownloadIcbc,
        json!({
            "source": config.icbc_source,
            "start": config.start,
            "end": config.end,
            "region": RegionGeometry::from(config.root()),
        }),
    );
    let ungrib = sign(TaskName::Ungrib, json!({ "download": download }));
    let metgrid = sign(TaskName::Metgrid, json!({ "geogrid": geogrid, "ungrib": ungrib }));
    let mut m = BTreeMap::new();
    for t in [TaskName::WpsSetup, TaskName::PrcSetup, TaskName::Real, TaskName::WrfSim] {
        m.insert(t, sign(t, json!({ "run_id": run_id, "attempt": attempt, "config": config })));
    }
    m.insert(TaskName::Geogrid, geogrid);
    m.insert(TaskName::DownloadIcbc, download);
    m.insert(TaskName::Ungrib, ungrib);
    m.insert(TaskName::Metgrid, metgrid);
    TaskSignatures(m)
}

/// A prior successful execution that can stand in for a task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub run_id: RunId,
    pub task: TaskName,
    pub signature: String,
    /// Relative to the data directory.
    pub artifact_path: String,
    /// Whether the artifact was present and well-formed when indexed.
    pub intact: bool,
}

/// Signature-keyed view over successful executions.
#[derive(Debug, Clone, Default)]
pub struct CacheIndex {
    entries: HashMap<String, CacheEntry>,
}

impl CacheIndex {
    /// Indexes executed (not reused) successful rows of cacheable tasks,
    /// checking each artifact under `data_dir`. Rows of `exclude_run` are
    /// skipped so a restart never reuses its own earlier attempt.
    pub fn build<'a>(
        rows: impl IntoIterator<Item = &'a TaskExecution>,
        data_dir: &Path,
        exclude_run: Option<RunId>,
    ) -> Self {
        let mut idx = Self::default();
        for r in rows {
            if r.status != TaskStatus::Success || Some(r.run_id) == exclude_run {
                continue;
            }
            let (Some(magic), Some(path)) = (r.task.artifact_magic(), r.artifact_path.as_ref()) else {
                continue;
            };
            idx.insert(CacheEntry {
                run_id: r.run_id,
                task: r.task,
                signature: r.signature.clone(),
                artifact_path: path.clone(),
                intact: is_intact(&data_dir.join(path), magic),
            });
        }
        idx
    }

    /// Adds an entry. An intact entry replaces a broken one; otherwise the
    /// most recent insertion wins.
    pub fn insert(&mut self, e: CacheEntry) {
        match self.entries.get(&e.signature) {
            Some(old) if old.intact && !e.intact => {}
            _ => {
                self.entries.insert(e.signature.clone(), e);
            }
        }
    }

    pub fn reusable(&self, signature: &str) -> Option<&CacheEntry> {
        self.entries.get(signature).filter(|e| e.intact)
    }

    pub fn any(&self, signature: &str) -> Option<&CacheEntry> {
        self.entries.get(signature)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Which cacheable tasks have an intact prior result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReuseBits {
    pub geogrid: bool,
    pub download: bool,
    pub ungrib: bool,
    pub metgrid: bool,
}

impl ReuseBits {
    /// All 16 combinations.
    pub fn all() -> impl Iterator<Item = ReuseBits> {
        (0u8..16).map(|k| ReuseBits {
            geogrid: k & 1 != 0,
            download: k & 2 != 0,
            ungrib: k & 4 != 0,
            metgrid: k & 8 != 0,
        })
    }

    pub fn get(&self, t: TaskName) -> bool {
        match t {
            TaskName::Geogrid => self.geogrid,
            TaskName::DownloadIcbc => self.download,
            TaskName::Ungrib => self.ungrib,
            TaskName::Metgrid => self.metgrid,
            _ => false,
        }
    }
}

/// Picks one of the six DAGs. Later stages win: a reusable `metgrid` makes
/// every upstream stage irrelevant.
pub fn select_dag(bits: ReuseBits) -> u8 {
    let ReuseBits {
        geogrid: g,
        download: d,
        ungrib: u,
        metgrid: m,
    } = bits;
    if m {
        6
    } else if u && g {
        5
    } else if g && d {
        4
    } else if g {
        3
    } else if d {
        2
    } else {
        1
    }
}

/// Tasks executed by a DAG, in pipeline order.
pub fn dag_tasks(dag_id: u8) -> Vec<TaskName> {
    use TaskName::*;
    let skip: &[TaskName] = match dag_id {
        1 => &[],
        2 => &[DownloadIcbc],
        3 => &[WpsSetup, Geogrid],
        4 => &[WpsSetup, Geogrid, DownloadIcbc],
        5 => &[WpsSetup, Geogrid, DownloadIcbc, Ungrib],
        6 => &[WpsSetup, Geogrid, DownloadIcbc, Ungrib, Metgrid],
        _ => panic!("no DAG {dag_id}"),
    };
    TaskName::ALL.into_iter().filter(|t| !skip.contains(t)).collect()
}

/// Where a skipped cacheable task takes its result from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reuse {
    pub run_id: RunId,
    pub artifact_path: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DagPlan {
    pub dag_id: u8,
    pub tasks: Vec<TaskName>,
    pub signatures: TaskSignatures,
    pub bits: ReuseBits,
    /// One entry per skipped cacheable task.
    pub reuse: BTreeMap<TaskName, Reuse>,
}

impl DagPlan {
    pub fn executes(&self, t: TaskName) -> bool {
        self.tasks.contains(&t)
    }
}

/// Plans one attempt of a run against the cache.
pub fn plan_run(config: &RunConfig, run_id: RunId, attempt: u32, cache: &CacheIndex) -> DagPlan {
    let signatures = sign_tasks(config, run_id, attempt);
    let hit = |t: TaskName| cache.reusable(signatures.get(t));
    let bits = ReuseBits {
        geogrid: hit(TaskName::Geogrid).is_some(),
        download: hit(TaskName::DownloadIcbc).is_some(),
        ungrib: hit(TaskName::Ungrib).is_some(),
        metgrid: hit(TaskName::Metgrid).is_some(),
    };
    let dag_id = select_dag(bits);
    let tasks = dag_tasks(dag_id);

    // Skipped stages upstream of a reused artifact need not be intact; they
    // point at the matching execution, or at the run whose downstream result
    // made them unnecessary.
    let mut reuse = BTreeMap::new();
    let mut downstream: Option<Reuse> = None;
    for t in TaskName::CACHEABLE.into_iter().rev() {
        if tasks.contains(&t) {
            continue;
        }
        let r = cache
            .reusable(signatures.get(t))
            .or_else(|| cache.any(signatures.get(t)))
            .map(|e| Reuse {
                run_id: e.run_id,
                artifact_path: e.artifact_path.clone(),
            })
            .or_else(|| downstream.clone());
        if let Some(r) = r {
            if bits.get(t) {
                downstream = Some(r.clone());
            }
            reuse.insert(t, r);
        }
    }
    DagPlan {
        dag_id,
        tasks,
        signatures,
        bits,
        reuse,
    }
}
