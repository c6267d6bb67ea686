//! Frame ingestion and interval aggregates.
//!
//! Frames are loaded per domain in hour order, so each domain always holds a
//! contiguous prefix `1..=n`. Aggregates are updated as each hour arrives;
//! sums run in ascending hour then row-major order, which makes incremental
//! and batch results identical.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::griddef::DomainSpec;
use crate::provenance::RunId;
use crate::scalar::Grid;
use crate::stats::summarize;
use crate::toymodel::frame::parse_frame_file_name;
use crate::toymodel::{Field, FieldFrame, FrameError};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("run {0} is not tracked")]
    UnknownRun(RunId),
    #[error("run has no domain {0}")]
    UnknownDomain(u32),
    #[error("nothing ingested yet")]
    NothingIngested,
    #[error("hours {t0}..={t1} not ingested (have {have})")]
    RangeNotIngested { t0: u32, t1: u32, have: u32 },
    #[error("invalid hour range {t0}..={t1}")]
    InvalidRange { t0: u32, t1: u32 },
    #[error("grid point ({i}, {j}) outside the domain")]
    PointOutOfRange { i: usize, j: usize },
    #[error("ingest io: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntervalKind {
    H1,
    H3,
    H24,
    Full,
}

impl IntervalKind {
    pub const ALL: [IntervalKind; 4] = [IntervalKind::H1, IntervalKind::H3, IntervalKind::H24, IntervalKind::Full];

    pub fn width(self, horizon: u32) -> u32 {
        match self {
            IntervalKind::H1 => 1,
            IntervalKind::H3 => 3,
            IntervalKind::H24 => 24,
            IntervalKind::Full => horizon.max(1),
        }
    }

    pub fn count(self, horizon: u32) -> u32 {
        horizon.div_ceil(self.width(horizon))
    }

    /// Hours `(t0, t1)`, inclusive, covered by interval `index`.
    pub fn hours(self, horizon: u32, index: u32) -> (u32, u32) {
        let w = self.width(horizon);
        (index * w + 1, ((index + 1) * w).min(horizon))
    }

    pub fn name(self) -> &'static str {
        match self {
            IntervalKind::H1 => "h1",
            IntervalKind::H3 => "h3",
            IntervalKind::H24 => "h24",
            IntervalKind::Full => "full",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stat {
    Min,
    Max,
    Avg,
}

impl Stat {
    pub const ALL: [Stat; 3] = [Stat::Min, Stat::Max, Stat::Avg];

    pub fn parse(s: &str) -> Option<Stat> {
        match s {
            "min" => Some(Stat::Min),
            "max" => Some(Stat::Max),
            "avg" => Some(Stat::Avg),
            _ => None,
        }
    }

    /// Reduces `values` in order.
    pub fn reduce(self, values: impl IntoIterator<Item = f64>) -> f64 {
        let s = summarize(values);
        match self {
            Stat::Min => s.min,
            Stat::Max => s.max,
            Stat::Avg => s.mean,
        }
    }
}

/// Spatial selection for series and accumulations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spatial {
    Agg(Stat),
    Point { i: usize, j: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRecord {
    pub run_id: RunId,
    pub domain_id: u32,
    pub field: Field,
    pub interval_kind: IntervalKind,
    pub interval_index: u32,
    pub stat: Stat,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FrameKey {
    pub run_id: RunId,
    pub domain_id: u32,
    pub step_hour: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PollReport {
    pub ingested: Vec<FrameKey>,
    pub quarantined: Vec<PathBuf>,
}

/// Per-hour values, one per ingested hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub hours: Vec<u32>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Agg {
    min: f64,
    max: f64,
    sum: f64,
    count: usize,
}

impl Agg {
    const EMPTY: Agg = Agg {
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
        sum: 0.0,
        count: 0,
    };

    fn push(&mut self, v: f64) {
        self.min = self.min.min(v);
        self.max = self.max.max(v);
        self.sum += v;
        self.count += 1;
    }

    fn get(&self, s: Stat) -> f64 {
        match s {
            Stat::Min => self.min,
            Stat::Max => self.max,
            Stat::Avg => self.sum / self.count as f64,
        }
    }
}

struct OpenAccumulation {
    index: u32,
    acc: Vec<f64>,
}

struct DomainData {
    spec: DomainSpec,
    frames: Vec<Arc<FieldFrame>>,
    /// `aggs[field][kind][interval]`.
    aggs: Vec<[Vec<Agg>; 4]>,
    open_precip: [Option<OpenAccumulation>; 4],
}

impl DomainData {
    fn new(spec: DomainSpec) -> Self {
        Self {
            spec,
            frames: Vec::new(),
            aggs: Field::ALL.iter().map(|_| Default::default()).collect(),
            open_precip: Default::default(),
        }
    }

    fn push(&mut self, frame: Arc<FieldFrame>, horizon: u32) {
        let t = frame.step_hour;
        for (k, kind) in IntervalKind::ALL.into_iter().enumerate() {
            let idx = (t - 1) / kind.width(horizon);
            for f in Field::ALL {
                let slot = &mut self.aggs[f.index()][k];
                if slot.len() <= idx as usize {
                    slot.resize(idx as usize + 1, Agg::EMPTY);
                }
                let values = &frame.grid(f).data;
                if f == Field::Precip && kind != IntervalKind::H1 {
                    let mut open = self.open_precip[k]
                        .take()
                        .filter(|o| o.index == idx)
                        .unwrap_or_else(|| OpenAccumulation {
                            index: idx,
                            acc: vec![0.0; values.len()],
                        });
                    for (a, v) in open.acc.iter_mut().zip(values) {
                        *a += *v as f64;
                    }
                    let mut agg = Agg::EMPTY;
                    open.acc.iter().for_each(|v| agg.push(*v));
                    slot[idx as usize] = agg;
                    self.open_precip[k] = Some(open);
                } else {
                    let agg = &mut slot[idx as usize];
                    values.iter().for_each(|v| agg.push(*v as f64));
                }
            }
        }
        self.frames.push(frame);
    }

    fn hours(&self) -> u32 {
        self.frames.len() as u32
    }
}

struct RunData {
    horizon: u32,
    domains: BTreeMap<u32, DomainData>,
    quarantined: BTreeSet<(u32, u32)>,
}

/// Immutable view of one domain's ingested prefix.
#[derive(Clone)]
pub struct DomainSnapshot {
    pub run_id: RunId,
    pub spec: DomainSpec,
    pub horizon: u32,
    /// `frames[t - 1]` is hour `t`.
    pub frames: Vec<Arc<FieldFrame>>,
}

impl DomainSnapshot {
    pub fn hours(&self) -> u32 {
        self.frames.len() as u32
    }

    pub fn is_complete(&self) -> bool {
        self.hours() == self.horizon
    }

    pub fn field(&self, field: Field, hour: u32) -> Result<Grid<f64>, IngestError> {
        self.check_range(hour, hour)?;
        Ok(self.frames[hour as usize - 1].grid(field).map(|v| v as f64))
    }

    pub fn check_range(&self, t0: u32, t1: u32) -> Result<(), IngestError> {
        if t0 < 1 || t0 > t1 || t1 > self.horizon {
            return Err(IngestError::InvalidRange { t0, t1 });
        }
        if t1 > self.hours() {
            return Err(IngestError::RangeNotIngested {
                t0,
                t1,
                have: self.hours(),
            });
        }
        Ok(())
    }

    /// Per-point precipitation summed over hours `t0..=t1` in ascending order.
    pub fn precip_accumulation(&self, t0: u32, t1: u32) -> Result<Grid<f64>, IngestError> {
        self.check_range(t0, t1)?;
        let mut acc = Grid::filled(self.spec.nx, self.spec.ny, 0.0);
        for t in t0..=t1 {
            let g = self.frames[t as usize - 1].grid(Field::Precip);
            for (a, v) in acc.data.iter_mut().zip(&g.data) {
                *a += *v as f64;
            }
        }
        Ok(acc)
    }

    pub fn check_point(&self, i: usize, j: usize) -> Result<(), IngestError> {
        if i >= self.spec.nx || j >= self.spec.ny {
            return Err(IngestError::PointOutOfRange { i, j });
        }
        Ok(())
    }

    /// Applies a spatial selection to a grid.
    pub fn reduce(&self, g: &Grid<f64>, spatial: Spatial) -> Result<f64, IngestError> {
        match spatial {
            Spatial::Agg(s) => Ok(s.reduce(g.data.iter().copied())),
            Spatial::Point { i, j } => {
                self.check_point(i, j)?;
                Ok(g.get(i, j))
            }
        }
    }
}

/// In-memory point data and aggregates of every tracked run.
#[derive(Default)]
pub struct IngestStore {
    runs: RwLock<HashMap<RunId, Arc<RwLock<RunData>>>>,
}

impl std::fmt::Debug for IngestStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IngestStore").field("runs", &self.runs.read().len()).finish()
    }
}

impl IngestStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starts tracking a run, dropping anything ingested before.
    pub fn register(&self, run_id: RunId, domains: &[DomainSpec], horizon: u32) {
        let data = RunData {
            horizon,
            domains: domains.iter().map(|d| (d.domain_id, DomainData::new(d.clone()))).collect(),
            quarantined: BTreeSet::new(),
        };
        self.runs.write().insert(run_id, Arc::new(RwLock::new(data)));
    }

    pub fn remove(&self, run_id: RunId) {
        self.runs.write().remove(&run_id);
    }

    pub fn is_tracked(&self, run_id: RunId) -> bool {
        self.runs.read().contains_key(&run_id)
    }

    fn run(&self, run_id: RunId) -> Result<Arc<RwLock<RunData>>, IngestError> {
        self.runs.read().get(&run_id).cloned().ok_or(IngestError::UnknownRun(run_id))
    }

    /// Loads every new complete frame in `out_dir`. Partially written files
    /// are left for the next poll; corrupt ones are moved to
    /// `out_dir/quarantine` and never retried.
    pub fn poll(&self, run_id: RunId, out_dir: &Path) -> Result<PollReport, IngestError> {
        let run = self.run(run_id)?;
        let mut report = PollReport::default();
        let mut on_disk: BTreeMap<(u32, u32), PathBuf> = BTreeMap::new();
        match fs::read_dir(out_dir) {
            Ok(rd) => {
                for e in rd {
                    let e = e?;
                    if let Some(key) = e.file_name().to_str().and_then(parse_frame_file_name) {
                        on_disk.insert(key, e.path());
                    }
                }
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(report),
            Err(e) => return Err(e.into()),
        }

        let (domain_ids, horizon) = {
            let r = run.read();
            (r.domains.keys().copied().collect::<Vec<_>>(), r.horizon)
        };
        for d in domain_ids {
            loop {
                let (next, spec) = {
                    let r = run.read();
                    let dd = &r.domains[&d];
                    (dd.hours() + 1, dd.spec.clone())
                };
                if next > horizon || run.read().quarantined.contains(&(d, next)) {
                    break;
                }
                let Some(path) = on_disk.get(&(d, next)) else { break };
                let bytes = match fs::read(path) {
                    Ok(b) => b,
                    Err(e) if e.kind() == io::ErrorKind::NotFound => break,
                    Err(e) => return Err(e.into()),
                };
                let checked = FieldFrame::decode(&bytes).and_then(|f| {
                    if f.run_id != run_id || f.domain_id != d || f.step_hour != next {
                        Err(FrameError::Corrupt("header does not match file name or run".into()))
                    } else if f.nx != spec.nx || f.ny != spec.ny {
                        Err(FrameError::Corrupt("grid shape does not match the domain".into()))
                    } else {
                        Ok(f)
                    }
                });
                match checked {
                    Ok(frame) => {
                        let mut r = run.write();
                        let dd = r.domains.get_mut(&d).unwrap();
                        // Another poll got here first.
                        if dd.hours() + 1 != next {
                            continue;
                        }
                        dd.push(Arc::new(frame), horizon);
                        report.ingested.push(FrameKey {
                            run_id,
                            domain_id: d,
                            step_hour: next,
                        });
                    }
                    Err(FrameError::Incomplete { .. }) => break,
                    Err(FrameError::Corrupt(msg)) => {
                        tracing::warn!(run_id, domain = d, hour = next, "quarantining frame: {msg}");
                        let qdir = out_dir.join("quarantine");
                        fs::create_dir_all(&qdir)?;
                        let dest = qdir.join(path.file_name().unwrap());
                        fs::rename(path, &dest)?;
                        run.write().quarantined.insert((d, next));
                        report.quarantined.push(dest);
                        break;
                    }
                }
            }
        }
        Ok(report)
    }

    pub fn snapshot(&self, run_id: RunId, domain_id: u32) -> Result<DomainSnapshot, IngestError> {
        let run = self.run(run_id)?;
        let r = run.read();
        let d = r.domains.get(&domain_id).ok_or(IngestError::UnknownDomain(domain_id))?;
        Ok(DomainSnapshot {
            run_id,
            spec: d.spec.clone(),
            horizon: r.horizon,
            frames: d.frames.clone(),
        })
    }

    pub fn ingested_hours(&self, run_id: RunId, domain_id: u32) -> Result<u32, IngestError> {
        let run = self.run(run_id)?;
        let r = run.read();
        Ok(r.domains.get(&domain_id).ok_or(IngestError::UnknownDomain(domain_id))?.hours())
    }

    /// Ingested hours per domain.
    pub fn progress(&self, run_id: RunId) -> Result<BTreeMap<u32, u32>, IngestError> {
        let run = self.run(run_id)?;
        let r = run.read();
        Ok(r.domains.iter().map(|(id, d)| (*id, d.hours())).collect())
    }

    /// One value per ingested hour. Spatial aggregates come from the hourly
    /// records; point values from the stored frames.
    pub fn query_series(
        &self,
        run_id: RunId,
        domain_id: u32,
        field: Field,
        spatial: Spatial,
    ) -> Result<Series, IngestError> {
        let run = self.run(run_id)?;
        let r = run.read();
        let d = r.domains.get(&domain_id).ok_or(IngestError::UnknownDomain(domain_id))?;
        if d.frames.is_empty() {
            return Err(IngestError::NothingIngested);
        }
        let values: Vec<f64> = match spatial {
            Spatial::Agg(s) => d.aggs[field.index()][0].iter().take(d.frames.len()).map(|a| a.get(s)).collect(),
            Spatial::Point { i, j } => {
                if i >= d.spec.nx || j >= d.spec.ny {
                    return Err(IngestError::PointOutOfRange { i, j });
                }
                d.frames.iter().map(|f| f.grid(field).get(i, j) as f64).collect()
            }
        };
        Ok(Series {
            hours: (1..=values.len() as u32).collect(),
            values,
        })
    }

    /// Precipitation summed over hours `t0..=t1` at each point, then reduced.
    pub fn accumulate_precip(
        &self,
        run_id: RunId,
        domain_id: u32,
        t0: u32,
        t1: u32,
        spatial: Spatial,
    ) -> Result<f64, IngestError> {
        let snap = self.snapshot(run_id, domain_id)?;
        let acc = snap.precip_accumulation(t0, t1)?;
        snap.reduce(&acc, spatial)
    }

    /// Stored aggregate, if its interval has at least one ingested hour.
    pub fn aggregate(
        &self,
        run_id: RunId,
        domain_id: u32,
        field: Field,
        kind: IntervalKind,
        index: u32,
        stat: Stat,
    ) -> Result<Option<f64>, IngestError> {
        let run = self.run(run_id)?;
        let r = run.read();
        let d = r.domains.get(&domain_id).ok_or(IngestError::UnknownDomain(domain_id))?;
        let k = IntervalKind::ALL.iter().position(|x| *x == kind).unwrap();
        Ok(d.aggs[field.index()][k].get(index as usize).map(|a| a.get(stat)))
    }

    /// Every stored aggregate record of a domain.
    pub fn aggregates(&self, run_id: RunId, domain_id: u32) -> Result<Vec<AggregateRecord>, IngestError> {
        let run = self.run(run_id)?;
        let r = run.read();
        let d = r.domains.get(&domain_id).ok_or(IngestError::UnknownDomain(domain_id))?;
        let mut out = Vec::new();
        for field in Field::ALL {
            for (k, kind) in IntervalKind::ALL.into_iter().enumerate() {
                for (idx, a) in d.aggs[field.index()][k].iter().enumerate() {
                    for stat in Stat::ALL {
                        out.push(AggregateRecord {
                            run_id,
                            domain_id,
                            field,
                            interval_kind: kind,
                            interval_index: idx as u32,
                            stat,
                            value: a.get(stat),
                        });
                    }
                }
            }
        }
        Ok(out)
    }
}
