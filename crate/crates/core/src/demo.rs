//! Two seeded projects for exploring the service: a three-domain 72 h case
//! with physics variants of one root run, and a two-domain 96 h case
//! pairing ICBC sources across three physics combinations.

use std::path::Path;
use std::time::Duration;

use chrono::{TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::griddef::{snap_child_domain, DomainSpec, GeoRect};
use crate::provenance::{EnsembleId, ProjectId, RunId, RunStatus};
use crate::service::{Result, Service, ServiceConfig, ServiceError};
use crate::toymodel::{Cumulus, IcbcSource, Microphysics, Pbl, PhysicsSelection};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoProject {
    pub project_id: ProjectId,
    pub name: String,
    pub runs: Vec<RunId>,
    pub ensembles: Vec<EnsembleId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoSummary {
    pub projects: Vec<DemoProject>,
}

impl DemoSummary {
    pub fn run_count(&self) -> usize {
        self.projects.iter().map(|p| p.runs.len()).sum()
    }

    pub fn ensemble_count(&self) -> usize {
        self.projects.iter().map(|p| p.ensembles.len()).sum()
    }
}

const RUN_TIMEOUT: Duration = Duration::from_secs(600);

/// Child snapped over parent cells `[i0, i1] × [j0, j1]`.
fn nest(parent: &DomainSpec, i0: f64, j0: f64, i1: f64, j1: f64) -> DomainSpec {
    let (a, b) = parent.frac_to_lonlat(i0, j0);
    let (c, d) = parent.frac_to_lonlat(i1, j1);
    let rect = GeoRect::new(a, b, c, d).expect("demo rectangle");
    snap_child_domain(parent, &rect, 3).expect("demo nest")
}

fn physics(microphysics: Microphysics, cumulus: Cumulus, pbl: Pbl) -> PhysicsSelection {
    PhysicsSelection {
        microphysics,
        cumulus,
        pbl,
        ..PhysicsSelection::default()
    }
}

fn marica_base() -> RunConfig {
    let root = DomainSpec::root(18_000.0, -43.2, -22.7, 60, 48);
    let d2 = nest(&root, 20.0, 15.0, 38.0, 30.0);
    let d3 = nest(&d2, 14.0, 12.0, 34.0, 30.0);
    let start = Utc.with_ymd_and_hms(2022, 3, 31, 0, 0, 0).unwrap();
    RunConfig {
        name: "marica-01".into(),
        user: Some("demo".into()),
        domains: vec![root, d2, d3],
        start,
        end: Utc.with_ymd_and_hms(2022, 4, 3, 0, 0, 0).unwrap(),
        icbc_source: IcbcSource::Gfs,
        physics: PhysicsSelection::default(),
    }
}

fn sao_paulo_base() -> RunConfig {
    let root = DomainSpec::root(18_000.0, -46.6, -23.6, 56, 44);
    let d2 = nest(&root, 18.0, 14.0, 36.0, 28.0);
    RunConfig {
        name: "sao-paulo-01".into(),
        user: Some("demo".into()),
        domains: vec![root, d2],
        start: Utc.with_ymd_and_hms(2018, 6, 1, 0, 0, 0).unwrap(),
        end: Utc.with_ymd_and_hms(2018, 6, 5, 0, 0, 0).unwrap(),
        icbc_source: IcbcSource::Ecmwf,
        physics: PhysicsSelection::default(),
    }
}

fn wait_success(svc: &Service, run_id: RunId) -> Result<()> {
    let r = svc.wait_for_run(run_id, RUN_TIMEOUT)?;
    if r.status != RunStatus::Success {
        return Err(ServiceError::Invalid(format!("demo run {run_id} ended {:?}", r.status)));
    }
    Ok(())
}

/// Creates the root run, waits for it, then runs the derived runs
/// concurrently so they can reuse its artifacts.
fn run_family(
    svc: &Service,
    project_id: ProjectId,
    root: RunConfig,
    children: Vec<(usize, RunConfig)>,
) -> Result<Vec<RunId>> {
    let first = svc.create_run(project_id, root, None)?;
    svc.start_run(first.run_id, None)?;
    wait_success(svc, first.run_id)?;
    let mut ids = vec![first.run_id];
    for (parent, cfg) in children {
        let r = svc.create_run(project_id, cfg, Some(ids[parent]))?;
        ids.push(r.run_id);
    }
    for &id in &ids[1..] {
        svc.start_run(id, None)?;
    }
    for &id in &ids[1..] {
        wait_success(svc, id)?;
    }
    Ok(ids)
}

fn seed_marica(svc: &Service) -> Result<DemoProject> {
    use Cumulus::*;
    use Microphysics::*;
    use Pbl::*;
    let name = "Marica 2022 extreme rainfall";
    let project = svc.create_project(name)?;
    let base = marica_base();
    // (parent index, microphysics, cumulus, pbl)
    let variants = [
        (0, Thompson, Kf, Ysu),
        (0, Morrison, Kf, Ysu),
        (0, Lin, Bmj, Ysu),
        (1, Kessler, Grell, Myj),
        (2, Wsm6, Tiedtke, Mynn),
        (3, Thompson, Bmj, Acm2),
        (1, Morrison, Grell, Ysu),
    ];
    let children = variants
        .iter()
        .enumerate()
        .map(|(k, &(parent, mp, cu, pbl))| {
            let mut c = base.clone();
            c.name = format!("marica-{:02}", k + 2);
            c.physics = physics(mp, cu, pbl);
            (parent, c)
        })
        .collect();
    let runs = run_family(svc, project.project_id, base, children)?;
    let e = svc.create_ensemble(project.project_id, "all physics variants")?;
    for &r in &runs {
        svc.set_membership(e.ensemble_id, r, true)?;
    }
    Ok(DemoProject {
        project_id: project.project_id,
        name: name.into(),
        runs,
        ensembles: vec![e.ensemble_id],
    })
}

fn seed_sao_paulo(svc: &Service) -> Result<DemoProject> {
    let name = "Sao Paulo 2018 frontal rainfall";
    let project = svc.create_project(name)?;
    let combos = [
        physics(Microphysics::Thompson, Cumulus::Kf, Pbl::Ysu),
        physics(Microphysics::Wsm6, Cumulus::Kf, Pbl::Myj),
        physics(Microphysics::Wsm6, Cumulus::Grell, Pbl::Myj),
    ];
    let cfg = |n: usize| {
        let mut c = sao_paulo_base();
        c.name = format!("sao-paulo-{n:02}");
        c.physics = combos[(n - 1) / 2];
        c.icbc_source = if n % 2 == 1 { IcbcSource::Ecmwf } else { IcbcSource::Gfs };
        c
    };
    let runs = run_family(svc, project.project_id, cfg(1), (2..=6).map(|n| (0, cfg(n))).collect())?;
    let mut ensembles = Vec::new();
    for k in 0..3 {
        let e = svc.create_ensemble(project.project_id, &format!("physics set {}", k + 1))?;
        svc.set_membership(e.ensemble_id, runs[2 * k], true)?;
        svc.set_membership(e.ensemble_id, runs[2 * k + 1], true)?;
        ensembles.push(e.ensemble_id);
    }
    Ok(DemoProject {
        project_id: project.project_id,
        name: name.into(),
        runs,
        ensembles,
    })
}

/// Seeds both projects into a service whose store is still empty.
pub fn seed(svc: &Service) -> Result<DemoSummary> {
    if !svc.projects().is_empty() {
        return Err(ServiceError::DataDirNotEmpty(svc.data_dir().display().to_string()));
    }
    Ok(DemoSummary {
        projects: vec![seed_marica(svc)?, seed_sao_paulo(svc)?],
    })
}

/// Seeds a missing or empty data directory and closes the service again.
pub fn seed_dir(cfg: ServiceConfig) -> Result<DemoSummary> {
    if dir_has_entries(&cfg.data_dir)? {
        return Err(ServiceError::DataDirNotEmpty(cfg.data_dir.display().to_string()));
    }
    let svc = Service::open(cfg)?;
    let out = seed(&svc);
    svc.shutdown();
    out
}

fn dir_has_entries(p: &Path) -> Result<bool> {
    match std::fs::read_dir(p) {
        Ok(mut it) => Ok(it.next().is_some()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(false),
        Err(e) => Err(ServiceError::DataDirUnavailable(format!("{}: {e}", p.display()))),
    }
}
