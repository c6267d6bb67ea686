#![allow(dead_code)]

use std::time::Duration;

use chrono::{TimeZone, Utc};
use wxflow_core::griddef::snap_child_domain;
use wxflow_core::{DomainSpec, GeoRect, IcbcSource, PhysicsSelection, RunConfig, Service, ServiceConfig};

pub const WAIT: Duration = Duration::from_secs(120);

pub fn root_50x40() -> DomainSpec {
    DomainSpec::root(18_000.0, -43.0, -22.8, 50, 40)
}

pub fn child_of(p: &DomainSpec, i0: f64, j0: f64, i1: f64, j1: f64) -> DomainSpec {
    let (a, b) = p.frac_to_lonlat(i0, j0);
    let (c, d) = p.frac_to_lonlat(i1, j1);
    snap_child_domain(p, &GeoRect::new(a, b, c, d).unwrap(), 3).unwrap()
}

pub fn config(hours: i64, ndomains: usize) -> RunConfig {
    let root = root_50x40();
    let mut ds = vec![root.clone()];
    if ndomains > 1 {
        ds.push(child_of(&root, 15.0, 12.0, 30.0, 24.0));
    }
    if ndomains > 2 {
        let p = ds[1].clone();
        ds.push(child_of(&p, 12.0, 12.0, 27.0, 24.0));
    }
    let start = Utc.with_ymd_and_hms(2022, 3, 31, 0, 0, 0).unwrap();
    RunConfig {
        name: "it".into(),
        user: None,
        domains: ds,
        start,
        end: start + chrono::Duration::hours(hours),
        icbc_source: IcbcSource::Gfs,
        physics: PhysicsSelection::default(),
    }
}

pub fn service(dir: &std::path::Path, poll_ms: u64) -> Service {
    Service::open(ServiceConfig {
        data_dir: dir.to_path_buf(),
        poll_interval_ms: poll_ms,
        worker_slots: 2,
        pacing_ms_default: 0,
    })
    .unwrap()
}
