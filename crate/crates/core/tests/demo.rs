use std::time::Instant;

use wxflow_core::demo;
use wxflow_core::{Service, ServiceConfig};

#[test]
fn demo_seeds_both_projects_once() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ServiceConfig {
        data_dir: dir.path().join("data"),
        poll_interval_ms: 50,
        worker_slots: 4,
        pacing_ms_default: 0,
    };
    let t = Instant::now();
    let s = demo::seed_dir(cfg.clone()).unwrap();
    eprintln!("demo seeded in {:?}", t.elapsed());
    assert_eq!(s.projects.len(), 2);
    assert_eq!(s.run_count(), 14);
    assert_eq!(s.ensemble_count(), 4);
    assert_eq!(demo::seed_dir(cfg.clone()).unwrap_err().code(), "data_dir_not_empty");

    let svc = Service::open(cfg).unwrap();
    let marica = &s.projects[0];
    let sp = &s.projects[1];
    assert_eq!(svc.projection(marica.project_id, 3).unwrap().points.len(), 8);
    assert_eq!(svc.projection(sp.project_id, 2).unwrap().points.len(), 6);
    let dags: Vec<_> = marica.runs.iter().map(|&r| svc.store().run(r).unwrap().dag_id.unwrap()).collect();
    assert_eq!(dags, vec![1, 6, 6, 6, 6, 6, 6, 6]);
    assert_eq!(demo::seed(&svc).unwrap_err().code(), "data_dir_not_empty");
}
