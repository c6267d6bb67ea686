use std::path::PathBuf;

use clap::{Args, ValueEnum};

use wxflow_core::analytics::ScenarioAt;
use wxflow_core::export as render;
use wxflow_core::{Service, ServiceConfig};
use wxflow_server::{scenario_of, QueryParams};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Series,
    Heatmatrix,
    Sunburst,
    Map,
    Probability,
    Projection,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long, default_value = "data")]
    data_dir: PathBuf,
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long)]
    run: Option<u64>,
    #[arg(long)]
    ensemble: Option<u64>,
    #[arg(long)]
    project: Option<u64>,
    #[arg(long, default_value_t = 1)]
    domain: u32,
    #[arg(long)]
    field: Option<String>,
    /// Spatial aggregation, or the ensemble aggregation of maps and heat
    /// matrices.
    #[arg(long)]
    agg: Option<String>,
    #[arg(long)]
    ensemble_agg: Option<String>,
    #[arg(long)]
    i: Option<usize>,
    #[arg(long)]
    j: Option<usize>,
    #[arg(long)]
    hour: Option<u32>,
    #[arg(long)]
    t0: Option<u32>,
    #[arg(long)]
    t1: Option<u32>,
    /// Comma-separated contour levels.
    #[arg(long)]
    levels: Option<String>,
    /// Comma-separated `field:ge|le:value` conditions.
    #[arg(long)]
    conds: Option<String>,
    #[arg(long)]
    window: Option<u32>,
    /// `map` or `matrix`, for probability exports.
    #[arg(long)]
    view: Option<String>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ExportArgs {
    fn params(&self) -> QueryParams {
        QueryParams {
            domain: Some(self.domain),
            field: self.field.clone(),
            agg: self.agg.clone(),
            ensemble_agg: self.ensemble_agg.clone(),
            i: self.i,
            j: self.j,
            hour: self.hour,
            t0: self.t0,
            t1: self.t1,
            levels: self.levels.clone(),
            conds: self.conds.clone(),
            window: self.window,
            view: self.view.clone(),
            format: None,
        }
    }
}

fn need(v: Option<u64>, flag: &str, kind: Kind) -> Result<u64, Failure> {
    v.ok_or_else(|| Failure::usage(format!("--{flag} is required for {kind:?} exports")))
}

fn api(e: wxflow_server::ApiError) -> Failure {
    Failure::from(e.0)
}

/// Renders the requested product with the same parameter handling and
/// serialization as the HTTP API.
pub fn render(svc: &Service, a: &ExportArgs) -> Result<String, Failure> {
    let p = a.params();
    let domain = a.domain;
    Ok(match a.kind {
        Kind::Series => {
            let run = need(a.run, "run", a.kind)?;
            render::series_csv(&svc.series(run, domain, p.field().map_err(api)?, p.spatial().map_err(api)?)?)
        }
        Kind::Heatmatrix => {
            let e = need(a.ensemble, "ensemble", a.kind)?;
            render::heatmatrix_csv(&svc.ensemble_heatmatrix(e, domain, p.field().map_err(api)?, p.agg().map_err(api)?)?)
        }
        Kind::Sunburst => {
            let spatial = p.spatial().map_err(api)?;
            match (a.run, a.ensemble) {
                (Some(r), None) => render::json(&svc.run_sunburst(r, domain, spatial)?),
                (None, Some(e)) => render::json(&svc.ensemble_sunburst(e, domain, spatial, p.ensemble_agg().map_err(api)?)?),
                _ => return Err(Failure::usage("give exactly one of --run and --ensemble")),
            }
        }
        Kind::Map => {
            let (field, time, levels) = (p.field().map_err(api)?, p.time().map_err(api)?, p.levels().map_err(api)?);
            let m = match (a.run, a.ensemble) {
                (Some(r), None) => svc.run_map(r, domain, field, time, levels)?,
                (None, Some(e)) => svc.ensemble_map(e, domain, field, time, p.agg().map_err(api)?, levels)?,
                _ => return Err(Failure::usage("give exactly one of --run and --ensemble")),
            };
            render::json(&m.contours)
        }
        Kind::Probability => {
            let e = need(a.ensemble, "ensemble", a.kind)?;
            let spec = scenario_of(svc, e, &p)?;
            match a.view.as_deref() {
                None | Some("map") => {
                    let at = a.hour.map_or(ScenarioAt::Window, ScenarioAt::Hour);
                    render::json(&svc.ensemble_probability(e, domain, &spec, at, p.levels().map_err(api)?)?)
                }
                Some("matrix") => render::scenario_matrix_csv(&svc.ensemble_scenario_matrix(e, domain, &spec)?),
                Some(v) => return Err(Failure::usage(format!("unknown view `{v}`"))),
            }
        }
        Kind::Projection => {
            let project = need(a.project, "project", a.kind)?;
            render::projection_csv(&svc.projection(project, domain)?)
        }
    })
}

pub fn export(a: ExportArgs) -> Result<(), Failure> {
    if !a.data_dir.join("meta").join("journal.jsonl").exists() {
        return Err(Failure::from(wxflow_core::ServiceError::DataDirUnavailable(format!(
            "{} holds no store",
            a.data_dir.display()
        ))));
    }
    let svc = Service::open(ServiceConfig {
        data_dir: a.data_dir.clone(),
        worker_slots: 1,
        ..ServiceConfig::default()
    })?;
    let out = render(&svc, &a);
    svc.shutdown();
    let text = out?;
    match &a.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}
