//! Read-side operations of the service. Every payload here is serialized
//! as-is by the HTTP API and the CLI exporter.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Result, Service, ServiceError};
use crate::analytics::{
    self, contours, feature_vector_prefix, to_geojson, HeatMatrix, ScenarioAt, ScenarioMatrix, ScenarioSpec, Sunburst,
    TimeSel, FEATURE_NAMES,
};
use crate::griddef::{GeoRect, DomainSpec};
use crate::ingest::{AggregateRecord, DomainSnapshot, IngestError, Spatial, Stat};
use crate::provenance::{EnsembleId, ProjectId, RunId, RunStatus};
use crate::scalar::Grid;
use crate::toymodel::{Field, IcbcSource, PhysicsSelection};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPayload {
    pub run_id: RunId,
    pub domain_id: u32,
    pub field: Field,
    pub spatial: Spatial,
    pub hours: Vec<u32>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MapSource {
    Run { run_id: RunId },
    Ensemble { ensemble_id: EnsembleId, members: Vec<RunId> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SunburstPayload {
    pub source: MapSource,
    pub domain_id: u32,
    pub spatial: Spatial,
    pub ensemble_agg: Option<Stat>,
    pub sunburst: Sunburst,
}

/// A domain grid with its geolocation and contour lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapPayload {
    pub source: MapSource,
    pub domain_id: u32,
    /// Field name, or `probability`.
    pub layer: String,
    pub time: Option<TimeSel>,
    pub at: Option<ScenarioAt>,
    pub agg: Option<Stat>,
    pub nx: usize,
    pub ny: usize,
    pub bounds: GeoRect,
    /// Row-major, `values[j * nx + i]`.
    pub values: Vec<f64>,
    pub levels: Vec<f64>,
    /// GeoJSON feature collection.
    pub contours: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionPoint {
    pub run_id: RunId,
    pub name: String,
    pub x: f64,
    pub y: f64,
    pub status: RunStatus,
    pub icbc_source: IcbcSource,
    pub physics: PhysicsSelection,
    pub ensembles: Vec<EnsembleId>,
    pub hours_ingested: u32,
    pub features: [f64; 9],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionPayload {
    pub project_id: ProjectId,
    pub domain_id: u32,
    pub feature_names: Vec<String>,
    pub points: Vec<ProjectionPoint>,
}

/// Four levels evenly splitting the value range, or none for a flat grid.
fn default_levels(g: &Grid<f64>) -> Vec<f64> {
    let (lo, hi, _) = g.min_max_mean();
    if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        return Vec::new();
    }
    (1..=4).map(|k| lo + (hi - lo) * k as f64 / 5.0).collect()
}

fn check_levels(levels: &[f64]) -> Result<()> {
    if levels.iter().any(|l| !l.is_finite()) || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ServiceError::Invalid("levels must be finite and strictly increasing".into()));
    }
    Ok(())
}

fn map_payload(
    source: MapSource,
    spec: &DomainSpec,
    layer: String,
    grid: Grid<f64>,
    levels: Option<Vec<f64>>,
) -> Result<MapPayload> {
    let levels = match levels {
        Some(l) => {
            check_levels(&l)?;
            l
        }
        None => default_levels(&grid),
    };
    let sets = contours(&grid, spec, &levels);
    Ok(MapPayload {
        source,
        domain_id: spec.domain_id,
        layer,
        time: None,
        at: None,
        agg: None,
        nx: grid.nx,
        ny: grid.ny,
        bounds: spec.geo_rect(),
        values: grid.data,
        levels,
        contours: to_geojson(&sets),
    })
}

impl Service {
    /// Snapshot of a stored run; runs never started have nothing ingested.
    pub fn snapshot(&self, run_id: RunId, domain_id: u32) -> Result<DomainSnapshot> {
        let run = self.store().run(run_id)?;
        if run.config.domain(domain_id).is_none() {
            return Err(IngestError::UnknownDomain(domain_id).into());
        }
        match self.ingest().snapshot(run_id, domain_id) {
            Err(IngestError::UnknownRun(_)) => Err(IngestError::NothingIngested.into()),
            other => Ok(other?),
        }
    }

    fn member_snapshots(&self, ensemble_id: EnsembleId, domain_id: u32) -> Result<(Vec<RunId>, Vec<DomainSnapshot>)> {
        let e = self.ensemble(ensemble_id)?;
        if e.members.is_empty() {
            return Err(analytics::AnalyticsError::EmptyEnsemble.into());
        }
        let snaps = e
            .members
            .iter()
            .map(|&m| match self.snapshot(m, domain_id) {
                Err(ServiceError::Ingest(IngestError::NothingIngested)) => {
                    Err(analytics::AnalyticsError::MemberNotIngested { run_id: m, have: 0, need: 1 }.into())
                }
                other => other,
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((e.members, snaps))
    }

    pub fn series(&self, run_id: RunId, domain_id: u32, field: Field, spatial: Spatial) -> Result<SeriesPayload> {
        self.snapshot(run_id, domain_id)?;
        let s = self.ingest().query_series(run_id, domain_id, field, spatial)?;
        Ok(SeriesPayload {
            run_id,
            domain_id,
            field,
            spatial,
            hours: s.hours,
            values: s.values,
        })
    }

    pub fn aggregates(&self, run_id: RunId, domain_id: u32) -> Result<Vec<AggregateRecord>> {
        self.snapshot(run_id, domain_id)?;
        Ok(self.ingest().aggregates(run_id, domain_id)?)
    }

    pub fn run_sunburst(&self, run_id: RunId, domain_id: u32, spatial: Spatial) -> Result<SunburstPayload> {
        let snap = self.snapshot(run_id, domain_id)?;
        Ok(SunburstPayload {
            source: MapSource::Run { run_id },
            domain_id,
            spatial,
            ensemble_agg: None,
            sunburst: analytics::sunburst(&[snap], spatial, Stat::Avg)?,
        })
    }

    pub fn run_map(
        &self,
        run_id: RunId,
        domain_id: u32,
        field: Field,
        time: TimeSel,
        levels: Option<Vec<f64>>,
    ) -> Result<MapPayload> {
        let snap = self.snapshot(run_id, domain_id)?;
        let grid = analytics::member_map(&snap, field, time)?;
        let mut p = map_payload(MapSource::Run { run_id }, &snap.spec, field.name().into(), grid, levels)?;
        p.time = Some(time);
        Ok(p)
    }

    pub fn ensemble_map(
        &self,
        ensemble_id: EnsembleId,
        domain_id: u32,
        field: Field,
        time: TimeSel,
        agg: Stat,
        levels: Option<Vec<f64>>,
    ) -> Result<MapPayload> {
        let (members, snaps) = self.member_snapshots(ensemble_id, domain_id)?;
        let grid = analytics::ensemble_field_map(&snaps, field, time, agg)?;
        let source = MapSource::Ensemble { ensemble_id, members };
        let mut p = map_payload(source, &snaps[0].spec, field.name().into(), grid, levels)?;
        p.time = Some(time);
        p.agg = Some(agg);
        Ok(p)
    }

    pub fn ensemble_heatmatrix(
        &self,
        ensemble_id: EnsembleId,
        domain_id: u32,
        field: Field,
        agg: Stat,
    ) -> Result<HeatMatrix> {
        let (members, _) = self.member_snapshots(ensemble_id, domain_id)?;
        Ok(analytics::heatmatrix_series(self.ingest(), &members, domain_id, field, agg)?)
    }

    pub fn ensemble_sunburst(
        &self,
        ensemble_id: EnsembleId,
        domain_id: u32,
        spatial: Spatial,
        agg: Stat,
    ) -> Result<SunburstPayload> {
        let (members, snaps) = self.member_snapshots(ensemble_id, domain_id)?;
        Ok(SunburstPayload {
            source: MapSource::Ensemble { ensemble_id, members },
            domain_id,
            spatial,
            ensemble_agg: Some(agg),
            sunburst: analytics::sunburst(&snaps, spatial, agg)?,
        })
    }

    pub fn ensemble_probability(
        &self,
        ensemble_id: EnsembleId,
        domain_id: u32,
        spec: &ScenarioSpec,
        at: ScenarioAt,
        levels: Option<Vec<f64>>,
    ) -> Result<MapPayload> {
        let (members, snaps) = self.member_snapshots(ensemble_id, domain_id)?;
        let grid = analytics::scenario_probability_map(&snaps, spec, at)?;
        let source = MapSource::Ensemble { ensemble_id, members };
        let mut p = map_payload(source, &snaps[0].spec, "probability".into(), grid, levels)?;
        p.at = Some(at);
        Ok(p)
    }

    pub fn ensemble_scenario_matrix(
        &self,
        ensemble_id: EnsembleId,
        domain_id: u32,
        spec: &ScenarioSpec,
    ) -> Result<ScenarioMatrix> {
        let (_, snaps) = self.member_snapshots(ensemble_id, domain_id)?;
        Ok(analytics::scenario_matrix(&snaps, spec)?)
    }

    /// PCA scatter of every run of the project with at least one ingested
    /// hour on `domain_id`, using features over the ingested hours.
    pub fn projection(&self, project_id: ProjectId, domain_id: u32) -> Result<ProjectionPayload> {
        let graph = self.lineage(project_id)?;
        let mut vectors = Vec::new();
        let mut meta = Vec::new();
        for node in graph.nodes {
            let Ok(snap) = self.snapshot(node.run_id, domain_id) else {
                continue;
            };
            if snap.hours() == 0 {
                continue;
            }
            let fv = feature_vector_prefix(&snap)?;
            meta.push((node, snap.hours()));
            vectors.push(fv);
        }
        let points = analytics::project(&vectors)
            .into_iter()
            .zip(meta)
            .zip(&vectors)
            .map(|((p, (node, hours)), fv)| ProjectionPoint {
                run_id: p.run_id,
                name: node.name,
                x: p.x,
                y: p.y,
                status: node.status,
                icbc_source: node.icbc_source,
                physics: node.physics,
                ensembles: node.ensembles,
                hours_ingested: hours,
                features: fv.values,
            })
            .collect();
        Ok(ProjectionPayload {
            project_id,
            domain_id,
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            points,
        })
    }
}
