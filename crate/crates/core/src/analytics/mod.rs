//! Derived analytics over ingested frames: sunbursts, ensemble maps,
//! scenario probabilities, heat matrices, feature vectors and projections.

pub mod contour;
pub mod pca;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{DomainSnapshot, IngestError, IngestStore, IntervalKind, Spatial, Stat};
use crate::provenance::RunId;
use crate::scalar::Grid;
use crate::stats::{population_std, summarize};
use crate::toymodel::Field;

pub use contour::{contours, to_geojson, ContourSet, Polyline};
pub use pca::pca_project;

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("run {run_id} has {have} of {need} hours ingested")]
    MemberNotIngested { run_id: RunId, have: u32, need: u32 },
    #[error("ensemble has no members")]
    EmptyEnsemble,
    #[error("scenario has no conditions")]
    EmptyScenario,
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("members disagree on the grid of this domain")]
    ShapeMismatch,
    #[error("run {0} is not fully ingested")]
    RunIncomplete(RunId),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
}

pub type Result<T> = std::result::Result<T, AnalyticsError>;

// ---------------------------------------------------------------- sunburst

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SunburstCell {
    pub interval_kind: IntervalKind,
    pub interval_index: u32,
    pub t0: u32,
    pub t1: u32,
    pub value: f64,
    /// Index of the enclosing cell in the previous layer.
    pub parent: Option<usize>,
    /// False while some of the interval's hours are still missing.
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sunburst {
    pub horizon: u32,
    /// Layers from the inside out: full, h24, h3, h1.
    pub layers: Vec<Vec<SunburstCell>>,
}

const SUNBURST_KINDS: [IntervalKind; 4] = [IntervalKind::Full, IntervalKind::H24, IntervalKind::H3, IntervalKind::H1];

/// Accumulated precipitation per time bucket, over each member's ingested
/// hours. With several members, cell values are aggregated across members
/// with `ensemble_agg`.
pub fn sunburst(members: &[DomainSnapshot], spatial: Spatial, ensemble_agg: Stat) -> Result<Sunburst> {
    let first = members.first().ok_or(AnalyticsError::EmptyEnsemble)?;
    let horizon = first.horizon;
    let have = members.iter().map(|m| m.hours()).min().unwrap_or(0);
    if have == 0 {
        return Err(IngestError::NothingIngested.into());
    }
    check_shapes(members)?;
    let mut layers: Vec<Vec<SunburstCell>> = Vec::new();
    for kind in SUNBURST_KINDS {
        let mut layer = Vec::new();
        for index in 0..kind.count(horizon) {
            let (t0, t1) = kind.hours(horizon, index);
            if t0 > have {
                break;
            }
            let t1c = t1.min(have);
            let values = members
                .iter()
                .map(|m| m.precip_accumulation(t0, t1c).and_then(|g| m.reduce(&g, spatial)))
                .collect::<std::result::Result<Vec<f64>, _>>()?;
            let value = if values.len() == 1 { values[0] } else { ensemble_agg.reduce(values) };
            let parent = layers.last().map(|prev| {
                prev.iter()
                    .position(|p: &SunburstCell| p.t0 <= t0 && t1 <= p.t1)
                    .expect("intervals nest")
            });
            layer.push(SunburstCell {
                interval_kind: kind,
                interval_index: index,
                t0,
                t1,
                value,
                parent,
                complete: t1 <= have,
            });
        }
        layers.push(layer);
    }
    Ok(Sunburst { horizon, layers })
}

fn check_shapes(members: &[DomainSnapshot]) -> Result<()> {
    let first = members.first().ok_or(AnalyticsError::EmptyEnsemble)?;
    if members
        .iter()
        .any(|m| m.spec.nx != first.spec.nx || m.spec.ny != first.spec.ny || m.horizon != first.horizon)
    {
        return Err(AnalyticsError::ShapeMismatch);
    }
    Ok(())
}

fn require_hours(members: &[DomainSnapshot], need: u32) -> Result<()> {
    for m in members {
        if m.hours() < need {
            return Err(AnalyticsError::MemberNotIngested {
                run_id: m.run_id,
                have: m.hours(),
                need,
            });
        }
    }
    Ok(())
}

// --------------------------------------------------------- ensemble maps

/// Time selection of a map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeSel {
    Hour(u32),
    /// Precipitation accumulated over hours `t0..=t1`.
    Window { t0: u32, t1: u32 },
}

/// One member's map: the hourly field, or accumulated precipitation.
pub fn member_map(m: &DomainSnapshot, field: Field, time: TimeSel) -> Result<Grid<f64>> {
    match time {
        TimeSel::Hour(t) => Ok(m.field(field, t)?),
        TimeSel::Window { t0, t1 } => {
            if field != Field::Precip {
                return Err(AnalyticsError::InvalidQuery("time windows apply to precip only".into()));
            }
            Ok(m.precip_accumulation(t0, t1)?)
        }
    }
}

/// Per-point aggregate across members, in member order.
pub fn ensemble_field_map(members: &[DomainSnapshot], field: Field, time: TimeSel, agg: Stat) -> Result<Grid<f64>> {
    check_shapes(members)?;
    let need = match time {
        TimeSel::Hour(t) => t,
        TimeSel::Window { t1, .. } => t1,
    };
    require_hours(members, need)?;
    let maps = members
        .iter()
        .map(|m| member_map(m, field, time))
        .collect::<Result<Vec<_>>>()?;
    let (nx, ny) = (maps[0].nx, maps[0].ny);
    let mut out = Grid::filled(nx, ny, 0.0);
    for p in 0..out.len() {
        out.data[p] = agg.reduce(maps.iter().map(|g| g.data[p]));
    }
    Ok(out)
}

// -------------------------------------------------------------- scenarios

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparator {
    Ge,
    Le,
}

impl Comparator {
    pub fn holds(self, v: f64, threshold: f64) -> bool {
        match self {
            Comparator::Ge => v >= threshold,
            Comparator::Le => v <= threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub field: Field,
    pub cmp: Comparator,
    pub value: f64,
}

impl std::str::FromStr for Condition {
    type Err = AnalyticsError;

    /// `field:ge|le:value`, e.g. `kindex:ge:27`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || AnalyticsError::InvalidScenario(format!("bad condition `{s}`"));
        let mut parts = s.trim().split(':');
        let (Some(f), Some(c), Some(v), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            return Err(bad());
        };
        let field = f.parse::<Field>().map_err(|_| bad())?;
        let cmp = match c {
            "ge" => Comparator::Ge,
            "le" => Comparator::Le,
            _ => return Err(bad()),
        };
        let value = v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(bad)?;
        Ok(Condition { field, cmp, value })
    }
}

/// Comma-separated conditions.
pub fn parse_conditions(s: &str) -> Result<Vec<Condition>> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(str::parse).collect()
}

/// Joint threshold conditions. Precipitation is judged on its accumulation
/// over the `precip_window_h` hours ending at the evaluated hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub conditions: Vec<Condition>,
    pub precip_window_h: u32,
    pub eval_t0: u32,
    pub eval_t1: u32,
}

impl ScenarioSpec {
    pub fn validate(&self, horizon: u32) -> Result<()> {
        if self.conditions.is_empty() {
            return Err(AnalyticsError::EmptyScenario);
        }
        let uses_precip = self.conditions.iter().any(|c| c.field == Field::Precip);
        if uses_precip && self.precip_window_h < 1 {
            return Err(AnalyticsError::InvalidScenario("precip window must be at least 1 h".into()));
        }
        if self.eval_t0 < 1 || self.eval_t0 > self.eval_t1 || self.eval_t1 > horizon {
            return Err(AnalyticsError::InvalidScenario(format!(
                "evaluation window {}..={} outside 1..={horizon}",
                self.eval_t0, self.eval_t1
            )));
        }
        if self.conditions.iter().any(|c| !c.value.is_finite()) {
            return Err(AnalyticsError::InvalidScenario("thresholds must be finite".into()));
        }
        Ok(())
    }
}

/// Where to evaluate a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioAt {
    Hour(u32),
    /// Any hour of the scenario's evaluation window.
    Window,
}

/// Per-point truth of a scenario for one member at hour `t`.
fn scenario_mask(m: &DomainSnapshot, s: &ScenarioSpec, t: u32) -> Result<Vec<bool>> {
    let mut mask = vec![true; m.spec.nx * m.spec.ny];
    for c in &s.conditions {
        let g = if c.field == Field::Precip {
            let t0 = t.saturating_sub(s.precip_window_h - 1).max(1);
            m.precip_accumulation(t0, t)?
        } else {
            m.field(c.field, t)?
        };
        for (ok, v) in mask.iter_mut().zip(&g.data) {
            *ok = *ok && c.cmp.holds(*v, c.value);
        }
    }
    Ok(mask)
}

/// Fraction of members satisfying the scenario at each point.
pub fn scenario_probability_map(members: &[DomainSnapshot], s: &ScenarioSpec, at: ScenarioAt) -> Result<Grid<f64>> {
    check_shapes(members)?;
    let first = &members[0];
    s.validate(first.horizon)?;
    let hours: Vec<u32> = match at {
        ScenarioAt::Hour(t) => {
            if t < 1 || t > first.horizon {
                return Err(AnalyticsError::InvalidQuery(format!("hour {t} outside the horizon")));
            }
            vec![t]
        }
        ScenarioAt::Window => (s.eval_t0..=s.eval_t1).collect(),
    };
    require_hours(members, *hours.last().unwrap())?;
    let n = first.spec.nx * first.spec.ny;
    let mut count = vec![0u32; n];
    for m in members {
        let mut any = vec![false; n];
        for &t in &hours {
            for (a, b) in any.iter_mut().zip(scenario_mask(m, s, t)?) {
                *a |= b;
            }
        }
        for (c, a) in count.iter_mut().zip(any) {
            *c += a as u32;
        }
    }
    let total = members.len() as f64;
    Ok(Grid::from_vec(first.spec.nx, first.spec.ny, count.into_iter().map(|c| c as f64 / total).collect()).unwrap())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMatrix {
    pub members: Vec<RunId>,
    pub hours: Vec<u32>,
    /// `cells[m][k]`: member `m` satisfies the scenario somewhere at `hours[k]`.
    pub cells: Vec<Vec<bool>>,
}

/// Member × hour flags over the hours every member has ingested.
pub fn scenario_matrix(members: &[DomainSnapshot], s: &ScenarioSpec) -> Result<ScenarioMatrix> {
    check_shapes(members)?;
    s.validate(members[0].horizon)?;
    let have = members.iter().map(|m| m.hours()).min().unwrap_or(0);
    if have == 0 {
        return Err(IngestError::NothingIngested.into());
    }
    let hours: Vec<u32> = (1..=have).collect();
    let cells = members
        .iter()
        .map(|m| {
            hours
                .iter()
                .map(|&t| Ok(scenario_mask(m, s, t)?.into_iter().any(|b| b)))
                .collect::<Result<Vec<bool>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScenarioMatrix {
        members: members.iter().map(|m| m.run_id).collect(),
        hours,
        cells,
    })
}

// ------------------------------------------------------------ heat matrix

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatMatrix {
    pub field: Field,
    pub members: Vec<RunId>,
    pub hours: Vec<u32>,
    /// `values[m][k]` at `hours[k]`.
    pub values: Vec<Vec<f64>>,
}

/// Spatially aggregated series of each member, cut to the hours all members
/// have ingested.
pub fn heatmatrix_series(
    ingest: &IngestStore,
    members: &[RunId],
    domain_id: u32,
    field: Field,
    agg: Stat,
) -> Result<HeatMatrix> {
    if members.is_empty() {
        return Err(AnalyticsError::EmptyEnsemble);
    }
    let mut rows = Vec::with_capacity(members.len());
    for &m in members {
        match ingest.query_series(m, domain_id, field, Spatial::Agg(agg)) {
            Ok(s) => rows.push(s.values),
            Err(IngestError::NothingIngested) => {
                return Err(AnalyticsError::MemberNotIngested {
                    run_id: m,
                    have: 0,
                    need: 1,
                })
            }
            Err(e) => return Err(e.into()),
        }
    }
    let have = rows.iter().map(|r| r.len()).min().unwrap_or(0);
    rows.iter_mut().for_each(|r| r.truncate(have));
    Ok(HeatMatrix {
        field,
        members: members.to_vec(),
        hours: (1..=have as u32).collect(),
        values: rows,
    })
}

// -------------------------------------------------------- feature vectors

pub const FEATURE_NAMES: [&str; 9] = [
    "h3_max", "h3_avg", "h3_std", "h24_max", "h24_avg", "h24_std", "full_max", "full_avg", "full_std",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub run_id: RunId,
    pub values: [f64; 9],
}

/// Max, mean and population std of per-point precipitation accumulations
/// over every non-overlapping h3, h24 and full window of the ingested hours.
/// The last window of a kind may be shorter.
pub fn feature_vector_prefix(m: &DomainSnapshot) -> Result<FeatureVector> {
    let have = m.hours();
    if have == 0 {
        return Err(IngestError::NothingIngested.into());
    }
    let mut values = [0.0; 9];
    for (k, kind) in [IntervalKind::H3, IntervalKind::H24, IntervalKind::Full].into_iter().enumerate() {
        let mut population = Vec::new();
        for index in 0..kind.count(m.horizon) {
            let (t0, t1) = kind.hours(m.horizon, index);
            if t0 > have {
                break;
            }
            population.extend(m.precip_accumulation(t0, t1.min(have))?.data);
        }
        let s = summarize(population.iter().copied());
        values[3 * k] = s.max;
        values[3 * k + 1] = s.mean;
        values[3 * k + 2] = population_std(&population);
    }
    Ok(FeatureVector {
        run_id: m.run_id,
        values,
    })
}

/// Feature vector of a fully ingested run.
pub fn feature_vector(m: &DomainSnapshot) -> Result<FeatureVector> {
    if !m.is_complete() {
        return Err(AnalyticsError::RunIncomplete(m.run_id));
    }
    feature_vector_prefix(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPoint {
    pub run_id: RunId,
    pub x: f64,
    pub y: f64,
}

pub fn project(vectors: &[FeatureVector]) -> Vec<ProjectedPoint> {
    let rows: Vec<Vec<f64>> = vectors.iter().map(|v| v.values.to_vec()).collect();
    pca_project(&rows)
        .into_iter()
        .zip(vectors)
        .map(|((x, y), v)| ProjectedPoint { run_id: v.run_id, x, y })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::griddef::DomainSpec;
    use crate::toymodel::FieldFrame;
    use std::sync::Arc;

    fn snap(run_id: RunId, horizon: u32, hours: u32, f: impl Fn(Field, u32, usize, usize) -> f32) -> DomainSnapshot {
        let spec = DomainSpec::root(18_000.0, -43.0, -22.8, 4, 3);
        let frames = (1..=hours)
            .map(|t| {
                Arc::new(FieldFrame {
                    run_id,
                    domain_id: 1,
                    step_hour: t,
                    nx: 4,
                    ny: 3,
                    grids: Field::ALL.iter().map(|&fl| Grid::from_fn(4, 3, |i, j| f(fl, t, i, j))).collect(),
                })
            })
            .collect();
        DomainSnapshot {
            run_id,
            spec,
            horizon,
            frames,
        }
    }

    #[test]
    fn sunburst_layers() {
        let m = snap(1, 72, 72, |f, t, i, _| if f == Field::Precip { (t as f32 + i as f32) / 8.0 } else { 0.0 });
        let sb = sunburst(&[m], Spatial::Point { i: 1, j: 0 }, Stat::Avg).unwrap();
        let sizes: Vec<usize> = sb.layers.iter().map(|l| l.len()).collect();
        assert_eq!(sizes, vec![1, 3, 24, 72]);
        for w in 1..4 {
            for (k, parent) in sb.layers[w - 1].iter().enumerate() {
                let kids: f64 = sb.layers[w].iter().filter(|c| c.parent == Some(k)).map(|c| c.value).sum();
                assert_eq!(kids, parent.value);
            }
        }
    }

    #[test]
    fn sunburst_dry_point_and_partial() {
        let m = snap(1, 72, 10, |_, _, _, _| 0.0);
        let sb = sunburst(&[m], Spatial::Point { i: 0, j: 0 }, Stat::Avg).unwrap();
        assert!(sb.layers.iter().flatten().all(|c| c.value == 0.0));
        assert_eq!(sb.layers[3].len(), 10);
        assert_eq!(sb.layers[2].len(), 4);
        assert!(!sb.layers[2][3].complete);
    }

    #[test]
    fn ensemble_map_order() {
        let ms: Vec<_> = (0..3).map(|k| snap(k, 6, 6, move |_, t, i, j| (k as f32) * t as f32 + (i * j) as f32)).collect();
        let lo = ensemble_field_map(&ms, Field::T2, TimeSel::Hour(4), Stat::Min).unwrap();
        let av = ensemble_field_map(&ms, Field::T2, TimeSel::Hour(4), Stat::Avg).unwrap();
        let hi = ensemble_field_map(&ms, Field::T2, TimeSel::Hour(4), Stat::Max).unwrap();
        for p in 0..lo.len() {
            assert!(lo.data[p] <= av.data[p] && av.data[p] <= hi.data[p]);
        }
        let single = ensemble_field_map(&ms[1..2], Field::T2, TimeSel::Hour(4), Stat::Avg).unwrap();
        assert_eq!(single, ms[1].field(Field::T2, 4).unwrap());
        assert!(matches!(
            ensemble_field_map(&ms, Field::T2, TimeSel::Hour(7), Stat::Avg),
            Err(AnalyticsError::MemberNotIngested { .. })
        ));
    }

    fn spec(conditions: Vec<Condition>, window: u32, t0: u32, t1: u32) -> ScenarioSpec {
        ScenarioSpec {
            conditions,
            precip_window_h: window,
            eval_t0: t0,
            eval_t1: t1,
        }
    }

    #[test]
    fn scenario_basics() {
        let ms: Vec<_> = (0..4).map(|k| snap(k, 6, 6, move |_, t, i, _| (k * 10) as f32 + t as f32 + i as f32)).collect();
        let always = spec(
            vec![Condition {
                field: Field::T2,
                cmp: Comparator::Ge,
                value: -100.0,
            }],
            1,
            1,
            6,
        );
        let p = scenario_probability_map(&ms, &always, ScenarioAt::Window).unwrap();
        assert!(p.data.iter().all(|v| *v == 1.0));
        let m = scenario_matrix(&ms, &always).unwrap();
        assert!(m.cells.iter().flatten().all(|b| *b));

        let p = scenario_probability_map(&ms[..1], &spec(vec![Condition { field: Field::T2, cmp: Comparator::Ge, value: 5.0 }], 1, 1, 6), ScenarioAt::Hour(3)).unwrap();
        assert!(p.data.iter().all(|v| *v == 0.0 || *v == 1.0));

        assert!(matches!(
            scenario_probability_map(&ms, &spec(vec![], 1, 1, 6), ScenarioAt::Window),
            Err(AnalyticsError::EmptyScenario)
        ));
        let precip0 = spec(vec![Condition { field: Field::Precip, cmp: Comparator::Ge, value: 1.0 }], 0, 1, 6);
        assert!(matches!(scenario_matrix(&ms, &precip0), Err(AnalyticsError::InvalidScenario(_))));
    }

    #[test]
    fn precip_window_sums_trailing_hours() {
        // precip = 1 mm every hour: a 3 h window reaches 3 mm from hour 3.
        let m = snap(1, 6, 6, |f, _, _, _| if f == Field::Precip { 1.0 } else { 0.0 });
        let s = spec(vec![Condition { field: Field::Precip, cmp: Comparator::Ge, value: 3.0 }], 3, 1, 6);
        let mx = scenario_matrix(&[m], &s).unwrap();
        assert_eq!(mx.cells[0], vec![false, false, true, true, true, true]);
    }

    #[test]
    fn features() {
        let dry = snap(1, 72, 72, |_, _, _, _| 0.0);
        assert_eq!(feature_vector(&dry).unwrap().values, [0.0; 9]);
        let wet = snap(2, 72, 72, |f, _, _, _| if f == Field::Precip { 1.0 } else { 0.0 });
        let v = feature_vector(&wet).unwrap().values;
        assert_eq!(&v[6..], &[72.0, 72.0, 0.0]);
        assert_eq!(&v[..3], &[3.0, 3.0, 0.0]);
        let partial = snap(3, 72, 5, |_, _, _, _| 0.0);
        assert!(matches!(feature_vector(&partial), Err(AnalyticsError::RunIncomplete(3))));
        assert!(feature_vector_prefix(&partial).is_ok());
    }
}
