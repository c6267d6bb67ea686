use axum::extract::{FromRequestParts, Query};
use axum::http::request::Parts;
use serde::Deserialize;

use wxflow_core::analytics::{parse_conditions, Condition, TimeSel};
use wxflow_core::ingest::{Spatial, Stat};
use wxflow_core::Field;

use crate::{invalid, ApiError};

/// Union of the analytics query parameters. Each handler reads the subset
/// it needs through the typed accessors.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct QueryParams {
    pub domain: Option<u32>,
    pub field: Option<String>,
    /// Spatial aggregation, or the ensemble aggregation on ensemble maps
    /// and heat matrices.
    pub agg: Option<String>,
    pub ensemble_agg: Option<String>,
    pub i: Option<usize>,
    pub j: Option<usize>,
    pub hour: Option<u32>,
    pub t0: Option<u32>,
    pub t1: Option<u32>,
    /// Comma-separated contour levels.
    pub levels: Option<String>,
    /// Comma-separated `field:ge|le:value` conditions.
    pub conds: Option<String>,
    /// Precipitation accumulation window in hours.
    pub window: Option<u32>,
    pub view: Option<String>,
    pub format: Option<String>,
}

impl<S: Send + Sync> FromRequestParts<S> for QueryParams {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, _: &S) -> Result<Self, ApiError> {
        Query::<QueryParams>::try_from_uri(&parts.uri)
            .map(|Query(q)| q)
            .map_err(|e| invalid(format!("bad query: {}", e.body_text())))
    }
}

fn stat(name: &str, v: Option<&str>) -> Result<Stat, ApiError> {
    match v {
        None => Ok(Stat::Max),
        Some(s) => Stat::parse(s).ok_or_else(|| invalid(format!("{name} must be min, max or avg"))),
    }
}

impl QueryParams {
    pub fn domain(&self) -> Result<u32, ApiError> {
        Ok(self.domain.unwrap_or(1))
    }

    pub fn field(&self) -> Result<Field, ApiError> {
        match &self.field {
            None => Ok(Field::Precip),
            Some(f) => f.parse().map_err(|_| invalid(format!("unknown field `{f}`"))),
        }
    }

    pub fn agg(&self) -> Result<Stat, ApiError> {
        stat("agg", self.agg.as_deref())
    }

    pub fn ensemble_agg(&self) -> Result<Stat, ApiError> {
        match &self.ensemble_agg {
            None => Ok(Stat::Avg),
            Some(s) => stat("ensemble_agg", Some(s)),
        }
    }

    /// Point mode when both `i` and `j` are given, else `agg`.
    pub fn spatial(&self) -> Result<Spatial, ApiError> {
        match (self.i, self.j) {
            (Some(i), Some(j)) => Ok(Spatial::Point { i, j }),
            (None, None) => Ok(Spatial::Agg(self.agg()?)),
            _ => Err(invalid("i and j must be given together")),
        }
    }

    /// `hour`, or the accumulation window `t0..=t1`.
    pub fn time(&self) -> Result<TimeSel, ApiError> {
        match (self.hour, self.t0, self.t1) {
            (Some(h), None, None) => Ok(TimeSel::Hour(h)),
            (None, Some(t0), Some(t1)) => Ok(TimeSel::Window { t0, t1 }),
            _ => Err(invalid("give either hour or both t0 and t1")),
        }
    }

    pub fn levels(&self) -> Result<Option<Vec<f64>>, ApiError> {
        let Some(s) = &self.levels else {
            return Ok(None);
        };
        s.split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| p.trim().parse::<f64>().map_err(|_| invalid(format!("bad level `{p}`"))))
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    pub fn conditions(&self) -> Result<Vec<Condition>, ApiError> {
        let s = self.conds.as_deref().ok_or_else(|| invalid("conds is required"))?;
        Ok(parse_conditions(s)?)
    }
}
