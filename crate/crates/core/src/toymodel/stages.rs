//! Surrogate preprocessing stages: static terrain (geogrid), horizontal
//! interpolation of the initial state onto every domain (metgrid), and model
//! initialization (real).

use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::artifact::{self, ArtifactError};
use crate::griddef::DomainSpec;
use crate::scalar::Grid;
use crate::toymodel::icbc::{BoundaryRecord, IcbcSeries, RegionGeometry, TempUnit};
use crate::toymodel::{Coefficients, IcbcSource, PhysicsSelection};

/// Standard-atmosphere lapse rate, °C per meter.
pub const LAPSE_RATE: f64 = 0.0065;

pub const TERRAIN: &str = "terrain";
pub const LAND: &str = "land";
pub const SOIL: &str = "soil";
pub const HUMIDITY: &str = "humidity";
pub const TEMPERATURE: &str = "temperature";

/// Terrain height (m), a fixed analytic landscape with coastal ranges to the
/// northwest of a southeast-facing coastline.
pub fn terrain_height(lon: f64, lat: f64) -> f64 {
    let ridge = 900.0 * (-((lon + 43.5).powi(2) / 1.2 + (lat + 22.3).powi(2) / 0.5)).exp();
    let plateau = 500.0 * (-((lon + 45.5).powi(2) / 2.0 + (lat + 23.0).powi(2) / 0.8)).exp();
    let rolling = 150.0 * (1.0 + (1.7 * lon).sin() * (2.1 * lat).cos());
    (ridge + plateau + rolling) * land_fraction(lon, lat)
}

/// Fraction of land in `[0, 1]`; sea lies to the southeast.
pub fn land_fraction(lon: f64, lat: f64) -> f64 {
    let d = (lat + 23.2) - 0.35 * (lon + 43.0);
    1.0 / (1.0 + (-3.0 * d).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMeta {
    pub source: IcbcSource,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub hours: u32,
    pub perimeter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageHeader {
    pub domains: Vec<DomainSpec>,
    pub layers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub physics: Option<PhysicsSelection>,
}

/// Per-domain grids plus, after metgrid, the root boundary series.
#[derive(Debug, Clone, PartialEq)]
pub struct StageData {
    pub header: StageHeader,
    /// `grids[d][l]` is layer `l` of domain `d`.
    pub grids: Vec<Vec<Grid<f64>>>,
    pub records: Vec<BoundaryRecord>,
}

impl StageData {
    pub fn layer(&self, domain_pos: usize, name: &str) -> Option<&Grid<f64>> {
        let l = self.header.layers.iter().position(|n| n == name)?;
        self.grids.get(domain_pos)?.get(l)
    }

    fn payload(&self) -> Vec<f64> {
        let mut p = Vec::new();
        for d in &self.grids {
            for g in d {
                p.extend_from_slice(&g.data);
            }
        }
        for r in &self.records {
            p.extend_from_slice(&[r.u, r.v, r.amplitude, r.phase_x, r.phase_y]);
            p.extend_from_slice(&r.humidity);
            p.extend_from_slice(&r.temperature);
        }
        p
    }

    pub fn write(&self, path: &Path, magic: &[u8; 8]) -> std::io::Result<()> {
        artifact::write(path, magic, &self.header, &self.payload())
    }

    pub fn read(path: &Path, magic: &[u8; 8]) -> Result<Self, ArtifactError> {
        let (header, payload): (StageHeader, Vec<f64>) = artifact::read(path, magic)?;
        let mut off = 0usize;
        let mut take = |n: usize| -> Result<Vec<f64>, ArtifactError> {
            let s = payload
                .get(off..off + n)
                .ok_or_else(|| ArtifactError::Malformed("stage payload too short".into()))?
                .to_vec();
            off += n;
            Ok(s)
        };
        let mut grids = Vec::with_capacity(header.domains.len());
        for d in &header.domains {
            let mut layers = Vec::with_capacity(header.layers.len());
            for _ in &header.layers {
                layers.push(Grid::from_vec(d.nx, d.ny, take(d.nx * d.ny)?).unwrap());
            }
            grids.push(layers);
        }
        let mut records = Vec::new();
        if let Some(b) = &header.boundary {
            for _ in 0..b.hours {
                let s = take(5)?;
                records.push(BoundaryRecord {
                    u: s[0],
                    v: s[1],
                    amplitude: s[2],
                    phase_x: s[3],
                    phase_y: s[4],
                    humidity: take(b.perimeter)?,
                    temperature: take(b.perimeter)?,
                });
            }
        }
        if off != payload.len() {
            return Err(ArtifactError::Malformed("trailing stage payload".into()));
        }
        Ok(Self { header, grids, records })
    }
}

/// Static fields for every domain.
pub fn geogrid(domains: &[DomainSpec]) -> StageData {
    let grids = domains
        .iter()
        .map(|d| {
            let ll = |i: usize, j: usize| d.frac_to_lonlat(i as f64, j as f64);
            vec![
                Grid::from_fn(d.nx, d.ny, |i, j| {
                    let (lon, lat) = ll(i, j);
                    terrain_height(lon, lat)
                }),
                Grid::from_fn(d.nx, d.ny, |i, j| {
                    let (lon, lat) = ll(i, j);
                    land_fraction(lon, lat)
                }),
            ]
        })
        .collect();
    StageData {
        header: StageHeader {
            domains: domains.to_vec(),
            layers: vec![TERRAIN.into(), LAND.into()],
            boundary: None,
            physics: None,
        },
        grids,
        records: Vec::new(),
    }
}

/// Bilinear sample of `g` at fractional index `(fi, fj)`, clamped to the grid.
pub fn bilinear(g: &Grid<f64>, fi: f64, fj: f64) -> f64 {
    let fi = fi.clamp(0.0, (g.nx - 1) as f64);
    let fj = fj.clamp(0.0, (g.ny - 1) as f64);
    let i0 = (fi.floor() as usize).min(g.nx.saturating_sub(2));
    let j0 = (fj.floor() as usize).min(g.ny.saturating_sub(2));
    let (i1, j1) = ((i0 + 1).min(g.nx - 1), (j0 + 1).min(g.ny - 1));
    let (a, b) = (fi - i0 as f64, fj - j0 as f64);
    let lo = g.get(i0, j0) * (1.0 - a) + g.get(i1, j0) * a;
    let hi = g.get(i0, j1) * (1.0 - a) + g.get(i1, j1) * a;
    lo * (1.0 - b) + hi * b
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum StageError {
    #[error("conditions were generated for a different root region")]
    RegionMismatch,
    #[error("input is missing layer {0}")]
    MissingLayer(&'static str),
    #[error("conditions are not in model units")]
    NotUngribbed,
    #[error("input has no boundary series")]
    MissingBoundary,
}

/// Interpolates the initial root state onto every domain and carries the
/// boundary series along, lowering temperature by the lapse rate over terrain.
pub fn metgrid(geo: &StageData, conditions: &IcbcSeries) -> Result<StageData, StageError> {
    if conditions.header.temp_unit != TempUnit::C {
        return Err(StageError::NotUngribbed);
    }
    let root = &geo.header.domains[0];
    if conditions.header.region != RegionGeometry::from(root) {
        return Err(StageError::RegionMismatch);
    }
    let mut grids = Vec::with_capacity(geo.header.domains.len());
    for (pos, d) in geo.header.domains.iter().enumerate() {
        let terrain = geo.layer(pos, TERRAIN).ok_or(StageError::MissingLayer(TERRAIN))?.clone();
        let land = geo.layer(pos, LAND).ok_or(StageError::MissingLayer(LAND))?.clone();
        let mut humidity = Grid::filled(d.nx, d.ny, 0.0);
        let mut temperature = Grid::filled(d.nx, d.ny, 0.0);
        for j in 0..d.ny {
            for i in 0..d.nx {
                let (lon, lat) = d.frac_to_lonlat(i as f64, j as f64);
                let (fi, fj) = root.lonlat_to_frac(lon, lat);
                humidity.set(i, j, bilinear(&conditions.initial_humidity, fi, fj));
                let t = bilinear(&conditions.initial_temperature, fi, fj) - LAPSE_RATE * terrain.get(i, j);
                temperature.set(i, j, t);
            }
        }
        grids.push(vec![terrain, land, humidity, temperature]);
    }
    let perim = crate::toymodel::icbc::perimeter_points(root.nx, root.ny);
    let root_terrain = &grids[0][0];
    let records = conditions
        .records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            for (t, &(i, j)) in r.temperature.iter_mut().zip(&perim) {
                *t -= LAPSE_RATE * root_terrain.get(i, j);
            }
            r
        })
        .collect();
    Ok(StageData {
        header: StageHeader {
            domains: geo.header.domains.clone(),
            layers: vec![TERRAIN.into(), LAND.into(), HUMIDITY.into(), TEMPERATURE.into()],
            boundary: Some(BoundaryMeta {
                source: conditions.header.source,
                start: conditions.header.start,
                end: conditions.header.end,
                hours: conditions.header.hours,
                perimeter: conditions.header.perimeter,
            }),
            physics: None,
        },
        grids,
        records,
    })
}

/// Initializes soil moisture from the land-surface scheme and fixes the
/// physics the model will run with.
pub fn real(met: &StageData, physics: &PhysicsSelection) -> Result<StageData, StageError> {
    if met.header.boundary.is_none() {
        return Err(StageError::MissingBoundary);
    }
    let coeffs = Coefficients::from_physics(physics);
    let mut grids = Vec::with_capacity(met.grids.len());
    for pos in 0..met.header.domains.len() {
        let get = |name: &'static str| met.layer(pos, name).cloned().ok_or(StageError::MissingLayer(name));
        let land = get(LAND)?;
        let soil = land.map(|l| l * coeffs.soil_init);
        grids.push(vec![get(TERRAIN)?, land, soil, get(HUMIDITY)?, get(TEMPERATURE)?]);
    }
    Ok(StageData {
        header: StageHeader {
            domains: met.header.domains.clone(),
            layers: vec![TERRAIN.into(), LAND.into(), SOIL.into(), HUMIDITY.into(), TEMPERATURE.into()],
            boundary: met.header.boundary.clone(),
            physics: Some(*physics),
        },
        grids,
        records: met.records.clone(),
    })
}
