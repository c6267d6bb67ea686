//! Synthetic initial and boundary conditions.
//!
//! Each source is a deterministic smooth field (a few travelling sinusoidal
//! modes plus a diurnal cycle) seeded by a hash of the request, sampled at
//! the root grid for the initial state and along the root perimeter for
//! every simulated hour.

use std::f64::consts::TAU;
use std::path::Path;

use chrono::{DateTime, Timelike, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::{self, ArtifactError, ICBC_MAGIC, UNGRIB_MAGIC};
use crate::canonical;
use crate::config::MAX_HORIZON_HOURS;
use crate::griddef::DomainSpec;
use crate::scalar::Grid;
use crate::toymodel::IcbcSource;

const KELVIN: f64 = 273.15;

#[derive(Debug, Error, PartialEq)]
pub enum IcbcError {
    #[error("horizon of {0} h exceeds {MAX_HORIZON_HOURS} h")]
    HorizonTooLong(i64),
    #[error("end must be a whole number of hours after start")]
    InvalidInterval,
}

/// Geometry of the region the conditions were generated for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionGeometry {
    pub resolution_m: f64,
    pub center_lon: f64,
    pub center_lat: f64,
    pub nx: usize,
    pub ny: usize,
}

impl From<&DomainSpec> for RegionGeometry {
    fn from(d: &DomainSpec) -> Self {
        Self {
            resolution_m: d.resolution_m,
            center_lon: d.center_lon,
            center_lat: d.center_lat,
            nx: d.nx,
            ny: d.ny,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TempUnit {
    K,
    C,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcbcHeader {
    pub source: IcbcSource,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub hours: u32,
    pub region: RegionGeometry,
    pub perimeter: usize,
    pub temp_unit: TempUnit,
}

/// Boundary forcing valid at the end of one simulated hour.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryRecord {
    /// Background wind, m/s.
    pub u: f64,
    pub v: f64,
    /// Amplitude of the synoptic velocity potential, m²/s.
    pub amplitude: f64,
    /// Phase of the synoptic pattern, radians.
    pub phase_x: f64,
    pub phase_y: f64,
    /// Humidity fraction along the root perimeter.
    pub humidity: Vec<f64>,
    /// Temperature along the root perimeter, in [`IcbcHeader::temp_unit`].
    pub temperature: Vec<f64>,
}

impl BoundaryRecord {
    const SCALARS: usize = 5;
}

/// Decoded conditions: initial root state and one record per hour.
#[derive(Debug, Clone, PartialEq)]
pub struct IcbcSeries {
    pub header: IcbcHeader,
    pub initial_humidity: Grid<f64>,
    pub initial_temperature: Grid<f64>,
    pub records: Vec<BoundaryRecord>,
}

/// Perimeter points of an `nx × ny` grid: bottom row, top row, then the left
/// and right columns without corners.
pub fn perimeter_points(nx: usize, ny: usize) -> Vec<(usize, usize)> {
    let mut pts = Vec::with_capacity(2 * nx + 2 * ny.saturating_sub(2));
    pts.extend((0..nx).map(|i| (i, 0)));
    pts.extend((0..nx).map(|i| (i, ny - 1)));
    for j in 1..ny - 1 {
        pts.push((0, j));
        pts.push((nx - 1, j));
    }
    pts
}

#[derive(Debug, Clone, Copy)]
struct Mode {
    kx: f64,
    ky: f64,
    omega: f64,
    phase: f64,
    amp: f64,
}

impl Mode {
    fn eval(&self, lon: f64, lat: f64, t: f64) -> f64 {
        self.amp * (self.kx * lon + self.ky * lat + self.omega * t + self.phase).sin()
    }
}

struct Generator {
    base_h: f64,
    humidity: Vec<Mode>,
    temperature: Vec<Mode>,
    u0: f64,
    u1: f64,
    v0: f64,
    v1: f64,
    wind_period: f64,
    wind_phase: f64,
    amp0: f64,
    amp_phase: f64,
    px0: f64,
    py0: f64,
    cx: f64,
    cy: f64,
    start_hour: f64,
}

impl Generator {
    fn new(source: IcbcSource, seed: [u8; 32], start: DateTime<Utc>) -> Self {
        let mut rng = ChaCha8Rng::from_seed(seed);
        let mut modes = |n: usize, amp: (f64, f64)| -> Vec<Mode> {
            (0..n)
                .map(|_| Mode {
                    kx: TAU / rng.random_range(3.0..9.0),
                    ky: TAU / rng.random_range(3.0..9.0),
                    omega: TAU / rng.random_range(18.0..60.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 },
                    phase: rng.random_range(0.0..TAU),
                    amp: rng.random_range(amp.0..amp.1),
                })
                .collect()
        };
        let humidity = modes(5, (0.03, 0.09));
        let temperature = modes(3, (0.4, 1.4));
        Self {
            base_h: source.base_humidity(),
            humidity,
            temperature,
            u0: rng.random_range(-6.0..6.0),
            u1: rng.random_range(0.5..3.0),
            v0: rng.random_range(-6.0..6.0),
            v1: rng.random_range(0.5..3.0),
            wind_period: rng.random_range(20.0..50.0),
            wind_phase: rng.random_range(0.0..TAU),
            amp0: rng.random_range(3.0e5..6.0e5),
            amp_phase: rng.random_range(0.0..TAU),
            px0: rng.random_range(0.0..TAU),
            py0: rng.random_range(0.0..TAU),
            cx: rng.random_range(-0.06..0.06),
            cy: rng.random_range(-0.06..0.06),
            start_hour: start.hour() as f64,
        }
    }

    fn humidity(&self, lon: f64, lat: f64, t: f64) -> f64 {
        let h = self.base_h + self.humidity.iter().map(|m| m.eval(lon, lat, t)).sum::<f64>();
        h.clamp(0.05, 1.3)
    }

    fn temperature_k(&self, lon: f64, lat: f64, t: f64) -> f64 {
        let local_solar = self.start_hour + t + lon / 15.0;
        KELVIN + 24.0 - 0.4 * (lat.abs() - 20.0)
            + 4.5 * (TAU * (local_solar - 9.0) / 24.0).sin()
            + self.temperature.iter().map(|m| m.eval(lon, lat, t)).sum::<f64>()
    }

    fn record(&self, t: f64, perimeter: &[(f64, f64)]) -> BoundaryRecord {
        let w = TAU * t / self.wind_period + self.wind_phase;
        BoundaryRecord {
            u: self.u0 + self.u1 * w.sin(),
            v: self.v0 + self.v1 * w.cos(),
            amplitude: self.amp0 * (1.0 + 0.5 * (TAU * t / 36.0 + self.amp_phase).sin()),
            phase_x: self.px0 + self.cx * t,
            phase_y: self.py0 + self.cy * t,
            humidity: perimeter.iter().map(|&(lon, lat)| self.humidity(lon, lat, t)).collect(),
            temperature: perimeter.iter().map(|&(lon, lat)| self.temperature_k(lon, lat, t)).collect(),
        }
    }
}

/// Number of hours between `start` and `end`, validated against the limits.
pub fn horizon(start: DateTime<Utc>, end: DateTime<Utc>) -> Result<u32, IcbcError> {
    let secs = (end - start).num_seconds();
    if secs <= 0 || secs % 3600 != 0 {
        return Err(IcbcError::InvalidInterval);
    }
    let hours = secs / 3600;
    if hours > MAX_HORIZON_HOURS as i64 {
        return Err(IcbcError::HorizonTooLong(hours));
    }
    Ok(hours as u32)
}

/// Generates conditions for `root` over `[start, end]`.
pub fn generate_icbc(
    source: IcbcSource,
    start: DateTime<Utc>,
    end: DateTime<Utc>,
    root: &DomainSpec,
) -> Result<IcbcSeries, IcbcError> {
    let hours = horizon(start, end)?;
    let region = RegionGeometry::from(root);
    let seed = canonical::digest(&serde_json::json!({
        "source": source,
        "start": start,
        "end": end,
        "region": region,
    }));
    let gen = Generator::new(source, seed, start);
    let perimeter: Vec<(f64, f64)> = perimeter_points(root.nx, root.ny)
        .into_iter()
        .map(|(i, j)| root.frac_to_lonlat(i as f64, j as f64))
        .collect();
    let mut initial_humidity = Grid::filled(root.nx, root.ny, 0.0);
    let mut initial_temperature = Grid::filled(root.nx, root.ny, 0.0);
    for j in 0..root.ny {
        for i in 0..root.nx {
            let (lon, lat) = root.frac_to_lonlat(i as f64, j as f64);
            initial_humidity.set(i, j, gen.humidity(lon, lat, 0.0));
            initial_temperature.set(i, j, gen.temperature_k(lon, lat, 0.0));
        }
    }
    let records = (1..=hours).map(|t| gen.record(t as f64, &perimeter)).collect();
    Ok(IcbcSeries {
        header: IcbcHeader {
            source,
            start,
            end,
            hours,
            region,
            perimeter: perimeter.len(),
            temp_unit: TempUnit::K,
        },
        initial_humidity,
        initial_temperature,
        records,
    })
}

impl IcbcSeries {
    fn payload(&self) -> Vec<f64> {
        let mut p = Vec::new();
        p.extend_from_slice(&self.initial_humidity.data);
        p.extend_from_slice(&self.initial_temperature.data);
        for r in &self.records {
            p.extend_from_slice(&[r.u, r.v, r.amplitude, r.phase_x, r.phase_y]);
            p.extend_from_slice(&r.humidity);
            p.extend_from_slice(&r.temperature);
        }
        p
    }

    pub fn encode(&self) -> Vec<u8> {
        artifact::encode(self.magic(), &self.header, &self.payload())
    }

    fn magic(&self) -> &'static [u8; 8] {
        match self.header.temp_unit {
            TempUnit::K => ICBC_MAGIC,
            TempUnit::C => UNGRIB_MAGIC,
        }
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        artifact::write_atomic(path, &self.encode())
    }

    /// Reads a raw (`K`) or ungribbed (`C`) series, depending on `magic`.
    pub fn read(path: &Path, magic: &[u8; 8]) -> Result<Self, ArtifactError> {
        let (header, payload): (IcbcHeader, Vec<f64>) = artifact::read(path, magic)?;
        Self::from_parts(header, payload)
    }

    fn from_parts(header: IcbcHeader, payload: Vec<f64>) -> Result<Self, ArtifactError> {
        let (nx, ny) = (header.region.nx, header.region.ny);
        let n = nx * ny;
        let rec = BoundaryRecord::SCALARS + 2 * header.perimeter;
        if payload.len() != 2 * n + header.hours as usize * rec {
            return Err(ArtifactError::Malformed("icbc payload length".into()));
        }
        let initial_humidity = Grid::from_vec(nx, ny, payload[..n].to_vec()).unwrap();
        let initial_temperature = Grid::from_vec(nx, ny, payload[n..2 * n].to_vec()).unwrap();
        let p = header.perimeter;
        let records = payload[2 * n..]
            .chunks_exact(rec)
            .map(|c| BoundaryRecord {
                u: c[0],
                v: c[1],
                amplitude: c[2],
                phase_x: c[3],
                phase_y: c[4],
                humidity: c[5..5 + p].to_vec(),
                temperature: c[5 + p..5 + 2 * p].to_vec(),
            })
            .collect();
        Ok(Self {
            header,
            initial_humidity,
            initial_temperature,
            records,
        })
    }

    /// Decodes the raw product into model units (temperatures in °C).
    pub fn ungrib(&self) -> IcbcSeries {
        let mut out = self.clone();
        if out.header.temp_unit == TempUnit::K {
            out.header.temp_unit = TempUnit::C;
            out.initial_temperature = out.initial_temperature.map(|t| t - KELVIN);
            for r in &mut out.records {
                r.temperature.iter_mut().for_each(|t| *t -= KELVIN);
            }
        }
        out
    }
}
