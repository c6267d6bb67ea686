//! Limited-area surrogate: 2-D advection–diffusion of humidity and
//! temperature on every nested domain, emitting one frame per domain per
//! simulated hour.

use std::f64::consts::TAU;
use std::io;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::Timelike;
use thiserror::Error;

use crate::griddef::{DomainSpec, METERS_PER_DEGREE};
use crate::scalar::Grid;
use crate::toymodel::frame::{frame_path, FieldFrame};
use crate::toymodel::icbc::{perimeter_points, BoundaryRecord};
use crate::toymodel::stages::{bilinear, StageData, HUMIDITY, LAND, SOIL, TEMPERATURE, TERRAIN};
use crate::toymodel::Coefficients;

/// Advection/diffusion substeps per simulated hour.
pub const SUBSTEPS: usize = 12;
const SUBSTEP_SECONDS: f64 = 3600.0 / SUBSTEPS as f64;
const MAX_COURANT: f64 = 0.45;
/// Precipitation is stored on a 1/1024 mm lattice so hourly sums are exact.
pub const PRECIP_QUANTUM: f64 = 1.0 / 1024.0;
/// Wavelengths of the synoptic velocity potential, meters.
const WAVE_X_M: f64 = 500_000.0;
const WAVE_Y_M: f64 = 400_000.0;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("abort requested after {completed_hours} h")]
    AbortRequested { completed_hours: u32 },
    #[error("non-finite state in domain {domain_id} at hour {hour}")]
    NumericFailure { domain_id: u32, hour: u32 },
    #[error("invalid model input: {0}")]
    InvalidInput(String),
    #[error("frame sink: {0}")]
    Sink(#[from] io::Error),
}

/// Destination of emitted frames.
pub trait FrameSink {
    fn write_frame(&mut self, frame: &FieldFrame) -> io::Result<()>;
}

impl FrameSink for Vec<FieldFrame> {
    fn write_frame(&mut self, frame: &FieldFrame) -> io::Result<()> {
        self.push(frame.clone());
        Ok(())
    }
}

/// Writes `dom<D>_t<HHH>.pwf` files atomically into a directory.
#[derive(Debug, Clone)]
pub struct DirSink {
    pub out_dir: PathBuf,
}

impl FrameSink for DirSink {
    fn write_frame(&mut self, frame: &FieldFrame) -> io::Result<()> {
        crate::artifact::write_atomic(
            &frame_path(&self.out_dir, frame.domain_id, frame.step_hour),
            &frame.encode(),
        )
    }
}

/// Pacing and cooperative cancellation for one model run.
#[derive(Debug, Clone, Default)]
pub struct RunControl {
    pub pacing_ms: u64,
    pub abort: Arc<AtomicBool>,
}

impl RunControl {
    pub fn aborted(&self) -> bool {
        self.abort.load(Ordering::SeqCst)
    }

    fn pace(&self) {
        if self.pacing_ms == 0 {
            return;
        }
        let deadline = Instant::now() + Duration::from_millis(self.pacing_ms);
        while !self.aborted() {
            let now = Instant::now();
            if now >= deadline {
                break;
            }
            std::thread::sleep((deadline - now).min(Duration::from_millis(5)));
        }
    }
}

/// Prognostic and diagnostic state of one domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    /// Humidity as a fraction of saturation; values above 1 are supersaturated.
    pub humidity: Grid<f64>,
    /// 2 m temperature, °C.
    pub temperature: Grid<f64>,
    /// Upper-level wind, m/s.
    pub u: Grid<f64>,
    pub v: Grid<f64>,
    /// Low-level wind, m/s.
    pub u_low: Grid<f64>,
    pub v_low: Grid<f64>,
    /// Grid spacing, meters.
    pub dx: f64,
    pub dy: f64,
}

/// The seven output fields in `f64`, before frame conversion.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedFields {
    pub precip: Grid<f64>,
    pub t2: Grid<f64>,
    pub div300: Grid<f64>,
    pub w500: Grid<f64>,
    pub conv850: Grid<f64>,
    pub kindex: Grid<f64>,
    pub rh850: Grid<f64>,
}

impl DerivedFields {
    /// Grids in canonical field order.
    pub fn into_grids(self) -> [Grid<f64>; 7] {
        [self.precip, self.t2, self.div300, self.w500, self.conv850, self.kindex, self.rh850]
    }
}

/// K-index as an affine combination of 2 m temperature and 850 hPa humidity.
pub fn kindex(t2: f64, rh850: f64) -> f64 {
    0.6 * t2 + 0.2 * rh850 - 4.0
}

/// Discrete divergence `∂u/∂x + ∂v/∂y` (1/s): central differences inside,
/// one-sided on the edges.
pub fn divergence(u: &Grid<f64>, v: &Grid<f64>, dx: f64, dy: f64) -> Grid<f64> {
    let (nx, ny) = (u.nx, u.ny);
    Grid::from_fn(nx, ny, |i, j| {
        let dudx = if i == 0 {
            (u.get(1, j) - u.get(0, j)) / dx
        } else if i == nx - 1 {
            (u.get(i, j) - u.get(i - 1, j)) / dx
        } else {
            (u.get(i + 1, j) - u.get(i - 1, j)) / (2.0 * dx)
        };
        let dvdy = if j == 0 {
            (v.get(i, 1) - v.get(i, 0)) / dy
        } else if j == ny - 1 {
            (v.get(i, j) - v.get(i, j - 1)) / dy
        } else {
            (v.get(i, j + 1) - v.get(i, j - 1)) / (2.0 * dy)
        };
        dudx + dvdy
    })
}

/// Diagnoses the seven output fields from a model state.
pub fn derive_fields(state: &ModelState, coeffs: &Coefficients) -> DerivedFields {
    let h = &state.humidity;
    let div_up = divergence(&state.u, &state.v, state.dx, state.dy);
    let div_low = divergence(&state.u_low, &state.v_low, state.dx, state.dy);
    let flux_u = Grid::from_fn(h.nx, h.ny, |i, j| h.get(i, j) * state.u_low.get(i, j));
    let flux_v = Grid::from_fn(h.nx, h.ny, |i, j| h.get(i, j) * state.v_low.get(i, j));
    let flux_div = divergence(&flux_u, &flux_v, state.dx, state.dy);

    let rh850 = h.map(|x| (100.0 * x).clamp(0.0, 100.0));
    let t2 = state.temperature.clone();
    let kidx = Grid::from_fn(h.nx, h.ny, |i, j| kindex(t2.get(i, j), rh850.get(i, j)));
    DerivedFields {
        precip: h.map(|x| (x - 1.0).max(0.0) * coeffs.precip_gain),
        t2,
        div300: div_up.map(|d| 1e5 * d),
        w500: flux_div.map(|d| -0.15 * 1e5 * d),
        conv850: div_low.map(|d| -1e5 * d),
        kindex: kidx,
        rh850,
    }
}

fn quantize_precip(mm: f64) -> f32 {
    ((mm / PRECIP_QUANTUM).round() * PRECIP_QUANTUM) as f32
}

struct DomainRun {
    spec: DomainSpec,
    parent_pos: Option<usize>,
    terrain: Grid<f64>,
    land: Grid<f64>,
    soil: Grid<f64>,
    slope_x: Grid<f64>,
    slope_y: Grid<f64>,
    humidity: Grid<f64>,
    temperature: Grid<f64>,
    start_humidity: Grid<f64>,
    start_temperature: Grid<f64>,
    boundary: Vec<(usize, usize)>,
}

fn gradient(g: &Grid<f64>, dx: f64, dy: f64) -> (Grid<f64>, Grid<f64>) {
    let zero = Grid::filled(g.nx, g.ny, 0.0);
    let gx = divergence(g, &zero, dx, dy);
    let gy = divergence(&zero, g, dx, dy);
    (gx, gy)
}

/// Parameters of the synoptic flow for one hour.
struct Flow {
    u: f64,
    v: f64,
    amplitude: f64,
    phase_x: f64,
    phase_y: f64,
}

impl DomainRun {
    fn winds(&self, flow: &Flow, coeffs: &Coefficients) -> [Grid<f64>; 4] {
        let d = &self.spec;
        let kx = TAU / WAVE_X_M;
        let ky = TAU / WAVE_Y_M;
        let scale_x = METERS_PER_DEGREE * d.ref_lat().to_radians().cos();
        let (nx, ny) = (d.nx, d.ny);
        let mut u = Grid::filled(nx, ny, 0.0);
        let mut v = Grid::filled(nx, ny, 0.0);
        let mut ul = Grid::filled(nx, ny, 0.0);
        let mut vl = Grid::filled(nx, ny, 0.0);
        for j in 0..ny {
            for i in 0..nx {
                let (lon, lat) = d.frac_to_lonlat(i as f64, j as f64);
                let ax = kx * lon * scale_x + flow.phase_x;
                let ay = ky * lat * METERS_PER_DEGREE + flow.phase_y;
                let pu = coeffs.flow_gain * flow.amplitude * kx * ax.cos() * ay.sin();
                let pv = coeffs.flow_gain * flow.amplitude * ky * ax.sin() * ay.cos();
                u.set(i, j, flow.u + pu);
                v.set(i, j, flow.v + pv);
                ul.set(i, j, 0.6 * flow.u - 0.8 * pu + coeffs.terrain_forcing * self.slope_x.get(i, j));
                vl.set(i, j, 0.6 * flow.v - 0.8 * pv + coeffs.terrain_forcing * self.slope_y.get(i, j));
            }
        }
        [u, v, ul, vl]
    }
}

fn advect_diffuse(q: &Grid<f64>, cu: &Grid<f64>, cv: &Grid<f64>, nu: f64) -> Grid<f64> {
    let mut out = q.clone();
    for j in 1..q.ny - 1 {
        for i in 1..q.nx - 1 {
            let c = q.get(i, j);
            let (a, b) = (cu.get(i, j), cv.get(i, j));
            let adv_x = if a > 0.0 { a * (c - q.get(i - 1, j)) } else { a * (q.get(i + 1, j) - c) };
            let adv_y = if b > 0.0 { b * (c - q.get(i, j - 1)) } else { b * (q.get(i, j + 1) - c) };
            let lap = q.get(i + 1, j) + q.get(i - 1, j) + q.get(i, j + 1) + q.get(i, j - 1) - 4.0 * c;
            out.set(i, j, c - adv_x - adv_y + nu * lap);
        }
    }
    out
}

fn lerp(a: f64, b: f64, w: f64) -> f64 {
    a + (b - a) * w
}

/// Runs the surrogate over every hour of `input` (the `real` stage output),
/// writing one frame per domain per hour in increasing hour order.
///
/// Returns the number of simulated hours. Abort is checked once per hour;
/// frames already written stay intact.
pub fn run_model(
    run_id: u64,
    input: &StageData,
    sink: &mut dyn FrameSink,
    control: &RunControl,
) -> Result<u32, ModelError> {
    let physics = input
        .header
        .physics
        .ok_or_else(|| ModelError::InvalidInput("missing physics selection".into()))?;
    let meta = input
        .header
        .boundary
        .clone()
        .ok_or_else(|| ModelError::InvalidInput("missing boundary series".into()))?;
    let coeffs = Coefficients::from_physics(&physics);
    let domains = &input.header.domains;
    if domains.is_empty() || input.records.len() != meta.hours as usize {
        return Err(ModelError::InvalidInput("inconsistent domain or record count".into()));
    }

    let mut runs = Vec::with_capacity(domains.len());
    for (pos, d) in domains.iter().enumerate() {
        let layer = |name: &str| {
            input
                .layer(pos, name)
                .cloned()
                .ok_or_else(|| ModelError::InvalidInput(format!("domain {} lacks {name}", d.domain_id)))
        };
        let terrain = layer(TERRAIN)?;
        let (slope_x, slope_y) = gradient(&terrain, d.resolution_m, d.resolution_m);
        let humidity = layer(HUMIDITY)?;
        let temperature = layer(TEMPERATURE)?;
        let parent_pos = if d.is_root() {
            None
        } else {
            Some(
                domains[..pos]
                    .iter()
                    .position(|p| p.domain_id == d.parent_id)
                    .ok_or_else(|| ModelError::InvalidInput(format!("domain {} has no parent", d.domain_id)))?,
            )
        };
        runs.push(DomainRun {
            spec: d.clone(),
            parent_pos,
            terrain,
            land: layer(LAND)?,
            soil: layer(SOIL)?,
            slope_x,
            slope_y,
            start_humidity: humidity.clone(),
            start_temperature: temperature.clone(),
            humidity,
            temperature,
            boundary: perimeter_points(d.nx, d.ny),
        });
    }
    if runs[0].boundary.len() != meta.perimeter {
        return Err(ModelError::InvalidInput("perimeter length mismatch".into()));
    }

    let initial = BoundaryRecord {
        u: input.records[0].u,
        v: input.records[0].v,
        amplitude: input.records[0].amplitude,
        phase_x: input.records[0].phase_x,
        phase_y: input.records[0].phase_y,
        humidity: runs[0].boundary.iter().map(|&(i, j)| runs[0].humidity.get(i, j)).collect(),
        temperature: runs[0].boundary.iter().map(|&(i, j)| runs[0].temperature.get(i, j)).collect(),
    };
    let start_hour = meta.start.hour() as f64;

    for hour in 1..=meta.hours {
        if control.aborted() {
            return Err(ModelError::AbortRequested {
                completed_hours: hour - 1,
            });
        }
        let prev = if hour == 1 { &initial } else { &input.records[hour as usize - 2] };
        let cur = &input.records[hour as usize - 1];
        let flow = Flow {
            u: 0.5 * (prev.u + cur.u),
            v: 0.5 * (prev.v + cur.v),
            amplitude: 0.5 * (prev.amplitude + cur.amplitude),
            phase_x: 0.5 * (prev.phase_x + cur.phase_x),
            phase_y: 0.5 * (prev.phase_y + cur.phase_y),
        };
        for pos in 0..runs.len() {
            let (done, rest) = runs.split_at_mut(pos);
            let dr = &mut rest[0];
            let parent = dr.parent_pos.map(|p| &done[p]);
            let frame = step_domain(run_id, hour, start_hour, dr, parent, prev, cur, &flow, &coeffs)?;
            sink.write_frame(&frame)?;
        }
        if hour < meta.hours {
            control.pace();
        }
    }
    Ok(meta.hours)
}

#[allow(clippy::too_many_arguments)]
fn step_domain(
    run_id: u64,
    hour: u32,
    start_hour: f64,
    dr: &mut DomainRun,
    parent: Option<&DomainRun>,
    prev: &BoundaryRecord,
    cur: &BoundaryRecord,
    flow: &Flow,
    coeffs: &Coefficients,
) -> Result<FieldFrame, ModelError> {
    let d = dr.spec.clone();
    let [u, v, ul, vl] = dr.winds(flow, coeffs);
    let conv = divergence(&ul, &vl, d.resolution_m, d.resolution_m).map(|x| (-1e5 * x).max(0.0));
    let courant = |w: &Grid<f64>| w.map(|x| (x * SUBSTEP_SECONDS / d.resolution_m).clamp(-MAX_COURANT, MAX_COURANT));
    let (cu, cv) = (courant(&ul), courant(&vl));
    let dt_h = 1.0 / SUBSTEPS as f64;

    // Surface temperature for this hour.
    let surface = Grid::from_fn(d.nx, d.ny, |i, j| {
        let (lon, _) = d.frac_to_lonlat(i as f64, j as f64);
        let solar = start_hour + hour as f64 - 0.5 + lon / 15.0;
        22.0 + 6.0 * (TAU * (solar - 9.0) / 24.0).sin() - 0.0065 * dr.terrain.get(i, j) + 1.5 * dr.land.get(i, j)
    });

    dr.start_humidity = dr.humidity.clone();
    dr.start_temperature = dr.temperature.clone();

    // Child boundary points in parent index space.
    let parent_pts: Vec<(f64, f64)> = match parent {
        Some(_) => {
            let r = d.nesting_ratio as f64;
            dr.boundary
                .iter()
                .map(|&(i, j)| (d.parent_i_off as f64 + i as f64 / r, d.parent_j_off as f64 + j as f64 / r))
                .collect()
        }
        None => Vec::new(),
    };

    for s in 0..SUBSTEPS {
        let w = (s + 1) as f64 / SUBSTEPS as f64;
        let mut h = advect_diffuse(&dr.humidity, &cu, &cv, coeffs.diffusion);
        let mut t = advect_diffuse(&dr.temperature, &cu, &cv, coeffs.diffusion);
        for k in 0..h.len() {
            let land = dr.land.data[k];
            let source = coeffs.evaporation * dr.soil.data[k] * land
                + 0.01 * (1.0 - land)
                + coeffs.convective_moistening * conv.data[k]
                - 0.03 * (h.data[k] - 0.75);
            h.data[k] += dt_h * source;
            t.data[k] += dt_h * coeffs.surface_relax * (surface.data[k] - t.data[k]);
        }
        match parent {
            None => {
                for (n, &(i, j)) in dr.boundary.iter().enumerate() {
                    h.set(i, j, lerp(prev.humidity[n], cur.humidity[n], w));
                    t.set(i, j, lerp(prev.temperature[n], cur.temperature[n], w));
                }
            }
            Some(p) => {
                for (&(i, j), &(fi, fj)) in dr.boundary.iter().zip(&parent_pts) {
                    let h0 = bilinear(&p.start_humidity, fi, fj);
                    let h1 = bilinear(&p.humidity, fi, fj);
                    let t0 = bilinear(&p.start_temperature, fi, fj);
                    let t1 = bilinear(&p.temperature, fi, fj);
                    h.set(i, j, lerp(h0, h1, w));
                    t.set(i, j, lerp(t0, t1, w));
                }
            }
        }
        dr.humidity = h;
        dr.temperature = t;
    }

    let state = ModelState {
        humidity: dr.humidity.clone(),
        temperature: dr.temperature.clone(),
        u,
        v,
        u_low: ul,
        v_low: vl,
        dx: d.resolution_m,
        dy: d.resolution_m,
    };
    let fields = derive_fields(&state, coeffs);
    for k in 0..dr.humidity.len() {
        let excess = (dr.humidity.data[k] - 1.0).max(0.0);
        dr.humidity.data[k] -= coeffs.rainout * excess;
    }
    let finite = |g: &Grid<f64>| g.data.iter().all(|x| x.is_finite());
    let grids = fields.into_grids();
    if !finite(&dr.humidity) || !finite(&dr.temperature) || !grids.iter().all(finite) {
        return Err(ModelError::NumericFailure {
            domain_id: d.domain_id,
            hour,
        });
    }
    let grids: Vec<Grid<f32>> = grids
        .iter()
        .enumerate()
        .map(|(k, g)| if k == 0 { g.map(quantize_precip) } else { g.map(|x| x as f32) })
        .collect();
    Ok(FieldFrame {
        run_id,
        domain_id: d.domain_id,
        step_hour: hour,
        nx: d.nx,
        ny: d.ny,
        grids,
    })
}
