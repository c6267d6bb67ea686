//! Nested simulation domains and the lat/lon placement of their grid points.
//!
//! Grid points are placed on an equirectangular lattice: the latitude step is
//! `resolution_m / 111 320` degrees and the longitude step is the latitude
//! step divided by the cosine of the nest's reference latitude. For a root
//! domain the reference latitude is its own center latitude; children inherit
//! it from their parent so that every child point coincides with a parent
//! point (or a rational subdivision of a parent cell).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Meters per degree of latitude.
pub const METERS_PER_DEGREE: f64 = 111_320.0;
/// Minimum number of grid points along each axis.
pub const MIN_POINTS: usize = 10;
/// Parent cells that must separate a child from every parent edge.
pub const NEST_MARGIN_CELLS: i64 = 5;
/// Nesting ratio used when the caller has no preference.
pub const DEFAULT_NESTING_RATIO: u32 = 3;

// Fractional-cell tolerance used when snapping brush corners.
const SNAP_EPS: f64 = 1e-6;
// Degrees of slack when checking that a child's center matches its offsets.
const ALIGN_EPS_DEG: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid rectangle: {0}")]
    InvalidRect(String),
    #[error("brush does not intersect the parent domain")]
    BrushOutsideParent,
    #[error("snapped child breaches the {NEST_MARGIN_CELLS}-cell margin of its parent")]
    MarginViolation,
    #[error("snapped child has {nx}x{ny} points, fewer than {MIN_POINTS} along an axis")]
    TooSmall { nx: usize, ny: usize },
    #[error("nesting ratio must be >= 2, got {0}")]
    InvalidRatio(u32),
    #[error("grid index ({i}, {j}) outside {nx}x{ny}")]
    IndexOutOfRange { i: i64, j: i64, nx: usize, ny: usize },
}

/// Axis-aligned lat/lon rectangle in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoRect {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl GeoRect {
    pub fn new(min_lon: f64, min_lat: f64, max_lon: f64, max_lat: f64) -> Result<Self, GridError> {
        let r = Self {
            min_lon,
            min_lat,
            max_lon,
            max_lat,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        let vals = [self.min_lon, self.min_lat, self.max_lon, self.max_lat];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(GridError::InvalidRect("non-finite coordinate".into()));
        }
        if !(self.min_lon < self.max_lon && self.min_lat < self.max_lat) {
            return Err(GridError::InvalidRect("min must be below max".into()));
        }
        if self.min_lat < -90.0 || self.max_lat > 90.0 {
            return Err(GridError::InvalidRect("latitude outside [-90, 90]".into()));
        }
        if self.min_lon < -180.0 || self.max_lon > 180.0 {
            return Err(GridError::InvalidRect("longitude outside [-180, 180]".into()));
        }
        Ok(())
    }

    fn intersects_interior(&self, other: &GeoRect) -> bool {
        self.min_lon < other.max_lon
            && other.min_lon < self.max_lon
            && self.min_lat < other.max_lat
            && other.min_lat < self.max_lat
    }
}

/// One simulation grid, possibly nested in a parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub domain_id: u32,
    /// `0` for the root.
    pub parent_id: u32,
    pub resolution_m: f64,
    pub center_lon: f64,
    pub center_lat: f64,
    pub nx: usize,
    pub ny: usize,
    #[serde(default)]
    pub parent_i_off: i64,
    #[serde(default)]
    pub parent_j_off: i64,
    /// `0` for the root.
    #[serde(default)]
    pub nesting_ratio: u32,
    /// Latitude whose cosine scales longitude steps. Absent on roots, where
    /// the center latitude is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ref_lat: Option<f64>,
}

impl DomainSpec {
    pub fn root(resolution_m: f64, center_lon: f64, center_lat: f64, nx: usize, ny: usize) -> Self {
        Self {
            domain_id: 1,
            parent_id: 0,
            resolution_m,
            center_lon,
            center_lat,
            nx,
            ny,
            parent_i_off: 0,
            parent_j_off: 0,
            nesting_ratio: 0,
            ref_lat: None,
        }
    }

    pub fn is_root(&self) -> bool {
        self.parent_id == 0
    }

    pub fn with_id(mut self, domain_id: u32) -> Self {
        self.domain_id = domain_id;
        self
    }

    pub fn ref_lat(&self) -> f64 {
        self.ref_lat.unwrap_or(self.center_lat)
    }

    pub fn lat_step(&self) -> f64 {
        self.resolution_m / METERS_PER_DEGREE
    }

    pub fn lon_step(&self) -> f64 {
        self.lat_step() / self.ref_lat().to_radians().cos()
    }

    /// Lon/lat of the `(0, 0)` grid point.
    pub fn origin(&self) -> (f64, f64) {
        self.frac_to_lonlat(0.0, 0.0)
    }

    /// Maps a fractional grid coordinate to lon/lat without range checks.
    pub fn frac_to_lonlat(&self, fi: f64, fj: f64) -> (f64, f64) {
        let ci = (self.nx as f64 - 1.0) / 2.0;
        let cj = (self.ny as f64 - 1.0) / 2.0;
        (
            self.center_lon + (fi - ci) * self.lon_step(),
            self.center_lat + (fj - cj) * self.lat_step(),
        )
    }

    /// Inverse of [`DomainSpec::frac_to_lonlat`].
    pub fn lonlat_to_frac(&self, lon: f64, lat: f64) -> (f64, f64) {
        let ci = (self.nx as f64 - 1.0) / 2.0;
        let cj = (self.ny as f64 - 1.0) / 2.0;
        (
            ci + (lon - self.center_lon) / self.lon_step(),
            cj + (lat - self.center_lat) / self.lat_step(),
        )
    }

    /// Rectangle spanned by the outermost grid points.
    pub fn geo_rect(&self) -> GeoRect {
        let (min_lon, min_lat) = self.frac_to_lonlat(0.0, 0.0);
        let (max_lon, max_lat) = self.frac_to_lonlat((self.nx - 1) as f64, (self.ny - 1) as f64);
        GeoRect {
            min_lon,
            min_lat,
            max_lon,
            max_lat,
        }
    }

    /// Number of parent cells spanned along each axis (children only).
    pub fn parent_extent(&self) -> Option<(i64, i64)> {
        if self.nesting_ratio == 0 {
            return None;
        }
        let r = self.nesting_ratio as usize;
        ((self.nx - 1).is_multiple_of(r) && (self.ny - 1).is_multiple_of(r))
            .then(|| (((self.nx - 1) / r) as i64, ((self.ny - 1) / r) as i64))
    }
}

/// Lon/lat of grid point `(i, j)`.
pub fn grid_to_lonlat(d: &DomainSpec, i: i64, j: i64) -> Result<(f64, f64), GridError> {
    if i < 0 || j < 0 || i as usize >= d.nx || j as usize >= d.ny {
        return Err(GridError::IndexOutOfRange {
            i,
            j,
            nx: d.nx,
            ny: d.ny,
        });
    }
    Ok(d.frac_to_lonlat(i as f64, j as f64))
}

/// Fractional grid coordinate of a lon/lat position.
pub fn lonlat_to_grid(d: &DomainSpec, lon: f64, lat: f64) -> (f64, f64) {
    d.lonlat_to_frac(lon, lat)
}

/// Builds a child of `parent` covering `brush`, growing the brush outward to
/// the nearest parent cell corners. The child gets `domain_id = parent + 1`;
/// use [`DomainSpec::with_id`] to renumber siblings.
pub fn snap_child_domain(parent: &DomainSpec, brush: &GeoRect, ratio: u32) -> Result<DomainSpec, GridError> {
    if ratio < 2 {
        return Err(GridError::InvalidRatio(ratio));
    }
    brush.validate()?;
    if !brush.intersects_interior(&parent.geo_rect()) {
        return Err(GridError::BrushOutsideParent);
    }
    let (lo_i, lo_j) = parent.lonlat_to_frac(brush.min_lon, brush.min_lat);
    let (hi_i, hi_j) = parent.lonlat_to_frac(brush.max_lon, brush.max_lat);
    let i0 = (lo_i + SNAP_EPS).floor() as i64;
    let j0 = (lo_j + SNAP_EPS).floor() as i64;
    let i1 = (hi_i - SNAP_EPS).ceil() as i64;
    let j1 = (hi_j - SNAP_EPS).ceil() as i64;
    // A brush thinner than the snapping tolerance still covers one cell.
    let i1 = i1.max(i0 + 1);
    let j1 = j1.max(j0 + 1);

    let r = ratio as i64;
    let nx = ((i1 - i0) * r + 1) as usize;
    let ny = ((j1 - j0) * r + 1) as usize;
    if nx < MIN_POINTS || ny < MIN_POINTS {
        return Err(GridError::TooSmall { nx, ny });
    }
    let max_i = parent.nx as i64 - 1 - NEST_MARGIN_CELLS;
    let max_j = parent.ny as i64 - 1 - NEST_MARGIN_CELLS;
    if i0 < NEST_MARGIN_CELLS || j0 < NEST_MARGIN_CELLS || i1 > max_i || j1 > max_j {
        return Err(GridError::MarginViolation);
    }
    let (center_lon, center_lat) = parent.frac_to_lonlat((i0 + i1) as f64 / 2.0, (j0 + j1) as f64 / 2.0);
    Ok(DomainSpec {
        domain_id: parent.domain_id + 1,
        parent_id: parent.domain_id,
        resolution_m: parent.resolution_m / ratio as f64,
        center_lon,
        center_lat,
        nx,
        ny,
        parent_i_off: i0,
        parent_j_off: j0,
        nesting_ratio: ratio,
        ref_lat: Some(parent.ref_lat()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    EmptyList,
    RootNotFirst,
    DuplicateId,
    UnknownParent,
    TooFewPoints,
    CoordinatesOutOfRange,
    NonPositiveResolution,
    RootHasNesting,
    RatioTooSmall,
    RatioNotIntegral,
    ExtentNotDivisible,
    MarginViolation,
    Misaligned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub domain_id: u32,
    pub kind: ViolationKind,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, domain_id: u32, kind: ViolationKind, message: impl Into<String>) {
        self.violations.push(Violation {
            domain_id,
            kind,
            message: message.into(),
        });
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

/// Checks every domain invariant and that parent ids form a tree rooted at
/// domain 1 with parents listed before their children.
pub fn validate_nesting(domains: &[DomainSpec]) -> ValidationReport {
    let mut report = ValidationReport::default();
    let Some(first) = domains.first() else {
        report.push(0, ViolationKind::EmptyList, "no domains");
        return report;
    };
    if first.domain_id != 1 || first.parent_id != 0 {
        report.push(first.domain_id, ViolationKind::RootNotFirst, "first domain must be root with id 1");
    }

    let mut seen: Vec<&DomainSpec> = Vec::with_capacity(domains.len());
    for (pos, d) in domains.iter().enumerate() {
        let id = d.domain_id;
        if d.domain_id == 0 || seen.iter().any(|s| s.domain_id == d.domain_id) {
            report.push(id, ViolationKind::DuplicateId, "domain ids must be unique and >= 1");
        }
        if d.nx < MIN_POINTS || d.ny < MIN_POINTS {
            report.push(
                id,
                ViolationKind::TooFewPoints,
                format!("{}x{} points, need at least {MIN_POINTS} per axis", d.nx, d.ny),
            );
        }
        if !(d.resolution_m.is_finite() && d.resolution_m > 0.0) {
            report.push(id, ViolationKind::NonPositiveResolution, "resolution must be positive");
        }
        if d.nx >= 2 && d.ny >= 2 && d.resolution_m > 0.0 {
            let rect = d.geo_rect();
            if rect.validate().is_err() || d.ref_lat().abs() >= 89.0 {
                report.push(id, ViolationKind::CoordinatesOutOfRange, "grid leaves the lat/lon range");
            }
        }

        if pos == 0 {
            if d.nesting_ratio != 0 || d.parent_i_off != 0 || d.parent_j_off != 0 {
                report.push(id, ViolationKind::RootHasNesting, "root carries nesting ratio or offsets");
            }
            seen.push(d);
            continue;
        }
        let Some(parent) = seen.iter().copied().find(|p| p.domain_id == d.parent_id) else {
            let kind = if d.parent_id == 0 {
                ViolationKind::RootNotFirst
            } else {
                ViolationKind::UnknownParent
            };
            report.push(id, kind, format!("parent {} not listed before this domain", d.parent_id));
            seen.push(d);
            continue;
        };
        check_child(parent, d, &mut report);
        seen.push(d);
    }
    report
}

fn check_child(parent: &DomainSpec, d: &DomainSpec, report: &mut ValidationReport) {
    let id = d.domain_id;
    if d.nesting_ratio < 2 {
        report.push(id, ViolationKind::RatioTooSmall, format!("nesting ratio {} < 2", d.nesting_ratio));
        return;
    }
    let ratio = d.nesting_ratio as f64;
    if d.resolution_m * ratio != parent.resolution_m {
        report.push(
            id,
            ViolationKind::RatioNotIntegral,
            format!(
                "resolution {} x ratio {} != parent resolution {}",
                d.resolution_m, d.nesting_ratio, parent.resolution_m
            ),
        );
    }
    let Some((ei, ej)) = d.parent_extent() else {
        report.push(
            id,
            ViolationKind::ExtentNotDivisible,
            format!("({}-1, {}-1) not divisible by ratio {}", d.nx, d.ny, d.nesting_ratio),
        );
        return;
    };
    let (i0, j0) = (d.parent_i_off, d.parent_j_off);
    if i0 < NEST_MARGIN_CELLS
        || j0 < NEST_MARGIN_CELLS
        || i0 + ei > parent.nx as i64 - 1 - NEST_MARGIN_CELLS
        || j0 + ej > parent.ny as i64 - 1 - NEST_MARGIN_CELLS
    {
        report.push(
            id,
            ViolationKind::MarginViolation,
            format!("child must stay {NEST_MARGIN_CELLS} parent cells inside the parent"),
        );
    }
    let (clon, clat) = parent.frac_to_lonlat(i0 as f64 + ei as f64 / 2.0, j0 as f64 + ej as f64 / 2.0);
    let ref_ok = (d.ref_lat() - parent.ref_lat()).abs() <= ALIGN_EPS_DEG;
    if !ref_ok || (clon - d.center_lon).abs() > ALIGN_EPS_DEG || (clat - d.center_lat).abs() > ALIGN_EPS_DEG {
        report.push(
            id,
            ViolationKind::Misaligned,
            "center does not match the parent offsets".to_string(),
        );
    }
}
