//! Physics scheme catalogs and the surrogate coefficients each scheme selects.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Microphysics {
    Kessler,
    Lin,
    #[serde(rename = "WSM6")]
    Wsm6,
    Thompson,
    Morrison,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Cumulus {
    #[serde(rename = "KF")]
    Kf,
    #[serde(rename = "BMJ")]
    Bmj,
    Grell,
    Tiedtke,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LandSurface {
    Noah,
    #[serde(rename = "RUC")]
    Ruc,
    NoahMP,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SurfaceLayer {
    #[serde(rename = "MM5")]
    Mm5,
    Eta,
    #[serde(rename = "RevisedMM5")]
    RevisedMm5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pbl {
    #[serde(rename = "YSU")]
    Ysu,
    #[serde(rename = "MYJ")]
    Myj,
    #[serde(rename = "MYNN")]
    Mynn,
    #[serde(rename = "ACM2")]
    Acm2,
}

impl Microphysics {
    pub const ALL: [Self; 5] = [Self::Kessler, Self::Lin, Self::Wsm6, Self::Thompson, Self::Morrison];
}
impl Cumulus {
    pub const ALL: [Self; 4] = [Self::Kf, Self::Bmj, Self::Grell, Self::Tiedtke];
}
impl LandSurface {
    pub const ALL: [Self; 3] = [Self::Noah, Self::Ruc, Self::NoahMP];
}
impl SurfaceLayer {
    pub const ALL: [Self; 3] = [Self::Mm5, Self::Eta, Self::RevisedMm5];
}
impl Pbl {
    pub const ALL: [Self; 4] = [Self::Ysu, Self::Myj, Self::Mynn, Self::Acm2];
}

/// One scheme per parameterized process. Catalog membership is enforced by
/// the enums, so any deserialized value is valid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhysicsSelection {
    pub microphysics: Microphysics,
    pub cumulus: Cumulus,
    pub land_surface: LandSurface,
    pub surface_layer: SurfaceLayer,
    pub pbl: Pbl,
}

impl Default for PhysicsSelection {
    fn default() -> Self {
        Self {
            microphysics: Microphysics::Wsm6,
            cumulus: Cumulus::Kf,
            land_surface: LandSurface::Noah,
            surface_layer: SurfaceLayer::Mm5,
            pbl: Pbl::Ysu,
        }
    }
}

/// Source of initial and boundary conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IcbcSource {
    #[serde(rename = "GFS")]
    Gfs,
    #[serde(rename = "ECMWF")]
    Ecmwf,
    #[serde(rename = "SYNTH-A")]
    SynthA,
    #[serde(rename = "SYNTH-B")]
    SynthB,
}

impl IcbcSource {
    pub const ALL: [Self; 4] = [Self::Gfs, Self::Ecmwf, Self::SynthA, Self::SynthB];

    pub fn name(self) -> &'static str {
        match self {
            Self::Gfs => "GFS",
            Self::Ecmwf => "ECMWF",
            Self::SynthA => "SYNTH-A",
            Self::SynthB => "SYNTH-B",
        }
    }

    /// Background humidity fraction around which the source's fields vary.
    pub(crate) fn base_humidity(self) -> f64 {
        match self {
            Self::Gfs => 0.86,
            Self::Ecmwf => 0.84,
            Self::SynthA => 0.72,
            Self::SynthB => 0.92,
        }
    }
}

impl std::fmt::Display for IcbcSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Surrogate coefficients derived from a [`PhysicsSelection`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    /// mm of rain per unit of saturation excess.
    pub precip_gain: f64,
    /// Fraction of saturation excess removed after it rains.
    pub rainout: f64,
    /// Moistening per hour per unit of low-level convergence (1e-5/s).
    pub convective_moistening: f64,
    /// Hourly evaporation from saturated soil.
    pub evaporation: f64,
    /// Initial soil moisture on land.
    pub soil_init: f64,
    /// Hourly relaxation of 2 m temperature toward the surface temperature.
    pub surface_relax: f64,
    /// Terrain forcing of the low-level wind (m/s per unit slope).
    pub terrain_forcing: f64,
    /// Grid-unit diffusion per substep.
    pub diffusion: f64,
    /// Scales the synoptic divergence pattern.
    pub flow_gain: f64,
}

impl Coefficients {
    pub fn from_physics(p: &PhysicsSelection) -> Self {
        let (precip_gain, rainout) = match p.microphysics {
            Microphysics::Kessler => (120.0, 0.60),
            Microphysics::Lin => (145.0, 0.70),
            Microphysics::Wsm6 => (135.0, 0.75),
            Microphysics::Thompson => (165.0, 0.80),
            Microphysics::Morrison => (150.0, 0.65),
        };
        let convective_moistening = match p.cumulus {
            Cumulus::Kf => 0.0030,
            Cumulus::Bmj => 0.0020,
            Cumulus::Grell => 0.0025,
            Cumulus::Tiedtke => 0.0035,
        };
        let (evaporation, soil_init) = match p.land_surface {
            LandSurface::Noah => (0.020, 0.80),
            LandSurface::Ruc => (0.015, 0.70),
            LandSurface::NoahMP => (0.025, 0.90),
        };
        let (surface_relax, terrain_forcing) = match p.surface_layer {
            SurfaceLayer::Mm5 => (0.10, 400.0),
            SurfaceLayer::Eta => (0.08, 320.0),
            SurfaceLayer::RevisedMm5 => (0.12, 480.0),
        };
        let (diffusion, flow_gain) = match p.pbl {
            Pbl::Ysu => (0.10, 1.00),
            Pbl::Myj => (0.06, 0.90),
            Pbl::Mynn => (0.08, 1.10),
            Pbl::Acm2 => (0.12, 0.95),
        };
        Self {
            precip_gain,
            rainout,
            convective_moistening,
            evaporation,
            soil_init,
            surface_relax,
            terrain_forcing,
            diffusion,
            flow_gain,
        }
    }
}
