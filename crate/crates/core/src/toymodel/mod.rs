//! Deterministic stand-in for the preprocessing and forecast programs.

pub mod frame;
pub mod icbc;
pub mod model;
mod physics;
pub mod stages;

pub use frame::{Field, FieldFrame, FrameError};
pub use icbc::{generate_icbc, IcbcError, IcbcSeries};
pub use model::{derive_fields, run_model, DirSink, FrameSink, ModelError, ModelState, RunControl};
pub use physics::{
    Coefficients, Cumulus, IcbcSource, LandSurface, Microphysics, Pbl, PhysicsSelection, SurfaceLayer,
};
