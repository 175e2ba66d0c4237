pub mod bench;
pub mod coarse;
pub mod error;
pub mod geom;
pub mod idgmm;
pub mod metrics;
pub mod raster;
pub mod session;
pub mod strokes;
pub mod suggest;
pub mod verify;

pub use error::{Error, Result};
