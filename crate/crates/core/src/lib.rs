//! Simulation of rolling-shutter fringe attacks driven by a modulated LED lamp.
//!
//! The pipeline runs `signal` (lamp waveform) -> `sensor` (row-wise exposure
//! into a gain pattern) -> `perturb` (fringe geometry <-> lamp drive), with
//! `detector`, `attack` and `defense` built on top and `io` for codecs,
//! synthetic faces and reports.

pub mod attack;
pub mod defense;
pub mod detector;
pub mod io;
pub mod perturb;
pub mod sensor;
pub mod signal;

pub use io::{Channels, Image};
pub use perturb::PerturbationParams;
pub use sensor::{Pattern, SensorConfig};
pub use signal::PulseParams;
