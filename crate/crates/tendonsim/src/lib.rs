//! Simulation of a four-tendon shoulder sensing rig.
//!
//! A ball-and-socket shoulder with two measured degrees of freedom (azimuth
//! and elevation of the upper arm) carries four artificial tendons, front,
//! side-front, side-rear, and rear. Each tendon runs from a torso anchor over
//! the joint sphere to points on the humerus; arm motion changes every path
//! length, and the four length deltas are what the sensors report.
//!
//! The crate covers the full pipeline:
//!
//! * [`geometry`]: the two-angle shoulder model and its rigid transforms;
//! * [`tendon`]: routing layouts and path length under three policies
//!   (polyline, natural cubic spline, sphere wrapping);
//! * [`sensor`]: length deltas against the hanging neutral pose, plus an
//!   emulation chain with noise, backlash, clamping, and ADC quantization;
//! * [`motion`]: the five-movement calibration protocol;
//! * [`mapping`]: seeded MLP training for inverse (deltas to angles) and
//!   forward (angles to deltas) maps;
//! * [`evaluation`]: monotonicity screening, surface sampling, sensor-subset
//!   ablation, and hysteresis characterization;
//! * [`io`]: dataset CSV files and the TOML run configuration;
//! * [`batch`]: data-parallel pose batches (rayon, behind the default
//!   `parallel` feature) with an identical sequential fallback;
//! * [`cli`]: the `tendonsim` command-line front end.
//!
//! Every random choice is driven by seeds in the configuration, so any run
//! can be reproduced bit for bit.

pub mod batch;
pub mod cli;
pub mod evaluation;
pub mod geometry;
pub mod io;
pub mod mapping;
pub mod motion;
pub mod sensor;
pub mod tendon;

pub use geometry::{JointPose, ShoulderModel};
pub use mapping::{Direction, TrainConfig, TrainedModel};
pub use sensor::{SensorEmulation, SensorFrame};
pub use tendon::{PathPolicy, TendonLayout};
