//! Workbench for printed stretchable strain sensors.
//!
//! The pipeline runs from a parametric sensor design to characterization
//! metrics:
//!
//! * [`sensor`]: geometry, materials and forward electrical models;
//! * [`toolpath`]: DIW G-code compilation and the tray fabrication plan;
//! * [`gcode`]: parser, canonical emitter and virtual printer;
//! * [`experiment`]: cyclic, strain-to-failure and repeatability protocols
//!   against simulated instruments;
//! * [`analysis`]: hysteresis, gauge factor, linearity, stretchability and
//!   zero-value statistics.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod experiment;
pub mod format;
pub mod gcode;
pub mod sensor;
pub mod stats;
pub mod toolpath;
