//! Compiles sensor patterns into DIW toolpaths and lays out the tray-based
//! fabrication sequence.
//!
//! Geometry is produced first as a list of [`Stroke`]s (continuous printed
//! polylines), bounds-checked against the tray, then emitted as G-code with
//! volumetric extrusion:
//!
//! ```text
//! E = segment_length · line_width · ink_layer_height / syringe_area
//! ```

mod emit;
mod pattern;
mod plan;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::gcode::{GCodeProgram, MachineConfig};
use crate::sensor::{CircularElectrode, SensorError, SensorSpec, SerpentinePattern};

pub use pattern::{electrode_strokes, serpentine_strokes, Feature, Stroke};
pub use plan::{emit_fabrication_plan, CureSchedule, FabricationPlan, FabricationStep};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ToolpathError {
    #[error("invalid print parameters: {0}")]
    InvalidParams(String),
    #[error("pattern exceeds the printable tray area: {0}")]
    Bounds(String),
    #[error(
        "electrode diameter {diameter_mm} mm is smaller than the fill spacing {spacing_mm} mm"
    )]
    EmptyFill { diameter_mm: f64, spacing_mm: f64 },
    #[error("fabrication plan error: {0}")]
    Plan(String),
    #[error(transparent)]
    Sensor(#[from] SensorError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrintParams {
    pub line_width_mm: f64,
    pub infill_pct: f64,
    pub wall_line_count: u32,
    pub print_speed_mm_s: f64,
    pub retraction_enabled: bool,
    pub retraction_mm_e: f64,
    pub nozzle_inner_diameter_mm: f64,
    pub syringe_inner_diameter_mm: f64,
    pub ink_layer_height_mm: f64,
    pub travel_speed_mm_s: f64,
    /// Nozzle lift for travel moves above the cured surface.
    pub z_hop_mm: f64,
    /// Tray centre on the print bed.
    pub tray_center_mm: [f64; 2],
    /// Bed height of the tray floor.
    pub tray_floor_z_mm: f64,
}

impl Default for PrintParams {
    fn default() -> Self {
        Self {
            line_width_mm: 0.515,
            infill_pct: 100.0,
            wall_line_count: 0,
            print_speed_mm_s: 5.0,
            retraction_enabled: true,
            retraction_mm_e: 0.5,
            nozzle_inner_diameter_mm: 0.515,
            syringe_inner_diameter_mm: 12.0,
            ink_layer_height_mm: 0.15,
            travel_speed_mm_s: 30.0,
            z_hop_mm: 1.0,
            tray_center_mm: [175.0, 175.0],
            tray_floor_z_mm: 0.0,
        }
    }
}

impl PrintParams {
    pub fn validate(&self) -> Result<(), ToolpathError> {
        let positive = [
            ("line_width_mm", self.line_width_mm),
            ("print_speed_mm_s", self.print_speed_mm_s),
            ("nozzle_inner_diameter_mm", self.nozzle_inner_diameter_mm),
            ("syringe_inner_diameter_mm", self.syringe_inner_diameter_mm),
            ("ink_layer_height_mm", self.ink_layer_height_mm),
            ("travel_speed_mm_s", self.travel_speed_mm_s),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ToolpathError::InvalidParams(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.infill_pct > 0.0 && self.infill_pct <= 100.0) {
            return Err(ToolpathError::InvalidParams(format!(
                "infill_pct must lie in (0, 100], got {}",
                self.infill_pct
            )));
        }
        if self.wall_line_count != 0 {
            return Err(ToolpathError::InvalidParams(
                "only wall_line_count = 0 is supported".into(),
            ));
        }
        if (self.line_width_mm - self.nozzle_inner_diameter_mm).abs() > 1e-9 {
            return Err(ToolpathError::InvalidParams(format!(
                "line_width_mm {} must match nozzle_inner_diameter_mm {}",
                self.line_width_mm, self.nozzle_inner_diameter_mm
            )));
        }
        if self.retraction_enabled && !(self.retraction_mm_e > 0.0) {
            return Err(ToolpathError::InvalidParams(
                "retraction_mm_e must be positive when retraction is enabled".into(),
            ));
        }
        if !(self.z_hop_mm >= 0.0) {
            return Err(ToolpathError::InvalidParams(
                "z_hop_mm must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn syringe_area_mm2(&self) -> f64 {
        let r = self.syringe_inner_diameter_mm / 2.0;
        std::f64::consts::PI * r * r
    }

    /// Piston travel that deposits a bead of `length_mm`.
    pub fn extrusion_for(&self, length_mm: f64) -> f64 {
        length_mm * self.line_width_mm * self.ink_layer_height_mm / self.syringe_area_mm2()
    }

    /// Spacing between infill lines.
    pub fn fill_spacing_mm(&self) -> f64 {
        self.line_width_mm * 100.0 / self.infill_pct
    }

    pub fn machine(&self) -> MachineConfig {
        MachineConfig {
            syringe_inner_diameter_mm: self.syringe_inner_diameter_mm,
            ink_layer_height_mm: self.ink_layer_height_mm,
            ..MachineConfig::default()
        }
    }
}

/// Printable rectangle of a tray, axis-aligned on the bed. `size_mm` is
/// (x extent, y extent); strain runs along y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tray {
    pub center_mm: [f64; 2],
    pub size_mm: [f64; 2],
}

impl Tray {
    pub fn for_spec(spec: &SensorSpec, params: &PrintParams) -> Self {
        Self {
            center_mm: params.tray_center_mm,
            size_mm: spec.footprint_mm,
        }
    }

    pub fn contains(&self, p: [f64; 2], margin: f64) -> bool {
        (0..2).all(|i| {
            let half = self.size_mm[i] / 2.0 - margin;
            (p[i] - self.center_mm[i]).abs() <= half + 1e-9
        })
    }
}

/// Where one ink layer is printed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrintFrame {
    pub tray: Tray,
    /// Bed height of the cured silicone surface the ink is printed on.
    pub surface_z_mm: f64,
    /// 1-based ink layer index.
    pub layer: usize,
}

impl PrintFrame {
    pub fn new(tray: Tray, surface_z_mm: f64, layer: usize) -> Self {
        Self {
            tray,
            surface_z_mm,
            layer,
        }
    }
}

/// Hex digest (16 chars) of a serializable value.
pub(crate) fn digest<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("serializable");
    let hash = Sha256::digest(&json);
    hex::encode(&hash[..8])
}

/// Compiles the resistive strain-gauge pattern: pad, serpentine trace, pad.
pub fn compile_serpentine(
    pattern: &SerpentinePattern,
    params: &PrintParams,
    frame: &PrintFrame,
) -> Result<GCodeProgram, ToolpathError> {
    pattern.validate()?;
    params.validate()?;
    let strokes = serpentine_strokes(pattern, params, frame.tray.center_mm);
    check_bounds(&strokes, params, frame)?;
    let hash = digest(&(pattern, params, frame));
    Ok(emit::emit_strokes(
        &strokes,
        params,
        frame,
        "serpentine",
        &hash,
    ))
}

/// Compiles a grid-filled circular electrode with its lead line.
pub fn compile_electrode(
    electrode: &CircularElectrode,
    params: &PrintParams,
    frame: &PrintFrame,
) -> Result<GCodeProgram, ToolpathError> {
    electrode.validate()?;
    params.validate()?;
    let strokes = electrode_strokes(electrode, params, frame.tray.center_mm, frame.layer)?;
    check_bounds(&strokes, params, frame)?;
    let hash = digest(&(electrode, params, frame));
    Ok(emit::emit_strokes(
        &strokes,
        params,
        frame,
        "circular_electrode",
        &hash,
    ))
}

/// Compiles whichever pattern the sensor spec carries for one ink layer.
pub fn compile_spec_layer(
    spec: &SensorSpec,
    params: &PrintParams,
    frame: &PrintFrame,
) -> Result<GCodeProgram, ToolpathError> {
    match &spec.pattern {
        crate::sensor::Pattern::Serpentine(p) => compile_serpentine(p, params, frame),
        crate::sensor::Pattern::CircularElectrode(e) => compile_electrode(e, params, frame),
    }
}

fn check_bounds(
    strokes: &[Stroke],
    params: &PrintParams,
    frame: &PrintFrame,
) -> Result<(), ToolpathError> {
    let margin = params.line_width_mm / 2.0;
    for stroke in strokes {
        if let Some(p) = stroke
            .points
            .iter()
            .find(|p| !frame.tray.contains(**p, margin))
        {
            return Err(ToolpathError::Bounds(format!(
                "{} point ({:.3}, {:.3}) lies outside the {}x{} mm tray",
                stroke.feature.tag(),
                p[0],
                p[1],
                frame.tray.size_mm[0],
                frame.tray.size_mm[1]
            )));
        }
    }
    Ok(())
}
