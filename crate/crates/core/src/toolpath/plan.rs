use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{compile_spec_layer, digest, PrintFrame, PrintParams, ToolpathError, Tray};
use crate::gcode::{self, GCodeProgram};
use crate::sensor::{SensorError, SensorKind, SensorSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CureSchedule {
    pub temp_c: f64,
    pub minutes: f64,
}

impl Default for CureSchedule {
    fn default() -> Self {
        Self {
            temp_c: 45.0,
            minutes: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum FabricationStep {
    /// Place tray `index` (0 = base mould) onto the stack.
    StackTray {
        index: usize,
    },
    PourSilicone {
        layer: usize,
        thickness_mm: f64,
    },
    Cure {
        temp_c: f64,
        minutes: f64,
    },
    /// Print ink layer `layer` (1-based) on the cured surface.
    PrintInk {
        layer: usize,
        surface_z_mm: f64,
        #[serde(with = "program_text")]
        program: GCodeProgram,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FabricationPlan {
    pub sensor_id: String,
    pub kind: SensorKind,
    pub spec_hash: String,
    pub total_thickness_mm: f64,
    pub steps: Vec<FabricationStep>,
}

impl FabricationPlan {
    pub fn poured_thickness_mm(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| match s {
                FabricationStep::PourSilicone { thickness_mm, .. } => *thickness_mm,
                _ => 0.0,
            })
            .sum()
    }

    pub fn print_steps(&self) -> impl Iterator<Item = (usize, &GCodeProgram)> {
        self.steps.iter().filter_map(|s| match s {
            FabricationStep::PrintInk { layer, program, .. } => Some((*layer, program)),
            _ => None,
        })
    }

    pub fn ink_layer_count(&self) -> usize {
        self.print_steps().count()
    }

    /// Checks the sequencing invariants: every print follows a cure and the
    /// poured silicone adds up to the declared thickness.
    pub fn check(&self) -> Result<(), ToolpathError> {
        for (i, step) in self.steps.iter().enumerate() {
            if matches!(step, FabricationStep::PrintInk { .. })
                && !matches!(
                    i.checked_sub(1).map(|j| &self.steps[j]),
                    Some(FabricationStep::Cure { .. })
                )
            {
                return Err(ToolpathError::Plan(format!(
                    "print step {i} is not preceded by a cure"
                )));
            }
        }
        let poured = self.poured_thickness_mm();
        if (poured - self.total_thickness_mm).abs() > 1e-9 {
            return Err(ToolpathError::Plan(format!(
                "poured {poured} mm but declared {} mm",
                self.total_thickness_mm
            )));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String, toml::ser::Error> {
        toml::to_string(self)
    }
}

/// Lays out the tray sequence: for each silicone layer stack a tray, pour,
/// cure, and print ink on it while ink prints remain. Capacitive sensors get
/// two prints, resistive one.
pub fn emit_fabrication_plan(
    spec: &SensorSpec,
    params: &PrintParams,
    cure: &CureSchedule,
) -> Result<FabricationPlan, ToolpathError> {
    spec.validate().map_err(|e| match e {
        SensorError::InvalidStack(msg) => ToolpathError::Plan(msg),
        other => ToolpathError::Sensor(other),
    })?;
    let prints = spec.kind.ink_prints();
    let layers = &spec.stack.layer_thicknesses_mm;
    if layers.len() <= prints {
        return Err(ToolpathError::Plan(format!(
            "{} layers cannot encapsulate {prints} ink prints",
            layers.len()
        )));
    }

    let tray = Tray::for_spec(spec, params);
    let mut steps = Vec::new();
    let mut surface_z = params.tray_floor_z_mm;
    for (index, &thickness) in layers.iter().enumerate() {
        steps.push(FabricationStep::StackTray { index });
        steps.push(FabricationStep::PourSilicone {
            layer: index,
            thickness_mm: thickness,
        });
        steps.push(FabricationStep::Cure {
            temp_c: cure.temp_c,
            minutes: cure.minutes,
        });
        surface_z += thickness;
        if index < prints {
            let frame = PrintFrame::new(tray, surface_z, index + 1);
            let program = compile_spec_layer(spec, params, &frame)?;
            steps.push(FabricationStep::PrintInk {
                layer: index + 1,
                surface_z_mm: surface_z,
                program,
            });
        }
    }

    let plan = FabricationPlan {
        sensor_id: spec.id.clone(),
        kind: spec.kind,
        spec_hash: digest(&(spec, params)),
        total_thickness_mm: spec.stack.total_thickness_mm,
        steps,
    };
    plan.check()?;
    Ok(plan)
}

mod program_text {
    use super::*;

    pub fn serialize<S: Serializer>(p: &GCodeProgram, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&p.emit())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<GCodeProgram, D::Error> {
        let text = String::deserialize(d)?;
        gcode::parse(&text).map_err(serde::de::Error::custom)
    }
}
