use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Command, GCodeProgram, Line, Opcode, FEATURE_TAG};

/// Physical parameters of the virtual printer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MachineConfig {
    /// Build volume (x, y, z) in mm, origin at the home position.
    pub envelope_mm: [f64; 3],
    pub syringe_inner_diameter_mm: f64,
    pub ink_layer_height_mm: f64,
}

impl Default for MachineConfig {
    fn default() -> Self {
        Self {
            envelope_mm: [350.0, 350.0, 400.0],
            syringe_inner_diameter_mm: 12.0,
            ink_layer_height_mm: 0.15,
        }
    }
}

impl MachineConfig {
    /// Piston cross-section in mm²; one mm of E displaces this volume.
    pub fn syringe_area_mm2(&self) -> f64 {
        let r = self.syringe_inner_diameter_mm / 2.0;
        PI * r * r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineState {
    pub position: [f64; 3],
    pub extruder_e: f64,
    pub feed_rate: Option<f64>,
    pub absolute_xyz: bool,
    pub relative_e: bool,
    /// Piston travel withdrawn by retraction and not yet primed back.
    pub retracted_e: f64,
}

impl Default for MachineState {
    fn default() -> Self {
        Self {
            position: [0.0; 3],
            extruder_e: 0.0,
            feed_rate: None,
            absolute_xyz: true,
            relative_e: false,
            retracted_e: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepositedSegment {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub z: f64,
    pub volume_mm3: f64,
    pub implied_line_width_mm: f64,
    pub feature: String,
    /// 1-based source line.
    pub line: usize,
}

impl DepositedSegment {
    pub fn length_mm(&self) -> f64 {
        (self.end[0] - self.start[0]).hypot(self.end[1] - self.start[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    OutOfBounds,
    ExtrudeWithoutMotion,
    NegativeFeed,
    MissingFeed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub line: usize,
    pub kind: ViolationKind,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub length_mm: f64,
    pub volume_mm3: f64,
    pub time_s: f64,
    pub segments: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub commands: usize,
    pub deposited_length_mm: f64,
    pub deposited_volume_mm3: f64,
    /// Sum of positive E on depositing (XY) moves.
    pub deposited_e_mm: f64,
    pub travel_length_mm: f64,
    pub print_time_s: f64,
    pub retracted_e_mm: f64,
    pub primed_e_mm: f64,
    pub features: BTreeMap<String, FeatureStats>,
    pub final_position: [f64; 3],
    pub violations: Vec<Violation>,
}

const UNTAGGED: &str = "untagged";
const MOTION_EPS_MM: f64 = 1e-9;
const PRIME_EPS_MM: f64 = 1e-9;

/// Runs a program on the virtual printer. Never fails: defects are
/// collected as violations in the report.
pub fn execute(
    program: &GCodeProgram,
    config: &MachineConfig,
) -> (Vec<DepositedSegment>, ExecutionReport) {
    let mut vm = Vm {
        config,
        state: MachineState::default(),
        feature: UNTAGGED.to_owned(),
        segments: Vec::new(),
        report: ExecutionReport::default(),
    };
    for (idx, line) in program.lines.iter().enumerate() {
        let lineno = idx + 1;
        match line {
            Line::Comment(text) => vm.comment(text),
            Line::Command { command, .. } => vm.command(command, lineno),
            Line::Blank => {}
        }
    }
    vm.report.final_position = vm.state.position;
    (vm.segments, vm.report)
}

struct Vm<'a> {
    config: &'a MachineConfig,
    state: MachineState,
    feature: String,
    segments: Vec<DepositedSegment>,
    report: ExecutionReport,
}

impl Vm<'_> {
    fn comment(&mut self, text: &str) {
        if let Some(tag) = text.trim().strip_prefix(FEATURE_TAG) {
            self.feature = tag.trim().to_ascii_lowercase();
        }
    }

    fn violation(&mut self, line: usize, kind: ViolationKind, message: String) {
        self.report.violations.push(Violation {
            line,
            kind,
            message,
        });
    }

    fn command(&mut self, c: &Command, line: usize) {
        self.report.commands += 1;
        match c.op {
            Opcode::G90 => self.state.absolute_xyz = true,
            Opcode::M83 => self.state.relative_e = true,
            Opcode::G28 => {
                let all = c.x.is_none() && c.y.is_none() && c.z.is_none();
                for (axis, v) in [c.x, c.y, c.z].into_iter().enumerate() {
                    if all || v.is_some() {
                        self.state.position[axis] = 0.0;
                    }
                }
            }
            Opcode::G92 => {
                for (axis, v) in [c.x, c.y, c.z].into_iter().enumerate() {
                    if let Some(v) = v {
                        self.state.position[axis] = v;
                    }
                }
                if let Some(e) = c.e {
                    self.state.extruder_e = e;
                }
            }
            Opcode::G0 | Opcode::G1 => self.motion(c, line),
        }
    }

    fn motion(&mut self, c: &Command, line: usize) {
        if let Some(f) = c.f {
            if f > 0.0 {
                self.state.feed_rate = Some(f);
            } else {
                self.violation(
                    line,
                    ViolationKind::NegativeFeed,
                    format!("feed rate F{f} must be positive"),
                );
            }
        }

        let start = self.state.position;
        let mut target = start;
        for (axis, v) in [c.x, c.y, c.z].into_iter().enumerate() {
            if let Some(v) = v {
                target[axis] = if self.state.absolute_xyz {
                    v
                } else {
                    start[axis] + v
                };
            }
        }
        let de = match c.e {
            Some(e) if self.state.relative_e => e,
            Some(e) => e - self.state.extruder_e,
            None => 0.0,
        };
        self.state.extruder_e += de;

        for (axis, name) in ['X', 'Y', 'Z'].into_iter().enumerate() {
            let limit = self.config.envelope_mm[axis];
            if !(0.0..=limit).contains(&target[axis]) {
                self.violation(
                    line,
                    ViolationKind::OutOfBounds,
                    format!(
                        "{name}{} outside machine envelope [0, {limit}]",
                        target[axis]
                    ),
                );
            }
        }

        let dx = target[0] - start[0];
        let dy = target[1] - start[1];
        let dz = target[2] - start[2];
        let xy_len = dx.hypot(dy);
        let path_len = (dx * dx + dy * dy + dz * dz).sqrt();
        let moves_xy = xy_len > MOTION_EPS_MM;

        let time = if path_len > MOTION_EPS_MM {
            match self.state.feed_rate {
                Some(f) => path_len / (f / 60.0),
                None => {
                    self.violation(
                        line,
                        ViolationKind::MissingFeed,
                        "motion before any feed rate was set".into(),
                    );
                    0.0
                }
            }
        } else {
            0.0
        };
        self.report.print_time_s += time;

        if de < 0.0 {
            self.state.retracted_e += -de;
            self.report.retracted_e_mm += -de;
        }

        if de > 0.0 && moves_xy {
            let volume = de * self.config.syringe_area_mm2();
            let implied = volume / (xy_len * self.config.ink_layer_height_mm);
            self.segments.push(DepositedSegment {
                start: [start[0], start[1]],
                end: [target[0], target[1]],
                z: target[2],
                volume_mm3: volume,
                implied_line_width_mm: implied,
                feature: self.feature.clone(),
                line,
            });
            self.report.deposited_e_mm += de;
            self.report.deposited_length_mm += xy_len;
            self.report.deposited_volume_mm3 += volume;
            let stats = self
                .report
                .features
                .entry(self.feature.clone())
                .or_default();
            stats.length_mm += xy_len;
            stats.volume_mm3 += volume;
            stats.time_s += time;
            stats.segments += 1;
        } else if de > 0.0 {
            // E-only (or Z-only) push: restores an outstanding retraction;
            // anything beyond it is a blob at a fixed point.
            let primed = de.min(self.state.retracted_e);
            self.state.retracted_e -= primed;
            self.report.primed_e_mm += primed;
            let excess = de - primed;
            if excess > PRIME_EPS_MM {
                self.violation(
                    line,
                    ViolationKind::ExtrudeWithoutMotion,
                    format!("extrudes E{excess} without XY motion"),
                );
            }
        } else if path_len > MOTION_EPS_MM {
            self.report.travel_length_mm += path_len;
        }

        self.state.position = target;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcode::parse;

    fn run(text: &str) -> (Vec<DepositedSegment>, ExecutionReport) {
        execute(&parse(text).unwrap(), &MachineConfig::default())
    }

    #[test]
    fn extrusion_without_motion_is_flagged() {
        let (segs, report) = run("G90\nM83\nG1 X10 Y10 F300\nG1 E0.5");
        assert!(segs.is_empty());
        assert_eq!(report.violations.len(), 1);
        assert_eq!(
            report.violations[0].kind,
            ViolationKind::ExtrudeWithoutMotion
        );
        assert_eq!(report.violations[0].line, 4);
    }

    #[test]
    fn prime_after_retract_is_not_a_violation() {
        let (_, report) = run("G90\nM83\nG1 X10 Y10 F300\nG1 E-0.5\nG0 X20\nG1 E0.5");
        assert!(report.violations.is_empty(), "{:?}", report.violations);
        assert_eq!(report.retracted_e_mm, 0.5);
        assert_eq!(report.primed_e_mm, 0.5);
    }

    #[test]
    fn deposit_geometry_and_time() {
        let (segs, report) = run("G90\nM83\n;TYPE:TRACE\nG1 X10 Y10 F300\nG1 X20 Y10 E0.1");
        assert_eq!(segs.len(), 1);
        let s = &segs[0];
        assert_eq!(s.feature, "trace");
        assert!((s.length_mm() - 10.0).abs() < 1e-12);
        let cfg = MachineConfig::default();
        assert!((s.volume_mm3 - 0.1 * cfg.syringe_area_mm2()).abs() < 1e-12);
        assert!((s.implied_line_width_mm - s.volume_mm3 / (10.0 * 0.15)).abs() < 1e-12);
        let expected_time = (200f64).sqrt() / 5.0 + 10.0 / 5.0;
        assert!((report.print_time_s - expected_time).abs() < 1e-9);
    }

    #[test]
    fn out_of_bounds_negative_feed_and_missing_feed() {
        let (_, report) = run("G1 X10\nG1 X400 F300\nG1 X1 F-5");
        let kinds: Vec<_> = report.violations.iter().map(|v| v.kind).collect();
        assert_eq!(
            kinds,
            vec![
                ViolationKind::MissingFeed,
                ViolationKind::OutOfBounds,
                ViolationKind::NegativeFeed
            ]
        );
    }

    #[test]
    fn absolute_extrusion_mode_uses_deltas() {
        let (segs, _) = run("G90\nG92 E0\nG1 X10 F300\nG1 X20 E1\nG1 X30 E1.5");
        assert_eq!(segs.len(), 2);
        let cfg = MachineConfig::default();
        assert!((segs[1].volume_mm3 - 0.5 * cfg.syringe_area_mm2()).abs() < 1e-12);
    }

    #[test]
    fn home_and_set_position() {
        let (_, report) = run("G90\nG1 X5 Y6 Z7 F600\nG28 X\nG92 Y1");
        assert_eq!(report.final_position, [0.0, 1.0, 7.0]);
    }

    #[test]
    fn empty_program_is_clean() {
        let (segs, report) = run("");
        assert!(segs.is_empty());
        assert!(report.violations.is_empty());
        assert_eq!(report.commands, 0);
    }
}
