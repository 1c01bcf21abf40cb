use super::{PrintFrame, PrintParams, Stroke};
use crate::format::fixed_trimmed;
use crate::gcode::{Command, GCodeProgram, Opcode, FEATURE_TAG, FRACTION_DIGITS};

/// Clearance above the surface after the last stroke.
const PARK_LIFT_MM: f64 = 10.0;

pub(super) fn emit_strokes(
    strokes: &[Stroke],
    params: &PrintParams,
    frame: &PrintFrame,
    pattern_name: &str,
    spec_hash: &str,
) -> GCodeProgram {
    let mut b = Builder::new(params, frame);
    let num = |v: f64| fixed_trimmed(v, FRACTION_DIGITS);

    let p = &mut b.program;
    p.comment("inkbench DIW toolpath");
    p.comment(format!("spec_hash={spec_hash}"));
    p.comment(format!("pattern={pattern_name}"));
    p.comment(format!("layer={}", frame.layer));
    p.comment(format!("surface_z_mm={}", num(frame.surface_z_mm)));
    p.comment(format!("line_width_mm={}", num(params.line_width_mm)));
    p.comment(format!("infill_pct={}", num(params.infill_pct)));
    p.comment(format!("print_speed_mm_s={}", num(params.print_speed_mm_s)));
    p.comment(format!(
        "ink_layer_height_mm={}",
        num(params.ink_layer_height_mm)
    ));
    p.comment(format!(
        "syringe_inner_diameter_mm={}",
        num(params.syringe_inner_diameter_mm)
    ));
    p.comment(format!("retraction_enabled={}", params.retraction_enabled));
    p.comment(format!("retraction_mm_e={}", num(params.retraction_mm_e)));
    p.comment(format!(
        "travel_speed_mm_s={}",
        num(params.travel_speed_mm_s)
    ));

    p.push(Command::new(Opcode::G90));
    p.push(Command::new(Opcode::M83));
    p.push(Command::new(Opcode::G92).with_e(0.0));
    p.push(Command::new(Opcode::G28));
    b.lift_to(frame.surface_z_mm + params.z_hop_mm);

    let mut current_feature = None;
    for stroke in strokes {
        if current_feature != Some(stroke.feature) {
            b.program
                .comment(format!("{FEATURE_TAG}{}", stroke.feature.tag()));
            current_feature = Some(stroke.feature);
        }
        b.travel_to(stroke.points[0]);
        for &point in &stroke.points[1..] {
            b.print_to(point);
        }
    }
    b.lift_to(frame.surface_z_mm + PARK_LIFT_MM);
    b.program
}

struct Builder<'a> {
    params: &'a PrintParams,
    surface_z: f64,
    program: GCodeProgram,
    position: Option<[f64; 2]>,
    z: f64,
    feed: Option<f64>,
    retracted: bool,
    printed: bool,
}

impl<'a> Builder<'a> {
    fn new(params: &'a PrintParams, frame: &PrintFrame) -> Self {
        Self {
            params,
            surface_z: frame.surface_z_mm,
            program: GCodeProgram::new(),
            position: None,
            z: 0.0,
            feed: None,
            retracted: false,
            printed: false,
        }
    }

    fn feed_word(&mut self, feed: f64) -> Option<f64> {
        if self.feed == Some(feed) {
            None
        } else {
            self.feed = Some(feed);
            Some(feed)
        }
    }

    fn rapid(&mut self, mut c: Command) {
        if let Some(f) = self.feed_word(60.0 * self.params.travel_speed_mm_s) {
            c = c.with_f(f);
        }
        self.program.push(c);
    }

    fn lift_to(&mut self, z: f64) {
        if self.z != z {
            self.rapid(Command::new(Opcode::G0).with_z(z));
            self.z = z;
        }
    }

    fn retract(&mut self) {
        if self.params.retraction_enabled && self.printed && !self.retracted {
            self.program
                .push(Command::new(Opcode::G1).with_e(-self.params.retraction_mm_e));
            self.retracted = true;
        }
    }

    fn prime(&mut self) {
        if self.retracted {
            self.program
                .push(Command::new(Opcode::G1).with_e(self.params.retraction_mm_e));
            self.retracted = false;
        }
    }

    /// Retract, hop, move, descend, prime.
    fn travel_to(&mut self, target: [f64; 2]) {
        if self.position == Some(target) && self.z == self.surface_z {
            return;
        }
        self.retract();
        self.lift_to(self.surface_z + self.params.z_hop_mm);
        self.rapid(Command::new(Opcode::G0).with_xy(target[0], target[1]));
        self.lift_to(self.surface_z);
        self.position = Some(target);
        self.prime();
    }

    fn print_to(&mut self, target: [f64; 2]) {
        let from = self.position.expect("print after travel");
        let length = (target[0] - from[0]).hypot(target[1] - from[1]);
        let mut c = Command::new(Opcode::G1)
            .with_xy(target[0], target[1])
            .with_e(self.params.extrusion_for(length));
        if let Some(f) = self.feed_word(60.0 * self.params.print_speed_mm_s) {
            c = c.with_f(f);
        }
        self.program.push(c);
        self.position = Some(target);
        self.printed = true;
    }
}
