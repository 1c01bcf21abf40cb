//! The toolpath G-code dialect: typed program representation, parser,
//! canonical emitter and a virtual printer.
//!
//! The dialect is `G90`, `M83`, `G92`, `G0`, `G1` and `G28` with `X`/`Y`/`Z`
//! in mm, `E` in mm of piston travel and `F` in mm/min. Comments start with
//! `;`. Comment lines of the form `;TYPE:<feature>` tag the deposits that
//! follow.

mod parse;
mod vm;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::format::fixed_trimmed;

pub use parse::{parse, ParseError, ParseErrorKind};
pub use vm::{
    execute, DepositedSegment, ExecutionReport, FeatureStats, MachineConfig, MachineState,
    Violation, ViolationKind,
};

/// Fractional digits written for every numeric word.
pub const FRACTION_DIGITS: usize = 5;

/// Prefix of a feature tag comment.
pub const FEATURE_TAG: &str = "TYPE:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Opcode {
    G0,
    G1,
    G28,
    G90,
    G92,
    M83,
}

impl Opcode {
    pub fn from_word(word: &str) -> Option<Self> {
        let upper = word.to_ascii_uppercase();
        let (letter, digits) = upper.split_at(1.min(upper.len()));
        let code: u32 = digits.parse().ok()?;
        match (letter, code) {
            ("G", 0) => Some(Opcode::G0),
            ("G", 1) => Some(Opcode::G1),
            ("G", 28) => Some(Opcode::G28),
            ("G", 90) => Some(Opcode::G90),
            ("G", 92) => Some(Opcode::G92),
            ("M", 83) => Some(Opcode::M83),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Opcode::G0 => "G0",
            Opcode::G1 => "G1",
            Opcode::G28 => "G28",
            Opcode::G90 => "G90",
            Opcode::G92 => "G92",
            Opcode::M83 => "M83",
        }
    }

    /// Parameter letters this opcode accepts.
    pub fn accepts(self, letter: char) -> bool {
        match self {
            Opcode::G0 | Opcode::G1 => matches!(letter, 'X' | 'Y' | 'Z' | 'E' | 'F'),
            Opcode::G92 => matches!(letter, 'X' | 'Y' | 'Z' | 'E'),
            Opcode::G28 => matches!(letter, 'X' | 'Y' | 'Z'),
            Opcode::G90 | Opcode::M83 => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Command {
    pub op: Opcode,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub z: Option<f64>,
    pub e: Option<f64>,
    pub f: Option<f64>,
}

impl Command {
    pub fn new(op: Opcode) -> Self {
        Self {
            op,
            x: None,
            y: None,
            z: None,
            e: None,
            f: None,
        }
    }

    pub fn with_xy(mut self, x: f64, y: f64) -> Self {
        self.x = Some(x);
        self.y = Some(y);
        self
    }

    pub fn with_z(mut self, z: f64) -> Self {
        self.z = Some(z);
        self
    }

    pub fn with_e(mut self, e: f64) -> Self {
        self.e = Some(e);
        self
    }

    pub fn with_f(mut self, f: f64) -> Self {
        self.f = Some(f);
        self
    }

    pub(crate) fn set(&mut self, letter: char, value: f64) {
        let slot = match letter {
            'X' => &mut self.x,
            'Y' => &mut self.y,
            'Z' => &mut self.z,
            'E' => &mut self.e,
            'F' => &mut self.f,
            _ => return,
        };
        *slot = Some(value);
    }

    pub(crate) fn get(&self, letter: char) -> Option<f64> {
        match letter {
            'X' => self.x,
            'Y' => self.y,
            'Z' => self.z,
            'E' => self.e,
            'F' => self.f,
            _ => None,
        }
    }

    pub fn moves_xy(&self) -> bool {
        self.x.is_some() || self.y.is_some()
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.op.as_str())?;
        for letter in ['X', 'Y', 'Z', 'E', 'F'] {
            if let Some(v) = self.get(letter) {
                write!(f, " {letter}{}", fixed_trimmed(v, FRACTION_DIGITS))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Line {
    Command {
        command: Command,
        comment: Option<String>,
    },
    /// Comment text after the `;`.
    Comment(String),
    Blank,
}

impl fmt::Display for Line {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Line::Command {
                command,
                comment: None,
            } => write!(f, "{command}"),
            Line::Command {
                command,
                comment: Some(c),
            } => write!(f, "{command} ;{c}"),
            Line::Comment(c) => write!(f, ";{c}"),
            Line::Blank => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GCodeProgram {
    pub lines: Vec<Line>,
}

impl GCodeProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, command: Command) {
        self.lines.push(Line::Command {
            command,
            comment: None,
        });
    }

    pub fn comment(&mut self, text: impl Into<String>) {
        self.lines.push(Line::Comment(text.into()));
    }

    pub fn commands(&self) -> impl Iterator<Item = &Command> {
        self.lines.iter().filter_map(|l| match l {
            Line::Command { command, .. } => Some(command),
            _ => None,
        })
    }

    /// Canonical text: one line per entry, `\n` terminated.
    pub fn emit(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }

    /// Value of a `;key=value` header comment.
    pub fn header_value(&self, key: &str) -> Option<&str> {
        self.lines.iter().find_map(|l| match l {
            Line::Comment(c) => c.split_once('=').filter(|(k, _)| *k == key).map(|(_, v)| v),
            _ => None,
        })
    }
}

impl fmt::Display for GCodeProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.emit())
    }
}
