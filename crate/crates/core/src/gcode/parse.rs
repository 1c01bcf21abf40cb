use thiserror::Error;

use super::{Command, GCodeProgram, Line, Opcode};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnknownCommand(String),
    MalformedParameter(String),
}

/// Parse failure with a 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {}", describe(.kind))]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

fn describe(kind: &ParseErrorKind) -> String {
    match kind {
        ParseErrorKind::UnknownCommand(w) => format!("unknown command `{w}`"),
        ParseErrorKind::MalformedParameter(w) => format!("malformed parameter `{w}`"),
    }
}

/// Parses G-code text into a typed program. Command order, comment lines
/// and trailing comments are preserved; unknown words are rejected.
pub fn parse(text: &str) -> Result<GCodeProgram, ParseError> {
    let mut program = GCodeProgram::new();
    for (idx, raw) in text.lines().enumerate() {
        program.lines.push(parse_line(raw, idx + 1)?);
    }
    Ok(program)
}

fn parse_line(raw: &str, line: usize) -> Result<Line, ParseError> {
    let (code, comment) = match raw.split_once(';') {
        Some((code, comment)) => (code, Some(comment.to_owned())),
        None => (raw, None),
    };
    let mut words = code.split_whitespace();
    let Some(first) = words.next() else {
        return Ok(match comment {
            Some(c) => Line::Comment(c),
            None => Line::Blank,
        });
    };
    let op = Opcode::from_word(first).ok_or_else(|| ParseError {
        line,
        kind: ParseErrorKind::UnknownCommand(first.to_owned()),
    })?;

    let mut command = Command::new(op);
    for word in words {
        let malformed = || ParseError {
            line,
            kind: ParseErrorKind::MalformedParameter(word.to_owned()),
        };
        let mut chars = word.chars();
        let letter = chars
            .next()
            .map(|c| c.to_ascii_uppercase())
            .ok_or_else(malformed)?;
        if !op.accepts(letter) || command.get(letter).is_some() {
            return Err(malformed());
        }
        let digits = chars.as_str();
        let value = if digits.is_empty() && op == Opcode::G28 {
            // bare axis flag
            0.0
        } else {
            parse_number(digits).ok_or_else(malformed)?
        };
        command.set(letter, value);
    }
    Ok(Line::Command { command, comment })
}

fn parse_number(s: &str) -> Option<f64> {
    let valid = !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+'))
        && s.chars().any(|c| c.is_ascii_digit());
    if !valid {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}
