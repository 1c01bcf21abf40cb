use serde::{Deserialize, Serialize};

use super::{PrintParams, ToolpathError};
use crate::sensor::{CircularElectrode, SerpentinePattern};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Feature {
    Pad,
    Trace,
    Infill,
    Lead,
}

impl Feature {
    /// Tag written after `;TYPE:`.
    pub fn tag(self) -> &'static str {
        match self {
            Feature::Pad => "PAD",
            Feature::Trace => "TRACE",
            Feature::Infill => "INFILL",
            Feature::Lead => "LEAD",
        }
    }
}

/// A polyline printed without lifting the nozzle.
#[derive(Debug, Clone, PartialEq)]
pub struct Stroke {
    pub feature: Feature,
    pub points: Vec<[f64; 2]>,
}

impl Stroke {
    pub fn length_mm(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
            .sum()
    }
}

/// Pad, trace, pad. Passes run along y, stepping in +x; the trace is
/// centred on `center`.
pub fn serpentine_strokes(
    pattern: &SerpentinePattern,
    params: &PrintParams,
    center: [f64; 2],
) -> Vec<Stroke> {
    let n = pattern.pass_count();
    let pitch = pattern.pitch_mm();
    let x0 = center[0] - (n - 1) as f64 * pitch / 2.0;
    let y_bottom = center[1] - pattern.length_mm / 2.0;
    let y_top = center[1] + pattern.length_mm / 2.0;

    let mut trace = Vec::with_capacity(2 * n);
    for i in 0..n {
        let x = x0 + i as f64 * pitch;
        let (from, to) = if i % 2 == 0 {
            (y_bottom, y_top)
        } else {
            (y_top, y_bottom)
        };
        trace.push([x, from]);
        trace.push([x, to]);
    }

    let start = trace[0];
    let end = *trace.last().expect("at least one pass");
    let half = pattern.pad_side_mm / 2.0;
    let start_pad = [start[0], start[1] - half];
    let end_pad = if end[1] > center[1] {
        [end[0], end[1] + half]
    } else {
        [end[0], end[1] - half]
    };

    let mut strokes = Vec::with_capacity(3);
    strokes.extend(pad_stroke(
        start_pad,
        pattern.pad_side_mm,
        params.line_width_mm,
    ));
    strokes.push(Stroke {
        feature: Feature::Trace,
        points: trace,
    });
    strokes.extend(pad_stroke(
        end_pad,
        pattern.pad_side_mm,
        params.line_width_mm,
    ));
    strokes
}

/// Concentric square loops at line-width pitch, outside in, each loop
/// joined to the next by a short diagonal.
fn pad_stroke(center: [f64; 2], side: f64, line_width: f64) -> Option<Stroke> {
    let mut points = Vec::new();
    let mut k = 0;
    loop {
        let half = side / 2.0 - line_width / 2.0 - k as f64 * line_width;
        if half < 0.0 {
            break;
        }
        let [cx, cy] = center;
        if half == 0.0 {
            points.push([cx, cy]);
            break;
        }
        points.extend([
            [cx - half, cy - half],
            [cx + half, cy - half],
            [cx + half, cy + half],
            [cx - half, cy + half],
            [cx - half, cy - half],
        ]);
        k += 1;
    }
    (points.len() >= 2).then_some(Stroke {
        feature: Feature::Pad,
        points,
    })
}

/// Grid infill of a circle: one family of chords parallel to x, then one
/// parallel to y, each visited in greedy nearest-neighbour order, then the
/// lead line. Odd layers lead towards -y, even layers towards +y.
pub fn electrode_strokes(
    electrode: &CircularElectrode,
    params: &PrintParams,
    center: [f64; 2],
    layer: usize,
) -> Result<Vec<Stroke>, ToolpathError> {
    let spacing = params.fill_spacing_mm();
    let d = electrode.diameter_mm;
    let count = (d / spacing + 1e-9).floor() as usize;
    if count == 0 {
        return Err(ToolpathError::EmptyFill {
            diameter_mm: d,
            spacing_mm: spacing,
        });
    }
    let r = d / 2.0;
    let [cx, cy] = center;

    let mut strokes = Vec::with_capacity(2 * count + 1);
    let mut position: Option<[f64; 2]> = None;
    for family in 0..2 {
        let chords: Vec<[[f64; 2]; 2]> = chord_offsets(count, spacing)
            .map(|o| {
                let h = (r * r - o * o).max(0.0).sqrt();
                if family == 0 {
                    [[cx - h, cy + o], [cx + h, cy + o]]
                } else {
                    [[cx + o, cy - h], [cx + o, cy + h]]
                }
            })
            .collect();
        for chord in nearest_neighbour_order(&chords, position) {
            position = Some(chord[1]);
            strokes.push(Stroke {
                feature: Feature::Infill,
                points: chord.to_vec(),
            });
        }
    }

    if electrode.lead_length_mm > 0.0 {
        let dir = if layer % 2 == 1 { -1.0 } else { 1.0 };
        let edge = [cx, cy + dir * r];
        let pad = [cx, cy + dir * (r + electrode.lead_length_mm)];
        strokes.push(Stroke {
            feature: Feature::Lead,
            points: vec![edge, pad],
        });
    }
    Ok(strokes)
}

/// Offsets of `count` lines at `spacing`, symmetric about zero.
pub(crate) fn chord_offsets(count: usize, spacing: f64) -> impl Iterator<Item = f64> {
    let mid = (count as f64 - 1.0) / 2.0;
    (0..count).map(move |k| (k as f64 - mid) * spacing)
}

/// Orders chords greedily: from the current position, print next the chord
/// with the nearest endpoint, starting from that endpoint. Ties go to the
/// lower index and the first endpoint.
fn nearest_neighbour_order(
    chords: &[[[f64; 2]; 2]],
    start: Option<[f64; 2]>,
) -> Vec<[[f64; 2]; 2]> {
    let dist = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
    let mut remaining: Vec<usize> = (0..chords.len()).collect();
    let mut ordered = Vec::with_capacity(chords.len());
    let mut pos = start.unwrap_or(chords[0][0]);
    while !remaining.is_empty() {
        let mut best = (0usize, 0usize, f64::INFINITY);
        for (slot, &idx) in remaining.iter().enumerate() {
            for (end, &p) in chords[idx].iter().enumerate() {
                let d = dist(pos, p);
                if d < best.2 - 1e-12 {
                    best = (slot, end, d);
                }
            }
        }
        let idx = remaining.remove(best.0);
        let chord = if best.1 == 0 {
            chords[idx]
        } else {
            [chords[idx][1], chords[idx][0]]
        };
        pos = chord[1];
        ordered.push(chord);
    }
    ordered
}
