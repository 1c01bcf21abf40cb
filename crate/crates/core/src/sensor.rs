//! Sensor geometry, material parameters and the forward electrical models.
//!
//! Two sensor families share a three-layer silicone stack:
//!
//! * capacitive: two circular carbon-grease electrodes separated by the
//!   middle (dielectric) silicone layer, `C = ε₀·ε_r·A / d`;
//! * resistive: a single serpentine strain-gauge trace, `R = ρ·L / A_r`.
//!
//! Strain response is linear in engineering strain with a gauge factor per
//! kind. The release branch sits below the stretch branch by a smooth bump
//! whose loop area produces a configured degree of hysteresis.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Permittivity of free space in F/m.
pub const VACUUM_PERMITTIVITY: f64 = 8.854e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensorError {
    #[error("invalid pattern: {0}")]
    InvalidPattern(String),
    #[error("invalid layer stack: {0}")]
    InvalidStack(String),
    #[error("invalid material parameters: {0}")]
    InvalidMaterials(String),
    #[error("operation requires a {expected} sensor, got {found}")]
    WrongKind {
        expected: SensorKind,
        found: SensorKind,
    },
    #[error("{kind} sensor must use a {expected} pattern")]
    PatternMismatch {
        kind: SensorKind,
        expected: &'static str,
    },
    #[error("strain {strain_pct}% exceeds failure strain {failure_pct}%")]
    FailureExceeded { strain_pct: f64, failure_pct: f64 },
    #[error("strain {0}% is outside the valid range")]
    InvalidStrain(f64),
    #[error("degenerate cycle: maximum strain must be positive")]
    DegenerateCycle,
    #[error("spec file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorKind {
    Capacitive,
    Resistive,
}

impl SensorKind {
    pub fn unit(self) -> ReadingUnit {
        match self {
            SensorKind::Capacitive => ReadingUnit::Farad,
            SensorKind::Resistive => ReadingUnit::Ohm,
        }
    }

    /// Number of conductive ink prints in the fabrication sequence.
    pub fn ink_prints(self) -> usize {
        match self {
            SensorKind::Capacitive => 2,
            SensorKind::Resistive => 1,
        }
    }
}

impl fmt::Display for SensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SensorKind::Capacitive => f.write_str("capacitive"),
            SensorKind::Resistive => f.write_str("resistive"),
        }
    }
}

/// Unit of an instrument reading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReadingUnit {
    #[serde(rename = "F")]
    Farad,
    #[serde(rename = "Ω")]
    Ohm,
}

impl ReadingUnit {
    pub fn symbol(self) -> &'static str {
        match self {
            ReadingUnit::Farad => "F",
            ReadingUnit::Ohm => "Ω",
        }
    }

    /// Accepts the canonical symbols plus the ASCII spelling `Ohm`.
    pub fn from_symbol(s: &str) -> Option<Self> {
        match s {
            "F" => Some(ReadingUnit::Farad),
            "Ω" | "Ohm" | "ohm" => Some(ReadingUnit::Ohm),
            _ => None,
        }
    }
}

impl fmt::Display for ReadingUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Boustrophedon strain-gauge trace: `n` longitudinal passes joined by
/// `n - 1` transverse connectors, with a square contact pad at each end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SerpentinePattern {
    pub width_mm: f64,
    pub length_mm: f64,
    pub line_width_mm: f64,
    pub line_separation_mm: f64,
    pub pad_side_mm: f64,
}

impl Default for SerpentinePattern {
    fn default() -> Self {
        Self {
            width_mm: 10.0,
            length_mm: 20.0,
            line_width_mm: 0.5,
            line_separation_mm: 1.4,
            pad_side_mm: 3.0,
        }
    }
}

impl SerpentinePattern {
    pub fn validate(&self) -> Result<(), SensorError> {
        let bad = |msg: &str| Err(SensorError::InvalidPattern(msg.to_owned()));
        if !(self.line_width_mm > 0.0) {
            return bad("line_width_mm must be positive");
        }
        if !(self.line_separation_mm >= 0.0) {
            return bad("line_separation_mm must be non-negative");
        }
        if !(self.width_mm >= self.line_width_mm) {
            return bad("width_mm must be at least line_width_mm");
        }
        if !(self.length_mm > 0.0) {
            return bad("length_mm must be positive");
        }
        if !(self.pad_side_mm >= 0.0) {
            return bad("pad_side_mm must be non-negative");
        }
        Ok(())
    }

    /// Centre-to-centre distance between adjacent passes.
    pub fn pitch_mm(&self) -> f64 {
        self.line_width_mm + self.line_separation_mm
    }

    pub fn pass_count(&self) -> usize {
        // Small epsilon so that widths that are exact multiples survive
        // binary rounding (e.g. 0.5 + 5 * 1.9).
        let raw = (self.width_mm - self.line_width_mm) / self.pitch_mm();
        (raw + 1e-9).floor().max(0.0) as usize + 1
    }
}

/// Centerline length of the serpentine trace in mm, pads excluded.
pub fn serpentine_trace_length(pattern: &SerpentinePattern) -> f64 {
    let n = pattern.pass_count() as f64;
    n * pattern.length_mm + (n - 1.0) * pattern.pitch_mm()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CircularElectrode {
    pub diameter_mm: f64,
    /// Straight lead from the electrode edge to the contact pad position.
    pub lead_length_mm: f64,
}

impl Default for CircularElectrode {
    fn default() -> Self {
        Self {
            diameter_mm: 12.0,
            lead_length_mm: 6.0,
        }
    }
}

impl CircularElectrode {
    pub fn validate(&self) -> Result<(), SensorError> {
        if !(self.diameter_mm > 0.0) {
            return Err(SensorError::InvalidPattern(
                "electrode diameter_mm must be positive".into(),
            ));
        }
        if !(self.lead_length_mm >= 0.0) {
            return Err(SensorError::InvalidPattern(
                "electrode lead_length_mm must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn area_m2(&self) -> f64 {
        let r = self.diameter_mm * 1e-3 / 2.0;
        PI * r * r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Pattern {
    Serpentine(SerpentinePattern),
    CircularElectrode(CircularElectrode),
}

impl Pattern {
    pub fn validate(&self) -> Result<(), SensorError> {
        match self {
            Pattern::Serpentine(p) => p.validate(),
            Pattern::CircularElectrode(e) => e.validate(),
        }
    }
}

/// Silicone layers bottom to top, plus the printed ink thickness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayerStack {
    pub layer_thicknesses_mm: Vec<f64>,
    pub ink_layer_thickness_mm: f64,
    /// Declared overall silicone thickness; must equal the layer sum.
    pub total_thickness_mm: f64,
}

impl Default for LayerStack {
    fn default() -> Self {
        Self {
            layer_thicknesses_mm: vec![0.75, 0.5, 0.75],
            ink_layer_thickness_mm: 0.15,
            total_thickness_mm: 2.0,
        }
    }
}

const THICKNESS_TOL_MM: f64 = 1e-9;

impl LayerStack {
    pub fn layer_sum_mm(&self) -> f64 {
        self.layer_thicknesses_mm.iter().sum()
    }

    pub fn validate(&self) -> Result<(), SensorError> {
        if self.layer_thicknesses_mm.is_empty() {
            return Err(SensorError::InvalidStack("stack has no layers".into()));
        }
        if let Some(t) = self.layer_thicknesses_mm.iter().find(|t| !(**t > 0.0)) {
            return Err(SensorError::InvalidStack(format!(
                "layer thickness {t} mm is not positive"
            )));
        }
        if !(self.ink_layer_thickness_mm > 0.0) {
            return Err(SensorError::InvalidStack(
                "ink_layer_thickness_mm must be positive".into(),
            ));
        }
        let sum = self.layer_sum_mm();
        if (sum - self.total_thickness_mm).abs() > THICKNESS_TOL_MM {
            return Err(SensorError::InvalidStack(format!(
                "layers sum to {sum} mm but declared thickness is {} mm",
                self.total_thickness_mm
            )));
        }
        Ok(())
    }

    /// Thickness of the silicone between the two electrode prints.
    pub fn dielectric_gap_mm(&self) -> Option<f64> {
        self.layer_thicknesses_mm.get(1).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialParams {
    pub resistivity_ohm_m: f64,
    pub rel_permittivity: f64,
    pub vacuum_permittivity: f64,
    pub failure_strain_pct: f64,
    pub gf_capacitive: f64,
    pub gf_resistive: f64,
    pub dh_target_pct: f64,
    pub noise_std_rel: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self::capacitive_default()
    }
}

impl MaterialParams {
    pub fn capacitive_default() -> Self {
        Self {
            resistivity_ohm_m: 0.1234,
            rel_permittivity: 3.35,
            vacuum_permittivity: VACUUM_PERMITTIVITY,
            failure_strain_pct: 550.0,
            gf_capacitive: 0.95,
            gf_resistive: 16.83,
            dh_target_pct: 1.36,
            noise_std_rel: 0.003,
        }
    }

    pub fn resistive_default() -> Self {
        Self {
            failure_strain_pct: 600.0,
            dh_target_pct: 21.88,
            ..Self::capacitive_default()
        }
    }

    pub fn default_for(kind: SensorKind) -> Self {
        match kind {
            SensorKind::Capacitive => Self::capacitive_default(),
            SensorKind::Resistive => Self::resistive_default(),
        }
    }

    pub fn validate(&self) -> Result<(), SensorError> {
        let positive = [
            ("resistivity_ohm_m", self.resistivity_ohm_m),
            ("rel_permittivity", self.rel_permittivity),
            ("vacuum_permittivity", self.vacuum_permittivity),
            ("failure_strain_pct", self.failure_strain_pct),
            ("gf_capacitive", self.gf_capacitive),
            ("gf_resistive", self.gf_resistive),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(SensorError::InvalidMaterials(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(0.0..100.0).contains(&self.dh_target_pct) {
            return Err(SensorError::InvalidMaterials(format!(
                "dh_target_pct must lie in [0, 100), got {}",
                self.dh_target_pct
            )));
        }
        // zero noise is the noiseless replay mode
        if !(self.noise_std_rel >= 0.0) {
            return Err(SensorError::InvalidMaterials(
                "noise_std_rel must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    #[serde(default = "default_sensor_id")]
    pub id: String,
    pub kind: SensorKind,
    pub pattern: Pattern,
    #[serde(default)]
    pub stack: LayerStack,
    #[serde(default = "default_footprint")]
    pub footprint_mm: [f64; 2],
    pub materials: MaterialParams,
}

fn default_sensor_id() -> String {
    "sensor-1".to_owned()
}

fn default_footprint() -> [f64; 2] {
    [25.0, 60.0]
}

impl SensorSpec {
    pub fn capacitive_default() -> Self {
        Self {
            id: "capacitive-1".into(),
            kind: SensorKind::Capacitive,
            pattern: Pattern::CircularElectrode(CircularElectrode::default()),
            stack: LayerStack::default(),
            footprint_mm: default_footprint(),
            materials: MaterialParams::capacitive_default(),
        }
    }

    pub fn resistive_default() -> Self {
        Self {
            id: "resistive-1".into(),
            kind: SensorKind::Resistive,
            pattern: Pattern::Serpentine(SerpentinePattern::default()),
            stack: LayerStack::default(),
            footprint_mm: default_footprint(),
            materials: MaterialParams::resistive_default(),
        }
    }

    pub fn default_for(kind: SensorKind) -> Self {
        match kind {
            SensorKind::Capacitive => Self::capacitive_default(),
            SensorKind::Resistive => Self::resistive_default(),
        }
    }

    pub fn validate(&self) -> Result<(), SensorError> {
        self.pattern.validate()?;
        self.stack.validate()?;
        self.materials.validate()?;
        if !(self.footprint_mm[0] > 0.0 && self.footprint_mm[1] > 0.0) {
            return Err(SensorError::InvalidPattern(
                "footprint_mm must be positive".into(),
            ));
        }
        match (self.kind, &self.pattern) {
            (SensorKind::Capacitive, Pattern::CircularElectrode(_)) => {
                if self.stack.layer_thicknesses_mm.len() < 3 {
                    return Err(SensorError::InvalidStack(
                        "capacitive sensors need at least three silicone layers".into(),
                    ));
                }
            }
            (SensorKind::Resistive, Pattern::Serpentine(_)) => {
                if self.stack.layer_thicknesses_mm.len() < 2 {
                    return Err(SensorError::InvalidStack(
                        "resistive sensors need silicone above and below the trace".into(),
                    ));
                }
            }
            (SensorKind::Capacitive, _) => {
                return Err(SensorError::PatternMismatch {
                    kind: self.kind,
                    expected: "circular_electrode",
                })
            }
            (SensorKind::Resistive, _) => {
                return Err(SensorError::PatternMismatch {
                    kind: self.kind,
                    expected: "serpentine",
                })
            }
        }
        Ok(())
    }

    pub fn gauge_factor(&self) -> f64 {
        match self.kind {
            SensorKind::Capacitive => self.materials.gf_capacitive,
            SensorKind::Resistive => self.materials.gf_resistive,
        }
    }

    pub fn failure_strain_pct(&self) -> f64 {
        self.materials.failure_strain_pct
    }
}

fn expect_kind(spec: &SensorSpec, kind: SensorKind) -> Result<(), SensorError> {
    if spec.kind != kind {
        return Err(SensorError::WrongKind {
            expected: kind,
            found: spec.kind,
        });
    }
    Ok(())
}

/// Unstrained parallel-plate capacitance in farads.
pub fn zero_capacitance(spec: &SensorSpec) -> Result<f64, SensorError> {
    expect_kind(spec, SensorKind::Capacitive)?;
    let Pattern::CircularElectrode(electrode) = &spec.pattern else {
        return Err(SensorError::PatternMismatch {
            kind: spec.kind,
            expected: "circular_electrode",
        });
    };
    let gap_mm = spec
        .stack
        .dielectric_gap_mm()
        .ok_or_else(|| SensorError::InvalidStack("no dielectric layer".into()))?;
    if !(gap_mm > 0.0) {
        return Err(SensorError::InvalidStack(
            "dielectric gap must be positive".into(),
        ));
    }
    let m = &spec.materials;
    Ok(m.vacuum_permittivity * m.rel_permittivity * electrode.area_m2() / (gap_mm * 1e-3))
}

/// Unstrained trace resistance in ohms.
pub fn zero_resistance(spec: &SensorSpec) -> Result<f64, SensorError> {
    expect_kind(spec, SensorKind::Resistive)?;
    let Pattern::Serpentine(pattern) = &spec.pattern else {
        return Err(SensorError::PatternMismatch {
            kind: spec.kind,
            expected: "serpentine",
        });
    };
    let length_m = serpentine_trace_length(pattern) * 1e-3;
    let cross_section_m2 = pattern.line_width_mm * 1e-3 * spec.stack.ink_layer_thickness_mm * 1e-3;
    Ok(spec.materials.resistivity_ohm_m * length_m / cross_section_m2)
}

/// Zero value in the sensor's native unit (F or Ω).
pub fn zero_value(spec: &SensorSpec) -> Result<f64, SensorError> {
    match spec.kind {
        SensorKind::Capacitive => zero_capacitance(spec),
        SensorKind::Resistive => zero_resistance(spec),
    }
}

fn check_strain(spec: &SensorSpec, strain_pct: f64) -> Result<(), SensorError> {
    if !(strain_pct >= 0.0) || !strain_pct.is_finite() {
        return Err(SensorError::InvalidStrain(strain_pct));
    }
    let failure_pct = spec.failure_strain_pct();
    if strain_pct > failure_pct {
        return Err(SensorError::FailureExceeded {
            strain_pct,
            failure_pct,
        });
    }
    Ok(())
}

/// Relative change (ΔC/C or ΔR/R) on the loading branch.
pub fn response_stretch(spec: &SensorSpec, strain_pct: f64) -> Result<f64, SensorError> {
    check_strain(spec, strain_pct)?;
    Ok(spec.gauge_factor() * strain_pct / 100.0)
}

/// Relative change on the unloading branch of a cycle that peaked at
/// `strain_max_pct`.
///
/// The release branch is the stretch branch minus a `sin²` bump that
/// vanishes at `0` and `s_max`. Its integral is `amplitude · s_max / 2`, and
/// the amplitude `DH · GF · s_max` makes the enclosed loop area equal
/// `DH · A_stretch`. The trapezoid rule integrates the bump exactly on any
/// uniform grid over `[0, s_max]` with at least two intervals.
pub fn response_release(
    spec: &SensorSpec,
    strain_pct: f64,
    strain_max_pct: f64,
) -> Result<f64, SensorError> {
    if !(strain_max_pct > 0.0) {
        return Err(SensorError::DegenerateCycle);
    }
    check_strain(spec, strain_max_pct)?;
    if !(strain_pct >= 0.0 && strain_pct <= strain_max_pct) {
        return Err(SensorError::InvalidStrain(strain_pct));
    }
    let stretch = response_stretch(spec, strain_pct)?;
    Ok(stretch - hysteresis_gap(spec, strain_pct, strain_max_pct))
}

fn hysteresis_gap(spec: &SensorSpec, strain_pct: f64, strain_max_pct: f64) -> f64 {
    let s = strain_pct / 100.0;
    let s_max = strain_max_pct / 100.0;
    let dh = spec.materials.dh_target_pct / 100.0;
    let amplitude = dh * spec.gauge_factor() * s_max;
    let phase = (PI * s / s_max).sin();
    amplitude * phase * phase
}

/// Closed-form area under the stretch branch over `[0, s_max]`, strain as a
/// fraction.
pub fn stretch_area(spec: &SensorSpec, strain_max_pct: f64) -> f64 {
    let s_max = strain_max_pct / 100.0;
    spec.gauge_factor() * s_max * s_max / 2.0
}

/// Reads a TOML sensor spec. Material keys are layered: the kind's
/// defaults, then `material_overrides` (e.g. from a workbench config), then
/// the sensor spec's own `[materials]` table, which may be partial or absent.
pub fn spec_from_toml(
    text: &str,
    material_overrides: Option<&toml::Table>,
) -> Result<SensorSpec, SensorError> {
    let parse_err = |e: &dyn fmt::Display| SensorError::Parse(e.to_string());
    let mut doc: toml::Table = text.parse().map_err(|e| parse_err(&e))?;
    let kind: SensorKind = doc
        .get("kind")
        .cloned()
        .ok_or_else(|| SensorError::Parse("missing `kind`".into()))?
        .try_into()
        .map_err(|e| parse_err(&e))?;

    let mut materials =
        toml::Table::try_from(MaterialParams::default_for(kind)).map_err(|e| parse_err(&e))?;
    let own = match doc.remove("materials") {
        Some(toml::Value::Table(t)) => Some(t),
        Some(_) => return Err(SensorError::Parse("`materials` must be a table".into())),
        None => None,
    };
    for layer in [material_overrides.cloned(), own].into_iter().flatten() {
        materials.extend(layer);
    }
    doc.insert("materials".into(), toml::Value::Table(materials));
    let spec: SensorSpec = toml::Value::Table(doc)
        .try_into()
        .map_err(|e| parse_err(&e))?;
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(w: f64, l: f64, lw: f64, sep: f64) -> SerpentinePattern {
        SerpentinePattern {
            width_mm: w,
            length_mm: l,
            line_width_mm: lw,
            line_separation_mm: sep,
            pad_side_mm: 3.0,
        }
    }

    #[test]
    fn serpentine_lengths() {
        let p = SerpentinePattern::default();
        assert_eq!(p.pass_count(), 6);
        assert!((serpentine_trace_length(&p) - 129.5).abs() < 1e-12);

        let single = pattern(0.5, 20.0, 0.5, 1.4);
        assert_eq!(single.pass_count(), 1);
        assert_eq!(serpentine_trace_length(&single), 20.0);

        let two = pattern(2.4, 10.0, 0.5, 1.4);
        assert_eq!(two.pass_count(), 2);
        assert!((serpentine_trace_length(&two) - 21.9).abs() < 1e-12);
    }

    #[test]
    fn serpentine_rejects_bad_geometry() {
        assert!(pattern(0.4, 20.0, 0.5, 1.4).validate().is_err());
        assert!(pattern(10.0, 20.0, 0.0, 1.4).validate().is_err());
        assert!(pattern(10.0, 20.0, 0.5, -0.1).validate().is_err());
    }

    #[test]
    fn capacitance_vacuum_dielectric() {
        let mut spec = SensorSpec::capacitive_default();
        spec.materials.rel_permittivity = 1.0;
        // 8.854e-12 * pi * 0.006^2 / 5e-4
        let c = zero_capacitance(&spec).unwrap();
        assert!((c - 2.002_727_6e-12).abs() < 1e-18, "{c}");
    }

    #[test]
    fn capacitance_calibrated_default() {
        let c = zero_capacitance(&SensorSpec::capacitive_default()).unwrap();
        assert!((c * 1e12 - 6.71).abs() / 6.71 < 0.005, "{c}");
    }

    #[test]
    fn capacitance_halves_when_gap_doubles() {
        let spec = SensorSpec::capacitive_default();
        let mut wide = spec.clone();
        wide.stack.layer_thicknesses_mm[1] *= 2.0;
        let ratio = zero_capacitance(&spec).unwrap() / zero_capacitance(&wide).unwrap();
        assert!((ratio - 2.0).abs() < 1e-12);
    }

    #[test]
    fn resistance_calibrated_default() {
        let r = zero_resistance(&SensorSpec::resistive_default()).unwrap();
        // 0.1234 * 0.1295 / 7.5e-8
        assert!((r - 213_070.666_666_7).abs() < 1e-3, "{r}");
    }

    #[test]
    fn resistance_scaling_and_zero_resistivity() {
        let spec = SensorSpec::resistive_default();
        let mut thick = spec.clone();
        thick.stack.ink_layer_thickness_mm *= 2.0;
        let ratio = zero_resistance(&spec).unwrap() / zero_resistance(&thick).unwrap();
        assert!((ratio - 2.0).abs() < 1e-12);

        let mut conductor = spec;
        conductor.materials.resistivity_ohm_m = 0.0;
        assert_eq!(zero_resistance(&conductor).unwrap(), 0.0);
    }

    #[test]
    fn wrong_kind_is_rejected() {
        assert!(matches!(
            zero_capacitance(&SensorSpec::resistive_default()),
            Err(SensorError::WrongKind { .. })
        ));
        assert!(matches!(
            zero_resistance(&SensorSpec::capacitive_default()),
            Err(SensorError::WrongKind { .. })
        ));
    }

    #[test]
    fn stretch_response_values() {
        let cap = SensorSpec::capacitive_default();
        assert!((response_stretch(&cap, 300.0).unwrap() - 2.85).abs() < 1e-12);
        assert_eq!(response_stretch(&cap, 0.0).unwrap(), 0.0);
        let res = SensorSpec::resistive_default();
        assert!((response_stretch(&res, 100.0).unwrap() - 16.83).abs() < 1e-12);
        assert!(matches!(
            response_stretch(&cap, 551.0),
            Err(SensorError::FailureExceeded { .. })
        ));
    }

    #[test]
    fn release_without_hysteresis_matches_stretch() {
        let mut spec = SensorSpec::capacitive_default();
        spec.materials.dh_target_pct = 0.0;
        for k in 0..=30 {
            let s = k as f64 * 10.0;
            assert_eq!(
                response_release(&spec, s, 300.0).unwrap(),
                response_stretch(&spec, s).unwrap()
            );
        }
    }

    #[test]
    fn release_closes_at_peak_and_rejects_degenerate_cycle() {
        let spec = SensorSpec::resistive_default();
        let top = response_release(&spec, 300.0, 300.0).unwrap();
        assert!((top - response_stretch(&spec, 300.0).unwrap()).abs() < 1e-12);
        assert!(response_release(&spec, 0.0, 300.0).unwrap().abs() < 1e-12);
        assert_eq!(
            response_release(&spec, 0.0, 0.0),
            Err(SensorError::DegenerateCycle)
        );
        assert!(response_release(&spec, 310.0, 300.0).is_err());
    }

    #[test]
    fn release_loop_yields_target_hysteresis_dense_trapezoid() {
        let spec = SensorSpec::capacitive_default();
        let n = 10_000;
        let s_max_pct = 300.0;
        let h = 3.0 / n as f64;
        let (mut a_stretch, mut a_release) = (0.0, 0.0);
        for i in 0..n {
            let (x0, x1) = (
                i as f64 * s_max_pct / n as f64,
                (i + 1) as f64 * s_max_pct / n as f64,
            );
            a_stretch += h
                * (response_stretch(&spec, x0).unwrap() + response_stretch(&spec, x1).unwrap())
                / 2.0;
            a_release += h
                * (response_release(&spec, x0, s_max_pct).unwrap()
                    + response_release(&spec, x1, s_max_pct).unwrap())
                / 2.0;
        }
        let dh = (a_stretch - a_release) / a_stretch;
        assert!((dh - 0.0136).abs() < 1e-9, "{dh}");
    }

    #[test]
    fn default_specs_validate_and_mismatch_fails() {
        SensorSpec::capacitive_default().validate().unwrap();
        SensorSpec::resistive_default().validate().unwrap();
        let mut spec = SensorSpec::capacitive_default();
        spec.pattern = Pattern::Serpentine(SerpentinePattern::default());
        assert!(matches!(
            spec.validate(),
            Err(SensorError::PatternMismatch { .. })
        ));

        let mut declared = SensorSpec::resistive_default();
        declared.stack.total_thickness_mm = 2.5;
        assert!(matches!(
            declared.validate(),
            Err(SensorError::InvalidStack(_))
        ));
    }

    #[test]
    fn spec_toml_round_trip() {
        let spec = SensorSpec::resistive_default();
        let text = toml::to_string(&spec).unwrap();
        let back: SensorSpec = toml::from_str(&text).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn partial_materials_layer_over_kind_defaults() {
        let text = "kind = \"resistive\"\n\
                    [pattern]\ntype = \"serpentine\"\n\
                    width_mm = 10.0\nlength_mm = 20.0\nline_width_mm = 0.5\n\
                    line_separation_mm = 1.4\npad_side_mm = 3.0\n\
                    [materials]\nnoise_std_rel = 0.0\n";
        let spec = spec_from_toml(text, None).unwrap();
        assert_eq!(spec.materials.failure_strain_pct, 600.0);
        assert_eq!(spec.materials.dh_target_pct, 21.88);
        assert_eq!(spec.materials.noise_std_rel, 0.0);

        let mut over = toml::Table::new();
        over.insert("dh_target_pct".into(), toml::Value::Float(5.0));
        over.insert("noise_std_rel".into(), toml::Value::Float(0.01));
        let spec = spec_from_toml(text, Some(&over)).unwrap();
        assert_eq!(spec.materials.dh_target_pct, 5.0);
        assert_eq!(spec.materials.noise_std_rel, 0.0);
    }

    #[test]
    fn spec_file_errors() {
        assert!(matches!(
            spec_from_toml("kind = 3", None),
            Err(SensorError::Parse(_))
        ));
        assert!(matches!(
            spec_from_toml("not toml [", None),
            Err(SensorError::Parse(_))
        ));
        let text = toml::to_string(&SensorSpec::capacitive_default()).unwrap();
        assert_eq!(
            spec_from_toml(&text, None).unwrap(),
            SensorSpec::capacitive_default()
        );
        let typo = text.replace("rel_permittivity", "rel_permitivity");
        assert!(matches!(
            spec_from_toml(&typo, None),
            Err(SensorError::Parse(_))
        ));
    }
}
