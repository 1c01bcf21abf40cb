//! Metrics from measurement logs: per-cycle relative-change curves, degree
//! of hysteresis, gauge factor and linearity, stretchability and zero-value
//! spread.

pub mod plot;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiment::{MeasurementLog, Phase};
use crate::sensor::ReadingUnit;
use crate::stats;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("cycle {0} has no baseline rows")]
    MissingBaseline(u32),
    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),
    #[error("cannot fit a line: {0}")]
    FitError(String),
    #[error("log has no open-circuit row")]
    NotAFailureRun,
    #[error("need at least 2 values, got {0}")]
    InsufficientData(usize),
    #[error("baseline of cycle {0} is zero")]
    ZeroBaseline(u32),
    #[error("log mixes sensors {0:?}; analyze one sensor at a time")]
    MixedSensors(Vec<String>),
    #[error("log mixes reading units")]
    MixedUnits,
    #[error("log is empty")]
    EmptyLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub strain_pct: f64,
    pub relative_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleCurve {
    pub cycle_index: u32,
    pub baseline_value: f64,
    /// Ascending strain.
    pub stretch_points: Vec<CurvePoint>,
    /// In measurement order, i.e. descending strain.
    pub release_points: Vec<CurvePoint>,
}

impl CycleCurve {
    /// The unloading branch as a closed path from the turning point: the
    /// turning point is measured once, during loading, so it is prepended
    /// here when the release levels stop short of it.
    pub fn release_branch(&self) -> Vec<CurvePoint> {
        let mut branch = self.release_points.clone();
        if let Some(apex) = self.stretch_points.last() {
            if branch
                .first()
                .is_none_or(|p| p.strain_pct < apex.strain_pct)
            {
                branch.insert(0, *apex);
            }
        }
        branch
    }
}

/// Groups rows by cycle, phase and strain level. Each data point is the
/// mean reading of its group, expressed relative to that cycle's baseline
/// mean. Open-circuit rows are skipped.
pub fn build_curves(log: &MeasurementLog) -> Result<Vec<CycleCurve>, AnalysisError> {
    #[derive(Default)]
    struct Groups {
        baseline: Vec<f64>,
        stretch: Vec<(f64, Vec<f64>)>,
        release: Vec<(f64, Vec<f64>)>,
    }
    fn add(levels: &mut Vec<(f64, Vec<f64>)>, strain: f64, value: f64) {
        match levels.iter_mut().find(|(s, _)| *s == strain) {
            Some((_, v)) => v.push(value),
            None => levels.push((strain, vec![value])),
        }
    }

    let mut cycles: BTreeMap<u32, Groups> = BTreeMap::new();
    for row in log.rows.iter().filter(|r| !r.is_open_circuit()) {
        match row.phase {
            Phase::Baseline => cycles
                .entry(row.cycle)
                .or_default()
                .baseline
                .push(row.reading_value),
            Phase::Stretch => add(
                &mut cycles.entry(row.cycle).or_default().stretch,
                row.strain_pct,
                row.reading_value,
            ),
            Phase::Release => add(
                &mut cycles.entry(row.cycle).or_default().release,
                row.strain_pct,
                row.reading_value,
            ),
            Phase::FailureRun => {}
        }
    }

    let mut curves = Vec::new();
    for (cycle, g) in cycles {
        if g.stretch.is_empty() && g.release.is_empty() {
            continue;
        }
        let baseline = stats::mean(&g.baseline).ok_or(AnalysisError::MissingBaseline(cycle))?;
        if baseline == 0.0 {
            return Err(AnalysisError::ZeroBaseline(cycle));
        }
        let points = |levels: Vec<(f64, Vec<f64>)>| -> Vec<CurvePoint> {
            levels
                .into_iter()
                .map(|(strain, values)| CurvePoint {
                    strain_pct: strain,
                    relative_change: (stats::mean(&values).expect("non-empty group") - baseline)
                        / baseline,
                })
                .collect()
        };
        let mut stretch_points = points(g.stretch);
        stretch_points.sort_by(|a, b| a.strain_pct.total_cmp(&b.strain_pct));
        let mut release_points = points(g.release);
        release_points.sort_by(|a, b| b.strain_pct.total_cmp(&a.strain_pct));
        curves.push(CycleCurve {
            cycle_index: cycle,
            baseline_value: baseline,
            stretch_points,
            release_points,
        });
    }
    Ok(curves)
}

/// Trapezoidal area under a curve, strain taken as a fraction.
fn area(points: &[CurvePoint]) -> f64 {
    let mut sorted: Vec<CurvePoint> = points.to_vec();
    sorted.sort_by(|a, b| a.strain_pct.total_cmp(&b.strain_pct));
    sorted
        .windows(2)
        .map(|w| {
            let dx = (w[1].strain_pct - w[0].strain_pct) / 100.0;
            dx * (w[0].relative_change + w[1].relative_change) / 2.0
        })
        .sum()
}

/// Degree of hysteresis in percent: the fraction of the area under the
/// loading curve that the unloading curve does not recover.
pub fn degree_of_hysteresis(curve: &CycleCurve) -> Result<f64, AnalysisError> {
    let stretch = &curve.stretch_points;
    if stretch.len() < 2 {
        return Err(AnalysisError::DegenerateCurve(format!(
            "cycle {} has {} stretch points",
            curve.cycle_index,
            stretch.len()
        )));
    }
    let a_stretch = area(stretch);
    if !(a_stretch > 0.0) {
        return Err(AnalysisError::DegenerateCurve(format!(
            "cycle {} stretch area is {a_stretch}",
            curve.cycle_index
        )));
    }
    let a_release = area(&curve.release_branch());
    Ok((a_stretch - a_release) / a_stretch * 100.0)
}

/// One input point of the linear fit: the mean over cycles at a strain
/// level, with the spread across cycles for error bars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub phase: Phase,
    pub strain_pct: f64,
    pub mean_relative_change: f64,
    /// Sample standard deviation across cycles; 0 with a single cycle.
    pub std_relative_change: f64,
    pub cycles: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    /// Slope of relative change against strain fraction.
    pub gauge_factor: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: Vec<FitPoint>,
}

/// Ordinary least squares through `(x, y)` pairs. Returns slope, intercept
/// and the coefficient of determination clamped to `[0, 1]`; if every `y`
/// is equal the fit is perfect and `R² = 1`.
pub fn least_squares(xy: &[(f64, f64)]) -> Result<(f64, f64, f64), AnalysisError> {
    let n = xy.len();
    if n < 2 {
        return Err(AnalysisError::FitError(format!("{n} points")));
    }
    let nf = n as f64;
    let xm = xy.iter().map(|p| p.0).sum::<f64>() / nf;
    let ym = xy.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in xy {
        let (dx, dy) = (x - xm, y - ym);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if !(sxx > 0.0) {
        return Err(AnalysisError::FitError(
            "fewer than 2 distinct strain levels".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        let ss_res: f64 = xy
            .iter()
            .map(|&(x, y)| {
                let r = y - (intercept + slope * x);
                r * r
            })
            .sum();
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok((slope, intercept, r2))
}

/// Fits relative change against strain fraction using, at every strain
/// level of each phase, the mean across cycles. Both phases are used unless
/// `stretch_only` is set.
pub fn fit_linear(curves: &[CycleCurve], stretch_only: bool) -> Result<LinearFit, AnalysisError> {
    let mut levels: Vec<(Phase, f64, Vec<f64>)> = Vec::new();
    let mut add = |phase: Phase, p: &CurvePoint| match levels
        .iter_mut()
        .find(|(ph, s, _)| *ph == phase && *s == p.strain_pct)
    {
        Some((_, _, v)) => v.push(p.relative_change),
        None => levels.push((phase, p.strain_pct, vec![p.relative_change])),
    };
    for c in curves {
        c.stretch_points.iter().for_each(|p| add(Phase::Stretch, p));
        if !stretch_only {
            c.release_points.iter().for_each(|p| add(Phase::Release, p));
        }
    }

    let points: Vec<FitPoint> = levels
        .into_iter()
        .map(|(phase, strain_pct, values)| FitPoint {
            phase,
            strain_pct,
            mean_relative_change: stats::mean(&values).expect("non-empty level"),
            std_relative_change: stats::sample_std(&values).unwrap_or(0.0),
            cycles: values.len(),
        })
        .collect();
    let xy: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.strain_pct / 100.0, p.mean_relative_change))
        .collect();
    let (gauge_factor, intercept, r_squared) = least_squares(&xy)?;
    Ok(LinearFit {
        gauge_factor,
        intercept,
        r_squared,
        points,
    })
}

/// Last strain level read before the first open-circuit row.
pub fn stretchability(log: &MeasurementLog) -> Result<f64, AnalysisError> {
    let failure = log
        .rows
        .iter()
        .position(|r| r.is_open_circuit())
        .ok_or(AnalysisError::NotAFailureRun)?;
    Ok(log.rows[..failure]
        .iter()
        .map(|r| r.strain_pct)
        .fold(0.0, f64::max))
}

/// Relative change against strain during a failure run, up to failure.
pub fn failure_curve(log: &MeasurementLog) -> Result<Vec<CurvePoint>, AnalysisError> {
    let baseline: Vec<f64> = log
        .rows
        .iter()
        .filter(|r| r.phase == Phase::Baseline && !r.is_open_circuit())
        .map(|r| r.reading_value)
        .collect();
    let first_cycle = log.rows.first().map(|r| r.cycle).unwrap_or(1);
    let baseline = stats::mean(&baseline).ok_or(AnalysisError::MissingBaseline(first_cycle))?;
    let mut levels: Vec<(f64, Vec<f64>)> = Vec::new();
    for r in log.rows.iter().filter(|r| r.phase == Phase::FailureRun) {
        if r.is_open_circuit() {
            break;
        }
        match levels.iter_mut().find(|(s, _)| *s == r.strain_pct) {
            Some((_, v)) => v.push(r.reading_value),
            None => levels.push((r.strain_pct, vec![r.reading_value])),
        }
    }
    Ok(levels
        .into_iter()
        .map(|(strain_pct, v)| CurvePoint {
            strain_pct,
            relative_change: (stats::mean(&v).expect("non-empty") - baseline) / baseline,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroValueStats {
    pub n: usize,
    pub mean: f64,
    pub sample_std: f64,
    pub relative_std_pct: f64,
}

pub fn repeatability_stats(zero_values: &[f64]) -> Result<ZeroValueStats, AnalysisError> {
    if zero_values.len() < 2 {
        return Err(AnalysisError::InsufficientData(zero_values.len()));
    }
    let mean = stats::mean(zero_values).expect("n >= 2");
    let sample_std = stats::sample_std(zero_values).expect("n >= 2");
    Ok(ZeroValueStats {
        n: zero_values.len(),
        mean,
        sample_std,
        relative_std_pct: 100.0 * sample_std / mean,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationReport {
    pub sensor_ids: Vec<String>,
    pub unit: Option<ReadingUnit>,
    pub dh_pct_per_cycle: Vec<f64>,
    pub dh_mean_pct: Option<f64>,
    pub gauge_factor: Option<f64>,
    pub intercept: Option<f64>,
    pub r_squared: Option<f64>,
    pub stretch_only_fit: bool,
    pub fit_points: Vec<FitPoint>,
    pub stretchability_pct: Option<f64>,
    pub failure_curve: Vec<CurvePoint>,
    /// Per-sensor zero values the spread statistics were computed from.
    pub zero_values: Vec<(String, f64)>,
    pub zero_value_stats: Option<ZeroValueStats>,
    pub curves: Vec<CycleCurve>,
}

impl CharacterizationReport {
    fn empty(sensor_ids: Vec<String>, unit: Option<ReadingUnit>) -> Self {
        Self {
            sensor_ids,
            unit,
            dh_pct_per_cycle: Vec::new(),
            dh_mean_pct: None,
            gauge_factor: None,
            intercept: None,
            r_squared: None,
            stretch_only_fit: false,
            fit_points: Vec::new(),
            stretchability_pct: None,
            failure_curve: Vec::new(),
            zero_values: Vec::new(),
            zero_value_stats: None,
            curves: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Computes whatever metrics the log supports: hysteresis and the linear
/// fit for cyclic runs, stretchability for failure runs, zero-value spread
/// for baseline-only runs over several sensors.
pub fn characterize(
    log: &MeasurementLog,
    stretch_only: bool,
) -> Result<CharacterizationReport, AnalysisError> {
    if log.is_empty() {
        return Err(AnalysisError::EmptyLog);
    }
    let unit = log.rows[0].reading_unit;
    if log.rows.iter().any(|r| r.reading_unit != unit) {
        return Err(AnalysisError::MixedUnits);
    }
    let ids: Vec<String> = log.sensor_ids().into_iter().map(str::to_owned).collect();
    let mut report = CharacterizationReport::empty(ids.clone(), Some(unit));
    report.stretch_only_fit = stretch_only;

    let loaded = log.rows.iter().any(|r| r.phase != Phase::Baseline);
    if loaded && ids.len() > 1 {
        return Err(AnalysisError::MixedSensors(ids));
    }

    if log.has_phase(Phase::Stretch) || log.has_phase(Phase::Release) {
        let curves = build_curves(log)?;
        report.dh_pct_per_cycle = curves
            .iter()
            .map(degree_of_hysteresis)
            .collect::<Result<_, _>>()?;
        report.dh_mean_pct = stats::mean(&report.dh_pct_per_cycle);
        let fit = fit_linear(&curves, stretch_only)?;
        report.gauge_factor = Some(fit.gauge_factor);
        report.intercept = Some(fit.intercept);
        report.r_squared = Some(fit.r_squared);
        report.fit_points = fit.points;
        report.curves = curves;
    }

    if log.has_phase(Phase::FailureRun) {
        report.stretchability_pct = Some(stretchability(log)?);
        report.failure_curve = failure_curve(log)?;
    }

    if !loaded && ids.len() > 1 {
        for id in &ids {
            let values: Vec<f64> = log
                .rows
                .iter()
                .filter(|r| &r.sensor_id == id && !r.is_open_circuit())
                .map(|r| r.reading_value)
                .collect();
            report
                .zero_values
                .push((id.clone(), stats::mean(&values).expect("sensor has rows")));
        }
        let values: Vec<f64> = report.zero_values.iter().map(|(_, v)| *v).collect();
        report.zero_value_stats = Some(repeatability_stats(&values)?);
    }
    Ok(report)
}

/// Report for a table of already-reduced zero values.
pub fn characterize_zero_values(
    table: &crate::experiment::ZeroValueTable,
) -> Result<CharacterizationReport, AnalysisError> {
    let ids = table.entries.iter().map(|(id, _)| id.clone()).collect();
    let mut report = CharacterizationReport::empty(ids, table.unit);
    report.zero_value_stats = Some(repeatability_stats(&table.values())?);
    report.zero_values = table.entries.clone();
    Ok(report)
}
