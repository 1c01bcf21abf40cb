//! Replays the characterization protocols against virtual instruments.
//!
//! A [`VirtualRail`] sets engineering strain on the free gauge length and a
//! [`VirtualLcrMeter`] reads the sensor through the forward model in
//! [`crate::sensor`], adding seeded Gaussian noise proportional to the zero
//! value. Every run is a single timeline: a hold at each strain level, with
//! samples taken at `k / sample_rate_hz` from the start of the hold.

mod log;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sensor::{
    response_release, response_stretch, zero_value, Pattern, ReadingUnit, SensorError, SensorKind,
    SensorSpec,
};
use crate::stats;

pub use log::{
    is_zero_value_header, LogError, LogRow, MeasurementLog, Phase, ZeroValueTable, CSV_HEADER,
    CSV_SIG_DIGITS, ZERO_VALUE_HEADER,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error("invalid protocol: {0}")]
    InvalidConfig(String),
    #[error("strain schedule reaches {max_pct}% but the sensor fails at {failure_pct}%")]
    ExceedsFailure { max_pct: f64, failure_pct: f64 },
    #[error("no sensors given")]
    NoSensors,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    pub max_strain_pct: f64,
    pub cycles: u32,
    pub strain_step_pct: f64,
    pub hold_s: f64,
    pub samples_per_point: u32,
    pub sample_rate_hz: f64,
    pub baseline_samples: u32,
    pub rng_seed: u64,
    /// Free length between the clamps that strain is referred to.
    pub gauge_length_mm: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            max_strain_pct: 300.0,
            cycles: 5,
            strain_step_pct: 25.0,
            hold_s: 3.0,
            samples_per_point: 10,
            sample_rate_hz: 10.0,
            baseline_samples: 100,
            rng_seed: 7,
            gauge_length_mm: 40.0,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::InvalidConfig(m));
        if self.cycles == 0 {
            return bad("cycles must be at least 1".into());
        }
        if !(self.sample_rate_hz > 0.0) || !(self.hold_s > 0.0) {
            return bad("sample_rate_hz and hold_s must be positive".into());
        }
        if self.samples_per_point == 0 || self.baseline_samples == 0 {
            return bad("sample counts must be at least 1".into());
        }
        if self.samples_per_point as f64 / self.sample_rate_hz > self.hold_s + 1e-12 {
            return bad(format!(
                "{} samples at {} Hz do not fit in a {} s hold",
                self.samples_per_point, self.sample_rate_hz, self.hold_s
            ));
        }
        if !(self.strain_step_pct > 0.0) || !(self.max_strain_pct > 0.0) {
            return bad("max_strain_pct and strain_step_pct must be positive".into());
        }
        let steps = self.max_strain_pct / self.strain_step_pct;
        if (steps - steps.round()).abs() > 1e-9 {
            return bad(format!(
                "step {}% does not divide max strain {}%",
                self.strain_step_pct, self.max_strain_pct
            ));
        }
        if !(self.gauge_length_mm > 0.0) {
            return bad("gauge_length_mm must be positive".into());
        }
        Ok(())
    }

    /// Number of steps from 0 to the maximum strain.
    pub fn step_count(&self) -> usize {
        (self.max_strain_pct / self.strain_step_pct).round() as usize
    }

    /// Loading levels `0, step, …, max`.
    pub fn stretch_levels(&self) -> Vec<f64> {
        (0..=self.step_count())
            .map(|k| k as f64 * self.strain_step_pct)
            .collect()
    }

    /// Unloading levels `max - step, …, 0`; the turning point belongs to the
    /// stretch phase.
    pub fn release_levels(&self) -> Vec<f64> {
        (0..self.step_count())
            .rev()
            .map(|k| k as f64 * self.strain_step_pct)
            .collect()
    }

    /// Rows produced by one cyclic run.
    pub fn cyclic_row_count(&self) -> usize {
        let levels = 2 * self.step_count() + 1;
        self.cycles as usize
            * (self.baseline_samples as usize + levels * self.samples_per_point as usize)
    }
}

/// Motorised rail holding the sensor clamps.
#[derive(Debug, Clone)]
pub struct VirtualRail {
    gauge_length_mm: f64,
    displacement_mm: f64,
}

impl VirtualRail {
    pub fn new(gauge_length_mm: f64) -> Self {
        Self {
            gauge_length_mm,
            displacement_mm: 0.0,
        }
    }

    pub fn move_to_strain(&mut self, strain_pct: f64) {
        self.displacement_mm = strain_pct / 100.0 * self.gauge_length_mm;
    }

    pub fn displacement_mm(&self) -> f64 {
        self.displacement_mm
    }

    pub fn strain_pct(&self) -> f64 {
        self.displacement_mm / self.gauge_length_mm * 100.0
    }
}

/// Loading branch the sensor is on when read.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Branch {
    Stretch,
    Release { max_strain_pct: f64 },
}

/// LCR meter reading one sensor.
#[derive(Debug, Clone)]
pub struct VirtualLcrMeter {
    spec: SensorSpec,
    zero: f64,
    noise: Option<Normal<f64>>,
    rng: ChaCha8Rng,
}

impl VirtualLcrMeter {
    pub fn new(spec: SensorSpec, rng: ChaCha8Rng) -> Result<Self, ExperimentError> {
        let zero = zero_value(&spec)?;
        let sigma = spec.materials.noise_std_rel * zero.abs();
        let noise = if sigma > 0.0 {
            Some(
                Normal::new(0.0, sigma)
                    .map_err(|e| ExperimentError::InvalidConfig(format!("noise model: {e}")))?,
            )
        } else {
            None
        };
        Ok(Self {
            spec,
            zero,
            noise,
            rng,
        })
    }

    pub fn unit(&self) -> ReadingUnit {
        self.spec.kind.unit()
    }

    pub fn zero_value(&self) -> f64 {
        self.zero
    }

    /// Noiseless reading at a strain on the given branch.
    pub fn ideal(&self, strain_pct: f64, branch: Branch) -> Result<f64, SensorError> {
        let rel = match branch {
            Branch::Stretch => response_stretch(&self.spec, strain_pct)?,
            Branch::Release { max_strain_pct } => {
                response_release(&self.spec, strain_pct, max_strain_pct)?
            }
        };
        Ok(self.zero * (1.0 + rel))
    }

    pub fn read(&mut self, strain_pct: f64, branch: Branch) -> Result<f64, SensorError> {
        let ideal = self.ideal(strain_pct, branch)?;
        Ok(match &self.noise {
            Some(n) => ideal + n.sample(&mut self.rng),
            None => ideal,
        })
    }
}

/// One run's timeline and output log.
struct Session<'a> {
    cfg: &'a ProtocolConfig,
    rail: VirtualRail,
    meter: VirtualLcrMeter,
    sensor_id: String,
    clock_s: f64,
    log: MeasurementLog,
}

impl<'a> Session<'a> {
    fn new(
        spec: &SensorSpec,
        cfg: &'a ProtocolConfig,
        rng: ChaCha8Rng,
        start_s: f64,
    ) -> Result<Self, ExperimentError> {
        Ok(Self {
            cfg,
            rail: VirtualRail::new(cfg.gauge_length_mm),
            meter: VirtualLcrMeter::new(spec.clone(), rng)?,
            sensor_id: spec.id.clone(),
            clock_s: start_s,
            log: MeasurementLog::new(),
        })
    }

    fn push(&mut self, t: f64, cycle: u32, phase: Phase, value: f64) {
        self.log.rows.push(LogRow {
            timestamp_s: t,
            cycle,
            phase,
            strain_pct: self.rail.strain_pct(),
            reading_value: value,
            reading_unit: self.meter.unit(),
            sensor_id: self.sensor_id.clone(),
        });
    }

    /// Moves to `strain_pct` and records `samples` readings, then advances
    /// the clock by `duration_s`.
    fn hold(
        &mut self,
        cycle: u32,
        phase: Phase,
        strain_pct: f64,
        branch: Branch,
        samples: u32,
        duration_s: f64,
    ) -> Result<(), ExperimentError> {
        self.rail.move_to_strain(strain_pct);
        let start = self.clock_s;
        for k in 0..samples {
            let value = self.meter.read(strain_pct, branch)?;
            let t = start + k as f64 / self.cfg.sample_rate_hz;
            self.push(t, cycle, phase, value);
        }
        self.clock_s = start + duration_s;
        Ok(())
    }

    fn baseline(&mut self, cycle: u32) -> Result<(), ExperimentError> {
        let n = self.cfg.baseline_samples;
        let duration = n as f64 / self.cfg.sample_rate_hz;
        self.hold(cycle, Phase::Baseline, 0.0, Branch::Stretch, n, duration)
    }

    fn level(
        &mut self,
        cycle: u32,
        phase: Phase,
        strain: f64,
        branch: Branch,
    ) -> Result<(), ExperimentError> {
        let (n, hold) = (self.cfg.samples_per_point, self.cfg.hold_s);
        self.hold(cycle, phase, strain, branch, n, hold)
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Cyclic strain test: per cycle a fresh baseline, then stepwise loading
/// to the maximum and stepwise unloading back to zero.
pub fn run_cyclic(
    spec: &SensorSpec,
    cfg: &ProtocolConfig,
) -> Result<MeasurementLog, ExperimentError> {
    spec.validate()?;
    cfg.validate()?;
    if cfg.max_strain_pct > spec.failure_strain_pct() {
        return Err(ExperimentError::ExceedsFailure {
            max_pct: cfg.max_strain_pct,
            failure_pct: spec.failure_strain_pct(),
        });
    }
    let mut session = Session::new(spec, cfg, rng_for(cfg.rng_seed, 0), 0.0)?;
    let release = Branch::Release {
        max_strain_pct: cfg.max_strain_pct,
    };
    for cycle in 1..=cfg.cycles {
        session.baseline(cycle)?;
        for strain in cfg.stretch_levels() {
            session.level(cycle, Phase::Stretch, strain, Branch::Stretch)?;
        }
        for strain in cfg.release_levels() {
            session.level(cycle, Phase::Release, strain, release)?;
        }
    }
    Ok(session.log)
}

/// Strain-to-failure test: baseline, then loading in `strain_step_pct`
/// increments until the failure strain, then one open-circuit row at the
/// first level beyond it.
pub fn run_to_failure(
    spec: &SensorSpec,
    cfg: &ProtocolConfig,
) -> Result<MeasurementLog, ExperimentError> {
    cfg.validate()?;
    let failure = spec.failure_strain_pct();
    if !(failure >= 0.0) {
        return Err(ExperimentError::Sensor(SensorError::InvalidMaterials(
            "failure_strain_pct must be non-negative".into(),
        )));
    }
    let mut session = Session::new(spec, cfg, rng_for(cfg.rng_seed, 0), 0.0)?;
    session.baseline(1)?;

    let step = cfg.strain_step_pct;
    let mut k = 1u64;
    loop {
        let strain = k as f64 * step;
        if strain > failure + 1e-9 {
            // the failure strain itself is the last intact level
            let previous = (k - 1) as f64 * step;
            if failure > previous + 1e-9 {
                session.level(1, Phase::FailureRun, failure, Branch::Stretch)?;
            }
            session.rail.move_to_strain(strain);
            let t = session.clock_s;
            session.push(t, 1, Phase::FailureRun, f64::INFINITY);
            break;
        }
        session.level(1, Phase::FailureRun, strain.min(failure), Branch::Stretch)?;
        k += 1;
    }
    Ok(session.log)
}

/// Fabrication variability applied per sensor before measuring.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    /// Relative standard deviation applied to resistivity (resistive) or
    /// relative permittivity (capacitive).
    pub material_std_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatabilityRun {
    pub zero_values: Vec<(String, f64)>,
    pub unit: ReadingUnit,
    pub log: MeasurementLog,
}

/// Measures the unstrained baseline of each sensor (mean of
/// `baseline_samples` readings). Sensors are measured one after another on
/// a shared timeline with independent noise streams.
pub fn run_repeatability(
    specs: &[SensorSpec],
    cfg: &ProtocolConfig,
    perturbation: Perturbation,
) -> Result<RepeatabilityRun, ExperimentError> {
    let first = specs.first().ok_or(ExperimentError::NoSensors)?;
    cfg.validate()?;
    if specs.iter().any(|s| s.kind != first.kind) {
        return Err(ExperimentError::InvalidConfig(
            "repeatability runs need sensors of one kind".into(),
        ));
    }
    let fab_noise = if perturbation.material_std_rel > 0.0 {
        Some(
            Normal::new(0.0, perturbation.material_std_rel)
                .map_err(|e| ExperimentError::InvalidConfig(format!("perturbation: {e}")))?,
        )
    } else {
        None
    };

    let mut log = MeasurementLog::new();
    let mut zero_values = Vec::with_capacity(specs.len());
    let mut clock = 0.0;
    for (index, spec) in specs.iter().enumerate() {
        let mut spec = spec.clone();
        if let Some(n) = &fab_noise {
            let mut fab_rng = rng_for(cfg.rng_seed, 2 * index as u64 + 1);
            let factor = (1.0 + n.sample(&mut fab_rng)).max(1e-6);
            match spec.kind {
                SensorKind::Resistive => spec.materials.resistivity_ohm_m *= factor,
                SensorKind::Capacitive => spec.materials.rel_permittivity *= factor,
            }
        }
        let mut session = Session::new(&spec, cfg, rng_for(cfg.rng_seed, 2 * index as u64), clock)?;
        session.baseline(1)?;
        clock = session.clock_s;
        let readings: Vec<f64> = session.log.rows.iter().map(|r| r.reading_value).collect();
        let zero = stats::mean(&readings).expect("baseline_samples >= 1");
        zero_values.push((spec.id.clone(), zero));
        log.rows.append(&mut session.log.rows);
    }
    Ok(RepeatabilityRun {
        zero_values,
        unit: first.kind.unit(),
        log,
    })
}

/// `count` copies of a spec with ids `<prefix>-1 … <prefix>-count`.
pub fn replicate(spec: &SensorSpec, count: usize) -> Vec<SensorSpec> {
    (1..=count)
        .map(|i| SensorSpec {
            id: format!("{}-{i}", base_id(&spec.id)),
            ..spec.clone()
        })
        .collect()
}

fn base_id(id: &str) -> &str {
    match id.rsplit_once('-') {
        Some((base, n)) if n.chars().all(|c| c.is_ascii_digit()) => base,
        _ => id,
    }
}

/// A resistive spec whose resistivity is chosen so that its zero
/// resistance equals `target_ohm`.
pub fn resistive_with_zero(base: &SensorSpec, target_ohm: f64) -> SensorSpec {
    let mut spec = base.clone();
    if let Pattern::Serpentine(p) = &spec.pattern {
        let length_m = crate::sensor::serpentine_trace_length(p) * 1e-3;
        let area_m2 = p.line_width_mm * 1e-3 * spec.stack.ink_layer_thickness_mm * 1e-3;
        spec.materials.resistivity_ohm_m = target_ohm * area_m2 / length_m;
    }
    spec
}
