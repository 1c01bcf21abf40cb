//! Oracles and property checks shared by the property suite and the
//! acceptance runner. Nothing here calls into the code under test to
//! compute an expected value.

#![allow(dead_code)]

use inkbench_core::analysis::{
    build_curves, degree_of_hysteresis, least_squares, repeatability_stats,
};
use inkbench_core::experiment::{run_cyclic, MeasurementLog, Phase, ProtocolConfig};
use inkbench_core::gcode::{execute, parse};
use inkbench_core::sensor::{
    response_release, response_stretch, zero_capacitance, zero_resistance, CircularElectrode,
    Pattern, SensorSpec, SerpentinePattern,
};
use inkbench_core::toolpath::{
    compile_spec_layer, emit_fabrication_plan, CureSchedule, FabricationStep, PrintFrame,
    PrintParams, Tray,
};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub const MEASURED_RESISTIVE_KOHM: [f64; 7] = [200.0, 167.0, 140.0, 265.0, 230.0, 180.0, 310.0];
pub const MEASURED_CAPACITIVE_PF: [f64; 7] = [6.97, 6.95, 7.00, 6.90, 6.10, 6.10, 6.95];

/// Parallel plates: 12 mm discs, 0.5 mm gap, ε_r 3.35.
pub fn hand_capacitance_f() -> f64 {
    let radius_m = 0.006;
    let area_m2 = std::f64::consts::PI * radius_m * radius_m;
    8.854e-12 * 3.35 * area_m2 / 0.0005
}

/// Serpentine: 6 passes of 20 mm joined by 5 turns of 1.9 mm, 0.5 x 0.15 mm
/// section, ρ 0.1234 Ω·m.
pub fn hand_resistance_ohm() -> f64 {
    let length_m = (6.0 * 20.0 + 5.0 * 1.9) * 1e-3;
    let section_m2 = 0.5e-3 * 0.15e-3;
    0.1234 * length_m / section_m2
}

/// Straight-line fit by solving the 2x2 normal equations with Cramer's
/// rule on raw sums; R² from the squared sample correlation.
pub fn normal_equations(xy: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = xy.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y) in xy {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    // [n  sx ] [b]   [sy ]
    // [sx sxx] [m] = [sxy]
    let det = n * sxx - sx * sx;
    let b = (sy * sxx - sx * sxy) / det;
    let m = (n * sxy - sx * sy) / det;
    let cov = n * sxy - sx * sy;
    let var_y = n * syy - sy * sy;
    let r2 = if var_y == 0.0 {
        1.0
    } else {
        cov * cov / (det * var_y)
    };
    (m, b, r2)
}

pub fn noiseless(mut spec: SensorSpec) -> SensorSpec {
    spec.materials.noise_std_rel = 0.0;
    spec
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if ok {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

// ---- strategies ---------------------------------------------------------

/// Serpentines that fit the default 25 x 60 mm tray.
pub fn serpentine_strategy() -> impl Strategy<Value = SerpentinePattern> {
    (
        1.0..20.0f64,
        2.0..40.0f64,
        0.3..0.8f64,
        0.2..3.0f64,
        0.0..4.0f64,
    )
        .prop_map(
            |(width_mm, length_mm, line_width_mm, line_separation_mm, pad_side_mm)| {
                SerpentinePattern {
                    width_mm: width_mm.max(line_width_mm),
                    length_mm,
                    line_width_mm,
                    line_separation_mm,
                    pad_side_mm,
                }
            },
        )
}

pub fn electrode_strategy() -> impl Strategy<Value = CircularElectrode> {
    (0.6..24.0f64, 0.0..8.0f64).prop_map(|(diameter_mm, lead_length_mm)| CircularElectrode {
        diameter_mm,
        lead_length_mm,
    })
}

pub fn spec_strategy() -> impl Strategy<Value = SensorSpec> {
    prop_oneof![
        serpentine_strategy().prop_map(|p| SensorSpec {
            pattern: Pattern::Serpentine(p),
            ..SensorSpec::resistive_default()
        }),
        electrode_strategy().prop_map(|e| SensorSpec {
            pattern: Pattern::CircularElectrode(e),
            ..SensorSpec::capacitive_default()
        }),
    ]
}

pub fn params_strategy() -> impl Strategy<Value = PrintParams> {
    (0.3..0.8f64, 1.0..10.0f64, any::<bool>(), 0.0..1.0f64).prop_map(
        |(w, speed, retraction_enabled, retraction_mm_e)| PrintParams {
            line_width_mm: w,
            nozzle_inner_diameter_mm: w,
            print_speed_mm_s: speed,
            retraction_enabled,
            retraction_mm_e,
            ..PrintParams::default()
        },
    )
}

/// Protocols whose schedule stays within the default failure strains.
pub fn protocol_strategy() -> impl Strategy<Value = ProtocolConfig> {
    (
        1u32..4,
        1usize..9,
        prop::sample::select(vec![5.0, 10.0, 25.0, 50.0]),
        1u32..6,
        1u32..20,
        any::<u64>(),
    )
        .prop_map(
            |(cycles, steps, step, samples, baseline, seed)| ProtocolConfig {
                cycles,
                strain_step_pct: step,
                max_strain_pct: step * steps as f64,
                samples_per_point: samples,
                baseline_samples: baseline,
                rng_seed: seed,
                ..ProtocolConfig::default()
            },
        )
}

// ---- sensor model -------------------------------------------------------

pub fn prop_proportionality(spec: &SensorSpec, k: f64) -> Result<(), TestCaseError> {
    match &spec.pattern {
        Pattern::CircularElectrode(e) => {
            let mut scaled = spec.clone();
            // area scales with the square of the diameter
            scaled.pattern = Pattern::CircularElectrode(CircularElectrode {
                diameter_mm: e.diameter_mm * k.sqrt(),
                ..e.clone()
            });
            let c0 = zero_capacitance(spec).unwrap();
            let c1 = zero_capacitance(&scaled).unwrap();
            check(close(c1 / c0, k, 1e-12 * k), || {
                format!("C ratio {} for k {k}", c1 / c0)
            })
        }
        Pattern::Serpentine(p) => {
            let mut scaled = spec.clone();
            let length = |p: &SerpentinePattern| {
                let n = ((p.width_mm - p.line_width_mm) / (p.line_width_mm + p.line_separation_mm)
                    + 1e-9)
                    .floor()
                    + 1.0;
                n * p.length_mm + (n - 1.0) * (p.line_width_mm + p.line_separation_mm)
            };
            // stretch the passes so the centreline grows by k
            let n = ((p.width_mm - p.line_width_mm) / (p.line_width_mm + p.line_separation_mm)
                + 1e-9)
                .floor()
                + 1.0;
            let target = k * length(p);
            let turns = (n - 1.0) * (p.line_width_mm + p.line_separation_mm);
            let q = SerpentinePattern {
                length_mm: (target - turns) / n,
                ..p.clone()
            };
            if q.length_mm <= 0.0 {
                return Ok(());
            }
            scaled.pattern = Pattern::Serpentine(q.clone());
            let r0 = zero_resistance(spec).unwrap();
            let r1 = zero_resistance(&scaled).unwrap();
            let ratio = r1 / r0;
            let expected = length(&q) / length(p);
            check(close(ratio, expected, 1e-9 * expected), || {
                format!("R ratio {ratio} vs length ratio {expected}")
            })
        }
    }
}

pub fn prop_monotone(spec: &SensorSpec, a: f64, b: f64) -> Result<(), TestCaseError> {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let ra = response_stretch(spec, lo).unwrap();
    let rb = response_stretch(spec, hi).unwrap();
    check(ra <= rb, || {
        format!("response({lo}) = {ra} > response({hi}) = {rb}")
    })
}

fn with_dh(kind_resistive: bool, gf: f64, dh: f64) -> SensorSpec {
    let mut spec = if kind_resistive {
        SensorSpec::resistive_default()
    } else {
        SensorSpec::capacitive_default()
    };
    spec.materials.gf_capacitive = gf;
    spec.materials.gf_resistive = gf;
    spec.materials.dh_target_pct = dh;
    spec.materials.failure_strain_pct = 600.0;
    spec
}

pub fn prop_loop_closure(
    resistive: bool,
    gf: f64,
    dh: f64,
    s_max_pct: f64,
) -> Result<(), TestCaseError> {
    let spec = with_dh(resistive, gf, dh);
    let at_zero = response_release(&spec, 0.0, s_max_pct).unwrap();
    let at_max = response_release(&spec, s_max_pct, s_max_pct).unwrap();
    let stretch = response_stretch(&spec, s_max_pct).unwrap();
    check(at_zero.abs() < 1e-12, || format!("release(0) = {at_zero}"))?;
    check((at_max - stretch).abs() < 1e-12, || {
        format!("release(max) - stretch(max) = {}", at_max - stretch)
    })
}

/// Trapezoid areas over a dense uniform grid, computed here rather than by
/// the analysis module.
pub fn prop_dh_round_trip(gf: f64, dh: f64, s_max_pct: f64) -> Result<(), TestCaseError> {
    let spec = with_dh(true, gf, dh);
    let n = 2000;
    let xs: Vec<f64> = (0..=n)
        .map(|k| (s_max_pct * k as f64 / n as f64).min(s_max_pct))
        .collect();
    let trapz = |f: &dyn Fn(f64) -> f64| -> f64 {
        xs.windows(2)
            .map(|w| (w[1] - w[0]) / 100.0 * (f(w[0]) + f(w[1])) / 2.0)
            .sum()
    };
    let a_s = trapz(&|s| response_stretch(&spec, s).unwrap());
    let a_r = trapz(&|s| response_release(&spec, s, s_max_pct).unwrap());
    let got = (a_s - a_r) / a_s * 100.0;
    check((got - dh).abs() < 1e-6, || {
        format!("DH {got} for target {dh}")
    })
}

// ---- toolpath and virtual printer ---------------------------------------

fn frame_for(spec: &SensorSpec, params: &PrintParams, z: f64, layer: usize) -> PrintFrame {
    PrintFrame::new(Tray::for_spec(spec, params), z, layer)
}

/// Compiles one layer and checks bounds, conservation, retraction balance,
/// implied width, round-trip and determinism.
pub fn prop_compiled_layer(
    spec: &SensorSpec,
    params: &PrintParams,
    z: f64,
    layer: usize,
) -> Result<(), TestCaseError> {
    let frame = frame_for(spec, params, z, layer);
    let program = compile_spec_layer(spec, params, &frame)
        .map_err(|e| TestCaseError::fail(format!("compile: {e}")))?;
    let again = compile_spec_layer(spec, params, &frame).unwrap();
    check(program.emit() == again.emit(), || {
        "non-deterministic output".into()
    })?;

    let (segments, report) = execute(&program, &params.machine());
    check(report.violations.is_empty(), || {
        format!("violations: {:?}", report.violations)
    })?;

    // every deposit lies inside the tray, one half line width in from the edge
    let [cx, cy] = params.tray_center_mm;
    let [hx, hy] = [spec.footprint_mm[0] / 2.0, spec.footprint_mm[1] / 2.0];
    let margin = params.line_width_mm / 2.0;
    for s in &segments {
        for p in [s.start, s.end] {
            check(
                (p[0] - cx).abs() <= hx - margin + 1e-6 && (p[1] - cy).abs() <= hy - margin + 1e-6,
                || format!("deposit at {p:?} outside tray"),
            )?;
        }
        check(
            close(s.implied_line_width_mm, params.line_width_mm, 1e-6),
            || format!("implied width {}", s.implied_line_width_mm),
        )?;
        check(close(s.z, z, 1e-12), || {
            format!("deposit at z {} not {z}", s.z)
        })?;
    }

    // total positive E x syringe section = centreline x width x height
    let r = params.syringe_inner_diameter_mm / 2.0;
    let syringe = std::f64::consts::PI * r * r;
    let lhs = report.deposited_e_mm * syringe;
    let rhs = report.deposited_length_mm * params.line_width_mm * params.ink_layer_height_mm;
    check(close(lhs, rhs, 1e-9 * rhs.abs().max(1e-12)), || {
        format!("E volume {lhs} vs geometry {rhs}")
    })?;
    let seg_volume: f64 = segments.iter().map(|s| s.volume_mm3).sum();
    check(close(seg_volume, lhs, 1e-9 * lhs.abs().max(1e-12)), || {
        format!("segment volume {seg_volume} vs E volume {lhs}")
    })?;

    check(
        close(report.retracted_e_mm, report.primed_e_mm, 1e-9),
        || {
            format!(
                "retracted {} primed {}",
                report.retracted_e_mm, report.primed_e_mm
            )
        },
    )?;

    let text = program.emit();
    let reparsed = parse(&text).map_err(|e| TestCaseError::fail(format!("parse: {e}")))?;
    check(reparsed.emit() == text, || {
        "emit(parse(emit(p))) differs".into()
    })
}

pub fn prop_fabrication_schedule(spec: &SensorSpec) -> Result<(), TestCaseError> {
    let plan = emit_fabrication_plan(spec, &PrintParams::default(), &CureSchedule::default())
        .map_err(|e| TestCaseError::fail(format!("plan: {e}")))?;
    let expected_prints = match spec.pattern {
        Pattern::CircularElectrode(_) => 2,
        Pattern::Serpentine(_) => 1,
    };
    check(plan.ink_layer_count() == expected_prints, || {
        format!("{} prints", plan.ink_layer_count())
    })?;
    let mut z = 0.0;
    let mut last_cured = false;
    for step in &plan.steps {
        match step {
            FabricationStep::PourSilicone { thickness_mm, .. } => {
                z += thickness_mm;
                last_cured = false;
            }
            FabricationStep::Cure { .. } => last_cured = true,
            FabricationStep::PrintInk { surface_z_mm, .. } => {
                check(last_cured, || "print on uncured silicone".into())?;
                check(close(*surface_z_mm, z, 1e-12), || {
                    format!("print at z {surface_z_mm}, surface {z}")
                })?;
            }
            FabricationStep::StackTray { .. } => {}
        }
    }
    check(close(z, spec.stack.total_thickness_mm, 1e-9), || {
        format!("poured {z} mm")
    })
}

// ---- experiment ---------------------------------------------------------

/// Strain goes 0 -> max -> 0 in uniform steps within every cycle, each
/// cycle opens with exactly `baseline_samples` rows at zero strain.
pub fn prop_schedule(spec: &SensorSpec, cfg: &ProtocolConfig) -> Result<(), TestCaseError> {
    let log = run_cyclic(spec, cfg).map_err(|e| TestCaseError::fail(format!("run: {e}")))?;
    check(log.len() == cfg.cyclic_row_count(), || {
        format!("{} rows", log.len())
    })?;
    for cycle in 1..=cfg.cycles {
        let rows: Vec<_> = log.rows.iter().filter(|r| r.cycle == cycle).collect();
        let baseline = rows
            .iter()
            .take_while(|r| r.phase == Phase::Baseline)
            .count();
        check(baseline == cfg.baseline_samples as usize, || {
            format!("cycle {cycle}: {baseline} baseline rows")
        })?;
        check(rows[..baseline].iter().all(|r| r.strain_pct == 0.0), || {
            "baseline off zero".into()
        })?;

        let mut levels: Vec<(Phase, f64)> = Vec::new();
        for r in &rows[baseline..] {
            if levels.last() != Some(&(r.phase, r.strain_pct)) {
                levels.push((r.phase, r.strain_pct));
            }
        }
        let steps = (cfg.max_strain_pct / cfg.strain_step_pct).round() as usize;
        let mut expected: Vec<(Phase, f64)> = (0..=steps)
            .map(|k| (Phase::Stretch, k as f64 * cfg.strain_step_pct))
            .collect();
        expected.extend(
            (0..steps)
                .rev()
                .map(|k| (Phase::Release, k as f64 * cfg.strain_step_pct)),
        );
        check(levels == expected, || {
            format!("cycle {cycle} levels {levels:?}")
        })?;
        check(
            rows[baseline..]
                .iter()
                .filter(|r| r.phase != Phase::Baseline)
                .count()
                == (2 * steps + 1) * cfg.samples_per_point as usize,
            || "samples per level".into(),
        )?;
    }
    log.check_timestamps()
        .map_err(|e| TestCaseError::fail(e.to_string()))
}

pub fn prop_determinism(spec: &SensorSpec, cfg: &ProtocolConfig) -> Result<(), TestCaseError> {
    let a = run_cyclic(spec, cfg).unwrap().to_csv_string();
    let b = run_cyclic(spec, cfg).unwrap().to_csv_string();
    check(a == b, || "same seed, different log".into())?;
    if spec.materials.noise_std_rel > 0.0 {
        let other = ProtocolConfig {
            rng_seed: cfg.rng_seed.wrapping_add(1),
            ..cfg.clone()
        };
        let c = run_cyclic(spec, &other).unwrap().to_csv_string();
        check(a != c, || "different seeds, same log".into())?;
    }
    Ok(())
}

/// Noiseless, hysteresis-free: every level's mean equals the model.
pub fn prop_noiseless_levels(spec: &SensorSpec, cfg: &ProtocolConfig) -> Result<(), TestCaseError> {
    let mut spec = noiseless(spec.clone());
    spec.materials.dh_target_pct = 0.0;
    let log = run_cyclic(&spec, cfg).unwrap();
    let zero = log.rows[0].reading_value;
    for c in build_curves(&log).unwrap() {
        for p in c.stretch_points.iter().chain(&c.release_points) {
            let model = response_stretch(&spec, p.strain_pct).unwrap();
            let got_reading = zero * (1.0 + p.relative_change);
            let want_reading = zero * (1.0 + model);
            check(
                close(got_reading, want_reading, 1e-12 * want_reading.abs()),
                || format!("level {}: {got_reading} vs {want_reading}", p.strain_pct),
            )?;
        }
    }
    Ok(())
}

// ---- analysis -----------------------------------------------------------

pub fn prop_fit_matches_oracle(xy: &[(f64, f64)]) -> Result<(), TestCaseError> {
    let (m, b, r2) = least_squares(xy).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let (om, ob, or2) = normal_equations(xy);
    let scale = |v: f64| 1e-9 * v.abs().max(1.0);
    check(close(m, om, scale(om)), || format!("slope {m} vs {om}"))?;
    check(close(b, ob, scale(ob)), || format!("intercept {b} vs {ob}"))?;
    check(close(r2, or2.clamp(0.0, 1.0), 1e-9), || {
        format!("R² {r2} vs {or2}")
    })
}

pub fn dataset_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
    (3usize..40, -5.0..5.0f64, -20.0..20.0f64, 0.0..2.0f64).prop_flat_map(|(n, b, m, sigma)| {
        prop::collection::vec((0.0..6.0f64, -1.0..1.0f64), n).prop_map(move |pts| {
            pts.into_iter()
                .map(|(x, u)| (x, b + m * x + sigma * u))
                .collect()
        })
    })
}

pub fn prop_dh_scale_invariance(log: &MeasurementLog, k: f64) -> Result<(), TestCaseError> {
    let curves = build_curves(log).unwrap();
    for c in &curves {
        let mut scaled = c.clone();
        for p in scaled
            .stretch_points
            .iter_mut()
            .chain(scaled.release_points.iter_mut())
        {
            p.relative_change *= k;
        }
        let a = degree_of_hysteresis(c).unwrap();
        let b = degree_of_hysteresis(&scaled).unwrap();
        check(close(a, b, 1e-9 * a.abs().max(1.0)), || {
            format!("DH {a} vs {b} after scaling by {k}")
        })?;
    }
    Ok(())
}

pub fn prop_stats_permutation(values: &[f64], perm_seed: u64) -> Result<(), TestCaseError> {
    let mut shuffled = values.to_vec();
    // Fisher-Yates with a fixed LCG keeps this independent of the crate RNG
    let mut state = perm_seed | 1;
    for i in (1..shuffled.len()).rev() {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        let j = (state >> 33) as usize % (i + 1);
        shuffled.swap(i, j);
    }
    let a = repeatability_stats(values).unwrap();
    let b = repeatability_stats(&shuffled).unwrap();
    let tol = |v: f64| 1e-12 * v.abs().max(1.0);
    check(close(a.mean, b.mean, tol(a.mean)), || "mean changed".into())?;
    check(close(a.sample_std, b.sample_std, tol(a.mean)), || {
        "std changed".into()
    })
}
