//! Config-driven experiments: burn → calibrate → march → analyze, plus the
//! sweeps over hole depth and H duration and the artifacts they leave behind.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{
    detect_echoes, fit_exponential, group_delay, group_delay_peak, group_velocity, optical_depth, slow_factor,
    widened, EchoEvent, FitResult,
};
use crate::burn::{burn, kk_group_delay, predicted_group_delay, BurnConfig, BurnDirection, BurnModel, PopulationMap};
use crate::config::{OutputFormat, ScenarioConfig, ScenarioKind, SweepVariable};
use crate::error::{Error, Result};
use crate::model::{build_weights, Grids, MediumSpec, PulseLabel, PulseSequence, SpectralWeights};
use crate::propagate::{calibrate_coupling, march, probe_transmission, CouplingConstant, FieldRecord, MarchOptions};
use crate::svg;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything a march needs that does not depend on the burn.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub medium: MediumSpec,
    pub grids: Grids,
    pub weights: SpectralWeights,
    pub kappa: CouplingConstant,
    pub sequence: PulseSequence,
    pub input: Vec<num_complex::Complex64>,
    /// Hole width from the burn config, used by the delay predictor.
    pub hole_hwhm: Option<f64>,
}

impl Prepared {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        let weights = build_weights(&cfg.grids, cfg.line)?;
        let kappa = calibrate_coupling(&cfg.medium, &cfg.grids, &weights).map_err(|e| e.context("calibration"))?;
        Ok(Self::with_kappa(cfg, weights, kappa))
    }

    fn with_kappa(cfg: &ScenarioConfig, weights: SpectralWeights, kappa: CouplingConstant) -> Self {
        Prepared {
            medium: cfg.medium.clone(),
            grids: cfg.grids,
            weights,
            kappa,
            sequence: cfg.sequence.clone(),
            input: cfg.sequence.render(&cfg.grids),
            hole_hwhm: cfg.burn.as_ref().map(|b| b.hole_hwhm),
        }
    }

    pub fn unburned(&self) -> PopulationMap {
        PopulationMap::unburned(&self.grids, &self.medium)
    }

    pub fn burn(&self, cfg: &BurnConfig) -> Result<PopulationMap> {
        burn(&self.medium, &self.grids, &self.weights, cfg).map_err(|e| e.context("burn"))
    }
}

/// Observables of one march.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub label: String,
    pub kappa: f64,
    pub optical_depth: f64,
    /// Centroid delay of the data pulse; `None` when no output pulse is detectable.
    pub tau_g_us: Option<f64>,
    pub tau_g_peak_us: Option<f64>,
    pub v_g_km_s: Option<f64>,
    pub eta: Option<f64>,
    /// Kramers–Kronig delay of the hole alone; 0 without a hole.
    pub tau_g_predicted_us: f64,
    /// Kramers–Kronig delay of the whole map (hole plus window edges).
    pub tau_g_kk_total_us: f64,
    pub hole_depth_entrance: f64,
    pub mean_hole_depth: f64,
    pub energy_in: f64,
    pub energy_out: f64,
    /// Output energy in the widened data-pulse window (transmitted S_D).
    pub s_d_energy: f64,
    pub absorbed_fraction_d: f64,
    pub echoes: Vec<EchoEvent>,
    /// Primary echo efficiency (0 if none detected).
    pub echo_efficiency: f64,
    pub echo_efficiency_sum: f64,
    pub max_population_drift: f64,
    pub map_conservation_error: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub record: FieldRecord,
    pub map: PopulationMap,
    pub report: RunReport,
}

fn window_energy(field: &[num_complex::Complex64], t: &[f64], w: (f64, f64), dt: f64) -> f64 {
    field
        .iter()
        .zip(t)
        .filter(|(_, &x)| x >= w.0 && x <= w.1)
        .map(|(f, _)| f.norm_sqr())
        .sum::<f64>()
        * dt
}

/// Marches the prepared input through `map` and analyzes the result.
pub fn run_point(prep: &Prepared, map: PopulationMap, label: &str, probes: &[usize]) -> Result<RunOutcome> {
    let opts = MarchOptions {
        probes: probes.to_vec(),
        store_full: false,
    };
    let record = march(&prep.input, &prep.medium, &prep.grids, &prep.weights, &map, prep.kappa, &opts)
        .map_err(|e| e.context(format!("march ({label})")))?;
    let report = analyze(prep, &map, &record, label)?;
    Ok(RunOutcome { record, map, report })
}

fn analyze(prep: &Prepared, map: &PopulationMap, record: &FieldRecord, label: &str) -> Result<RunReport> {
    let seq = &prep.sequence;
    let d = seq
        .find(&PulseLabel::D)
        .ok_or_else(|| Error::Analysis("sequence has no data pulse".into()))?;
    let ctx = |e: Error| e.context(format!("analysis ({label})"));
    let od = optical_depth(record, d.window()).map_err(ctx)?;
    let tau = group_delay(record, d.window()).ok();
    let tau_peak = group_delay_peak(record, d.window()).ok();
    let v_g = tau.and_then(|t| group_velocity(t, &prep.medium).ok());
    let eta = v_g.and_then(|v| slow_factor(v).ok());
    let hwhm = prep.hole_hwhm.unwrap_or(0.0);
    let predicted = match predicted_group_delay(map, &prep.medium, &prep.weights, hwhm) {
        Ok(t) => t,
        Err(Error::NoHole { .. }) => 0.0,
        Err(e) => return Err(ctx(e)),
    };
    let echoes = detect_echoes(record, seq).map_err(ctx)?;
    let dt = record.dt();
    let e_d = window_energy(&record.omega_in, &record.t_grid, d.window(), dt);
    let out_d = window_energy(&record.omega_out, &record.t_grid, d.window(), dt);
    let primary = seq.echo_time_us().and_then(|t_e| {
        echoes
            .iter()
            .find(|e| e.window.0 <= t_e && t_e <= e.window.1)
            .map(|e| e.efficiency)
    });
    let profile = map.hole_profile();
    Ok(RunReport {
        label: label.to_string(),
        kappa: prep.kappa.kappa,
        optical_depth: od,
        tau_g_us: tau,
        tau_g_peak_us: tau_peak,
        v_g_km_s: v_g,
        eta,
        tau_g_predicted_us: predicted,
        tau_g_kk_total_us: kk_group_delay(map, &prep.medium, &prep.weights),
        hole_depth_entrance: profile.first().copied().unwrap_or(0.0),
        mean_hole_depth: map.mean_hole_depth(),
        energy_in: record.energy_in(),
        energy_out: record.energy_out(),
        s_d_energy: window_energy(&record.omega_out, &record.t_grid, widened(d.window()), dt),
        absorbed_fraction_d: if e_d > 0.0 { 1.0 - out_d / e_d } else { 0.0 },
        echo_efficiency: primary.unwrap_or(0.0),
        echo_efficiency_sum: echoes.iter().map(|e| e.efficiency).sum(),
        echoes,
        max_population_drift: record.max_population_drift,
        map_conservation_error: map.max_conservation_error(),
    })
}

pub fn run_single(cfg: &ScenarioConfig) -> Result<RunOutcome> {
    let prep = Prepared::new(cfg)?;
    run_single_prepared(cfg, &prep)
}

fn run_single_prepared(cfg: &ScenarioConfig, prep: &Prepared) -> Result<RunOutcome> {
    let map = match &cfg.burn {
        Some(b) => prep.burn(b)?,
        None => prep.unburned(),
    };
    let label = if cfg.burn.is_some() { "burn" } else { "no_burn" };
    run_point(prep, map, label, &cfg.probe_indices()?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairReport {
    pub no_burn: RunReport,
    pub with_burn: RunReport,
    /// with_burn / no_burn primary echo efficiency.
    pub enhancement: f64,
    /// with_burn / no_burn absorbed fraction of the data pulse.
    pub absorption_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct PairOutcome {
    pub no_burn: RunOutcome,
    pub with_burn: RunOutcome,
    pub report: PairReport,
}

fn need_burn(cfg: &ScenarioConfig) -> Result<&BurnConfig> {
    cfg.burn
        .as_ref()
        .ok_or_else(|| Error::Config(format!("{} needs burn.model", cfg.scenario.name())))
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        f64::NAN
    }
}

pub fn run_fig2_pair(cfg: &ScenarioConfig) -> Result<PairOutcome> {
    let prep = Prepared::new(cfg)?;
    let b = need_burn(cfg)?;
    let probes = cfg.probe_indices()?;
    let burned = prep.burn(b)?;
    let (no_burn, with_burn) = rayon::join(
        || run_point(&prep, prep.unburned(), "no_burn", &probes),
        || run_point(&prep, burned, "burn", &probes),
    );
    let (no_burn, with_burn) = (no_burn?, with_burn?);
    let report = PairReport {
        enhancement: ratio(with_burn.report.echo_efficiency, no_burn.report.echo_efficiency),
        absorption_ratio: ratio(with_burn.report.absorbed_fraction_d, no_burn.report.absorbed_fraction_d),
        no_burn: no_burn.report.clone(),
        with_burn: with_burn.report.clone(),
    };
    Ok(PairOutcome {
        no_burn,
        with_burn,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlReport {
    pub forward: RunReport,
    pub backward: RunReport,
    pub no_burn: RunReport,
    pub backward_below_forward: bool,
}

#[derive(Debug, Clone)]
pub struct ControlOutcome {
    pub forward: RunOutcome,
    pub backward: RunOutcome,
    pub no_burn: RunOutcome,
    pub report: ControlReport,
}

pub fn run_backward_control(cfg: &ScenarioConfig) -> Result<ControlOutcome> {
    let prep = Prepared::new(cfg)?;
    let b = need_burn(cfg)?;
    let probes = cfg.probe_indices()?;
    let fwd_cfg = BurnConfig {
        burn_direction: BurnDirection::Forward,
        ..b.clone()
    };
    let bwd_cfg = BurnConfig {
        burn_direction: BurnDirection::Backward,
        ..b.clone()
    };
    let maps = [prep.burn(&fwd_cfg)?, prep.burn(&bwd_cfg)?, prep.unburned()];
    let labels = ["forward", "backward", "no_burn"];
    let mut runs: Vec<RunOutcome> = maps
        .into_par_iter()
        .zip(labels)
        .map(|(m, l)| run_point(&prep, m, l, &probes))
        .collect::<Result<_>>()?;
    let no_burn = runs.pop().expect("three runs");
    let backward = runs.pop().expect("three runs");
    let forward = runs.pop().expect("three runs");
    let report = ControlReport {
        backward_below_forward: backward.report.echo_efficiency < forward.report.echo_efficiency,
        forward: forward.report.clone(),
        backward: backward.report.clone(),
        no_burn: no_burn.report.clone(),
    };
    Ok(ControlOutcome {
        forward,
        backward,
        no_burn,
        report,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub t_h_us: f64,
    pub hole_depth: f64,
    pub tau_g_us: f64,
    pub v_g_km_s: f64,
    pub eta: f64,
    pub echo_efficiency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Exponential fit of echo efficiency against τ_g over the rows with
    /// positive delay and efficiency; `None` if fewer than three qualify.
    pub fit: Option<FitResult>,
}

pub const SWEEP_HEADER: &str = "t_h_us,hole_depth,tau_g_us,v_g_km_s,eta,echo_efficiency";

impl SweepResult {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{SWEEP_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.t_h_us, r.hole_depth, r.tau_g_us, r.v_g_km_s, r.eta, r.echo_efficiency
            )?;
        }
        Ok(())
    }

    /// (τ_g, efficiency) pairs usable by the exponential fit.
    pub fn fit_points(&self) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.tau_g_us > 0.0 && r.echo_efficiency > 0.0)
            .map(|r| (r.tau_g_us, r.echo_efficiency))
            .collect()
    }
}

/// Extremum of the hole-centre ground population along a T_H scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extremum {
    pub t_h_us: f64,
    pub is_minimum: bool,
    /// Nearest kπ/Ω_H of the matching parity.
    pub expected_t_h_us: f64,
    pub within_one_step: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    /// Entrance hole-centre n_g per scan point.
    pub n_g_center: Vec<f64>,
    pub s_d_energy: Vec<f64>,
    pub extrema: Vec<Extremum>,
    pub extrema_ok: bool,
    /// Index of the largest echo efficiency, and whether it is interior.
    pub echo_argmax: usize,
    pub echo_interior_max: bool,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub result: SweepResult,
    pub points: Vec<RunReport>,
    pub maps: Vec<PopulationMap>,
    pub scan: Option<ScanReport>,
}

/// Burn configuration for one sweep value.
fn sweep_burn(base: &BurnConfig, medium: &MediumSpec, variable: SweepVariable, v: f64) -> Result<BurnConfig> {
    let mut b = base.clone();
    match variable {
        SweepVariable::THUs => {
            if !(v >= 0.0) {
                return Err(Error::Config(format!("t_h_us value {v} must be >= 0")));
            }
            b.h_pulse.duration_us = v;
            b.h_pulse.t_start_us = -b.wait_after_h_us - v;
        }
        SweepVariable::HoleDepth => {
            if b.model != BurnModel::RateSaturation {
                return Err(Error::Config("a hole_depth sweep needs burn.model = rate_saturation".into()));
            }
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(format!("hole_depth value {v} must lie in [0, 1)")));
            }
            // entrance depth s/(1+s) = v
            let s = v / (1.0 - v);
            b.h_pulse.rabi_peak = (s * b.saturation_intensity(medium)).sqrt();
        }
    }
    Ok(b)
}

fn sweep_core(cfg: &ScenarioConfig) -> Result<(Prepared, Vec<RunOutcome>, Vec<f64>)> {
    let base = need_burn(cfg)?;
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("sweep.values is required".into()))?;
    let mut values = sweep.values.clone();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let prep = Prepared::new(cfg)?;
    let probes = cfg.probe_indices()?;
    let burns: Vec<BurnConfig> = values
        .iter()
        .map(|&v| sweep_burn(base, &prep.medium, sweep.variable, v))
        .collect::<Result<_>>()?;
    let runs: Vec<RunOutcome> = burns
        .par_iter()
        .zip(&values)
        .map(|(b, v)| {
            let map = prep.burn(b)?;
            run_point(&prep, map, &format!("{v}"), &probes)
        })
        .collect::<Result<_>>()?;
    Ok((prep, runs, values))
}

fn rows(runs: &[RunOutcome], t_h: impl Fn(usize) -> f64) -> Vec<SweepRow> {
    runs.iter()
        .enumerate()
        .map(|(i, r)| SweepRow {
            t_h_us: t_h(i),
            hole_depth: r.report.hole_depth_entrance,
            tau_g_us: r.report.tau_g_us.unwrap_or(f64::NAN),
            v_g_km_s: r.report.v_g_km_s.unwrap_or(f64::NAN),
            eta: r.report.eta.unwrap_or(f64::NAN),
            echo_efficiency: r.report.echo_efficiency,
        })
        .collect()
}

pub fn run_fig3_sweep(cfg: &ScenarioConfig) -> Result<SweepOutcome> {
    if cfg.sweep.as_ref().map_or(0, |s| s.values.len()) < 2 {
        return Err(Error::Config("fig3_sweep needs at least two sweep values".into()));
    }
    let base = need_burn(cfg)?;
    let variable = cfg.sweep.as_ref().map(|s| s.variable);
    let (_, runs, values) = sweep_core(cfg)?;
    let rows = rows(&runs, |i| match variable {
        Some(SweepVariable::THUs) => values[i],
        _ => base.h_pulse.duration_us,
    });
    let mut result = SweepResult { rows, fit: None };
    let points = result.fit_points();
    if points.len() < 3 {
        return Err(Error::Analysis(format!(
            "only {} sweep points have a positive delay and echo; need 3",
            points.len()
        )));
    }
    result.fit = Some(fit_exponential(&points, cfg.c_mode)?);
    Ok(SweepOutcome {
        points: runs.iter().map(|r| r.report.clone()).collect(),
        maps: runs.into_iter().map(|r| r.map).collect(),
        result,
        scan: None,
    })
}

/// Interior extrema of `y` and whether each lies within one scan step of the
/// nearest kπ/Ω of matching parity (even k for maxima, odd for minima).
pub fn cosine_extrema(t: &[f64], y: &[f64], omega: f64) -> Vec<Extremum> {
    let step = t.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let mut out = Vec::new();
    for i in 1..y.len().saturating_sub(1) {
        let is_min = y[i] < y[i - 1] && y[i] <= y[i + 1];
        let is_max = y[i] > y[i - 1] && y[i] >= y[i + 1];
        if !(is_min || is_max) {
            continue;
        }
        let half = (t[i] * omega / std::f64::consts::PI - if is_min { 1.0 } else { 0.0 }) / 2.0;
        let k = 2.0 * half.round().max(0.0) + if is_min { 1.0 } else { 0.0 };
        let expected = k * std::f64::consts::PI / omega;
        out.push(Extremum {
            t_h_us: t[i],
            is_minimum: is_min,
            expected_t_h_us: expected,
            within_one_step: (t[i] - expected).abs() <= step + 1e-12,
        });
    }
    out
}

pub fn run_fig4_scan(cfg: &ScenarioConfig) -> Result<SweepOutcome> {
    let base = need_burn(cfg)?;
    if !matches!(base.model, BurnModel::DampedRabi { .. }) {
        return Err(Error::Config("fig4_scan needs burn.model = damped_rabi".into()));
    }
    if cfg.sweep.as_ref().map(|s| s.variable) != Some(SweepVariable::THUs) {
        return Err(Error::Config("fig4_scan sweeps sweep.variable = t_h_us".into()));
    }
    let (_, runs, values) = sweep_core(cfg)?;
    let result_rows = rows(&runs, |i| values[i]);
    let n_g_center: Vec<f64> = runs
        .iter()
        .map(|r| {
            let c = r.map.center_index();
            r.map.ground(0, c)
        })
        .collect();
    let extrema = cosine_extrema(&values, &n_g_center, base.h_pulse.rabi_peak);
    let eff: Vec<f64> = result_rows.iter().map(|r| r.echo_efficiency).collect();
    let echo_argmax = eff
        .iter()
        .enumerate()
        .fold(0, |best, (i, &e)| if e > eff[best] { i } else { best });
    let scan = ScanReport {
        n_g_center,
        s_d_energy: runs.iter().map(|r| r.report.s_d_energy).collect(),
        extrema_ok: !extrema.is_empty() && extrema.iter().all(|e| e.within_one_step),
        extrema,
        echo_argmax,
        echo_interior_max: echo_argmax > 0 && echo_argmax + 1 < eff.len(),
    };
    let mut result = SweepResult {
        rows: result_rows,
        fit: None,
    };
    let points = result.fit_points();
    if points.len() >= 3 {
        result.fit = fit_exponential(&points, cfg.c_mode).ok();
    }
    Ok(SweepOutcome {
        points: runs.iter().map(|r| r.report.clone()).collect(),
        maps: runs.into_iter().map(|r| r.map).collect(),
        result,
        scan: Some(scan),
    })
}

/// Grid-convergence indicator: relative change of the weak-probe output
/// energy through the unburned medium when nz is doubled at fixed κ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Convergence {
    pub nz: usize,
    pub nz_refined: usize,
    pub transmission: f64,
    pub transmission_refined: f64,
    pub relative_delta: f64,
}

pub fn convergence_indicator(prep: &Prepared) -> Result<Convergence> {
    let fine = prep.grids.refined_z();
    let a = probe_transmission(&prep.medium, &prep.grids, &prep.weights, prep.kappa)?;
    let b = probe_transmission(&prep.medium, &fine, &prep.weights, prep.kappa)?;
    Ok(Convergence {
        nz: prep.grids.nz,
        nz_refined: fine.nz,
        transmission: a,
        transmission_refined: b,
        relative_delta: ((b - a) / a).abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub scenario: &'static str,
    pub config_hash_sha256: String,
    pub modules: Vec<(&'static str, &'static str)>,
    pub kappa: f64,
    pub convergence: Option<Convergence>,
    pub artifacts: Vec<String>,
}

const MODULES: [&str; 6] = ["core-model", "prep-burn", "bloch-dynamics", "propagation", "analysis", "scenarios-cli"];

/// Result of any scenario, ready to be written out.
#[derive(Debug, Clone)]
pub enum Outcome {
    Single(RunOutcome),
    Pair(PairOutcome),
    Control(ControlOutcome),
    Sweep(SweepOutcome),
}

impl Outcome {
    /// Summary serialized to stdout by the CLI.
    pub fn summary_json(&self) -> Result<String> {
        Ok(match self {
            Outcome::Single(r) => serde_json::to_string_pretty(&r.report)?,
            Outcome::Pair(p) => serde_json::to_string_pretty(&p.report)?,
            Outcome::Control(c) => serde_json::to_string_pretty(&c.report)?,
            Outcome::Sweep(s) => serde_json::to_string_pretty(&s.result)?,
        })
    }
}

pub fn run(cfg: &ScenarioConfig) -> Result<Outcome> {
    let scenario = cfg.scenario.name();
    let ctx = |e: Error| e.context(format!("scenario {scenario}"));
    Ok(match cfg.scenario {
        ScenarioKind::SingleRun => Outcome::Single(run_single(cfg).map_err(ctx)?),
        ScenarioKind::Fig2Pair => Outcome::Pair(run_fig2_pair(cfg).map_err(ctx)?),
        ScenarioKind::BackwardControl => Outcome::Control(run_backward_control(cfg).map_err(ctx)?),
        ScenarioKind::Fig3Sweep => Outcome::Sweep(run_fig3_sweep(cfg).map_err(ctx)?),
        ScenarioKind::Fig4Scan => Outcome::Sweep(run_fig4_scan(cfg).map_err(ctx)?),
    })
}

struct Sink<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl Sink<'_> {
    fn file(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(self.dir.join(name))?);
        f(&mut w)?;
        w.flush()?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        self.file(name, |w| writeln!(w, "{text}"))
    }

    fn text(&mut self, name: &str, text: &str) -> Result<()> {
        self.file(name, |w| w.write_all(text.as_bytes()))
    }

    fn trace(&mut self, stem: &str, r: &RunOutcome) -> Result<()> {
        self.file(&format!("{stem}.csv"), |w| r.record.write_csv(w))?;
        if !r.record.probes.is_empty() {
            self.file(&format!("{stem}_probes.csv"), |w| write_probes(w, &r.record))?;
        }
        self.text(&format!("{stem}.svg"), &svg::trace_plot(&r.record, &r.report.label))
    }

    fn map(&mut self, name: &str, m: &PopulationMap) -> Result<()> {
        self.file(name, |w| m.write_csv(w))
    }
}

fn write_probes<W: Write>(mut w: W, rec: &FieldRecord) -> std::io::Result<()> {
    write!(w, "t_us")?;
    for p in &rec.probes {
        write!(w, ",re_z{0},im_z{0}", p.z_mm)?;
    }
    writeln!(w)?;
    for (i, t) in rec.t_grid.iter().enumerate() {
        write!(w, "{t}")?;
        for p in &rec.probes {
            write!(w, ",{},{}", p.field[i].re, p.field[i].im)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Writes the scenario's artifacts and its manifest into `dir`.
pub fn write_artifacts(cfg: &ScenarioConfig, outcome: &Outcome, dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut sink = Sink { dir, written: Vec::new() };
    sink.text("config.txt", cfg.canonical_text())?;
    let kappa = match outcome {
        Outcome::Single(r) => {
            sink.trace("trace", r)?;
            if cfg.burn.is_some() {
                sink.map("population.csv", &r.map)?;
            }
            sink.json("report.json", &r.report)?;
            r.report.kappa
        }
        Outcome::Pair(p) => {
            sink.trace("trace_no_burn", &p.no_burn)?;
            sink.trace("trace_burn", &p.with_burn)?;
            sink.map("population.csv", &p.with_burn.map)?;
            sink.json("report.json", &p.report)?;
            p.report.no_burn.kappa
        }
        Outcome::Control(c) => {
            sink.trace("trace_forward", &c.forward)?;
            sink.trace("trace_backward", &c.backward)?;
            sink.trace("trace_no_burn", &c.no_burn)?;
            sink.map("population_forward.csv", &c.forward.map)?;
            sink.map("population_backward.csv", &c.backward.map)?;
            sink.json("report.json", &c.report)?;
            c.report.no_burn.kappa
        }
        Outcome::Sweep(s) => {
            match cfg.format {
                OutputFormat::Csv => sink.file("sweep.csv", |w| s.result.write_csv(w))?,
                OutputFormat::Json => sink.json("sweep.json", &s.result.rows)?,
            }
            if let Some(fit) = &s.result.fit {
                sink.json("fit.json", fit)?;
            }
            sink.json("points.json", &s.points)?;
            if let Some(scan) = &s.scan {
                sink.file("scan.csv", |w| write_scan(w, &s.result, scan))?;
                sink.json("scan.json", scan)?;
                sink.text("scan.svg", &svg::scan_plot(&s.result, scan))?;
            } else {
                sink.text("sweep.svg", &svg::sweep_plot(&s.result))?;
            }
            s.points.first().map_or(0.0, |p| p.kappa)
        }
    };
    let convergence = if cfg.convergence_check {
        let weights = build_weights(&cfg.grids, cfg.line)?;
        let prep = Prepared::with_kappa(cfg, weights, CouplingConstant { kappa });
        Some(convergence_indicator(&prep).map_err(|e| e.context("convergence check"))?)
    } else {
        None
    };
    let manifest = Manifest {
        scenario: cfg.scenario.name(),
        config_hash_sha256: cfg.hash_hex(),
        modules: MODULES.iter().map(|m| (*m, VERSION)).collect(),
        kappa,
        convergence,
        artifacts: sink.written.clone(),
    };
    sink.json("manifest.json", &manifest)?;
    Ok(manifest)
}

fn write_scan<W: Write>(mut w: W, result: &SweepResult, scan: &ScanReport) -> std::io::Result<()> {
    writeln!(w, "t_h_us,n_g_center,tau_g_us,s_d_energy,echo_efficiency")?;
    for (i, r) in result.rows.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.t_h_us, scan.n_g_center[i], r.tau_g_us, scan.s_d_energy[i], r.echo_efficiency
        )?;
    }
    Ok(())
}
