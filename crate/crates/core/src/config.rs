//! Flat `dotted.key = value` scenario files.
//!
//! One key per line, `#` starts a comment, blank lines are ignored. Unknown
//! keys are rejected so typos fail loudly instead of silently using a default.
//!
//! ```text
//! scenario = fig2_pair
//! medium.optical_depth_d0 = 2.2
//! sequence.d.t_start_us = 1.0
//! sequence.d.duration_us = 1.5
//! sequence.d.area_pi = 0.5
//! burn.model = rate_saturation
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::CMode;
use crate::burn::{BurnConfig, BurnDirection, BurnModel};
use crate::error::{Error, Result};
use crate::model::{
    validate_sequence, Grids, LineShape, MediumSpec, Pulse, PulseLabel, PulseSequence, PulseShape,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    SingleRun,
    Fig2Pair,
    Fig3Sweep,
    Fig4Scan,
    BackwardControl,
}

impl ScenarioKind {
    pub fn is_sweep(self) -> bool {
        matches!(self, ScenarioKind::Fig3Sweep | ScenarioKind::Fig4Scan)
    }

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::SingleRun => "single_run",
            ScenarioKind::Fig2Pair => "fig2_pair",
            ScenarioKind::Fig3Sweep => "fig3_sweep",
            ScenarioKind::Fig4Scan => "fig4_scan",
            ScenarioKind::BackwardControl => "backward_control",
        }
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "single_run" => ScenarioKind::SingleRun,
            "fig2_pair" => ScenarioKind::Fig2Pair,
            "fig3_sweep" => ScenarioKind::Fig3Sweep,
            "fig4_scan" => ScenarioKind::Fig4Scan,
            "backward_control" => ScenarioKind::BackwardControl,
            _ => return Err(Error::Config(format!("unknown scenario {s:?}"))),
        })
    }
}

/// Which burn parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Entrance hole-centre depletion; the H intensity is solved for it.
    HoleDepth,
    /// H pulse duration.
    THUs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::Config(format!("format must be csv or json, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub medium: MediumSpec,
    pub grids: Grids,
    pub line: LineShape,
    pub sequence: PulseSequence,
    pub burn: Option<BurnConfig>,
    pub sweep: Option<SweepSpec>,
    pub c_mode: CMode,
    pub output_dir: Option<PathBuf>,
    /// Probe positions in mm, snapped to the nearest slice boundary.
    pub probes_mm: Vec<f64>,
    pub format: OutputFormat,
    /// Repeat a reduced run at 2·nz for the manifest's convergence indicator.
    pub convergence_check: bool,
    /// Normalized `key = value` lines the config was built from.
    canonical: String,
}

const KNOWN_KEYS: &[&str] = &[
    "scenario",
    "medium.length_mm",
    "medium.optical_depth_d0",
    "medium.t1_opt_us",
    "medium.t2_opt_us",
    "medium.shelf_branch_b",
    "medium.shelf_lifetime_us",
    "medium.repump_rate_per_us",
    "grids.nz",
    "grids.n_delta",
    "grids.delta_max",
    "grids.dt_us",
    "grids.nt",
    "grids.horizon_us",
    "line.shape",
    "line.fwhm",
    "sequence.t_end_us",
    "burn.model",
    "burn.t_damp_us",
    "burn.hole_hwhm",
    "burn.h.rabi_peak",
    "burn.h.duration_us",
    "burn.wait_after_h_us",
    "burn.repump_on",
    "burn.direction",
    "burn.i_sat",
    "burn.allow_short_wait",
    "sweep.variable",
    "sweep.values",
    "fit.c_mode",
    "output.dir",
    "output.probes_mm",
    "output.format",
    "manifest.convergence_check",
];

const PULSE_FIELDS: &[&str] = &["t_start_us", "duration_us", "rabi_peak", "area_pi", "detuning", "shape"];

fn known(key: &str) -> bool {
    if KNOWN_KEYS.contains(&key) {
        return true;
    }
    match key.strip_prefix("sequence.") {
        Some(rest) => match rest.split_once('.') {
            Some((p, field)) => (p == "d" || p == "r") && PULSE_FIELDS.contains(&field),
            None => false,
        },
        None => false,
    }
}

/// Reads `key = value` lines into a sorted map.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", n + 1)));
        }
        if !known(k) {
            return Err(Error::Config(format!("line {}: unknown key {k:?}", n + 1)));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key {k:?}", n + 1)));
        }
    }
    Ok(map)
}

struct Keys<'a>(&'a BTreeMap<String, String>);

impl Keys<'_> {
    fn str(&self, k: &str) -> Option<&str> {
        self.0.get(k).map(String::as_str)
    }

    fn parse<T: FromStr>(&self, k: &str) -> Result<Option<T>> {
        match self.str(k) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("{k}: cannot parse {v:?}"))),
        }
    }

    fn or<T: FromStr>(&self, k: &str, default: T) -> Result<T> {
        Ok(self.parse(k)?.unwrap_or(default))
    }

    fn flag(&self, k: &str, default: bool) -> Result<bool> {
        match self.str(k) {
            None => Ok(default),
            Some("true" | "yes" | "on" | "1") => Ok(true),
            Some("false" | "no" | "off" | "0") => Ok(false),
            Some(v) => Err(Error::Config(format!("{k}: expected true/false, got {v:?}"))),
        }
    }

    fn list(&self, k: &str) -> Result<Vec<f64>> {
        match self.str(k) {
            None | Some("") => Ok(Vec::new()),
            Some(v) => parse_list(v).map_err(|e| Error::Config(format!("{k}: {e}"))),
        }
    }
}

/// Parses `a, b, c` (commas or whitespace) into numbers.
pub fn parse_list(v: &str) -> Result<Vec<f64>> {
    v.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::Config(format!("cannot parse {s:?} as a number")))
        })
        .collect()
}

fn shape(v: Option<&str>, key: &str) -> Result<PulseShape> {
    match v.unwrap_or("square") {
        "square" => Ok(PulseShape::Square),
        "gaussian" => Ok(PulseShape::Gaussian),
        s => Err(Error::Config(format!("{key}: unknown shape {s:?}"))),
    }
}

fn pulse(keys: &Keys, tag: &str, label: PulseLabel, default_area_pi: f64) -> Result<Option<Pulse>> {
    let key = |f: &str| format!("sequence.{tag}.{f}");
    if !PULSE_FIELDS.iter().any(|f| keys.str(&key(f)).is_some()) {
        return Ok(None);
    }
    let t_start = keys
        .parse(&key("t_start_us"))?
        .ok_or_else(|| Error::Config(format!("{} is required", key("t_start_us"))))?;
    let duration = keys
        .parse(&key("duration_us"))?
        .ok_or_else(|| Error::Config(format!("{} is required", key("duration_us"))))?;
    let shape = shape(keys.str(&key("shape")), &key("shape"))?;
    let rabi: Option<f64> = keys.parse(&key("rabi_peak"))?;
    let area: Option<f64> = keys.parse(&key("area_pi"))?;
    let mut p = match (rabi, area) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(format!(
                "give either {} or {}, not both",
                key("rabi_peak"),
                key("area_pi")
            )))
        }
        (Some(r), None) => Pulse {
            label,
            t_start_us: t_start,
            duration_us: duration,
            rabi_peak: r,
            detuning: 0.0,
            shape,
        },
        (None, a) => Pulse::with_area(label, t_start, duration, a.unwrap_or(default_area_pi) * PI, shape),
    };
    p.detuning = keys.or(&key("detuning"), 0.0)?;
    Ok(Some(p))
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        Self::from_pairs(&pairs)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        let keys = Keys(pairs);
        let scenario: ScenarioKind = keys
            .parse("scenario")?
            .ok_or_else(|| Error::Config("scenario is required".into()))?;

        let d = MediumSpec::default();
        let medium = MediumSpec {
            length_mm: keys.or("medium.length_mm", d.length_mm)?,
            optical_depth_d0: keys.or("medium.optical_depth_d0", d.optical_depth_d0)?,
            t1_opt_us: keys.or("medium.t1_opt_us", d.t1_opt_us)?,
            t2_opt_us: keys.or("medium.t2_opt_us", d.t2_opt_us)?,
            shelf_branch_b: keys.or("medium.shelf_branch_b", d.shelf_branch_b)?,
            shelf_lifetime_us: keys.or("medium.shelf_lifetime_us", d.shelf_lifetime_us)?,
            repump_rate_per_us: keys.or("medium.repump_rate_per_us", d.repump_rate_per_us)?,
        };
        medium.validate()?;

        let g = Grids::default();
        let t_end: f64 = keys.or("sequence.t_end_us", g.horizon_us())?;
        let nz = keys.or("grids.nz", g.nz)?;
        let n_delta = keys.or("grids.n_delta", g.n_delta)?;
        let delta_max = keys.or("grids.delta_max", g.delta_max)?;
        let dt = keys.or("grids.dt_us", g.dt_us)?;
        let grids = match (keys.parse::<usize>("grids.nt")?, keys.parse::<f64>("grids.horizon_us")?) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either grids.nt or grids.horizon_us, not both".into()))
            }
            (Some(nt), None) => Grids {
                nz,
                n_delta,
                delta_max,
                dt_us: dt,
                nt,
            },
            (None, h) => Grids::with_horizon(nz, n_delta, delta_max, dt, h.unwrap_or(t_end)),
        };
        grids.validate()?;

        let line = match keys.str("line.shape").unwrap_or("flat") {
            "flat" => LineShape::Flat,
            "gaussian" => LineShape::Gaussian {
                fwhm: keys
                    .parse("line.fwhm")?
                    .ok_or_else(|| Error::Config("line.fwhm is required for a gaussian line".into()))?,
            },
            s => return Err(Error::Config(format!("line.shape: unknown {s:?}"))),
        };

        let mut pulses = Vec::new();
        pulses.extend(pulse(&keys, "d", PulseLabel::D, 0.5)?);
        pulses.extend(pulse(&keys, "r", PulseLabel::R, 1.0)?);
        pulses.sort_by(|a, b| a.t_start_us.total_cmp(&b.t_start_us));
        if !pulses.iter().any(|p| p.label == PulseLabel::D) {
            return Err(Error::Config("sequence.d.* is required".into()));
        }
        let sequence = PulseSequence {
            pulses,
            t_end_us: t_end,
        };
        validate_sequence(&sequence, &grids)?;

        let burn = match keys.str("burn.model").unwrap_or("none") {
            "none" => None,
            m => {
                let model = match m {
                    "rate_saturation" => BurnModel::RateSaturation,
                    "damped_rabi" => BurnModel::DampedRabi {
                        t_damp_us: keys.or("burn.t_damp_us", f64::INFINITY)?,
                    },
                    s => return Err(Error::Config(format!("burn.model: unknown {s:?}"))),
                };
                let mut b = BurnConfig::new(
                    model,
                    keys.or("burn.hole_hwhm", 0.42)?,
                    keys.or("burn.h.rabi_peak", 0.0)?,
                    keys.or("burn.h.duration_us", 100.0)?,
                );
                b.wait_after_h_us = keys.or("burn.wait_after_h_us", b.wait_after_h_us)?;
                b.h_pulse.t_start_us = -b.wait_after_h_us - b.h_pulse.duration_us;
                b.repump_on = keys.flag("burn.repump_on", true)?;
                b.burn_direction = match keys.str("burn.direction").unwrap_or("forward") {
                    "forward" => BurnDirection::Forward,
                    "backward" => BurnDirection::Backward,
                    s => return Err(Error::Config(format!("burn.direction: unknown {s:?}"))),
                };
                b.i_sat = keys.parse("burn.i_sat")?;
                b.allow_short_wait = keys.flag("burn.allow_short_wait", false)?;
                b.validate(&medium, &grids)?;
                Some(b)
            }
        };

        let values = keys.list("sweep.values")?;
        let sweep = match keys.str("sweep.variable") {
            None if values.is_empty() => None,
            None => return Err(Error::Config("sweep.values given without sweep.variable".into())),
            Some(v) => Some(SweepSpec {
                variable: match v {
                    "hole_depth" => SweepVariable::HoleDepth,
                    "t_h_us" => SweepVariable::THUs,
                    s => return Err(Error::Config(format!("sweep.variable: unknown {s:?}"))),
                },
                values,
            }),
        };
        if scenario.is_sweep() && sweep.as_ref().is_none_or(|s| s.values.is_empty()) {
            return Err(Error::Config(format!(
                "{} needs a non-empty sweep.values",
                scenario.name()
            )));
        }
        if scenario != ScenarioKind::SingleRun && burn.is_none() {
            return Err(Error::Config(format!("{} needs burn.model", scenario.name())));
        }

        let canonical = pairs
            .iter()
            .filter(|(k, _)| k.as_str() != "output.dir")
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect();

        Ok(ScenarioConfig {
            scenario,
            medium,
            grids,
            line,
            sequence,
            burn,
            sweep,
            c_mode: keys.or("fit.c_mode", CMode::MinTau)?,
            output_dir: keys.str("output.dir").map(PathBuf::from),
            probes_mm: keys.list("output.probes_mm")?,
            format: keys.or("output.format", OutputFormat::Csv)?,
            convergence_check: keys.flag("manifest.convergence_check", true)?,
            canonical,
        })
    }

    /// Sorted, comment-free `key = value` text (output.dir excluded).
    pub fn canonical_text(&self) -> &str {
        &self.canonical
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash_hex(&self) -> String {
        Sha256::digest(self.canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Boundary indices (0..=nz) nearest to the configured probe positions.
    pub fn probe_indices(&self) -> Result<Vec<usize>> {
        let dz = self.grids.dz(&self.medium);
        self.probes_mm
            .iter()
            .map(|&z| {
                if !(0.0..=self.medium.length_mm).contains(&z) {
                    return Err(Error::Config(format!(
                        "probe at {z} mm lies outside [0, {}]",
                        self.medium.length_mm
                    )));
                }
                Ok((z / dz).round() as usize)
            })
            .collect()
    }
}
