//! Observables extracted from field records: optical depth, group delay and
//! velocity, slow factor, echo events and the exponential echo-vs-delay fit.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MediumSpec, PulseLabel, PulseSequence};
use crate::propagate::FieldRecord;

/// Speed of light in km/s (= mm/μs).
pub const C_KM_PER_S: f64 = 2.997_924_58e5;

/// Output peak must exceed this multiple of the quiet-trace RMS.
pub const DETECTION_SNR: f64 = 5.0;

/// Echo windows below this fraction of the input data energy are dropped.
pub const ECHO_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchoEvent {
    pub t_center_us: f64,
    pub window: (f64, f64),
    pub energy: f64,
    pub efficiency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CMode {
    Fixed(f64),
    MinTau,
}

impl std::str::FromStr for CMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "min-tau" || s == "min_tau" {
            return Ok(CMode::MinTau);
        }
        if let Some(v) = s.strip_prefix("fixed:") {
            return v
                .trim()
                .parse()
                .map(CMode::Fixed)
                .map_err(|_| Error::Config(format!("bad c-mode value {v:?}")));
        }
        Err(Error::Config(format!("c-mode must be fixed:X or min-tau, got {s:?}")))
    }
}

fn index_range(t: &[f64], (lo, hi): (f64, f64)) -> std::ops::Range<usize> {
    // edges within a sliver of a sample count as on it, so roundoff in a
    // computed edge cannot flip a sample in or out
    let eps = if t.len() > 1 { 1e-6 * (t[1] - t[0]) } else { 0.0 };
    let a = t.partition_point(|&x| x < lo - eps);
    let b = t.partition_point(|&x| x <= hi + eps);
    a..b.max(a)
}

fn window_energy(field: &[C64], t: &[f64], window: (f64, f64), dt: f64) -> f64 {
    field[index_range(t, window)]
        .iter()
        .map(|x| x.norm_sqr())
        .sum::<f64>()
        * dt
}

fn centroid(field: &[C64], t: &[f64], window: (f64, f64)) -> Option<f64> {
    let r = index_range(t, window);
    let (mut m0, mut m1) = (0.0, 0.0);
    for i in r {
        let p = field[i].norm_sqr();
        m0 += p;
        m1 += p * t[i];
    }
    (m0 > 0.0).then(|| m1 / m0)
}

/// d = −ln(E_out/E_in) over a time window.
pub fn optical_depth(record: &FieldRecord, window: (f64, f64)) -> Result<f64> {
    let dt = record.dt();
    let e_in = window_energy(&record.omega_in, &record.t_grid, window, dt);
    if !(e_in > 0.0) {
        return Err(Error::Analysis("no input energy in the optical-depth window".into()));
    }
    let e_out = window_energy(&record.omega_out, &record.t_grid, window, dt);
    Ok(-(e_out / e_in).ln())
}

/// Window a delayed copy of `window` is searched in: extended right by 4 durations.
pub fn widened(window: (f64, f64)) -> (f64, f64) {
    (window.0, window.1 + 4.0 * (window.1 - window.0))
}

/// Intensity-centroid delay of the output pulse relative to the input pulse.
pub fn group_delay(record: &FieldRecord, window: (f64, f64)) -> Result<f64> {
    let t = &record.t_grid;
    let peak_in = record.omega_in.iter().map(|x| x.norm_sqr()).fold(0.0, f64::max);
    let lit = |i: usize| record.omega_in[i].norm_sqr() > 1e-6 * peak_in;
    // the search stops where the next input pulse begins
    let mut wide = widened(window);
    let after = index_range(t, (window.1, wide.1));
    if let Some(i) = after.skip_while(|&i| lit(i)).find(|&i| lit(i)) {
        wide.1 = t[i - 1];
    }
    let inside = index_range(t, wide);
    let peak_out = record.omega_out[inside.clone()]
        .iter()
        .map(|x| x.norm_sqr())
        .fold(0.0, f64::max);
    // quiet samples: outside the search window and outside every lit input
    // stretch together with the delayed tail it may drag behind it
    let tail = ((wide.1 - window.1) / record.dt().max(f64::MIN_POSITIVE)).ceil() as usize;
    let mut busy = vec![false; t.len()];
    let mut last_lit: Option<usize> = None;
    for i in 0..t.len() {
        if lit(i) {
            last_lit = Some(i);
        }
        busy[i] = inside.contains(&i) || last_lit.is_some_and(|l| i <= l + tail);
    }
    let quiet: Vec<f64> = (0..t.len())
        .filter(|&i| !busy[i])
        .map(|i| record.omega_out[i].norm_sqr())
        .collect();
    let rms = if quiet.is_empty() {
        0.0
    } else {
        (quiet.iter().map(|p| p * p).sum::<f64>() / quiet.len() as f64).sqrt()
    };
    if !(peak_out > DETECTION_SNR * rms) || peak_out == 0.0 {
        return Err(Error::Analysis(format!(
            "no detectable output pulse (peak {peak_out:e}, quiet rms {rms:e})"
        )));
    }
    let c_in = centroid(&record.omega_in, t, window)
        .ok_or_else(|| Error::Analysis("no input light in the pulse window".into()))?;
    let c_out = centroid(&record.omega_out, t, wide)
        .ok_or_else(|| Error::Analysis("no output light in the search window".into()))?;
    Ok(c_out - c_in)
}

/// Peak-sample delay, for comparison with the centroid metric.
pub fn group_delay_peak(record: &FieldRecord, window: (f64, f64)) -> Result<f64> {
    let t = &record.t_grid;
    let argmax = |f: &[C64], r: std::ops::Range<usize>| {
        r.max_by(|&a, &b| f[a].norm_sqr().total_cmp(&f[b].norm_sqr()))
    };
    let i_in = argmax(&record.omega_in, index_range(t, window))
        .ok_or_else(|| Error::Analysis("empty window".into()))?;
    let i_out = argmax(&record.omega_out, index_range(t, widened(window)))
        .ok_or_else(|| Error::Analysis("empty window".into()))?;
    Ok(t[i_out] - t[i_in])
}

/// v_g = l/τ_g in km/s (mm/μs).
pub fn group_velocity(tau_g_us: f64, medium: &MediumSpec) -> Result<f64> {
    if !(tau_g_us > 0.0) {
        return Err(Error::Analysis(format!("non-positive group delay {tau_g_us}")));
    }
    Ok(medium.length_mm / tau_g_us)
}

/// η = c/v_g.
pub fn slow_factor(v_g_km_s: f64) -> Result<f64> {
    if !(v_g_km_s > 0.0) {
        return Err(Error::Analysis(format!("non-positive group velocity {v_g_km_s}")));
    }
    Ok(C_KM_PER_S / v_g_km_s)
}

/// Finds the primary echo and its recursions at t_R + k·(t_R − t_D), k = 1..3.
///
/// Windows span 2·(longest pulse) + 2·τ_g around the nominal time, where τ_g
/// is measured on the data pulse. A window that runs into an input pulse
/// (or its slowed transmission) is scored on Ω_out − Ω_in, the response
/// left after removing a transparent-medium reference.
pub fn detect_echoes(record: &FieldRecord, seq: &PulseSequence) -> Result<Vec<EchoEvent>> {
    let d = seq
        .find(&PulseLabel::D)
        .ok_or_else(|| Error::Analysis("sequence has no data pulse".into()))?;
    let Some(r) = seq.find(&PulseLabel::R) else {
        return Ok(Vec::new());
    };
    let t = &record.t_grid;
    let dt = record.dt();
    let e_d = window_energy(&record.omega_in, t, d.window(), dt);
    if !(e_d > 0.0) {
        return Err(Error::Analysis("data pulse carries no energy".into()));
    }
    let tau = group_delay(record, d.window()).unwrap_or(0.0).max(0.0);
    let longest = seq.coherent().map(|p| p.duration_us).fold(0.0, f64::max);
    let half = longest + tau;
    let sep = r.t_center_us() - d.t_center_us();
    let t_last = *t.last().unwrap_or(&0.0);
    let residual: Vec<C64> = record
        .omega_out
        .iter()
        .zip(&record.omega_in)
        .map(|(o, i)| o - i)
        .collect();

    let mut out = Vec::new();
    for k in 1..=3 {
        let nominal = r.t_center_us() + k as f64 * sep;
        let window = (nominal - half, (nominal + half).min(t_last));
        if window.0 >= t_last {
            break;
        }
        let collides = seq.coherent().any(|p| {
            let busy = (p.t_start_us, p.t_end_us() + tau + p.duration_us);
            busy.0 < window.1 && window.0 < busy.1
        });
        let field = if collides { &residual } else { &record.omega_out };
        let energy = window_energy(field, t, window, dt);
        if energy < ECHO_FLOOR * e_d {
            continue;
        }
        let t_center_us = centroid(field, t, window).unwrap_or(nominal);
        out.push(EchoEvent {
            t_center_us,
            window,
            energy,
            efficiency: energy / e_d,
        });
    }
    Ok(out)
}

/// Log-linear least squares for y = A·exp(B·(τ − C)).
///
/// A and C are not separately identifiable, so C is fixed by `c_mode` and
/// only A and B are estimated.
pub fn fit_exponential(points: &[(f64, f64)], c_mode: CMode) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(Error::Analysis(format!("need at least 3 points, got {}", points.len())));
    }
    if let Some(p) = points.iter().find(|p| !(p.1 > 0.0)) {
        return Err(Error::Analysis(format!("non-positive intensity {} at tau {}", p.1, p.0)));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Analysis("all delays are equal".into()));
    }
    let flat = ys.iter().all(|&y| y == ys[0]);
    let (slope, intercept, r_squared) = if flat {
        (0.0, ys[0], 1.0)
    } else {
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - x_mean) * (y - y_mean)).sum();
        let slope = sxy / sxx;
        let intercept = y_mean - slope * x_mean;
        let ss_tot: f64 = ys.iter().map(|y| (y - y_mean).powi(2)).sum();
        let ss_res: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        let r2 = if ss_tot > 0.0 { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) } else { 1.0 };
        (slope, intercept, r2)
    };
    let c = match c_mode {
        CMode::Fixed(c) => c,
        CMode::MinTau => xs.iter().cloned().fold(f64::INFINITY, f64::min),
    };
    Ok(FitResult {
        a: (intercept + slope * c).exp(),
        b: slope,
        c,
        r_squared,
    })
}
