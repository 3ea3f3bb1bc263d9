//! Domain types shared by every stage: the absorbing medium, the pulse
//! schedule, the (z, Δ, t) discretization and the inhomogeneous line weights.
//!
//! Units are fixed throughout the crate: time in μs, length in mm, angular
//! frequencies (detunings, Rabi frequencies, decay rates) in rad/μs and
//! intensity as |Ω|² in (rad/μs)².

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// erf(3/√2): area fraction of a Gaussian kept by truncation at ±3σ.
const ERF_3_OVER_SQRT2: f64 = 0.997_300_203_936_739_8;

/// Largest accepted `dt · max(|detuning| + Ω, Δ_max)`.
pub const PHASE_STEP_BOUND: f64 = 0.1;

/// Minimum number of time steps a pulse must span.
pub const MIN_STEPS_PER_PULSE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediumSpec {
    pub length_mm: f64,
    pub optical_depth_d0: f64,
    /// Excited-state population lifetime.
    pub t1_opt_us: f64,
    /// Optical coherence time.
    pub t2_opt_us: f64,
    /// Fraction of excited-state decay that lands in the shelf.
    pub shelf_branch_b: f64,
    pub shelf_lifetime_us: f64,
    /// Extra shelf → ground return rate (repump light left on during the echo window).
    pub repump_rate_per_us: f64,
}

impl Default for MediumSpec {
    fn default() -> Self {
        MediumSpec {
            length_mm: 5.0,
            optical_depth_d0: 2.2,
            t1_opt_us: 160.0,
            t2_opt_us: 20.0,
            shelf_branch_b: 0.5,
            shelf_lifetime_us: 1.0e5,
            repump_rate_per_us: 0.0,
        }
    }
}

impl MediumSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("medium: {msg}")));
        if !(self.length_mm > 0.0) {
            return bad("length_mm must be > 0");
        }
        if !(self.optical_depth_d0 >= 0.0) {
            return bad("optical_depth_d0 must be >= 0");
        }
        if !(self.t1_opt_us > 0.0 && self.t2_opt_us > 0.0) {
            return bad("t1 and t2 must be > 0");
        }
        if self.t2_opt_us > 2.0 * self.t1_opt_us {
            return bad("t2 must not exceed 2*t1");
        }
        if !(0.0..=1.0).contains(&self.shelf_branch_b) {
            return bad("shelf_branch_b must lie in [0, 1]");
        }
        if !(self.shelf_lifetime_us > 0.0) {
            return bad("shelf_lifetime_us must be > 0");
        }
        if !(self.repump_rate_per_us >= 0.0) {
            return bad("repump_rate_per_us must be >= 0");
        }
        Ok(())
    }

    pub fn gamma2(&self) -> f64 {
        1.0 / self.t2_opt_us
    }

    pub fn gamma1(&self) -> f64 {
        1.0 / self.t1_opt_us
    }

    /// Total shelf → ground rate.
    pub fn shelf_return_rate(&self) -> f64 {
        1.0 / self.shelf_lifetime_us + self.repump_rate_per_us
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PulseLabel {
    H,
    D,
    R,
    Custom(String),
}

impl fmt::Display for PulseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PulseLabel::H => f.write_str("H"),
            PulseLabel::D => f.write_str("D"),
            PulseLabel::R => f.write_str("R"),
            PulseLabel::Custom(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseShape {
    Square,
    /// Gaussian field envelope centred in the pulse window with σ = duration/6,
    /// truncated to the window.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub label: PulseLabel,
    pub t_start_us: f64,
    pub duration_us: f64,
    /// Peak Rabi frequency of the envelope.
    pub rabi_peak: f64,
    /// Carrier offset from the line centre.
    pub detuning: f64,
    pub shape: PulseShape,
}

impl Pulse {
    /// Builds a resonant pulse with the given area θ = ∫Ω dt.
    pub fn with_area(
        label: PulseLabel,
        t_start_us: f64,
        duration_us: f64,
        area: f64,
        shape: PulseShape,
    ) -> Self {
        let mut p = Pulse {
            label,
            t_start_us,
            duration_us,
            rabi_peak: 1.0,
            detuning: 0.0,
            shape,
        };
        p.rabi_peak = area / p.area_per_unit_rabi();
        p
    }

    fn area_per_unit_rabi(&self) -> f64 {
        match self.shape {
            PulseShape::Square => self.duration_us,
            PulseShape::Gaussian => self.sigma_us() * (2.0 * PI).sqrt() * ERF_3_OVER_SQRT2,
        }
    }

    fn sigma_us(&self) -> f64 {
        self.duration_us / 6.0
    }

    pub fn area(&self) -> f64 {
        self.rabi_peak * self.area_per_unit_rabi()
    }

    pub fn t_end_us(&self) -> f64 {
        self.t_start_us + self.duration_us
    }

    pub fn t_center_us(&self) -> f64 {
        self.t_start_us + 0.5 * self.duration_us
    }

    pub fn window(&self) -> (f64, f64) {
        (self.t_start_us, self.t_end_us())
    }

    /// Real envelope amplitude at time `t` (zero outside the half-open window).
    pub fn amplitude(&self, t: f64) -> f64 {
        if t < self.t_start_us || t >= self.t_end_us() {
            return 0.0;
        }
        match self.shape {
            PulseShape::Square => self.rabi_peak,
            PulseShape::Gaussian => {
                let x = (t - self.t_center_us()) / self.sigma_us();
                self.rabi_peak * (-0.5 * x * x).exp()
            }
        }
    }

    /// Complex Rabi frequency, carrying the detuning as a phase ramp e^{iδt}.
    pub fn envelope(&self, t: f64) -> C64 {
        let a = self.amplitude(t);
        if a == 0.0 {
            return C64::new(0.0, 0.0);
        }
        if self.detuning == 0.0 {
            C64::new(a, 0.0)
        } else {
            C64::from_polar(a, self.detuning * t)
        }
    }

    fn overlaps(&self, other: &Pulse) -> bool {
        self.t_start_us < other.t_end_us() && other.t_start_us < self.t_end_us()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub pulses: Vec<Pulse>,
    pub t_end_us: f64,
}

impl PulseSequence {
    pub fn find(&self, label: &PulseLabel) -> Option<&Pulse> {
        self.pulses.iter().find(|p| &p.label == label)
    }

    /// Pulses that are injected during the coherent window (everything but H).
    pub fn coherent(&self) -> impl Iterator<Item = &Pulse> {
        self.pulses.iter().filter(|p| p.label != PulseLabel::H)
    }

    /// Expected primary echo time 2·t_R − t_D (pulse centres), if D and R exist.
    pub fn echo_time_us(&self) -> Option<f64> {
        let d = self.find(&PulseLabel::D)?;
        let r = self.find(&PulseLabel::R)?;
        Some(2.0 * r.t_center_us() - d.t_center_us())
    }

    /// Input envelope Ω(z = 0, t) sampled on the grid.
    pub fn render(&self, grids: &Grids) -> Vec<C64> {
        (0..grids.nt)
            .map(|i| {
                let t = grids.time(i);
                self.coherent().map(|p| p.envelope(t)).sum()
            })
            .collect()
    }

    /// Returns a copy with every coherent pulse envelope scaled by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for p in out.pulses.iter_mut().filter(|p| p.label != PulseLabel::H) {
            p.rabi_peak *= s;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grids {
    pub nz: usize,
    pub n_delta: usize,
    /// Half-width of the simulated spectral window.
    pub delta_max: f64,
    pub dt_us: f64,
    pub nt: usize,
}

impl Default for Grids {
    fn default() -> Self {
        Grids::with_horizon(128, 301, 25.0, 0.002, 30.0)
    }
}

impl Grids {
    /// Grid whose time axis `0, dt, .., (nt-1)·dt` covers `[0, horizon]`.
    pub fn with_horizon(nz: usize, n_delta: usize, delta_max: f64, dt_us: f64, horizon_us: f64) -> Self {
        let nt = (horizon_us / dt_us - 1e-9).ceil().max(0.0) as usize + 1;
        Grids {
            nz,
            n_delta,
            delta_max,
            dt_us,
            nt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nz < 32 {
            return Err(Error::Grid(format!("nz = {} < 32", self.nz)));
        }
        if self.n_delta < 3 || self.n_delta.is_multiple_of(2) {
            return Err(Error::Grid(format!(
                "n_delta = {} must be odd and >= 3",
                self.n_delta
            )));
        }
        if !(self.delta_max > 0.0) {
            return Err(Error::Grid("delta_max must be > 0".into()));
        }
        if !(self.dt_us > 0.0) || self.nt < 2 {
            return Err(Error::Grid("need dt > 0 and at least two time samples".into()));
        }
        if self.dt_us * self.delta_max > PHASE_STEP_BOUND + 1e-12 {
            return Err(Error::Grid(format!(
                "dt*delta_max = {} exceeds {PHASE_STEP_BOUND}",
                self.dt_us * self.delta_max
            )));
        }
        Ok(())
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt_us
    }

    pub fn horizon_us(&self) -> f64 {
        self.time(self.nt - 1)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.nt).map(|i| self.time(i)).collect()
    }

    pub fn delta_spacing(&self) -> f64 {
        2.0 * self.delta_max / (self.n_delta - 1) as f64
    }

    /// Detuning grid, symmetric with Δ = 0 at the centre index.
    pub fn deltas(&self) -> Vec<f64> {
        let h = self.delta_spacing();
        let c = (self.n_delta / 2) as isize;
        (0..self.n_delta)
            .map(|j| (j as isize - c) as f64 * h)
            .collect()
    }

    pub fn center_index(&self) -> usize {
        self.n_delta / 2
    }

    pub fn dz(&self, medium: &MediumSpec) -> f64 {
        medium.length_mm / self.nz as f64
    }

    /// Cell-centre positions of the z slices.
    pub fn z_centers(&self, medium: &MediumSpec) -> Vec<f64> {
        let dz = self.dz(medium);
        (0..self.nz).map(|k| (k as f64 + 0.5) * dz).collect()
    }

    /// Same grid with the z resolution doubled.
    pub fn refined_z(&self) -> Self {
        Grids {
            nz: self.nz * 2,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineShape {
    #[default]
    Flat,
    Gaussian { fwhm: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralWeights {
    pub deltas: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SpectralWeights {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn center_index(&self) -> usize {
        self.deltas.len() / 2
    }

    /// Line density ρ(0) per unit angular frequency at the centre of the window.
    pub fn density_at_zero(&self) -> f64 {
        let h = (self.deltas[self.deltas.len() - 1] - self.deltas[0]) / (self.deltas.len() - 1) as f64;
        self.weights[self.center_index()] / h
    }

    /// Weighted average of `f(Δ)` over the line.
    pub fn average(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.deltas
            .iter()
            .zip(&self.weights)
            .map(|(&d, &w)| w * f(d))
            .sum()
    }
}

pub fn build_weights(grids: &Grids, mode: LineShape) -> Result<SpectralWeights> {
    if grids.n_delta < 3 {
        return Err(Error::Grid(format!("n_delta = {} < 3", grids.n_delta)));
    }
    if !(grids.delta_max > 0.0) {
        return Err(Error::Grid("delta_max must be > 0".into()));
    }
    let deltas = grids.deltas();
    let raw: Vec<f64> = match mode {
        LineShape::Flat => vec![1.0; deltas.len()],
        LineShape::Gaussian { fwhm } => {
            if !(fwhm > 0.0) {
                return Err(Error::Config("gaussian line fwhm must be > 0".into()));
            }
            let sigma = fwhm / (8.0 * 2f64.ln()).sqrt();
            deltas
                .iter()
                .map(|d| (-0.5 * (d / sigma).powi(2)).exp())
                .collect()
        }
    };
    let total: f64 = raw.iter().sum();
    let weights = raw.into_iter().map(|w| w / total).collect();
    Ok(SpectralWeights { deltas, weights })
}

/// Checks ordering, disjointness and time resolution of the schedule.
pub fn validate_sequence(seq: &PulseSequence, grids: &Grids) -> Result<PulseSequence> {
    for w in seq.pulses.windows(2) {
        if w[1].t_start_us < w[0].t_start_us {
            return Err(Error::Config(format!(
                "pulses not time-ordered: {} at {} after {} at {}",
                w[1].label, w[1].t_start_us, w[0].label, w[0].t_start_us
            )));
        }
    }
    for (i, a) in seq.pulses.iter().enumerate() {
        if !(a.duration_us > 0.0) {
            return Err(Error::Config(format!("pulse {} has non-positive duration", a.label)));
        }
        if a.duration_us < MIN_STEPS_PER_PULSE * grids.dt_us {
            return Err(Error::Resolution(format!(
                "pulse {} lasts {} us < {} steps of {} us",
                a.label, a.duration_us, MIN_STEPS_PER_PULSE, grids.dt_us
            )));
        }
        for b in &seq.pulses[i + 1..] {
            if a.overlaps(b) {
                return Err(Error::Overlap(format!(
                    "{} [{}, {}) and {} [{}, {})",
                    a.label,
                    a.t_start_us,
                    a.t_end_us(),
                    b.label,
                    b.t_start_us,
                    b.t_end_us()
                )));
            }
        }
        if a.label != PulseLabel::H {
            let rate = (a.detuning.abs() + a.rabi_peak.abs()).max(grids.delta_max);
            if grids.dt_us * rate > PHASE_STEP_BOUND + 1e-12 {
                return Err(Error::Resolution(format!(
                    "pulse {}: dt*(|detuning|+rabi) = {} exceeds {PHASE_STEP_BOUND}",
                    a.label,
                    grids.dt_us * rate
                )));
            }
        }
    }
    if let (Some(echo), Some(d)) = (seq.echo_time_us(), seq.find(&PulseLabel::D)) {
        if seq.t_end_us < echo + d.duration_us {
            return Err(Error::Config(format!(
                "horizon {} us does not cover the echo at {} us plus one data-pulse duration",
                seq.t_end_us, echo
            )));
        }
    }
    if grids.horizon_us() + 1e-9 < seq.t_end_us {
        return Err(Error::Grid(format!(
            "time grid ends at {} us, before the sequence horizon {} us",
            grids.horizon_us(),
            seq.t_end_us
        )));
    }
    Ok(seq.clone())
}
