//! Preparation phase: the millisecond-scale repump and dummy (H) burn are not
//! integrated coherently. Each z slice gets a closed-form hole whose depth is
//! set by the local H intensity, and that intensity is attenuated along z by
//! saturable absorption in the inhomogeneous line.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Grids, MediumSpec, Pulse, PulseLabel, SpectralWeights};

/// Ground-state share of the working level when the repump light is off:
/// one of three equally populated hyperfine ground levels.
pub const UNPUMPED_GROUND_FRACTION: f64 = 1.0 / 3.0;

/// Sub-steps per z cell for the H attenuation integral.
const H_SUBSTEPS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BurnModel {
    /// Steady-state saturation: depth = s/(1+s), s = I_H/I_sat.
    RateSaturation,
    /// Hole-centre ground population (1 + cos(Ω_H·T_H)·e^{−T_H/T_damp})/2.
    DampedRabi { t_damp_us: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BurnDirection {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurnConfig {
    pub model: BurnModel,
    /// Half width of the Lorentzian hole in the ground population.
    pub hole_hwhm: f64,
    /// The dummy pulse; its `rabi_peak` is the entrance Rabi frequency.
    pub h_pulse: Pulse,
    pub wait_after_h_us: f64,
    pub repump_on: bool,
    pub burn_direction: BurnDirection,
    /// Saturation intensity in (rad/μs)²; `None` means 1/(T1·T2).
    pub i_sat: Option<f64>,
    /// Accept a post-H wait shorter than 3·T1.
    pub allow_short_wait: bool,
}

impl BurnConfig {
    pub fn new(model: BurnModel, hole_hwhm: f64, h_rabi: f64, h_duration_us: f64) -> Self {
        BurnConfig {
            model,
            hole_hwhm,
            h_pulse: Pulse {
                label: PulseLabel::H,
                t_start_us: -500.0 - h_duration_us,
                duration_us: h_duration_us,
                rabi_peak: h_rabi,
                detuning: 0.0,
                shape: crate::model::PulseShape::Square,
            },
            wait_after_h_us: 500.0,
            repump_on: true,
            burn_direction: BurnDirection::Forward,
            i_sat: None,
            allow_short_wait: false,
        }
    }

    pub fn saturation_intensity(&self, medium: &MediumSpec) -> f64 {
        self.i_sat
            .unwrap_or(1.0 / (medium.t1_opt_us * medium.t2_opt_us))
    }

    pub fn validate(&self, medium: &MediumSpec, grids: &Grids) -> Result<()> {
        if !(self.hole_hwhm > 0.0 && self.hole_hwhm < grids.delta_max / 4.0) {
            return Err(Error::Burn(format!(
                "hole_hwhm {} must lie in (0, delta_max/4 = {})",
                self.hole_hwhm,
                grids.delta_max / 4.0
            )));
        }
        if self.h_pulse.detuning != 0.0 {
            return Err(Error::Burn("H pulse must be resonant (detuning 0)".into()));
        }
        if !(self.h_pulse.rabi_peak >= 0.0) || !(self.h_pulse.duration_us >= 0.0) {
            return Err(Error::Burn("H pulse needs rabi_peak >= 0 and duration >= 0".into()));
        }
        if !(self.wait_after_h_us >= 0.0) {
            return Err(Error::Burn("wait_after_h_us must be >= 0".into()));
        }
        if self.wait_after_h_us < 3.0 * medium.t1_opt_us && !self.allow_short_wait {
            return Err(Error::Burn(format!(
                "wait after H ({} us) is shorter than 3*T1 = {} us; excited population would survive \
                 (set burn.allow_short_wait to override)",
                self.wait_after_h_us,
                3.0 * medium.t1_opt_us
            )));
        }
        if let Some(i) = self.i_sat {
            if !(i > 0.0) {
                return Err(Error::Burn("i_sat must be > 0".into()));
            }
        }
        if let BurnModel::DampedRabi { t_damp_us } = self.model {
            if !(t_damp_us > 0.0) {
                return Err(Error::Burn("t_damp_us must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// Populations over (z, Δ) at the start of the coherent window,
/// stored row-major: index `k * n_delta + j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationMap {
    pub nz: usize,
    pub n_delta: usize,
    pub z_mm: Vec<f64>,
    pub deltas: Vec<f64>,
    pub n_g: Vec<f64>,
    pub n_e: Vec<f64>,
    pub n_s: Vec<f64>,
    /// Ground population before the H pulse (uniform).
    pub n_g_initial: f64,
}

impl PopulationMap {
    pub fn uniform(grids: &Grids, medium: &MediumSpec, n_g0: f64) -> Self {
        let n = grids.nz * grids.n_delta;
        PopulationMap {
            nz: grids.nz,
            n_delta: grids.n_delta,
            z_mm: grids.z_centers(medium),
            deltas: grids.deltas(),
            n_g: vec![n_g0; n],
            n_e: vec![0.0; n],
            n_s: vec![1.0 - n_g0; n],
            n_g_initial: n_g0,
        }
    }

    /// Fully repumped, unburned medium.
    pub fn unburned(grids: &Grids, medium: &MediumSpec) -> Self {
        Self::uniform(grids, medium, 1.0)
    }

    /// Medium carrying a Lorentzian hole of the given per-slice fractional depth.
    pub fn with_lorentzian_hole(
        grids: &Grids,
        medium: &MediumSpec,
        depth: impl Fn(f64) -> f64,
        hwhm: f64,
    ) -> Self {
        let mut map = Self::unburned(grids, medium);
        let depths: Vec<f64> = map.z_mm.iter().map(|&z| depth(z)).collect();
        map.carve(&depths, hwhm);
        map
    }

    fn idx(&self, k: usize, j: usize) -> usize {
        k * self.n_delta + j
    }

    pub fn ground(&self, k: usize, j: usize) -> f64 {
        self.n_g[self.idx(k, j)]
    }

    pub fn row(&self, k: usize) -> (&[f64], &[f64], &[f64]) {
        let r = k * self.n_delta..(k + 1) * self.n_delta;
        (&self.n_g[r.clone()], &self.n_e[r.clone()], &self.n_s[r])
    }

    pub fn center_index(&self) -> usize {
        self.n_delta / 2
    }

    /// Hole-centre depletion 1 − n_g(z, 0)/n_g_initial per slice.
    pub fn hole_profile(&self) -> Vec<f64> {
        let c = self.center_index();
        (0..self.nz)
            .map(|k| 1.0 - self.ground(k, c) / self.n_g_initial)
            .collect()
    }

    /// Mean hole-centre depletion over z; proportional to the hole's Δα·l.
    pub fn mean_hole_depth(&self) -> f64 {
        let p = self.hole_profile();
        p.iter().sum::<f64>() / p.len() as f64
    }

    /// Returns the map mirrored in z.
    pub fn mirrored(&self) -> Self {
        let mut out = self.clone();
        for k in 0..self.nz {
            let src = self.nz - 1 - k;
            for j in 0..self.n_delta {
                let (a, b) = (out.idx(k, j), self.idx(src, j));
                out.n_g[a] = self.n_g[b];
                out.n_e[a] = self.n_e[b];
                out.n_s[a] = self.n_s[b];
            }
        }
        out
    }

    /// Removes a fraction `depth[k]·L(Δ)` of the initial ground population into the shelf.
    fn carve(&mut self, depths: &[f64], hwhm: f64) {
        let g2 = hwhm * hwhm;
        for (k, &d) in depths.iter().enumerate() {
            for j in 0..self.n_delta {
                let lor = g2 / (g2 + self.deltas[j] * self.deltas[j]);
                let i = self.idx(k, j);
                let removed = self.n_g_initial * d * lor;
                self.n_g[i] = self.n_g_initial - removed;
                self.n_s[i] = 1.0 - self.n_g[i] - self.n_e[i];
            }
        }
    }

    pub fn max_conservation_error(&self) -> f64 {
        self.n_g
            .iter()
            .zip(&self.n_e)
            .zip(&self.n_s)
            .map(|((g, e), s)| (g + e + s - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with columns `z_mm, delta_rad_per_us, n_g, n_s`, z-major.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "z_mm,delta_rad_per_us,n_g,n_s")?;
        for k in 0..self.nz {
            for j in 0..self.n_delta {
                let i = self.idx(k, j);
                writeln!(
                    w,
                    "{},{},{},{}",
                    self.z_mm[k], self.deltas[j], self.n_g[i], self.n_s[i]
                )?;
            }
        }
        Ok(())
    }
}

/// Local H intensity I_H(z) at the entrance face of each slice, z = k·dz.
///
/// dI/dz = −α₀·I/√(1 + I/I_sat), the saturated absorption of a narrowband
/// beam in an inhomogeneous line, with α₀ = d0/l.
pub fn h_intensity_profile(medium: &MediumSpec, grids: &Grids, i0: f64, i_sat: f64) -> Vec<f64> {
    let alpha0 = medium.optical_depth_d0 / medium.length_mm;
    let f = |i: f64| -alpha0 * i / (1.0 + i / i_sat).sqrt();
    let dz = grids.dz(medium);
    let mut out = Vec::with_capacity(grids.nz);
    let mut i = i0;
    let advance = |i: &mut f64, len: f64| {
        let h = len / H_SUBSTEPS as f64;
        for _ in 0..H_SUBSTEPS {
            let k1 = f(*i);
            let k2 = f(*i + 0.5 * h * k1);
            let k3 = f(*i + 0.5 * h * k2);
            let k4 = f(*i + h * k3);
            *i = (*i + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).max(0.0);
        }
    };
    for _ in 0..grids.nz {
        out.push(i);
        advance(&mut i, dz);
    }
    out
}

/// Hole-centre fractional depletion for a slice with H Rabi frequency `rabi`.
fn center_depth(model: BurnModel, rabi: f64, i_sat: f64, t_h: f64) -> f64 {
    match model {
        BurnModel::RateSaturation => {
            let s = rabi * rabi / i_sat;
            s / (1.0 + s)
        }
        BurnModel::DampedRabi { t_damp_us } => {
            let n_g = 0.5 * (1.0 + (rabi * t_h).cos() * (-t_h / t_damp_us).exp());
            1.0 - n_g
        }
    }
}

/// Builds the population map left behind by the preparation phase.
pub fn burn(
    medium: &MediumSpec,
    grids: &Grids,
    weights: &SpectralWeights,
    cfg: &BurnConfig,
) -> Result<PopulationMap> {
    cfg.validate(medium, grids)?;
    if weights.len() != grids.n_delta {
        return Err(Error::LengthMismatch {
            expected: grids.n_delta,
            got: weights.len(),
        });
    }
    let n_g0 = if cfg.repump_on {
        1.0
    } else {
        UNPUMPED_GROUND_FRACTION
    };
    let mut map = PopulationMap::uniform(grids, medium, n_g0);
    let rabi0 = cfg.h_pulse.rabi_peak;
    if rabi0 == 0.0 || cfg.h_pulse.duration_us == 0.0 {
        return Ok(map);
    }
    let i_sat = cfg.saturation_intensity(medium);
    // fewer ground atoms absorb proportionally less of the dummy light
    let absorbing = MediumSpec {
        optical_depth_d0: medium.optical_depth_d0 * n_g0,
        ..medium.clone()
    };
    let intensity = h_intensity_profile(&absorbing, grids, rabi0 * rabi0, i_sat);
    let mut depths: Vec<f64> = intensity
        .iter()
        .map(|&i| center_depth(cfg.model, i.sqrt(), i_sat, cfg.h_pulse.duration_us))
        .collect();
    if cfg.burn_direction == BurnDirection::Backward {
        depths.reverse();
    }
    map.carve(&depths, cfg.hole_hwhm);

    if cfg.wait_after_h_us < 3.0 * medium.t1_opt_us {
        // overridden short wait: part of the removed population is still excited
        let left = (-cfg.wait_after_h_us / medium.t1_opt_us).exp();
        for i in 0..map.n_g.len() {
            let removed = n_g0 - map.n_g[i];
            map.n_e[i] = removed * left;
            map.n_s[i] = 1.0 - map.n_g[i] - map.n_e[i];
        }
    }
    Ok(map)
}

/// ∫ f(Δ)·(Δ − ω)/(γ² + (Δ − ω)²) dΔ for `f` interpolated between the grid
/// samples by C¹ cubic Hermite segments (central-difference slopes) and held
/// constant over the half cells beyond either end.
///
/// A kink in the interpolant would leave a log(δΔ/γ) error against the
/// 1/x² tail of the kernel, so linear interpolation is not enough when the
/// grid spacing exceeds the homogeneous width.
fn line_dispersion(f: &[f64], deltas: &[f64], gamma: f64, omega: f64) -> f64 {
    let g2 = gamma * gamma;
    // moments ∫ u^m/(γ² + u²) du, m = 1..4
    let moments = |u: f64| {
        let l = 0.5 * (g2 + u * u).ln();
        let at = gamma * (u / gamma).atan();
        [l, u - at, 0.5 * u * u - g2 * l, u * u * u / 3.0 - g2 * u + g2 * at]
    };
    let segment = |a: f64, b: f64, fa: f64, fb: f64, ma: f64, mb: f64| {
        let h = b - a;
        let p1 = ma;
        let p2 = (3.0 * (fb - fa) / h - 2.0 * ma - mb) / h;
        let p3 = (2.0 * (fa - fb) / h + ma + mb) / (h * h);
        // re-expand around u = Δ − ω
        let q = omega - a;
        let c = [
            fa + q * (p1 + q * (p2 + q * p3)),
            p1 + q * (2.0 * p2 + 3.0 * q * p3),
            p2 + 3.0 * q * p3,
            p3,
        ];
        let (lo, hi) = (moments(a - omega), moments(b - omega));
        (0..4).map(|k| c[k] * (hi[k] - lo[k])).sum::<f64>()
    };
    let n = f.len();
    let h = deltas[1] - deltas[0];
    let slope = |j: usize| match j {
        0 => (f[1] - f[0]) / h,
        j if j == n - 1 => (f[n - 1] - f[n - 2]) / h,
        j => (f[j + 1] - f[j - 1]) / (2.0 * h),
    };
    let mut total = segment(deltas[0] - 0.5 * h, deltas[0], f[0], f[0], 0.0, 0.0);
    for j in 0..n - 1 {
        total += segment(deltas[j], deltas[j + 1], f[j], f[j + 1], slope(j), slope(j + 1));
    }
    total + segment(deltas[n - 1], deltas[n - 1] + 0.5 * h, f[n - 1], f[n - 1], 0.0, 0.0)
}

/// Group delay accumulated by a weak field at Δ = 0 through the whole map.
///
/// A slice responds to a component e^{iωt} with S(ω) = ∫ρ(Δ)·N(Δ)/(γ₂ + i(ω − Δ)) dΔ,
/// N = n_g − n_e, where the absorber density ρ·N is interpolated smoothly
/// between detuning classes (the continuum the time-domain comb stands in
/// for until its 2π/δΔ revival). The field picks up φ(ω) = −(κ/2)·Σ_z dz·Im S(ω)
/// and the delay −dφ/dω is taken by a central difference. κ is fixed by the
/// unsaturated optical depth, κ = d0/(l·π·ρ(0)).
pub fn kk_group_delay(map: &PopulationMap, medium: &MediumSpec, weights: &SpectralWeights) -> f64 {
    let gamma = medium.gamma2();
    let kappa = medium.optical_depth_d0 / (medium.length_mm * std::f64::consts::PI * weights.density_at_zero());
    let dz = medium.length_mm / map.nz as f64;
    let spacing = weights.deltas[1] - weights.deltas[0];
    let h = 1e-4 * gamma.min(spacing);
    let mut density = vec![0.0; map.n_delta];
    let mut slope = 0.0;
    for k in 0..map.nz {
        let (g, e, _) = map.row(k);
        for j in 0..map.n_delta {
            density[j] = weights.weights[j] * (g[j] - e[j]) / spacing;
        }
        let plus = line_dispersion(&density, &weights.deltas, gamma, h);
        let minus = line_dispersion(&density, &weights.deltas, gamma, -h);
        slope += dz * (plus - minus) / (2.0 * h);
    }
    // τ = −dφ/dω with φ = −(κ/2)·Im S
    0.5 * kappa * slope
}

/// Group delay attributable to the hole: the map's Kramers–Kronig delay
/// minus that of the same medium before burning.
pub fn predicted_group_delay(
    map: &PopulationMap,
    medium: &MediumSpec,
    weights: &SpectralWeights,
    hole_hwhm: f64,
) -> Result<f64> {
    let depth = map
        .hole_profile()
        .into_iter()
        .fold(0.0f64, f64::max)
        * map.n_g_initial;
    if !(depth >= 1e-6) || !(hole_hwhm > 0.0) {
        return Err(Error::NoHole { depth });
    }
    let reference = PopulationMap {
        n_g: vec![map.n_g_initial; map.n_g.len()],
        n_e: vec![0.0; map.n_e.len()],
        n_s: vec![1.0 - map.n_g_initial; map.n_s.len()],
        ..map.clone()
    };
    Ok(kk_group_delay(map, medium, weights) - kk_group_delay(&reference, medium, weights))
}

/// Ideal narrow-hole estimate τ_g = Δα·l/(2γ_h).
pub fn ideal_hole_delay(delta_alpha_l: f64, hole_hwhm: f64) -> f64 {
    delta_alpha_l / (2.0 * hole_hwhm)
}
