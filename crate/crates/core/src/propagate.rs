//! Reduced Maxwell equation in the retarded frame, ∂Ω/∂z = i·κ·P, marched
//! slice by slice through the medium.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::bloch::{polarization_raw, SliceState, StepDrive};
use crate::burn::PopulationMap;
use crate::error::{Error, Result};
use crate::model::{Grids, MediumSpec, Pulse, PulseLabel, PulseSequence, PulseShape, SpectralWeights};

/// Relative tolerance on ln(transmission) + d0 at which calibration stops.
const CALIBRATION_TOL: f64 = 2e-4;
const CALIBRATION_MAX_ITER: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingConstant {
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    /// Boundary index: 0 is the entrance face, `nz` the exit face.
    pub z_index: usize,
    pub z_mm: f64,
    pub field: Vec<C64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldRecord {
    pub t_grid: Vec<f64>,
    pub omega_in: Vec<C64>,
    pub omega_out: Vec<C64>,
    pub probes: Vec<Probe>,
    /// Largest population-sum drift over every atom and step of the march.
    pub max_population_drift: f64,
    /// Ω at every slice boundary (debug mode only).
    pub full: Option<Vec<Vec<C64>>>,
}

impl FieldRecord {
    pub fn dt(&self) -> f64 {
        if self.t_grid.len() > 1 {
            self.t_grid[1] - self.t_grid[0]
        } else {
            0.0
        }
    }

    pub fn energy_in(&self) -> f64 {
        energy(&self.omega_in, self.dt())
    }

    pub fn energy_out(&self) -> f64 {
        energy(&self.omega_out, self.dt())
    }

    /// CSV with columns `t_us, re_in, im_in, re_out, im_out, intensity_in, intensity_out`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t_us,re_in,im_in,re_out,im_out,intensity_in,intensity_out")?;
        for ((t, a), b) in self.t_grid.iter().zip(&self.omega_in).zip(&self.omega_out) {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                t,
                a.re,
                a.im,
                b.re,
                b.im,
                a.norm_sqr(),
                b.norm_sqr()
            )?;
        }
        Ok(())
    }
}

/// ∫|Ω|² dt on a uniform grid (rectangle rule).
pub fn energy(field: &[C64], dt: f64) -> f64 {
    field.iter().map(|x| x.norm_sqr()).sum::<f64>() * dt
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MarchOptions {
    /// Boundary indices (0..=nz) whose field is kept.
    pub probes: Vec<usize>,
    pub store_full: bool,
}

/// Integrates one slice over the whole time grid under `drive`, writing
/// P(t) = Σ_j w_j σ_j(t) into `pol`. Returns the largest population drift.
#[allow(clippy::too_many_arguments)]
fn integrate_slice(
    atoms: &mut SliceState,
    drive: &[C64],
    dt: f64,
    medium: &MediumSpec,
    weights: &SpectralWeights,
    pol: &mut [C64],
) -> Result<f64> {
    let mut worst = 0.0f64;
    pol[0] = polarization_raw(atoms, &weights.weights)?;
    for i in 0..drive.len() - 1 {
        let step = StepDrive::linear(drive[i], drive[i + 1]);
        let report = atoms
            .advance(&step, dt, medium, &weights.deltas)
            .map_err(|e| match e {
                Error::Instability { slice, detail, .. } => Error::Instability {
                    slice,
                    step: i,
                    t_us: i as f64 * dt,
                    detail,
                },
                e => e,
            })?;
        worst = worst.max(report.max_drift);
        pol[i + 1] = polarization_raw(atoms, &weights.weights)?;
    }
    Ok(worst)
}

/// Marches `omega_in` through the medium described by `pop0`.
pub fn march(
    omega_in: &[C64],
    medium: &MediumSpec,
    grids: &Grids,
    weights: &SpectralWeights,
    pop0: &PopulationMap,
    kappa: CouplingConstant,
    opts: &MarchOptions,
) -> Result<FieldRecord> {
    if omega_in.len() != grids.nt {
        return Err(Error::LengthMismatch {
            expected: grids.nt,
            got: omega_in.len(),
        });
    }
    if pop0.nz != grids.nz || pop0.n_delta != grids.n_delta || weights.len() != grids.n_delta {
        return Err(Error::Grid("population map / weights do not match the grids".into()));
    }
    if let Some(&bad) = opts.probes.iter().find(|&&k| k > grids.nz) {
        return Err(Error::Config(format!("probe index {bad} beyond nz = {}", grids.nz)));
    }
    let dt = grids.dt_us;
    let dz = grids.dz(medium);
    let coupling = C64::new(0.0, kappa.kappa * dz);
    let z_of = |k: usize| k as f64 * dz;

    let mut field = omega_in.to_vec();
    let mut probes = Vec::new();
    let mut full = opts.store_full.then(Vec::new);
    let keep = |k: usize, field: &[C64], probes: &mut Vec<Probe>, full: &mut Option<Vec<Vec<C64>>>| {
        if opts.probes.contains(&k) {
            probes.push(Probe {
                z_index: k,
                z_mm: z_of(k),
                field: field.to_vec(),
            });
        }
        if let Some(f) = full.as_mut() {
            f.push(field.to_vec());
        }
    };
    keep(0, &field, &mut probes, &mut full);

    let mut worst = 0.0f64;
    if kappa.kappa != 0.0 {
        let nt = grids.nt;
        let mut pol = vec![C64::new(0.0, 0.0); nt];
        let mut mid = vec![C64::new(0.0, 0.0); nt];
        for k in 0..grids.nz {
            let (g, e, s) = pop0.row(k);
            // predictor: slice driven by the field entering it
            let mut atoms = SliceState::from_populations(g, e, s, k);
            worst = worst.max(integrate_slice(&mut atoms, &field, dt, medium, weights, &mut pol)?);
            for i in 0..nt {
                mid[i] = field[i] + 0.5 * coupling * pol[i];
            }
            // corrector: same slice driven by the mid-slice field estimate
            let mut atoms = SliceState::from_populations(g, e, s, k);
            worst = worst.max(integrate_slice(&mut atoms, &mid, dt, medium, weights, &mut pol)?);
            for i in 0..nt {
                field[i] += coupling * pol[i];
            }
            keep(k + 1, &field, &mut probes, &mut full);
        }
    } else {
        for k in 1..=grids.nz {
            keep(k, &field, &mut probes, &mut full);
        }
    }

    Ok(FieldRecord {
        t_grid: grids.times(),
        omega_in: omega_in.to_vec(),
        omega_out: field,
        probes,
        max_population_drift: worst,
        full,
    })
}

/// Weak Gaussian probe used for calibration: area 0.01π, spectral
/// width Δ_max/8 so the line edges carry negligible probe energy.
pub fn calibration_probe(grids: &Grids) -> (PulseSequence, Grids) {
    let duration = 48.0 / grids.delta_max;
    let probe = Pulse::with_area(
        PulseLabel::Custom("probe".into()),
        0.0,
        duration,
        0.01 * PI,
        PulseShape::Gaussian,
    );
    let horizon = 2.0 * duration;
    let seq = PulseSequence {
        pulses: vec![probe],
        t_end_us: horizon,
    };
    let g = Grids::with_horizon(grids.nz, grids.n_delta, grids.delta_max, grids.dt_us, horizon);
    (seq, g)
}

/// Energy transmission of the calibration probe through the unburned medium.
pub fn probe_transmission(
    medium: &MediumSpec,
    grids: &Grids,
    weights: &SpectralWeights,
    kappa: CouplingConstant,
) -> Result<f64> {
    let (seq, g) = calibration_probe(grids);
    let input = seq.render(&g);
    let pop = PopulationMap::unburned(&g, medium);
    let rec = march(&input, medium, &g, weights, &pop, kappa, &MarchOptions::default())?;
    Ok(rec.energy_out() / rec.energy_in())
}

/// Analytic first guess κ₀ = d0/(l·π·ρ(0)) for a line much wider than 1/T2.
pub fn analytic_coupling(medium: &MediumSpec, weights: &SpectralWeights) -> f64 {
    medium.optical_depth_d0 / (medium.length_mm * PI * weights.density_at_zero())
}

/// Finds κ such that the weak probe's energy transmission is exp(−d0).
///
/// Bracketed root search on ln T(κ) + d0, which is close to linear in κ;
/// false position with the Illinois modification, falling back to
/// bisection whenever an iterate fails to shrink the bracket.
pub fn calibrate_coupling(
    medium: &MediumSpec,
    grids: &Grids,
    weights: &SpectralWeights,
) -> Result<CouplingConstant> {
    medium.validate()?;
    let d0 = medium.optical_depth_d0;
    if d0 == 0.0 {
        return Ok(CouplingConstant { kappa: 0.0 });
    }
    let k0 = analytic_coupling(medium, weights);
    let f = |kappa: f64| -> Result<f64> {
        let t = probe_transmission(medium, grids, weights, CouplingConstant { kappa })?;
        if !(t > 0.0) {
            return Err(Error::Calibration(format!("transmission {t} at kappa {kappa}")));
        }
        Ok(t.ln() + d0)
    };

    let (mut lo, mut hi) = (0.8 * k0, 1.25 * k0);
    let (mut f_lo, mut f_hi) = (f(lo)?, f(hi)?);
    let mut expand = 0;
    while !(f_lo > 0.0 && f_hi < 0.0) {
        if f_lo < f_hi {
            return Err(Error::Calibration(
                "transmission increases with coupling (integrator misconfigured?)".into(),
            ));
        }
        expand += 1;
        if expand > 8 {
            return Err(Error::Calibration(format!(
                "no bracket around kappa0 = {k0}: f({lo}) = {f_lo}, f({hi}) = {f_hi}"
            )));
        }
        if f_lo <= 0.0 {
            hi = lo;
            f_hi = f_lo;
            lo *= 0.5;
            f_lo = f(lo)?;
        } else {
            lo = hi;
            f_lo = f_hi;
            hi *= 2.0;
            f_hi = f(hi)?;
        }
    }

    // Illinois halves the retained endpoint value; monotonicity is checked
    // against the true ones
    let (mut true_lo, mut true_hi) = (f_lo, f_hi);
    let mut side = 0i8;
    for _ in 0..CALIBRATION_MAX_ITER {
        let mut x = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x)?;
        if fx > true_lo || fx < true_hi {
            return Err(Error::Calibration(format!(
                "non-monotonic transmission at kappa {x}"
            )));
        }
        if fx.abs() < CALIBRATION_TOL * d0 {
            return Ok(CouplingConstant { kappa: x });
        }
        if fx > 0.0 {
            lo = x;
            f_lo = fx;
            true_lo = fx;
            if side == 1 {
                f_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = x;
            f_hi = fx;
            true_hi = fx;
            if side == -1 {
                f_lo *= 0.5;
            }
            side = -1;
        }
    }
    Err(Error::Calibration("did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_weights, LineShape};

    fn small() -> (MediumSpec, Grids, SpectralWeights) {
        let m = MediumSpec::default();
        let g = Grids::with_horizon(32, 101, 10.0, 0.01, 6.0);
        let w = build_weights(&g, LineShape::Flat).unwrap();
        (m, g, w)
    }

    #[test]
    fn zero_coupling_is_transparent_bitwise() {
        let (m, g, w) = small();
        let seq = PulseSequence {
            pulses: vec![Pulse::with_area(PulseLabel::D, 0.5, 1.5, 1.0, PulseShape::Square)],
            t_end_us: 6.0,
        };
        let input = seq.render(&g);
        let pop = PopulationMap::unburned(&g, &m);
        let opts = MarchOptions {
            probes: vec![0, 16, 32],
            store_full: false,
        };
        let rec = march(&input, &m, &g, &w, &pop, CouplingConstant { kappa: 0.0 }, &opts).unwrap();
        assert_eq!(rec.omega_out, rec.omega_in);
        assert_eq!(rec.probes.len(), 3);
        assert_eq!(rec.probes[2].z_mm, m.length_mm);
    }

    #[test]
    fn zero_depth_calibrates_to_zero() {
        let (mut m, g, w) = small();
        m.optical_depth_d0 = 0.0;
        let k = calibrate_coupling(&m, &g, &w).unwrap();
        assert_eq!(k.kappa, 0.0);
        assert_eq!(probe_transmission(&m, &g, &w, k).unwrap(), 1.0);
    }

    #[test]
    fn rejects_bad_probe_index() {
        let (m, g, w) = small();
        let input = vec![C64::new(0.0, 0.0); g.nt];
        let pop = PopulationMap::unburned(&g, &m);
        let opts = MarchOptions {
            probes: vec![33],
            store_full: false,
        };
        assert!(march(&input, &m, &g, &w, &pop, CouplingConstant { kappa: 1.0 }, &opts).is_err());
    }

    #[test]
    fn csv_header() {
        let rec = FieldRecord {
            t_grid: vec![0.0, 0.1],
            omega_in: vec![C64::new(1.0, 0.0); 2],
            omega_out: vec![C64::new(0.0, 2.0); 2],
            probes: vec![],
            max_population_drift: 0.0,
            full: None,
        };
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(
            s.lines().next().unwrap(),
            "t_us,re_in,im_in,re_out,im_out,intensity_in,intensity_out"
        );
        assert_eq!(s.lines().nth(1).unwrap(), "0,1,0,0,2,1,4");
    }
}
