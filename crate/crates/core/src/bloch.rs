//! Optical Bloch equations for an open two-level system with a shelf
//! reservoir, integrated with fixed-step classical RK4.
//!
//! In the slowly varying optical frame a class detuned by Δ evolves as
//!
//! ```text
//! dσ/dt   = (iΔ − 1/T2)·σ + (i/2)·Ω·(n_g − n_e)
//! dn_e/dt = −n_e/T1 + Im(Ω*·σ)
//! dn_g/dt = (1 − b)·n_e/T1 + r_s·n_s − Im(Ω*·σ)
//! dn_s/dt = b·n_e/T1 − r_s·n_s
//! ```
//!
//! with `r_s = 1/T_shelf + repump rate`. The populations sum to a constant,
//! and RK4 keeps linear invariants up to rounding.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MediumSpec, SpectralWeights};

/// Population excursion tolerated outside `[0, 1]` before a step is rejected.
pub const POPULATION_SLACK: f64 = 1e-6;

/// Largest population-sum drift that is silently renormalized.
pub const DRIFT_LIMIT: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomState {
    pub sigma: C64,
    pub n_g: f64,
    pub n_e: f64,
    pub n_s: f64,
}

impl AtomState {
    pub fn ground() -> Self {
        AtomState {
            sigma: C64::new(0.0, 0.0),
            n_g: 1.0,
            n_e: 0.0,
            n_s: 0.0,
        }
    }

    pub fn population(&self) -> f64 {
        self.n_g + self.n_e + self.n_s
    }
}

/// Rates pulled out of [`MediumSpec`] once per slice.
#[derive(Debug, Clone, Copy)]
struct Rates {
    gamma2: f64,
    gamma1: f64,
    branch: f64,
    shelf_return: f64,
}

impl Rates {
    fn new(medium: &MediumSpec) -> Self {
        Rates {
            gamma2: medium.gamma2(),
            gamma1: medium.gamma1(),
            branch: medium.shelf_branch_b,
            shelf_return: medium.shelf_return_rate(),
        }
    }
}

/// Right-hand side on raw components `[Re σ, Im σ, n_g, n_e, n_s]`.
#[inline(always)]
fn rhs(s: [f64; 5], om_re: f64, om_im: f64, delta: f64, r: Rates) -> [f64; 5] {
    let [a, b, ng, ne, ns] = s;
    let w = ng - ne;
    let da = -r.gamma2 * a - delta * b - 0.5 * om_im * w;
    let db = delta * a - r.gamma2 * b + 0.5 * om_re * w;
    // Im(Ω*·σ) with Ω = p + iq, σ = a + ib
    let pump = om_re * b - om_im * a;
    let decay = r.gamma1 * ne;
    let back = r.shelf_return * ns;
    let dne = -decay + pump;
    let dng = (1.0 - r.branch) * decay + back - pump;
    let dns = r.branch * decay - back;
    [da, db, dng, dne, dns]
}

pub fn derivative(state: &AtomState, omega: C64, delta: f64, medium: &MediumSpec) -> AtomState {
    let d = rhs(
        [state.sigma.re, state.sigma.im, state.n_g, state.n_e, state.n_s],
        omega.re,
        omega.im,
        delta,
        Rates::new(medium),
    );
    AtomState {
        sigma: C64::new(d[0], d[1]),
        n_g: d[2],
        n_e: d[3],
        n_s: d[4],
    }
}

/// Drive samples needed by one RK4 step: start, midpoint and end of the step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDrive {
    pub start: C64,
    pub mid: C64,
    pub end: C64,
}

impl StepDrive {
    pub fn constant(omega: C64) -> Self {
        StepDrive {
            start: omega,
            mid: omega,
            end: omega,
        }
    }

    /// Linear interpolation between two grid samples.
    pub fn linear(start: C64, end: C64) -> Self {
        StepDrive {
            start,
            mid: (start + end) * 0.5,
            end,
        }
    }
}

#[inline(always)]
fn rk4(s: [f64; 5], drive: &StepDrive, delta: f64, dt: f64, r: Rates) -> [f64; 5] {
    let h2 = 0.5 * dt;
    let add = |s: [f64; 5], k: [f64; 5], h: f64| {
        [
            s[0] + h * k[0],
            s[1] + h * k[1],
            s[2] + h * k[2],
            s[3] + h * k[3],
            s[4] + h * k[4],
        ]
    };
    let k1 = rhs(s, drive.start.re, drive.start.im, delta, r);
    let k2 = rhs(add(s, k1, h2), drive.mid.re, drive.mid.im, delta, r);
    let k3 = rhs(add(s, k2, h2), drive.mid.re, drive.mid.im, delta, r);
    let k4 = rhs(add(s, k3, dt), drive.end.re, drive.end.im, delta, r);
    let h6 = dt / 6.0;
    let mut out = [0.0; 5];
    for i in 0..5 {
        out[i] = s[i] + h6 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
    }
    out
}

/// Outcome of a successful step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepReport {
    /// Largest |n_g + n_e + n_s − 1| seen before renormalization.
    pub max_drift: f64,
}

/// Atoms of one z slice, stored component-wise by detuning class.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceState {
    pub sigma_re: Vec<f64>,
    pub sigma_im: Vec<f64>,
    pub n_g: Vec<f64>,
    pub n_e: Vec<f64>,
    pub n_s: Vec<f64>,
    pub z_index: usize,
}

impl SliceState {
    pub fn ground(n: usize, z_index: usize) -> Self {
        Self::from_populations(&vec![1.0; n], &vec![0.0; n], &vec![0.0; n], z_index)
    }

    pub fn from_populations(n_g: &[f64], n_e: &[f64], n_s: &[f64], z_index: usize) -> Self {
        let n = n_g.len();
        SliceState {
            sigma_re: vec![0.0; n],
            sigma_im: vec![0.0; n],
            n_g: n_g.to_vec(),
            n_e: n_e.to_vec(),
            n_s: n_s.to_vec(),
            z_index,
        }
    }

    pub fn from_atoms(atoms: &[AtomState], z_index: usize) -> Self {
        SliceState {
            sigma_re: atoms.iter().map(|a| a.sigma.re).collect(),
            sigma_im: atoms.iter().map(|a| a.sigma.im).collect(),
            n_g: atoms.iter().map(|a| a.n_g).collect(),
            n_e: atoms.iter().map(|a| a.n_e).collect(),
            n_s: atoms.iter().map(|a| a.n_s).collect(),
            z_index,
        }
    }

    pub fn len(&self) -> usize {
        self.n_g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_g.is_empty()
    }

    pub fn atom(&self, j: usize) -> AtomState {
        AtomState {
            sigma: C64::new(self.sigma_re[j], self.sigma_im[j]),
            n_g: self.n_g[j],
            n_e: self.n_e[j],
            n_s: self.n_s[j],
        }
    }

    pub fn atoms(&self) -> Vec<AtomState> {
        (0..self.len()).map(|j| self.atom(j)).collect()
    }

    /// Advances every class by one RK4 step in place.
    ///
    /// On error the slice is left partially advanced and should be discarded.
    pub fn advance(
        &mut self,
        drive: &StepDrive,
        dt: f64,
        medium: &MediumSpec,
        deltas: &[f64],
    ) -> Result<StepReport> {
        if deltas.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: deltas.len(),
            });
        }
        let r = Rates::new(medium);
        let mut max_drift = 0.0f64;
        let mut lo = 0.0f64;
        let mut hi = 1.0f64;
        for j in 0..self.len() {
            let s = [
                self.sigma_re[j],
                self.sigma_im[j],
                self.n_g[j],
                self.n_e[j],
                self.n_s[j],
            ];
            let [a, b, ng, ne, ns] = rk4(s, drive, deltas[j], dt, r);
            let sum = ng + ne + ns;
            let drift = (sum - 1.0).abs();
            max_drift = if drift > max_drift { drift } else { max_drift };
            let scale = 1.0 / sum;
            let (ng, ne, ns) = (ng * scale, ne * scale, ns * scale);
            let m = ng.min(ne).min(ns);
            let x = ng.max(ne).max(ns);
            lo = if m < lo { m } else { lo };
            hi = if x > hi { x } else { hi };
            self.sigma_re[j] = a;
            self.sigma_im[j] = b;
            self.n_g[j] = ng;
            self.n_e[j] = ne;
            self.n_s[j] = ns;
        }
        if !(max_drift < DRIFT_LIMIT) {
            return Err(Error::Instability {
                slice: self.z_index,
                step: 0,
                t_us: f64::NAN,
                detail: format!("population drift {max_drift:e}"),
            });
        }
        if lo < -POPULATION_SLACK || hi > 1.0 + POPULATION_SLACK {
            return Err(Error::Instability {
                slice: self.z_index,
                step: 0,
                t_us: f64::NAN,
                detail: format!("population left [0, 1]: range [{lo:e}, {hi}]"),
            });
        }
        Ok(StepReport { max_drift })
    }
}

/// Pure form of [`SliceState::advance`].
pub fn step_rk4(
    slice: &SliceState,
    drive: &StepDrive,
    dt: f64,
    medium: &MediumSpec,
    deltas: &[f64],
) -> Result<SliceState> {
    let mut next = slice.clone();
    next.advance(drive, dt, medium, deltas)?;
    Ok(next)
}

/// Weighted coherence Σ w(Δ)·σ(Δ), summed in ascending Δ index.
pub fn polarization(slice: &SliceState, weights: &SpectralWeights) -> Result<C64> {
    polarization_raw(slice, &weights.weights)
}

pub(crate) fn polarization_raw(slice: &SliceState, weights: &[f64]) -> Result<C64> {
    if weights.len() != slice.len() {
        return Err(Error::LengthMismatch {
            expected: slice.len(),
            got: weights.len(),
        });
    }
    let mut re = 0.0;
    let mut im = 0.0;
    for j in 0..weights.len() {
        re += weights[j] * slice.sigma_re[j];
        im += weights[j] * slice.sigma_im[j];
    }
    Ok(C64::new(re, im))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_weights, Grids, LineShape};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    /// No decay of any kind: T1, T2, shelf all effectively infinite.
    fn lossless() -> MediumSpec {
        MediumSpec {
            t1_opt_us: 1e300,
            t2_opt_us: 1e300,
            shelf_lifetime_us: 1e300,
            ..MediumSpec::default()
        }
    }

    #[test]
    fn ground_state_is_stationary() {
        let d = derivative(&AtomState::ground(), C64::new(0.0, 0.0), 0.0, &MediumSpec::default());
        assert_eq!(d.sigma, C64::new(0.0, 0.0));
        assert_eq!((d.n_g, d.n_e, d.n_s), (0.0, 0.0, 0.0));
    }

    #[test]
    fn free_coherence_decays_at_t2() {
        let m = MediumSpec::default();
        let s0 = C64::new(0.3, -0.1);
        let st = AtomState {
            sigma: s0,
            ..AtomState::ground()
        };
        let d = derivative(&st, C64::new(0.0, 0.0), 0.0, &m);
        assert_relative_eq!(d.sigma.re, -s0.re / m.t2_opt_us, epsilon = 1e-15);
        assert_relative_eq!(d.sigma.im, -s0.im / m.t2_opt_us, epsilon = 1e-15);
    }

    #[test]
    fn population_derivatives_cancel() {
        let m = MediumSpec::default();
        let st = AtomState {
            sigma: C64::new(0.1, 0.2),
            n_g: 0.5,
            n_e: 0.3,
            n_s: 0.2,
        };
        let d = derivative(&st, C64::new(1.3, -0.4), 2.0, &m);
        assert!((d.n_g + d.n_e + d.n_s).abs() < 1e-16);
    }

    #[test]
    fn resonant_pi_pulse_inverts() {
        let m = lossless();
        let omega = 2.0;
        let steps = 1000;
        let dt = PI / omega / steps as f64;
        let mut s = SliceState::ground(1, 0);
        for _ in 0..steps {
            s.advance(&StepDrive::constant(C64::new(omega, 0.0)), dt, &m, &[0.0])
                .unwrap();
        }
        assert!((s.n_e[0] - 1.0).abs() < 1e-6, "n_e = {}", s.n_e[0]);
    }

    #[test]
    fn weak_detuned_drive_stays_below_adiabatic_bound() {
        let m = MediumSpec {
            t2_opt_us: 20.0,
            ..MediumSpec::default()
        };
        let (omega, delta) = (0.05, 5.0);
        let dt = 0.002;
        let mut s = SliceState::ground(1, 0);
        let bound = omega / (2.0 * (delta * delta + m.gamma2().powi(2)).sqrt());
        // switch on smoothly so the transient does not overshoot
        let ramp = 2.0;
        let n = (10.0 / dt) as usize;
        let env = |t: f64| omega * (t / ramp).min(1.0).powi(2) * (3.0 - 2.0 * (t / ramp).min(1.0));
        let mut worst = 0.0f64;
        for i in 0..n {
            let t = i as f64 * dt;
            let d = StepDrive {
                start: C64::new(env(t), 0.0),
                mid: C64::new(env(t + dt / 2.0), 0.0),
                end: C64::new(env(t + dt), 0.0),
            };
            s.advance(&d, dt, &m, &[delta]).unwrap();
            worst = worst.max(s.atom(0).sigma.norm());
        }
        assert!(worst <= bound * 1.1, "|sigma| {worst} vs bound {bound}");
    }

    #[test]
    fn polarization_examples() {
        let g = Grids::with_horizon(32, 5, 2.0, 0.01, 1.0);
        let w = build_weights(&g, LineShape::Flat).unwrap();
        let s = SliceState::ground(5, 0);
        assert_eq!(polarization(&s, &w).unwrap(), C64::new(0.0, 0.0));

        let mut s = SliceState::ground(2, 0);
        s.sigma_im = vec![1.0, 1.0];
        let w2 = SpectralWeights {
            deltas: vec![-1.0, 1.0],
            weights: vec![0.5, 0.5],
        };
        assert_eq!(polarization(&s, &w2).unwrap(), C64::new(0.0, 1.0));

        // σ(−Δ) = σ*(Δ) with symmetric weights gives a real sum
        let mut s = SliceState::ground(5, 0);
        s.sigma_re = vec![0.1, 0.4, 0.7, 0.4, 0.1];
        s.sigma_im = vec![0.3, -0.2, 0.0, 0.2, -0.3];
        assert_eq!(polarization(&s, &w).unwrap().im, 0.0);

        assert!(matches!(
            polarization(&SliceState::ground(4, 0), &w),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn blown_up_state_is_an_instability() {
        let m = lossless();
        let mut s = SliceState::ground(1, 3);
        s.n_g[0] = 1.5;
        s.n_s[0] = -0.5;
        let err = s
            .advance(&StepDrive::constant(C64::new(0.0, 0.0)), 0.01, &m, &[0.0])
            .unwrap_err();
        assert!(matches!(err, Error::Instability { slice: 3, .. }));
    }
}
