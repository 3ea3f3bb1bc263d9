//! Physical properties of the integrator, the z-march and the hole predictor,
//! checked against closed forms on small grids.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use slowecho::bloch::{polarization, AtomState, SliceState, StepDrive};
use slowecho::burn::{ideal_hole_delay, predicted_group_delay, PopulationMap};
use slowecho::model::{build_weights, Grids, LineShape, MediumSpec, Pulse, PulseLabel, PulseSequence, PulseShape};
use slowecho::propagate::{calibrate_coupling, march, probe_transmission, CouplingConstant, MarchOptions};

fn lossless() -> MediumSpec {
    MediumSpec {
        t1_opt_us: 1e12,
        t2_opt_us: 1e12,
        shelf_lifetime_us: 1e12,
        ..MediumSpec::default()
    }
}

#[test]
fn free_precession_matches_exponential() {
    let m = MediumSpec {
        t2_opt_us: 20.0,
        ..MediumSpec::default()
    };
    let delta = 10.0;
    let dt = 0.1 / delta;
    let s0 = C64::new(0.3, -0.1);
    let mut slice = SliceState::from_atoms(
        &[AtomState {
            sigma: s0,
            n_g: 0.6,
            n_e: 0.4,
            n_s: 0.0,
        }],
        0,
    );
    let drive = StepDrive::constant(C64::new(0.0, 0.0));
    // RK4 phase error is ~(Δ·dt)^5/120 per step, so ten steps stay inside 1e-6
    let steps = 10;
    for _ in 0..steps {
        slice.advance(&drive, dt, &m, &[delta]).unwrap();
    }
    let t = steps as f64 * dt;
    let exact = s0 * (C64::new(-1.0 / m.t2_opt_us, delta) * t).exp();
    let got = slice.atom(0).sigma;
    assert!((got - exact).norm() / exact.norm() < 1e-6, "{got} vs {exact}");
}

#[test]
fn population_sum_holds_for_a_million_steps() {
    let m = MediumSpec {
        t1_opt_us: 5.0,
        t2_opt_us: 4.0,
        shelf_lifetime_us: 50.0,
        repump_rate_per_us: 0.01,
        ..MediumSpec::default()
    };
    let deltas = [-3.0, 0.0, 1.5];
    let mut slice = SliceState::ground(deltas.len(), 0);
    let dt = 0.01;
    let mut worst = 0.0f64;
    for i in 0..1_000_000u32 {
        // slowly modulated strong drive keeps every population moving
        let w = 2.0 * (1.0 + (i as f64 * dt * 0.05).sin());
        let r = slice.advance(&StepDrive::constant(C64::new(w, 0.3)), dt, &m, &deltas).unwrap();
        worst = worst.max(r.max_drift);
    }
    let sum_err = slice
        .atoms()
        .iter()
        .map(|a| (a.n_g + a.n_e + a.n_s - 1.0).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-9, "per-step drift {worst:e}");
    assert!(sum_err < 1e-9);
}

#[test]
fn rabi_flopping_rms_over_two_flops() {
    let m = lossless();
    let omega = 2.0;
    let t_total = 4.0 * PI / omega;
    let n = 2000;
    let dt = t_total / n as f64;
    let mut slice = SliceState::ground(1, 0);
    let mut sq = 0.0;
    for i in 1..=n {
        slice.advance(&StepDrive::constant(C64::new(omega, 0.0)), dt, &m, &[0.0]).unwrap();
        let exact = (omega * i as f64 * dt / 2.0).sin().powi(2);
        sq += (slice.atom(0).n_e - exact).powi(2);
    }
    assert!((sq / n as f64).sqrt() < 1e-5);
}

#[test]
fn slice_echo_rebuilds_at_twice_the_separation() {
    // flat comb of detunings; θ₁ = π/2 at t=0, θ₂ = π at t=τ, both short
    let m = MediumSpec {
        t2_opt_us: 1e6,
        t1_opt_us: 1e6,
        ..MediumSpec::default()
    };
    let g = Grids::with_horizon(32, 201, 10.0, 0.005, 12.0);
    let w = build_weights(&g, LineShape::Flat).unwrap();
    let rabi = 60.0;
    let (t1, t2) = (PI / 2.0 / rabi, PI / rabi);
    let tau = 4.0;
    let mut slice = SliceState::ground(g.n_delta, 0);
    let mut best = (0.0, 0.0);
    for i in 0..g.nt - 1 {
        let t = g.time(i);
        let on = t < t1 - 1e-12 || (t >= tau - 1e-12 && t < tau + t2 - 1e-12);
        let om = if on { C64::new(rabi, 0.0) } else { C64::new(0.0, 0.0) };
        slice.advance(&StepDrive::constant(om), g.dt_us, &m, &w.deltas).unwrap();
        let p = polarization(&slice, &w).unwrap().norm();
        if t > tau + 1.0 && p > best.1 {
            best = (g.time(i + 1), p);
        }
    }
    // a hard π/2 pulse dephases as if the coherence were created 2·t₁/π
    // before its end; the π pulse acts at its centre
    let expected = 2.0 * (tau + t2 / 2.0) - t1 * (1.0 - 2.0 / PI);
    assert!((best.0 - expected).abs() <= g.dt_us + 1e-9, "peak at {} vs {expected}", best.0);
}

fn weak_setup() -> (MediumSpec, Grids, slowecho::model::SpectralWeights) {
    let m = MediumSpec {
        t2_opt_us: 10.0,
        ..MediumSpec::default()
    };
    let g = Grids::with_horizon(32, 101, 12.5, 0.008, 6.0);
    let w = build_weights(&g, LineShape::Flat).unwrap();
    (m, g, w)
}

#[test]
fn halving_depth_takes_square_root_of_transmission() {
    let (m, g, w) = weak_setup();
    let k = calibrate_coupling(&m, &g, &w).unwrap();
    let full = probe_transmission(&m, &g, &w, k).unwrap();
    let half_m = MediumSpec {
        optical_depth_d0: m.optical_depth_d0 / 2.0,
        ..m.clone()
    };
    let k_half = calibrate_coupling(&half_m, &g, &w).unwrap();
    let half = probe_transmission(&half_m, &g, &w, k_half).unwrap();
    assert!((half / full.sqrt() - 1.0).abs() < 0.02, "{half} vs sqrt({full})");
    // Beer's law is linear in κ too: half the coupling, same medium
    let same = probe_transmission(&m, &g, &w, CouplingConstant { kappa: k.kappa / 2.0 }).unwrap();
    assert!((same / full.sqrt() - 1.0).abs() < 0.02);
}

fn pulse_run(scale: f64) -> (slowecho::propagate::FieldRecord, MediumSpec) {
    let (m, g, w) = weak_setup();
    let k = calibrate_coupling(&m, &g, &w).unwrap();
    let seq = PulseSequence {
        pulses: vec![Pulse::with_area(PulseLabel::D, 0.5, 1.5, 0.01 * PI * scale, PulseShape::Square)],
        t_end_us: 6.0,
    };
    let pop = PopulationMap::unburned(&g, &m);
    let rec = march(&seq.render(&g), &m, &g, &w, &pop, k, &MarchOptions::default()).unwrap();
    (rec, m)
}

#[test]
fn weak_field_is_linear_and_passive() {
    let (a, _) = pulse_run(1.0);
    let (b, _) = pulse_run(0.5);
    assert!(a.energy_out() <= a.energy_in() * (1.0 + 1e-9));
    let norm = a.omega_out.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let err = a
        .omega_out
        .iter()
        .zip(&b.omega_out)
        .map(|(x, y)| (x * 0.5 - y).norm())
        .fold(0.0, f64::max);
    assert!(err / (0.5 * norm) < 1e-3, "relative deviation {}", err / (0.5 * norm));
}

#[test]
fn z_refinement_changes_energy_little() {
    let (m, g, w) = weak_setup();
    let k = calibrate_coupling(&m, &g, &w).unwrap();
    let coarse = probe_transmission(&m, &g, &w, k).unwrap();
    let fine = probe_transmission(&m, &g.refined_z(), &w, k).unwrap();
    assert!(((fine - coarse) / coarse).abs() < 5e-3);
}

fn hole_map(depth: f64, hwhm: f64) -> (PopulationMap, MediumSpec, slowecho::model::SpectralWeights) {
    let m = MediumSpec {
        t2_opt_us: 300.0,
        ..MediumSpec::default()
    };
    let g = Grids::with_horizon(32, 601, 10.0, 0.01, 10.0);
    let w = build_weights(&g, LineShape::Flat).unwrap();
    (PopulationMap::with_lorentzian_hole(&g, &m, |_| depth, hwhm), m, w)
}

#[test]
fn predicted_delay_is_linear_in_hole_depth() {
    let (a, m, w) = hole_map(0.4, 0.42);
    let (b, _, _) = hole_map(0.8, 0.42);
    let ta = predicted_group_delay(&a, &m, &w, 0.42).unwrap();
    let tb = predicted_group_delay(&b, &m, &w, 0.42).unwrap();
    assert!((tb / ta - 2.0).abs() < 0.04, "{tb} / {ta}");
}

#[test]
fn predicted_delay_matches_narrow_hole_formula() {
    // γ_h = 0.42 < Δ_max/20 = 0.5
    let (map, m, w) = hole_map(1.0, 0.42);
    let tau = predicted_group_delay(&map, &m, &w, 0.42).unwrap();
    let ideal = ideal_hole_delay(m.optical_depth_d0, 0.42);
    assert!((tau / ideal - 1.0).abs() < 0.10, "{tau} vs {ideal}");
    assert!((tau - 2.6).abs() < 0.1);
}
