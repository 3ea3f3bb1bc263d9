//! Property tests for the invariants of weights and analysis functions.

use num_complex::Complex64 as C64;
use proptest::prelude::*;

use slowecho::analysis::{detect_echoes, fit_exponential, group_delay, optical_depth, CMode};
use slowecho::model::{build_weights, Grids, LineShape, Pulse, PulseLabel, PulseSequence, PulseShape};
use slowecho::propagate::FieldRecord;

fn odd(n: usize) -> usize {
    n | 1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_are_normalized(n in 1usize..400, dmax in 0.1f64..100.0, fwhm in 0.01f64..500.0, gauss: bool) {
        let g = Grids::with_horizon(32, odd(n.max(3)), dmax, 1e-4, 1.0);
        let mode = if gauss { LineShape::Gaussian { fwhm } } else { LineShape::Flat };
        let w = build_weights(&g, mode).unwrap();
        prop_assert!((w.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let n = w.len();
        for j in 0..n / 2 {
            prop_assert!((w.weights[j] - w.weights[n - 1 - j]).abs() < 1e-15);
        }
    }

    #[test]
    fn weighted_average_is_stable_under_refinement(n in 51usize..200, a in 0.1f64..2.0, fwhm in 5.0f64..60.0) {
        let coarse = Grids::with_horizon(32, odd(n), 25.0, 1e-3, 1.0);
        let fine = Grids { n_delta: 2 * odd(n) - 1, ..coarse };
        let f = |d: f64| 1.0 + (a * d / 25.0).cos() + (d / 25.0).powi(2);
        let mode = LineShape::Gaussian { fwhm };
        let x = build_weights(&coarse, mode).unwrap().average(f);
        let y = build_weights(&fine, mode).unwrap().average(f);
        prop_assert!(((x - y) / x).abs() < 0.01);
    }
}

fn record(f_in: &dyn Fn(f64) -> C64, f_out: &dyn Fn(f64) -> C64, n: usize, dt: f64) -> FieldRecord {
    let t: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
    FieldRecord {
        omega_in: t.iter().map(|&x| f_in(x)).collect(),
        omega_out: t.iter().map(|&x| f_out(x)).collect(),
        t_grid: t,
        probes: vec![],
        max_population_drift: 0.0,
        full: None,
    }
}

fn bump(c: f64, s: f64, amp: f64) -> impl Fn(f64) -> C64 {
    move |t| C64::new(amp * (-0.5 * ((t - c) / s).powi(2)).exp(), 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn optical_depth_ignores_joint_scaling(att in 0.05f64..1.0, s in 0.01f64..100.0) {
        let a = record(&bump(3.0, 0.5, 1.0), &bump(3.4, 0.6, att), 1000, 0.01);
        let b = record(&bump(3.0, 0.5, s), &bump(3.4, 0.6, att * s), 1000, 0.01);
        let w = (1.5, 4.5);
        let (x, y) = (optical_depth(&a, w).unwrap(), optical_depth(&b, w).unwrap());
        prop_assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
    }

    #[test]
    fn group_delay_ignores_common_time_shift(delay in 0.0f64..2.0, shift_steps in 0usize..300) {
        let dt = 0.01;
        let h = shift_steps as f64 * dt;
        let a = record(&bump(2.0, 0.3, 1.0), &bump(2.0 + delay, 0.35, 0.4), 2000, dt);
        let b = record(&bump(2.0 + h, 0.3, 1.0), &bump(2.0 + h + delay, 0.35, 0.4), 2000, dt);
        let x = group_delay(&a, (1.0, 3.0)).unwrap();
        let y = group_delay(&b, (1.0 + h, 3.0 + h)).unwrap();
        prop_assert!((x - y).abs() < 1e-6, "{} vs {}", x, y);
    }

    #[test]
    fn echo_efficiency_ignores_joint_scaling(s in 0.01f64..100.0) {
        let seq = PulseSequence {
            pulses: vec![
                Pulse::with_area(PulseLabel::D, 1.0, 1.0, 1.0, PulseShape::Square),
                Pulse::with_area(PulseLabel::R, 5.0, 1.0, 2.0, PulseShape::Square),
            ],
            t_end_us: 15.0,
        };
        let amp = |t: f64| seq.pulses.iter().map(|p| p.amplitude(t)).sum::<f64>();
        let input = |k: f64| move |t: f64| C64::new(k * amp(t), 0.0);
        let out = |k: f64| move |t: f64| C64::new(0.3 * k * amp(t), 0.0) + bump(9.5, 0.4, 0.2 * k)(t);
        let a = record(&input(1.0), &out(1.0), 1500, 0.01);
        let b = record(&input(s), &out(s), 1500, 0.01);
        let ea = detect_echoes(&a, &seq).unwrap();
        let eb = detect_echoes(&b, &seq).unwrap();
        prop_assert_eq!(ea.len(), eb.len());
        prop_assert!(!ea.is_empty());
        for (x, y) in ea.iter().zip(&eb) {
            prop_assert!((x.efficiency - y.efficiency).abs() < 1e-9 * x.efficiency.max(1e-12), "{:?} vs {:?}", x, y);
        }
    }

    #[test]
    fn fit_rate_is_invariant(b in -2.0f64..4.0, s in 0.01f64..100.0, h in -3.0f64..3.0,
                             noise in proptest::collection::vec(-0.05f64..0.05, 5)) {
        let taus = [0.5, 0.9, 1.4, 2.0, 2.6];
        let pts: Vec<(f64, f64)> = taus.iter().zip(&noise).map(|(&t, e)| (t, (b * t).exp() * (1.0 + e))).collect();
        let base = fit_exponential(&pts, CMode::MinTau).unwrap();
        let scaled: Vec<_> = pts.iter().map(|&(t, y)| (t, s * y)).collect();
        let shifted: Vec<_> = pts.iter().map(|&(t, y)| (t + h, y)).collect();
        let fs = fit_exponential(&scaled, CMode::MinTau).unwrap();
        let fh = fit_exponential(&shifted, CMode::MinTau).unwrap();
        prop_assert!((fs.b - base.b).abs() < 1e-9);
        prop_assert!((fs.a / base.a - s).abs() < 1e-9 * s);
        prop_assert!((fh.b - base.b).abs() < 1e-9);
        prop_assert!((fh.a - base.a).abs() < 1e-9 * base.a);
        prop_assert!((0.0..=1.0).contains(&base.r_squared));
    }
}
