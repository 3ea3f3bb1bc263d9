//! Scenario-level consistency checks on a small grid.

use slowecho::burn::BurnDirection;
use slowecho::config::ScenarioConfig;
use slowecho::propagate::CouplingConstant;
use slowecho::scenarios::{self, run_point, Prepared};
use slowecho::Error;

const BASE: &str = "
medium.length_mm = 5.0
medium.optical_depth_d0 = 2.2
medium.t1_opt_us = 160
medium.t2_opt_us = 10
grids.nz = 32
grids.n_delta = 101
grids.delta_max = 12.5
grids.dt_us = 0.008
sequence.t_end_us = 20
sequence.d.t_start_us = 1.0
sequence.d.duration_us = 1.0
sequence.d.area_pi = 0.5
sequence.r.t_start_us = 8.0
sequence.r.duration_us = 1.0
sequence.r.area_pi = 1.0
manifest.convergence_check = false
";

const BURN: &str = "
burn.model = rate_saturation
burn.hole_hwhm = 0.42
burn.h.rabi_peak = 0.05
burn.h.duration_us = 100
burn.wait_after_h_us = 500
";

fn cfg(extra: &str) -> ScenarioConfig {
    ScenarioConfig::parse(&format!("{BASE}{extra}")).unwrap()
}

/// `cfg` with one existing key overridden.
fn cfg_with(extra: &str, key: &str, value: &str) -> ScenarioConfig {
    let text: Vec<String> = format!("{BASE}{extra}")
        .lines()
        .map(|l| match l.split_once('=') {
            Some((k, _)) if k.trim() == key => format!("{key} = {value}"),
            _ => l.to_string(),
        })
        .collect();
    ScenarioConfig::parse(&text.join("\n")).unwrap()
}

fn root(e: &Error) -> &Error {
    match e {
        Error::Context { source, .. } => root(source),
        e => e,
    }
}

#[test]
fn zero_h_power_leaves_the_pair_identical() {
    let c = cfg_with(&format!("scenario = fig2_pair\n{BURN}"), "burn.h.rabi_peak", "0");
    let p = scenarios::run_fig2_pair(&c).unwrap();
    assert_eq!(p.no_burn.record.omega_out, p.with_burn.record.omega_out);
    assert_eq!(p.no_burn.map, p.with_burn.map);
    assert_eq!(p.report.enhancement, 1.0);
}

#[test]
fn backward_burn_mirrors_the_forward_map() {
    let c = cfg(&format!("scenario = backward_control\n{BURN}"));
    let prep = Prepared::new(&c).unwrap();
    let mut b = c.burn.clone().unwrap();
    let fwd = prep.burn(&b).unwrap();
    b.burn_direction = BurnDirection::Backward;
    let bwd = prep.burn(&b).unwrap();
    assert_eq!(bwd, fwd.mirrored());
    // the H light is attenuated on its way in, so the entrance hole is deepest
    let profile = fwd.hole_profile();
    assert!(profile.first().unwrap() > profile.last().unwrap());
}

#[test]
fn control_reference_equals_a_plain_single_run() {
    let control = scenarios::run_backward_control(&cfg(&format!("scenario = backward_control\n{BURN}"))).unwrap();
    let single = scenarios::run_single(&cfg("scenario = single_run\n")).unwrap();
    assert_eq!(control.no_burn.record.omega_out, single.record.omega_out);
    assert_eq!(control.report.no_burn.echo_efficiency, single.report.echo_efficiency);
}

#[test]
fn empty_medium_gives_no_echo_and_no_delay() {
    let c = cfg("scenario = single_run\n");
    let mut prep = Prepared::new(&c).unwrap();
    prep.kappa = CouplingConstant { kappa: 0.0 };
    let out = run_point(&prep, prep.unburned(), "empty", &[]).unwrap();
    assert!(out.report.echoes.is_empty(), "{:?}", out.report.echoes);
    assert_eq!(out.report.echo_efficiency, 0.0);
    assert!(out.report.tau_g_us.unwrap().abs() < 1e-9, "{:?}", out.report.tau_g_us);
    assert!(out.report.optical_depth.abs() < 1e-9);
}

#[test]
fn hole_depth_sweep_hits_requested_depths() {
    let c = cfg(&format!(
        "scenario = fig3_sweep\n{BURN}sweep.variable = hole_depth\nsweep.values = 0.6, 0.3, 0.9\n"
    ));
    let s = scenarios::run_fig3_sweep(&c).unwrap();
    let got: Vec<f64> = s.result.rows.iter().map(|r| r.hole_depth).collect();
    for (g, want) in got.iter().zip([0.3, 0.6, 0.9]) {
        assert!((g - want).abs() < 1e-9, "{got:?}");
    }
    assert!(s.result.fit.is_some());
    // deeper holes delay the data pulse more
    assert!(s.result.rows.windows(2).all(|w| w[1].tau_g_us > w[0].tau_g_us), "{:?}", s.result.rows);
}

#[test]
fn single_point_sweep_is_rejected() {
    let c = cfg(&format!("scenario = fig3_sweep\n{BURN}sweep.variable = hole_depth\nsweep.values = 0.5\n"));
    let e = scenarios::run(&c).unwrap_err();
    assert!(matches!(root(&e), Error::Config(_)), "{e}");
    assert_eq!(e.exit_code(), 2);
}

#[test]
fn scan_needs_the_damped_rabi_law() {
    let c = cfg(&format!("scenario = fig4_scan\n{BURN}sweep.variable = t_h_us\nsweep.values = 0, 10, 20\n"));
    let e = scenarios::run(&c).unwrap_err();
    assert!(e.to_string().contains("damped_rabi"), "{e}");
    assert_eq!(e.exit_code(), 2);
}

#[test]
fn artifacts_are_reproducible_and_listed() {
    let c = cfg_with("scenario = single_run\noutput.probes_mm = 0, 2.5\n", "manifest.convergence_check", "true");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut manifests = Vec::new();
    for d in &dirs {
        let out = scenarios::run(&c).unwrap();
        manifests.push(scenarios::write_artifacts(&c, &out, d.path()).unwrap());
    }
    assert_eq!(manifests[0], manifests[1]);
    let m = &manifests[0];
    assert_eq!(m.config_hash_sha256, c.hash_hex());
    assert_eq!(m.modules.len(), 6);
    assert!(m.convergence.unwrap().relative_delta < 5e-3);
    assert!(m.artifacts.contains(&"trace_probes.csv".to_string()));
    for name in m.artifacts.iter().chain(std::iter::once(&"manifest.json".to_string())) {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        assert!(a == b, "{name} differs");
    }
}
