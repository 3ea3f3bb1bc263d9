use std::ffi::{CStr, CString};
use std::ptr;

use slowecho_ffi::*;

const TRANSPARENT: &str = "\
scenario = single_run
medium.optical_depth_d0 = 0
grids.nz = 32
grids.n_delta = 101
grids.delta_max = 12.5
grids.dt_us = 0.008
sequence.t_end_us = 25
sequence.d.t_start_us = 1.0
sequence.d.duration_us = 1.5
sequence.r.t_start_us = 8.0
sequence.r.duration_us = 1.5
";

fn last_error() -> String {
    unsafe { CStr::from_ptr(slowecho_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn config_run_and_free() {
    let text = CString::new(TRANSPARENT).unwrap();
    let mut cfg = ptr::null_mut();
    let mut res = ptr::null_mut();
    unsafe {
        assert_eq!(slowecho_config_parse(text.as_ptr(), &mut cfg), SlowechoStatus::Ok);
        assert!(!cfg.is_null());
        let hash = CStr::from_ptr(slowecho_config_hash(cfg)).to_str().unwrap();
        assert_eq!(hash.len(), 64);

        assert_eq!(slowecho_run(cfg, &mut res), SlowechoStatus::Ok);
        let mut eff = f64::NAN;
        assert_eq!(slowecho_result_echo_efficiency(res, &mut eff), SlowechoStatus::Ok);
        assert_eq!(eff, 0.0, "a transparent medium emits no echo");
        let json = CStr::from_ptr(slowecho_result_summary_json(res)).to_str().unwrap();
        assert!(json.contains("\"echoes\": []"));
        assert_eq!(slowecho_result_sweep_len(res), 0);
        let mut row = std::mem::zeroed();
        assert_eq!(slowecho_result_sweep_row(res, 0, &mut row), SlowechoStatus::WrongKind);

        let dir = tempfile::tempdir().unwrap();
        let d = CString::new(dir.path().to_str().unwrap()).unwrap();
        assert_eq!(slowecho_write_artifacts(cfg, res, d.as_ptr()), SlowechoStatus::Ok);
        assert!(dir.path().join("manifest.json").exists());
        assert!(dir.path().join("trace.csv").exists());

        slowecho_result_free(res);
        slowecho_config_free(cfg);
        slowecho_config_free(ptr::null_mut());
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    let mut cfg = ptr::null_mut();
    let bad = CString::new("scenario = single_run\nmedium.colour = blue\n").unwrap();
    unsafe {
        assert_eq!(slowecho_config_parse(bad.as_ptr(), &mut cfg), SlowechoStatus::Config);
        assert!(cfg.is_null());
        assert!(last_error().contains("medium.colour"));
        assert_eq!(slowecho_config_parse(ptr::null(), &mut cfg), SlowechoStatus::NullPointer);
        let mut res = ptr::null_mut();
        assert_eq!(slowecho_run(ptr::null(), &mut res), SlowechoStatus::NullPointer);
        assert!(slowecho_config_hash(ptr::null()).is_null());
    }
}

#[test]
fn fit_round_trip() {
    let tau = [2.3, 2.5, 2.8, 3.0];
    let y: Vec<f64> = tau.iter().map(|t: &f64| 5.0 * (3.0 * (t - 2.3)).exp()).collect();
    let mode = CString::new("fixed:2.3").unwrap();
    let mut fit = SlowechoFit { a: 0.0, b: 0.0, c: 0.0, r_squared: 0.0 };
    unsafe {
        assert_eq!(
            slowecho_fit_exponential(tau.as_ptr(), y.as_ptr(), tau.len(), mode.as_ptr(), &mut fit),
            SlowechoStatus::Ok
        );
        assert!((fit.a - 5.0).abs() < 1e-9 && (fit.b - 3.0).abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(
            slowecho_fit_exponential(tau.as_ptr(), y.as_ptr(), 2, mode.as_ptr(), &mut fit),
            SlowechoStatus::Analysis
        );
        let bad = CString::new("fixed:abc").unwrap();
        assert_eq!(
            slowecho_fit_exponential(tau.as_ptr(), y.as_ptr(), 4, bad.as_ptr(), &mut fit),
            SlowechoStatus::Config
        );
    }
    assert!(last_error().contains("c-mode"));
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(slowecho_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/slowecho.h");
    let src = format!("#include \"{header}\"\nint main(void) {{ return (int)SLOWECHO_STATUS_OK; }}\n");
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("probe.c");
    std::fs::write(&file, src).unwrap();
    match std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"])
        .arg(&file)
        .status()
    {
        Ok(status) => assert!(status.success(), "header does not compile"),
        Err(_) => eprintln!("no C compiler on PATH; skipping header check"),
    }
}
