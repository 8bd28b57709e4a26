use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use streaklab_ffi::*;

fn last_error() -> String {
    let p = sl_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn simulate_analyze_and_verdict() {
    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(sl_config_new(&mut cfg), SlStatus::Ok);
        assert_eq!(sl_config_set_detuning(cfg, 54.9), SlStatus::Ok);
        assert_eq!(sl_config_set_seed(cfg, 11), SlStatus::Ok);

        let mut ig = ptr::null_mut();
        assert_eq!(sl_simulate_shot(cfg, 0, &mut ig), SlStatus::Ok);
        let n = sl_interferogram_event_count(ig);
        assert!(n > 1_000_000);

        let mut truth = 0.0;
        assert_eq!(sl_interferogram_true_delta_nu(ig, &mut truth), SlStatus::Ok);
        assert!((truth - 54.9).abs() < 1e-3);

        let mut est = SlFringeEstimate::default();
        assert_eq!(sl_estimate_fringes(ig, &mut est), SlStatus::Ok);
        assert!((est.delta_nu_mhz - 54.9).abs() < 0.83);
        assert_eq!(est.orientation, SlOrientation::OxebPositive as u32);

        let mut v = SlVerdict { higher_energy: SlHigherEnergy::Undetermined, confidence: 0.0, threshold: 0.0 };
        assert_eq!(sl_which_path(&est, 0.0, &mut v), SlStatus::Ok);
        assert_eq!(v.higher_energy, SlHigherEnergy::Oxeb);
        assert_eq!(v.threshold, 5.0);

        let (mut tb, mut yb) = (0usize, 0usize);
        assert_eq!(sl_interferogram_image_size(ig, &mut tb, &mut yb), SlStatus::Ok);
        let mut counts = vec![0u32; tb * yb];
        assert_eq!(sl_interferogram_image(ig, counts.as_mut_ptr(), counts.len() - 1), SlStatus::BufferTooSmall);
        assert!(last_error().contains("need"));
        assert_eq!(sl_interferogram_image(ig, counts.as_mut_ptr(), counts.len()), SlStatus::Ok);
        assert!(counts.iter().map(|&c| c as usize).sum::<usize>() <= n);

        let (mut t, mut y) = (vec![0.0; n], vec![0.0; n]);
        assert_eq!(sl_interferogram_events(ig, t.as_mut_ptr(), y.as_mut_ptr(), n), SlStatus::Ok);
        assert!(t.windows(2).all(|w| w[0] <= w[1]));

        sl_interferogram_free(ig);
        sl_config_free(cfg);
    }
}

#[test]
fn event_file_round_trip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("a.events").to_str().unwrap()).unwrap();
    unsafe {
        let mut cfg = ptr::null_mut();
        let toml = CString::new("[oxeb]\nphoton_flux_per_ns = 0.0\n").unwrap();
        assert_eq!(sl_config_from_toml(toml.as_ptr(), 1, &mut cfg), SlStatus::Ok);
        let mut ig = ptr::null_mut();
        assert_eq!(sl_simulate_shot(cfg, 3, &mut ig), SlStatus::Ok);
        assert_eq!(sl_interferogram_write(ig, path.as_ptr()), SlStatus::Ok);

        let mut back = ptr::null_mut();
        assert_eq!(sl_interferogram_read(path.as_ptr(), &mut back), SlStatus::Ok);
        assert_eq!(sl_interferogram_event_count(back), sl_interferogram_event_count(ig));
        let mut truth = 0.0;
        assert_eq!(sl_interferogram_true_delta_nu(back, &mut truth), SlStatus::InvalidArgument);

        // One beam only: nothing to fit.
        let mut est = SlFringeEstimate::default();
        assert_eq!(sl_estimate_fringes(back, &mut est), SlStatus::NoFringes);
        assert!(last_error().contains("no fringes"));

        sl_interferogram_free(back);
        sl_interferogram_free(ig);
        sl_config_free(cfg);
    }
}

#[test]
fn bad_inputs_are_reported() {
    unsafe {
        let mut cfg = ptr::null_mut();
        let bad = CString::new("seed = 1\n[detector]\nqe = 2.0\n").unwrap();
        assert_eq!(sl_config_from_toml(bad.as_ptr(), 0, &mut cfg), SlStatus::Config);
        assert!(last_error().contains("line 3"));
        assert!(cfg.is_null());

        let unknown = CString::new("sede = 1\n").unwrap();
        assert_eq!(sl_config_from_toml(unknown.as_ptr(), 1, &mut cfg), SlStatus::Config);
        assert_eq!(sl_config_from_toml(unknown.as_ptr(), 0, &mut cfg), SlStatus::Ok);
        sl_config_free(cfg);

        assert_eq!(sl_config_new(ptr::null_mut()), SlStatus::NullPointer);
        assert_eq!(sl_config_from_toml(ptr::null(), 0, &mut cfg), SlStatus::NullPointer);
        assert_eq!(sl_estimate_fringes(ptr::null(), ptr::null_mut()), SlStatus::NullPointer);
        assert_eq!(sl_interferogram_event_count(ptr::null()), 0);
        sl_config_free(ptr::null_mut());
        sl_interferogram_free(ptr::null_mut());

        let missing = CString::new("/nonexistent/x.events").unwrap();
        let mut ig = ptr::null_mut();
        assert_eq!(sl_interferogram_read(missing.as_ptr(), &mut ig), SlStatus::Io);

        let mut cfg = ptr::null_mut();
        assert_eq!(sl_config_new(&mut cfg), SlStatus::Ok);
        assert_eq!(sl_config_set_detuning(cfg, f64::NAN), SlStatus::InvalidArgument);
        sl_config_free(cfg);
    }
}

#[test]
fn budget_through_c_api() {
    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(sl_config_new(&mut cfg), SlStatus::Ok);
        let mut b = SlBudget::default();
        assert_eq!(sl_compute_budget(cfg, &mut b), SlStatus::Ok);
        assert!((b.photons_per_ns_at_detector / 2.68e7 - 1.0).abs() < 5e-3);
        assert!((b.sql_phase_rad_quoted - 9.66e-3).abs() < 5e-6);
        assert_eq!(b.detected_per_ns_quoted, 2680.0);
        sl_config_free(cfg);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(sl_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_entry_point_and_compiles() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/streaklab.h");
    let text = std::fs::read_to_string(header).unwrap();
    let src = include_str!("../src/lib.rs");
    let exported: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .filter_map(|rest| rest.split('(').next())
        .collect();
    assert!(exported.len() >= 18, "{exported:?}");
    for f in &exported {
        assert!(text.contains(&format!("{f}(")), "header lacks {f}");
    }
    // Compile the header as C when a compiler is around.
    if let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header]).output() {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
