use std::ffi::{c_char, CString};
use std::ptr;

use measdiff_ffi::*;

fn rotator(lambda: f64, m: usize) -> *mut MdSystem {
    let mut sys = ptr::null_mut();
    let st = unsafe { md_system_rotator(1.0, lambda, 1.0, 0.5, 1.0, m, 0, &mut sys) };
    assert_eq!(st, MdStatus::Ok);
    assert!(!sys.is_null());
    sys
}

fn last_error() -> String {
    let n = unsafe { md_last_error(ptr::null_mut(), 0) };
    let mut buf = vec![0 as c_char; n + 1];
    unsafe { md_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn rotator_handle_round_trip() {
    let sys = rotator(1.0, 32);
    let mut f2 = 0.0;
    let mut d = 0.0;
    unsafe {
        assert_eq!(md_mean_force_squared(sys, &mut f2), MdStatus::Ok);
        assert_eq!(md_quasilinear_diffusion(sys, &mut d), MdStatus::Ok);
    }
    assert!((f2 - 0.5).abs() < 1e-14);
    assert!((d - 0.5).abs() < 1e-14);
    unsafe { md_system_free(sys) };
}

#[test]
fn transition_entries_are_bessel_squared() {
    let sys = rotator(2.0, 32);
    let mut band = 0usize;
    unsafe { assert_eq!(md_transition_bandwidth(sys, &mut band), MdStatus::Ok) };
    assert!(band > 2 && band < 32, "band = {band}");
    for k in 0..6i64 {
        let (mut w, mut j) = (0.0, 0.0);
        unsafe {
            assert_eq!(md_transition_entry(sys, k, 0, &mut w), MdStatus::Ok);
            assert_eq!(md_bessel_j(k, 2.0, &mut j), MdStatus::Ok);
        }
        assert!((w - j * j).abs() < 1e-13, "k = {k}");
    }
    let mut w = 1.0;
    unsafe { md_transition_entry(sys, 100, 0, &mut w) };
    assert_eq!(w, 0.0);
    unsafe { md_system_free(sys) };
}

#[test]
fn measured_moments_grow_linearly() {
    let sys = rotator(1.0, 64);
    let kicks = 10;
    let mut buf = vec![f64::NAN; (kicks + 1) * 4];
    let st = unsafe { md_evolve_measured(sys, 0, kicks, 1e-9, buf.as_mut_ptr(), buf.len()) };
    assert_eq!(st, MdStatus::Ok);
    for n in 0..=kicks {
        assert!((buf[4 * n + 1] - 0.5 * n as f64).abs() < 1e-12);
        assert!(buf[4 * n].abs() < 1e-12);
    }
    unsafe { md_system_free(sys) };
}

#[test]
fn coherent_first_kick_matches_measured() {
    let sys = rotator(1.0, 64);
    let mut a = vec![0.0; 8];
    let mut b = vec![0.0; 8];
    unsafe {
        assert_eq!(md_evolve_coherent(sys, 0, 1, 1e-9, a.as_mut_ptr(), 8), MdStatus::Ok);
        assert_eq!(md_evolve_measured(sys, 0, 1, 1e-9, b.as_mut_ptr(), 8), MdStatus::Ok);
        md_system_free(sys);
    }
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn short_buffer_is_reported() {
    let sys = rotator(1.0, 16);
    let mut buf = vec![0.0; 7];
    let st = unsafe { md_evolve_measured(sys, 0, 1, 1e-9, buf.as_mut_ptr(), buf.len()) };
    assert_eq!(st, MdStatus::BufferTooSmall);
    assert!(last_error().contains("8 needed"), "{}", last_error());
    unsafe { md_system_free(sys) };
}

#[test]
fn leak_budget_maps_to_budget_status() {
    let sys = rotator(3.0, 8);
    let mut buf = vec![0.0; 4 * 21];
    let st = unsafe { md_evolve_measured(sys, 0, 20, 1e-12, buf.as_mut_ptr(), buf.len()) };
    assert_eq!(st, MdStatus::BudgetExceeded);
    assert!(last_error().contains("leak"));
    unsafe { md_system_free(sys) };
}

#[test]
fn invalid_parameters_leave_null_handle() {
    let mut sys = ptr::null_mut();
    let st = unsafe { md_system_rotator(1.0, 1.0, 1.0, 1.5, 1.0, 16, 0, &mut sys) };
    assert_eq!(st, MdStatus::InvalidArgument);
    assert!(sys.is_null());
    assert!(last_error().contains("tau"), "{}", last_error());
    let st = unsafe { md_system_rotator(1.0, 1.0, 1.0, 0.5, 1.0, 16, 10, &mut sys) };
    assert_eq!(st, MdStatus::InvalidArgument);
    assert!(last_error().contains("4M+1"));
}

#[test]
fn null_pointers_are_rejected() {
    let mut x = 0.0;
    unsafe {
        assert_eq!(md_mean_force_squared(ptr::null(), &mut x), MdStatus::NullPointer);
        assert_eq!(md_bessel_j(0, 1.0, ptr::null_mut()), MdStatus::NullPointer);
        assert_eq!(md_system_rotator(1.0, 1.0, 1.0, 0.5, 1.0, 16, 0, ptr::null_mut()), MdStatus::NullPointer);
        md_system_free(ptr::null_mut());
    }
}

#[test]
fn toml_configuration() {
    let text = CString::new(
        "[system]\nlambda = 2.0\nbasis_m = 32\n[system.potential]\nkind = \"cosine_sum\"\nharmonics = [{ k = 2, weight = 1.0 }]\n",
    )
    .unwrap();
    let mut sys = ptr::null_mut();
    assert_eq!(unsafe { md_system_from_toml(text.as_ptr(), &mut sys) }, MdStatus::Ok);
    let mut d = 0.0;
    unsafe { md_quasilinear_diffusion(sys, &mut d) };
    // f = 2 sin 2x, <f^2> = 2
    assert!((d - 8.0).abs() < 1e-12);
    unsafe { md_system_free(sys) };

    let bad = CString::new("[system]\nlamda = 2.0\n").unwrap();
    assert_eq!(unsafe { md_system_from_toml(bad.as_ptr(), &mut sys) }, MdStatus::Config);
    assert!(sys.is_null());
    assert!(last_error().contains("lamda"));
}

#[test]
fn bessel_range_error() {
    let mut x = 0.0;
    assert_eq!(unsafe { md_bessel_j(0, 1e9, &mut x) }, MdStatus::InvalidArgument);
    assert_eq!(unsafe { md_bessel_j(1, 1.0, &mut x) }, MdStatus::Ok);
    assert!((x - 0.440_050_585_744_933_5).abs() < 1e-15);
    assert_eq!(last_error(), "");
}

#[test]
fn header_declares_every_entry_point() {
    let header = include_str!("../include/measdiff.h");
    for name in [
        "md_system_rotator",
        "md_system_from_toml",
        "md_system_free",
        "md_mean_force_squared",
        "md_quasilinear_diffusion",
        "md_transition_entry",
        "md_transition_bandwidth",
        "md_evolve_measured",
        "md_evolve_coherent",
        "md_bessel_j",
        "md_last_error",
        "typedef struct MdSystem MdSystem",
        "MD_STATUS_BUDGET_EXCEEDED = 4",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}
