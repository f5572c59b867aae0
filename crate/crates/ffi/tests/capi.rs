use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use oamclone_ffi::*;

fn last_error() -> String {
    let p = oamclone_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(oamclone_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn clone_routes_agree() {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for route in [OamCloneRoute::Full, OamCloneRoute::Projector] {
        let mut h: *mut OamCloneResult = ptr::null_mut();
        let st = unsafe { oamclone_clone_run(s, 0.0, s, 0.0, route, 0, 0, &mut h) };
        assert_eq!(st, OamStatus::Ok);
        let (mut f, mut p) = (0.0, 0.0);
        let mut stokes = [0.0; 3];
        let mut rho = [0.0; 8];
        unsafe {
            assert_eq!(oamclone_clone_result_fidelity(h, &mut f), OamStatus::Ok);
            assert_eq!(oamclone_clone_result_success_probability(h, &mut p), OamStatus::Ok);
            assert_eq!(oamclone_clone_result_stokes(h, stokes.as_mut_ptr()), OamStatus::Ok);
            assert_eq!(oamclone_clone_result_density(h, rho.as_mut_ptr()), OamStatus::Ok);
            oamclone_clone_result_free(h);
        }
        assert!((f - 5.0 / 6.0).abs() < 1e-12);
        assert!((p - 3.0 / 8.0).abs() < 1e-12);
        assert!((stokes[0] - 2.0 / 3.0).abs() < 1e-12);
        // Trace of the density.
        assert!((rho[0] + rho[6] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn monte_carlo_route_is_seeded() {
    let run = |seed| {
        let mut h: *mut OamCloneResult = ptr::null_mut();
        let mut f = 0.0;
        unsafe {
            assert_eq!(
                oamclone_clone_run(1.0, 0.0, 0.0, 0.0, OamCloneRoute::MonteCarlo, 64, seed, &mut h),
                OamStatus::Ok
            );
            oamclone_clone_result_fidelity(h, &mut f);
            oamclone_clone_result_free(h);
        }
        f
    };
    assert_eq!(run(7), run(7));
    assert!((run(7) - 5.0 / 6.0).abs() < 0.05);
}

#[test]
fn errors_are_reported() {
    let mut h: *mut OamCloneResult = ptr::null_mut();
    let st = unsafe { oamclone_clone_run(0.0, 0.0, 0.0, 0.0, OamCloneRoute::Full, 0, 0, &mut h) };
    assert_eq!(st, OamStatus::InvalidArgument);
    assert!(h.is_null());
    assert!(last_error().contains("zero"));

    let st = unsafe { oamclone_clone_run(1.0, 0.0, 0.0, 0.0, OamCloneRoute::Full, 0, 0, ptr::null_mut()) };
    assert_eq!(st, OamStatus::NullPointer);

    let mut f = 0.0;
    assert_eq!(
        unsafe { oamclone_predicted_fidelity(0.3, 2.0, &mut f) },
        OamStatus::Config
    );
    assert!(last_error().contains("f_prep"));

    let (mut x, mut y) = (0.0, 0.0);
    assert_eq!(unsafe { oamclone_qudit_formula(0, &mut x, &mut y) }, OamStatus::Config);

    let a = CString::new("+2").unwrap();
    let bad = CString::new("q").unwrap();
    let st = unsafe { oamclone_hom_coincidence(a.as_ptr(), bad.as_ptr(), 0.0, 795.0, 6.0, &mut f) };
    assert_eq!(st, OamStatus::Config);

    unsafe {
        oamclone_clone_result_free(ptr::null_mut());
        oamclone_budget_free(ptr::null_mut());
    }
}

#[test]
fn hom_enhancement_through_c_api() {
    let c = |a: &str, b: &str, delay: f64| {
        let a = CString::new(a).unwrap();
        let b = CString::new(b).unwrap();
        let mut out = 0.0;
        let st = unsafe { oamclone_hom_coincidence(a.as_ptr(), b.as_ptr(), delay, 795.0, 6.0, &mut out) };
        assert_eq!(st, OamStatus::Ok, "{}", last_error());
        out
    };
    let r = c("+2", "-2", 0.0) / c("+2", "-2", 5000.0);
    assert!((r - 2.0).abs() < 1e-10);
    let r = c("+2", "+2", 0.0) / c("+2", "+2", 5000.0);
    assert!((r - 1.0).abs() < 1e-10);
}

#[test]
fn qudit_and_formula() {
    let (mut f, mut p) = (0.0, 0.0);
    unsafe { oamclone_qudit_formula(4, &mut f, &mut p) };
    assert!((f - 0.7).abs() < 1e-15 && (p - 0.625).abs() < 1e-15);
    let re = [0.6, 0.0, 0.8];
    let im = [0.0; 3];
    for abstract_labels in [false, true] {
        let st = unsafe { oamclone_qudit_clone(re.as_ptr(), im.as_ptr(), 3, abstract_labels, &mut f, &mut p) };
        assert_eq!(st, OamStatus::Ok);
        assert!((f - 0.75).abs() < 1e-12 && (p - 2.0 / 3.0).abs() < 1e-12);
    }
}

#[test]
fn budget_handle() {
    let mut b: *mut OamLossBudget = ptr::null_mut();
    let (mut lo, mut hi) = (0.0, 0.0);
    unsafe {
        assert_eq!(oamclone_budget_new(&mut b), OamStatus::Ok);
        assert_eq!(oamclone_budget_rate(b, &mut lo, &mut hi), OamStatus::Ok);
        assert!((lo - 0.54).abs() < 1e-12 && (hi - 1.5).abs() < 1e-12);
        assert_eq!(oamclone_budget_set_fiber_coupling(b, 0.3, 0.2), OamStatus::Config);
        assert_eq!(oamclone_budget_set_fiber_coupling(b, 0.2, 0.2), OamStatus::Ok);
        assert_eq!(oamclone_budget_rate(b, &mut lo, &mut hi), OamStatus::Ok);
        assert!((lo - 0.96).abs() < 1e-12);
        assert_eq!(oamclone_budget_set_source_rate(b, -1.0), OamStatus::Config);
        let (mut c1, mut c2, mut d1, mut d2) = (0, 0, 0, 0);
        assert_eq!(
            oamclone_simulate_counts(b, 0.96, 1.97, 600.0, 11, &mut c1, &mut c2),
            OamStatus::Ok
        );
        assert_eq!(
            oamclone_simulate_counts(b, 0.96, 1.97, 600.0, 11, &mut d1, &mut d2),
            OamStatus::Ok
        );
        assert_eq!((c1, c2), (d1, d2));
        assert!(c1 > c2 && c1 + c2 > 400);
        oamclone_budget_free(b);
    }
    let mut f = 0.0;
    unsafe { oamclone_predicted_fidelity(0.96, 1.97, &mut f) };
    assert!((f - 0.80512).abs() < 1e-5);
}

fn header() -> (PathBuf, String) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/oamclone.h");
    let text = std::fs::read_to_string(&path).expect("header generated by build script");
    (path, text)
}

#[test]
fn header_declares_api() {
    let (_, h) = header();
    for name in [
        "oamclone_version",
        "oamclone_last_error",
        "oamclone_clone_run",
        "oamclone_clone_result_free",
        "oamclone_clone_result_fidelity",
        "oamclone_clone_result_success_probability",
        "oamclone_clone_result_stokes",
        "oamclone_clone_result_density",
        "oamclone_hom_coincidence",
        "oamclone_qudit_formula",
        "oamclone_qudit_clone",
        "oamclone_predicted_fidelity",
        "oamclone_budget_new",
        "oamclone_budget_free",
        "oamclone_budget_set_fiber_coupling",
        "oamclone_budget_set_source_rate",
        "oamclone_budget_rate",
        "oamclone_simulate_counts",
    ] {
        assert!(h.contains(&format!("{name}(")), "missing {name}");
    }
    assert!(h.contains("typedef struct OamCloneResult OamCloneResult;"));
    assert!(h.contains("OAM_STATUS_OK = 0"));
    assert!(h.contains("#ifndef OAMCLONE_H"));
}

#[test]
fn header_compiles_as_c99() {
    let (path, _) = header();
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(
        &src,
        "#include \"oamclone.h\"\nint main(void) { OamStatus s = OAM_STATUS_OK; (void)s; return 0; }\n",
    )
    .unwrap();
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(path.parent().unwrap())
        .arg(&src)
        .output()
        .expect("a C compiler named cc is on PATH");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn c_program_links_and_runs() {
    let (path, _) = header();
    // target/<profile>/deps/<test> -> target/<profile>
    let profile_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let lib = profile_dir.join("liboamclone_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let exe = dir.path().join("main");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "oamclone.h"
int main(void) {
    OamCloneResult *h = NULL;
    double f = 0.0, p = 0.0;
    if (oamclone_clone_run(1.0, 0.0, 0.0, 0.0, OAM_CLONE_ROUTE_FULL, 0, 0, &h) != OAM_STATUS_OK) return 1;
    oamclone_clone_result_fidelity(h, &f);
    oamclone_clone_result_success_probability(h, &p);
    oamclone_clone_result_free(h);
    if (oamclone_qudit_formula(0, &f, &p) != OAM_STATUS_CONFIG) return 2;
    printf("%s %.12f\n", oamclone_version(), f);
    oamclone_clone_run(1.0, 0.0, 0.0, 0.0, OAM_CLONE_ROUTE_FULL, 0, 0, &h);
    oamclone_clone_result_fidelity(h, &f);
    oamclone_clone_result_free(h);
    printf("%.12f\n", f);
    return 0;
}
"#,
    )
    .unwrap();
    let out = Command::new("cc")
        .args(["-std=c99", "-I"])
        .arg(path.parent().unwrap())
        .arg(&src)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .output()
        .expect("a C compiler named cc is on PATH");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status);
    let stdout = String::from_utf8(run.stdout).unwrap();
    assert!(stdout.ends_with("0.833333333333\n"), "{stdout}");
}
