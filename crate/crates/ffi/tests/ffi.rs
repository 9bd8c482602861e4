use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use tdlab_ffi::*;

fn parse_spec(text: &str) -> *mut TdlabSpec {
    let c = CString::new(text).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { tdlab_spec_parse(c.as_ptr(), &mut out) }, TdlabStatus::Ok);
    out
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(tdlab_last_error()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn walk_values_through_handles() {
    let mut mrp = ptr::null_mut();
    assert_eq!(unsafe { tdlab_mrp_random_walk(19, 0.99, &mut mrp) }, TdlabStatus::Ok);
    let n = unsafe { tdlab_mrp_n_states(mrp) };
    assert_eq!(n, 21);
    let mut v = vec![f64::NAN; n];
    assert_eq!(
        unsafe { tdlab_mrp_exact_values(mrp, v.as_mut_ptr(), n) },
        TdlabStatus::Ok
    );
    assert_eq!(v[0], 0.0);
    assert!(v[10].abs() < 1e-12);
    assert!((v[1] + v[19]).abs() < 1e-12);

    assert_eq!(
        unsafe { tdlab_mrp_exact_values(mrp, v.as_mut_ptr(), n - 1) },
        TdlabStatus::SizeMismatch
    );

    let spec = parse_spec("lambda:0.9");
    let mut hv = vec![0.0; n];
    assert_eq!(
        unsafe { tdlab_apply_operator(mrp, spec, v.as_ptr(), hv.as_mut_ptr(), n) },
        TdlabStatus::Ok
    );
    assert!(hv.iter().zip(&v).all(|(a, b)| (a - b).abs() < 1e-12));
    unsafe {
        tdlab_spec_free(spec);
        tdlab_mrp_free(mrp);
    }
}

#[test]
fn classification_struct() {
    let spec = parse_spec("pulse:1");
    let mut c = TdlabClassification {
        is_linear: false,
        is_affine: true,
        is_convex: true,
        is_compound: true,
        is_nstep: true,
        weak_recency: true,
        strong_recency: true,
        weight_sum: f64::NAN,
        modulus: f64::NAN,
    };
    assert_eq!(unsafe { tdlab_spec_classify(spec, 0.9, 1e-9, &mut c) }, TdlabStatus::Ok);
    assert!(c.is_linear && !c.is_affine && !c.is_convex && !c.weak_recency);
    assert!((c.modulus - 2.71).abs() < 1e-12);
    assert_eq!(
        unsafe { tdlab_spec_classify(spec, 1.0, 1e-9, &mut c) },
        TdlabStatus::InvalidArgument
    );
    unsafe { tdlab_spec_free(spec) };
}

#[test]
fn counterexample_iteration() {
    let mut mrp = ptr::null_mut();
    assert_eq!(unsafe { tdlab_mrp_two_state(0.4, 0.9, &mut mrp) }, TdlabStatus::Ok);
    let spec = parse_spec("pulse:1");
    let mut res = TdlabIterateResult {
        verdict: TdlabVerdict::Exhausted,
        iterations: 0,
        final_distance: 0.0,
        last_growth_ratio: 0.0,
    };
    for (v0, verdict, ratio) in [
        ([1.0, -1.0], TdlabVerdict::Diverged, 1.2124),
        ([1.0, 1.0], TdlabVerdict::Converged, 0.91),
    ] {
        assert_eq!(
            unsafe { tdlab_iterate(mrp, spec, v0.as_ptr(), 2, 1.0, 10_000, &mut res) },
            TdlabStatus::Ok
        );
        assert_eq!(res.verdict, verdict);
        assert!((res.last_growth_ratio - ratio).abs() < 1e-6);
    }
    unsafe {
        tdlab_spec_free(spec);
        tdlab_mrp_free(mrp);
    }
}

#[test]
fn errors_set_message_and_null_outputs() {
    let bad = CString::new("sparse:0.5:0").unwrap();
    let mut spec = std::ptr::NonNull::<TdlabSpec>::dangling().as_ptr();
    assert_eq!(
        unsafe { tdlab_spec_parse(bad.as_ptr(), &mut spec) },
        TdlabStatus::InvalidArgument
    );
    assert!(spec.is_null());
    assert!(!last_error().is_empty());

    let junk = CString::new("2 0.9\nnot numbers").unwrap();
    let mut mrp = ptr::null_mut();
    assert_eq!(
        unsafe { tdlab_mrp_from_text(junk.as_ptr(), &mut mrp) },
        TdlabStatus::Parse
    );
    assert!(mrp.is_null());

    assert_eq!(
        unsafe { tdlab_mrp_random_walk(5, 0.9, ptr::null_mut()) },
        TdlabStatus::NullPointer
    );
    assert_eq!(
        unsafe { tdlab_spec_parse(ptr::null(), &mut spec) },
        TdlabStatus::NullPointer
    );
    assert_eq!(last_error(), "text is null");
    assert_eq!(unsafe { tdlab_mrp_n_states(ptr::null()) }, 0);
    unsafe {
        tdlab_mrp_free(ptr::null_mut());
        tdlab_spec_free(ptr::null_mut());
    }
}

#[test]
fn mrp_text_roundtrip() {
    let text = CString::new("2 0.5\n0.5 0.5\n0 1\n1 0\n0 1\n").unwrap();
    let mut mrp = ptr::null_mut();
    assert_eq!(unsafe { tdlab_mrp_from_text(text.as_ptr(), &mut mrp) }, TdlabStatus::Ok);
    let mut v = [0.0; 2];
    assert_eq!(
        unsafe { tdlab_mrp_exact_values(mrp, v.as_mut_ptr(), 2) },
        TdlabStatus::Ok
    );
    // v0 = 1 + 0.5 (0.5 v0), state 1 is terminal.
    assert!((v[0] - 4.0 / 3.0).abs() < 1e-12);
    assert_eq!(v[1], 0.0);
    unsafe { tdlab_mrp_free(mrp) };
}

#[test]
fn variance_bound_and_version() {
    assert!((tdlab_variance_bound(0.9, 0.9, 2.5) - 2.5).abs() < 1e-12);
    let v = unsafe { CStr::from_ptr(tdlab_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn shared_library_dir() -> Option<PathBuf> {
    let deps = std::env::current_exe().ok()?.parent()?.to_path_buf();
    let dir = deps.parent()?.to_path_buf();
    dir.join("libtdlab_ffi.so").exists().then_some(dir)
}

#[test]
fn c_program_links_against_header() {
    let Some(lib_dir) = shared_library_dir() else {
        eprintln!("skipping: shared library not found next to the test binary");
        return;
    };
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler");
        return;
    }
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let tmp = tempfile::tempdir().unwrap();
    let exe = tmp.path().join("smoke");
    let status = Command::new("cc")
        .arg(root.join("tests/smoke.c"))
        .arg("-I")
        .arg(root.join("include"))
        .arg("-L")
        .arg(&lib_dir)
        .arg(format!("-Wl,-rpath,{}", lib_dir.display()))
        .args(["-ltdlab_ffi", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
