use std::ffi::{c_char, CStr, CString};
use std::ptr;

use ssep_hydro_ffi::*;

const MIXED: &str = r#"{"N": 8, "p": 2, "beta": 0.4, "left": {"kind": "structured",
    "r": [1.0, 0.3], "alpha": [0.9, 0.2], "c": [[0, 0.6], [0, 0]]}}"#;
const WORKED: &str = r#"{"N": 8, "p": 2, "beta": 0.4, "left": {"kind": "structured",
    "r": [1.0, 1.0], "alpha": [1.0, 0.0]}}"#;
const DEGENERATE: &str = r#"{"N": 8, "p": 2, "beta": 0.4, "left": {"kind": "structured",
    "r": [0.0, 0.0], "alpha": [0.5, 0.5], "c": [[0, 5.0], [0, 0]]}}"#;
const TABLE: &str = r#"{"N": 8, "p": 1, "beta": 0.4, "left": {"kind": "table",
    "table": {"0": 1.0, "1": 2.0}}}"#;
const LINEAR: &str = r#"{"kind": "linear", "left": 0.3, "right": 0.6}"#;

fn model(json: &str) -> *mut SsepModel {
    let c = CString::new(json).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { ssep_model_from_json(c.as_ptr(), &mut m) },
        SsepStatus::Ok
    );
    m
}

fn profile(json: &str) -> *mut SsepProfile {
    let c = CString::new(json).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { ssep_profile_from_json(c.as_ptr(), &mut p) },
        SsepStatus::Ok
    );
    p
}

fn last_error() -> String {
    let p = ssep_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn handles_and_simple_queries() {
    let m = model(WORKED);
    let mut sites = 0usize;
    assert_eq!(unsafe { ssep_model_sites(m, &mut sites) }, SsepStatus::Ok);
    assert_eq!(sites, 7);
    let mut alpha = 0.0;
    assert_eq!(unsafe { ssep_left_density(m, &mut alpha) }, SsepStatus::Ok);
    assert!((alpha - 1.0 / 3.0).abs() < 1e-12);
    unsafe { ssep_model_free(m) };
    unsafe { ssep_model_free(ptr::null_mut()) };
    unsafe { ssep_profile_free(ptr::null_mut()) };
    let v = unsafe { CStr::from_ptr(ssep_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn error_codes() {
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { ssep_model_from_json(ptr::null(), &mut m) },
        SsepStatus::NullPointer
    );
    let bad = CString::new("{").unwrap();
    assert_eq!(
        unsafe { ssep_model_from_json(bad.as_ptr(), &mut m) },
        SsepStatus::ParseError
    );
    assert!(!last_error().is_empty());
    let invalid = CString::new(r#"{"N": 3, "p": 2, "beta": 0.4, "left": {"kind": "structured", "r": [1, 1], "alpha": [0.5, 0.5]}}"#).unwrap();
    assert_eq!(
        unsafe { ssep_model_from_json(invalid.as_ptr(), &mut m) },
        SsepStatus::InvalidArgument
    );
    let bytes = [0xffu8, 0xfe, 0];
    assert_eq!(
        unsafe { ssep_model_from_json(bytes.as_ptr() as *const c_char, &mut m) },
        SsepStatus::InvalidUtf8
    );
    let ok = CString::new(MIXED).unwrap();
    assert_eq!(
        unsafe { ssep_model_from_json(ok.as_ptr(), ptr::null_mut()) },
        SsepStatus::NullPointer
    );

    let degenerate = model(DEGENERATE);
    let mut alpha = 0.0;
    assert_eq!(
        unsafe { ssep_left_density(degenerate, &mut alpha) },
        SsepStatus::NonUniqueStationary
    );
    assert!(last_error().contains("not unique"));
    unsafe { ssep_model_free(degenerate) };

    let table = model(TABLE);
    let p = profile(LINEAR);
    let times = [0.1];
    let mut out = [0.0; 7];
    assert_eq!(
        unsafe { ssep_solve_density(table, p, times.as_ptr(), 1, out.as_mut_ptr(), 7) },
        SsepStatus::Unsupported
    );
    unsafe { ssep_model_free(table) };

    let big = model(&MIXED.replace("\"N\": 8", "\"N\": 400"));
    let mut phi = vec![0.0; 399 * 398 / 2];
    assert_eq!(
        unsafe { ssep_solve_correlation(big, p, times.as_ptr(), 1, phi.as_mut_ptr(), phi.len()) },
        SsepStatus::SizeLimit
    );
    unsafe { ssep_model_free(big) };
    unsafe { ssep_profile_free(p) };

    let bad_profile = CString::new(r#"{"kind": "constant", "value": 2.0}"#).unwrap();
    let mut q = ptr::null_mut();
    assert_eq!(
        unsafe { ssep_profile_from_json(bad_profile.as_ptr(), &mut q) },
        SsepStatus::InvalidArgument
    );
}

#[test]
fn boundary_report_buffer_protocol() {
    let m = model(WORKED);
    let mut needed = 0usize;
    assert_eq!(
        unsafe { ssep_boundary_report_json(m, ptr::null_mut(), 0, &mut needed) },
        SsepStatus::BufferTooSmall
    );
    assert!(needed > 1);
    let mut buf = vec![0 as c_char; needed];
    assert_eq!(
        unsafe { ssep_boundary_report_json(m, buf.as_mut_ptr(), needed, &mut needed) },
        SsepStatus::Ok
    );
    let text = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
    let v: serde_json::Value = serde_json::from_str(text).unwrap();
    assert!((v["alpha"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert!((v["mu"]["10"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(v["unique"], true);
    unsafe { ssep_model_free(m) };
}

#[test]
fn solvers_and_simulation_agree_with_the_library() {
    let spec = ssep_hydro::ModelSpec::from_json(MIXED).unwrap();
    let prof: ssep_hydro::InitialProfile = serde_json::from_str(LINEAR).unwrap();
    let m = model(MIXED);
    let p = profile(LINEAR);
    let times = [0.01, 0.1];

    let mut rho = [0.0; 14];
    assert_eq!(
        unsafe { ssep_solve_density(m, p, times.as_ptr(), 2, rho.as_mut_ptr(), 13) },
        SsepStatus::BufferTooSmall
    );
    assert_eq!(
        unsafe { ssep_solve_density(m, p, times.as_ptr(), 2, rho.as_mut_ptr(), 14) },
        SsepStatus::Ok
    );
    let want = ssep_hydro::field::solve_density(&spec, &prof, &times).unwrap();
    assert_eq!(&rho[..], &want.rho.concat()[..]);

    let mut phi = [0.0; 42];
    assert_eq!(
        unsafe { ssep_solve_correlation(m, p, times.as_ptr(), 2, phi.as_mut_ptr(), 42) },
        SsepStatus::Ok
    );
    let want = ssep_hydro::field::solve_correlation(&spec, &prof, &times).unwrap();
    assert_eq!(
        phi[21 + ssep_hydro::field::pair_index(2, 5)],
        want.phi(1, 2, 5)
    );

    let mut occ = [9u8; 14];
    assert_eq!(
        unsafe { ssep_simulate(m, p, times.as_ptr(), 2, 7, occ.as_mut_ptr(), 14) },
        SsepStatus::Ok
    );
    let traj = ssep_hydro::kmc::simulate(&spec, &prof, &times, 7).unwrap();
    assert_eq!(&occ[7..], traj.checkpoints[1].1.as_slice());
    assert!(occ.iter().all(|&x| x <= 1));

    let (mut mean, mut se) = ([0.0; 14], [0.0; 14]);
    assert_eq!(
        unsafe {
            ssep_ensemble_density(
                m,
                p,
                times.as_ptr(),
                2,
                200,
                3,
                mean.as_mut_ptr(),
                se.as_mut_ptr(),
                14,
            )
        },
        SsepStatus::Ok
    );
    let stats = ssep_hydro::kmc::ensemble_density(&spec, &prof, &times, 200, 3).unwrap();
    assert_eq!(mean[7 + 3], stats.rho(1, 4).value);
    assert_eq!(se[7 + 3], stats.rho(1, 4).stderr);
    assert_eq!(
        unsafe {
            ssep_ensemble_density(
                m,
                p,
                times.as_ptr(),
                2,
                1,
                3,
                mean.as_mut_ptr(),
                se.as_mut_ptr(),
                14,
            )
        },
        SsepStatus::InvalidArgument
    );

    unsafe {
        ssep_model_free(m);
        ssep_profile_free(p);
    }
}

#[test]
fn errors_are_per_thread() {
    let bad = CString::new("{").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { ssep_model_from_json(bad.as_ptr(), &mut m) },
        SsepStatus::ParseError
    );
    std::thread::spawn(|| assert!(ssep_last_error().is_null()))
        .join()
        .unwrap();
    assert!(!ssep_last_error().is_null());
}
