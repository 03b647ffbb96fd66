use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use gnep_ffi::*;

fn fixture(name: &str) -> *mut GnepHandle {
    let mut h = ptr::null_mut();
    let name = CString::new(name).unwrap();
    assert_eq!(
        unsafe { gnep_problem_from_fixture(name.as_ptr(), &mut h) },
        GnepStatus::Ok
    );
    assert!(!h.is_null());
    h
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(gnep_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn solve_and_verify_shared_resource() {
    let h = fixture("shared_resource");
    let (mut n, mut players) = (0usize, 0usize);
    unsafe {
        assert_eq!(gnep_problem_dim(h, &mut n), GnepStatus::Ok);
        assert_eq!(gnep_problem_num_players(h, &mut players), GnepStatus::Ok);
    }
    assert_eq!((n, players), (2, 2));
    let mut x = [0.0; 2];
    let mut r = f64::NAN;
    assert_eq!(unsafe { gnep_solve(h, 0, x.as_mut_ptr(), 2, &mut r) }, GnepStatus::Ok);
    assert!(r >= -1e-6 && (x[0] + x[1] - 1.0).abs() < 1e-6);

    let mut regret = f64::NAN;
    assert_eq!(
        unsafe { gnep_verify(h, x.as_ptr(), 2, 1e-6, &mut regret) },
        GnepStatus::Ok
    );
    let bad = [0.3, 0.3];
    assert_eq!(
        unsafe { gnep_verify(h, bad.as_ptr(), 2, 1e-6, &mut regret) },
        GnepStatus::NotEquilibrium
    );
    assert!((regret - 0.4).abs() < 1e-9);
    let outside = [0.9, 0.9];
    assert_eq!(
        unsafe { gnep_verify(h, outside.as_ptr(), 2, 1e-6, &mut regret) },
        GnepStatus::Usage
    );
    assert!(last_error().contains("shared set"));

    let (xm, w) = ([0.5, 0.5], [-1.0, -1.0]);
    let mut v = f64::NAN;
    assert_eq!(
        unsafe { gnep_vi_residual(h, xm.as_ptr(), w.as_ptr(), 2, &mut v) },
        GnepStatus::Ok
    );
    assert!(v.abs() < 1e-12);
    let zero = [0.0, 0.0];
    assert_eq!(
        unsafe { gnep_vi_residual(h, xm.as_ptr(), zero.as_ptr(), 2, &mut v) },
        GnepStatus::CertificateInvalid
    );
    unsafe { gnep_problem_free(h) };
}

#[test]
fn json_round_trip_and_report() {
    let json = CString::new(
        r#"{"schema":1,"name":"q","players":[{"dim":1,"loss":{"expr":{"source":"(x1 - 0.25)^2"}},
        "flags":{"claims_quasiconvex_own":true,"claims_continuous_rivals":true,"claims_pseudocontinuous_own":true}}],
        "constraint":{"box":{"lower":[0],"upper":[1]}}}"#,
    )
    .unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { gnep_problem_from_json(json.as_ptr(), &mut h) }, GnepStatus::Ok);
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { gnep_solve_json(h, 3, &mut out) }, GnepStatus::Ok);
    let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_owned();
    assert!(text.contains("\"status\": \"certified\""), "{text}");
    unsafe {
        gnep_string_free(out);
        gnep_problem_free(h);
    }
}

#[test]
fn errors_are_reported() {
    let mut h = ptr::null_mut();
    let bad = CString::new(r#"{"schema":1,"name":"x","players":[{"loss":{"expr":{"source":"x1"}}}]}"#).unwrap();
    assert_eq!(
        unsafe { gnep_problem_from_json(bad.as_ptr(), &mut h) },
        GnepStatus::Schema
    );
    assert!(h.is_null());
    assert!(
        last_error().contains("dim") || last_error().contains("constraint"),
        "{}",
        last_error()
    );
    assert_eq!(
        unsafe { gnep_problem_from_json(ptr::null(), &mut h) },
        GnepStatus::NullPointer
    );
    let unknown = CString::new("nope").unwrap();
    assert_eq!(
        unsafe { gnep_problem_from_fixture(unknown.as_ptr(), &mut h) },
        GnepStatus::Usage
    );
    let mut n = 0usize;
    assert_eq!(
        unsafe { gnep_problem_dim(ptr::null(), &mut n) },
        GnepStatus::NullPointer
    );
    unsafe { gnep_problem_free(ptr::null_mut()) };

    let h = fixture("quadratic_nep");
    let mut x = [0.0; 1];
    assert_eq!(
        unsafe { gnep_solve(h, 0, x.as_mut_ptr(), 1, ptr::null_mut()) },
        GnepStatus::BufferTooSmall
    );
    unsafe { gnep_problem_free(h) };
}

#[test]
fn header_is_generated_and_compiles() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/gnep.h");
    let text = std::fs::read_to_string(&header).expect("header written by build script");
    for sym in [
        "gnep_problem_from_json",
        "gnep_problem_from_fixture",
        "gnep_problem_free",
        "gnep_solve",
        "gnep_solve_json",
        "gnep_verify",
        "gnep_vi_residual",
        "gnep_last_error_message",
        "gnep_string_free",
        "typedef struct GnepHandle GnepHandle",
        "GNEP_STATUS_NOT_EQUILIBRIUM = 8",
    ] {
        assert!(text.contains(sym), "missing {sym}");
    }
    let tmp = std::env::temp_dir().join(format!("gnep_header_check_{}.c", std::process::id()));
    std::fs::write(
        &tmp,
        "#include \"gnep.h\"\nint main(void) { return (int)GNEP_STATUS_OK; }\n",
    )
    .unwrap();
    match Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-I")
        .arg(dir.join("include"))
        .arg(&tmp)
        .status()
    {
        Ok(s) => assert!(s.success(), "header does not compile"),
        Err(_) => eprintln!("no C compiler; skipped syntax check"),
    }
    let _ = std::fs::remove_file(tmp);
}
