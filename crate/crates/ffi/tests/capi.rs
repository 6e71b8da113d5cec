use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use specguard_ffi::*;

fn last_error() -> String {
    let p = sg_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn power_method_and_exact_radius() {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let m = [1.0, 1.0, 1.0, 0.0];
    let mut rho = 0.0;
    assert_eq!(unsafe { sg_power_method(m.as_ptr(), 2, 60, 1, &mut rho) }, SgStatus::Ok);
    assert!((rho - phi).abs() < 1e-12);
    assert!(sg_last_error_message().is_null());
    assert_eq!(unsafe { sg_spectral_radius(m.as_ptr(), 2, &mut rho) }, SgStatus::Ok);
    assert!((rho - phi).abs() < 1e-12);

    assert_eq!(
        unsafe { sg_power_method(m.as_ptr(), 2, 0, 1, &mut rho) },
        SgStatus::InvalidArgument
    );
    assert!(last_error().contains("k >= 1"));
    assert_eq!(
        unsafe { sg_power_method(ptr::null(), 2, 3, 1, &mut rho) },
        SgStatus::NullPointer
    );
}

#[test]
fn horizon_and_certificates() {
    let (mut tokens, mut vacuous) = (0.0, true);
    let s = unsafe { sg_horizon_bound(0.99, 1.0, 1.0, 1e-5, 1.0, &mut tokens, &mut vacuous) };
    assert_eq!(s, SgStatus::Ok);
    let want = (1e5f64).ln() / (1.0f64 / 0.99).ln();
    assert!((tokens - want).abs() < 1e-9);
    assert!(!vacuous);
    let s = unsafe { sg_horizon_bound(1.0, 1.0, 1.0, 1e-5, 1.0, &mut tokens, &mut vacuous) };
    assert_eq!(s, SgStatus::BoundUndefined);
    assert!(last_error().contains("bound undefined"));

    assert!((sg_lipschitz_certificate(1.0, 10.0) - 10f64.exp()).abs() < 1e-9);

    let mut m = SgMetrics {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
        fpr: 0.0,
        precision_undefined: true,
    };
    assert_eq!(unsafe { sg_metrics_from_counts(235, 15, 5, 245, &mut m) }, SgStatus::Ok);
    assert!((m.f1 - 490.0 / 510.0).abs() < 1e-12);
    assert!((m.fpr - 0.06).abs() < 1e-12);
    assert!(!m.precision_undefined);
}

#[test]
fn model_handle_round_trip() {
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { sg_model_new(42, &mut model) }, SgStatus::Ok);
    let (mut layers, mut d_state, mut vocab) = (0, 0, 0);
    assert_eq!(
        unsafe { sg_model_dims(model, &mut layers, &mut d_state, &mut vocab) },
        SgStatus::Ok
    );
    assert_eq!((layers, d_state, vocab), (4, 16, 256));

    let tokens = [3u32, 17, 200, 9];
    let mut rho = vec![0.0; tokens.len() * layers];
    let s = unsafe { sg_model_run(model, tokens.as_ptr(), tokens.len(), 3, rho.as_mut_ptr(), rho.len()) };
    assert_eq!(s, SgStatus::Ok);
    assert!(rho.iter().all(|&r| r > 0.9 && r < 1.0), "{rho:?}");

    let s = unsafe { sg_model_run(model, tokens.as_ptr(), tokens.len(), 3, rho.as_mut_ptr(), 3) };
    assert_eq!(s, SgStatus::BufferTooSmall);
    let bad = [999u32];
    let s = unsafe { sg_model_run(model, bad.as_ptr(), 1, 3, rho.as_mut_ptr(), rho.len()) };
    assert_eq!(s, SgStatus::InvalidArgument);
    assert!(last_error().contains("out of range"));

    let json = CString::new(
        specguard::ssm::SelectiveSsm::init(Default::default())
            .unwrap()
            .to_json()
            .unwrap(),
    )
    .unwrap();
    let mut loaded = ptr::null_mut();
    assert_eq!(unsafe { sg_model_from_json(json.as_ptr(), &mut loaded) }, SgStatus::Ok);
    let mut rho2 = vec![0.0; rho.len()];
    let s = unsafe { sg_model_run(loaded, tokens.as_ptr(), tokens.len(), 3, rho2.as_mut_ptr(), rho2.len()) };
    assert_eq!(s, SgStatus::Ok);
    let s = unsafe { sg_model_run(model, tokens.as_ptr(), tokens.len(), 3, rho.as_mut_ptr(), rho.len()) };
    assert_eq!(s, SgStatus::Ok);
    assert_eq!(rho, rho2);

    let garbage = CString::new("{\"nope\": 1}").unwrap();
    let mut none = ptr::null_mut();
    assert_eq!(
        unsafe { sg_model_from_json(garbage.as_ptr(), &mut none) },
        SgStatus::Parse
    );
    assert!(none.is_null());

    unsafe {
        sg_model_free(model);
        sg_model_free(loaded);
        sg_model_free(ptr::null_mut());
    }
}

#[test]
fn monitor_handle_blocks_on_window_minimum() {
    let mut mon = ptr::null_mut();
    assert_eq!(unsafe { sg_monitor_new(0.3, 3, &mut mon) }, SgStatus::Ok);
    let mut blocks = Vec::new();
    for rho in [0.9, 0.8, 0.1, 0.9, 0.9, 0.9] {
        let (mut b, mut wmin) = (false, 0.0);
        assert_eq!(unsafe { sg_monitor_push(mon, rho, &mut b, &mut wmin) }, SgStatus::Ok);
        blocks.push(b);
    }
    assert_eq!(blocks, [false, false, true, true, true, false]);
    let mut b = false;
    assert_eq!(
        unsafe { sg_monitor_push(mon, f64::NAN, &mut b, ptr::null_mut()) },
        SgStatus::InvalidArgument
    );
    unsafe { sg_monitor_free(mon) };

    let mut bad = ptr::null_mut();
    assert_eq!(unsafe { sg_monitor_new(0.3, 0, &mut bad) }, SgStatus::InvalidArgument);
    assert!(bad.is_null());
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(sg_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_is_valid_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/specguard.h");
    let src = format!("#include \"{header}\"\nint main(void) {{ SgMetrics m; (void)m; return SG_STATUS_OK; }}\n");
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("check.c");
    std::fs::write(&file, src).unwrap();
    let Ok(out) = Command::new("cc")
        .args(["-std=c11", "-Wall", "-Werror", "-fsyntax-only"])
        .arg(&file)
        .output()
    else {
        eprintln!("no C compiler available; skipping header check");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
