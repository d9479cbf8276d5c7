use std::ffi::{CStr, CString};
use std::ptr;

use vlasov_siac_ffi::*;

fn last_error() -> String {
    let p = vs_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn landau(n: usize) -> *mut VsSimulation {
    let mut sim = ptr::null_mut();
    let st = unsafe { vs_simulation_new(VsCase::Landau, n, n, 1, &mut sim) };
    assert_eq!(st, VsStatus::Ok);
    assert!(!sim.is_null());
    sim
}

#[test]
fn lifecycle_and_quantities() {
    let sim = landau(16);
    let mut q = VsQuantities::default();
    assert_eq!(unsafe { vs_simulation_quantities(sim, &mut q) }, VsStatus::Ok);
    assert_eq!(q.t, 0.0);
    assert!((q.mass - 4.0 * std::f64::consts::PI).abs() < 1e-9);
    let mut steps = 0usize;
    assert_eq!(unsafe { vs_simulation_advance(sim, 0.05, &mut steps) }, VsStatus::Ok);
    assert!(steps > 0);
    let mut q2 = VsQuantities::default();
    unsafe { vs_simulation_quantities(sim, &mut q2) };
    assert_eq!(q2.t, 0.05);
    assert!(((q2.mass - q.mass) / q.mass).abs() < 1e-12);
    assert!(q2.l2_f <= q.l2_f * (1.0 + 1e-8));
    unsafe { vs_simulation_free(sim) };
    unsafe { vs_simulation_free(ptr::null_mut()) };
}

#[test]
fn shape_eval_and_coefficients() {
    let sim = landau(16);
    let (mut d, mut nf) = (0usize, 0usize);
    assert_eq!(unsafe { vs_simulation_shape(sim, &mut d, &mut nf) }, VsStatus::Ok);
    assert_eq!((d, nf), (2, 1));
    let p = [1.0, 0.3];
    let (mut raw, mut filt) = (0.0, 0.0);
    assert_eq!(unsafe { vs_simulation_eval_f(sim, p.as_ptr(), 2, 0, &mut raw) }, VsStatus::Ok);
    assert_eq!(unsafe { vs_simulation_eval_f(sim, p.as_ptr(), 2, 1, &mut filt) }, VsStatus::Ok);
    assert!(raw > 0.0 && filt > 0.0);
    let mut e = 0.0;
    assert_eq!(unsafe { vs_simulation_eval_field(sim, 0, 1.0, 0, &mut e) }, VsStatus::Ok);
    assert!((e - (1.0f64 * 0.5).sin()).abs() < 0.05);
    assert_eq!(unsafe { vs_simulation_eval_field(sim, 1, 1.0, 0, &mut e) }, VsStatus::Usage);
    assert!(last_error().contains("component"));

    let mut need = 0usize;
    assert_eq!(unsafe { vs_simulation_f_coefficients(sim, ptr::null_mut(), 0, &mut need) }, VsStatus::Ok);
    assert_eq!(need, 16 * 16 * 3);
    let mut small = vec![0.0; 5];
    assert_eq!(
        unsafe { vs_simulation_f_coefficients(sim, small.as_mut_ptr(), small.len(), ptr::null_mut()) },
        VsStatus::BufferTooSmall
    );
    let mut buf = vec![0.0; need];
    assert_eq!(unsafe { vs_simulation_f_coefficients(sim, buf.as_mut_ptr(), need, ptr::null_mut()) }, VsStatus::Ok);
    assert!(buf.iter().any(|c| *c != 0.0));
    unsafe { vs_simulation_free(sim) };
}

#[test]
fn reflect_twice_is_identity() {
    let sim = landau(16);
    let mut a = vec![0.0; 16 * 16 * 3];
    unsafe { vs_simulation_f_coefficients(sim, a.as_mut_ptr(), a.len(), ptr::null_mut()) };
    assert_eq!(unsafe { vs_simulation_reflect(sim) }, VsStatus::Ok);
    assert_eq!(unsafe { vs_simulation_reflect(sim) }, VsStatus::Ok);
    let mut b = vec![0.0; a.len()];
    unsafe { vs_simulation_f_coefficients(sim, b.as_mut_ptr(), b.len(), ptr::null_mut()) };
    assert_eq!(a, b);
    unsafe { vs_simulation_free(sim) };
}

#[test]
fn errors_map_to_status_codes() {
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { vs_simulation_new(VsCase::Landau, 16, 16, 9, &mut sim) }, VsStatus::InvalidArgument);
    assert!(sim.is_null());
    assert!(last_error().contains("degree"));
    assert_eq!(unsafe { vs_simulation_new(VsCase::Landau, 16, 16, 1, ptr::null_mut()) }, VsStatus::NullPointer);

    let bad = CString::new("nx = twelve").unwrap();
    assert_eq!(unsafe { vs_simulation_from_config(bad.as_ptr(), &mut sim) }, VsStatus::Parse);
    assert_eq!(unsafe { vs_simulation_from_config(ptr::null(), &mut sim) }, VsStatus::NullPointer);

    let s = landau(16);
    let p = [1.0, 100.0];
    let mut v = 0.0;
    assert_eq!(unsafe { vs_simulation_eval_f(s, p.as_ptr(), 2, 0, &mut v) }, VsStatus::OutOfDomain);
    assert_eq!(unsafe { vs_simulation_eval_f(s, p.as_ptr(), 3, 0, &mut v) }, VsStatus::Usage);
    assert_eq!(unsafe { vs_simulation_advance(s, -1.0, ptr::null_mut()) }, VsStatus::Usage);
    unsafe { vs_simulation_free(s) };

    // Success clears the message.
    let mut c = [0.0; 3];
    assert_eq!(unsafe { vs_kernel_coefficients(1, c.as_mut_ptr(), 3) }, VsStatus::Ok);
    assert!(vs_last_error().is_null());
}

#[test]
fn kernel_coefficients_through_abi() {
    let mut c = [0.0; 3];
    assert_eq!(unsafe { vs_kernel_coefficients(1, c.as_mut_ptr(), 3) }, VsStatus::Ok);
    let want = [-1.0 / 12.0, 7.0 / 6.0, -1.0 / 12.0];
    for (a, b) in c.iter().zip(want) {
        assert!((a - b).abs() < 1e-12);
    }
    assert_eq!(unsafe { vs_kernel_coefficients(2, c.as_mut_ptr(), 3) }, VsStatus::BufferTooSmall);
}

#[test]
fn reversibility_report() {
    let cfg = CString::new("case = landau\nnx = 16\nnv = 16\nt_final = 0.05\n").unwrap();
    let mut r = VsErrorReport::default();
    assert_eq!(unsafe { vs_reversibility(cfg.as_ptr(), &mut r) }, VsStatus::Ok);
    assert_eq!(r.n_fields, 1);
    assert!(r.steps > 0);
    assert_eq!(r.has_filtered, 1);
    assert!(r.f_l2 > 0.0 && r.f_l2_filtered > 0.0 && r.field_l2[0] > 0.0);
}

#[test]
fn save_snapshot() {
    let dir = std::env::temp_dir().join(format!("vs-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("s.txt");
    let sim = landau(16);
    let c = CString::new(path.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { vs_simulation_save(sim, c.as_ptr()) }, VsStatus::Ok);
    let back = vlasov_siac::snapshot::read_snapshot(&path).unwrap();
    assert_eq!(back.case, "landau");
    unsafe { vs_simulation_free(sim) };
    let missing = CString::new("/nonexistent/dir/s.txt").unwrap();
    let sim = landau(16);
    assert_eq!(unsafe { vs_simulation_save(sim, missing.as_ptr()) }, VsStatus::Io);
    unsafe { vs_simulation_free(sim) };
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/vlasov_siac.h")).unwrap();
    for name in [
        "vs_last_error",
        "vs_version",
        "vs_simulation_new",
        "vs_simulation_from_config",
        "vs_simulation_free",
        "vs_simulation_advance",
        "vs_simulation_reflect",
        "vs_simulation_quantities",
        "vs_simulation_shape",
        "vs_simulation_eval_f",
        "vs_simulation_eval_field",
        "vs_simulation_f_coefficients",
        "vs_simulation_save",
        "vs_reversibility",
        "vs_kernel_coefficients",
        "typedef struct VsSimulation VsSimulation;",
        "VS_STATUS_DIVERGENCE = 6",
    ] {
        assert!(h.contains(name), "header lacks {name}");
    }
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(vs_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
