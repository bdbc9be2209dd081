use binarykin_ffi::*;
use std::ptr;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let n = unsafe { bk_last_error(buf.as_mut_ptr(), buf.len()) };
    let s = unsafe { std::ffi::CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned();
    assert!(n >= s.len());
    s
}

#[test]
fn post_collision_conserves_momentum() {
    let (v, vs, w) = ([1.0, -0.5, 0.25], [-0.3, 0.8, 2.0], [0.0, 0.6, 0.8]);
    let (mut vo, mut vso) = ([0.0; 3], [0.0; 3]);
    let st = unsafe { bk_post_collision(7.0, 8.0, v.as_ptr(), vs.as_ptr(), w.as_ptr(), vo.as_mut_ptr(), vso.as_mut_ptr()) };
    assert_eq!(st, BkStatus::Ok);
    for k in 0..3 {
        assert!((7.0 * vo[k] + 8.0 * vso[k] - 7.0 * v[k] - 8.0 * vs[k]).abs() < 1e-12);
    }
}

#[test]
fn null_and_range_errors_are_reported() {
    let x = [0.0; 3];
    let mut o = [0.0; 3];
    let st = unsafe { bk_post_collision(1.0, 1.0, ptr::null(), x.as_ptr(), x.as_ptr(), o.as_mut_ptr(), o.as_mut_ptr()) };
    assert_eq!(st, BkStatus::NullPointer);
    assert!(last_error().contains("v is null"));

    let mut op: *mut BkOperator = ptr::null_mut();
    let st = unsafe { bk_operator_new(1.0, 1.0, -3.5, 5, 0.0, 14, &mut op) };
    assert_eq!(st, BkStatus::InvalidArgument);
    assert!(op.is_null());
    assert!(last_error().contains("gamma"));

    let st = unsafe { bk_operator_new(1.0, 1.0, -1.0, 4, 0.0, 14, &mut op) };
    assert_eq!(st, BkStatus::InvalidArgument);
    unsafe { bk_operator_free(ptr::null_mut()) };
    assert_eq!(unsafe { bk_operator_len(ptr::null()) }, 0);
}

#[test]
fn operator_round_trip() {
    let mut op: *mut BkOperator = ptr::null_mut();
    assert_eq!(unsafe { bk_operator_new(7.0, 8.0, -1.0, 7, 0.0, 14, &mut op) }, BkStatus::Ok);
    let n = unsafe { bk_operator_len(op) };
    assert_eq!(n, 343);
    let mut nodes = vec![0.0; 3 * n];
    assert_eq!(unsafe { bk_operator_nodes(op, nodes.as_mut_ptr(), nodes.len()) }, BkStatus::Ok);

    let mu = |m: f64, k: usize| {
        let v2 = nodes[3 * k].powi(2) + nodes[3 * k + 1].powi(2) + nodes[3 * k + 2].powi(2);
        (m / (2.0 * std::f64::consts::PI)).powf(1.5) * (-0.5 * m * v2).exp()
    };
    let fa: Vec<f64> = (0..n).map(|k| mu(7.0, k)).collect();
    let fb: Vec<f64> = (0..n).map(|k| mu(8.0, k)).collect();
    let mut q = vec![0.0; n];
    assert_eq!(unsafe { bk_eval_q(op, fa.as_ptr(), fb.as_ptr(), 0, 1, q.as_mut_ptr(), n) }, BkStatus::Ok);
    assert!(q.iter().all(|x| x.abs() < 1e-5));
    assert_eq!(unsafe { bk_eval_q(op, fa.as_ptr(), fb.as_ptr(), 0, 2, q.as_mut_ptr(), n) }, BkStatus::InvalidArgument);
    assert_eq!(unsafe { bk_eval_q(op, fa.as_ptr(), fb.as_ptr(), 0, 1, q.as_mut_ptr(), n - 1) }, BkStatus::InvalidArgument);

    let mut d = 1.0;
    assert_eq!(unsafe { bk_entropy_production(op, fa.as_ptr(), fb.as_ptr(), n, &mut d) }, BkStatus::Ok);
    assert!(d.abs() < 1e-4);
    let mut neg = fa.clone();
    neg[0] = -1.0;
    assert_eq!(unsafe { bk_entropy_production(op, neg.as_ptr(), fb.as_ptr(), n, &mut d) }, BkStatus::Domain);

    let mut lin: *mut BkLinearized = ptr::null_mut();
    assert_eq!(unsafe { bk_linearized_new(op, &mut lin) }, BkStatus::Ok);
    let f: Vec<f64> = (0..2 * n).map(|k| ((k * 37 % 11) as f64 - 5.0) * 1e-2).collect();
    let mut y = vec![0.0; 2 * n];
    assert_eq!(unsafe { bk_linearized_apply(lin, f.as_ptr(), y.as_mut_ptr(), 2 * n) }, BkStatus::Ok);
    assert!(y.iter().all(|x| x.is_finite()));
    let (mut delta, mut orth) = (0.0, 1.0);
    assert_eq!(unsafe { bk_coercivity(lin, 7, &mut delta, &mut orth) }, BkStatus::Ok);
    assert!(delta > 0.0);
    assert!(orth < 1e-8);
    unsafe {
        bk_linearized_free(lin);
        bk_operator_free(op);
    }
}

#[test]
fn header_declares_the_interface() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/binarykin.h")).unwrap();
    for name in [
        "bk_version",
        "bk_last_error",
        "bk_post_collision",
        "bk_operator_new",
        "bk_operator_free",
        "bk_eval_q",
        "bk_entropy_production",
        "bk_linearized_new",
        "bk_linearized_apply",
        "bk_coercivity",
        "BK_STATUS_OK",
        "typedef struct BkOperator BkOperator",
    ] {
        assert!(h.contains(name), "header lacks {name}");
    }
    let v = unsafe { std::ffi::CStr::from_ptr(bk_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
