use std::ffi::{c_char, CStr};
use std::ptr;

use snls_ffi::*;

fn coefficient(h: *const SnlsExpansion, k: u32) -> String {
    unsafe {
        let mut need = 0usize;
        assert_eq!(snls_expansion_coefficient(h, k, ptr::null_mut(), 0, &mut need), SnlsStatus::BufferTooSmall);
        let mut buf = vec![0 as c_char; need];
        assert_eq!(snls_expansion_coefficient(h, k, buf.as_mut_ptr(), need, &mut need), SnlsStatus::Ok);
        CStr::from_ptr(buf.as_ptr()).to_str().unwrap().to_owned()
    }
}

fn last_error() -> String {
    unsafe {
        let need = snls_last_error(ptr::null_mut(), 0);
        let mut buf = vec![0 as c_char; need];
        snls_last_error(buf.as_mut_ptr(), need);
        CStr::from_ptr(buf.as_ptr()).to_str().unwrap().to_owned()
    }
}

#[test]
fn expansion_round_trip() {
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(snls_expand(1, 2, &mut h), SnlsStatus::Ok);
        let mut order = 0;
        assert_eq!(snls_expansion_order(h, &mut order), SnlsStatus::Ok);
        assert_eq!(order, 2);
        assert_eq!(coefficient(h, 1), "G⊛(Φ²Φ̄)");
        let mut n = 0;
        assert_eq!(snls_expansion_term_count(h, 2, &mut n), SnlsStatus::Ok);
        assert_eq!(n, 2);
        let mut zero = false;
        assert_eq!(snls_mean_vanishes(h, 2, &mut zero), SnlsStatus::Ok);
        assert!(zero);
        assert_eq!(snls_two_point_diagram_count(h, 1, &mut n), SnlsStatus::Ok);
        assert_eq!(n, 3);
        assert_eq!(snls_expansion_term_count(h, 3, &mut n), SnlsStatus::InvalidArgument);
        assert!(last_error().contains("order 3"));
        snls_expansion_free(h);
    }
}

#[test]
fn error_codes() {
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(snls_expand(0, 1, &mut h), SnlsStatus::InvalidArgument);
        assert!(h.is_null());
        assert_eq!(snls_expand(1, 1, ptr::null_mut()), SnlsStatus::NullPointer);
        let mut n = 0;
        assert_eq!(snls_expansion_term_count(ptr::null(), 0, &mut n), SnlsStatus::NullPointer);
        snls_expansion_free(ptr::null_mut());
        snls_lattice_free(ptr::null_mut());
        let mut b = false;
        assert_eq!(snls_subcritical(1, 1, 6, &mut b), SnlsStatus::Ok);
        assert!(b);
        assert_eq!(snls_subcritical(2, 1, 6, &mut b), SnlsStatus::Ok);
        assert!(!b);
        assert_eq!(snls_subcritical(0, 1, 6, &mut b), SnlsStatus::InvalidArgument);
        assert!(CStr::from_ptr(snls_version()).to_str().unwrap().starts_with("0."));
    }
}

#[test]
fn q_pair_is_hermitian() {
    unsafe {
        let mut lat = ptr::null_mut();
        assert_eq!(snls_lattice_new(64, 64, &mut lat), SnlsStatus::Ok);
        let f1 = SnlsBump { center_t: 0.7, center_x: 3.0, radius_t: 0.2, radius_x: 1.0, plateau: 0.0, amplitude: 1.0 };
        let f2 = SnlsBump { center_t: 0.8, center_x: 3.4, radius_t: 0.15, radius_x: 0.8, plateau: 0.0, amplitude: 1.0 };
        let (mut a, mut b) = (SnlsComplex::default(), SnlsComplex::default());
        assert_eq!(snls_q_pair(lat, &f1, &f2, &mut a), SnlsStatus::Ok);
        assert_eq!(snls_q_pair(lat, &f2, &f1, &mut b), SnlsStatus::Ok);
        assert!((a.re - b.re).abs() < 1e-14 && (a.im + b.im).abs() < 1e-14);
        assert!(a.re.hypot(a.im) > 1e-6);
        let bad = SnlsBump { radius_t: 0.0, ..f1 };
        assert_eq!(snls_q_pair(lat, &bad, &f2, &mut a), SnlsStatus::InvalidArgument);
        snls_lattice_free(lat);
        assert_eq!(snls_lattice_new(1, 64, &mut lat), SnlsStatus::InvalidArgument);
    }
}
