use std::ffi::{CStr, CString};
use std::ptr;

use accmul_ffi::*;

fn field(p: u64) -> *mut AccmulField {
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { accmul_field_new(p, &mut f) }, AccmulStatus::Ok);
    assert!(!f.is_null());
    f
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(accmul_last_error()) }.to_string_lossy().into_owned()
}

fn mat_oracle(p: u64, a: &[u64], b: &[u64], c: &[u64], n: usize) -> Vec<u64> {
    let mut out = c.to_vec();
    for i in 0..n {
        for j in 0..n {
            let mut acc = out[i * n + j] as u128;
            for l in 0..n {
                acc += a[i * n + l] as u128 * b[l * n + j] as u128;
            }
            out[i * n + j] = (acc % p as u128) as u64;
        }
    }
    out
}

#[test]
fn field_lifecycle_and_errors() {
    let f = field(65537);
    assert_eq!(unsafe { accmul_field_modulus(f) }, 65537);
    unsafe { accmul_field_free(f) };
    unsafe { accmul_field_free(ptr::null_mut()) };
    assert_eq!(unsafe { accmul_field_modulus(ptr::null()) }, 0);

    let mut out = ptr::null_mut();
    assert_eq!(unsafe { accmul_field_new(15, &mut out) }, AccmulStatus::InvalidModulus);
    assert!(out.is_null());
    assert!(last_error().contains("15"));
    assert_eq!(unsafe { accmul_field_new(7, ptr::null_mut()) }, AccmulStatus::NullPointer);
}

#[test]
fn matrix_kernels() {
    let p = 65537;
    let f = field(p);
    let n = 8usize;
    let a0: Vec<u64> = (0..(n * n) as u64).map(|v| (v * 37 + 5) % p).collect();
    let b0: Vec<u64> = (0..(n * n) as u64).map(|v| (v * 91 + 2) % p).collect();
    let c0: Vec<u64> = (0..(n * n) as u64).map(|v| v % p).collect();
    let want = mat_oracle(p, &a0, &b0, &c0, n);

    let mut c = c0.clone();
    assert_eq!(unsafe { accmul_mm_classic(f, a0.as_ptr(), b0.as_ptr(), c.as_mut_ptr(), n, n, n, AccmulSign::Plus) }, AccmulStatus::Ok);
    assert_eq!(c, want);

    let (mut a, mut b, mut c) = (a0.clone(), b0.clone(), c0.clone());
    assert_eq!(unsafe { accmul_mm_strassen(f, a.as_mut_ptr(), b.as_mut_ptr(), c.as_mut_ptr(), n, AccmulSign::Plus, 1) }, AccmulStatus::Ok);
    assert_eq!((&a, &b, &c), (&a0, &b0, &want));
    assert_eq!(unsafe { accmul_mm_strassen(f, a.as_mut_ptr(), b.as_mut_ptr(), c.as_mut_ptr(), n, AccmulSign::Minus, 2) }, AccmulStatus::Ok);
    assert_eq!(c, c0);

    let (mut a, mut c) = (a0.clone(), c0.clone());
    assert_eq!(unsafe { accmul_mm_square(f, a.as_mut_ptr(), c.as_mut_ptr(), n, AccmulSign::Plus, 2) }, AccmulStatus::Ok);
    assert_eq!((&a, &c), (&a0, &mat_oracle(p, &a0, &a0, &c0, n)));

    let mut at = vec![0; n * n];
    for i in 0..n {
        for j in 0..n {
            at[j * n + i] = a0[i * n + j];
        }
    }
    let full = mat_oracle(p, &a0, &at, &c0, n);
    let (mut a, mut c) = (a0.clone(), c0.clone());
    assert_eq!(unsafe { accmul_mm_syrk(f, a.as_mut_ptr(), c.as_mut_ptr(), n, n, AccmulSign::Plus, 2) }, AccmulStatus::Ok);
    assert_eq!(a, a0);
    for i in 0..n {
        for j in 0..n {
            assert_eq!(c[i * n + j], if j <= i { full[i * n + j] } else { c0[i * n + j] });
        }
    }
    unsafe { accmul_field_free(f) };
}

#[test]
fn polynomial_kernels() {
    let f = field(998244353);
    let (mut a, mut b) = (vec![1, 2, 3], vec![4, 5, 6]);
    let want = vec![4, 13, 28, 27, 18];
    let mut c = vec![0; 5];
    assert_eq!(unsafe { accmul_poly_karatsuba(f, a.as_mut_ptr(), 3, b.as_mut_ptr(), 3, c.as_mut_ptr(), AccmulSign::Plus, 1) }, AccmulStatus::Ok);
    assert_eq!(c, want);
    let mut c = vec![0; 5];
    assert_eq!(unsafe { accmul_poly_toom3(f, a.as_mut_ptr(), b.as_mut_ptr(), 3, c.as_mut_ptr(), AccmulSign::Plus, 1) }, AccmulStatus::Ok);
    assert_eq!(c, want);
    assert_eq!(unsafe { accmul_poly_fft(f, a.as_mut_ptr(), 3, b.as_mut_ptr(), 3, c.as_mut_ptr(), AccmulSign::Minus) }, AccmulStatus::Ok);
    assert_eq!(c, vec![0; 5]);
    assert_eq!((a, b), (vec![1, 2, 3], vec![4, 5, 6]));
    unsafe { accmul_field_free(f) };
}

#[test]
fn rejects_bad_buffers() {
    let f = field(17);
    let mut buf = vec![1u64; 16];
    let p = buf.as_mut_ptr();
    assert_eq!(unsafe { accmul_mm_strassen(f, p, p.wrapping_add(4), p.wrapping_add(8), 2, AccmulSign::Plus, 1) }, AccmulStatus::Ok);
    assert_eq!(unsafe { accmul_mm_strassen(f, p, p.wrapping_add(2), p.wrapping_add(8), 2, AccmulSign::Plus, 1) }, AccmulStatus::Aliasing);
    assert!(last_error().contains("overlap"));
    assert_eq!(unsafe { accmul_mm_square(f, ptr::null_mut(), p, 2, AccmulSign::Plus, 1) }, AccmulStatus::NullPointer);
    assert_eq!(unsafe { accmul_mm_square(ptr::null(), p, p.wrapping_add(4), 2, AccmulSign::Plus, 1) }, AccmulStatus::NullPointer);

    let mut big = vec![17u64, 0, 0, 0];
    let mut c = vec![0u64; 4];
    assert_eq!(unsafe { accmul_mm_square(f, big.as_mut_ptr(), c.as_mut_ptr(), 2, AccmulSign::Plus, 1) }, AccmulStatus::UnreducedInput);

    let (mut a, mut b, mut c) = (vec![1u64; 3], vec![1u64; 3], vec![0u64; 4]);
    assert_eq!(unsafe { accmul_poly_karatsuba(f, a.as_mut_ptr(), 0, b.as_mut_ptr(), 3, c.as_mut_ptr(), AccmulSign::Plus, 1) }, AccmulStatus::ShapeMismatch);
    assert_eq!(unsafe { accmul_poly_toom3(f, a.as_mut_ptr(), b.as_mut_ptr(), 2, c.as_mut_ptr(), AccmulSign::Plus, 1) }, AccmulStatus::ShapeMismatch);
    unsafe { accmul_field_free(f) };

    let f7 = field(7);
    let (mut a, mut b, mut c) = (vec![1u64; 4], vec![1u64; 4], vec![0u64; 7]);
    assert_eq!(unsafe { accmul_poly_fft(f7, a.as_mut_ptr(), 4, b.as_mut_ptr(), 4, c.as_mut_ptr(), AccmulSign::Plus) }, AccmulStatus::NoRootOfUnity);
    unsafe { accmul_field_free(f7) };
}

const KARATSUBA: &str = "#alpha\n3 2\n1 0\n0 1\n1 -1\n#beta\n3 2\n1 0\n0 1\n1 -1\n#mu\n3 3\n1 0 0\n1 1 -1\n0 1 0\n";

#[test]
fn programs() {
    let f = field(65537);
    let text = CString::new(KARATSUBA).unwrap();
    let mut prog = ptr::null_mut();
    assert_eq!(unsafe { accmul_program_from_hm(f, text.as_ptr(), false, &mut prog) }, AccmulStatus::Ok);

    let mut counts = AccmulCounts::default();
    assert_eq!(unsafe { accmul_program_counts(prog, &mut counts) }, AccmulStatus::Ok);
    assert_eq!(counts, AccmulCounts { mul: 3, add: 11, sca: 0 });
    let (mut m, mut n, mut s) = (0, 0, 0);
    assert_eq!(unsafe { accmul_program_sizes(prog, &mut m, &mut n, &mut s) }, AccmulStatus::Ok);
    assert_eq!((m, n, s), (2, 2, 3));

    let (mut a, mut b, mut c) = (vec![1, 2], vec![3, 4], vec![0, 0, 0]);
    assert_eq!(unsafe { accmul_program_execute(f, prog, a.as_mut_ptr(), 2, b.as_mut_ptr(), 2, c.as_mut_ptr(), 3) }, AccmulStatus::Ok);
    assert_eq!((a, b, c), (vec![1, 2], vec![3, 4], vec![3, 10, 8]));

    let (mut a, mut b, mut c) = (vec![1, 2], vec![3, 4], vec![0, 0]);
    assert_eq!(unsafe { accmul_program_execute(f, prog, a.as_mut_ptr(), 2, b.as_mut_ptr(), 2, c.as_mut_ptr(), 2) }, AccmulStatus::ShapeMismatch);

    let rendered = unsafe { accmul_program_render(prog) };
    assert!(!rendered.is_null());
    let body = unsafe { CStr::from_ptr(rendered) }.to_str().unwrap().to_owned();
    assert_eq!(body.lines().count(), 13);
    assert!(body.lines().any(|l| l == "c1 += a1*b1"), "{body}");
    unsafe { accmul_string_free(rendered) };
    unsafe { accmul_program_free(prog) };

    let mut wide = ptr::null_mut();
    assert_eq!(unsafe { accmul_program_from_hm(f, text.as_ptr(), true, &mut wide) }, AccmulStatus::Ok);
    assert_eq!(unsafe { accmul_program_counts(wide, &mut counts) }, AccmulStatus::Ok);
    assert_eq!(counts, AccmulCounts { mul: 3, add: 18, sca: 0 });
    unsafe { accmul_program_free(wide) };

    let bad = CString::new("#alpha\n1 1\n0\n#beta\n1 1\n1\n#mu\n1 1\n1\n").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { accmul_program_from_hm(f, bad.as_ptr(), false, &mut out) }, AccmulStatus::InvalidFormula);
    assert!(out.is_null());
    let garbage = CString::new("#alpha\n1 1\nx\n").unwrap();
    assert_eq!(unsafe { accmul_program_from_hm(f, garbage.as_ptr(), false, &mut out) }, AccmulStatus::Parse);
    unsafe { accmul_field_free(f) };
}
