mod common;

use accmul::matmul::{mm_acc_classic, mm_acc_strassen, square_acc, syrk_acc, MatMut, MatRef};
use accmul::polymul::{pm_acc_classic, pm_acc_karatsuba, pm_acc_toom3, Toom3Plan};
use accmul::transform::{pm_acc_fft, TwiddleCtx};
use accmul::{FieldCtx, Sign};
use common::{mat_oracle, poly_oracle};
use proptest::prelude::*;

const P: u64 = 998244353;

fn poly(max: usize) -> impl Strategy<Value = Vec<u64>> {
    prop::collection::vec(0..P, 1..=max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn polynomial_kernels_agree(a in poly(70), b in poly(70), threshold in 1usize..8) {
        let f = FieldCtx::with_roots(P).unwrap();
        let c0: Vec<u64> = (0..a.len() + b.len() - 1).map(|i| (i as u64 * 7919) % P).collect();
        let want = poly_oracle(P, &a, &b, &c0);

        let mut c = c0.clone();
        pm_acc_classic(&f, &a, &b, &mut c, Sign::Plus, &mut ()).unwrap();
        prop_assert_eq!(&c, &want);

        let (mut a1, mut b1, mut c) = (a.clone(), b.clone(), c0.clone());
        pm_acc_karatsuba(&f, &mut a1, &mut b1, &mut c, Sign::Plus, threshold, &mut ()).unwrap();
        prop_assert_eq!((&a1, &b1, &c), (&a, &b, &want));

        let ctx = TwiddleCtx::for_length(&f, c0.len()).unwrap();
        let (mut a1, mut b1, mut c) = (a.clone(), b.clone(), c0.clone());
        pm_acc_fft(&ctx, &mut a1, &mut b1, &mut c, Sign::Plus, &mut ()).unwrap();
        prop_assert_eq!((&a1, &b1, &c), (&a, &b, &want));
    }

    #[test]
    fn plus_then_minus_is_identity(a in poly(40), b in poly(40), threshold in 1usize..6) {
        let f = FieldCtx::with_roots(P).unwrap();
        let c0: Vec<u64> = (0..a.len() + b.len() - 1).map(|i| i as u64).collect();
        let (mut a1, mut b1, mut c) = (a.clone(), b.clone(), c0.clone());
        pm_acc_karatsuba(&f, &mut a1, &mut b1, &mut c, Sign::Plus, threshold, &mut ()).unwrap();
        let ctx = TwiddleCtx::for_length(&f, c.len()).unwrap();
        pm_acc_fft(&ctx, &mut a1, &mut b1, &mut c, Sign::Minus, &mut ()).unwrap();
        prop_assert_eq!(c, c0);
    }

    #[test]
    fn toom3_matches_oracle(third in 1usize..14, seed in any::<u64>(), threshold in 1usize..10) {
        let f = FieldCtx::new(P).unwrap();
        let plan = Toom3Plan::new(&f).unwrap();
        let n = 3 * third;
        let gen = |k: u64| (0..n as u64).map(|i| (seed ^ (i * 0x9E37_79B9 + k)) % P).collect::<Vec<_>>();
        let (a, b) = (gen(1), gen(2));
        let c0 = vec![5; 2 * n - 1];
        let (mut a1, mut b1, mut c) = (a.clone(), b.clone(), c0.clone());
        pm_acc_toom3(&plan, &f, &mut a1, &mut b1, &mut c, Sign::Plus, threshold, &mut ()).unwrap();
        prop_assert_eq!((&a1, &b1), (&a, &b));
        prop_assert_eq!(c, poly_oracle(P, &a, &b, &c0));
    }

    #[test]
    fn matrix_kernels_agree(n in 1usize..24, seed in any::<u64>(), threshold in 1usize..6) {
        let p = 65537;
        let f = FieldCtx::new(p).unwrap();
        let gen = |k: u64, len: usize| (0..len as u64).map(|i| (seed.wrapping_mul(i + 1) ^ k) % p).collect::<Vec<_>>();
        let (a, b, c0) = (gen(1, n * n), gen(2, n * n), gen(3, n * n));
        let want = mat_oracle(p, &a, &b, &c0, n, n, n);

        let mut c = c0.clone();
        mm_acc_classic(&f, MatRef::from_slice(&a, n, n).unwrap(), MatRef::from_slice(&b, n, n).unwrap(), MatMut::from_slice(&mut c, n, n).unwrap(), Sign::Plus, &mut ()).unwrap();
        prop_assert_eq!(&c, &want);

        let (mut a1, mut b1, mut c) = (a.clone(), b.clone(), c0.clone());
        mm_acc_strassen(&f, MatMut::from_slice(&mut a1, n, n).unwrap(), MatMut::from_slice(&mut b1, n, n).unwrap(), MatMut::from_slice(&mut c, n, n).unwrap(), Sign::Plus, threshold, &mut ()).unwrap();
        prop_assert_eq!((&a1, &b1, &c), (&a, &b, &want));

        let (mut a1, mut c) = (a.clone(), c0.clone());
        square_acc(&f, MatMut::from_slice(&mut a1, n, n).unwrap(), MatMut::from_slice(&mut c, n, n).unwrap(), Sign::Plus, threshold, &mut ()).unwrap();
        prop_assert_eq!((&a1, &c), (&a, &mat_oracle(p, &a, &a, &c0, n, n, n)));

        let (mut a1, mut c) = (a.clone(), c0.clone());
        syrk_acc(&f, MatMut::from_slice(&mut a1, n, n).unwrap(), MatMut::from_slice(&mut c, n, n).unwrap(), f.find_skew_unitary_pair(), Sign::Minus, threshold, &mut ()).unwrap();
        prop_assert_eq!(&a1, &a);
        let full = mat_oracle(p, &a, &common::transpose(&a, n, n), &vec![0; n * n], n, n, n);
        for i in 0..n {
            for j in 0..n {
                let v = if j <= i { f.sub(c0[i * n + j], full[i * n + j]) } else { c0[i * n + j] };
                prop_assert_eq!(c[i * n + j], v);
            }
        }
    }
}

#[test]
fn strided_submatrix_products() {
    let p = 101;
    let f = FieldCtx::new(p).unwrap();
    let mut big_a: Vec<u64> = (0..12 * 12).map(|v| v % p).collect();
    let mut big_b: Vec<u64> = (0..12 * 12).map(|v| (v * 3 + 1) % p).collect();
    let mut big_c = vec![0u64; 12 * 12];
    let (a, b) = (big_a.clone(), big_b.clone());
    {
        let av = MatMut::from_slice_strided(&mut big_a[13..], 8, 8, 12).unwrap();
        let bv = MatMut::from_slice_strided(&mut big_b[26..], 8, 8, 12).unwrap();
        let cv = MatMut::from_slice_strided(&mut big_c[2..], 8, 8, 12).unwrap();
        mm_acc_strassen(&f, av, bv, cv, Sign::Plus, 1, &mut ()).unwrap();
    }
    assert_eq!((&big_a, &big_b), (&a, &b));
    let sub = |m: &[u64], off: usize| (0..8).flat_map(|i| (0..8).map(move |j| m[off + i * 12 + j])).collect::<Vec<_>>();
    let want = mat_oracle(p, &sub(&a, 13), &sub(&b, 26), &[0; 64], 8, 8, 8);
    assert_eq!(sub(&big_c, 2), want);
    assert!(big_c[..2].iter().all(|&v| v == 0));
}
