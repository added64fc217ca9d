//! Bit-reversed number-theoretic transforms and FFT-based in-place products.
//!
//! `brDFT_S(F)` lists `F(τ^[0]), F(τ^[1]), …, F(τ^[S-1])` where `τ` is a
//! principal `S`-th root and `[i]` is the bit reversal of `i` on `log2 S`
//! bits. Decimation in frequency produces this order directly, so no
//! permutation pass is needed. Powers of roots are generated on the fly; the
//! only storage is the caller's array.

use crate::error::{Error, Result};
use crate::field::{FieldCtx, FieldElement};
use crate::probe::Probe;
use crate::Sign;

/// A field together with a principal `N`-th root of unity, `N = 2^p_exp`.
#[derive(Clone, Debug)]
pub struct TwiddleCtx {
    field: FieldCtx,
    p_exp: u32,
    omega: FieldElement,
    omega_inv: FieldElement,
}

impl TwiddleCtx {
    /// Context with the field's canonical principal `2^p_exp`-th root.
    pub fn new(f: &FieldCtx, p_exp: u32) -> Result<Self> {
        if p_exp >= 63 {
            return Err(Error::NoSuchRoot { modulus: f.modulus(), order: u64::MAX });
        }
        let omega = f.find_principal_root(1 << p_exp)?;
        Self::with_root(f, p_exp, omega)
    }

    /// Smallest context whose size is at least `len`.
    pub fn for_length(f: &FieldCtx, len: usize) -> Result<Self> {
        Self::new(f, len.max(1).next_power_of_two().trailing_zeros())
    }

    /// Context with an explicit root, checked to be principal of order `2^p_exp`.
    pub fn with_root(f: &FieldCtx, p_exp: u32, omega: FieldElement) -> Result<Self> {
        let n = 1u64 << p_exp;
        let bad = Error::NoSuchRoot { modulus: f.modulus(), order: n };
        if omega >= f.modulus() || f.pow(omega, n) != 1 || (n > 1 && f.pow(omega, n / 2) != f.modulus() - 1) {
            return Err(bad);
        }
        let omega_inv = f.inv(omega).map_err(|_| bad)?;
        Ok(TwiddleCtx { field: f.clone(), p_exp, omega, omega_inv })
    }

    pub fn field(&self) -> &FieldCtx {
        &self.field
    }

    pub fn p_exp(&self) -> u32 {
        self.p_exp
    }

    /// `N = 2^p_exp`.
    pub fn size(&self) -> usize {
        1 << self.p_exp
    }

    pub fn omega(&self) -> FieldElement {
        self.omega
    }

    /// Principal root of order `s`, a power of two dividing `N`.
    fn root(&self, s: usize) -> FieldElement {
        self.field.pow(self.omega, (self.size() / s) as u64)
    }

    fn check_pow2(&self, len: usize) -> Result<()> {
        if len == 0 || !len.is_power_of_two() || len > self.size() {
            return Err(Error::ShapeMismatch(format!("transform length {len} is not a power of two dividing {}", self.size())));
        }
        Ok(())
    }
}

/// Reverses the low `bits` bits of `i`.
pub fn bitrev(i: usize, bits: u32) -> usize {
    if bits == 0 {
        0
    } else {
        i.reverse_bits() >> (usize::BITS - bits)
    }
}

/// Decimation-in-frequency DFT with root `w` of order `x.len()`.
fn dif(f: &FieldCtx, x: &mut [u64], w: u64) {
    let s = x.len();
    let mut len = s;
    let mut wl = w;
    while len >= 2 {
        let h = len / 2;
        let mut t = 1;
        for j in 0..h {
            for base in (0..s).step_by(len) {
                let (u, v) = (x[base + j], x[base + j + h]);
                x[base + j] = f.add(u, v);
                x[base + j + h] = f.mul(f.sub(u, v), t);
            }
            t = f.mul(t, wl);
        }
        wl = f.mul(wl, wl);
        len = h;
    }
}

/// Exact inverse of [`dif`] given `w_inv = w^-1`: decimation in time on
/// `w^-1`, then division by the length.
fn dit_inv(f: &FieldCtx, x: &mut [u64], w_inv: u64) {
    let s = x.len();
    if s < 2 {
        return;
    }
    let mut len = 2;
    while len <= s {
        let h = len / 2;
        let wl = f.pow(w_inv, (s / len) as u64);
        let mut t = 1;
        for j in 0..h {
            for base in (0..s).step_by(len) {
                let u = x[base + j];
                let v = f.mul(x[base + j + h], t);
                x[base + j] = f.add(u, v);
                x[base + j + h] = f.sub(u, v);
            }
            t = f.mul(t, wl);
        }
        len *= 2;
    }
    let s_inv = f.inv(s as u64 % f.modulus()).expect("2 is a unit in odd characteristic");
    for v in x.iter_mut() {
        *v = f.mul(*v, s_inv);
    }
}

/// Butterfly work of a length-`s` transform: `(mul, add)`.
fn dft_ops(s: usize) -> (u64, u64) {
    let lg = s.trailing_zeros() as u64;
    (s as u64 / 2 * lg, s as u64 * lg)
}

/// In-place `brDFT` of a power-of-two length dividing `N`.
pub fn brdft<P: Probe>(ctx: &TwiddleCtx, x: &mut [u64], probe: &mut P) -> Result<()> {
    ctx.check_pow2(x.len())?;
    probe.transform(x.len(), false);
    let (mul, add) = dft_ops(x.len());
    probe.scalar_ops(mul, add, 0);
    dif(&ctx.field, x, ctx.root(x.len()));
    Ok(())
}

/// Inverse of [`brdft`], including the division by the length.
pub fn brdft_inverse<P: Probe>(ctx: &TwiddleCtx, x: &mut [u64], probe: &mut P) -> Result<()> {
    ctx.check_pow2(x.len())?;
    probe.transform(x.len(), true);
    let (mul, add) = dft_ops(x.len());
    probe.scalar_ops(mul, add, x.len() as u64);
    let w = ctx.root(x.len());
    dit_inv(&ctx.field, x, ctx.field.inv(w).expect("roots are units"));
    Ok(())
}

/// Power-of-two product `C += sign * A·B`.
///
/// `A` and `B` have `n` coefficients, `C` has `2n`, and the context size is
/// `2n`. `C` is taken to the evaluation side once; `A` and `B` are
/// transformed at the even and then, after twisting by `ω^i`, at the odd
/// points, and restored after each pass. Ten transforms in all.
pub fn pm_acc_fft_pow2<P: Probe>(
    ctx: &TwiddleCtx,
    a: &mut [u64],
    b: &mut [u64],
    c: &mut [u64],
    sign: Sign,
    probe: &mut P,
) -> Result<()> {
    let n = a.len();
    if n == 0 || !n.is_power_of_two() || b.len() != n || c.len() != 2 * n || ctx.size() != 2 * n {
        return Err(Error::ShapeMismatch(format!(
            "power-of-two product needs |a| = |b| = n, |c| = 2n = N; got {}, {}, {} with N = {}",
            a.len(),
            b.len(),
            c.len(),
            ctx.size()
        )));
    }
    let f = &ctx.field;
    brdft(ctx, c, probe)?;
    for half in 0..2 {
        if half == 1 {
            twist(f, a, ctx.omega);
            twist(f, b, ctx.omega);
        }
        brdft(ctx, a, probe)?;
        brdft(ctx, b, probe)?;
        for (i, ci) in c[half * n..(half + 1) * n].iter_mut().enumerate() {
            *ci = f.add(*ci, sign.apply(f, f.mul(a[i], b[i])));
        }
        probe.scalar_ops(n as u64, n as u64, 0);
        brdft_inverse(ctx, a, probe)?;
        brdft_inverse(ctx, b, probe)?;
        if half == 1 {
            twist(f, a, ctx.omega_inv);
            twist(f, b, ctx.omega_inv);
        }
    }
    brdft_inverse(ctx, c, probe)?;
    Ok(())
}

/// `x_i *= w^i`.
fn twist(f: &FieldCtx, x: &mut [u64], w: u64) {
    let mut t = 1;
    for v in x.iter_mut() {
        *v = f.mul(*v, t);
        t = f.mul(t, w);
    }
}

fn check_part(ctx: &TwiddleCtx, len: usize, k: usize, l: u32) -> Result<()> {
    let block = 1usize << l;
    if block > len || (k + 1) * block > ctx.size() {
        return Err(Error::ShapeMismatch(format!("partial transform window {k} of size {block} does not fit length {len} and N = {}", ctx.size())));
    }
    Ok(())
}

/// Replaces the first `2^l` entries of `x` by `F(ω^[k·2^l + i])` for
/// `i < 2^l`, where `F` is the polynomial with coefficients `x`.
///
/// Twists by `ω^(i·[k·2^l])`, folds modulo `X^(2^l) - 1`, then transforms the
/// prefix. [`parttft_inverse`] undoes it exactly.
pub fn parttft<P: Probe>(ctx: &TwiddleCtx, x: &mut [u64], k: usize, l: u32, probe: &mut P) -> Result<()> {
    check_part(ctx, x.len(), k, l)?;
    let f = &ctx.field;
    let block = 1usize << l;
    twist(f, x, f.pow(ctx.omega, bitrev(k * block, ctx.p_exp) as u64));
    for i in (block..x.len()).rev() {
        x[i - block] = f.add(x[i - block], x[i]);
    }
    dif(f, &mut x[..block], ctx.root(block));
    let (mul, add) = dft_ops(block);
    probe.scalar_ops(mul, add + (x.len() - block) as u64, x.len() as u64);
    Ok(())
}

/// Inverse of [`parttft`] with the same `k` and `l`.
pub fn parttft_inverse<P: Probe>(ctx: &TwiddleCtx, x: &mut [u64], k: usize, l: u32, probe: &mut P) -> Result<()> {
    check_part(ctx, x.len(), k, l)?;
    let f = &ctx.field;
    let block = 1usize << l;
    dit_inv(f, &mut x[..block], f.inv(ctx.root(block)).expect("roots are units"));
    for i in block..x.len() {
        x[i - block] = f.sub(x[i - block], x[i]);
    }
    let w = f.pow(ctx.omega, bitrev(k * block, ctx.p_exp) as u64);
    twist(f, x, f.inv(w).expect("roots are units"));
    let (mul, add) = dft_ops(block);
    probe.scalar_ops(mul, add + (x.len() - block) as u64, x.len() as u64 + block as u64);
    Ok(())
}

/// Values of logical positions past the stored prefix.
type Virtual<'v> = Option<&'v dyn Fn(usize) -> u64>;

fn virt(extra: Virtual<'_>, j: usize) -> u64 {
    extra.map_or(0, |e| e(j))
}

/// First `x.len()` outputs of the size-`s` brDFT, with root `w`, of the
/// vector whose first entries are `x` and whose entry `j ≥ x.len()` is
/// `extra(j)`.
///
/// The first DIF stage splits into the even half `y_j = x_j + x_{j+h}` and
/// the odd half `z_j = w^j (x_j - x_{j+h})`. Missing `z` values needed by the
/// right recursion are recomputed from the stored `y` and the virtual
/// inputs, so nothing is buffered.
fn tft_part(f: &FieldCtx, x: &mut [u64], s: usize, w: u64, extra: Virtual<'_>) {
    let n = x.len();
    if n == 0 {
        return;
    }
    if n == s {
        dif(f, x, w);
        return;
    }
    let h = s / 2;
    let w2 = f.mul(w, w);
    if n <= h {
        for (j, v) in x.iter_mut().enumerate() {
            *v = f.add(*v, virt(extra, j + h));
        }
        let folded = |j: usize| f.add(virt(extra, j), virt(extra, j + h));
        tft_part(f, x, h, w2, Some(&folded));
        return;
    }
    let (left, right) = x.split_at_mut(h);
    let mut t = 1;
    for j in 0..n - h {
        let (u, v) = (left[j], right[j]);
        left[j] = f.add(u, v);
        right[j] = f.mul(f.sub(u, v), t);
        t = f.mul(t, w);
    }
    for (j, v) in left.iter_mut().enumerate().skip(n - h) {
        *v = f.add(*v, virt(extra, j + h));
    }
    {
        let left: &[u64] = left;
        let odd = |j: usize| {
            let d = f.sub(left[j], f.add(virt(extra, j + h), virt(extra, j + h)));
            f.mul(f.pow(w, j as u64), d)
        };
        tft_part(f, right, h, w2, Some(&odd));
    }
    dif(f, left, w2);
}

/// Inverse of [`tft_part`]: recovers the inputs from the first `x.len()`
/// outputs and the same virtual inputs.
fn tft_part_inv(f: &FieldCtx, x: &mut [u64], s: usize, w: u64, w_inv: u64, extra: Virtual<'_>) {
    let n = x.len();
    if n == 0 {
        return;
    }
    if n == s {
        dit_inv(f, x, w_inv);
        return;
    }
    let h = s / 2;
    let (w2, w2_inv) = (f.mul(w, w), f.mul(w_inv, w_inv));
    if n <= h {
        let folded = |j: usize| f.add(virt(extra, j), virt(extra, j + h));
        tft_part_inv(f, x, h, w2, w2_inv, Some(&folded));
        for (j, v) in x.iter_mut().enumerate() {
            *v = f.sub(*v, virt(extra, j + h));
        }
        return;
    }
    let (left, right) = x.split_at_mut(h);
    dit_inv(f, left, w2_inv);
    {
        let left: &[u64] = left;
        let odd = |j: usize| {
            let d = f.sub(left[j], f.add(virt(extra, j + h), virt(extra, j + h)));
            f.mul(f.pow(w, j as u64), d)
        };
        tft_part_inv(f, right, h, w2, w2_inv, Some(&odd));
    }
    for (j, v) in left.iter_mut().enumerate().skip(n - h) {
        *v = f.sub(*v, virt(extra, j + h));
    }
    let half = f.inv(2).expect("odd characteristic");
    let mut t = 1;
    for j in 0..n - h {
        let (y, z) = (left[j], f.mul(right[j], t));
        left[j] = f.mul(f.add(y, z), half);
        right[j] = f.mul(f.sub(y, z), half);
        t = f.mul(t, w_inv);
    }
}

fn check_tft(ctx: &TwiddleCtx, len: usize) -> Result<()> {
    if len == 0 || len > ctx.size() {
        return Err(Error::ShapeMismatch(format!("truncated transform of length {len} needs 1 ≤ r ≤ N = {}", ctx.size())));
    }
    Ok(())
}

/// Truncated brDFT: replaces `x` (length `r ≤ N`) by the first `r` entries
/// of `brDFT_N` of the polynomial with coefficients `x`.
pub fn brtft<P: Probe>(ctx: &TwiddleCtx, x: &mut [u64], probe: &mut P) -> Result<()> {
    check_tft(ctx, x.len())?;
    probe.transform(x.len(), false);
    let s = x.len().next_power_of_two();
    let (mul, add) = dft_ops(s);
    probe.scalar_ops(mul, add, 0);
    tft_part(&ctx.field, x, s, ctx.root(s), None);
    Ok(())
}

/// Inverse of [`brtft`]: recovers the `r` coefficients of a polynomial of
/// degree below `r` from its first `r` bit-reversed evaluations.
pub fn brtft_inverse<P: Probe>(ctx: &TwiddleCtx, x: &mut [u64], probe: &mut P) -> Result<()> {
    check_tft(ctx, x.len())?;
    probe.transform(x.len(), true);
    let s = x.len().next_power_of_two();
    let (mul, add) = dft_ops(s);
    probe.scalar_ops(mul, add, x.len() as u64);
    let w = ctx.root(s);
    let f = &ctx.field;
    tft_part_inv(f, x, s, w, f.inv(w).expect("roots are units"), None);
    Ok(())
}

/// Product of arbitrary lengths, `C += sign * A·B`, with `|C| = |A|+|B|-1 ≤ N`.
///
/// `C` moves to the evaluation side by a truncated transform. Windows of
/// evaluations of the shorter and longer operand are then produced by
/// partial transforms of decreasing power-of-two size, multiplied into `C`
/// and undone, until all `|C|` evaluation points are covered.
pub fn pm_acc_fft<P: Probe>(
    ctx: &TwiddleCtx,
    a: &mut [u64],
    b: &mut [u64],
    c: &mut [u64],
    sign: Sign,
    probe: &mut P,
) -> Result<()> {
    let (a, b) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let (m, n) = (a.len(), b.len());
    if m == 0 || c.len() != m + n - 1 {
        return Err(Error::ShapeMismatch(format!("operands of length {m} and {n} need a result of length {}, got {}", (m + n).saturating_sub(1), c.len())));
    }
    let total = c.len();
    check_tft(ctx, total)?;
    let f = &ctx.field;
    brtft(ctx, c, probe)?;
    let mut r = total;
    while r > 0 {
        let l = r.min(m).ilog2();
        let t = r.min(n).ilog2() - l;
        let k = total - r;
        let block = 1usize << (l + t);
        debug_assert_eq!(k % block, 0);
        let kb = k / block;
        parttft(ctx, b, kb, l + t, probe)?;
        for s in 0..1usize << t {
            let ka = (kb << t) + s;
            parttft(ctx, a, ka, l, probe)?;
            let off = s << l;
            for i in 0..1usize << l {
                let v = f.mul(a[i], b[i + off]);
                let d = &mut c[k + off + i];
                *d = f.add(*d, sign.apply(f, v));
            }
            probe.scalar_ops(1 << l, 1 << l, 0);
            parttft_inverse(ctx, a, ka, l, probe)?;
        }
        parttft_inverse(ctx, b, kb, l + t, probe)?;
        r -= block;
        probe.tft_iteration();
    }
    brtft_inverse(ctx, c, probe)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe::Trace;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ctx17() -> TwiddleCtx {
        TwiddleCtx::with_root(&FieldCtx::new(17).unwrap(), 2, 4).unwrap()
    }

    fn rv(rng: &mut ChaCha8Rng, n: usize, p: u64) -> Vec<u64> {
        (0..n).map(|_| rng.gen_range(0..p)).collect()
    }

    fn eval(f: &FieldCtx, coeffs: &[u64], x: u64) -> u64 {
        coeffs.iter().rev().fold(0, |acc, &c| f.add(f.mul(acc, x), c))
    }

    fn classic(p: u64, a: &[u64], b: &[u64], c: &[u64]) -> Vec<u64> {
        let mut out = c.to_vec();
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                out[i + j] = ((out[i + j] as u128 + x as u128 * y as u128) % p as u128) as u64;
            }
        }
        out
    }

    #[test]
    fn bitrev_examples() {
        assert_eq!(bitrev(0, 5), 0);
        assert_eq!(bitrev(1, 3), 4);
        assert_eq!(bitrev(3, 3), 6);
        assert_eq!(bitrev(0, 0), 0);
    }

    #[test]
    fn brdft_examples() {
        let ctx = ctx17();
        let mut x = vec![0, 1, 0, 0];
        brdft(&ctx, &mut x, &mut ()).unwrap();
        assert_eq!(x, vec![1, 16, 4, 13]);
        let mut k = vec![5, 0, 0, 0];
        brdft(&ctx, &mut k, &mut ()).unwrap();
        assert_eq!(k, vec![5; 4]);
        assert!(brdft(&ctx, &mut [1, 2, 3], &mut ()).is_err());
        assert!(TwiddleCtx::with_root(&FieldCtx::new(17).unwrap(), 2, 2).is_err());
    }

    #[test]
    fn brdft_matches_direct_evaluation_and_round_trips() {
        let f = FieldCtx::new(65537).unwrap();
        let ctx = TwiddleCtx::new(&f, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for bits in 0..=9u32 {
            let s = 1usize << bits;
            let x0 = rv(&mut rng, s, 65537);
            let mut x = x0.clone();
            brdft(&ctx, &mut x, &mut ()).unwrap();
            if bits <= 5 {
                let w = ctx.root(s);
                for (i, &v) in x.iter().enumerate() {
                    assert_eq!(v, eval(&f, &x0, f.pow(w, bitrev(i, bits) as u64)));
                }
            }
            brdft_inverse(&ctx, &mut x, &mut ()).unwrap();
            assert_eq!(x, x0);
        }
    }

    #[test]
    fn pointwise_product_of_transforms() {
        let f = FieldCtx::new(97).unwrap();
        let ctx = TwiddleCtx::new(&f, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (mut a, mut b) = (rv(&mut rng, 8, 97), rv(&mut rng, 8, 97));
        let mut cyc = vec![0; 8];
        for i in 0..8 {
            for j in 0..8 {
                cyc[(i + j) % 8] = (cyc[(i + j) % 8] + a[i] * b[j]) % 97;
            }
        }
        brdft(&ctx, &mut a, &mut ()).unwrap();
        brdft(&ctx, &mut b, &mut ()).unwrap();
        brdft(&ctx, &mut cyc, &mut ()).unwrap();
        for i in 0..8 {
            assert_eq!(cyc[i], f.mul(a[i], b[i]));
        }
    }

    #[test]
    fn fft_pow2_examples() {
        let ctx = ctx17();
        let (mut a, mut b, mut c) = (vec![1, 0], vec![1, 0], vec![0; 4]);
        pm_acc_fft_pow2(&ctx, &mut a, &mut b, &mut c, Sign::Plus, &mut ()).unwrap();
        assert_eq!(c, vec![1, 0, 0, 0]);
        let (mut a, mut b, mut c) = (vec![0, 1], vec![0, 1], vec![0; 4]);
        pm_acc_fft_pow2(&ctx, &mut a, &mut b, &mut c, Sign::Plus, &mut ()).unwrap();
        assert_eq!(c, vec![0, 0, 1, 0]);
    }

    #[test]
    fn fft_pow2_random_and_transform_budget() {
        let p = 65537;
        let f = FieldCtx::new(p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for bits in 0..=8u32 {
            let n = 1usize << bits;
            let ctx = TwiddleCtx::new(&f, bits + 1).unwrap();
            let (a0, b0) = (rv(&mut rng, n, p), rv(&mut rng, n, p));
            let mut c0 = rv(&mut rng, 2 * n, p);
            c0[2 * n - 1] = rng.gen_range(0..p);
            let (mut a, mut b, mut c) = (a0.clone(), b0.clone(), c0.clone());
            let mut trace = Trace::new();
            pm_acc_fft_pow2(&ctx, &mut a, &mut b, &mut c, Sign::Plus, &mut trace).unwrap();
            assert_eq!((&a, &b), (&a0, &b0));
            assert_eq!(c, classic(p, &a0, &b0, &c0));
            assert_eq!(trace.transforms.len(), 10);
            assert_eq!(trace.transforms.first(), Some(&(2 * n, false)));
            assert_eq!(trace.transforms.last(), Some(&(2 * n, true)));
            assert_eq!(trace.transforms.iter().filter(|t| t.0 == n).count(), 8);
        }
    }

    #[test]
    fn parttft_matches_direct_evaluation() {
        let f = FieldCtx::new(17).unwrap();
        let ctx = TwiddleCtx::new(&f, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=16usize {
            for l in 0..=n.ilog2() {
                let block = 1usize << l;
                for k in 0..16 / block {
                    let x0 = rv(&mut rng, n, 17);
                    let mut x = x0.clone();
                    parttft(&ctx, &mut x, k, l, &mut ()).unwrap();
                    for (i, &xi) in x.iter().take(block).enumerate() {
                        let pt = f.pow(ctx.omega(), bitrev(k * block + i, 4) as u64);
                        assert_eq!(xi, eval(&f, &x0, pt), "n={n} l={l} k={k} i={i}");
                    }
                    parttft_inverse(&ctx, &mut x, k, l, &mut ()).unwrap();
                    assert_eq!(x, x0);
                }
            }
        }
        assert!(parttft(&ctx, &mut [1, 2, 3], 0, 2, &mut ()).is_err());
    }

    #[test]
    fn brtft_matches_direct_evaluation() {
        for (p, bits) in [(17u64, 3u32), (17, 4), (65537, 7)] {
            let f = FieldCtx::new(p).unwrap();
            let ctx = TwiddleCtx::new(&f, bits).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(p + bits as u64);
            for r in 1..=ctx.size() {
                let x0 = rv(&mut rng, r, p);
                let mut x = x0.clone();
                brtft(&ctx, &mut x, &mut ()).unwrap();
                for (i, &v) in x.iter().enumerate() {
                    let pt = f.pow(ctx.omega(), bitrev(i, bits) as u64);
                    assert_eq!(v, eval(&f, &x0, pt), "p={p} r={r} i={i}");
                }
                brtft_inverse(&ctx, &mut x, &mut ()).unwrap();
                assert_eq!(x, x0, "p={p} r={r}");
            }
        }
        let ctx = ctx17();
        let mut full = vec![3, 1, 4, 1];
        let mut via_tft = full.clone();
        brdft(&ctx, &mut full, &mut ()).unwrap();
        brtft(&ctx, &mut via_tft, &mut ()).unwrap();
        assert_eq!(full, via_tft);
    }

    #[test]
    fn fft_examples() {
        let p = 97;
        let f = FieldCtx::new(p).unwrap();
        let ctx = TwiddleCtx::for_length(&f, 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (a0, b0, c0) = (rv(&mut rng, 3, p), rv(&mut rng, 5, p), rv(&mut rng, 7, p));
        let (mut a, mut b, mut c) = (a0.clone(), b0.clone(), c0.clone());
        pm_acc_fft(&ctx, &mut a, &mut b, &mut c, Sign::Plus, &mut ()).unwrap();
        assert_eq!((&a, &b), (&a0, &b0));
        assert_eq!(c, classic(p, &a0, &b0, &c0));
    }

    #[test]
    fn fft_all_small_shapes() {
        let p = 65537;
        let f = FieldCtx::new(p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for m in 1..=24 {
            for n in 1..=24 {
                let ctx = TwiddleCtx::for_length(&f, m + n - 1).unwrap();
                let (a0, b0, c0) = (rv(&mut rng, m, p), rv(&mut rng, n, p), rv(&mut rng, m + n - 1, p));
                let (mut a, mut b, mut c) = (a0.clone(), b0.clone(), c0.clone());
                let mut trace = Trace::new();
                pm_acc_fft(&ctx, &mut a, &mut b, &mut c, Sign::Plus, &mut trace).unwrap();
                assert_eq!((&a, &b), (&a0, &b0));
                assert_eq!(c, classic(p, &a0, &b0, &c0), "m={m} n={n}");
                let longer = m.max(n);
                assert!(trace.tft_iterations <= 3 + longer.next_power_of_two().ilog2() as usize);
                pm_acc_fft(&ctx, &mut a, &mut b, &mut c, Sign::Minus, &mut ()).unwrap();
                assert_eq!(c, c0);
            }
        }
    }
}
