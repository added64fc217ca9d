//! In-place accumulating polynomial products `C += ±A·B`.
//!
//! Polynomials are coefficient slices, lowest degree first. `C` must hold
//! exactly `len(A) + len(B) - 1` coefficients.

use crate::bilinear_gen::{generate_inplace_2d, to_2d, toom3_rep};
use crate::error::{Error, Result};
use crate::field::{FieldCtx, FieldElement};
use crate::probe::{LevelKind, LevelStat, Probe};
use crate::slp::{run, Bank, Machine, Op, Program, Reg};
use crate::Sign;

/// Default Karatsuba threshold, in coefficients of the shorter operand.
pub const DEFAULT_THRESHOLD: usize = 4;

fn check_lengths(a: usize, b: usize, c: usize) -> Result<()> {
    if a == 0 || b == 0 || c != a + b - 1 {
        return Err(Error::ShapeMismatch(format!("operands of length {a} and {b} need a result of length {}, got {c}", (a + b).saturating_sub(1))));
    }
    Ok(())
}

/// Schoolbook product.
pub fn pm_acc_classic<P: Probe>(f: &FieldCtx, a: &[u64], b: &[u64], c: &mut [u64], sign: Sign, probe: &mut P) -> Result<()> {
    check_lengths(a.len(), b.len(), c.len())?;
    classic(f, a, b, c, sign, probe);
    Ok(())
}

fn classic<P: Probe>(f: &FieldCtx, a: &[u64], b: &[u64], c: &mut [u64], sign: Sign, probe: &mut P) {
    for (i, &ai) in a.iter().enumerate() {
        let ai = sign.apply(f, ai);
        if ai == 0 {
            continue;
        }
        for (cj, &bj) in c[i..].iter_mut().zip(b) {
            *cj = f.mul_add(*cj, ai, bj);
        }
    }
    let work = (a.len() * b.len()) as u64;
    probe.scalar_ops(work, work, 0);
}

/// `dst += sign * src` over the common prefix.
fn add_into<P: Probe>(f: &FieldCtx, dst: &mut [u64], src: &[u64], sign: Sign, probe: &mut P) {
    let n = dst.len().min(src.len());
    for (d, &s) in dst[..n].iter_mut().zip(&src[..n]) {
        *d = match sign {
            Sign::Plus => f.add(*d, s),
            Sign::Minus => f.sub(*d, s),
        };
    }
    probe.scalar_ops(0, n as u64, 0);
}

/// Karatsuba product, in place.
///
/// Operands of equal length use the three-product split with temporary
/// rewrites of the low halves of `A`, `B` and of `C`. Unequal lengths peel
/// off a square part of the longer operand and recurse on both pieces.
/// Products whose shorter operand has at most `threshold` coefficients use
/// the schoolbook loop.
pub fn pm_acc_karatsuba<P: Probe>(
    f: &FieldCtx,
    a: &mut [u64],
    b: &mut [u64],
    c: &mut [u64],
    sign: Sign,
    threshold: usize,
    probe: &mut P,
) -> Result<()> {
    check_lengths(a.len(), b.len(), c.len())?;
    karatsuba(f, a, b, c, sign, threshold, 0, probe);
    Ok(())
}

fn karatsuba<P: Probe>(
    f: &FieldCtx,
    a: &mut [u64],
    b: &mut [u64],
    c: &mut [u64],
    sign: Sign,
    threshold: usize,
    depth: usize,
    probe: &mut P,
) {
    if a.len().min(b.len()) <= threshold.max(1) {
        classic(f, a, b, c, sign, probe);
    } else if a.len() != b.len() {
        unbalanced(f, a, b, c, sign, threshold, depth, probe);
    } else {
        balanced(f, a, b, c, sign, threshold, depth, probe);
    }
}

fn unbalanced<P: Probe>(
    f: &FieldCtx,
    a: &mut [u64],
    b: &mut [u64],
    c: &mut [u64],
    sign: Sign,
    threshold: usize,
    depth: usize,
    probe: &mut P,
) {
    let (long, short) = if a.len() > b.len() { (a, b) } else { (b, a) };
    let s = short.len();
    let (lo, hi) = long.split_at_mut(s);
    karatsuba(f, lo, short, &mut c[..2 * s - 1], sign, threshold, depth + 1, probe);
    karatsuba(f, hi, short, &mut c[s..], sign, threshold, depth + 1, probe);
    probe.level(LevelStat { kind: LevelKind::KaratsubaUnbalanced, depth, size: long.len(), block_adds: 0, calls: 2 });
}

fn balanced<P: Probe>(
    f: &FieldCtx,
    a: &mut [u64],
    b: &mut [u64],
    c: &mut [u64],
    sign: Sign,
    threshold: usize,
    depth: usize,
    probe: &mut P,
) {
    let len = a.len();
    let n = len - 1;
    let d = (2 * n + 1).div_ceil(4);
    debug_assert!(d > n + 1 - d - 1 && d >= (2 * n + 1).saturating_sub(3 * d));
    let total = c.len();
    let rec = |x: &mut [u64], y: &mut [u64], z: &mut [u64], s: Sign, probe: &mut P| {
        karatsuba(f, x, y, z, s, threshold, depth + 1, probe);
    };
    use Sign::{Minus as M, Plus as Pl};

    // Block boundaries of C: c00 = [0, d), c01 = [d, 2d), c10 = [2d, e10),
    // c11 = [e10, total), where the last two may be short.
    let e10 = (3 * d).min(total);
    {
        let (c00, rest) = c.split_at_mut(d);
        let (c01, rest) = rest.split_at_mut(d);
        let (c10, _) = rest.split_at_mut(e10 - 2 * d);
        add_into(f, c01, c00, M, probe);
        add_into(f, c10, c01, M, probe);
    }
    {
        let (a0, _) = a.split_at_mut(d);
        let (b0, _) = b.split_at_mut(d);
        rec(a0, b0, &mut c[..2 * d - 1], sign, probe);
    }
    {
        let (head, c11) = c.split_at_mut(e10);
        add_into(f, c11, &head[2 * d..], M, probe);
    }
    {
        let (_, a1) = a.split_at_mut(d);
        let (_, b1) = b.split_at_mut(d);
        let l1 = a1.len();
        rec(a1, b1, &mut c[d..d + 2 * l1 - 1], sign, probe);
    }
    {
        let (head, c11) = c.split_at_mut(e10);
        add_into(f, c11, &head[2 * d..], Pl, probe);
        let (c00, rest) = head.split_at_mut(d);
        let (c01, c10) = rest.split_at_mut(d);
        add_into(f, c10, c01, Pl, probe);
        add_into(f, c01, c00, Pl, probe);
    }
    {
        let (a0, a1) = a.split_at_mut(d);
        let (b0, b1) = b.split_at_mut(d);
        add_into(f, a0, a1, M, probe);
        add_into(f, b0, b1, M, probe);
        rec(a0, b0, &mut c[d..3 * d - 1], sign.flip(), probe);
        add_into(f, b0, b1, Pl, probe);
        add_into(f, a0, a1, Pl, probe);
    }
    probe.level(LevelStat { kind: LevelKind::KaratsubaBalanced, depth, size: len, block_adds: 10, calls: 3 });
}

/// A precomputed in-place Toom-3 schedule.
///
/// The schedule is the double-width in-place program generated from the
/// five-point Toom-3 formula, run by [`pm_acc_program`] over blocks of a
/// third of the operand length. Its five block products recurse into
/// Karatsuba.
#[derive(Clone, Debug)]
pub struct Toom3Plan {
    program: Program,
}

impl Toom3Plan {
    /// Builds the schedule for the field; fails in characteristic 3.
    pub fn new(f: &FieldCtx) -> Result<Self> {
        let program = generate_inplace_2d(f, &to_2d(&toom3_rep(f)?)?)?;
        check_block_program(&program)?;
        Ok(Toom3Plan { program })
    }

    pub fn program(&self) -> &Program {
        &self.program
    }
}

fn check_block_program(prog: &Program) -> Result<()> {
    let ok = prog.ops().iter().all(|op| match op {
        Op::MulAcc { .. } => false,
        Op::MulAcc2 { lhs, rhs, .. } => lhs.bank == Bank::A && rhs.bank == Bank::B,
        _ => true,
    });
    if !ok {
        return Err(Error::ShapeMismatch("block execution needs double-width products of an A register by a B register".into()));
    }
    Ok(())
}

/// Runs a double-width program over blocks of length `l`.
///
/// Register `k` of a bank is the block `[k·l, (k+1)·l)`. C has one
/// coefficient fewer than its blocks cover; the missing top coefficient
/// lives in `phantom`.
struct BlockMachine<'f, 'x, P: Probe> {
    f: &'f FieldCtx,
    a: &'x mut [u64],
    b: &'x mut [u64],
    c: &'x mut [u64],
    phantom: u64,
    l: usize,
    sign: Sign,
    threshold: usize,
    depth: usize,
    adds: u32,
    calls: u32,
    probe: &'x mut P,
}

impl<P: Probe> BlockMachine<'_, '_, P> {
    fn get(&self, r: Reg, i: usize) -> u64 {
        let k = r.index * self.l + i;
        match r.bank {
            Bank::A => self.a[k],
            Bank::B => self.b[k],
            Bank::C => self.c.get(k).copied().unwrap_or(self.phantom),
        }
    }

    fn slot(&mut self, r: Reg, i: usize) -> &mut u64 {
        let k = r.index * self.l + i;
        match r.bank {
            Bank::A => &mut self.a[k],
            Bank::B => &mut self.b[k],
            Bank::C if k < self.c.len() => &mut self.c[k],
            Bank::C => &mut self.phantom,
        }
    }

    fn map(&mut self, dst: Reg, op: impl Fn(&FieldCtx, u64) -> u64) {
        let f = self.f;
        for i in 0..self.l {
            let d = self.slot(dst, i);
            *d = op(f, *d);
        }
    }
}

impl<P: Probe> Machine for BlockMachine<'_, '_, P> {
    fn add_mul(&mut self, dst: Reg, src: Reg, coeff: FieldElement) {
        let f = self.f;
        for i in 0..self.l {
            let v = f.mul(coeff, self.get(src, i));
            let d = self.slot(dst, i);
            *d = f.add(*d, v);
        }
        self.adds += 1;
        let unit = coeff == 1 || coeff == f.modulus() - 1;
        self.probe.scalar_ops(0, self.l as u64, if unit { 0 } else { self.l as u64 });
    }

    fn scale(&mut self, dst: Reg, coeff: FieldElement) {
        self.map(dst, |f, x| f.mul(x, coeff));
        self.probe.scalar_ops(0, 0, self.l as u64);
    }

    fn scale_inv(&mut self, dst: Reg, coeff: FieldElement) -> Result<()> {
        let inv = self.f.inv(coeff)?;
        self.scale(dst, inv);
        Ok(())
    }

    fn swap(&mut self, x: Reg, y: Reg) {
        for i in 0..self.l {
            let (vx, vy) = (self.get(x, i), self.get(y, i));
            *self.slot(x, i) = vy;
            *self.slot(y, i) = vx;
        }
    }

    fn mul_acc(&mut self, _dst: Reg, _lhs: Reg, _rhs: Reg) {
        unreachable!("check_block_program rejects single-width products")
    }

    fn mul_acc2(&mut self, lo: Reg, hi: Reg, lhs: Reg, rhs: Reg) {
        let l = self.l;
        self.calls += 1;
        let x = &mut self.a[lhs.index * l..(lhs.index + 1) * l];
        let y = &mut self.b[rhs.index * l..(rhs.index + 1) * l];
        if hi.index == lo.index + 1 {
            let start = lo.index * l;
            let z = &mut self.c[start..start + 2 * l - 1];
            karatsuba(self.f, x, y, z, self.sign, self.threshold, self.depth + 1, self.probe);
        } else {
            let f = self.f;
            for (i, &xv) in x.iter().enumerate() {
                let xi = self.sign.apply(f, xv);
                for (j, &yv) in y.iter().enumerate() {
                    let v = f.mul(xi, yv);
                    let (blk, off) = if i + j < l { (lo.index, i + j) } else { (hi.index, i + j - l) };
                    let k = blk * l + off;
                    let d = if k < self.c.len() { &mut self.c[k] } else { &mut self.phantom };
                    *d = f.add(*d, v);
                }
            }
            self.probe.scalar_ops((l * l) as u64, (l * l) as u64, 0);
        }
    }
}

/// Runs a double-width program over polynomial blocks: `C += sign * P(A, B)`.
///
/// With bank sizes `(m, n, s)` and block length `l`, `A` holds `m·l`
/// coefficients, `B` holds `n·l` and `C` holds `s·l - 1`. Each
/// `(lo, hi) += x*y` adds the `2l - 1` coefficients of the block product,
/// the low `l` to `lo` and the rest to `hi`; adjacent pairs are multiplied
/// in place by Karatsuba.
pub fn pm_acc_program<P: Probe>(
    prog: &Program,
    f: &FieldCtx,
    a: &mut [u64],
    b: &mut [u64],
    c: &mut [u64],
    sign: Sign,
    threshold: usize,
    probe: &mut P,
) -> Result<()> {
    run_blocks(prog, f, a, b, c, sign, threshold, probe).map(|_| ())
}

fn run_blocks<P: Probe>(
    prog: &Program,
    f: &FieldCtx,
    a: &mut [u64],
    b: &mut [u64],
    c: &mut [u64],
    sign: Sign,
    threshold: usize,
    probe: &mut P,
) -> Result<(u32, u32)> {
    if f.modulus() != prog.modulus() {
        return Err(Error::ShapeMismatch(format!("program is for modulus {}, field is {}", prog.modulus(), f.modulus())));
    }
    check_block_program(prog)?;
    let (m, n, s) = prog.sizes();
    let l = a.len() / m.max(1);
    if l == 0 || a.len() != m * l || b.len() != n * l || c.len() + 1 != s * l {
        return Err(Error::ShapeMismatch(format!(
            "banks ({m}, {n}, {s}) need lengths (m·l, n·l, s·l - 1) for one block length l; got {}, {}, {}",
            a.len(),
            b.len(),
            c.len()
        )));
    }
    let mut mach = BlockMachine { f, a, b, c, phantom: 0, l, sign, threshold, depth: 0, adds: 0, calls: 0, probe };
    run(prog, &mut mach)?;
    if mach.phantom != 0 {
        return Err(Error::ShapeMismatch("program left a value above the top coefficient of C".into()));
    }
    Ok((mach.adds, mach.calls))
}

/// One level of in-place Toom-3 on operands of equal length divisible by 3.
///
/// Needs characteristic above 3. Block products use [`pm_acc_karatsuba`]
/// with the given threshold.
pub fn pm_acc_toom3<P: Probe>(
    plan: &Toom3Plan,
    f: &FieldCtx,
    a: &mut [u64],
    b: &mut [u64],
    c: &mut [u64],
    sign: Sign,
    threshold: usize,
    probe: &mut P,
) -> Result<()> {
    if f.modulus() <= 3 {
        return Err(Error::UnsupportedCharacteristic(f.modulus()));
    }
    check_lengths(a.len(), b.len(), c.len())?;
    if a.len() != b.len() || a.len() % 3 != 0 {
        return Err(Error::ShapeMismatch(format!("Toom-3 needs equal lengths divisible by 3, got {} and {}", a.len(), b.len())));
    }
    let size = a.len();
    let (adds, calls) = run_blocks(&plan.program, f, a, b, c, sign, threshold, probe)?;
    probe.level(LevelStat { kind: LevelKind::Toom3, depth: 0, size, block_adds: adds, calls });
    Ok(())
}
