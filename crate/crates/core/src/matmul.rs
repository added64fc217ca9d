//! In-place accumulating matrix kernels.
//!
//! All kernels work on strided views into caller-owned storage and use no
//! temporary blocks. The recursive kernels temporarily overwrite quadrants
//! of their inputs with linear combinations and unwind them before
//! returning, so inputs compare bit-equal before and after a call.

use std::marker::PhantomData;

use crate::error::{Error, Result};
use crate::field::{FieldCtx, SkewUnitaryPair};
use crate::probe::{LevelKind, LevelStat, Probe};
use crate::Sign;

/// Default recursion threshold: blocks of this order or smaller use the
/// classical product.
pub const DEFAULT_THRESHOLD: usize = 8;

/// Read-only strided view of a matrix.
#[derive(Clone, Copy, Debug)]
pub struct MatRef<'a> {
    ptr: *const u64,
    rows: usize,
    cols: usize,
    rs: isize,
    cs: isize,
    _life: PhantomData<&'a u64>,
}

/// Mutable strided view of a matrix.
#[derive(Debug)]
pub struct MatMut<'a> {
    ptr: *mut u64,
    rows: usize,
    cols: usize,
    rs: isize,
    cs: isize,
    _life: PhantomData<&'a mut u64>,
}

// SAFETY: the views behave like `&[u64]` and `&mut [u64]` respectively.
unsafe impl Send for MatRef<'_> {}
unsafe impl Sync for MatRef<'_> {}
unsafe impl Send for MatMut<'_> {}

fn check_len(len: usize, rows: usize, cols: usize, row_stride: usize) -> Result<()> {
    let needed = if rows == 0 || cols == 0 { 0 } else { (rows - 1) * row_stride + cols };
    if cols > row_stride && rows > 1 {
        return Err(Error::ShapeMismatch(format!("row stride {row_stride} is below the column count {cols}")));
    }
    if needed > len {
        return Err(Error::ShapeMismatch(format!("{rows}x{cols} view with stride {row_stride} needs {needed} elements, have {len}")));
    }
    Ok(())
}

impl<'a> MatRef<'a> {
    /// Row-major view of `rows * cols` elements.
    pub fn from_slice(data: &'a [u64], rows: usize, cols: usize) -> Result<Self> {
        Self::from_slice_strided(data, rows, cols, cols)
    }

    pub fn from_slice_strided(data: &'a [u64], rows: usize, cols: usize, row_stride: usize) -> Result<Self> {
        check_len(data.len(), rows, cols, row_stride)?;
        Ok(MatRef { ptr: data.as_ptr(), rows, cols, rs: row_stride as isize, cs: 1, _life: PhantomData })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u64 {
        assert!(i < self.rows && j < self.cols);
        // SAFETY: in bounds by the assertion and the construction invariant.
        unsafe { *self.ptr.offset(i as isize * self.rs + j as isize * self.cs) }
    }

    pub fn transpose(self) -> MatRef<'a> {
        MatRef { ptr: self.ptr, rows: self.cols, cols: self.rows, rs: self.cs, cs: self.rs, _life: PhantomData }
    }

    /// Sub-view of `rows x cols` starting at `(i, j)`.
    pub fn sub(self, i: usize, j: usize, rows: usize, cols: usize) -> MatRef<'a> {
        assert!(i + rows <= self.rows && j + cols <= self.cols);
        // SAFETY: the sub-rectangle lies inside the parent view.
        let ptr = unsafe { self.ptr.offset(i as isize * self.rs + j as isize * self.cs) };
        MatRef { ptr, rows, cols, rs: self.rs, cs: self.cs, _life: PhantomData }
    }

    /// Copies the view into a row-major vector.
    pub fn to_vec(&self) -> Vec<u64> {
        (0..self.rows).flat_map(|i| (0..self.cols).map(move |j| self.get(i, j))).collect()
    }
}

impl<'a> MatMut<'a> {
    pub fn from_slice(data: &'a mut [u64], rows: usize, cols: usize) -> Result<Self> {
        Self::from_slice_strided(data, rows, cols, cols)
    }

    pub fn from_slice_strided(data: &'a mut [u64], rows: usize, cols: usize, row_stride: usize) -> Result<Self> {
        check_len(data.len(), rows, cols, row_stride)?;
        Ok(MatMut { ptr: data.as_mut_ptr(), rows, cols, rs: row_stride as isize, cs: 1, _life: PhantomData })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Shorter-lived mutable view of the same elements.
    pub fn rb(&mut self) -> MatMut<'_> {
        MatMut { ptr: self.ptr, rows: self.rows, cols: self.cols, rs: self.rs, cs: self.cs, _life: PhantomData }
    }

    pub fn as_ref(&self) -> MatRef<'_> {
        MatRef { ptr: self.ptr, rows: self.rows, cols: self.cols, rs: self.rs, cs: self.cs, _life: PhantomData }
    }

    #[inline]
    fn at(&mut self, i: usize, j: usize) -> &mut u64 {
        assert!(i < self.rows && j < self.cols);
        // SAFETY: in bounds by the assertion and the construction invariant.
        unsafe { &mut *self.ptr.offset(i as isize * self.rs + j as isize * self.cs) }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.as_ref().get(i, j)
    }

    pub fn set(&mut self, i: usize, j: usize, v: u64) {
        *self.at(i, j) = v;
    }

    pub fn transpose(self) -> MatMut<'a> {
        MatMut { ptr: self.ptr, rows: self.cols, cols: self.rows, rs: self.cs, cs: self.rs, _life: PhantomData }
    }

    /// Splits into four disjoint views at row `r` and column `c`:
    /// `[top-left, top-right, bottom-left, bottom-right]`.
    pub fn split_at(self, r: usize, c: usize) -> [MatMut<'a>; 4] {
        assert!(r <= self.rows && c <= self.cols);
        let at = |i: usize, j: usize, rows: usize, cols: usize| MatMut {
            // SAFETY: each quadrant is a disjoint sub-rectangle of the parent.
            ptr: unsafe { self.ptr.offset(i as isize * self.rs + j as isize * self.cs) },
            rows,
            cols,
            rs: self.rs,
            cs: self.cs,
            _life: PhantomData,
        };
        let (r2, c2) = (self.rows - r, self.cols - c);
        [at(0, 0, r, c), at(0, c, r, c2), at(r, 0, r2, c), at(r, c, r2, c2)]
    }

    /// Quadrants of a view with even dimensions.
    pub fn quadrants(self) -> [MatMut<'a>; 4] {
        let (r, c) = (self.rows / 2, self.cols / 2);
        self.split_at(r, c)
    }

    /// Splits into left and right column blocks.
    pub fn split_cols(self, c: usize) -> (MatMut<'a>, MatMut<'a>) {
        let rows = self.rows;
        let [l, r, _, _] = self.split_at(rows, c);
        (l, r)
    }
}

fn count_add<P: Probe>(probe: &mut P, rows: usize, cols: usize) {
    probe.scalar_ops(0, (rows * cols) as u64, 0);
}

/// `dst += sign * src` elementwise.
fn add_assign<P: Probe>(f: &FieldCtx, mut dst: MatMut<'_>, src: MatRef<'_>, sign: Sign, probe: &mut P) {
    debug_assert_eq!((dst.rows, dst.cols), (src.rows, src.cols));
    for i in 0..dst.rows {
        for j in 0..dst.cols {
            let d = dst.at(i, j);
            *d = match sign {
                Sign::Plus => f.add(*d, src.get(i, j)),
                Sign::Minus => f.sub(*d, src.get(i, j)),
            };
        }
    }
    count_add(probe, dst.rows, dst.cols);
}

/// Counts block additions of one recursion node.
#[derive(Default)]
struct Tally {
    adds: u32,
    calls: u32,
}

impl Tally {
    fn add<P: Probe>(&mut self, f: &FieldCtx, dst: MatMut<'_>, src: MatRef<'_>, sign: Sign, probe: &mut P) {
        self.adds += 1;
        add_assign(f, dst, src, sign, probe);
    }

    fn finish<P: Probe>(self, kind: LevelKind, depth: usize, size: usize, probe: &mut P) {
        probe.level(LevelStat { kind, depth, size, block_adds: self.adds, calls: self.calls });
    }
}

/// `C += sign * A * B` by the classical triple loop.
pub fn mm_acc_classic<P: Probe>(
    f: &FieldCtx,
    a: MatRef<'_>,
    b: MatRef<'_>,
    c: MatMut<'_>,
    sign: Sign,
    probe: &mut P,
) -> Result<()> {
    if a.cols != b.rows || c.rows != a.rows || c.cols != b.cols {
        return Err(Error::ShapeMismatch(format!(
            "({}x{}) * ({}x{}) into {}x{}",
            a.rows, a.cols, b.rows, b.cols, c.rows, c.cols
        )));
    }
    classic(f, a, b, c, sign, probe);
    Ok(())
}

fn classic<P: Probe>(f: &FieldCtx, a: MatRef<'_>, b: MatRef<'_>, mut c: MatMut<'_>, sign: Sign, probe: &mut P) {
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = sign.apply(f, a.get(i, k));
            if aik == 0 {
                continue;
            }
            for j in 0..b.cols {
                let d = c.at(i, j);
                *d = f.mul_add(*d, aik, b.get(k, j));
            }
        }
    }
    let work = (a.rows * a.cols * b.cols) as u64;
    probe.scalar_ops(work, work, 0);
}

fn check_square(a: (usize, usize), b: (usize, usize), c: (usize, usize)) -> Result<usize> {
    let n = a.0;
    if [a, b, c].iter().any(|&(r, k)| r != n || k != n) {
        return Err(Error::ShapeMismatch(format!("expected three {n}x{n} matrices, got {a:?}, {b:?}, {c:?}")));
    }
    Ok(n)
}

/// `C += sign * A * B` for square matrices by in-place Strassen-Winograd.
///
/// Recurses while the order is even and above `threshold`; below that, or
/// on odd orders, uses the classical product. Each level performs 18 block
/// additions and 7 recursive products, and leaves `A` and `B` unchanged.
pub fn mm_acc_strassen<P: Probe>(
    f: &FieldCtx,
    a: MatMut<'_>,
    b: MatMut<'_>,
    c: MatMut<'_>,
    sign: Sign,
    threshold: usize,
    probe: &mut P,
) -> Result<()> {
    check_square((a.rows, a.cols), (b.rows, b.cols), (c.rows, c.cols))?;
    strassen(f, a, b, c, sign, threshold, 0, probe);
    Ok(())
}

fn strassen<P: Probe>(
    f: &FieldCtx,
    a: MatMut<'_>,
    b: MatMut<'_>,
    c: MatMut<'_>,
    sign: Sign,
    threshold: usize,
    depth: usize,
    probe: &mut P,
) {
    let n = a.rows;
    if n % 2 != 0 || n <= threshold.max(1) {
        classic(f, a.as_ref(), b.as_ref(), c, sign, probe);
        return;
    }
    let [mut a11, mut a12, mut a21, mut a22] = a.quadrants();
    let [mut b11, mut b12, mut b21, mut b22] = b.quadrants();
    let [mut c11, mut c12, mut c21, mut c22] = c.quadrants();
    let (pos, neg) = (sign, sign.flip());
    let mut t = Tally::default();
    let mul = |t: &mut Tally, x: MatMut<'_>, y: MatMut<'_>, z: MatMut<'_>, s: Sign, probe: &mut P| {
        t.calls += 1;
        strassen(f, x, y, z, s, threshold, depth + 1, probe);
    };
    use Sign::{Minus as M, Plus as Pl};

    t.add(f, a21.rb(), a11.as_ref(), M, probe);
    t.add(f, b12.rb(), b22.as_ref(), M, probe);
    t.add(f, c21.rb(), c22.as_ref(), M, probe);
    mul(&mut t, a21.rb(), b12.rb(), c22.rb(), pos, probe);
    t.add(f, a21.rb(), a22.as_ref(), Pl, probe);
    t.add(f, b12.rb(), b11.as_ref(), M, probe);
    t.add(f, c12.rb(), c22.as_ref(), M, probe);
    mul(&mut t, a21.rb(), b12.rb(), c22.rb(), neg, probe);
    t.add(f, c11.rb(), c22.as_ref(), M, probe);
    mul(&mut t, a11.rb(), b11.rb(), c22.rb(), pos, probe);
    t.add(f, c11.rb(), c22.as_ref(), Pl, probe);
    t.add(f, b12.rb(), b21.as_ref(), Pl, probe);
    t.add(f, c21.rb(), c22.as_ref(), Pl, probe);
    mul(&mut t, a22.rb(), b12.rb(), c21.rb(), pos, probe);
    t.add(f, b12.rb(), b22.as_ref(), Pl, probe);
    t.add(f, b12.rb(), b21.as_ref(), M, probe);
    t.add(f, a21.rb(), a12.as_ref(), M, probe);
    mul(&mut t, a21.rb(), b22.rb(), c12.rb(), neg, probe);
    t.add(f, a21.rb(), a12.as_ref(), Pl, probe);
    t.add(f, a21.rb(), a11.as_ref(), Pl, probe);
    mul(&mut t, a21.rb(), b12.rb(), c22.rb(), pos, probe);
    t.add(f, c12.rb(), c22.as_ref(), Pl, probe);
    t.add(f, b12.rb(), b11.as_ref(), Pl, probe);
    t.add(f, a21.rb(), a22.as_ref(), M, probe);
    mul(&mut t, a12.rb(), b21.rb(), c11.rb(), pos, probe);

    t.finish(LevelKind::Strassen, depth, n, probe);
}

/// `C += sign * A^2` by the in-place Strassen-Winograd square schedule:
/// four recursive squares and three general products per level.
pub fn square_acc<P: Probe>(
    f: &FieldCtx,
    a: MatMut<'_>,
    c: MatMut<'_>,
    sign: Sign,
    threshold: usize,
    probe: &mut P,
) -> Result<()> {
    check_square((a.rows, a.cols), (a.rows, a.cols), (c.rows, c.cols))?;
    square(f, a, c, sign, threshold, 0, probe);
    Ok(())
}

fn square<P: Probe>(
    f: &FieldCtx,
    a: MatMut<'_>,
    c: MatMut<'_>,
    sign: Sign,
    threshold: usize,
    depth: usize,
    probe: &mut P,
) {
    let n = a.rows;
    if n % 2 != 0 || n <= threshold.max(1) {
        classic(f, a.as_ref(), a.as_ref(), c, sign, probe);
        return;
    }
    let [mut a11, mut a12, mut a21, mut a22] = a.quadrants();
    let [mut c11, mut c12, mut c21, mut c22] = c.quadrants();
    let (pos, neg) = (sign, sign.flip());
    let mut t = Tally::default();
    use Sign::{Minus as M, Plus as Pl};
    let sq = |t: &mut Tally, x: MatMut<'_>, z: MatMut<'_>, s: Sign, probe: &mut P| {
        t.calls += 1;
        square(f, x, z, s, threshold, depth + 1, probe);
    };
    let mm = |t: &mut Tally, x: MatMut<'_>, y: MatMut<'_>, z: MatMut<'_>, s: Sign, probe: &mut P| {
        t.calls += 1;
        strassen(f, x, y, z, s, threshold, depth + 1, probe);
    };

    t.add(f, a22.rb(), a21.as_ref(), M, probe);
    t.add(f, c12.rb(), c22.as_ref(), Pl, probe);
    sq(&mut t, a22.rb(), c22.rb(), pos, probe);
    t.add(f, a22.rb(), a12.as_ref(), Pl, probe);
    t.add(f, a22.rb(), a11.as_ref(), M, probe);
    mm(&mut t, a22.rb(), a12.rb(), c12.rb(), neg, probe);
    mm(&mut t, a21.rb(), a22.rb(), c21.rb(), neg, probe);
    t.add(f, c21.rb(), c22.as_ref(), M, probe);
    t.add(f, a22.rb(), a11.as_ref(), Pl, probe);
    sq(&mut t, a22.rb(), c22.rb(), neg, probe);
    t.add(f, c11.rb(), c22.as_ref(), Pl, probe);
    mm(&mut t, a12.rb(), a21.rb(), c22.rb(), neg, probe);
    t.add(f, a22.rb(), a21.as_ref(), Pl, probe);
    t.add(f, c12.rb(), c22.as_ref(), M, probe);
    t.add(f, c11.rb(), c22.as_ref(), M, probe);
    sq(&mut t, a22.rb(), c22.rb(), pos, probe);
    t.add(f, a22.rb(), a12.as_ref(), M, probe);
    t.add(f, c21.rb(), c22.as_ref(), Pl, probe);
    sq(&mut t, a11.rb(), c11.rb(), pos, probe);

    t.finish(LevelKind::Square, depth, n, probe);
}

/// `(U1, U2) <- (a U1 + b U2, -b U1 + a U2)` elementwise, or the inverse map.
///
/// Runs `u1 *= a; u1 += b u2; u2 *= y; u2 += x u1` with `x = -b/a` and
/// `y = a + b^2/a`; the inverse runs the steps backwards.
pub fn apply_skew_unitary<P: Probe>(
    f: &FieldCtx,
    mut u1: MatMut<'_>,
    mut u2: MatMut<'_>,
    y: SkewUnitaryPair,
    inverse: bool,
    probe: &mut P,
) -> Result<()> {
    if (u1.rows, u1.cols) != (u2.rows, u2.cols) {
        return Err(Error::ShapeMismatch("skew-unitary halves differ in shape".into()));
    }
    let SkewUnitaryPair { a, b } = y;
    let a_inv = f.inv(a)?;
    let x = f.neg(f.mul(b, a_inv));
    let yy = f.add(a, f.mul(f.mul(b, b), a_inv));
    let yy_inv = f.inv(yy)?;
    for i in 0..u1.rows {
        for j in 0..u1.cols {
            let (mut p, mut q) = (u1.get(i, j), u2.get(i, j));
            if inverse {
                q = f.sub(q, f.mul(x, p));
                q = f.mul(q, yy_inv);
                p = f.sub(p, f.mul(b, q));
                p = f.mul(p, a_inv);
            } else {
                p = f.mul(p, a);
                p = f.mul_add(p, b, q);
                q = f.mul(q, yy);
                q = f.mul_add(q, x, p);
            }
            u1.set(i, j, p);
            u2.set(i, j, q);
        }
    }
    let e = (u1.rows * u1.cols) as u64;
    probe.scalar_ops(0, 2 * e, 4 * e);
    Ok(())
}

/// Scales a block by `a` (or `1/a`), the skew-unitary map when `b = 0`.
fn scale_block<P: Probe>(f: &FieldCtx, mut x: MatMut<'_>, s: u64, probe: &mut P) {
    for i in 0..x.rows {
        for j in 0..x.cols {
            let d = x.at(i, j);
            *d = f.mul(*d, s);
        }
    }
    probe.scalar_ops(0, 0, (x.rows * x.cols) as u64);
}

/// Right-multiplies a block by the skew-unitary matrix `Y` (or `Y^-1`),
/// where `Y` acts on the two column halves.
fn apply_y<P: Probe>(f: &FieldCtx, x: MatMut<'_>, y: SkewUnitaryPair, inverse: bool, probe: &mut P) {
    if y.b == 0 {
        let s = if inverse { f.inv(y.a).expect("a != 0") } else { y.a };
        scale_block(f, x, s, probe);
    } else {
        let q = x.cols / 2;
        let (u1, u2) = x.split_cols(q);
        apply_skew_unitary(f, u1, u2, y, inverse, probe).expect("a != 0 and halves match");
    }
}

/// `Low(dst) += sign * Low(src)`, diagonal included.
fn low_add<P: Probe>(f: &FieldCtx, mut dst: MatMut<'_>, src: MatRef<'_>, sign: Sign, probe: &mut P) {
    for i in 0..dst.rows {
        for j in 0..=i.min(dst.cols.saturating_sub(1)) {
            let d = dst.at(i, j);
            *d = f.add(*d, sign.apply(f, src.get(i, j)));
        }
    }
    count_add(probe, dst.rows * (dst.rows + 1) / 2, 1);
}

/// `Up(dst) += sign * Up(src)`, diagonal excluded.
fn up_add<P: Probe>(f: &FieldCtx, mut dst: MatMut<'_>, src: MatRef<'_>, sign: Sign, probe: &mut P) {
    for i in 0..dst.rows {
        for j in i + 1..dst.cols {
            let d = dst.at(i, j);
            *d = f.add(*d, sign.apply(f, src.get(i, j)));
        }
    }
    count_add(probe, dst.rows * dst.rows.saturating_sub(1) / 2, 1);
}

/// `Up(x) += sign * Up(Low(x)^T)`: mirrors the strict lower triangle of a
/// square block onto its strict upper triangle.
fn mirror_low_to_up<P: Probe>(f: &FieldCtx, mut x: MatMut<'_>, sign: Sign, probe: &mut P) {
    for i in 0..x.rows {
        for j in i + 1..x.cols {
            let v = sign.apply(f, x.get(j, i));
            let d = x.at(i, j);
            *d = f.add(*d, v);
        }
    }
    count_add(probe, x.rows * x.rows.saturating_sub(1) / 2, 1);
}

fn syrk_classic<P: Probe>(f: &FieldCtx, a: MatRef<'_>, mut c: MatMut<'_>, sign: Sign, probe: &mut P) {
    for i in 0..a.rows {
        for j in 0..=i {
            let mut acc = 0;
            for k in 0..a.cols {
                acc = f.mul_add(acc, a.get(i, k), a.get(j, k));
            }
            let d = c.at(i, j);
            *d = f.add(*d, sign.apply(f, acc));
        }
    }
    let work = (a.rows * (a.rows + 1) / 2 * a.cols) as u64;
    probe.scalar_ops(work, work, 0);
}

/// `Low(C) += sign * Low(A A^T)` for `A` of shape `m × 2n` and square `C`.
///
/// Recurses while `m` is even and above `threshold` and the column halves
/// can carry the skew-unitary map `y`. Only the lower triangle of `C`
/// (diagonal included) is read or written. `A` is restored.
pub fn syrk_acc<P: Probe>(
    f: &FieldCtx,
    a: MatMut<'_>,
    c: MatMut<'_>,
    y: SkewUnitaryPair,
    sign: Sign,
    threshold: usize,
    probe: &mut P,
) -> Result<()> {
    if c.rows != c.cols || c.rows != a.rows {
        return Err(Error::ShapeMismatch(format!("A is {}x{}, C is {}x{}", a.rows, a.cols, c.rows, c.cols)));
    }
    let p = f.modulus();
    if y.a == 0 || f.add(f.add(f.mul(y.a, y.a), f.mul(y.b, y.b)), 1) != 0 || y.a >= p || y.b >= p {
        return Err(Error::ShapeMismatch(format!("({}, {}) is not a skew-unitary pair mod {p}", y.a, y.b)));
    }
    syrk(f, a, c, y, sign, threshold, 0, probe);
    Ok(())
}

fn syrk_splits(m: usize, cols: usize, y: SkewUnitaryPair, threshold: usize) -> bool {
    let n = cols / 2;
    m % 2 == 0 && m > threshold.max(1) && cols % 2 == 0 && n > 0 && (y.b == 0 || n % 2 == 0)
}

/// Product of `h × n` by `(h × n)^T` into an `h × h` block.
fn mm_nt<P: Probe>(
    f: &FieldCtx,
    x: MatMut<'_>,
    z: MatMut<'_>,
    out: MatMut<'_>,
    sign: Sign,
    threshold: usize,
    depth: usize,
    probe: &mut P,
) {
    if x.rows == x.cols {
        strassen(f, x, z.transpose(), out, sign, threshold, depth, probe);
    } else {
        classic(f, x.as_ref(), z.as_ref().transpose(), out, sign, probe);
    }
}

fn syrk<P: Probe>(
    f: &FieldCtx,
    a: MatMut<'_>,
    c: MatMut<'_>,
    y: SkewUnitaryPair,
    sign: Sign,
    threshold: usize,
    depth: usize,
    probe: &mut P,
) {
    let m = a.rows;
    if !syrk_splits(m, a.cols, y, threshold) {
        syrk_classic(f, a.as_ref(), c, sign, probe);
        return;
    }
    let [mut a11, mut a12, mut a21, mut a22] = a.quadrants();
    let [mut c11, _c12, mut c21, mut c22] = c.quadrants();
    let (pos, neg) = (sign, sign.flip());
    use Sign::{Minus as M, Plus as Pl};
    let mut t = Tally::default();
    let rec = |t: &mut Tally, x: MatMut<'_>, z: MatMut<'_>, probe: &mut P| {
        t.calls += 1;
        syrk(f, x, z, y, pos, threshold, depth + 1, probe);
    };

    // P1 = A11 A11^T, distributed to C11, C21 and C22.
    t.adds += 3;
    low_add(f, c22.rb(), c11.as_ref(), M, probe);
    low_add(f, c21.rb(), c11.as_ref(), M, probe);
    up_add(f, c21.rb(), c11.as_ref().transpose(), M, probe);
    rec(&mut t, a11.rb(), c11.rb(), probe);
    t.adds += 3;
    up_add(f, c21.rb(), c11.as_ref().transpose(), Pl, probe);
    low_add(f, c21.rb(), c11.as_ref(), Pl, probe);
    low_add(f, c22.rb(), c11.as_ref(), Pl, probe);

    // P2 = A12 A12^T into C11.
    rec(&mut t, a12.rb(), c11.rb(), probe);

    // A11 <- -S1 = (A11 - A21) Y,  A21 <- -S2 = A21 Y - A22.
    apply_y(f, a11.rb(), y, false, probe);
    apply_y(f, a21.rb(), y, false, probe);
    t.add(f, a11.rb(), a21.as_ref(), M, probe);
    t.add(f, a21.rb(), a22.as_ref(), M, probe);

    // P4 = S1 S2^T into C21, with its transpose into C22.
    t.adds += 2;
    low_add(f, c22.rb(), c21.as_ref(), M, probe);
    low_add(f, c22.rb(), c21.as_ref().transpose(), M, probe);
    t.calls += 1;
    mm_nt(f, a11.rb(), a21.rb(), c21.rb(), pos, threshold, depth + 1, probe);
    t.adds += 1;
    low_add(f, c22.rb(), c21.as_ref().transpose(), Pl, probe);

    // P5 = S3 S3^T with A11 <- -S3 = -S1 + A22.
    t.add(f, a11.rb(), a22.as_ref(), Pl, probe);
    t.adds += 1;
    mirror_low_to_up(f, c21.rb(), M, probe);
    rec(&mut t, a11.rb(), c21.rb(), probe);
    t.adds += 2;
    mirror_low_to_up(f, c21.rb(), Pl, probe);
    low_add(f, c22.rb(), c21.as_ref(), Pl, probe);

    // P3 = A22 S4^T with A11 <- -S4 = -S3 - A12.
    t.add(f, a11.rb(), a12.as_ref(), M, probe);
    t.calls += 1;
    mm_nt(f, a22.rb(), a11.rb(), c21.rb(), neg, threshold, depth + 1, probe);

    // Restore A.
    t.add(f, a11.rb(), a12.as_ref(), Pl, probe);
    t.add(f, a11.rb(), a22.as_ref(), M, probe);
    t.add(f, a21.rb(), a22.as_ref(), Pl, probe);
    t.add(f, a11.rb(), a21.as_ref(), Pl, probe);
    apply_y(f, a21.rb(), y, true, probe);
    apply_y(f, a11.rb(), y, true, probe);

    t.finish(LevelKind::Syrk, depth, m, probe);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe::Trace;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Triple loop on plain vectors, independent of the view machinery.
    fn oracle(p: u64, a: &[u64], b: &[u64], c: &[u64], m: usize, k: usize, n: usize) -> Vec<u64> {
        let mut out = c.to_vec();
        for i in 0..m {
            for j in 0..n {
                let mut acc = out[i * n + j] as u128;
                for l in 0..k {
                    acc += a[i * k + l] as u128 * b[l * n + j] as u128;
                }
                out[i * n + j] = (acc % p as u128) as u64;
            }
        }
        out
    }

    fn rand_vec(rng: &mut ChaCha8Rng, len: usize, p: u64) -> Vec<u64> {
        (0..len).map(|_| rng.gen_range(0..p)).collect()
    }

    #[test]
    fn classic_examples() {
        let f = FieldCtx::new(7).unwrap();
        let mut c = vec![1];
        mm_acc_classic(&f, MatRef::from_slice(&[2], 1, 1).unwrap(), MatRef::from_slice(&[3], 1, 1).unwrap(), MatMut::from_slice(&mut c, 1, 1).unwrap(), Sign::Plus, &mut ()).unwrap();
        assert_eq!(c, vec![0]);
        let id = [1, 0, 0, 1];
        let b = [3, 4, 5, 6];
        let mut c = vec![1, 1, 1, 1];
        mm_acc_classic(&f, MatRef::from_slice(&id, 2, 2).unwrap(), MatRef::from_slice(&b, 2, 2).unwrap(), MatMut::from_slice(&mut c, 2, 2).unwrap(), Sign::Plus, &mut ()).unwrap();
        assert_eq!(c, vec![4, 5, 6, 0]);
        let bad = mm_acc_classic(&f, MatRef::from_slice(&id, 2, 2).unwrap(), MatRef::from_slice(&b, 1, 4).unwrap(), MatMut::from_slice(&mut c, 2, 2).unwrap(), Sign::Plus, &mut ());
        assert!(matches!(bad, Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn classic_matches_oracle_rectangular() {
        let f = FieldCtx::new(101).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (m, k, n) in [(3, 3, 3), (2, 5, 4), (7, 1, 3)] {
            let a = rand_vec(&mut rng, m * k, 101);
            let b = rand_vec(&mut rng, k * n, 101);
            let mut c = rand_vec(&mut rng, m * n, 101);
            let want = oracle(101, &a, &b, &c, m, k, n);
            mm_acc_classic(&f, MatRef::from_slice(&a, m, k).unwrap(), MatRef::from_slice(&b, k, n).unwrap(), MatMut::from_slice(&mut c, m, n).unwrap(), Sign::Plus, &mut ()).unwrap();
            assert_eq!(c, want);
        }
    }

    #[test]
    fn strassen_standard_basis() {
        let f = FieldCtx::new(101).unwrap();
        for ai in 0..4 {
            for bi in 0..4 {
                let mut a = vec![0; 4];
                let mut b = vec![0; 4];
                a[ai] = 1;
                b[bi] = 1;
                let want = oracle(101, &a, &b, &[0; 4], 2, 2, 2);
                let mut c = vec![0; 4];
                mm_acc_strassen(&f, MatMut::from_slice(&mut a, 2, 2).unwrap(), MatMut::from_slice(&mut b, 2, 2).unwrap(), MatMut::from_slice(&mut c, 2, 2).unwrap(), Sign::Plus, 1, &mut ()).unwrap();
                assert_eq!(c, want);
            }
        }
    }

    #[test]
    fn strassen_random_and_sign_duality() {
        let p = 65521;
        let f = FieldCtx::new(p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [1, 2, 3, 4, 6, 8, 12, 16, 64] {
            for threshold in [1, 2, 8] {
                let a0 = rand_vec(&mut rng, n * n, p);
                let b0 = rand_vec(&mut rng, n * n, p);
                let c0 = rand_vec(&mut rng, n * n, p);
                let (mut a, mut b, mut c) = (a0.clone(), b0.clone(), c0.clone());
                mm_acc_strassen(&f, MatMut::from_slice(&mut a, n, n).unwrap(), MatMut::from_slice(&mut b, n, n).unwrap(), MatMut::from_slice(&mut c, n, n).unwrap(), Sign::Plus, threshold, &mut ()).unwrap();
                assert_eq!((&a, &b), (&a0, &b0));
                assert_eq!(c, oracle(p, &a0, &b0, &c0, n, n, n), "n={n} threshold={threshold}");
                mm_acc_strassen(&f, MatMut::from_slice(&mut a, n, n).unwrap(), MatMut::from_slice(&mut b, n, n).unwrap(), MatMut::from_slice(&mut c, n, n).unwrap(), Sign::Minus, threshold, &mut ()).unwrap();
                assert_eq!(c, c0);
            }
        }
    }

    #[test]
    fn strassen_level_counts() {
        let f = FieldCtx::new(101).unwrap();
        for (n, threshold, levels) in [(4, 2, 1usize), (8, 2, 1 + 7), (2, 2, 0)] {
            let mut a = vec![1; n * n];
            let mut b = vec![2; n * n];
            let mut c = vec![0; n * n];
            let mut trace = Trace::new();
            mm_acc_strassen(&f, MatMut::from_slice(&mut a, n, n).unwrap(), MatMut::from_slice(&mut b, n, n).unwrap(), MatMut::from_slice(&mut c, n, n).unwrap(), Sign::Plus, threshold, &mut trace).unwrap();
            assert_eq!(trace.levels.len(), levels);
            assert!(trace.levels.iter().all(|l| (l.block_adds, l.calls) == (18, 7)));
        }
    }

    #[test]
    fn strassen_mul_count_is_power_of_seven() {
        let f = FieldCtx::new(101).unwrap();
        for k in 0..6u32 {
            let n = 1 << k;
            let mut a = vec![1; n * n];
            let mut b = vec![1; n * n];
            let mut c = vec![0; n * n];
            let mut trace = Trace::new();
            mm_acc_strassen(&f, MatMut::from_slice(&mut a, n, n).unwrap(), MatMut::from_slice(&mut b, n, n).unwrap(), MatMut::from_slice(&mut c, n, n).unwrap(), Sign::Plus, 1, &mut trace).unwrap();
            assert_eq!(trace.ops.mul, 7u64.pow(k));
            assert!(c.iter().all(|&v| v == n as u64 % 101));
        }
    }

    #[test]
    fn square_matches_classic() {
        let p = 101;
        let f = FieldCtx::new(p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut id = vec![1, 0, 0, 1];
        let mut c = vec![0; 4];
        square_acc(&f, MatMut::from_slice(&mut id, 2, 2).unwrap(), MatMut::from_slice(&mut c, 2, 2).unwrap(), Sign::Plus, 1, &mut ()).unwrap();
        assert_eq!(c, vec![1, 0, 0, 1]);
        for n in [1, 3, 4, 8, 16, 32] {
            for threshold in [1, 4] {
                let a0 = rand_vec(&mut rng, n * n, p);
                let c0 = rand_vec(&mut rng, n * n, p);
                let (mut a, mut c) = (a0.clone(), c0.clone());
                let mut trace = Trace::new();
                square_acc(&f, MatMut::from_slice(&mut a, n, n).unwrap(), MatMut::from_slice(&mut c, n, n).unwrap(), Sign::Plus, threshold, &mut trace).unwrap();
                assert_eq!(a, a0);
                assert_eq!(c, oracle(p, &a0, &a0, &c0, n, n, n), "n={n}");
                assert!(trace.levels_of(LevelKind::Square).all(|l| l.calls == 7));
            }
        }
    }

    #[test]
    fn skew_unitary_examples() {
        let f = FieldCtx::new(13).unwrap();
        let y = SkewUnitaryPair { a: 3, b: 4 };
        let (mut u1, mut u2) = (vec![1], vec![0]);
        apply_skew_unitary(&f, MatMut::from_slice(&mut u1, 1, 1).unwrap(), MatMut::from_slice(&mut u2, 1, 1).unwrap(), y, false, &mut ()).unwrap();
        assert_eq!((u1[0], u2[0]), (3, 9));
        apply_skew_unitary(&f, MatMut::from_slice(&mut u1, 1, 1).unwrap(), MatMut::from_slice(&mut u2, 1, 1).unwrap(), y, true, &mut ()).unwrap();
        assert_eq!((u1[0], u2[0]), (1, 0));
        let f5 = FieldCtx::new(5).unwrap();
        let (mut u1, mut u2) = (vec![1, 2], vec![3, 4]);
        apply_skew_unitary(&f5, MatMut::from_slice(&mut u1, 1, 2).unwrap(), MatMut::from_slice(&mut u2, 1, 2).unwrap(), SkewUnitaryPair { a: 2, b: 0 }, false, &mut ()).unwrap();
        assert_eq!((u1, u2), (vec![2, 4], vec![1, 3]));
    }

    fn syrk_check(p: u64, m: usize, n2: usize, threshold: usize, trials: usize, seed: u64) {
        let f = FieldCtx::new(p).unwrap();
        let y = f.find_skew_unitary_pair();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..trials {
            let a0 = rand_vec(&mut rng, m * n2, p);
            let c0 = rand_vec(&mut rng, m * m, p);
            let (mut a, mut c) = (a0.clone(), c0.clone());
            syrk_acc(&f, MatMut::from_slice(&mut a, m, n2).unwrap(), MatMut::from_slice(&mut c, m, m).unwrap(), y, Sign::Plus, threshold, &mut ()).unwrap();
            assert_eq!(a, a0, "A not restored, p={p} m={m} cols={n2}");
            let mut at = vec![0; n2 * m];
            for i in 0..m {
                for k in 0..n2 {
                    at[k * m + i] = a0[i * n2 + k];
                }
            }
            let full = oracle(p, &a0, &at, &c0, m, n2, m);
            for i in 0..m {
                for j in 0..m {
                    let want = if j <= i { full[i * m + j] } else { c0[i * m + j] };
                    assert_eq!(c[i * m + j], want, "p={p} m={m} cols={n2} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn syrk_examples() {
        syrk_check(13, 2, 2, 1, 20, 1);
        syrk_check(13, 8, 8, 1, 50, 2);
        syrk_check(13, 8, 8, 2, 50, 3);
        syrk_check(5, 8, 6, 1, 20, 4);
        syrk_check(101, 16, 16, 2, 20, 5);
        syrk_check(101, 6, 4, 1, 20, 6);
        syrk_check(65537, 32, 16, 4, 5, 7);
        let f = FieldCtx::new(13).unwrap();
        let mut a = vec![0; 16];
        let mut c: Vec<u64> = (0..16).map(|v| v % 13).collect();
        syrk_acc(&f, MatMut::from_slice(&mut a, 4, 4).unwrap(), MatMut::from_slice(&mut c, 4, 4).unwrap(), f.find_skew_unitary_pair(), Sign::Plus, 1, &mut ()).unwrap();
        assert_eq!(c, (0..16).map(|v| v % 13).collect::<Vec<_>>());
    }

    #[test]
    fn syrk_level_structure() {
        let f = FieldCtx::new(13).unwrap();
        let mut a = vec![3; 8 * 8];
        let mut c = vec![0; 64];
        let mut trace = Trace::new();
        syrk_acc(&f, MatMut::from_slice(&mut a, 8, 8).unwrap(), MatMut::from_slice(&mut c, 8, 8).unwrap(), f.find_skew_unitary_pair(), Sign::Plus, 4, &mut trace).unwrap();
        let top: Vec<_> = trace.levels_of(LevelKind::Syrk).collect();
        assert_eq!(top.len(), 1);
        assert_eq!((top[0].block_adds, top[0].calls), (20, 5));
    }

    #[test]
    fn strided_views() {
        let f = FieldCtx::new(101).unwrap();
        let mut big = vec![0u64; 5 * 7];
        for (i, v) in big.iter_mut().enumerate() {
            *v = i as u64 % 101;
        }
        let a: Vec<u64> = (0..4).map(|i| i + 1).collect();
        let b: Vec<u64> = (0..4).map(|i| i + 5).collect();
        let want = {
            let c0: Vec<u64> = [8, 9, 15, 16].to_vec();
            oracle(101, &a, &b, &c0, 2, 2, 2)
        };
        let view = MatMut::from_slice_strided(&mut big[8..], 2, 2, 7).unwrap();
        mm_acc_classic(&f, MatRef::from_slice(&a, 2, 2).unwrap(), MatRef::from_slice(&b, 2, 2).unwrap(), view, Sign::Plus, &mut ()).unwrap();
        assert_eq!([big[8], big[9], big[15], big[16]].to_vec(), want);
        assert!(MatMut::from_slice_strided(&mut big, 5, 7, 8).is_err());
    }
}
