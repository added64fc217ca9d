//! Compiles bilinear formulas into in-place accumulating programs.
//!
//! A bilinear formula is given by matrices `(alpha, beta, mu)` and computes
//! `c += mu * ((alpha a) ⊙ (beta b))`. [`generate_inplace`] turns it into an
//! elementary [`Program`] that folds each linear form into one register,
//! multiplies, distributes the product through pre-divided result registers,
//! and then undoes every fold.
//!
//! The double-width variant [`generate_inplace_2d`] handles products that
//! span two result registers (polynomial blocks), where `mu2` is read two
//! columns at a time and each column pair is routed through an invertible
//! 2x2 sub-matrix.

use crate::error::{Error, HmMatrix, Result};
use crate::field::{FieldCtx, FieldElement};
use crate::slp::{is_unit_sign, Op, OpCounts, Program, Reg};

/// Dense row-major matrix of residues.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<FieldElement>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0; rows * cols] }
    }

    /// Builds a matrix from signed integers, reduced modulo `p`.
    pub fn from_i64(f: &FieldCtx, rows: usize, cols: usize, entries: &[i64]) -> Self {
        assert_eq!(entries.len(), rows * cols, "entry count must be rows * cols");
        Mat { rows, cols, data: entries.iter().map(|&v| f.reduce_i128(v as i128)).collect() }
    }

    pub fn from_residues(rows: usize, cols: usize, data: Vec<FieldElement>) -> Self {
        assert_eq!(data.len(), rows * cols, "entry count must be rows * cols");
        Mat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> FieldElement {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: FieldElement) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[FieldElement] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Number of nonzero entries.
    pub fn nnz(&self) -> u64 {
        self.data.iter().filter(|&&v| v != 0).count() as u64
    }

    /// Number of entries outside `{0, 1, -1}`.
    pub fn non_trivial(&self, p: u64) -> u64 {
        self.data.iter().filter(|&&v| v != 0 && !is_unit_sign(p, v)).count() as u64
    }

    fn zero_row(&self) -> Option<usize> {
        (0..self.rows).find(|&r| self.row(r).iter().all(|&v| v == 0))
    }
}

/// `(alpha, beta, mu)` with shapes `t×m`, `t×n`, `s×t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HmRep {
    pub alpha: Mat,
    pub beta: Mat,
    pub mu: Mat,
}

/// `(alpha, beta, mu2)` with shapes `t×m`, `t×n`, `s×2t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HmRep2 {
    pub alpha: Mat,
    pub beta: Mat,
    pub mu2: Mat,
}

impl HmRep {
    pub fn products(&self) -> usize {
        self.alpha.rows
    }

    /// Bank sizes `(m, n, s)`.
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.alpha.cols, self.beta.cols, self.mu.rows)
    }
}

impl HmRep2 {
    pub fn products(&self) -> usize {
        self.alpha.rows
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.alpha.cols, self.beta.cols, self.mu2.rows)
    }
}

fn check_shapes(alpha: &Mat, beta: &Mat, mu: &Mat, mu_cols: usize) -> Result<()> {
    let t = alpha.rows;
    if t == 0 {
        return Err(Error::NoProducts);
    }
    if beta.rows != t || mu.cols != mu_cols {
        return Err(Error::ShapeMismatch(format!(
            "alpha is {}x{}, beta is {}x{}, mu is {}x{}",
            alpha.rows, alpha.cols, beta.rows, beta.cols, mu.rows, mu.cols
        )));
    }
    for (which, m) in [(HmMatrix::Alpha, alpha), (HmMatrix::Beta, beta), (HmMatrix::Mu, mu)] {
        if let Some(row) = m.zero_row() {
            return Err(Error::ZeroRow { which, row });
        }
    }
    Ok(())
}

/// Checks shapes and the absence of zero rows.
pub fn validate_hm(rep: &HmRep) -> Result<()> {
    check_shapes(&rep.alpha, &rep.beta, &rep.mu, rep.alpha.rows)
}

/// Checks shapes, zero rows, and that every column pair of `mu2` has rank 2.
pub fn validate_hm2(f: &FieldCtx, rep: &HmRep2) -> Result<()> {
    check_shapes(&rep.alpha, &rep.beta, &rep.mu2, 2 * rep.alpha.rows)?;
    check_column_pairs(f, &rep.mu2).map(|_| ())
}

/// Index of the pivot entry: the first `±1`, else the first nonzero.
fn pick_pivot(p: u64, entries: impl Iterator<Item = FieldElement> + Clone) -> Option<usize> {
    entries
        .clone()
        .position(|v| is_unit_sign(p, v))
        .or_else(|| entries.clone().position(|v| v != 0))
}

/// Folds the linear form `coeffs · regs` into the pivot register.
/// Returns the pivot register plus the fold and its undo sequence.
fn fold_form(f: &FieldCtx, coeffs: &[FieldElement], reg: fn(usize) -> Reg) -> (Reg, Vec<Op>, Vec<Op>) {
    let p = f.modulus();
    let i = pick_pivot(p, coeffs.iter().copied()).expect("validated rows are nonzero");
    let pivot = reg(i);
    let mut fold = Vec::new();
    let mut undo = Vec::new();
    if coeffs[i] != 1 {
        fold.push(Op::Scale { dst: pivot, coeff: coeffs[i] });
    }
    for (lambda, &coeff) in coeffs.iter().enumerate() {
        if lambda != i && coeff != 0 {
            fold.push(Op::AddMul { dst: pivot, src: reg(lambda), coeff });
            undo.push(Op::AddMul { dst: pivot, src: reg(lambda), coeff: f.neg(coeff) });
        }
    }
    if coeffs[i] != 1 {
        undo.push(Op::ScaleInv { dst: pivot, coeff: coeffs[i] });
    }
    (pivot, fold, undo)
}

fn column(m: &Mat, c: usize) -> Vec<FieldElement> {
    (0..m.rows).map(|r| m.get(r, c)).collect()
}

/// Emits the ops of one product of a scalar-width formula.
fn emit_product(f: &FieldCtx, rep: &HmRep, l: usize, ops: &mut Vec<Op>) {
    let (ai, a_fold, a_undo) = fold_form(f, rep.alpha.row(l), Reg::a);
    let (bj, b_fold, b_undo) = fold_form(f, rep.beta.row(l), Reg::b);
    let mu = column(&rep.mu, l);
    let k = pick_pivot(f.modulus(), mu.iter().copied()).expect("validated columns are nonzero");
    let ck = Reg::c(k);
    ops.extend(a_fold);
    ops.extend(b_fold);
    if mu[k] != 1 {
        ops.push(Op::ScaleInv { dst: ck, coeff: mu[k] });
    }
    let others: Vec<(usize, FieldElement)> =
        mu.iter().copied().enumerate().filter(|&(lambda, v)| lambda != k && v != 0).collect();
    for &(lambda, v) in &others {
        ops.push(Op::AddMul { dst: Reg::c(lambda), src: ck, coeff: f.neg(v) });
    }
    ops.push(Op::MulAcc { dst: ck, lhs: ai, rhs: bj });
    for &(lambda, v) in &others {
        ops.push(Op::AddMul { dst: Reg::c(lambda), src: ck, coeff: v });
    }
    if mu[k] != 1 {
        ops.push(Op::Scale { dst: ck, coeff: mu[k] });
    }
    ops.extend(b_undo);
    ops.extend(a_undo);
}

/// In-place program for `c += mu ((alpha a) ⊙ (beta b))`.
pub fn generate_inplace(f: &FieldCtx, rep: &HmRep) -> Result<Program> {
    let order: Vec<usize> = (0..rep.products()).collect();
    generate_inplace_ordered(f, rep, &order)
}

/// As [`generate_inplace`], visiting the products in the given order.
pub fn generate_inplace_ordered(f: &FieldCtx, rep: &HmRep, order: &[usize]) -> Result<Program> {
    validate_hm(rep)?;
    if let Some(col) = column_zero(&rep.mu) {
        return Err(Error::ZeroColumn { col });
    }
    let mut ops = Vec::new();
    for &l in order {
        emit_product(f, rep, l, &mut ops);
    }
    Program::new(rep.sizes(), f.modulus(), ops)
}

fn column_zero(m: &Mat) -> Option<usize> {
    (0..m.cols).find(|&c| (0..m.rows).all(|r| m.get(r, c) == 0))
}

/// Operation counts `(t, 2(#α+#β+#μ) − 5t, 2(♯α+♯β+♯μ))`.
pub fn predicted_counts(f: &FieldCtx, rep: &HmRep) -> OpCounts {
    let p = f.modulus();
    let t = rep.products() as u64;
    let nnz = rep.alpha.nnz() + rep.beta.nnz() + rep.mu.nnz();
    let sharp = rep.alpha.non_trivial(p) + rep.beta.non_trivial(p) + rep.mu.non_trivial(p);
    OpCounts::new(t, 2 * nnz - 5 * t, 2 * sharp)
}

/// Duplicates `mu` (s×t) into `mu2` ((s+1)×2t): column `2j` is column `j`
/// of `mu`, column `2j+1` is the same column shifted down one row.
pub fn expand_mu(mu: &Mat) -> Result<Mat> {
    if let Some(col) = column_zero(mu) {
        return Err(Error::ZeroColumn { col });
    }
    let mut out = Mat::zeros(mu.rows + 1, 2 * mu.cols);
    for i in 0..mu.rows {
        for j in 0..mu.cols {
            let v = mu.get(i, j);
            out.set(i, 2 * j, v);
            out.set(i + 1, 2 * j + 1, v);
        }
    }
    Ok(out)
}

/// Pivot rows of one column pair and the 2x2 block they select.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairPivot {
    pub k: usize,
    pub f: usize,
    pub block: [[FieldElement; 2]; 2],
}

fn det2(f: &FieldCtx, m: &[[FieldElement; 2]; 2]) -> FieldElement {
    f.sub(f.mul(m[0][0], m[1][1]), f.mul(m[0][1], m[1][0]))
}

/// For every column pair of `mu2`, the lexicographically first rows
/// `k < f` whose 2x2 block is invertible.
pub fn check_column_pairs(fc: &FieldCtx, mu2: &Mat) -> Result<Vec<PairPivot>> {
    if mu2.cols % 2 != 0 {
        return Err(Error::ShapeMismatch(format!("mu2 has an odd number of columns ({})", mu2.cols)));
    }
    (0..mu2.cols / 2)
        .map(|pair| {
            let (c0, c1) = (2 * pair, 2 * pair + 1);
            for k in 0..mu2.rows {
                for f in k + 1..mu2.rows {
                    let block = [[mu2.get(k, c0), mu2.get(k, c1)], [mu2.get(f, c0), mu2.get(f, c1)]];
                    if det2(fc, &block) != 0 {
                        return Ok(PairPivot { k, f, block });
                    }
                }
            }
            Err(Error::RankDeficientPair { pair })
        })
        .collect()
}

/// Elementary ops computing `(u, v) <- M (u, v)`, or `M^-1 (u, v)` when
/// `inverse` is set.
///
/// Identity and the exchange matrix cost nothing but a swap. A lower
/// triangular `M` is applied directly. Otherwise `M = [[a, b], [c, d]]`
/// with `a != 0` runs `u *= a; u += b v; v *= y; v += x u` with `x = c/a`
/// and `y = d - x b`, and `a = 0` applies `[[c, d], [0, b]]` then swaps.
pub fn emit_apply_2x2(f: &FieldCtx, m: [[FieldElement; 2]; 2], u: Reg, v: Reg, inverse: bool) -> Result<Vec<Op>> {
    if det2(f, &m) == 0 {
        return Err(Error::SingularBlock);
    }
    let [[a, b], [c, d]] = m;
    let mut ops = Vec::new();
    let scale = |ops: &mut Vec<Op>, dst: Reg, coeff: FieldElement| {
        if coeff != 1 {
            ops.push(Op::Scale { dst, coeff });
        }
    };
    let addmul = |ops: &mut Vec<Op>, dst: Reg, src: Reg, coeff: FieldElement| {
        if coeff != 0 {
            ops.push(Op::AddMul { dst, src, coeff });
        }
    };
    if m == [[1, 0], [0, 1]] {
    } else if m == [[0, 1], [1, 0]] {
        ops.push(Op::Swap(u, v));
    } else if b == 0 {
        scale(&mut ops, v, d);
        addmul(&mut ops, v, u, c);
        scale(&mut ops, u, a);
    } else if a != 0 {
        let x = f.div(c, a)?;
        let y = f.sub(d, f.mul(x, b));
        scale(&mut ops, u, a);
        addmul(&mut ops, u, v, b);
        scale(&mut ops, v, y);
        addmul(&mut ops, v, u, x);
    } else {
        scale(&mut ops, u, c);
        addmul(&mut ops, u, v, d);
        scale(&mut ops, v, b);
        ops.push(Op::Swap(u, v));
    }
    if inverse {
        ops = ops.iter().rev().map(|op| op.inverse(f).expect("2x2 ops are invertible")).collect();
    }
    Ok(ops)
}

/// Counts of [`emit_apply_2x2`] for `M`, derived from the case analysis
/// rather than by emitting. `M^-1` costs the same.
pub fn apply_2x2_counts(f: &FieldCtx, m: [[FieldElement; 2]; 2]) -> Result<OpCounts> {
    if det2(f, &m) == 0 {
        return Err(Error::SingularBlock);
    }
    let p = f.modulus();
    let sc = |x: FieldElement| u64::from(x != 0 && !is_unit_sign(p, x));
    let nz = |x: FieldElement| u64::from(x != 0);
    let [[a, b], [c, d]] = m;
    Ok(if m == [[1, 0], [0, 1]] || m == [[0, 1], [1, 0]] {
        OpCounts::default()
    } else if b == 0 {
        OpCounts::new(0, nz(c), sc(d) + sc(c) + sc(a))
    } else if a != 0 {
        let x = f.div(c, a)?;
        let y = f.sub(d, f.mul(x, b));
        OpCounts::new(0, 1 + nz(x), sc(a) + sc(b) + sc(y) + sc(x))
    } else {
        OpCounts::new(0, nz(d), sc(c) + sc(d) + sc(b))
    })
}

/// In-place program for the double-width formula `(alpha, beta, mu2)`.
pub fn generate_inplace_2d(f: &FieldCtx, rep: &HmRep2) -> Result<Program> {
    check_shapes(&rep.alpha, &rep.beta, &rep.mu2, 2 * rep.alpha.rows)?;
    let pivots = check_column_pairs(f, &rep.mu2)?;
    let mut ops = Vec::new();
    for (l, piv) in pivots.iter().enumerate() {
        let (ai, a_fold, a_undo) = fold_form(f, rep.alpha.row(l), Reg::a);
        let (bj, b_fold, b_undo) = fold_form(f, rep.beta.row(l), Reg::b);
        let (ck, cf) = (Reg::c(piv.k), Reg::c(piv.f));
        let col_even = column(&rep.mu2, 2 * l);
        let col_odd = column(&rep.mu2, 2 * l + 1);
        let others = |col: &[FieldElement]| -> Vec<(usize, FieldElement)> {
            col.iter().copied().enumerate().filter(|&(r, v)| r != piv.k && r != piv.f && v != 0).collect()
        };
        let (even, odd) = (others(&col_even), others(&col_odd));
        ops.extend(a_fold);
        ops.extend(b_fold);
        ops.extend(emit_apply_2x2(f, piv.block, ck, cf, true)?);
        for &(r, v) in &even {
            ops.push(Op::AddMul { dst: Reg::c(r), src: ck, coeff: f.neg(v) });
        }
        for &(r, v) in &odd {
            ops.push(Op::AddMul { dst: Reg::c(r), src: cf, coeff: f.neg(v) });
        }
        ops.push(Op::MulAcc2 { lo: ck, hi: cf, lhs: ai, rhs: bj });
        for &(r, v) in &odd {
            ops.push(Op::AddMul { dst: Reg::c(r), src: cf, coeff: v });
        }
        for &(r, v) in &even {
            ops.push(Op::AddMul { dst: Reg::c(r), src: ck, coeff: v });
        }
        ops.extend(emit_apply_2x2(f, piv.block, ck, cf, false)?);
        ops.extend(b_undo);
        ops.extend(a_undo);
    }
    Program::new(rep.sizes(), f.modulus(), ops)
}

/// The general double-width bound `(t, 2(#α+#β+#μ2−t), 2(♯α+♯β+♯μ2+2t))`.
pub fn predicted_counts_2d(f: &FieldCtx, rep: &HmRep2) -> OpCounts {
    let p = f.modulus();
    let t = rep.products() as u64;
    let nnz = rep.alpha.nnz() + rep.beta.nnz() + rep.mu2.nnz();
    let sharp = rep.alpha.non_trivial(p) + rep.beta.non_trivial(p) + rep.mu2.non_trivial(p);
    OpCounts::new(t, 2 * (nnz - t), 2 * (sharp + 2 * t))
}

/// Exact counts of [`generate_inplace_2d`], from the per-product schedule:
/// folds and unfolds of the two linear forms, pre/post updates of the rows
/// outside the pivot pair, the product itself, and `M^-1`, `M`.
pub fn scheduled_counts_2d(f: &FieldCtx, rep: &HmRep2) -> Result<OpCounts> {
    let p = f.modulus();
    let pivots = check_column_pairs(f, &rep.mu2)?;
    let mut total = OpCounts::default();
    for (l, piv) in pivots.iter().enumerate() {
        let row_counts = |row: &[FieldElement]| {
            let nnz = row.iter().filter(|&&v| v != 0).count() as u64;
            let sharp = row.iter().filter(|&&v| v != 0 && !is_unit_sign(p, v)).count() as u64;
            OpCounts::new(0, 2 * (nnz - 1), 2 * sharp)
        };
        total += row_counts(rep.alpha.row(l));
        total += row_counts(rep.beta.row(l));
        for c in [2 * l, 2 * l + 1] {
            for r in (0..rep.mu2.rows).filter(|&r| r != piv.k && r != piv.f) {
                let v = rep.mu2.get(r, c);
                if v != 0 {
                    total += OpCounts::new(0, 2, 2 * u64::from(!is_unit_sign(p, v)));
                }
            }
        }
        let m = apply_2x2_counts(f, piv.block)?;
        total += m + m + OpCounts::new(1, 2, 0);
    }
    Ok(total)
}

/// Dense evaluation of `c + mu ((alpha a) ⊙ (beta b))`.
pub fn oracle_bilinear(f: &FieldCtx, rep: &HmRep, a: &[u64], b: &[u64], c: &[u64]) -> Vec<u64> {
    let dot = |row: &[u64], x: &[u64]| row.iter().zip(x).fold(0, |acc, (&r, &v)| f.mul_add(acc, r, v));
    let prods: Vec<u64> =
        (0..rep.products()).map(|l| f.mul(dot(rep.alpha.row(l), a), dot(rep.beta.row(l), b))).collect();
    (0..rep.mu.rows).map(|i| f.add(c[i], dot(rep.mu.row(i), &prods))).collect()
}

/// Dense evaluation of the double-width formula: each product is split into
/// base-p digits `(lo, hi)` that feed columns `2l` and `2l+1` of `mu2`.
pub fn oracle_bilinear_2d(f: &FieldCtx, rep: &HmRep2, a: &[u64], b: &[u64], c: &[u64]) -> Vec<u64> {
    let dot = |row: &[u64], x: &[u64]| row.iter().zip(x).fold(0, |acc, (&r, &v)| f.mul_add(acc, r, v));
    let mut wide = Vec::with_capacity(2 * rep.products());
    for l in 0..rep.products() {
        let (lo, hi) = f.mul_wide(dot(rep.alpha.row(l), a), dot(rep.beta.row(l), b));
        wide.push(lo);
        wide.push(hi);
    }
    (0..rep.mu2.rows).map(|i| f.add(c[i], dot(rep.mu2.row(i), &wide))).collect()
}

/// The single-product formula `c0 += a0 * b0`.
pub fn identity_rep(f: &FieldCtx) -> HmRep {
    let one = Mat::from_i64(f, 1, 1, &[1]);
    HmRep { alpha: one.clone(), beta: one.clone(), mu: one }
}

/// Strassen-Winograd on 2x2 matrices; banks are row-major `(x11, x12, x21, x22)`.
pub fn strassen_winograd_rep(f: &FieldCtx) -> HmRep {
    #[rustfmt::skip]
    let alpha = Mat::from_i64(f, 7, 4, &[
         1,  0, 0, 0,
         0,  1, 0, 0,
        -1, -1, 1, 1,
         0,  0, 0, 1,
         0,  0, 1, 1,
        -1,  0, 1, 0,
        -1,  0, 1, 1,
    ]);
    #[rustfmt::skip]
    let beta = Mat::from_i64(f, 7, 4, &[
         1, 0, 0,  0,
         0, 0, 1,  0,
         0, 0, 0,  1,
        -1, 1, 1, -1,
        -1, 1, 0,  0,
         0, 1, 0, -1,
        -1, 1, 0, -1,
    ]);
    #[rustfmt::skip]
    let mu = Mat::from_i64(f, 4, 7, &[
        1, 1,  0, 0, 0, 0,  0,
        1, 0, -1, 0, 1, 0, -1,
        1, 0,  0, 1, 0, 1, -1,
        1, 0,  0, 0, 1, 1, -1,
    ]);
    HmRep { alpha, beta, mu }
}

/// Karatsuba on two-coefficient polynomials.
pub fn karatsuba_rep(f: &FieldCtx) -> HmRep {
    let ab = Mat::from_i64(f, 3, 2, &[1, 0, 0, 1, 1, -1]);
    let mu = Mat::from_i64(f, 3, 3, &[1, 0, 0, 1, 1, -1, 0, 1, 0]);
    HmRep { alpha: ab.clone(), beta: ab, mu }
}

/// Toom-3 with evaluation points `0, 1, -1, 2, ∞`. Needs `p > 3`.
pub fn toom3_rep(f: &FieldCtx) -> Result<HmRep> {
    let p = f.modulus();
    if p <= 3 {
        return Err(Error::UnsupportedCharacteristic(p));
    }
    let ab = Mat::from_i64(f, 5, 3, &[1, 0, 0, 1, 1, 1, 1, -1, 1, 1, 2, 4, 0, 0, 1]);
    let q = |n: i64, d: i64| f.div(f.reduce_i128(n as i128), f.reduce_i128(d as i128));
    #[rustfmt::skip]
    let entries = [
        (1, 1), (0, 1), (0, 1), (0, 1), (0, 1),
        (-1, 2), (1, 1), (-1, 3), (-1, 6), (2, 1),
        (-1, 1), (1, 2), (1, 2), (0, 1), (-1, 1),
        (1, 2), (-1, 2), (-1, 6), (1, 6), (-2, 1),
        (0, 1), (0, 1), (0, 1), (0, 1), (1, 1),
    ];
    let mu = entries.iter().map(|&(n, d)| q(n, d)).collect::<Result<Vec<_>>>()?;
    Ok(HmRep { alpha: ab.clone(), beta: ab, mu: Mat::from_residues(5, 5, mu) })
}

/// Double-width version of a polynomial formula via [`expand_mu`].
pub fn to_2d(rep: &HmRep) -> Result<HmRep2> {
    Ok(HmRep2 { alpha: rep.alpha.clone(), beta: rep.beta.clone(), mu2: expand_mu(&rep.mu)? })
}

/// A formula file: either scalar-width (`#mu`) or double-width (`#mu2`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HmFile {
    OneD(HmRep),
    TwoD(HmRep2),
}

fn parse_entry(f: &FieldCtx, tok: &str) -> std::result::Result<FieldElement, String> {
    let int = |s: &str| s.parse::<i128>().map_err(|_| format!("bad entry `{tok}`"));
    match tok.split_once('/') {
        Some((n, d)) => {
            let d = f.reduce_i128(int(d)?);
            let inv = f.inv(d).map_err(|_| format!("entry `{tok}` divides by zero"))?;
            Ok(f.mul(f.reduce_i128(int(n)?), inv))
        }
        None => Ok(f.reduce_i128(int(tok)?)),
    }
}

/// Parses blocks introduced by `#alpha`, `#beta` and `#mu` or `#mu2`. Each
/// block is `<rows> <cols>` then row-major entries; entries may be negative
/// integers or fractions `n/d`, and are reduced modulo `p`.
pub fn parse_hm(f: &FieldCtx, text: &str) -> Result<HmFile> {
    // (name, header line, [(line, token)])
    type Block = (String, usize, Vec<(usize, String)>);
    let mut blocks: Vec<Block> = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line_no = no + 1;
        let trimmed = line.trim();
        if let Some(name) = trimmed.strip_prefix('#') {
            let name = name.split_whitespace().next().unwrap_or("").to_string();
            if ["alpha", "beta", "mu", "mu2"].contains(&name.as_str()) {
                blocks.push((name, line_no, Vec::new()));
            }
            continue;
        }
        let Some(block) = blocks.last_mut() else {
            if trimmed.is_empty() {
                continue;
            }
            return Err(Error::Parse { line: line_no, msg: "data before the first `#alpha`/`#beta`/`#mu` block".into() });
        };
        block.2.extend(trimmed.split_whitespace().map(|t| (line_no, t.to_string())));
    }
    let mut mats: [Option<Mat>; 3] = [None, None, None];
    let mut two_d = None;
    for (name, start, toks) in blocks {
        let err = |line: usize, msg: String| Error::Parse { line, msg };
        let dim = |i: usize| -> Result<usize> {
            let (line, t) = toks.get(i).ok_or_else(|| err(start, format!("`#{name}` block needs `<rows> <cols>`")))?;
            t.parse().map_err(|_| err(*line, format!("bad dimension `{t}`")))
        };
        let (rows, cols) = (dim(0)?, dim(1)?);
        if toks.len() != 2 + rows * cols {
            return Err(err(start, format!("`#{name}` expects {} entries, found {}", rows * cols, toks.len() - 2)));
        }
        let data = toks[2..]
            .iter()
            .map(|(line, t)| parse_entry(f, t).map_err(|msg| err(*line, msg)))
            .collect::<Result<Vec<_>>>()?;
        let slot = match name.as_str() {
            "alpha" => 0,
            "beta" => 1,
            _ => {
                let is2 = name == "mu2";
                if two_d.replace(is2).is_some() {
                    return Err(err(start, "more than one `#mu`/`#mu2` block".into()));
                }
                2
            }
        };
        if mats[slot].replace(Mat::from_residues(rows, cols, data)).is_some() {
            return Err(err(start, format!("duplicate `#{name}` block")));
        }
    }
    let missing = |n: &str| Error::Parse { line: 0, msg: format!("missing `#{n}` block") };
    let [alpha, beta, mu] = mats;
    let alpha = alpha.ok_or_else(|| missing("alpha"))?;
    let beta = beta.ok_or_else(|| missing("beta"))?;
    let mu = mu.ok_or_else(|| missing("mu"))?;
    Ok(if two_d == Some(true) { HmFile::TwoD(HmRep2 { alpha, beta, mu2: mu }) } else { HmFile::OneD(HmRep { alpha, beta, mu }) })
}

/// Renders a matrix block with entries in `(-p/2, p/2]`.
fn render_block(out: &mut String, name: &str, m: &Mat, p: u64) {
    out.push_str(&format!("#{name}\n{} {}\n", m.rows, m.cols));
    for r in 0..m.rows {
        let row: Vec<String> = m
            .row(r)
            .iter()
            .map(|&v| if v > p / 2 { format!("-{}", p - v) } else { v.to_string() })
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
}

pub fn render_hm(f: &FieldCtx, file: &HmFile) -> String {
    let p = f.modulus();
    let mut out = String::new();
    let (alpha, beta, mu, name) = match file {
        HmFile::OneD(r) => (&r.alpha, &r.beta, &r.mu, "mu"),
        HmFile::TwoD(r) => (&r.alpha, &r.beta, &r.mu2, "mu2"),
    };
    render_block(&mut out, "alpha", alpha, p);
    render_block(&mut out, "beta", beta, p);
    render_block(&mut out, name, mu, p);
    out
}
