//! In-place straight-line programs over three register banks.
//!
//! A [`Program`] reads and writes banks `a`, `b` and `c` only. Bank `c`
//! accumulates the result; banks `a` and `b` may be modified mid-run but
//! a well-formed program leaves them as it found them.
//!
//! The text form is one operation per line:
//!
//! ```text
//! a1 += 3*a2      # AddMul
//! a1 -= a2        # AddMul with coefficient -1
//! c2 *= 5         # Scale
//! c2 /= 5         # ScaleInv
//! swap c0 c1
//! c0 += a1*b2     # MulAcc
//! (c0,c1) += a0*b0  # MulAcc2
//! ```

use std::fmt;
use std::ops::{Add, AddAssign};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{FieldCtx, FieldElement};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Bank {
    A,
    B,
    C,
}

impl Bank {
    fn letter(self) -> char {
        match self {
            Bank::A => 'a',
            Bank::B => 'b',
            Bank::C => 'c',
        }
    }
}

/// A register reference: bank plus zero-based index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Reg {
    pub bank: Bank,
    pub index: usize,
}

impl Reg {
    pub const fn a(index: usize) -> Reg {
        Reg { bank: Bank::A, index }
    }
    pub const fn b(index: usize) -> Reg {
        Reg { bank: Bank::B, index }
    }
    pub const fn c(index: usize) -> Reg {
        Reg { bank: Bank::C, index }
    }
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.bank.letter(), self.index)
    }
}

/// One elementary operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    /// `dst += coeff * src`
    AddMul { dst: Reg, src: Reg, coeff: FieldElement },
    /// `dst *= coeff`
    Scale { dst: Reg, coeff: FieldElement },
    /// `dst /= coeff`
    ScaleInv { dst: Reg, coeff: FieldElement },
    Swap(Reg, Reg),
    /// `dst += lhs * rhs`
    MulAcc { dst: Reg, lhs: Reg, rhs: Reg },
    /// `(lo, hi) += lhs * rhs`, a product spanning two result registers.
    MulAcc2 { lo: Reg, hi: Reg, lhs: Reg, rhs: Reg },
}

impl Op {
    /// The operation undoing `self`. Products have no inverse.
    pub fn inverse(&self, f: &FieldCtx) -> Option<Op> {
        Some(match *self {
            Op::AddMul { dst, src, coeff } => Op::AddMul { dst, src, coeff: f.neg(coeff) },
            Op::Scale { dst, coeff } => Op::ScaleInv { dst, coeff },
            Op::ScaleInv { dst, coeff } => Op::Scale { dst, coeff },
            Op::Swap(x, y) => Op::Swap(x, y),
            Op::MulAcc { .. } | Op::MulAcc2 { .. } => return None,
        })
    }

    fn regs(&self) -> impl Iterator<Item = Reg> {
        let (buf, len): ([Reg; 4], usize) = match *self {
            Op::AddMul { dst, src, .. } => ([dst, src, dst, dst], 2),
            Op::Scale { dst, .. } | Op::ScaleInv { dst, .. } => ([dst; 4], 1),
            Op::Swap(x, y) => ([x, y, x, x], 2),
            Op::MulAcc { dst, lhs, rhs } => ([dst, lhs, rhs, dst], 3),
            Op::MulAcc2 { lo, hi, lhs, rhs } => ([lo, hi, lhs, rhs], 4),
        };
        buf.into_iter().take(len)
    }
}

/// Operation tallies: bilinear products, additions, scalings by constants
/// outside `{1, -1}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct OpCounts {
    pub mul: u64,
    pub add: u64,
    pub sca: u64,
}

impl OpCounts {
    pub const fn new(mul: u64, add: u64, sca: u64) -> Self {
        OpCounts { mul, add, sca }
    }

    /// Component-wise `self <= other`.
    pub fn le(&self, other: &OpCounts) -> bool {
        self.mul <= other.mul && self.add <= other.add && self.sca <= other.sca
    }
}

impl Add for OpCounts {
    type Output = OpCounts;
    fn add(self, o: OpCounts) -> OpCounts {
        OpCounts::new(self.mul + o.mul, self.add + o.add, self.sca + o.sca)
    }
}

impl AddAssign for OpCounts {
    fn add_assign(&mut self, o: OpCounts) {
        *self = *self + o;
    }
}

impl fmt::Display for OpCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(MUL {}, ADD {}, SCA {})", self.mul, self.add, self.sca)
    }
}

/// `true` when multiplying by `c` is free under the counting convention.
pub fn is_unit_sign(p: u64, c: FieldElement) -> bool {
    c == 1 || c == p - 1
}

/// An immutable elementary program with its bank sizes and modulus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    m: usize,
    n: usize,
    s: usize,
    modulus: u64,
    ops: Vec<Op>,
}

impl Program {
    /// Validates register ranges and coefficients.
    pub fn new(sizes: (usize, usize, usize), modulus: u64, ops: Vec<Op>) -> Result<Self> {
        let (m, n, s) = sizes;
        let len = |b: Bank| match b {
            Bank::A => m,
            Bank::B => n,
            Bank::C => s,
        };
        for (i, op) in ops.iter().enumerate() {
            for r in op.regs() {
                if r.index >= len(r.bank) {
                    return Err(Error::ShapeMismatch(format!("op {i}: register {r} out of range")));
                }
            }
            let bad = match *op {
                Op::AddMul { dst, src, coeff } => dst == src || coeff >= modulus,
                Op::Scale { coeff, .. } | Op::ScaleInv { coeff, .. } => coeff == 0 || coeff >= modulus,
                Op::Swap(..) => false,
                Op::MulAcc { dst, lhs, rhs } => dst == lhs || dst == rhs,
                Op::MulAcc2 { lo, hi, lhs, rhs } => {
                    lo == hi || [lo, hi].iter().any(|&d| d == lhs || d == rhs)
                }
            };
            if bad {
                return Err(Error::ShapeMismatch(format!("op {i} is ill-formed: {op:?}")));
            }
        }
        Ok(Program { m, n, s, modulus, ops })
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.m, self.n, self.s)
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Tallies operations under the MUL/ADD/SCA convention; swaps are free.
    pub fn count_ops(&self) -> OpCounts {
        let p = self.modulus;
        let mut k = OpCounts::default();
        for op in &self.ops {
            match *op {
                Op::AddMul { coeff, .. } => {
                    k.add += 1;
                    k.sca += u64::from(!is_unit_sign(p, coeff));
                }
                Op::Scale { coeff, .. } | Op::ScaleInv { coeff, .. } => {
                    k.sca += u64::from(!is_unit_sign(p, coeff));
                }
                Op::Swap(..) => {}
                Op::MulAcc { .. } => {
                    k.mul += 1;
                    k.add += 1;
                }
                Op::MulAcc2 { .. } => {
                    k.mul += 1;
                    k.add += 2;
                }
            }
        }
        k
    }

    /// Runs the program over caller-owned banks.
    pub fn execute(&self, f: &FieldCtx, a: &mut [u64], b: &mut [u64], c: &mut [u64]) -> Result<()> {
        if f.modulus() != self.modulus {
            return Err(Error::ShapeMismatch(format!(
                "program modulus {} differs from field modulus {}",
                self.modulus,
                f.modulus()
            )));
        }
        if a.len() != self.m || b.len() != self.n || c.len() != self.s {
            return Err(Error::ShapeMismatch(format!(
                "banks ({}, {}, {}) do not match program sizes ({}, {}, {})",
                a.len(),
                b.len(),
                c.len(),
                self.m,
                self.n,
                self.s
            )));
        }
        let mut machine = ScalarMachine { f, a, b, c };
        run(self, &mut machine)
    }

    /// One line per operation in the text grammar.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for op in &self.ops {
            out.push_str(&render_op(op, self.modulus));
            out.push('\n');
        }
        out
    }

    /// Parses the text grammar. Sizes default to the largest index + 1.
    pub fn parse(text: &str, modulus: u64, sizes: Option<(usize, usize, usize)>) -> Result<Self> {
        let mut ops = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let op = parse_op(line, modulus).map_err(|msg| Error::Parse { line: no + 1, msg })?;
            ops.push(op);
        }
        let sizes = sizes.unwrap_or_else(|| {
            let mut sz = [0usize; 3];
            for r in ops.iter().flat_map(|op| op.regs()) {
                let slot = &mut sz[r.bank as usize];
                *slot = (*slot).max(r.index + 1);
            }
            (sz[0], sz[1], sz[2])
        });
        Program::new(sizes, modulus, ops)
    }
}

/// A register machine able to run elementary programs. The scalar machine
/// holds single field elements; polynomial kernels provide block machines.
pub trait Machine {
    fn add_mul(&mut self, dst: Reg, src: Reg, coeff: FieldElement);
    fn scale(&mut self, dst: Reg, coeff: FieldElement);
    fn scale_inv(&mut self, dst: Reg, coeff: FieldElement) -> Result<()>;
    fn swap(&mut self, x: Reg, y: Reg);
    fn mul_acc(&mut self, dst: Reg, lhs: Reg, rhs: Reg);
    fn mul_acc2(&mut self, lo: Reg, hi: Reg, lhs: Reg, rhs: Reg);
}

/// Runs every op of `prog` on `machine` in order.
pub fn run<M: Machine + ?Sized>(prog: &Program, machine: &mut M) -> Result<()> {
    for op in &prog.ops {
        match *op {
            Op::AddMul { dst, src, coeff } => machine.add_mul(dst, src, coeff),
            Op::Scale { dst, coeff } => machine.scale(dst, coeff),
            Op::ScaleInv { dst, coeff } => machine.scale_inv(dst, coeff)?,
            Op::Swap(x, y) => machine.swap(x, y),
            Op::MulAcc { dst, lhs, rhs } => machine.mul_acc(dst, lhs, rhs),
            Op::MulAcc2 { lo, hi, lhs, rhs } => machine.mul_acc2(lo, hi, lhs, rhs),
        }
    }
    Ok(())
}

/// Interpreter state: the three banks and nothing else. Each step reads its
/// operands into locals before writing the destination.
struct ScalarMachine<'f, 'a> {
    f: &'f FieldCtx,
    a: &'a mut [u64],
    b: &'a mut [u64],
    c: &'a mut [u64],
}

impl ScalarMachine<'_, '_> {
    fn get(&self, r: Reg) -> u64 {
        match r.bank {
            Bank::A => self.a[r.index],
            Bank::B => self.b[r.index],
            Bank::C => self.c[r.index],
        }
    }

    fn slot(&mut self, r: Reg) -> &mut u64 {
        match r.bank {
            Bank::A => &mut self.a[r.index],
            Bank::B => &mut self.b[r.index],
            Bank::C => &mut self.c[r.index],
        }
    }
}

impl Machine for ScalarMachine<'_, '_> {
    fn add_mul(&mut self, dst: Reg, src: Reg, coeff: FieldElement) {
        let v = self.f.mul(coeff, self.get(src));
        let f = self.f;
        let d = self.slot(dst);
        *d = f.add(*d, v);
    }

    fn scale(&mut self, dst: Reg, coeff: FieldElement) {
        let f = self.f;
        let d = self.slot(dst);
        *d = f.mul(*d, coeff);
    }

    fn scale_inv(&mut self, dst: Reg, coeff: FieldElement) -> Result<()> {
        let inv = self.f.inv(coeff)?;
        self.scale(dst, inv);
        Ok(())
    }

    fn swap(&mut self, x: Reg, y: Reg) {
        let vx = self.get(x);
        let vy = self.get(y);
        *self.slot(x) = vy;
        *self.slot(y) = vx;
    }

    fn mul_acc(&mut self, dst: Reg, lhs: Reg, rhs: Reg) {
        let v = self.f.mul(self.get(lhs), self.get(rhs));
        let f = self.f;
        let d = self.slot(dst);
        *d = f.add(*d, v);
    }

    fn mul_acc2(&mut self, lo: Reg, hi: Reg, lhs: Reg, rhs: Reg) {
        let (l, h) = self.f.mul_wide(self.get(lhs), self.get(rhs));
        let f = self.f;
        let d = self.slot(lo);
        *d = f.add(*d, l);
        let d = self.slot(hi);
        *d = f.add(*d, h);
    }
}

fn render_op(op: &Op, p: u64) -> String {
    match *op {
        Op::AddMul { dst, src, coeff } => {
            if coeff == 1 {
                format!("{dst} += {src}")
            } else if coeff == p - 1 {
                format!("{dst} -= {src}")
            } else if coeff > p / 2 {
                format!("{dst} -= {}*{src}", p - coeff)
            } else {
                format!("{dst} += {coeff}*{src}")
            }
        }
        Op::Scale { dst, coeff } => format!("{dst} *= {coeff}"),
        Op::ScaleInv { dst, coeff } => format!("{dst} /= {coeff}"),
        Op::Swap(x, y) => format!("swap {x} {y}"),
        Op::MulAcc { dst, lhs, rhs } => format!("{dst} += {lhs}*{rhs}"),
        Op::MulAcc2 { lo, hi, lhs, rhs } => format!("({lo},{hi}) += {lhs}*{rhs}"),
    }
}

fn parse_reg(tok: &str) -> std::result::Result<Reg, String> {
    let tok = tok.trim();
    let bank = match tok.chars().next() {
        Some('a') => Bank::A,
        Some('b') => Bank::B,
        Some('c') => Bank::C,
        _ => return Err(format!("expected a register, found `{tok}`")),
    };
    let digits = &tok[1..];
    if digits.is_empty() || !digits.bytes().all(|d| d.is_ascii_digit()) {
        return Err(format!("expected a register, found `{tok}`"));
    }
    let index = digits.parse().map_err(|_| format!("register index too large in `{tok}`"))?;
    Ok(Reg { bank, index })
}

fn parse_coeff(tok: &str, p: u64) -> std::result::Result<u64, String> {
    let tok = tok.trim();
    if tok.is_empty() || !tok.bytes().all(|d| d.is_ascii_digit()) {
        return Err(format!("expected a decimal coefficient, found `{tok}`"));
    }
    let v: u128 = tok.parse().map_err(|_| format!("coefficient `{tok}` too large"))?;
    Ok((v % p as u128) as u64)
}

fn parse_op(line: &str, p: u64) -> std::result::Result<Op, String> {
    if let Some(rest) = line.strip_prefix("swap") {
        let regs: Vec<&str> = rest.split_whitespace().collect();
        if regs.len() != 2 {
            return Err("swap takes two registers".into());
        }
        return Ok(Op::Swap(parse_reg(regs[0])?, parse_reg(regs[1])?));
    }
    if let Some(rest) = line.strip_prefix('(') {
        let (pair, tail) = rest.split_once(')').ok_or("missing `)`")?;
        let (lo, hi) = pair.split_once(',').ok_or("expected `(lo,hi)`")?;
        let rhs = tail.trim().strip_prefix("+=").ok_or("expected `+=` after `(lo,hi)`")?;
        let (l, r) = rhs.split_once('*').ok_or("expected `lhs*rhs`")?;
        return Ok(Op::MulAcc2 { lo: parse_reg(lo)?, hi: parse_reg(hi)?, lhs: parse_reg(l)?, rhs: parse_reg(r)? });
    }
    let (pos, op) = ["+=", "-=", "*=", "/="]
        .iter()
        .filter_map(|o| line.find(o).map(|i| (i, *o)))
        .min()
        .ok_or("expected one of `+=`, `-=`, `*=`, `/=`, `swap`")?;
    let dst = parse_reg(&line[..pos])?;
    let rhs: String = line[pos + 2..].chars().filter(|ch| !ch.is_whitespace()).collect();
    match op {
        "*=" | "/=" => {
            let coeff = parse_coeff(&rhs, p)?;
            if coeff == 0 {
                return Err("scaling by zero".into());
            }
            Ok(if op == "*=" { Op::Scale { dst, coeff } } else { Op::ScaleInv { dst, coeff } })
        }
        _ => {
            let negate = op == "-=";
            if let Some((l, r)) = rhs.split_once('*') {
                if let Ok(lhs) = parse_reg(l) {
                    if negate {
                        return Err("products can only be accumulated with `+=`".into());
                    }
                    return Ok(Op::MulAcc { dst, lhs, rhs: parse_reg(r)? });
                }
                let coeff = parse_coeff(l, p)?;
                let coeff = if negate { (p - coeff) % p } else { coeff };
                Ok(Op::AddMul { dst, src: parse_reg(r)?, coeff })
            } else {
                let src = parse_reg(&rhs)?;
                Ok(Op::AddMul { dst, src, coeff: if negate { p - 1 } else { 1 } })
            }
        }
    }
}

/// Why a verification trial failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FailureKind {
    NotRestored(Bank),
    WrongResult,
    ExecutionError,
}

/// The first failing trial of a verification run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    pub trial: usize,
    pub kind: FailureKind,
    pub a: Vec<u64>,
    pub b: Vec<u64>,
    pub c: Vec<u64>,
    pub a_after: Vec<u64>,
    pub b_after: Vec<u64>,
    pub c_after: Vec<u64>,
    pub expected: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifyReport {
    pub trials: usize,
    pub passed: usize,
    pub failure: Option<Counterexample>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.failure.is_none()
    }
}

/// Runs `prog` on random banks and checks restoration of `a`, `b` and the
/// value of `c` against `oracle(a, b, c)`. Stops at the first failure.
pub fn verify_restoration<O>(prog: &Program, f: &FieldCtx, oracle: O, trials: usize, seed: u64) -> VerifyReport
where
    O: Fn(&[u64], &[u64], &[u64]) -> Vec<u64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m, n, s) = prog.sizes();
    let p = f.modulus();
    let mut passed = 0;
    for trial in 0..trials {
        let a: Vec<u64> = (0..m).map(|_| rng.gen_range(0..p)).collect();
        let b: Vec<u64> = (0..n).map(|_| rng.gen_range(0..p)).collect();
        let c: Vec<u64> = (0..s).map(|_| rng.gen_range(0..p)).collect();
        let (mut a2, mut b2, mut c2) = (a.clone(), b.clone(), c.clone());
        let expected = oracle(&a, &b, &c);
        let kind = if prog.execute(f, &mut a2, &mut b2, &mut c2).is_err() {
            Some(FailureKind::ExecutionError)
        } else if a2 != a {
            Some(FailureKind::NotRestored(Bank::A))
        } else if b2 != b {
            Some(FailureKind::NotRestored(Bank::B))
        } else if c2 != expected {
            Some(FailureKind::WrongResult)
        } else {
            None
        };
        match kind {
            None => passed += 1,
            Some(kind) => {
                return VerifyReport {
                    trials,
                    passed,
                    failure: Some(Counterexample {
                        trial,
                        kind,
                        a,
                        b,
                        c,
                        a_after: a2,
                        b_after: b2,
                        c_after: c2,
                        expected,
                    }),
                }
            }
        }
    }
    VerifyReport { trials, passed, failure: None }
}
