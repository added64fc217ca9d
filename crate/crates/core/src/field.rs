//! Prime-field arithmetic on canonical `u64` residues.
//!
//! A [`FieldCtx`] holds an odd prime `p < 2^63`. Elements are plain `u64`
//! values in `[0, p)`; every operation takes and returns canonical residues.
//! Products go through `u128` (or `u64` when `p < 2^32`).

use crate::error::{Error, Result};

/// A canonical residue modulo the context prime.
pub type FieldElement = u64;

/// Immutable context for arithmetic modulo an odd prime.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldCtx {
    p: u64,
    two_adicity: u32,
    generator_2k: Option<u64>,
}

/// A pair `(a, b)` with `a^2 + b^2 = -1` and `a != 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SkewUnitaryPair {
    pub a: FieldElement,
    pub b: FieldElement,
}

impl FieldCtx {
    /// Builds a context for the odd prime `p`.
    pub fn new(p: u64) -> Result<Self> {
        if !(3..1 << 63).contains(&p) || !is_prime(p) {
            return Err(Error::InvalidModulus(p));
        }
        let two_adicity = (p - 1).trailing_zeros();
        Ok(FieldCtx { p, two_adicity, generator_2k: None })
    }

    /// Builds a context and precomputes a principal `2^two_adicity`-th root.
    pub fn with_roots(p: u64) -> Result<Self> {
        let mut ctx = Self::new(p)?;
        ctx.generator_2k = Some(ctx.compute_generator_2k());
        Ok(ctx)
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    pub fn two_adicity(&self) -> u32 {
        self.two_adicity
    }

    pub fn generator_2k(&self) -> Option<FieldElement> {
        self.generator_2k
    }

    /// Reduces an arbitrary signed integer to its canonical residue.
    pub fn reduce_i128(&self, v: i128) -> FieldElement {
        v.rem_euclid(self.p as i128) as u64
    }

    pub fn reduce_u64(&self, v: u64) -> FieldElement {
        v % self.p
    }

    #[inline]
    pub fn add(&self, x: FieldElement, y: FieldElement) -> FieldElement {
        let s = x + y;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, x: FieldElement, y: FieldElement) -> FieldElement {
        if x >= y {
            x - y
        } else {
            x + self.p - y
        }
    }

    #[inline]
    pub fn neg(&self, x: FieldElement) -> FieldElement {
        if x == 0 {
            0
        } else {
            self.p - x
        }
    }

    #[inline]
    pub fn mul(&self, x: FieldElement, y: FieldElement) -> FieldElement {
        if self.p < 1 << 32 {
            (x * y) % self.p
        } else {
            ((x as u128 * y as u128) % self.p as u128) as u64
        }
    }

    /// `x + y*z`.
    #[inline]
    pub fn mul_add(&self, x: FieldElement, y: FieldElement, z: FieldElement) -> FieldElement {
        self.add(x, self.mul(y, z))
    }

    /// Splits the integer product `x*y` into base-p digits `(lo, hi)`.
    #[inline]
    pub fn mul_wide(&self, x: FieldElement, y: FieldElement) -> (FieldElement, FieldElement) {
        let prod = x as u128 * y as u128;
        let p = self.p as u128;
        ((prod % p) as u64, (prod / p) as u64)
    }

    pub fn pow(&self, mut x: FieldElement, mut e: u64) -> FieldElement {
        let mut acc = 1 % self.p;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, x);
            }
            x = self.mul(x, x);
            e >>= 1;
        }
        acc
    }

    pub fn inv(&self, x: FieldElement) -> Result<FieldElement> {
        if x % self.p == 0 {
            return Err(Error::ZeroInverse);
        }
        Ok(self.pow(x, self.p - 2))
    }

    /// `x / y`.
    pub fn div(&self, x: FieldElement, y: FieldElement) -> Result<FieldElement> {
        Ok(self.mul(x, self.inv(y)?))
    }

    pub fn is_square(&self, x: FieldElement) -> bool {
        x == 0 || self.pow(x, (self.p - 1) / 2) == 1
    }

    /// Smaller of the two square roots of `x`, if `x` is a square.
    pub fn sqrt(&self, x: FieldElement) -> Option<FieldElement> {
        if x == 0 {
            return Some(0);
        }
        if !self.is_square(x) {
            return None;
        }
        let p = self.p;
        let s = self.two_adicity;
        let q = (p - 1) >> s;
        let z = self.smallest_non_residue();
        let mut m = s;
        let mut c = self.pow(z, q);
        let mut t = self.pow(x, q);
        let mut r = self.pow(x, q.div_ceil(2));
        while t != 1 {
            let mut i = 0;
            let mut t2 = t;
            while t2 != 1 {
                t2 = self.mul(t2, t2);
                i += 1;
            }
            let b = self.pow(c, 1 << (m - i - 1));
            m = i;
            c = self.mul(b, b);
            t = self.mul(t, c);
            r = self.mul(r, b);
        }
        Some(r.min(p - r))
    }

    fn smallest_non_residue(&self) -> FieldElement {
        (2..self.p).find(|&z| !self.is_square(z)).expect("odd prime has a non-residue")
    }

    fn compute_generator_2k(&self) -> FieldElement {
        let g = self.smallest_non_residue();
        self.pow(g, (self.p - 1) >> self.two_adicity)
    }

    /// Principal `n`-th root of unity for a power of two `n`.
    ///
    /// The result is a power of the fixed 2-adic generator, so it is stable
    /// for a given prime.
    pub fn find_principal_root(&self, n: u64) -> Result<FieldElement> {
        if n == 0 || !n.is_power_of_two() || n.trailing_zeros() > self.two_adicity {
            return Err(Error::NoSuchRoot { modulus: self.p, order: n });
        }
        let gen = match self.generator_2k {
            Some(g) => g,
            None => self.compute_generator_2k(),
        };
        Ok(self.pow(gen, 1u64 << (self.two_adicity - n.trailing_zeros())))
    }

    /// The skew-unitary pair with the smallest `a`.
    pub fn find_skew_unitary_pair(&self) -> SkewUnitaryPair {
        for a in 1..self.p {
            let target = self.sub(self.neg(1), self.mul(a, a));
            if let Some(b) = self.sqrt(target) {
                return SkewUnitaryPair { a, b };
            }
        }
        unreachable!("every odd prime field has a sum of two squares equal to -1")
    }
}

/// Deterministic Miller-Rabin for 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for sp in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % sp == 0 {
            return n == sp;
        }
    }
    let d = (n - 1) >> (n - 1).trailing_zeros();
    let s = (n - 1).trailing_zeros();
    let mulmod = |x: u64, y: u64| ((x as u128 * y as u128) % n as u128) as u64;
    let powmod = |mut b: u64, mut e: u64| {
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = mulmod(acc, b);
            }
            b = mulmod(b, b);
            e >>= 1;
        }
        acc
    };
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}
