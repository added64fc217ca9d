//! In-place accumulating multiplication kernels over prime fields.
//!
//! Every kernel computes `C += A * B` (or `C -= A * B`) using only the
//! storage of its operands plus a constant number of scalars. Inputs may be
//! modified during a call and are restored bit-exactly before it returns.
//!
//! * [`field`]: prime-field arithmetic, roots of unity, skew-unitary pairs.
//! * [`slp`]: straight-line program IR, interpreter, counting, text form.
//! * [`bilinear_gen`]: compiles bilinear formulas into in-place programs.
//! * [`matmul`]: classical, Strassen-Winograd, SYRK and square kernels.
//! * [`polymul`]: classical, Karatsuba and Toom-3 kernels.
//! * [`transform`]: bit-reversed NTTs, truncated transforms, FFT products.
//! * [`cli`]: the `accmul` command-line tool.

#![allow(clippy::too_many_arguments)]

pub mod bilinear_gen;
pub mod cli;
pub mod error;
pub mod field;
pub mod matmul;
pub mod polymul;
pub mod probe;
pub mod slp;
pub mod transform;

pub use error::{Error, Result};
pub use field::{FieldCtx, FieldElement, SkewUnitaryPair};
pub use probe::{LevelKind, LevelStat, Probe, Trace};
pub use slp::{OpCounts, Program};

/// Whether a kernel adds or subtracts its product.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    /// `self * other` in `{+1, -1}`.
    pub fn times(self, other: Sign) -> Sign {
        if self == other {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    /// Applies the sign to a residue.
    #[inline]
    pub fn apply(self, f: &FieldCtx, x: FieldElement) -> FieldElement {
        match self {
            Sign::Plus => x,
            Sign::Minus => f.neg(x),
        }
    }
}
