use thiserror::Error as ThisError;

/// Which matrix of a bilinear representation an error refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HmMatrix {
    Alpha,
    Beta,
    Mu,
}

impl std::fmt::Display for HmMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            HmMatrix::Alpha => "alpha",
            HmMatrix::Beta => "beta",
            HmMatrix::Mu => "mu",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, ThisError)]
pub enum Error {
    #[error("{0} is not an odd prime below 2^63")]
    InvalidModulus(u64),
    #[error("zero has no inverse")]
    ZeroInverse,
    #[error("no principal root of unity of order {order} modulo {modulus}")]
    NoSuchRoot { modulus: u64, order: u64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("views overlap")]
    OverlappingViews,
    #[error("row {row} of {which} is zero")]
    ZeroRow { which: HmMatrix, row: usize },
    #[error("column {col} of mu is zero")]
    ZeroColumn { col: usize },
    #[error("column pair {pair} of mu2 has no invertible 2x2 sub-matrix")]
    RankDeficientPair { pair: usize },
    #[error("singular 2x2 block")]
    SingularBlock,
    #[error("a representation needs at least one product")]
    NoProducts,
    #[error("characteristic {0} is not supported by this algorithm")]
    UnsupportedCharacteristic(u64),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
