//! The `accmul` command-line tool.
//!
//! Exit codes: 0 success, 1 input error, 2 count mismatch, 3 verification
//! failure, 4 no suitable root of unity.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bilinear_gen::{
    generate_inplace, generate_inplace_2d, oracle_bilinear, oracle_bilinear_2d, parse_hm, predicted_counts,
    predicted_counts_2d, scheduled_counts_2d, to_2d, HmFile,
};
use crate::error::Error;
use crate::field::FieldCtx;
use crate::matmul::{self, MatMut, MatRef};
use crate::polymul::{self, Toom3Plan};
use crate::slp::{verify_restoration, OpCounts, Program};
use crate::transform::{self, TwiddleCtx};
use crate::{Sign, Trace};

pub const EXIT_INPUT: i32 = 1;
pub const EXIT_COUNT_MISMATCH: i32 = 2;
pub const EXIT_VERIFY_FAILED: i32 = 3;
pub const EXIT_NO_ROOT: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "accmul", version, about = "In-place accumulating multiplication over prime fields")]
struct Cli {
    /// Prime modulus of the field.
    #[arg(long, global = true, default_value_t = 65537)]
    modulus: u64,
    /// Recursion threshold; defaults to 8 for matrices and 4 for polynomials.
    #[arg(long, global = true)]
    threshold: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Print the in-place program of a bilinear formula file.
    Generate {
        hm: PathBuf,
        /// Treat products as double-width (expands a `#mu` block).
        #[arg(long)]
        two_d: bool,
    },
    /// Compare predicted and measured operation counts of the program.
    Counts {
        hm: PathBuf,
        #[arg(long)]
        two_d: bool,
    },
    /// Check correctness and input restoration on random banks.
    Verify {
        hm: PathBuf,
        #[arg(long)]
        two_d: bool,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Accumulate a product into the C file.
    Mul {
        #[arg(long, value_enum)]
        algo: Algo,
        #[arg(long)]
        a: PathBuf,
        /// Second operand; not used by `square` and `syrk`.
        #[arg(long)]
        b: Option<PathBuf>,
        #[arg(long)]
        c: PathBuf,
        /// Formula file for `bilinear` and `bilinear2d`.
        #[arg(long)]
        hm: Option<PathBuf>,
    },
    /// Operation counts and timings over a range of sizes.
    Bench {
        #[arg(long, value_enum)]
        algo: Algo,
        #[arg(long, value_delimiter = ',', default_values_t = [16usize, 32, 64, 128, 256])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Algo {
    Classic,
    Strassen,
    Syrk,
    Square,
    Karatsuba,
    Toom3,
    /// Power-of-two FFT product (equal power-of-two lengths).
    Fft,
    /// Truncated-transform FFT product (any lengths).
    Tft,
    /// Scalar program on flat banks.
    Bilinear,
    /// Double-width program on polynomial blocks.
    Bilinear2d,
}

impl Algo {
    fn is_matrix(self) -> bool {
        matches!(self, Algo::Strassen | Algo::Syrk | Algo::Square)
    }
}

/// A failed command: exit code and message for standard error.
#[derive(Debug)]
struct Failure {
    code: i32,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if matches!(e, Error::NoSuchRoot { .. }) { EXIT_NO_ROOT } else { EXIT_INPUT };
        Failure { code, msg: e.to_string() }
    }
}

fn input(msg: impl Into<String>) -> Failure {
    Failure { code: EXIT_INPUT, msg: msg.into() }
}

type CmdResult = std::result::Result<i32, Failure>;

/// Runs the tool on `args` (including the program name) and returns the
/// exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{text}");
                0
            } else {
                let _ = write!(err, "{text}");
                EXIT_INPUT
            };
        }
    };
    let mut text = String::new();
    let result = dispatch(&cli, &mut text);
    let _ = out.write_all(text.as_bytes());
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.msg);
            f.code
        }
    }
}

fn dispatch(cli: &Cli, out: &mut String) -> CmdResult {
    let f = FieldCtx::new(cli.modulus)?;
    match &cli.cmd {
        Cmd::Generate { hm, two_d } => {
            let prog = load_program(&f, hm, *two_d)?.1;
            out.push_str(&prog.render());
            Ok(0)
        }
        Cmd::Counts { hm, two_d } => cmd_counts(&f, hm, *two_d, out),
        Cmd::Verify { hm, two_d, trials, seed } => cmd_verify(&f, hm, *two_d, *trials, *seed, out),
        Cmd::Mul { algo, a, b, c, hm } => cmd_mul(&f, cli.threshold, *algo, a, b.as_deref(), c, hm.as_deref(), out),
        Cmd::Bench { algo, sizes, seed } => cmd_bench(&f, cli.threshold, *algo, sizes, *seed, out),
    }
}

fn read(path: &Path) -> std::result::Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn load_hm(f: &FieldCtx, path: &Path, two_d: bool) -> std::result::Result<HmFile, Failure> {
    let file = parse_hm(f, &read(path)?).map_err(|e| input(format!("{}: {e}", path.display())))?;
    Ok(match file {
        HmFile::OneD(rep) if two_d => HmFile::TwoD(to_2d(&rep)?),
        other => other,
    })
}

fn load_program(f: &FieldCtx, path: &Path, two_d: bool) -> std::result::Result<(HmFile, Program), Failure> {
    let file = load_hm(f, path, two_d)?;
    let prog = match &file {
        HmFile::OneD(rep) => generate_inplace(f, rep)?,
        HmFile::TwoD(rep) => generate_inplace_2d(f, rep)?,
    };
    Ok((file, prog))
}

fn count_row(out: &mut String, label: &str, c: OpCounts) {
    let _ = writeln!(out, "{label:<12}{:>8}{:>8}{:>8}", c.mul, c.add, c.sca);
}

fn cmd_counts(f: &FieldCtx, path: &Path, two_d: bool, out: &mut String) -> CmdResult {
    let (file, prog) = load_program(f, path, two_d)?;
    let measured = prog.count_ops();
    let _ = writeln!(out, "{:<12}{:>8}{:>8}{:>8}", "", "MUL", "ADD", "SCA");
    let expected = match &file {
        HmFile::OneD(rep) => {
            let predicted = predicted_counts(f, rep);
            count_row(out, "predicted", predicted);
            count_row(out, "measured", measured);
            predicted
        }
        HmFile::TwoD(rep) => {
            let scheduled = scheduled_counts_2d(f, rep)?;
            let t = rep.products() as u64;
            count_row(out, "scheduled", scheduled);
            count_row(out, "measured", measured);
            count_row(out, "bound", predicted_counts_2d(f, rep));
            let products = OpCounts::new(t, 2 * t, 0);
            let rest = OpCounts::new(measured.mul - products.mul, measured.add.saturating_sub(products.add), measured.sca);
            count_row(out, "non-product", rest);
            scheduled
        }
    };
    if expected == measured {
        let _ = writeln!(out, "counts agree");
        Ok(0)
    } else {
        let _ = writeln!(out, "counts DIFFER");
        Ok(EXIT_COUNT_MISMATCH)
    }
}

fn cmd_verify(f: &FieldCtx, path: &Path, two_d: bool, trials: usize, seed: u64, out: &mut String) -> CmdResult {
    let (file, prog) = load_program(f, path, two_d)?;
    let report = match &file {
        HmFile::OneD(rep) => verify_restoration(&prog, f, |a, b, c| oracle_bilinear(f, rep, a, b, c), trials, seed),
        HmFile::TwoD(rep) => verify_restoration(&prog, f, |a, b, c| oracle_bilinear_2d(f, rep, a, b, c), trials, seed),
    };
    match &report.failure {
        None => {
            let _ = writeln!(out, "pass: {}/{} trials (p = {}, seed = {seed})", report.passed, report.trials, f.modulus());
            Ok(0)
        }
        Some(cx) => {
            let _ = writeln!(out, "FAIL at trial {}: {:?}", cx.trial, cx.kind);
            for (name, v) in [
                ("a", &cx.a),
                ("b", &cx.b),
                ("c", &cx.c),
                ("a after", &cx.a_after),
                ("b after", &cx.b_after),
                ("c after", &cx.c_after),
                ("expected c", &cx.expected),
            ] {
                let _ = writeln!(out, "  {name:<11}{v:?}");
            }
            Ok(EXIT_VERIFY_FAILED)
        }
    }
}

/// Contents of a data file: a matrix or a polynomial.
#[derive(Clone, Debug, PartialEq, Eq)]
enum Data {
    Matrix { rows: usize, cols: usize, data: Vec<u64> },
    Poly(Vec<u64>),
}

impl Data {
    fn values(&mut self) -> &mut Vec<u64> {
        match self {
            Data::Matrix { data, .. } | Data::Poly(data) => data,
        }
    }

    fn render(&self) -> String {
        let mut s = String::new();
        match self {
            Data::Matrix { rows, cols, data } => {
                let _ = writeln!(s, "{rows} {cols}");
                for r in 0..*rows {
                    let row: Vec<String> = data[r * cols..(r + 1) * cols].iter().map(u64::to_string).collect();
                    let _ = writeln!(s, "{}", row.join(" "));
                }
            }
            Data::Poly(data) => {
                let _ = writeln!(s, "{}", data.len());
                let row: Vec<String> = data.iter().map(u64::to_string).collect();
                let _ = writeln!(s, "{}", row.join(" "));
            }
        }
        s
    }
}

/// Parses a data file: a header of `<rows> <cols>` (matrix) or `<len>`
/// (polynomial), then decimal entries reduced modulo `p`. Lines starting
/// with `#` are comments.
fn parse_data(f: &FieldCtx, text: &str) -> std::result::Result<Data, String> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header: Vec<&str> = lines.next().ok_or("empty file")?.split_whitespace().collect();
    let dim = |t: &str| t.parse::<usize>().map_err(|_| format!("bad dimension `{t}`"));
    let entries = lines
        .flat_map(str::split_whitespace)
        .map(|t| t.parse::<i128>().map(|v| f.reduce_i128(v)).map_err(|_| format!("bad entry `{t}`")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let (want, data) = match header[..] {
        [r, c] => {
            let (rows, cols) = (dim(r)?, dim(c)?);
            (rows * cols, Data::Matrix { rows, cols, data: entries })
        }
        [n] => (dim(n)?, Data::Poly(entries)),
        _ => return Err("header must be `<rows> <cols>` or `<len>`".into()),
    };
    let mut data = data;
    let got = data.values().len();
    if got != want {
        return Err(format!("expected {want} entries, found {got}"));
    }
    Ok(data)
}

fn load_data(f: &FieldCtx, path: &Path) -> std::result::Result<Data, Failure> {
    parse_data(f, &read(path)?).map_err(|m| input(format!("{}: {m}", path.display())))
}

fn matrix<'d>(d: &'d mut Data, what: &str) -> std::result::Result<(usize, usize, &'d mut [u64]), Failure> {
    match d {
        Data::Matrix { rows, cols, data } => Ok((*rows, *cols, data)),
        Data::Poly(_) => Err(input(format!("{what} must be a matrix file"))),
    }
}

fn poly<'d>(d: &'d mut Data, what: &str) -> std::result::Result<&'d mut [u64], Failure> {
    match d {
        Data::Poly(data) => Ok(data),
        Data::Matrix { .. } => Err(input(format!("{what} must be a polynomial file"))),
    }
}

/// Runs one algorithm on loaded operands. `b` is required except for the
/// square and SYRK kernels.
fn apply(
    f: &FieldCtx,
    threshold: Option<usize>,
    algo: Algo,
    a: &mut Data,
    b: Option<&mut Data>,
    c: &mut Data,
    prog: Option<&Program>,
    trace: &mut Trace,
) -> std::result::Result<(), Failure> {
    let mt = threshold.unwrap_or(matmul::DEFAULT_THRESHOLD);
    let pt = threshold.unwrap_or(polymul::DEFAULT_THRESHOLD);
    let need_b = || input(format!("--b is required for {algo:?}"));
    let plus = Sign::Plus;
    match algo {
        Algo::Square | Algo::Syrk => {
            let (ar, ac, ad) = matrix(a, "A")?;
            let (cr, cc, cd) = matrix(c, "C")?;
            let av = MatMut::from_slice(ad, ar, ac)?;
            let cv = MatMut::from_slice(cd, cr, cc)?;
            if algo == Algo::Square {
                matmul::square_acc(f, av, cv, plus, mt, trace)?;
            } else {
                matmul::syrk_acc(f, av, cv, f.find_skew_unitary_pair(), plus, mt, trace)?;
            }
        }
        Algo::Strassen => {
            let b = b.ok_or_else(need_b)?;
            let (ar, ac, ad) = matrix(a, "A")?;
            let (br, bc, bd) = matrix(b, "B")?;
            let (cr, cc, cd) = matrix(c, "C")?;
            matmul::mm_acc_strassen(
                f,
                MatMut::from_slice(ad, ar, ac)?,
                MatMut::from_slice(bd, br, bc)?,
                MatMut::from_slice(cd, cr, cc)?,
                plus,
                mt,
                trace,
            )?;
        }
        Algo::Classic => {
            let b = b.ok_or_else(need_b)?;
            if let Data::Matrix { .. } = a {
                let (ar, ac, ad) = matrix(a, "A")?;
                let (br, bc, bd) = matrix(b, "B")?;
                let (cr, cc, cd) = matrix(c, "C")?;
                matmul::mm_acc_classic(
                    f,
                    MatRef::from_slice(ad, ar, ac)?,
                    MatRef::from_slice(bd, br, bc)?,
                    MatMut::from_slice(cd, cr, cc)?,
                    plus,
                    trace,
                )?;
            } else {
                polymul::pm_acc_classic(f, poly(a, "A")?, poly(b, "B")?, poly(c, "C")?, plus, trace)?;
            }
        }
        Algo::Karatsuba | Algo::Toom3 | Algo::Fft | Algo::Tft => {
            let b = b.ok_or_else(need_b)?;
            let (a, b, c) = (poly(a, "A")?, poly(b, "B")?, poly(c, "C")?);
            match algo {
                Algo::Karatsuba => polymul::pm_acc_karatsuba(f, a, b, c, plus, pt, trace)?,
                Algo::Toom3 => polymul::pm_acc_toom3(&Toom3Plan::new(f)?, f, a, b, c, plus, pt, trace)?,
                Algo::Fft => {
                    let n = a.len();
                    if n == 0 || !n.is_power_of_two() || b.len() != n || c.len() != 2 * n - 1 {
                        return Err(input("fft needs A and B of the same power-of-two length n and C of length 2n - 1; use tft otherwise"));
                    }
                    let ctx = TwiddleCtx::new(f, (2 * n).trailing_zeros())?;
                    with_top_slot(c, |wide| transform::pm_acc_fft_pow2(&ctx, a, b, wide, plus, trace))?;
                }
                _ => {
                    let ctx = TwiddleCtx::for_length(f, c.len())?;
                    transform::pm_acc_fft(&ctx, a, b, c, plus, trace)?;
                }
            }
        }
        Algo::Bilinear | Algo::Bilinear2d => {
            let b = b.ok_or_else(need_b)?;
            let prog = prog.ok_or_else(|| input(format!("--hm is required for {algo:?}")))?;
            let (a, b, c) = (a.values(), b.values(), c.values());
            if algo == Algo::Bilinear {
                let sizes = prog.sizes();
                if (a.len(), b.len(), c.len()) != sizes {
                    return Err(input(format!("program banks are {sizes:?}, files hold ({}, {}, {})", a.len(), b.len(), c.len())));
                }
                prog.execute(f, a, b, c)?;
                *trace = Trace { ops: prog.count_ops(), ..Trace::default() };
            } else {
                polymul::pm_acc_program(prog, f, a, b, c, plus, pt, trace)?;
            }
        }
    }
    Ok(())
}

/// Runs `k` on `c` extended by one zero coefficient, which the product
/// leaves at zero.
fn with_top_slot<F>(c: &mut [u64], k: F) -> crate::Result<()>
where
    F: FnOnce(&mut [u64]) -> crate::Result<()>,
{
    let mut wide = Vec::with_capacity(c.len() + 1);
    wide.extend_from_slice(c);
    wide.push(0);
    k(&mut wide)?;
    c.copy_from_slice(&wide[..c.len()]);
    Ok(())
}

fn cmd_mul(
    f: &FieldCtx,
    threshold: Option<usize>,
    algo: Algo,
    a_path: &Path,
    b_path: Option<&Path>,
    c_path: &Path,
    hm: Option<&Path>,
    out: &mut String,
) -> CmdResult {
    let mut a = load_data(f, a_path)?;
    let mut b = b_path.map(|p| load_data(f, p)).transpose()?;
    let mut c = load_data(f, c_path)?;
    let prog = match (algo, hm) {
        (Algo::Bilinear, Some(p)) => Some(load_program(f, p, false)?.1),
        (Algo::Bilinear2d, Some(p)) => Some(load_program(f, p, true)?.1),
        _ => None,
    };
    let mut trace = Trace::new();
    apply(f, threshold, algo, &mut a, b.as_mut(), &mut c, prog.as_ref(), &mut trace)?;
    std::fs::write(c_path, c.render()).map_err(|e| input(format!("{}: {e}", c_path.display())))?;
    let ops = trace.ops;
    let _ = write!(out, "{algo:?}: MUL {} ADD {} SCA {}", ops.mul, ops.add, ops.sca);
    if !trace.transforms.is_empty() {
        let _ = write!(out, " transforms {}", trace.transforms.len());
    }
    let _ = writeln!(out);
    Ok(0)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fitted_exponent(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
    (den > 0.0).then(|| num / den)
}

fn random_inputs(f: &FieldCtx, algo: Algo, n: usize, rng: &mut ChaCha8Rng) -> (Data, Option<Data>, Data) {
    let p = f.modulus();
    let mut vec = |len: usize| -> Vec<u64> { (0..len).map(|_| rng.gen_range(0..p)).collect() };
    if algo.is_matrix() || algo == Algo::Classic {
        let m = |data| Data::Matrix { rows: n, cols: n, data };
        (m(vec(n * n)), Some(m(vec(n * n))), m(vec(n * n)))
    } else {
        (Data::Poly(vec(n)), Some(Data::Poly(vec(n))), Data::Poly(vec(2 * n - 1)))
    }
}

fn cmd_bench(f: &FieldCtx, threshold: Option<usize>, algo: Algo, sizes: &[usize], seed: u64, out: &mut String) -> CmdResult {
    if matches!(algo, Algo::Bilinear | Algo::Bilinear2d) {
        return Err(input("bench supports the built-in kernels only"));
    }
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(input("sizes must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let _ = writeln!(out, "{:>8}{:>14}{:>14}{:>14}{:>12}{:>12}", "n", "MUL", "ADD", "SCA", "transforms", "ms");
    let mut muls = Vec::new();
    let mut times = Vec::new();
    for &n in sizes {
        let (mut a, mut b, mut c) = random_inputs(f, algo, n, &mut rng);
        let mut trace = Trace::new();
        let start = Instant::now();
        apply(f, threshold, algo, &mut a, b.as_mut(), &mut c, None, &mut trace)?;
        let ms = start.elapsed().as_secs_f64() * 1e3;
        let o = trace.ops;
        let _ = writeln!(out, "{n:>8}{:>14}{:>14}{:>14}{:>12}{ms:>12.3}", o.mul, o.add, o.sca, trace.transforms.len());
        muls.push((n as f64, o.mul as f64));
        times.push((n as f64, ms));
    }
    if let Some(e) = fitted_exponent(&muls) {
        let _ = writeln!(out, "fitted exponent (MUL vs n): {e:.3}");
    }
    if let Some(e) = fitted_exponent(&times) {
        let _ = writeln!(out, "fitted exponent (time vs n): {e:.3}");
    }
    Ok(0)
}
