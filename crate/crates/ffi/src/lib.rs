//! C ABI for the accmul kernels.
//!
//! Fields and programs are opaque heap handles created and released through
//! this interface. Every entry point returns an [`AccmulStatus`]; on failure
//! a human-readable message is available from [`accmul_last_error`] on the
//! same thread until the next call.
//!
//! Arrays are row-major `uint64_t` buffers of canonical residues in
//! `[0, p)`. Kernels may modify their operand buffers during a call and
//! restore them before returning, so operands must not alias each other or
//! the result.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use accmul::bilinear_gen::{generate_inplace, generate_inplace_2d, parse_hm, to_2d, HmFile};
use accmul::matmul::{mm_acc_classic, mm_acc_strassen, square_acc, syrk_acc, MatMut, MatRef};
use accmul::polymul::{pm_acc_karatsuba, pm_acc_toom3, Toom3Plan};
use accmul::transform::{pm_acc_fft, TwiddleCtx};
use accmul::{Error, FieldCtx, Program, Sign};

/// Result code of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AccmulStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidModulus = 2,
    ShapeMismatch = 3,
    Aliasing = 4,
    UnreducedInput = 5,
    NoRootOfUnity = 6,
    Unsupported = 7,
    InvalidFormula = 8,
    Parse = 9,
    Internal = 10,
}

/// Whether a kernel adds or subtracts the product.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AccmulSign {
    Plus = 0,
    Minus = 1,
}

/// Operation tallies of a program.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AccmulCounts {
    pub mul: u64,
    pub add: u64,
    pub sca: u64,
}

/// Prime field handle.
pub struct AccmulField {
    ctx: FieldCtx,
}

/// Straight-line program handle.
pub struct AccmulProgram {
    prog: Program,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(AccmulStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidModulus(_) => AccmulStatus::InvalidModulus,
            Error::ShapeMismatch(_) => AccmulStatus::ShapeMismatch,
            Error::OverlappingViews => AccmulStatus::Aliasing,
            Error::NoSuchRoot { .. } => AccmulStatus::NoRootOfUnity,
            Error::UnsupportedCharacteristic(_) => AccmulStatus::Unsupported,
            Error::Parse { .. } => AccmulStatus::Parse,
            Error::ZeroRow { .. }
            | Error::ZeroColumn { .. }
            | Error::RankDeficientPair { .. }
            | Error::SingularBlock
            | Error::NoProducts
            | Error::ZeroInverse => AccmulStatus::InvalidFormula,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: AccmulStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

/// Runs `body`, recording any failure message and converting panics.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> AccmulStatus {
    let outcome = catch_unwind(AssertUnwindSafe(body)).unwrap_or_else(|_| Err(fail(AccmulStatus::Internal, "internal panic")));
    match outcome {
        Ok(()) => {
            set_last_error("");
            AccmulStatus::Ok
        }
        Err(Failure(status, msg)) => {
            set_last_error(&msg);
            status
        }
    }
}

fn sign(s: AccmulSign) -> Sign {
    match s {
        AccmulSign::Plus => Sign::Plus,
        AccmulSign::Minus => Sign::Minus,
    }
}

fn checked_len(rows: usize, cols: usize) -> Result<usize, Failure> {
    rows.checked_mul(cols).ok_or_else(|| fail(AccmulStatus::ShapeMismatch, "dimension product overflows"))
}

/// A caller buffer described by pointer and length.
#[derive(Clone, Copy)]
struct Buf {
    ptr: *mut u64,
    len: usize,
    name: &'static str,
}

impl Buf {
    fn new(ptr: *const u64, len: usize, name: &'static str) -> Result<Self, Failure> {
        if ptr.is_null() {
            return Err(fail(AccmulStatus::NullPointer, format!("`{name}` is null")));
        }
        if len > isize::MAX as usize / 8 {
            return Err(fail(AccmulStatus::ShapeMismatch, format!("`{name}` is too long")));
        }
        Ok(Buf { ptr: ptr as *mut u64, len, name })
    }

    fn range(&self) -> (usize, usize) {
        let start = self.ptr as usize;
        (start, start + self.len * 8)
    }

    /// # Safety
    /// `ptr` must be valid for reads of `len` elements.
    unsafe fn as_slice<'a>(&self) -> &'a [u64] {
        unsafe { std::slice::from_raw_parts(self.ptr, self.len) }
    }

    /// # Safety
    /// `ptr` must be valid for reads and writes of `len` elements and not
    /// aliased by any other live reference.
    unsafe fn as_mut<'a>(&self) -> &'a mut [u64] {
        unsafe { std::slice::from_raw_parts_mut(self.ptr, self.len) }
    }
}

fn check_disjoint(bufs: &[Buf]) -> Result<(), Failure> {
    for (i, x) in bufs.iter().enumerate() {
        for y in &bufs[i + 1..] {
            let ((xs, xe), (ys, ye)) = (x.range(), y.range());
            if x.len > 0 && y.len > 0 && xs < ye && ys < xe {
                return Err(fail(AccmulStatus::Aliasing, format!("`{}` and `{}` overlap", x.name, y.name)));
            }
        }
    }
    Ok(())
}

/// # Safety
/// Every buffer must be valid for reads of its length.
unsafe fn check_reduced(p: u64, bufs: &[Buf]) -> Result<(), Failure> {
    for b in bufs {
        if let Some(i) = unsafe { b.as_slice() }.iter().position(|&v| v >= p) {
            return Err(fail(AccmulStatus::UnreducedInput, format!("`{}`[{i}] is not reduced modulo {p}", b.name)));
        }
    }
    Ok(())
}

/// Validates pointers, disjointness and reduction; returns the field.
///
/// # Safety
/// `field` must be null or a live handle; buffers must be valid for their
/// lengths.
unsafe fn prepare<'a>(field: *const AccmulField, bufs: &[Buf]) -> Result<&'a FieldCtx, Failure> {
    let f = unsafe { field.as_ref() }.ok_or_else(|| fail(AccmulStatus::NullPointer, "`field` is null"))?;
    check_disjoint(bufs)?;
    unsafe { check_reduced(f.ctx.modulus(), bufs)? };
    Ok(&f.ctx)
}

/// Message describing the last failure on this thread, or an empty string.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn accmul_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates a field for the odd prime `p`, with roots of unity precomputed.
///
/// # Safety
/// `out` must be null or valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn accmul_field_new(p: u64, out: *mut *mut AccmulField) -> AccmulStatus {
    guard(|| {
        let out = unsafe { out.as_mut() }.ok_or_else(|| fail(AccmulStatus::NullPointer, "`out` is null"))?;
        *out = ptr::null_mut();
        let ctx = FieldCtx::with_roots(p)?;
        *out = Box::into_raw(Box::new(AccmulField { ctx }));
        Ok(())
    })
}

/// Releases a field. Null is ignored.
///
/// # Safety
/// `field` must be null or a handle from [`accmul_field_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn accmul_field_free(field: *mut AccmulField) {
    if !field.is_null() {
        drop(unsafe { Box::from_raw(field) });
    }
}

/// The modulus of `field`, or 0 for null.
///
/// # Safety
/// `field` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn accmul_field_modulus(field: *const AccmulField) -> u64 {
    unsafe { field.as_ref() }.map_or(0, |f| f.ctx.modulus())
}

/// `C += sign * A * B` by the classical algorithm; `A` is `m×k`, `B` is
/// `k×n`, `C` is `m×n`.
///
/// # Safety
/// Buffers must be valid for their stated sizes.
#[no_mangle]
pub unsafe extern "C" fn accmul_mm_classic(
    field: *const AccmulField,
    a: *const u64,
    b: *const u64,
    c: *mut u64,
    m: usize,
    k: usize,
    n: usize,
    s: AccmulSign,
) -> AccmulStatus {
    guard(|| {
        let ba = Buf::new(a, checked_len(m, k)?, "a")?;
        let bb = Buf::new(b, checked_len(k, n)?, "b")?;
        let bc = Buf::new(c, checked_len(m, n)?, "c")?;
        let f = unsafe { prepare(field, &[ba, bc])? };
        check_disjoint(&[bb, bc])?;
        unsafe { check_reduced(f.modulus(), &[bb])? };
        let (a, b, c) = unsafe { (ba.as_slice(), bb.as_slice(), bc.as_mut()) };
        mm_acc_classic(f, MatRef::from_slice(a, m, k)?, MatRef::from_slice(b, k, n)?, MatMut::from_slice(c, m, n)?, sign(s), &mut ())?;
        Ok(())
    })
}

/// `C += sign * A * B` for `n×n` matrices by the in-place Strassen-Winograd
/// schedule. `A` and `B` are modified during the call and restored.
///
/// # Safety
/// Buffers must be valid for `n*n` elements.
#[no_mangle]
pub unsafe extern "C" fn accmul_mm_strassen(
    field: *const AccmulField,
    a: *mut u64,
    b: *mut u64,
    c: *mut u64,
    n: usize,
    s: AccmulSign,
    threshold: usize,
) -> AccmulStatus {
    guard(|| {
        let len = checked_len(n, n)?;
        let bufs = [Buf::new(a, len, "a")?, Buf::new(b, len, "b")?, Buf::new(c, len, "c")?];
        let f = unsafe { prepare(field, &bufs)? };
        let [a, b, c] = bufs.map(|x| unsafe { x.as_mut() });
        mm_acc_strassen(f, MatMut::from_slice(a, n, n)?, MatMut::from_slice(b, n, n)?, MatMut::from_slice(c, n, n)?, sign(s), threshold, &mut ())?;
        Ok(())
    })
}

/// `C += sign * A * A` for `n×n` matrices.
///
/// # Safety
/// Buffers must be valid for `n*n` elements.
#[no_mangle]
pub unsafe extern "C" fn accmul_mm_square(
    field: *const AccmulField,
    a: *mut u64,
    c: *mut u64,
    n: usize,
    s: AccmulSign,
    threshold: usize,
) -> AccmulStatus {
    guard(|| {
        let len = checked_len(n, n)?;
        let bufs = [Buf::new(a, len, "a")?, Buf::new(c, len, "c")?];
        let f = unsafe { prepare(field, &bufs)? };
        let [a, c] = bufs.map(|x| unsafe { x.as_mut() });
        square_acc(f, MatMut::from_slice(a, n, n)?, MatMut::from_slice(c, n, n)?, sign(s), threshold, &mut ())?;
        Ok(())
    })
}

/// Lower triangle of `C += sign * A * A^T`, with `A` of shape `n×k` and `C`
/// of shape `n×n`. Entries above the diagonal are left untouched.
///
/// # Safety
/// Buffers must be valid for their stated sizes.
#[no_mangle]
pub unsafe extern "C" fn accmul_mm_syrk(
    field: *const AccmulField,
    a: *mut u64,
    c: *mut u64,
    n: usize,
    k: usize,
    s: AccmulSign,
    threshold: usize,
) -> AccmulStatus {
    guard(|| {
        let bufs = [Buf::new(a, checked_len(n, k)?, "a")?, Buf::new(c, checked_len(n, n)?, "c")?];
        let f = unsafe { prepare(field, &bufs)? };
        let y = f.find_skew_unitary_pair();
        let [a, c] = bufs.map(|x| unsafe { x.as_mut() });
        syrk_acc(f, MatMut::from_slice(a, n, k)?, MatMut::from_slice(c, n, n)?, y, sign(s), threshold, &mut ())?;
        Ok(())
    })
}

/// Buffers for a polynomial product: `|a| = m`, `|b| = n`, `|c| = m + n - 1`.
fn poly_bufs(a: *mut u64, m: usize, b: *mut u64, n: usize, c: *mut u64) -> Result<[Buf; 3], Failure> {
    if m == 0 || n == 0 {
        return Err(fail(AccmulStatus::ShapeMismatch, "operands must be nonempty"));
    }
    let clen = m.checked_add(n - 1).ok_or_else(|| fail(AccmulStatus::ShapeMismatch, "length overflows"))?;
    Ok([Buf::new(a, m, "a")?, Buf::new(b, n, "b")?, Buf::new(c, clen, "c")?])
}

/// `C += sign * A * B` for polynomials by Karatsuba. `c` holds `m + n - 1`
/// coefficients.
///
/// # Safety
/// Buffers must be valid for their stated lengths.
#[no_mangle]
pub unsafe extern "C" fn accmul_poly_karatsuba(
    field: *const AccmulField,
    a: *mut u64,
    m: usize,
    b: *mut u64,
    n: usize,
    c: *mut u64,
    s: AccmulSign,
    threshold: usize,
) -> AccmulStatus {
    guard(|| {
        let bufs = poly_bufs(a, m, b, n, c)?;
        let f = unsafe { prepare(field, &bufs)? };
        let [a, b, c] = bufs.map(|x| unsafe { x.as_mut() });
        pm_acc_karatsuba(f, a, b, c, sign(s), threshold, &mut ())?;
        Ok(())
    })
}

/// `C += sign * A * B` by Toom-3 for two operands of equal length `n`, a
/// multiple of 3. `c` holds `2n - 1` coefficients.
///
/// # Safety
/// Buffers must be valid for their stated lengths.
#[no_mangle]
pub unsafe extern "C" fn accmul_poly_toom3(
    field: *const AccmulField,
    a: *mut u64,
    b: *mut u64,
    n: usize,
    c: *mut u64,
    s: AccmulSign,
    threshold: usize,
) -> AccmulStatus {
    guard(|| {
        let bufs = poly_bufs(a, n, b, n, c)?;
        let f = unsafe { prepare(field, &bufs)? };
        let plan = Toom3Plan::new(f)?;
        let [a, b, c] = bufs.map(|x| unsafe { x.as_mut() });
        pm_acc_toom3(&plan, f, a, b, c, sign(s), threshold, &mut ())?;
        Ok(())
    })
}

/// `C += sign * A * B` through truncated Fourier transforms. Needs a
/// principal root of unity of order at least `m + n - 1`.
///
/// # Safety
/// Buffers must be valid for their stated lengths.
#[no_mangle]
pub unsafe extern "C" fn accmul_poly_fft(
    field: *const AccmulField,
    a: *mut u64,
    m: usize,
    b: *mut u64,
    n: usize,
    c: *mut u64,
    s: AccmulSign,
) -> AccmulStatus {
    guard(|| {
        let bufs = poly_bufs(a, m, b, n, c)?;
        let f = unsafe { prepare(field, &bufs)? };
        let ctx = TwiddleCtx::for_length(f, bufs[2].len)?;
        let [a, b, c] = bufs.map(|x| unsafe { x.as_mut() });
        pm_acc_fft(&ctx, a, b, c, sign(s), &mut ())?;
        Ok(())
    })
}

/// Compiles a bilinear formula in text form into an in-place program. With
/// `two_d` set, a scalar-width formula is widened so that each product
/// spans two result registers.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be valid for a
/// pointer write.
#[no_mangle]
pub unsafe extern "C" fn accmul_program_from_hm(
    field: *const AccmulField,
    text: *const c_char,
    two_d: bool,
    out: *mut *mut AccmulProgram,
) -> AccmulStatus {
    guard(|| {
        let out = unsafe { out.as_mut() }.ok_or_else(|| fail(AccmulStatus::NullPointer, "`out` is null"))?;
        *out = ptr::null_mut();
        let f = &unsafe { field.as_ref() }.ok_or_else(|| fail(AccmulStatus::NullPointer, "`field` is null"))?.ctx;
        if text.is_null() {
            return Err(fail(AccmulStatus::NullPointer, "`text` is null"));
        }
        let text = unsafe { CStr::from_ptr(text) }.to_str().map_err(|_| fail(AccmulStatus::Parse, "formula is not UTF-8"))?;
        let prog = match parse_hm(f, text)? {
            HmFile::OneD(rep) if two_d => generate_inplace_2d(f, &to_2d(&rep)?)?,
            HmFile::OneD(rep) => generate_inplace(f, &rep)?,
            HmFile::TwoD(rep) => generate_inplace_2d(f, &rep)?,
        };
        *out = Box::into_raw(Box::new(AccmulProgram { prog }));
        Ok(())
    })
}

/// Releases a program. Null is ignored.
///
/// # Safety
/// `prog` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn accmul_program_free(prog: *mut AccmulProgram) {
    if !prog.is_null() {
        drop(unsafe { Box::from_raw(prog) });
    }
}

/// Bank sizes `(m, n, s)` of a program.
///
/// # Safety
/// `prog` must be a live handle; the outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn accmul_program_sizes(prog: *const AccmulProgram, m: *mut usize, n: *mut usize, s: *mut usize) -> AccmulStatus {
    guard(|| {
        let prog = unsafe { prog.as_ref() }.ok_or_else(|| fail(AccmulStatus::NullPointer, "`prog` is null"))?;
        if m.is_null() || n.is_null() || s.is_null() {
            return Err(fail(AccmulStatus::NullPointer, "size output is null"));
        }
        let (sm, sn, ss) = prog.prog.sizes();
        unsafe {
            *m = sm;
            *n = sn;
            *s = ss;
        }
        Ok(())
    })
}

/// Operation counts of a program.
///
/// # Safety
/// `prog` must be a live handle; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn accmul_program_counts(prog: *const AccmulProgram, out: *mut AccmulCounts) -> AccmulStatus {
    guard(|| {
        let prog = unsafe { prog.as_ref() }.ok_or_else(|| fail(AccmulStatus::NullPointer, "`prog` is null"))?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| fail(AccmulStatus::NullPointer, "`out` is null"))?;
        let k = prog.prog.count_ops();
        *out = AccmulCounts { mul: k.mul, add: k.add, sca: k.sca };
        Ok(())
    })
}

/// Text form of a program, one operation per line. Release the string with
/// [`accmul_string_free`]. Returns null if `prog` is null.
///
/// # Safety
/// `prog` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn accmul_program_render(prog: *const AccmulProgram) -> *mut c_char {
    match unsafe { prog.as_ref() } {
        Some(p) => CString::new(p.prog.render()).map_or(ptr::null_mut(), CString::into_raw),
        None => ptr::null_mut(),
    }
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from [`accmul_program_render`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn accmul_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Runs a program on scalar banks: `c += f(a, b)`, with `a` and `b`
/// restored on return. Bank lengths must equal the program's sizes.
///
/// # Safety
/// Buffers must be valid for their stated lengths.
#[no_mangle]
pub unsafe extern "C" fn accmul_program_execute(
    field: *const AccmulField,
    prog: *const AccmulProgram,
    a: *mut u64,
    a_len: usize,
    b: *mut u64,
    b_len: usize,
    c: *mut u64,
    c_len: usize,
) -> AccmulStatus {
    guard(|| {
        let prog = &unsafe { prog.as_ref() }.ok_or_else(|| fail(AccmulStatus::NullPointer, "`prog` is null"))?.prog;
        let bufs = [Buf::new(a, a_len, "a")?, Buf::new(b, b_len, "b")?, Buf::new(c, c_len, "c")?];
        let f = unsafe { prepare(field, &bufs)? };
        if prog.modulus() != f.modulus() {
            return Err(fail(AccmulStatus::ShapeMismatch, format!("program is over F_{}, field is F_{}", prog.modulus(), f.modulus())));
        }
        let [a, b, c] = bufs.map(|x| unsafe { x.as_mut() });
        prog.execute(f, a, b, c)?;
        Ok(())
    })
}
