#ifndef ACCMUL_H
#define ACCMUL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result code of every call.
typedef enum AccmulStatus {
  ACCMUL_STATUS_OK = 0,
  ACCMUL_STATUS_NULL_POINTER = 1,
  ACCMUL_STATUS_INVALID_MODULUS = 2,
  ACCMUL_STATUS_SHAPE_MISMATCH = 3,
  ACCMUL_STATUS_ALIASING = 4,
  ACCMUL_STATUS_UNREDUCED_INPUT = 5,
  ACCMUL_STATUS_NO_ROOT_OF_UNITY = 6,
  ACCMUL_STATUS_UNSUPPORTED = 7,
  ACCMUL_STATUS_INVALID_FORMULA = 8,
  ACCMUL_STATUS_PARSE = 9,
  ACCMUL_STATUS_INTERNAL = 10,
} AccmulStatus;

// Whether a kernel adds or subtracts the product.
typedef enum AccmulSign {
  ACCMUL_SIGN_PLUS = 0,
  ACCMUL_SIGN_MINUS = 1,
} AccmulSign;

// Prime field handle.
typedef struct AccmulField AccmulField;

// Straight-line program handle.
typedef struct AccmulProgram AccmulProgram;

// Operation tallies of a program.
typedef struct AccmulCounts {
  uint64_t mul;
  uint64_t add;
  uint64_t sca;
} AccmulCounts;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread, or an empty string.
// The pointer stays valid until the next call into this library on the
// same thread.
const char *accmul_last_error(void);

// Creates a field for the odd prime `p`, with roots of unity precomputed.
//
// # Safety
// `out` must be null or valid for a pointer write.
enum AccmulStatus accmul_field_new(uint64_t p, struct AccmulField **out);

// Releases a field. Null is ignored.
//
// # Safety
// `field` must be null or a handle from [`accmul_field_new`] not yet freed.
void accmul_field_free(struct AccmulField *field);

// The modulus of `field`, or 0 for null.
//
// # Safety
// `field` must be null or a live handle.
uint64_t accmul_field_modulus(const struct AccmulField *field);

// `C += sign * A * B` by the classical algorithm; `A` is `m×k`, `B` is
// `k×n`, `C` is `m×n`.
//
// # Safety
// Buffers must be valid for their stated sizes.
enum AccmulStatus accmul_mm_classic(const struct AccmulField *field,
                                    const uint64_t *a,
                                    const uint64_t *b,
                                    uint64_t *c,
                                    size_t m,
                                    size_t k,
                                    size_t n,
                                    enum AccmulSign s);

// `C += sign * A * B` for `n×n` matrices by the in-place Strassen-Winograd
// schedule. `A` and `B` are modified during the call and restored.
//
// # Safety
// Buffers must be valid for `n*n` elements.
enum AccmulStatus accmul_mm_strassen(const struct AccmulField *field,
                                     uint64_t *a,
                                     uint64_t *b,
                                     uint64_t *c,
                                     size_t n,
                                     enum AccmulSign s,
                                     size_t threshold);

// `C += sign * A * A` for `n×n` matrices.
//
// # Safety
// Buffers must be valid for `n*n` elements.
enum AccmulStatus accmul_mm_square(const struct AccmulField *field,
                                   uint64_t *a,
                                   uint64_t *c,
                                   size_t n,
                                   enum AccmulSign s,
                                   size_t threshold);

// Lower triangle of `C += sign * A * A^T`, with `A` of shape `n×k` and `C`
// of shape `n×n`. Entries above the diagonal are left untouched.
//
// # Safety
// Buffers must be valid for their stated sizes.
enum AccmulStatus accmul_mm_syrk(const struct AccmulField *field,
                                 uint64_t *a,
                                 uint64_t *c,
                                 size_t n,
                                 size_t k,
                                 enum AccmulSign s,
                                 size_t threshold);

// `C += sign * A * B` for polynomials by Karatsuba. `c` holds `m + n - 1`
// coefficients.
//
// # Safety
// Buffers must be valid for their stated lengths.
enum AccmulStatus accmul_poly_karatsuba(const struct AccmulField *field,
                                        uint64_t *a,
                                        size_t m,
                                        uint64_t *b,
                                        size_t n,
                                        uint64_t *c,
                                        enum AccmulSign s,
                                        size_t threshold);

// `C += sign * A * B` by Toom-3 for two operands of equal length `n`, a
// multiple of 3. `c` holds `2n - 1` coefficients.
//
// # Safety
// Buffers must be valid for their stated lengths.
enum AccmulStatus accmul_poly_toom3(const struct AccmulField *field,
                                    uint64_t *a,
                                    uint64_t *b,
                                    size_t n,
                                    uint64_t *c,
                                    enum AccmulSign s,
                                    size_t threshold);

// `C += sign * A * B` through truncated Fourier transforms. Needs a
// principal root of unity of order at least `m + n - 1`.
//
// # Safety
// Buffers must be valid for their stated lengths.
enum AccmulStatus accmul_poly_fft(const struct AccmulField *field,
                                  uint64_t *a,
                                  size_t m,
                                  uint64_t *b,
                                  size_t n,
                                  uint64_t *c,
                                  enum AccmulSign s);

// Compiles a bilinear formula in text form into an in-place program. With
// `two_d` set, a scalar-width formula is widened so that each product
// spans two result registers.
//
// # Safety
// `text` must be a NUL-terminated string; `out` must be valid for a
// pointer write.
enum AccmulStatus accmul_program_from_hm(const struct AccmulField *field,
                                         const char *text,
                                         bool two_d,
                                         struct AccmulProgram **out);

// Releases a program. Null is ignored.
//
// # Safety
// `prog` must be null or a handle not yet freed.
void accmul_program_free(struct AccmulProgram *prog);

// Bank sizes `(m, n, s)` of a program.
//
// # Safety
// `prog` must be a live handle; the outputs must be valid for writes.
enum AccmulStatus accmul_program_sizes(const struct AccmulProgram *prog,
                                       size_t *m,
                                       size_t *n,
                                       size_t *s);

// Operation counts of a program.
//
// # Safety
// `prog` must be a live handle; `out` must be valid for a write.
enum AccmulStatus accmul_program_counts(const struct AccmulProgram *prog, struct AccmulCounts *out);

// Text form of a program, one operation per line. Release the string with
// [`accmul_string_free`]. Returns null if `prog` is null.
//
// # Safety
// `prog` must be null or a live handle.
char *accmul_program_render(const struct AccmulProgram *prog);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must be null or a string from [`accmul_program_render`] not yet freed.
void accmul_string_free(char *s);

// Runs a program on scalar banks: `c += f(a, b)`, with `a` and `b`
// restored on return. Bank lengths must equal the program's sizes.
//
// # Safety
// Buffers must be valid for their stated lengths.
enum AccmulStatus accmul_program_execute(const struct AccmulField *field,
                                         const struct AccmulProgram *prog,
                                         uint64_t *a,
                                         size_t a_len,
                                         uint64_t *b,
                                         size_t b_len,
                                         uint64_t *c,
                                         size_t c_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ACCMUL_H */
