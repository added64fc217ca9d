#include <stdio.h>
#include "accmul.h"

int main(void) {
    AccmulField *f = NULL;
    if (accmul_field_new(65537, &f) != ACCMUL_STATUS_OK) return 1;
    uint64_t a[3] = {1, 2, 3}, b[3] = {4, 5, 6}, c[5] = {0};
    if (accmul_poly_karatsuba(f, a, 3, b, 3, c, ACCMUL_SIGN_PLUS, 1) != ACCMUL_STATUS_OK) return 2;
    uint64_t want[5] = {4, 13, 28, 27, 18};
    for (int i = 0; i < 5; i++)
        if (c[i] != want[i]) return 3;
    if (a[0] != 1 || a[2] != 3 || b[1] != 5) return 4;
    if (accmul_mm_strassen(f, a, a, c, 1, ACCMUL_SIGN_PLUS, 1) != ACCMUL_STATUS_ALIASING) return 5;
    printf("%s\n", accmul_last_error());
    accmul_field_free(f);
    return 0;
}
