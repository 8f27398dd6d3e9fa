#include <math.h>
#include <stdio.h>
#include "memaop.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        enum MemaopStatus s_ = (call);                                     \
        if (s_ != MEMAOP_STATUS_OK) {                                      \
            fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_,              \
                    memaop_last_error() ? memaop_last_error() : "");       \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    double a[6] = {1, 2, 3, 4, 5, 6};
    double b[6] = {1, 0, 0, 1, 1, 1};
    MemaopMatrix *ma = NULL, *mb = NULL, *exact = NULL, *approx = NULL;
    CHECK(memaop_matrix_new(2, 3, a, &ma));
    CHECK(memaop_matrix_new(3, 2, b, &mb));
    CHECK(memaop_exact_matmul(ma, mb, &exact));
    size_t picked = 0;
    CHECK(memaop_approx_matmul(ma, mb, MEMAOP_POLICY_TOP_K, 3, false, 0, &approx, &picked));
    const double *e = memaop_matrix_data(exact);
    const double *p = memaop_matrix_data(approx);
    for (int i = 0; i < 4; i++) {
        if (fabs(e[i] - p[i]) > 1e-12) return 2;
    }
    if (picked != 3 || e[0] != 4.0 || e[3] != 11.0) return 3;

    if (memaop_exact_matmul(ma, ma, &approx) != MEMAOP_STATUS_DIMENSION_MISMATCH) return 4;
    if (memaop_last_error() == NULL) return 5;

    memaop_matrix_free(ma);
    memaop_matrix_free(mb);
    memaop_matrix_free(exact);
    memaop_matrix_free(approx);
    printf("ok\n");
    return 0;
}
