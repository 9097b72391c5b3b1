/* Kernel density of a few log-squared returns through the C API. */
#include <stdio.h>
#include "voldecon.h"

int main(void) {
    const double y[] = {-2.1, -0.4, -1.3, 0.2, -3.5, -0.9, -1.7, 0.6};
    double grid[5], out[5];
    for (int i = 0; i < 5; i++) grid[i] = -2.0 + i;

    VdKernel *k = NULL;
    if (vd_kernel_new(0.6, 30.0, 1, &k) != VD_STATUS_OK) {
        fprintf(stderr, "%s\n", vd_last_error());
        return 1;
    }
    enum VdStatus s = vd_kernel_density(k, y, 8, grid, 5, out);
    vd_kernel_free(k);
    if (s != VD_STATUS_OK) {
        fprintf(stderr, "%s\n", vd_last_error());
        return 1;
    }
    for (int i = 0; i < 5; i++) printf("%.6f %.12e\n", grid[i], out[i]);

    /* errors carry a status and a message */
    if (vd_kernel_new(-1.0, 30.0, 1, &k) != VD_STATUS_INVALID_PARAMETER || vd_last_error() == NULL) return 2;
    return 0;
}
