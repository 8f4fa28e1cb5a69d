#include <stdio.h>
#include <string.h>
#include "snls.h"

int main(void) {
    SnlsExpansion *h = NULL;
    if (snls_expand(1, 2, &h) != SNLS_STATUS_OK) return 1;
    char buf[256];
    size_t need = 0;
    if (snls_expansion_coefficient(h, 1, buf, sizeof buf, &need) != SNLS_STATUS_OK) return 2;
    if (strcmp(buf, "G⊛(Φ²Φ̄)") != 0) return 3;
    bool zero = false;
    if (snls_mean_vanishes(h, 2, &zero) != SNLS_STATUS_OK || !zero) return 4;
    snls_expansion_free(h);
    if (snls_expand(0, 1, &h) != SNLS_STATUS_INVALID_ARGUMENT) return 5;
    if (snls_last_error(buf, sizeof buf) == 0) return 6;
    printf("ok %s\n", snls_version());
    return 0;
}
