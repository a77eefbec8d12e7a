/* Reverses every chunk the worker hands over, e.g. ABCD -> DCBA.  The
 * unit is one read, so only single-read messages round-trip exactly. */
#include "sdk.h"

static int reverse_handshake(int role, int32_t wire_fd) {
    (void)role;
    (void)wire_fd;
    return W_OK;
}

static void reverse_copy(const uint8_t *in, size_t n, uint8_t *out) {
    for (size_t i = 0; i < n; i++) out[i] = in[n - 1 - i];
}

static long reverse_seal(const uint8_t *in, size_t n, uint8_t *out) {
    reverse_copy(in, n, out);
    return (long)n;
}

static long reverse_open(const uint8_t *in, size_t n, uint8_t *out, size_t *plain_len) {
    if (n > SDK_MAX_FRAME) n = SDK_MAX_FRAME;
    reverse_copy(in, n, out);
    *plain_len = n;
    return (long)n;
}

const watm_codec WATM_CODEC = {
    .name = "reverse",
    .max_plain = 16384,
    .configure = 0,
    .handshake = reverse_handshake,
    .seal = reverse_seal,
    .open = reverse_open,
};
