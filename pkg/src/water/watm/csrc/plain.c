/* Identity transport: bytes pass through unchanged in both directions. */
#include "sdk.h"

static int plain_handshake(int role, int32_t wire_fd) {
    (void)role;
    (void)wire_fd;
    return W_OK;
}

static long plain_seal(const uint8_t *in, size_t n, uint8_t *out) {
    memcpy(out, in, n);
    return (long)n;
}

static long plain_open(const uint8_t *in, size_t n, uint8_t *out, size_t *plain_len) {
    if (n > SDK_MAX_FRAME) n = SDK_MAX_FRAME;
    memcpy(out, in, n);
    *plain_len = n;
    return (long)n;
}

const watm_codec WATM_CODEC = {
    .name = "plain",
    .max_plain = 16384,
    .configure = 0,
    .handshake = plain_handshake,
    .seal = plain_seal,
    .open = plain_open,
};
