/* Diagnostic transport that executes `unreachable` at a configurable
 * point (`trap_at=` init | handshake | seal | open; default seal). */
#include "sdk.h"

enum { AT_INIT, AT_HANDSHAKE, AT_SEAL, AT_OPEN };
static int trap_at = AT_SEAL;

static int is(const uint8_t *v, size_t n, const char *s) {
    return n == strlen(s) && memcmp(v, s, n) == 0;
}

static int trap_configure(const uint8_t *cfg, size_t len) {
    (void)cfg;
    (void)len;
    size_t n = 0;
    const uint8_t *v = sdk_config_get("trap_at", &n);
    if (v) {
        if (is(v, n, "init")) trap_at = AT_INIT;
        else if (is(v, n, "handshake")) trap_at = AT_HANDSHAKE;
        else if (is(v, n, "seal")) trap_at = AT_SEAL;
        else if (is(v, n, "open")) trap_at = AT_OPEN;
        else return -1;
    }
    if (trap_at == AT_INIT) __builtin_trap();
    return 0;
}

static int trap_handshake(int role, int32_t wire_fd) {
    (void)role;
    (void)wire_fd;
    if (trap_at == AT_HANDSHAKE) __builtin_trap();
    return W_OK;
}

static long trap_seal(const uint8_t *in, size_t n, uint8_t *out) {
    if (trap_at == AT_SEAL) __builtin_trap();
    memcpy(out, in, n);
    return (long)n;
}

static long trap_open(const uint8_t *in, size_t n, uint8_t *out, size_t *plain_len) {
    if (trap_at == AT_OPEN) __builtin_trap();
    if (n > SDK_MAX_FRAME) n = SDK_MAX_FRAME;
    memcpy(out, in, n);
    *plain_len = n;
    return (long)n;
}

const watm_codec WATM_CODEC = {
    .name = "trap",
    .max_plain = 16384,
    .configure = trap_configure,
    .handshake = trap_handshake,
    .seal = trap_seal,
    .open = trap_open,
};
