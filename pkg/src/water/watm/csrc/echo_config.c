/* Diagnostic transport: on connect, writes its config blob to the network
 * side (re-reading it through a fresh pull_config descriptor), then
 * behaves like plain. */
#include "sdk.h"

static int echo_handshake(int role, int32_t wire_fd) {
    (void)role;
    int32_t fd = water_pull_config();
    if (fd < 0) return fd;
    uint8_t buf[4096];
    int rc = W_OK;
    for (;;) {
        long got = sdk_read_some(fd, buf, sizeof(buf));
        if (got < 0) {
            rc = W_FAILED_IO;
            break;
        }
        if (got == 0) break;
        rc = sdk_write_all(wire_fd, buf, (size_t)got);
        if (rc < 0) break;
    }
    wasi_fd_close(fd);
    return rc;
}

static long echo_seal(const uint8_t *in, size_t n, uint8_t *out) {
    memcpy(out, in, n);
    return (long)n;
}

static long echo_open(const uint8_t *in, size_t n, uint8_t *out, size_t *plain_len) {
    if (n > SDK_MAX_FRAME) n = SDK_MAX_FRAME;
    memcpy(out, in, n);
    *plain_len = n;
    return (long)n;
}

const watm_codec WATM_CODEC = {
    .name = "echo_config",
    .max_plain = 16384,
    .configure = 0,
    .handshake = echo_handshake,
    .seal = echo_seal,
    .open = echo_open,
};
