/* Shadowsocks-style AEAD stream transport.
 *
 * Each side opens its sending direction with a random 32-byte salt; the
 * session subkey is HKDF(psk, salt, "water-subkey").  Frames are a sealed
 * 2-byte big-endian payload length followed by the sealed payload.  The
 * listener refuses to answer (or send its own salt) until the first
 * length section from the dialer authenticates. */
#include "aead_core.h"
#include "crypto.h"
#include "sdk.h"

static uint8_t psk[32];
static aead_dir tx, rx;

static int aead_configure(const uint8_t *cfg, size_t len) {
    (void)cfg;
    (void)len;
    size_t plen = 0;
    const uint8_t *pw = sdk_config_get("password", &plen);
    if (!pw || plen == 0) return -1;
    aead_derive_psk(pw, plen, psk);
    return 0;
}

static int send_salt(int32_t fd) {
    uint8_t salt[AEAD_SALT_LEN];
    if (wasi_random_get(salt, sizeof(salt)) != 0) return W_FAILED_IO;
    aead_dir_init(&tx, psk, salt);
    return sdk_write_all(fd, salt, sizeof(salt));
}

static int aead_handshake(int role, int32_t fd) {
    if (role == ROLE_DIALER) return send_salt(fd);

    uint8_t salt[AEAD_SALT_LEN];
    if (sdk_read_full(fd, salt, sizeof(salt)) < 0) {
        sdk_log(LOG_WARN, "short salt");
        return W_FAILED_IO;
    }
    aead_dir_init(&rx, psk, salt);

    uint8_t head[AEAD_LEN_SECTION], len[2];
    if (sdk_read_full(fd, head, sizeof(head)) < 0) return W_FAILED_IO;
    if (aead_open(rx.key, rx.nonce, head, 2, len) != 0) {
        sdk_log(LOG_WARN, "first frame failed authentication");
        return W_FAILED_IO;
    }
    if (sdk_unread(head, sizeof(head)) < 0) return W_GENERAL;
    return send_salt(fd);
}

static long aead_codec_seal(const uint8_t *in, size_t n, uint8_t *out) {
    if (!tx.ready || n > AEAD_MAX_PAYLOAD) return -1;
    return (long)aead_frame_seal(&tx, in, n, out);
}

static long aead_codec_open(const uint8_t *in, size_t n, uint8_t *out, size_t *plain_len) {
    *plain_len = 0;
    if (!rx.ready) {
        if (n < AEAD_SALT_LEN) return 0;
        aead_dir_init(&rx, psk, in);
        return AEAD_SALT_LEN;
    }
    return aead_frame_open(&rx, in, n, out, plain_len);
}

const watm_codec WATM_CODEC = {
    .name = "aead",
    .max_plain = AEAD_MAX_PAYLOAD,
    .configure = aead_configure,
    .handshake = aead_handshake,
    .seal = aead_codec_seal,
    .open = aead_codec_open,
};
