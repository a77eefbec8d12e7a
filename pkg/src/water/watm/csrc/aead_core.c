#include "aead_core.h"
#include "crypto.h"
#include "sdk.h"

static const char PSK_INFO[] = "water-psk";
static const char SUBKEY_INFO[] = "water-subkey";

void aead_derive_psk(const uint8_t *password, size_t len, uint8_t psk[32]) {
    hkdf_sha256(0, 0, password, len, (const uint8_t *)PSK_INFO, sizeof(PSK_INFO) - 1, psk, 32);
}

void aead_dir_init(aead_dir *d, const uint8_t psk[32], const uint8_t salt[AEAD_SALT_LEN]) {
    hkdf_sha256(salt, AEAD_SALT_LEN, psk, 32, (const uint8_t *)SUBKEY_INFO,
                sizeof(SUBKEY_INFO) - 1, d->key, 32);
    memset(d->nonce, 0, sizeof(d->nonce));
    d->frames = 0;
    d->ready = 1;
    d->pending = -1;
}

static void nonce_next(aead_dir *d) {
    for (int i = 0; i < 12; i++) {
        if (++d->nonce[i]) break;
    }
    d->frames++;
}

size_t aead_frame_seal(aead_dir *d, const uint8_t *in, size_t n, uint8_t *out) {
    uint8_t len[2] = {(uint8_t)(n >> 8), (uint8_t)n};
    aead_seal(d->key, d->nonce, len, 2, out);
    nonce_next(d);
    aead_seal(d->key, d->nonce, in, n, out + AEAD_LEN_SECTION);
    nonce_next(d);
    return AEAD_LEN_SECTION + n + AEAD_TAG_LEN;
}

long aead_frame_open(aead_dir *d, const uint8_t *in, size_t n, uint8_t *out, size_t *plain_len) {
    *plain_len = 0;
    if (n < AEAD_LEN_SECTION) return 0;
    if (d->pending < 0) {
        /* cached only: the section is consumed together with its payload */
        uint8_t len[2];
        if (aead_open(d->key, d->nonce, in, 2, len) != 0) return -1;
        size_t payload = ((size_t)len[0] << 8) | len[1];
        if (payload > AEAD_MAX_PAYLOAD) return -1;
        d->pending = (long)payload;
    }
    size_t need = AEAD_LEN_SECTION + (size_t)d->pending + AEAD_TAG_LEN;
    if (n < need) return 0;
    uint8_t payload_nonce[12];
    memcpy(payload_nonce, d->nonce, sizeof(payload_nonce));
    for (int i = 0; i < 12; i++) {
        if (++payload_nonce[i]) break;
    }
    if (aead_open(d->key, payload_nonce, in + AEAD_LEN_SECTION, (size_t)d->pending, out) != 0)
        return -1;
    nonce_next(d);
    nonce_next(d);
    *plain_len = (size_t)d->pending;
    d->pending = -1;
    return (long)need;
}
