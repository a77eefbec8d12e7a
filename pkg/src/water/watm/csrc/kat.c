/* Codec test harness (not a WATM): exposes the AEAD framing directly so
 * the host can compare it against the native implementation and time it.
 * Inputs and outputs travel through two fixed buffers. */
#include "aead_core.h"
#include "crypto.h"

#define EXPORT(name) __attribute__((export_name(#name)))
#define BUF_CAP (1u << 17)

void *memcpy(void *dst, const void *src, size_t n);

static uint8_t in_buf[BUF_CAP];
static uint8_t out_buf[BUF_CAP];
static aead_dir tx, rx;
static size_t last_plain;

EXPORT(kat_in) uint8_t *kat_in(void) { return in_buf; }
EXPORT(kat_out) uint8_t *kat_out(void) { return out_buf; }
EXPORT(kat_capacity) uint32_t kat_capacity(void) { return BUF_CAP; }

/* in_buf = password[pw_len] || salt[32]; both directions share the salt so
 * opening what was sealed loops back. */
EXPORT(kat_setup) int32_t kat_setup(uint32_t pw_len) {
    if (pw_len + AEAD_SALT_LEN > BUF_CAP) return -2;
    uint8_t psk[32];
    aead_derive_psk(in_buf, pw_len, psk);
    aead_dir_init(&tx, psk, in_buf + pw_len);
    aead_dir_init(&rx, psk, in_buf + pw_len);
    return 0;
}

EXPORT(kat_set_nonce) void kat_set_nonce(uint64_t lo, uint32_t hi) {
    for (int i = 0; i < 8; i++) tx.nonce[i] = rx.nonce[i] = (uint8_t)(lo >> (8 * i));
    for (int i = 0; i < 4; i++) tx.nonce[8 + i] = rx.nonce[8 + i] = (uint8_t)(hi >> (8 * i));
}

EXPORT(kat_nonce_lo) uint64_t kat_nonce_lo(void) {
    uint64_t v = 0;
    for (int i = 7; i >= 0; i--) v = (v << 8) | tx.nonce[i];
    return v;
}

EXPORT(kat_frames) uint64_t kat_frames(void) { return tx.frames; }

/* seal in_buf[0:n] as one frame into out_buf; returns the frame length */
EXPORT(kat_seal) int32_t kat_seal(uint32_t n) {
    if (n > AEAD_MAX_PAYLOAD) return -2;
    return (int32_t)aead_frame_seal(&tx, in_buf, n, out_buf);
}

/* seal `total` bytes of in_buf content in maximal frames; returns frame count */
EXPORT(kat_seal_bulk) int64_t kat_seal_bulk(uint64_t total) {
    int64_t frames = 0;
    while (total) {
        size_t n = total > AEAD_MAX_PAYLOAD ? AEAD_MAX_PAYLOAD : (size_t)total;
        aead_frame_seal(&tx, in_buf, n, out_buf);
        total -= n;
        frames++;
    }
    return frames;
}

/* one resumable decode step over in_buf[0:n]; plaintext lands in out_buf */
EXPORT(kat_open) int32_t kat_open(uint32_t n) {
    size_t plen = 0;
    long used = aead_frame_open(&rx, in_buf, n, out_buf, &plen);
    last_plain = plen;
    return (int32_t)used;
}

EXPORT(kat_plain_len) uint32_t kat_plain_len(void) { return (uint32_t)last_plain; }
