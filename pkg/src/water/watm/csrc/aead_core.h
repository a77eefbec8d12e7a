/* Salted, length-prefixed ChaCha20-Poly1305 stream framing. */
#ifndef WATER_AEAD_CORE_H
#define WATER_AEAD_CORE_H

#include <stddef.h>
#include <stdint.h>

#define AEAD_SALT_LEN 32
#define AEAD_TAG_LEN 16
#define AEAD_MAX_PAYLOAD 0x3FFF
#define AEAD_LEN_SECTION (2 + AEAD_TAG_LEN)
#define AEAD_MAX_FRAME (AEAD_LEN_SECTION + AEAD_MAX_PAYLOAD + AEAD_TAG_LEN)

typedef struct {
    uint8_t key[32];
    uint8_t nonce[12]; /* little-endian counter */
    uint64_t frames;   /* AEAD messages processed, for nonce audits */
    int ready;
    long pending; /* cached length of the frame at the front of input, or -1 */
} aead_dir;

void aead_derive_psk(const uint8_t *password, size_t len, uint8_t psk[32]);
void aead_dir_init(aead_dir *d, const uint8_t psk[32], const uint8_t salt[AEAD_SALT_LEN]);
/* n <= AEAD_MAX_PAYLOAD; returns bytes written to out */
size_t aead_frame_seal(aead_dir *d, const uint8_t *in, size_t n, uint8_t *out);
/* Decode one whole frame from the front of in: returns consumed bytes
 * (0 = need more, nothing consumed; -1 = authentication or framing
 * error).  After a 0 the caller must present the same prefix again. */
long aead_frame_open(aead_dir *d, const uint8_t *in, size_t n, uint8_t *out, size_t *plain_len);

#endif
