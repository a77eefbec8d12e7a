#ifndef WATER_CRYPTO_H
#define WATER_CRYPTO_H

#include <stddef.h>
#include <stdint.h>

typedef struct {
    uint32_t h[8];
    uint64_t len;
    uint8_t buf[64];
    size_t fill;
} sha256_ctx;

void sha256_init(sha256_ctx *c);
void sha256_update(sha256_ctx *c, const uint8_t *p, size_t n);
void sha256_final(sha256_ctx *c, uint8_t out[32]);

void hmac_sha256(const uint8_t *key, size_t klen, const uint8_t *msg, size_t mlen,
                 uint8_t out[32]);
/* HKDF-SHA256 with out_len <= 32 (one expand block). */
void hkdf_sha256(const uint8_t *salt, size_t slen, const uint8_t *ikm, size_t ilen,
                 const uint8_t *info, size_t info_len, uint8_t *out, size_t out_len);

/* ChaCha20-Poly1305 AEAD with empty associated data. `out` receives
 * n ciphertext bytes followed by the 16-byte tag. */
void aead_seal(const uint8_t key[32], const uint8_t nonce[12], const uint8_t *in, size_t n,
               uint8_t *out);
/* Returns 0 and writes n plaintext bytes, or -1 on tag mismatch.  `in`
 * holds n ciphertext bytes plus the tag. */
int aead_open(const uint8_t key[32], const uint8_t nonce[12], const uint8_t *in, size_t n,
              uint8_t *out);

#endif
