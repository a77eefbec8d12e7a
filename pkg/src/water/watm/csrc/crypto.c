/* SHA-256, HMAC, HKDF and ChaCha20-Poly1305 in portable C (no SIMD). */
#include "crypto.h"
#include "sdk.h"

#define ROTR32(x, n) (((x) >> (n)) | ((x) << (32 - (n))))
#define ROTL32(x, n) (((x) << (n)) | ((x) >> (32 - (n))))

static uint32_t load32_le(const uint8_t *p) {
    return (uint32_t)p[0] | ((uint32_t)p[1] << 8) | ((uint32_t)p[2] << 16) | ((uint32_t)p[3] << 24);
}

static void store32_le(uint8_t *p, uint32_t v) {
    p[0] = (uint8_t)v;
    p[1] = (uint8_t)(v >> 8);
    p[2] = (uint8_t)(v >> 16);
    p[3] = (uint8_t)(v >> 24);
}

static uint32_t load32_be(const uint8_t *p) {
    return ((uint32_t)p[0] << 24) | ((uint32_t)p[1] << 16) | ((uint32_t)p[2] << 8) | (uint32_t)p[3];
}

static void store32_be(uint8_t *p, uint32_t v) {
    p[0] = (uint8_t)(v >> 24);
    p[1] = (uint8_t)(v >> 16);
    p[2] = (uint8_t)(v >> 8);
    p[3] = (uint8_t)v;
}

/* ---- SHA-256 ------------------------------------------------------------ */

static const uint32_t K256[64] = {
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4, 0xab1c5ed5,
    0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174,
    0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
    0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967,
    0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85,
    0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
    0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
    0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2,
};

static void sha256_block(sha256_ctx *c, const uint8_t *p) {
    uint32_t w[64];
    for (int i = 0; i < 16; i++) w[i] = load32_be(p + 4 * i);
    for (int i = 16; i < 64; i++) {
        uint32_t s0 = ROTR32(w[i - 15], 7) ^ ROTR32(w[i - 15], 18) ^ (w[i - 15] >> 3);
        uint32_t s1 = ROTR32(w[i - 2], 17) ^ ROTR32(w[i - 2], 19) ^ (w[i - 2] >> 10);
        w[i] = w[i - 16] + s0 + w[i - 7] + s1;
    }
    uint32_t a = c->h[0], b = c->h[1], cc = c->h[2], d = c->h[3];
    uint32_t e = c->h[4], f = c->h[5], g = c->h[6], h = c->h[7];
    for (int i = 0; i < 64; i++) {
        uint32_t S1 = ROTR32(e, 6) ^ ROTR32(e, 11) ^ ROTR32(e, 25);
        uint32_t ch = (e & f) ^ (~e & g);
        uint32_t t1 = h + S1 + ch + K256[i] + w[i];
        uint32_t S0 = ROTR32(a, 2) ^ ROTR32(a, 13) ^ ROTR32(a, 22);
        uint32_t maj = (a & b) ^ (a & cc) ^ (b & cc);
        uint32_t t2 = S0 + maj;
        h = g;
        g = f;
        f = e;
        e = d + t1;
        d = cc;
        cc = b;
        b = a;
        a = t1 + t2;
    }
    c->h[0] += a;
    c->h[1] += b;
    c->h[2] += cc;
    c->h[3] += d;
    c->h[4] += e;
    c->h[5] += f;
    c->h[6] += g;
    c->h[7] += h;
}

void sha256_init(sha256_ctx *c) {
    static const uint32_t iv[8] = {0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a,
                                   0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19};
    for (int i = 0; i < 8; i++) c->h[i] = iv[i];
    c->len = 0;
    c->fill = 0;
}

void sha256_update(sha256_ctx *c, const uint8_t *p, size_t n) {
    c->len += n;
    while (n) {
        size_t take = 64 - c->fill;
        if (take > n) take = n;
        memcpy(c->buf + c->fill, p, take);
        c->fill += take;
        p += take;
        n -= take;
        if (c->fill == 64) {
            sha256_block(c, c->buf);
            c->fill = 0;
        }
    }
}

void sha256_final(sha256_ctx *c, uint8_t out[32]) {
    uint64_t bits = c->len * 8;
    uint8_t pad = 0x80;
    sha256_update(c, &pad, 1);
    uint8_t zero = 0;
    while (c->fill != 56) sha256_update(c, &zero, 1);
    uint8_t lenbuf[8];
    for (int i = 0; i < 8; i++) lenbuf[i] = (uint8_t)(bits >> (56 - 8 * i));
    sha256_update(c, lenbuf, 8);
    for (int i = 0; i < 8; i++) store32_be(out + 4 * i, c->h[i]);
}

void hmac_sha256(const uint8_t *key, size_t klen, const uint8_t *msg, size_t mlen,
                 uint8_t out[32]) {
    uint8_t k[64];
    memset(k, 0, sizeof(k));
    if (klen > 64) {
        sha256_ctx kc;
        sha256_init(&kc);
        sha256_update(&kc, key, klen);
        sha256_final(&kc, k);
    } else {
        memcpy(k, key, klen);
    }
    uint8_t ipad[64], opad[64], inner[32];
    for (int i = 0; i < 64; i++) {
        ipad[i] = k[i] ^ 0x36;
        opad[i] = k[i] ^ 0x5c;
    }
    sha256_ctx c;
    sha256_init(&c);
    sha256_update(&c, ipad, 64);
    sha256_update(&c, msg, mlen);
    sha256_final(&c, inner);
    sha256_init(&c);
    sha256_update(&c, opad, 64);
    sha256_update(&c, inner, 32);
    sha256_final(&c, out);
}

void hkdf_sha256(const uint8_t *salt, size_t slen, const uint8_t *ikm, size_t ilen,
                 const uint8_t *info, size_t info_len, uint8_t *out, size_t out_len) {
    static const uint8_t zeros[32];
    uint8_t prk[32];
    if (slen == 0) {
        salt = zeros;
        slen = 32;
    }
    hmac_sha256(salt, slen, ikm, ilen, prk);
    /* T(1) = HMAC(prk, info || 0x01) */
    uint8_t block[256 + 1];
    if (info_len > 256) info_len = 256;
    memcpy(block, info, info_len);
    block[info_len] = 1;
    uint8_t t[32];
    hmac_sha256(prk, 32, block, info_len + 1, t);
    memcpy(out, t, out_len > 32 ? 32 : out_len);
}

/* ---- ChaCha20 ----------------------------------------------------------- */

#define QR(a, b, c, d)           \
    a += b;                      \
    d ^= a;                      \
    d = ROTL32(d, 16);           \
    c += d;                      \
    b ^= c;                      \
    b = ROTL32(b, 12);           \
    a += b;                      \
    d ^= a;                      \
    d = ROTL32(d, 8);            \
    c += d;                      \
    b ^= c;                      \
    b = ROTL32(b, 7)

static void chacha20_block(const uint32_t in[16], uint8_t out[64]) {
    uint32_t x[16];
    for (int i = 0; i < 16; i++) x[i] = in[i];
    for (int i = 0; i < 10; i++) {
        QR(x[0], x[4], x[8], x[12]);
        QR(x[1], x[5], x[9], x[13]);
        QR(x[2], x[6], x[10], x[14]);
        QR(x[3], x[7], x[11], x[15]);
        QR(x[0], x[5], x[10], x[15]);
        QR(x[1], x[6], x[11], x[12]);
        QR(x[2], x[7], x[8], x[13]);
        QR(x[3], x[4], x[9], x[14]);
    }
    for (int i = 0; i < 16; i++) store32_le(out + 4 * i, x[i] + in[i]);
}

static void chacha20_setup(uint32_t st[16], const uint8_t key[32], const uint8_t nonce[12],
                           uint32_t counter) {
    st[0] = 0x61707865;
    st[1] = 0x3320646e;
    st[2] = 0x79622d32;
    st[3] = 0x6b206574;
    for (int i = 0; i < 8; i++) st[4 + i] = load32_le(key + 4 * i);
    st[12] = counter;
    st[13] = load32_le(nonce);
    st[14] = load32_le(nonce + 4);
    st[15] = load32_le(nonce + 8);
}

static void chacha20_xor(uint32_t st[16], const uint8_t *in, uint8_t *out, size_t n) {
    uint8_t ks[64];
    while (n) {
        chacha20_block(st, ks);
        st[12]++;
        size_t take = n < 64 ? n : 64;
        for (size_t i = 0; i < take; i++) out[i] = in[i] ^ ks[i];
        in += take;
        out += take;
        n -= take;
    }
}

/* ---- Poly1305 (26-bit limbs) ------------------------------------------- */

typedef struct {
    uint32_t r[5], s[4], h[5];
} poly1305_ctx;

static void poly1305_init(poly1305_ctx *p, const uint8_t key[32]) {
    p->r[0] = load32_le(key + 0) & 0x3ffffff;
    p->r[1] = (load32_le(key + 3) >> 2) & 0x3ffff03;
    p->r[2] = (load32_le(key + 6) >> 4) & 0x3ffc0ff;
    p->r[3] = (load32_le(key + 9) >> 6) & 0x3f03fff;
    p->r[4] = (load32_le(key + 12) >> 8) & 0x00fffff;
    for (int i = 0; i < 4; i++) p->s[i] = load32_le(key + 16 + 4 * i);
    for (int i = 0; i < 5; i++) p->h[i] = 0;
}

/* full 16-byte blocks only; callers pad */
static void poly1305_blocks(poly1305_ctx *p, const uint8_t *m, size_t n) {
    const uint32_t r0 = p->r[0], r1 = p->r[1], r2 = p->r[2], r3 = p->r[3], r4 = p->r[4];
    const uint32_t s1 = r1 * 5, s2 = r2 * 5, s3 = r3 * 5, s4 = r4 * 5;
    uint32_t h0 = p->h[0], h1 = p->h[1], h2 = p->h[2], h3 = p->h[3], h4 = p->h[4];
    while (n >= 16) {
        h0 += load32_le(m + 0) & 0x3ffffff;
        h1 += (load32_le(m + 3) >> 2) & 0x3ffffff;
        h2 += (load32_le(m + 6) >> 4) & 0x3ffffff;
        h3 += (load32_le(m + 9) >> 6) & 0x3ffffff;
        h4 += (load32_le(m + 12) >> 8) | (1u << 24);
        uint64_t d0 = (uint64_t)h0 * r0 + (uint64_t)h1 * s4 + (uint64_t)h2 * s3 +
                      (uint64_t)h3 * s2 + (uint64_t)h4 * s1;
        uint64_t d1 = (uint64_t)h0 * r1 + (uint64_t)h1 * r0 + (uint64_t)h2 * s4 +
                      (uint64_t)h3 * s3 + (uint64_t)h4 * s2;
        uint64_t d2 = (uint64_t)h0 * r2 + (uint64_t)h1 * r1 + (uint64_t)h2 * r0 +
                      (uint64_t)h3 * s4 + (uint64_t)h4 * s3;
        uint64_t d3 = (uint64_t)h0 * r3 + (uint64_t)h1 * r2 + (uint64_t)h2 * r1 +
                      (uint64_t)h3 * r0 + (uint64_t)h4 * s4;
        uint64_t d4 = (uint64_t)h0 * r4 + (uint64_t)h1 * r3 + (uint64_t)h2 * r2 +
                      (uint64_t)h3 * r1 + (uint64_t)h4 * r0;
        uint32_t c;
        c = (uint32_t)(d0 >> 26); h0 = (uint32_t)d0 & 0x3ffffff;
        d1 += c; c = (uint32_t)(d1 >> 26); h1 = (uint32_t)d1 & 0x3ffffff;
        d2 += c; c = (uint32_t)(d2 >> 26); h2 = (uint32_t)d2 & 0x3ffffff;
        d3 += c; c = (uint32_t)(d3 >> 26); h3 = (uint32_t)d3 & 0x3ffffff;
        d4 += c; c = (uint32_t)(d4 >> 26); h4 = (uint32_t)d4 & 0x3ffffff;
        h0 += c * 5; c = h0 >> 26; h0 &= 0x3ffffff;
        h1 += c;
        m += 16;
        n -= 16;
    }
    p->h[0] = h0; p->h[1] = h1; p->h[2] = h2; p->h[3] = h3; p->h[4] = h4;
}

static void poly1305_finish(poly1305_ctx *p, uint8_t mac[16]) {
    uint32_t h0 = p->h[0], h1 = p->h[1], h2 = p->h[2], h3 = p->h[3], h4 = p->h[4];
    uint32_t c;
    c = h1 >> 26; h1 &= 0x3ffffff;
    h2 += c; c = h2 >> 26; h2 &= 0x3ffffff;
    h3 += c; c = h3 >> 26; h3 &= 0x3ffffff;
    h4 += c; c = h4 >> 26; h4 &= 0x3ffffff;
    h0 += c * 5; c = h0 >> 26; h0 &= 0x3ffffff;
    h1 += c;

    uint32_t g0 = h0 + 5; c = g0 >> 26; g0 &= 0x3ffffff;
    uint32_t g1 = h1 + c; c = g1 >> 26; g1 &= 0x3ffffff;
    uint32_t g2 = h2 + c; c = g2 >> 26; g2 &= 0x3ffffff;
    uint32_t g3 = h3 + c; c = g3 >> 26; g3 &= 0x3ffffff;
    uint32_t g4 = h4 + c - (1u << 26);

    uint32_t mask = (g4 >> 31) - 1; /* all ones when h >= p */
    g0 &= mask; g1 &= mask; g2 &= mask; g3 &= mask; g4 &= mask;
    mask = ~mask;
    h0 = (h0 & mask) | g0;
    h1 = (h1 & mask) | g1;
    h2 = (h2 & mask) | g2;
    h3 = (h3 & mask) | g3;
    h4 = (h4 & mask) | g4;

    h0 = h0 | (h1 << 26);
    h1 = (h1 >> 6) | (h2 << 20);
    h2 = (h2 >> 12) | (h3 << 14);
    h3 = (h3 >> 18) | (h4 << 8);

    uint64_t f;
    f = (uint64_t)h0 + p->s[0]; h0 = (uint32_t)f;
    f = (uint64_t)h1 + p->s[1] + (f >> 32); h1 = (uint32_t)f;
    f = (uint64_t)h2 + p->s[2] + (f >> 32); h2 = (uint32_t)f;
    f = (uint64_t)h3 + p->s[3] + (f >> 32); h3 = (uint32_t)f;
    store32_le(mac + 0, h0);
    store32_le(mac + 4, h1);
    store32_le(mac + 8, h2);
    store32_le(mac + 12, h3);
}

/* MAC over ciphertext with empty AAD: ct || pad16 || le64(0) || le64(n) */
static void aead_tag(const uint8_t otk[32], const uint8_t *ct, size_t n, uint8_t tag[16]) {
    poly1305_ctx p;
    poly1305_init(&p, otk);
    size_t full = n & ~(size_t)15;
    poly1305_blocks(&p, ct, full);
    if (n != full) {
        uint8_t last[16];
        memset(last, 0, 16);
        memcpy(last, ct + full, n - full);
        poly1305_blocks(&p, last, 16);
    }
    uint8_t lens[16];
    memset(lens, 0, 16);
    uint64_t cl = n;
    for (int i = 0; i < 8; i++) lens[8 + i] = (uint8_t)(cl >> (8 * i));
    poly1305_blocks(&p, lens, 16);
    poly1305_finish(&p, tag);
}

static void one_time_key(uint32_t st[16], uint8_t otk[32]) {
    uint8_t block[64];
    chacha20_block(st, block);
    st[12]++;
    memcpy(otk, block, 32);
}

void aead_seal(const uint8_t key[32], const uint8_t nonce[12], const uint8_t *in, size_t n,
               uint8_t *out) {
    uint32_t st[16];
    uint8_t otk[32];
    chacha20_setup(st, key, nonce, 0);
    one_time_key(st, otk);
    chacha20_xor(st, in, out, n);
    aead_tag(otk, out, n, out + n);
}

int aead_open(const uint8_t key[32], const uint8_t nonce[12], const uint8_t *in, size_t n,
              uint8_t *out) {
    uint32_t st[16];
    uint8_t otk[32], tag[16];
    chacha20_setup(st, key, nonce, 0);
    one_time_key(st, otk);
    aead_tag(otk, in, n, tag);
    uint8_t diff = 0;
    for (int i = 0; i < 16; i++) diff |= tag[i] ^ in[n + i];
    if (diff) return -1;
    chacha20_xor(st, in, out, n);
    return 0;
}
