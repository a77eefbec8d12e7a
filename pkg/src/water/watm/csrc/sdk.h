/* Guest-side WATM SDK.  A transport supplies one `watm_codec` and links
 * against sdk.c, which implements every `_water_*` export around it. */
#ifndef WATER_SDK_H
#define WATER_SDK_H

#include <stddef.h>
#include <stdint.h>

#include "imports.h"

enum {
    W_OK = 0,
    W_GENERAL = -1,
    W_INVALID_ARGUMENT = -2,
    W_INVALID_CONFIG = -3,
    W_INVALID_FD = -4,
    W_INVALID_FUNCTION = -5,
    W_DOUBLE_INIT = -6,
    W_FAILED_IO = -7,
    W_NOT_INITIALIZED = -8,
    W_NETWORK_UNREACHABLE = -9,
};

enum { ROLE_DIALER = 0, ROLE_LISTENER = 1, ROLE_RELAY_INBOUND = 2 };

enum { LOG_ERROR = 0, LOG_WARN = 1, LOG_INFO = 2, LOG_DEBUG = 3 };

/* Largest wire frame any codec may produce for one seal call. */
#define SDK_MAX_FRAME 16448
#define SDK_ACC_CAP (2 * SDK_MAX_FRAME)

typedef struct watm_codec {
    const char *name;
    /* Largest plaintext chunk handed to seal in one call. */
    size_t max_plain;
    /* Parse the config blob; nonzero return is reported as INVALID_CONFIG. */
    int (*configure)(const uint8_t *cfg, size_t len);
    /* Run the handshake for `role` over `wire_fd`; negative ErrorCode on failure. */
    int (*handshake)(int role, int32_t wire_fd);
    /* Seal `n` plaintext bytes into `out`; returns bytes produced. */
    long (*seal)(const uint8_t *in, size_t n, uint8_t *out);
    /* Consume a prefix of `in`: returns bytes consumed (0 = need more,
     * negative = error) and stores the plaintext length in *plain_len. */
    long (*open)(const uint8_t *in, size_t n, uint8_t *out, size_t *plain_len);
} watm_codec;

/* Provided by each transport. */
extern const watm_codec WATM_CODEC;

/* Helpers available to codecs. */
void *sdk_alloc(size_t n);
int sdk_read_full(int32_t fd, uint8_t *buf, size_t n);
int sdk_write_all(int32_t fd, const uint8_t *buf, size_t n);
long sdk_read_some(int32_t fd, uint8_t *buf, size_t n);
void sdk_log(int level, const char *msg);
/* Push bytes already taken off the wire back in front of the inbound stream. */
int sdk_unread(const uint8_t *buf, size_t n);
/* Value of the last `key=` line in the config, or NULL. */
const uint8_t *sdk_config_get(const char *key, size_t *len);
const uint8_t *sdk_config_blob(size_t *len);

void *memcpy(void *dst, const void *src, size_t n);
void *memmove(void *dst, const void *src, size_t n);
void *memset(void *dst, int c, size_t n);
int memcmp(const void *a, const void *b, size_t n);
size_t strlen(const char *s);

#endif
