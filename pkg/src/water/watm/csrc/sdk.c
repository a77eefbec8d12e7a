/* WATM SDK: the `_water_*` exports, config handling and the worker loop. */
#include "sdk.h"

#define EXPORT(name) __attribute__((export_name(#name)))

/* ---- bump allocator --------------------------------------------------- */

extern unsigned char __heap_base;
static uintptr_t heap_top;

static int heap_reserve(size_t n) {
    if (!heap_top) heap_top = (uintptr_t)&__heap_base;
    uintptr_t need = heap_top + n;
    uintptr_t have = __builtin_wasm_memory_size(0) * 65536u;
    if (need > have) {
        size_t pages = (need - have + 65535u) / 65536u;
        if (__builtin_wasm_memory_grow(0, pages) == (size_t)-1) return -1;
    }
    return 0;
}

void *sdk_alloc(size_t n) {
    n = (n + 15u) & ~(size_t)15u;
    if (heap_reserve(n) < 0) return 0;
    void *p = (void *)heap_top;
    heap_top += n;
    return p;
}

/* ---- I/O helpers ------------------------------------------------------ */

long sdk_read_some(int32_t fd, uint8_t *buf, size_t n) {
    wasi_iovec_t iov = {(uint32_t)(uintptr_t)buf, (uint32_t)n};
    uint32_t got = 0;
    for (;;) {
        int32_t err = wasi_fd_read(fd, &iov, 1, &got);
        if (err == WASI_ERRNO_INTR || err == WASI_ERRNO_AGAIN) continue;
        if (err != 0) return -1;
        return (long)got;
    }
}

int sdk_read_full(int32_t fd, uint8_t *buf, size_t n) {
    size_t off = 0;
    while (off < n) {
        long got = sdk_read_some(fd, buf + off, n - off);
        if (got <= 0) return W_FAILED_IO;
        off += (size_t)got;
    }
    return W_OK;
}

int sdk_write_all(int32_t fd, const uint8_t *buf, size_t n) {
    size_t off = 0;
    while (off < n) {
        wasi_iovec_t iov = {(uint32_t)(uintptr_t)(buf + off), (uint32_t)(n - off)};
        uint32_t put = 0;
        int32_t err = wasi_fd_write(fd, &iov, 1, &put);
        if (err == WASI_ERRNO_INTR || err == WASI_ERRNO_AGAIN) continue;
        if (err != 0 || put == 0) return W_FAILED_IO;
        off += put;
    }
    return W_OK;
}

void sdk_log(int level, const char *msg) {
    water_host_log(level, msg, (int32_t)strlen(msg));
}

/* ---- config ----------------------------------------------------------- */

static uint8_t *cfg_buf;
static size_t cfg_len;

static int load_config(void) {
    int32_t fd = water_pull_config();
    if (fd < 0) return fd;
    if (heap_reserve(0) < 0) return W_GENERAL;
    cfg_buf = (uint8_t *)heap_top;
    cfg_len = 0;
    for (;;) {
        if (heap_reserve(cfg_len + 4096) < 0) {
            wasi_fd_close(fd);
            return W_GENERAL;
        }
        long got = sdk_read_some(fd, cfg_buf + cfg_len, 4096);
        if (got < 0) {
            wasi_fd_close(fd);
            return W_FAILED_IO;
        }
        if (got == 0) break;
        cfg_len += (size_t)got;
    }
    wasi_fd_close(fd);
    sdk_alloc(cfg_len);
    return W_OK;
}

const uint8_t *sdk_config_blob(size_t *len) {
    *len = cfg_len;
    return cfg_buf;
}

const uint8_t *sdk_config_get(const char *key, size_t *len) {
    size_t klen = strlen(key);
    const uint8_t *found = 0;
    size_t i = 0;
    while (i < cfg_len) {
        size_t end = i;
        while (end < cfg_len && cfg_buf[end] != '\n') end++;
        size_t line = end - i;
        if (line > klen && cfg_buf[i + klen] == '=' && memcmp(cfg_buf + i, key, klen) == 0) {
            found = cfg_buf + i + klen + 1;
            *len = line - klen - 1;
            if (*len && found[*len - 1] == '\r') (*len)--;
        }
        i = end + 1;
    }
    return found;
}

/* ---- connection state ------------------------------------------------- */

static int initialized;
static int connected;
static int32_t plain_fd = -1;
static int32_t wire_fd = -1;
static int32_t cancel_fd = -1;

static uint8_t acc[SDK_ACC_CAP];
static size_t acc_len;

int sdk_unread(const uint8_t *buf, size_t n) {
    if (acc_len + n > SDK_ACC_CAP) return W_GENERAL;
    memmove(acc + n, acc, acc_len);
    memcpy(acc, buf, n);
    acc_len += n;
    return W_OK;
}

/* First stream-socket descriptor other than `skip`: the one the host
 * pushed before calling accept/associate. */
static int32_t find_pushed_socket(int32_t skip) {
    wasi_fdstat_t st;
    for (int32_t fd = 3; fd < 4096; fd++) {
        if (fd == skip) continue;
        if (wasi_fd_fdstat_get(fd, &st) != 0) continue;
        if (st.filetype == WASI_FILETYPE_SOCKET_STREAM) return fd;
    }
    return W_INVALID_FD;
}

static int32_t dial_remote(void) {
    size_t alen = 0;
    const uint8_t *addr = sdk_config_get("remote", &alen);
    if (!addr || alen == 0) {
        sdk_log(LOG_ERROR, "config has no remote= line");
        return W_INVALID_CONFIG;
    }
    return water_host_dial((const char *)addr, (int32_t)alen);
}

EXPORT(_water_v1) int32_t water_v1(void) { return 1; }

EXPORT(_water_init) int32_t water_init(void) {
    if (initialized) return W_DOUBLE_INIT;
    int rc = load_config();
    if (rc < 0) return rc;
    if (WATM_CODEC.configure && WATM_CODEC.configure(cfg_buf, cfg_len) != 0) {
        sdk_log(LOG_ERROR, "codec rejected config");
        return W_INVALID_CONFIG;
    }
    initialized = 1;
    return W_OK;
}

EXPORT(_water_dial) int32_t water_dial(int32_t internal) {
    if (!initialized) return W_NOT_INITIALIZED;
    if (connected) return W_DOUBLE_INIT;
    if (internal < 0) return W_INVALID_FD;
    int32_t net = dial_remote();
    if (net < 0) return net;
    int rc = WATM_CODEC.handshake(ROLE_DIALER, net);
    if (rc < 0) {
        sdk_log(LOG_WARN, "dialer handshake failed");
        wasi_fd_close(net);
        return rc;
    }
    plain_fd = internal;
    wire_fd = net;
    connected = 1;
    return net;
}

EXPORT(_water_accept) int32_t water_accept(int32_t internal) {
    if (!initialized) return W_NOT_INITIALIZED;
    if (connected) return W_DOUBLE_INIT;
    if (internal < 0) return W_INVALID_FD;
    int32_t net = find_pushed_socket(internal);
    if (net < 0) return net;
    int rc = WATM_CODEC.handshake(ROLE_LISTENER, net);
    if (rc < 0) {
        sdk_log(LOG_WARN, "listener handshake failed");
        return rc;
    }
    plain_fd = internal;
    wire_fd = net;
    connected = 1;
    return net;
}

EXPORT(_water_associate) int32_t water_associate(void) {
    if (!initialized) return W_NOT_INITIALIZED;
    if (connected) return W_DOUBLE_INIT;
    int32_t inbound = find_pushed_socket(-1);
    if (inbound < 0) return inbound;
    int rc = WATM_CODEC.handshake(ROLE_RELAY_INBOUND, inbound);
    if (rc < 0) {
        sdk_log(LOG_WARN, "relay inbound handshake failed");
        return rc;
    }
    int32_t outbound = dial_remote();
    if (outbound < 0) return outbound;
    plain_fd = outbound;
    wire_fd = inbound;
    connected = 1;
    return W_OK;
}

EXPORT(_water_cancel_with) int32_t water_cancel_with(int32_t fd) {
    wasi_fdstat_t st;
    if (fd < 0 || wasi_fd_fdstat_get(fd, &st) != 0) return W_INVALID_FD;
    cancel_fd = fd;
    return W_OK;
}

/* ---- worker loop ------------------------------------------------------ */

static uint8_t plain_in[16384];
static uint8_t sealed[SDK_MAX_FRAME];
static uint8_t opened[SDK_MAX_FRAME];

enum { UD_PLAIN = 0, UD_WIRE = 1, UD_CANCEL = 2 };

static void sub_read(wasi_subscription_t *s, uint64_t ud, int32_t fd) {
    memset(s, 0, sizeof(*s));
    s->userdata = ud;
    s->tag = WASI_EVENTTYPE_FD_READ;
    s->u.fd_rw.fd = (uint32_t)fd;
}

/* plain side readable: seal one chunk and push it to the wire */
static int pump_outbound(int *plain_open) {
    size_t want = WATM_CODEC.max_plain < sizeof(plain_in) ? WATM_CODEC.max_plain : sizeof(plain_in);
    long got = sdk_read_some(plain_fd, plain_in, want);
    if (got < 0) return W_FAILED_IO;
    if (got == 0) {
        *plain_open = 0;
        wasi_sock_shutdown(wire_fd, WASI_SHUT_WR);
        return W_OK;
    }
    long n = WATM_CODEC.seal(plain_in, (size_t)got, sealed);
    if (n <= 0) return W_FAILED_IO;
    return sdk_write_all(wire_fd, sealed, (size_t)n);
}

/* decode every complete unit in the accumulation buffer */
static int drain_inbound(void) {
    size_t off = 0;
    while (off < acc_len) {
        size_t plen = 0;
        long used = WATM_CODEC.open(acc + off, acc_len - off, opened, &plen);
        if (used < 0) {
            sdk_log(LOG_WARN, "inbound frame rejected");
            return W_FAILED_IO;
        }
        if (used == 0) break;
        off += (size_t)used;
        if (plen && sdk_write_all(plain_fd, opened, plen) < 0) return W_FAILED_IO;
    }
    if (off) {
        memmove(acc, acc + off, acc_len - off);
        acc_len -= off;
    }
    return W_OK;
}

static int pump_inbound(int *wire_open) {
    if (acc_len == SDK_ACC_CAP) return W_FAILED_IO;
    long got = sdk_read_some(wire_fd, acc + acc_len, SDK_ACC_CAP - acc_len);
    if (got < 0) return W_FAILED_IO;
    if (got == 0) {
        *wire_open = 0;
        wasi_sock_shutdown(plain_fd, WASI_SHUT_WR);
        if (acc_len) {
            sdk_log(LOG_WARN, "wire closed mid-frame");
            return W_FAILED_IO;
        }
        return W_OK;
    }
    acc_len += (size_t)got;
    return drain_inbound();
}

EXPORT(_water_worker) int32_t water_worker(void) {
    if (!connected) return W_NOT_INITIALIZED;
    int plain_open = 1, wire_open = 1;
    wasi_subscription_t subs[3];
    wasi_event_t events[3];

    /* handshake may have stashed wire bytes */
    if (acc_len && drain_inbound() < 0) return W_FAILED_IO;

    while (plain_open || wire_open) {
        int32_t nsubs = 0;
        if (plain_open) sub_read(&subs[nsubs++], UD_PLAIN, plain_fd);
        if (wire_open) sub_read(&subs[nsubs++], UD_WIRE, wire_fd);
        if (cancel_fd >= 0) sub_read(&subs[nsubs++], UD_CANCEL, cancel_fd);
        uint32_t nev = 0;
        int32_t err = wasi_poll_oneoff(subs, events, nsubs, &nev);
        if (err == WASI_ERRNO_INTR) continue;
        if (err != 0) return W_FAILED_IO;
        for (uint32_t i = 0; i < nev; i++) {
            if (events[i].userdata == UD_CANCEL) {
                sdk_log(LOG_DEBUG, "cancelled");
                return W_OK;
            }
        }
        for (uint32_t i = 0; i < nev; i++) {
            int rc = W_OK;
            if (events[i].userdata == UD_PLAIN && plain_open) rc = pump_outbound(&plain_open);
            else if (events[i].userdata == UD_WIRE && wire_open) rc = pump_inbound(&wire_open);
            if (rc < 0) return rc;
        }
    }
    return W_OK;
}
