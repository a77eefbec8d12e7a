/* Host imports visible to a WATM: the preview-1 subset the SDK uses plus
 * the water_host namespace. */
#ifndef WATER_IMPORTS_H
#define WATER_IMPORTS_H

#include <stddef.h>
#include <stdint.h>

#define WASI_IMPORT(name) \
    __attribute__((import_module("wasi_snapshot_preview1"), import_name(#name)))
#define HOST_IMPORT(name) \
    __attribute__((import_module("water_host"), import_name(#name)))

typedef struct {
    uint32_t buf;
    uint32_t buf_len;
} wasi_iovec_t;

/* 48-byte subscription record */
typedef struct {
    uint64_t userdata;
    uint8_t tag;
    uint8_t _pad0[7];
    union {
        struct {
            uint32_t id;
            uint32_t _pad1;
            uint64_t timeout;
            uint64_t precision;
            uint16_t flags;
            uint8_t _pad2[6];
        } clock;
        struct {
            uint32_t fd;
            uint8_t _pad3[28];
        } fd_rw;
    } u;
} wasi_subscription_t;

/* 32-byte event record */
typedef struct {
    uint64_t userdata;
    uint16_t error;
    uint8_t type;
    uint8_t _pad0[5];
    uint64_t nbytes;
    uint16_t flags;
    uint8_t _pad1[6];
} wasi_event_t;

typedef struct {
    uint8_t filetype;
    uint8_t _pad0;
    uint16_t flags;
    uint8_t _pad1[4];
    uint64_t rights_base;
    uint64_t rights_inheriting;
} wasi_fdstat_t;

_Static_assert(sizeof(wasi_subscription_t) == 48, "subscription layout");
_Static_assert(sizeof(wasi_event_t) == 32, "event layout");
_Static_assert(sizeof(wasi_fdstat_t) == 24, "fdstat layout");

#define WASI_EVENTTYPE_CLOCK 0
#define WASI_EVENTTYPE_FD_READ 1
#define WASI_EVENTTYPE_FD_WRITE 2
#define WASI_FILETYPE_SOCKET_STREAM 6
#define WASI_SHUT_WR 2
#define WASI_ERRNO_AGAIN 6
#define WASI_ERRNO_INTR 27

WASI_IMPORT(fd_read)
int32_t wasi_fd_read(int32_t fd, const wasi_iovec_t *iovs, int32_t n, uint32_t *nread);
WASI_IMPORT(fd_write)
int32_t wasi_fd_write(int32_t fd, const wasi_iovec_t *iovs, int32_t n, uint32_t *nwritten);
WASI_IMPORT(fd_close)
int32_t wasi_fd_close(int32_t fd);
WASI_IMPORT(fd_fdstat_get)
int32_t wasi_fd_fdstat_get(int32_t fd, wasi_fdstat_t *out);
WASI_IMPORT(poll_oneoff)
int32_t wasi_poll_oneoff(const wasi_subscription_t *in, wasi_event_t *out,
                         int32_t nsubs, uint32_t *nevents);
WASI_IMPORT(random_get)
int32_t wasi_random_get(uint8_t *buf, int32_t len);
WASI_IMPORT(sock_shutdown)
int32_t wasi_sock_shutdown(int32_t fd, int32_t how);

HOST_IMPORT(host_dial)
int32_t water_host_dial(const char *addr, int32_t len);
HOST_IMPORT(host_defer)
int32_t water_host_defer(void);
HOST_IMPORT(pull_config)
int32_t water_pull_config(void);
HOST_IMPORT(host_log)
int32_t water_host_log(int32_t level, const char *msg, int32_t len);

#endif
