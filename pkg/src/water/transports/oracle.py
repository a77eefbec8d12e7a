"""Native implementation of the AEAD transport's wire format.

Built on the ``cryptography`` package and sharing no code with the guest,
so it serves as the independent counterparty in interop and tamper tests.
"""

from __future__ import annotations

import os
import socket

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from ..abi import ErrorCode, WaterError

SALT_LEN = 32
KEY_LEN = 32
TAG_LEN = 16
MAX_PAYLOAD = 0x3FFF
LEN_SECTION = 2 + TAG_LEN
PSK_INFO = b"water-psk"
SUBKEY_INFO = b"water-subkey"
NONCE_LIMIT = 1 << 96


class AuthError(WaterError):
    def __init__(self, detail="authentication failed"):
        super().__init__(ErrorCode.FAILED_IO, detail)


def _hkdf(ikm, salt, info):
    return HKDF(algorithm=hashes.SHA256(), length=KEY_LEN, salt=salt, info=info).derive(ikm)


def derive_psk(password) -> bytes:
    if isinstance(password, str):
        password = password.encode("utf-8")
    return _hkdf(password, None, PSK_INFO)


def derive_subkey(psk: bytes, salt: bytes) -> bytes:
    if len(salt) != SALT_LEN:
        raise ValueError("salt must be 32 bytes")
    return _hkdf(psk, salt, SUBKEY_INFO)


class Direction:
    """One direction's cipher and little-endian nonce counter."""

    def __init__(self, subkey: bytes, counter: int = 0):
        self._aead = ChaCha20Poly1305(subkey)
        self.counter = counter
        self.messages = 0

    def _nonce(self):
        if self.counter >= NONCE_LIMIT:
            raise WaterError(ErrorCode.FAILED_IO, "nonce space exhausted")
        nonce = self.counter.to_bytes(12, "little")
        self.counter += 1
        self.messages += 1
        return nonce

    def seal(self, data) -> bytes:
        return self._aead.encrypt(self._nonce(), bytes(data), None)

    def open(self, data) -> bytes:
        try:
            return self._aead.decrypt(self._nonce(), bytes(data), None)
        except InvalidTag:
            raise AuthError() from None


def seal_frame(direction: Direction, payload) -> bytes:
    if len(payload) > MAX_PAYLOAD:
        raise WaterError(ErrorCode.INVALID_ARGUMENT, "payload exceeds one frame")
    return direction.seal(len(payload).to_bytes(2, "big")) + direction.seal(payload)


def seal_stream(direction: Direction, data) -> bytes:
    """Frame ``data`` in maximal chunks."""
    view = memoryview(data)
    return b"".join(seal_frame(direction, view[i:i + MAX_PAYLOAD])
                    for i in range(0, len(view), MAX_PAYLOAD))


class FrameDecoder:
    """Resumable decoder: feed any chunking, get plaintext back in order."""

    def __init__(self, direction: Direction):
        self.direction = direction
        self._buf = bytearray()
        self._pending = None  # payload length whose section has not arrived

    @property
    def buffered(self):
        return len(self._buf)

    def feed(self, data) -> bytes:
        self._buf += data
        out = bytearray()
        while True:
            if self._pending is None:
                if len(self._buf) < LEN_SECTION:
                    break
                head = self.direction.open(self._buf[:LEN_SECTION])
                del self._buf[:LEN_SECTION]
                self._pending = int.from_bytes(head, "big")
                if self._pending > MAX_PAYLOAD:
                    raise AuthError("frame length out of range")
            need = self._pending + TAG_LEN
            if len(self._buf) < need:
                break
            out += self.direction.open(self._buf[:need])
            del self._buf[:need]
            self._pending = None
        return bytes(out)


class Session:
    """Both directions of one connection; the receive side starts once the
    peer's salt is known."""

    def __init__(self, password, salt: bytes | None = None):
        self.psk = derive_psk(password)
        self.salt = salt if salt is not None else os.urandom(SALT_LEN)
        self.tx = Direction(derive_subkey(self.psk, self.salt))
        self.rx = None
        self._decoder = None
        self._salt_buf = bytearray()

    def seal(self, data) -> bytes:
        return seal_stream(self.tx, data)

    def open(self, data) -> bytes:
        if self._decoder is None:
            self._salt_buf += data
            if len(self._salt_buf) < SALT_LEN:
                return b""
            peer = bytes(self._salt_buf[:SALT_LEN])
            data = bytes(self._salt_buf[SALT_LEN:])
            self.rx = Direction(derive_subkey(self.psk, peer))
            self._decoder = FrameDecoder(self.rx)
        return self._decoder.feed(data)

    @property
    def mid_frame(self):
        if self._decoder is None:
            return bool(self._salt_buf)
        return self._decoder.buffered > 0 or self._decoder._pending is not None


class OracleStream:
    """Plaintext endpoint speaking the AEAD wire format over a TCP socket."""

    def __init__(self, sock, password, salt=None, send_salt=True):
        self.sock = sock
        self.session = Session(password, salt)
        self._plain = bytearray()
        self._eof = False
        self._salt_sent = False
        if send_salt:
            self._send_salt()

    def _send_salt(self):
        if not self._salt_sent:
            self._salt_sent = True
            self.sock.sendall(self.session.salt)

    def sendall(self, data):
        self._send_salt()
        if data:
            self.sock.sendall(self.session.seal(data))

    def send_raw(self, data):
        self.sock.sendall(data)

    def recv(self, n=65536) -> bytes:
        """Plaintext, or b"" at a clean end of stream.  Raises AuthError on
        a forged frame or a stream cut mid-frame."""
        while not self._plain and not self._eof:
            chunk = self.sock.recv(65536)
            if not chunk:
                self._eof = True
                if self.session.mid_frame:
                    raise AuthError("stream ended mid-frame")
                break
            self._plain += self.session.open(chunk)
        out = bytes(self._plain[:n])
        del self._plain[:n]
        return out

    def recv_exactly(self, n) -> bytes:
        buf = bytearray()
        while len(buf) < n:
            chunk = self.recv(n - len(buf))
            if not chunk:
                raise WaterError(ErrorCode.FAILED_IO, f"stream ended after {len(buf)} of {n} bytes")
            buf += chunk
        return bytes(buf)

    def shutdown_write(self):
        self._send_salt()
        try:
            self.sock.shutdown(socket.SHUT_WR)
        except OSError:
            pass

    def close(self):
        self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def oracle_client(addr, password, salt=None, timeout=None) -> OracleStream:
    """Connect to ``host:port`` and speak AEAD as the dialer (salt first)."""
    from ..bridge.host import parse_addr, set_nodelay
    host, port = parse_addr(addr)
    sock = socket.create_connection((host, port), timeout=timeout)
    set_nodelay(sock)
    return OracleStream(sock, password, salt)


class OracleServer:
    """Accepting side.  Its salt goes out right after accept."""

    def __init__(self, password, local="127.0.0.1:0"):
        from ..bridge.host import parse_addr
        host, port = parse_addr(local, allow_empty_host=True)
        self.password = password
        self.sock = socket.create_server((host, port))

    @property
    def addr(self):
        host, port = self.sock.getsockname()[:2]
        return f"{host}:{port}"

    def accept(self, timeout=None) -> OracleStream:
        from ..bridge.host import set_nodelay
        self.sock.settimeout(timeout)
        conn, _ = self.sock.accept()
        conn.settimeout(None)
        set_nodelay(conn)
        return OracleStream(conn, self.password)

    def close(self):
        self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def oracle_server(addr, password) -> OracleServer:
    return OracleServer(password, addr)
