import hashlib
import hmac
import os
import random
import socket
import threading

import pytest

from water import ErrorCode, WaterError
from water.runtime import Dialer, InstanceConfig, Listener
from water.transports.kat import GuestFraming, StreamOpener
from water.transports.oracle import (LEN_SECTION, MAX_PAYLOAD, SALT_LEN, TAG_LEN, AuthError,
                                     Direction, FrameDecoder, OracleServer, Session, derive_psk,
                                     derive_subkey, oracle_client, seal_frame, seal_stream)

from helpers import accept_in_thread, exchange, tcp_server

PW = b"password=hunter2\n"
SALT = bytes(range(32))

# frozen known answers for password "hunter2", salt 00..1f, nonce 0
KAT_PSK = "3326b9a251b8a9bcb6a0ba6b659811b042bec6aa789dc01d324bfd0123cf0a29"
KAT_SUBKEY = "ab67e59b9c5678a134b65633dd45327e196ab4d5ccd5bea9123eb6596df68296"
KAT_SEAL_HI = ("aadd2d8d93d6782bce5853d3b505b912767a"
               "3ae20c984249133c1eadbd444801cccfc672")


def _recv_exactly(sock, n, timeout=5):
    sock.settimeout(timeout)
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            break
        buf += chunk
    return buf


def _hkdf_stdlib(ikm, salt, info, length=32):
    prk = hmac.new(salt or bytes(32), ikm, hashlib.sha256).digest()
    out, block, i = b"", b"", 1
    while len(out) < length:
        block = hmac.new(prk, block + info + bytes([i]), hashlib.sha256).digest()
        out += block
        i += 1
    return out[:length]


def _dialed_to_tcp(image, config=InstanceConfig()):
    srv, addr = tcp_server()
    conn = Dialer(image, config).dial(addr)
    peer, _ = srv.accept()
    srv.close()
    return conn, peer


class TestPlain:
    @pytest.mark.parametrize("data", [b"hello", os.urandom(4096)])
    def test_identity_on_wire(self, plain, data):
        conn, peer = _dialed_to_tcp(plain)
        conn.write(data)
        assert _recv_exactly(peer, len(data)) == data
        peer.sendall(data)
        assert conn.read_exactly(len(data), timeout=5) == data
        conn.close()
        peer.close()

    def test_empty(self, plain):
        conn, peer = _dialed_to_tcp(plain)
        assert conn.write(b"") == 0
        conn.close()
        assert _recv_exactly(peer, 1) == b""
        peer.close()


class TestReverse:
    @pytest.mark.parametrize("data,wire", [(b"ABCD", b"DCBA"), (b"A", b"A")])
    def test_examples(self, reverse, data, wire):
        conn, peer = _dialed_to_tcp(reverse)
        conn.write(data)
        assert _recv_exactly(peer, len(wire)) == wire
        conn.close()
        peer.close()

    def test_open_reverses_inbound(self, reverse):
        conn, peer = _dialed_to_tcp(reverse)
        peer.sendall(b"xyz")
        assert conn.read_exactly(3, timeout=5) == b"zyx"
        conn.close()
        peer.close()

    @pytest.mark.parametrize("seed", range(3))
    def test_involution(self, reverse, seed):
        rng = random.Random(seed)
        with Listener(reverse) as lst:
            t, box = accept_in_thread(lst)
            a = Dialer(reverse).dial(lst.addr)
            t.join(5)
            b = box["conn"]
            for _ in range(25):
                x = rng.randbytes(rng.randint(1, 4096))
                a.write(x)
                assert b.read_exactly(len(x), timeout=5) == x
            a.close()
            b.close()


class TestKeyDerivation:
    def test_psk_known_answer(self):
        assert derive_psk("hunter2").hex() == KAT_PSK

    def test_subkey_known_answer(self):
        assert derive_subkey(bytes.fromhex(KAT_PSK), SALT).hex() == KAT_SUBKEY

    def test_second_route_stdlib_hkdf(self):
        psk = _hkdf_stdlib(b"hunter2", b"", b"water-psk")
        assert psk.hex() == KAT_PSK
        assert _hkdf_stdlib(psk, SALT, b"water-subkey").hex() == KAT_SUBKEY


class TestAeadFraming:
    def test_seal_hi_is_36_bytes(self):
        wire = GuestFraming(b"hunter2", SALT).seal(b"hi")
        assert len(wire) == (2 + TAG_LEN) + (2 + TAG_LEN) == 36
        assert wire.hex() == KAT_SEAL_HI
        assert seal_frame(Direction(bytes.fromhex(KAT_SUBKEY)), b"hi").hex() == KAT_SEAL_HI

    def test_empty_payload_frame(self):
        assert len(GuestFraming(b"hunter2", SALT).seal(b"")) == LEN_SECTION + TAG_LEN

    @pytest.mark.parametrize("counter", [0, 1, 255, 2**32 + 7, 2**64 - 3])
    def test_guest_equals_oracle(self, counter):
        rng = random.Random(counter)
        salt = rng.randbytes(32)
        guest = GuestFraming(b"pw", salt)
        guest.set_nonce(counter)
        native = Direction(derive_subkey(derive_psk(b"pw"), salt), counter)
        for _ in range(5):
            payload = rng.randbytes(rng.randint(0, MAX_PAYLOAD))
            assert guest.seal(payload) == seal_frame(native, payload)

    def test_thousand_roundtrips_random_splits(self):
        rng = random.Random(1000)
        salt = rng.randbytes(32)
        subkey = derive_subkey(derive_psk(b"hunter2"), salt)
        guest_tx = GuestFraming(b"hunter2", salt)
        oracle_rx = FrameDecoder(Direction(subkey))
        oracle_tx = Direction(subkey)
        guest_rx = StreamOpener(GuestFraming(b"hunter2", salt))
        for _ in range(1000):
            x = rng.randbytes(rng.choice([0, 1, rng.randint(0, 2048), MAX_PAYLOAD]))
            for wire, rx in ((guest_tx.seal(x), oracle_rx.feed),
                             (seal_frame(oracle_tx, x), guest_rx.feed)):
                cut = sorted(rng.sample(range(len(wire) + 1), 2))
                got = rx(wire[:cut[0]]) + rx(wire[cut[0]:cut[1]]) + rx(wire[cut[1]:])
                assert got == x

    def test_byte_at_a_time_equals_all_at_once(self):
        salt = os.urandom(32)
        wire = seal_stream(Direction(derive_subkey(derive_psk(b"k"), salt)), os.urandom(40000))
        whole = StreamOpener(GuestFraming(b"k", salt)).feed(wire)
        single = StreamOpener(GuestFraming(b"k", salt))
        trickled = b"".join(single.feed(wire[i:i + 1]) for i in range(len(wire)))
        assert trickled == whole and len(whole) == 40000

    def test_tamper_sweep(self):
        wire = GuestFraming(b"hunter2", SALT).seal(b"tamper me")
        subkey = bytes.fromhex(KAT_SUBKEY)
        for bit in range(len(wire) * 8):
            bad = bytearray(wire)
            bad[bit // 8] ^= 1 << (bit % 8)
            guest = GuestFraming(b"hunter2", SALT)
            guest.load(bytes(bad))
            used, _ = guest.open_step(len(bad))
            assert used == -1, f"guest accepted flip of bit {bit}"
            with pytest.raises(AuthError):
                FrameDecoder(Direction(subkey)).feed(bytes(bad))

    def test_length_out_of_range_rejected(self):
        d = Direction(bytes.fromhex(KAT_SUBKEY))
        forged = d.seal((MAX_PAYLOAD + 1).to_bytes(2, "big")) + bytes(MAX_PAYLOAD + 1 + TAG_LEN)
        guest = GuestFraming(b"hunter2", SALT)
        guest.load(forged[:LEN_SECTION])
        assert guest.open_step(LEN_SECTION)[0] == -1

    def test_need_more_consumes_nothing(self):
        wire = GuestFraming(b"hunter2", SALT).seal(b"partial")
        guest = GuestFraming(b"hunter2", SALT)
        for n in (0, 1, LEN_SECTION - 1, LEN_SECTION, len(wire) - 1):
            guest.load(wire[:n])
            assert guest.open_step(n) == (0, b"")
        guest.load(wire)
        assert guest.open_step(len(wire)) == (len(wire), b"partial")


class TestNonceDiscipline:
    def test_ten_thousand_frame_soak(self):
        guest = GuestFraming(b"soak", os.urandom(32))
        seen = set()
        last = -1
        for i in range(10_000):
            before = guest.nonce
            guest.seal(b"x" * (i % 64))
            after = guest.nonce
            assert before > last and after == before + 2
            seen.update((before, before + 1))
            last = before + 1
        assert len(seen) == 20_000 and guest.frames == 20_000

    def test_bulk_frames_count(self):
        guest = GuestFraming(b"bulk", os.urandom(32))
        assert guest.seal_bulk(3 * MAX_PAYLOAD + 1) == 4
        assert guest.nonce == 8


class TestMonobit:
    def test_guest_wire_bytes(self):
        guest = GuestFraming(b"entropy", os.urandom(32))
        # all-zero plaintext: any bias would come from the transport itself
        wire = b"".join(guest.seal(bytes(MAX_PAYLOAD)) for _ in range(5))
        assert len(wire) >= 64 * 1024
        ones = sum(bin(b).count("1") for b in wire)
        assert abs(ones / (8 * len(wire)) - 0.5) < 0.01


class TestHandshake:
    def test_same_password_first_frame_authenticates(self):
        a, b = Session("hunter2"), Session("hunter2")
        assert b.open(a.salt + a.seal(b"first")) == b"first"

    def test_different_passwords(self):
        a, b = Session("hunter2"), Session("hunter3")
        with pytest.raises(AuthError):
            b.open(a.salt + a.seal(b"first"))

    def test_truncated_salt(self, aead):
        with Listener(aead, InstanceConfig(PW)) as lst:
            t, box = accept_in_thread(lst)
            s = socket.create_connection(lst.address)
            s.sendall(os.urandom(SALT_LEN - 1))
            s.shutdown(socket.SHUT_WR)
            t.join(5)
            assert isinstance(box["error"], WaterError)
            assert box["error"].code == ErrorCode.FAILED_IO
            s.close()


class TestOracleInterop:
    def test_guest_dialer_oracle_server_one_mib(self, aead):
        data = os.urandom(1 << 20)
        with OracleServer("hunter2") as server:
            box = {}

            def serve():
                stream = server.accept()
                buf = bytearray()
                while True:
                    chunk = stream.recv()
                    if not chunk:
                        break
                    buf += chunk
                stream.sendall(bytes(buf))
                stream.shutdown_write()
                box["n"] = len(buf)

            t = threading.Thread(target=serve, daemon=True)
            t.start()
            conn = Dialer(aead, InstanceConfig(PW)).dial(server.addr)
            writer = threading.Thread(target=lambda: (conn.write(data), conn.close_write()),
                                      daemon=True)
            writer.start()
            back = bytearray()
            while True:
                chunk = conn.read(timeout=30)
                if not chunk:
                    break
                back += chunk
            t.join(10)
            assert hashlib.sha256(back).digest() == hashlib.sha256(data).digest()
            conn.close()

    def test_oracle_client_guest_listener_one_mib(self, aead):
        ab, ba = os.urandom(1 << 20), os.urandom(1 << 20)
        with Listener(aead, InstanceConfig(PW)) as lst:
            t, box = accept_in_thread(lst)
            client = oracle_client(lst.addr, "hunter2")

            def accepted():
                t.join(10)
                return box["conn"]

            got_listener, got_client = exchange(client, accepted, ab, ba)
            assert hashlib.sha256(got_listener).digest() == hashlib.sha256(ab).digest()
            assert hashlib.sha256(got_client).digest() == hashlib.sha256(ba).digest()
            client.close()

    def test_wrong_password_accept_fails(self, aead):
        with Listener(aead, InstanceConfig(PW)) as lst:
            t, box = accept_in_thread(lst)
            client = oracle_client(lst.addr, "wrong")
            client.sendall(b"hello")
            t.join(5)
            assert box["error"].code == ErrorCode.FAILED_IO
            client.close()
