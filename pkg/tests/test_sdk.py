"""Behaviour of the guest-side library shared by every bundled transport."""

import os
import random
import re
import socket
import threading
import time

import pytest

from water import ErrorCode, WaterError
from water.bridge.host import make_internal_channel, push_accepted
from water.runtime import Dialer, GuestInstance, InstanceConfig, Listener, Relay
from water.transports import bundled_path
from water.transports.kat import GuestFraming, StreamOpener
from water.transports.oracle import MAX_PAYLOAD, SALT_LEN, OracleServer, oracle_client

from helpers import accept_in_thread, closed_port, exchange, tcp_server

PW = b"password=hunter2\n"


def _recv_exactly(sock, n, timeout=5):
    sock.settimeout(timeout)
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            break
        buf += chunk
    return buf


def _sdk_constant(name):
    header = (bundled_path("plain").parent / "csrc" / "sdk.h").read_text()
    m = re.search(rf"#define {name} (.+)", header)
    expr = m.group(1).replace("SDK_MAX_FRAME", str(_sdk_constant("SDK_MAX_FRAME"))
                              if name != "SDK_MAX_FRAME" else "")
    return int(eval(expr, {}))  # noqa: S307 - arithmetic from our own header


class TestInit:
    def test_plain_any_blob(self, plain):
        for blob in (b"", b"junk\x00\xff", b"remote=x:1\n"):
            inst = GuestInstance(plain, InstanceConfig(blob))
            inst.init()
            assert inst.phase == "ready"
            inst.close()

    def test_aead_without_password(self, aead):
        inst = GuestInstance(aead, InstanceConfig(b"cipher=chacha\n"))
        with pytest.raises(WaterError) as err:
            inst.init()
        assert err.value.code == ErrorCode.INVALID_CONFIG
        inst.close()

    def test_second_call(self, plain):
        inst = GuestInstance(plain, InstanceConfig())
        inst.init()
        assert inst.call("_water_init") == ErrorCode.DOUBLE_INIT
        inst.close()

    def test_last_key_occurrence_wins(self, aead, echo):
        # an earlier empty password is overridden by the later line
        inst = GuestInstance(aead, InstanceConfig(b"password=\npassword=hunter2\n"))
        inst.init()
        inst.close()


class TestDial:
    def test_plain_sends_nothing_on_connect(self, plain):
        srv, addr = tcp_server()
        conn = Dialer(plain).dial(addr)
        peer, _ = srv.accept()
        peer.settimeout(0.2)
        with pytest.raises(socket.timeout):
            peer.recv(1)
        conn.close()
        peer.close()
        srv.close()

    def test_aead_sends_one_salt_first(self, aead):
        srv, addr = tcp_server()
        conn = Dialer(aead, InstanceConfig(PW)).dial(addr)
        peer, _ = srv.accept()
        salt = _recv_exactly(peer, SALT_LEN)
        assert len(salt) == SALT_LEN
        peer.settimeout(0.2)
        with pytest.raises(socket.timeout):
            peer.recv(1)
        conn.write(b"payload")
        # one frame: sealed length (2+16) then sealed payload (7+16)
        assert len(_recv_exactly(peer, 18 + 23)) == 41
        conn.close()
        peer.close()
        srv.close()

    def test_fresh_salt_per_connection(self, aead):
        srv, addr = tcp_server()
        salts = []
        for _ in range(2):
            conn = Dialer(aead, InstanceConfig(PW)).dial(addr)
            peer, _ = srv.accept()
            salts.append(_recv_exactly(peer, SALT_LEN))
            conn.close()
            peer.close()
        assert salts[0] != salts[1]
        srv.close()

    def test_unreachable(self, plain):
        inst = GuestInstance(plain, InstanceConfig().with_remote(closed_port()))
        inst.init()
        _, fd = make_internal_channel(inst, 64)
        assert inst.call("_water_dial", fd) == ErrorCode.NETWORK_UNREACHABLE
        inst.close()

    def test_missing_remote(self, plain):
        inst = GuestInstance(plain, InstanceConfig())
        inst.init()
        _, fd = make_internal_channel(inst, 64)
        assert inst.call("_water_dial", fd) < 0
        inst.close()


class TestAccept:
    def test_aead_matching_password(self, aead):
        with Listener(aead, InstanceConfig(PW)) as lst:
            t, box = accept_in_thread(lst)
            client = oracle_client(lst.addr, "hunter2")
            client.sendall(b"x")
            t.join(5)
            conn = box["conn"]
            assert conn.read_exactly(1, timeout=5) == b"x"
            conn.write(b"reply")
            assert client.recv_exactly(5) == b"reply"
            conn.close()
            client.close()

    def test_aead_wrong_password(self, aead):
        with Listener(aead, InstanceConfig(PW)) as lst:
            t, box = accept_in_thread(lst)
            client = oracle_client(lst.addr, "not-the-password")
            client.sendall(b"hello")
            t.join(5)
            assert box["error"].code == ErrorCode.FAILED_IO
            client.close()

    def test_plain_immediate(self, plain):
        inst = GuestInstance(plain, InstanceConfig())
        inst.init()
        a, b = socket.socketpair()
        push_accepted(inst, b)
        _, fd = make_internal_channel(inst, 64)
        t0 = time.monotonic()
        assert inst.call("_water_accept", fd) >= 3
        assert time.monotonic() - t0 < 0.5
        inst.close()
        a.close()


class TestAssociate:
    def test_plain_transparent(self, plain, echo):
        relay = Relay(plain, remote=echo.addr).start()
        c = socket.create_connection(relay.address)
        data = os.urandom(50000)
        c.sendall(data)
        assert _recv_exactly(c, len(data)) == data
        c.close()
        relay.close()

    def test_reverse_once_each_way(self, reverse):
        srv, addr = tcp_server()
        relay = Relay(reverse, remote=addr).start()
        c = socket.create_connection(relay.address)
        c.sendall(b"ABCD")
        peer, _ = srv.accept()
        assert _recv_exactly(peer, 4) == b"DCBA"
        peer.sendall(b"wxyz")
        assert _recv_exactly(c, 4) == b"zyxw"
        c.close()
        peer.close()
        srv.close()
        relay.close()

    def test_aead_client_plaintext_remote(self, aead):
        srv, addr = tcp_server()
        relay = Relay(aead, InstanceConfig(PW), remote=addr).start()
        client = oracle_client(relay.addr, "hunter2")
        client.sendall(b"secret message")
        peer, _ = srv.accept()
        assert _recv_exactly(peer, 14) == b"secret message"
        peer.sendall(b"plain answer")
        assert client.recv_exactly(12) == b"plain answer"
        client.close()
        peer.close()
        srv.close()
        relay.close()


class TestWorker:
    def test_512_each_way_plain(self, plain):
        lst = Listener(plain)
        t, box = accept_in_thread(lst)
        a = Dialer(plain).dial(lst.addr)
        t.join(5)
        b = box["conn"]
        ab, ba = os.urandom(512), os.urandom(512)
        got_b, got_a = exchange(a, b, ab, ba)
        assert (got_b, got_a) == (ab, ba)
        assert a.join(5) and b.join(5)
        assert a.exit_code == b.exit_code == 0
        lst.close()

    def test_one_mib_aead_random_chunks_vs_oracle(self, aead):
        rng = random.Random(7)
        data = rng.randbytes(1 << 20)
        server = OracleServer("hunter2")
        box = {}

        def serve():
            stream = server.accept()
            buf = bytearray()
            while True:
                chunk = stream.recv(65536)
                if not chunk:
                    break
                buf += chunk
            box["got"] = bytes(buf)
            stream.sendall(bytes(buf[::-1][:4096]))
            stream.close()

        t = threading.Thread(target=serve, daemon=True)
        t.start()
        conn = Dialer(aead, InstanceConfig(PW)).dial(server.addr)
        off = 0
        while off < len(data):
            n = rng.randint(1, 4096)
            conn.write(data[off:off + n])
            off += n
        conn.close_write()
        t.join(30)
        assert box["got"] == data
        assert conn.read_exactly(4096, timeout=5) == data[::-1][:4096]
        conn.close()
        server.close()

    def test_cancel_mid_stream(self, plain, echo):
        conn = Dialer(plain).dial(echo.addr)
        conn.write(os.urandom(4096))
        t0 = time.monotonic()
        conn.cancel()
        assert conn.join(1)
        assert time.monotonic() - t0 < 1
        assert conn.exit_code == 0

    def test_codec_error_returns_code(self, aead):
        # tampered frame after a good handshake: worker returns FAILED_IO, no trap
        with Listener(aead, InstanceConfig(PW)) as lst:
            t, box = accept_in_thread(lst)
            client = oracle_client(lst.addr, "hunter2")
            client.sendall(b"ok")
            t.join(5)
            conn = box["conn"]
            assert conn.read_exactly(2, timeout=5) == b"ok"
            client.send_raw(os.urandom(64))
            with pytest.raises(WaterError):
                while conn.read(timeout=5):
                    pass
            assert conn.join(5)
            assert conn.exit_code == ErrorCode.FAILED_IO
            assert conn.instance.phase != "trapped"
            client.close()


class TestCancelWith:
    def _dialed(self, image, addr):
        inst = GuestInstance(image, InstanceConfig().with_remote(addr))
        inst.init()
        end, fd = make_internal_channel(inst, 4096)
        assert inst.call("_water_dial", fd) >= 0
        return inst, end

    def test_valid(self, plain, echo):
        inst, _ = self._dialed(plain, echo.addr)
        assert inst.register_cancel() >= 3
        inst.close()

    def test_negative(self, plain, echo):
        inst, _ = self._dialed(plain, echo.addr)
        assert inst.call("_water_cancel_with", -1) == ErrorCode.INVALID_FD
        inst.close()

    def test_never_called_still_ends_on_eof(self, plain):
        srv, addr = tcp_server()
        inst, end = self._dialed(plain, addr)
        peer, _ = srv.accept()
        done = {}
        t = threading.Thread(target=lambda: done.setdefault("rc", inst.run_worker()), daemon=True)
        t.start()
        end.write_all(b"last")
        end.shutdown_write()
        assert _recv_exactly(peer, 10) == b"last"
        peer.close()
        t.join(5)
        assert done["rc"] == 0
        srv.close()


class TestLiveness:
    def test_one_byte_network_reads(self, aead):
        # the oracle trickles its wire bytes one at a time
        server = OracleServer("hunter2")
        box = {}

        def serve():
            stream = server.accept()
            box["got"] = stream.recv_exactly(3)
            wire = stream.session.seal(b"slow" * 300) + stream.session.seal(b"drip")
            for i in range(len(wire)):
                stream.send_raw(wire[i:i + 1])
                if i % 97 == 0:
                    time.sleep(0.001)
            stream.shutdown_write()

        t = threading.Thread(target=serve, daemon=True)
        t.start()
        conn = Dialer(aead, InstanceConfig(PW)).dial(server.addr)
        conn.write(b"go!")
        assert conn.read_exactly(1204, timeout=10) == b"slow" * 300 + b"drip"
        assert conn.read(timeout=5) == b""
        t.join(5)
        assert box["got"] == b"go!"
        conn.close()
        server.close()


class TestBoundedAccumulation:
    def test_cap_is_two_frames(self):
        assert _sdk_constant("SDK_ACC_CAP") <= 2 * _sdk_constant("SDK_MAX_FRAME")

    @pytest.mark.parametrize("seed", range(5))
    def test_adversarial_chunking_peak(self, seed):
        rng = random.Random(seed)
        password, salt = b"hunter2", rng.randbytes(32)
        sender = GuestFraming(password, salt)
        wire = b"".join(sender.seal(rng.randbytes(rng.choice([1, MAX_PAYLOAD, rng.randint(1, MAX_PAYLOAD)])))
                        for _ in range(12))
        opener = StreamOpener(GuestFraming(password, salt))
        max_frame = _sdk_constant("SDK_MAX_FRAME")
        off = 0
        while off < len(wire):
            n = rng.randint(1, max_frame)
            opener.feed(wire[off:off + n])
            off += n
        assert opener.peak <= 2 * max_frame
