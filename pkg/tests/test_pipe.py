import random
import threading
import time

import pytest

from water.abi import ErrorCode, WaterError
from water.bridge.pipe import PipeClosed, PipePair


class TestPipePair:
    def test_both_directions(self):
        p = PipePair()
        p.a.write(b"x")
        assert p.b.read(10) == b"x"
        p.b.write(b"y")
        assert p.a.read(10) == b"y"

    def test_close_gives_eof_on_peer(self):
        p = PipePair()
        p.a.write(b"tail")
        p.a.close()
        assert p.b.read(100) == b"tail"
        assert p.b.read(100) == b""

    def test_half_close_keeps_other_direction(self):
        p = PipePair()
        p.a.shutdown_write()
        assert p.b.read(10) == b""
        p.b.write(b"still")
        assert p.a.read(10) == b"still"

    def test_write_after_close_fails(self):
        p = PipePair()
        p.a.close()
        with pytest.raises(PipeClosed):
            p.a.write(b"x")
        with pytest.raises(BrokenPipeError):
            p.b.write(b"x")
        assert p.a.read(1) == b""

    def test_capacity_bounds_buffering(self):
        p = PipePair(capacity=8)
        assert p.a.write(b"0123456789") == 8
        assert p.a.write_nowait(b"z") is None
        with pytest.raises(TimeoutError):
            p.a.write(b"z", timeout=0.05)
        assert p.b.pending() == 8

    def test_capacity_must_be_positive(self):
        with pytest.raises(ValueError):
            PipePair(capacity=0)

    def test_fail_delivers_buffered_then_raises(self):
        p = PipePair()
        p.b.write(b"abc")
        p.a.fail(WaterError(ErrorCode.FAILED_IO, "boom"))
        assert p.a.read(10) == b"abc"
        with pytest.raises(WaterError):
            p.a.read(10)

    def test_blocked_writer_resumes_when_reader_drains(self):
        p = PipePair(capacity=4)
        data = bytes(range(256)) * 64
        got = bytearray()

        def reader():
            while True:
                chunk = p.b.read(3)
                if not chunk:
                    return
                got.extend(chunk)
                time.sleep(0)

        t = threading.Thread(target=reader)
        t.start()
        p.a.write_all(data)
        p.a.shutdown_write()
        t.join(10)
        assert bytes(got) == data

    def test_random_interleavings_preserve_order(self):
        rng = random.Random(1234)
        for trial in range(50):
            p = PipePair(capacity=rng.randint(1, 64))
            data = rng.randbytes(rng.randint(0, 5000))
            got = bytearray()

            def reader():
                while True:
                    chunk = p.b.read(rng.randint(1, 100))
                    if not chunk:
                        return
                    got.extend(chunk)

            t = threading.Thread(target=reader)
            t.start()
            off = 0
            while off < len(data):
                n = rng.randint(1, 200)
                p.a.write_all(data[off:off + n])
                off += n
            p.a.close()
            t.join(10)
            assert bytes(got) == data, trial

    def test_listener_fires_on_change(self):
        p = PipePair()
        hits = []
        p.add_listener(lambda: hits.append(1))
        p.a.write(b"x")
        p.b.read(1)
        p.a.close()
        assert len(hits) == 3
