import struct
import zlib

import numpy as np
import pytest

from sketchmatch.errors import IntegrityError, StructuralError, TransferError
from sketchmatch.model_io import (FreezePlan, apply_transfer, decode_weights, encode_weights, load_weights,
                                  save_weights, tensor_checksums)
from sketchmatch.networks import TINY_CHANNELS, Generator
from sketchmatch.params import NetworkParams
from sketchmatch.tensor import Tensor


def _params(**arrays):
    return NetworkParams({k: Tensor(np.asarray(v), requires_grad=True) for k, v in arrays.items()})


class TestArchive:
    def test_single_tensor_layout(self):
        buf = encode_weights(_params(w=np.arange(4.0).reshape(2, 2)))
        # magic 4 + version 2 + count 4 + name len 2 + name 1 + dtype 1 + rank 1 + dims 8 + payload 32 + crc 4
        assert len(buf) == 58 + 1
        assert buf[:4] == b"FSRW"
        assert struct.unpack("<HI", buf[4:10]) == (1, 1)
        assert struct.unpack("<I", buf[-4:])[0] == zlib.crc32(buf[:-4])
        np.testing.assert_array_equal(np.frombuffer(buf[23:55], "<f8"), [0, 1, 2, 3])

    def test_round_trip_byte_identical(self, tmp_path):
        g = Generator.create(TINY_CHANNELS, seed=3)
        save_weights(g.params, tmp_path / "a.fsrw")
        loaded = load_weights(tmp_path / "a.fsrw")
        save_weights(loaded, tmp_path / "b.fsrw")
        assert (tmp_path / "a.fsrw").read_bytes() == (tmp_path / "b.fsrw").read_bytes()
        assert loaded.names() == g.params.names()
        assert tensor_checksums(loaded) == tensor_checksums(g.params)

    def test_float32_kept(self):
        p = decode_weights(encode_weights(_params(w=np.ones(3, np.float32))))
        assert p["w"].dtype == np.float32

    def test_every_flipped_byte_rejected(self):
        buf = bytearray(encode_weights(_params(a=np.ones((2, 3)), b=np.zeros(1, np.float32))))
        for i in range(len(buf)):
            bad = bytearray(buf)
            bad[i] ^= 0x40
            with pytest.raises(IntegrityError):
                decode_weights(bytes(bad))

    def test_truncated(self):
        buf = encode_weights(_params(a=np.ones(5)))
        for n in (0, 3, 12, len(buf) - 1):
            with pytest.raises(IntegrityError):
                decode_weights(buf[:n])

    def _resealed(self, body):
        return body + struct.pack("<I", zlib.crc32(body))

    def test_unknown_version(self):
        body = encode_weights(_params(a=np.ones(1)))[:-4]
        body = body[:4] + struct.pack("<H", 2) + body[6:]
        with pytest.raises(IntegrityError, match="version"):
            decode_weights(self._resealed(body))

    def test_duplicate_names_in_archive(self):
        one = encode_weights(_params(a=np.ones(1)))[:-4]
        record = one[10:]
        body = b"FSRW" + struct.pack("<HI", 1, 2) + record + record
        with pytest.raises(IntegrityError, match="duplicate"):
            decode_weights(self._resealed(body))

    def test_narrowing_opt_in(self):
        buf = encode_weights(_params(a=np.full(2, 0.1)))
        with pytest.raises(StructuralError, match="allow_narrowing"):
            decode_weights(buf, dtype=np.float32)
        assert decode_weights(buf, dtype=np.float32, allow_narrowing=True)["a"].dtype == np.float32
        # widening needs no flag
        assert decode_weights(encode_weights(_params(a=np.ones(1, np.float32))), dtype=np.float64)["a"].dtype == np.float64

    def test_unsupported_dtype(self):
        with pytest.raises(StructuralError):
            p = _params(a=np.ones(2))
            p["a"].data = np.ones(2, np.int32)
            encode_weights(p)


class TestFreezePlan:
    def test_last_match_wins(self):
        plan = FreezePlan([("gen.", False), ("gen.dec", True), ("gen.dec1", False)])
        assert not plan.trainable("gen.enc0.w")
        assert plan.trainable("gen.dec0.w")
        assert not plan.trainable("gen.dec1.b")
        assert plan.trainable("disc.head.w")


class TestTransfer:
    def test_copy_skip_freeze(self):
        src = _params(**{"gen.enc0.w": np.full((2, 2), 3.0), "gen.extra": np.ones(1)})
        dst = _params(**{"gen.enc0.w": np.zeros((2, 2)), "disc.head.w": np.zeros(3)})
        fresh = dst["disc.head.w"].data.copy()
        report = apply_transfer(dst, src, FreezePlan.freezing(["gen.enc"]))
        assert report.copied == ["gen.enc0.w"] and report.skipped == ["disc.head.w"]
        assert report.frozen == ["gen.enc0.w"] and report.unused_source == ["gen.extra"]
        np.testing.assert_array_equal(dst["gen.enc0.w"].data, 3.0)
        np.testing.assert_array_equal(dst["disc.head.w"].data, fresh)
        # target owns its copy
        src["gen.enc0.w"].data[0, 0] = -1.0
        assert dst["gen.enc0.w"].data[0, 0] == 3.0

    def test_shape_mismatch(self):
        with pytest.raises(StructuralError, match="a"):
            apply_transfer(_params(a=np.zeros(3)), _params(a=np.zeros(4)))

    def test_nothing_in_common(self):
        with pytest.raises(TransferError):
            apply_transfer(_params(a=np.zeros(3)), _params(b=np.zeros(3)))

    def test_from_archive_path(self, tmp_path):
        save_weights(_params(a=np.full(2, 5.0)), tmp_path / "s.fsrw")
        dst = _params(a=np.zeros(2))
        apply_transfer(dst, tmp_path / "s.fsrw")
        np.testing.assert_array_equal(dst["a"].data, 5.0)

    def test_narrowing_copy_needs_flag(self):
        dst = _params(a=np.zeros(2, np.float32))
        with pytest.raises(StructuralError):
            apply_transfer(dst, _params(a=np.ones(2)))
        apply_transfer(dst, _params(a=np.ones(2)), allow_narrowing=True)
        assert dst["a"].dtype == np.float32
