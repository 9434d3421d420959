import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arranger.crypto import compression as C

CODECS = ["zlib", "lzma"] + (["brotli"] if C.brotli_available() else [])


@pytest.mark.parametrize("name", CODECS)
@settings(max_examples=40)
@given(data=st.binary(max_size=4096))
def test_roundtrip(name, data):
    codec = C.get_codec(name)
    assert codec.decompress(codec.compress(data)) == data


@pytest.mark.parametrize("name", CODECS)
def test_corrupt_stream_rejected(name):
    codec = C.get_codec(name)
    blob = codec.compress(b"hello world" * 100)
    with pytest.raises(C.CorruptStream):
        codec.decompress(b"\xff\xfe" + blob[5:])


def test_redundant_input_shrinks():
    data = b"0123456789abcdef" * 1000
    assert len(C.compress(data)) < len(data) // 10


def test_unknown_codec():
    with pytest.raises(ValueError):
        C.get_codec("zstd")


@pytest.mark.skipif(C._brotli_mod is None or C._load_libbrotli() is None, reason="needs both brotli backends")
@settings(max_examples=30)
@given(st.binary(max_size=2048))
def test_brotli_backends_interoperate(data):
    lib = C._load_libbrotli()
    assert lib.decompress(C._brotli_mod.compress(data, quality=5)) == data
    assert C._brotli_mod.decompress(lib.compress(data, 5)) == data


@given(st.lists(st.tuples(st.integers(0, 2**64 - 1), st.binary(max_size=64)), max_size=8))
def test_container_stream_roundtrip(items):
    buf = b"".join(C.CompressedBatch(i, p).encode() for i, p in items)
    out, pos = [], 0
    while pos < len(buf):
        cb, pos = C.CompressedBatch.decode_from(buf, pos)
        out.append((cb.id, cb.payload))
    assert out == items


def test_container_truncation():
    enc = C.CompressedBatch(7, b"abcdef").encode()
    with pytest.raises(C.CorruptStream):
        C.CompressedBatch.decode_from(enc[:5])
    with pytest.raises(C.CorruptStream):
        C.CompressedBatch.decode_from(enc[:-1])
