"""Pluggable batch compression codecs and the compressed-batch container.

Brotli is the default. It is taken from the ``brotli`` module when
installed, otherwise from the system ``libbrotlienc``/``libbrotlidec`` via
ctypes. ``zlib`` and ``lzma`` are always available.
"""

from __future__ import annotations

import ctypes
import ctypes.util
import lzma
import struct
import zlib
from dataclasses import dataclass

try:
    import brotli as _brotli_mod
except ImportError:
    _brotli_mod = None


class CorruptStream(ValueError):
    pass


class Codec:
    name = "abstract"

    def compress(self, data: bytes) -> bytes:
        raise NotImplementedError

    def decompress(self, data: bytes) -> bytes:
        raise NotImplementedError


class ZlibCodec(Codec):
    name = "zlib"

    def __init__(self, level: int = 9):
        self.level = level

    def compress(self, data: bytes) -> bytes:
        return zlib.compress(data, self.level)

    def decompress(self, data: bytes) -> bytes:
        try:
            return zlib.decompress(data)
        except zlib.error as exc:
            raise CorruptStream(str(exc)) from None


class LzmaCodec(Codec):
    name = "lzma"

    def compress(self, data: bytes) -> bytes:
        return lzma.compress(data)

    def decompress(self, data: bytes) -> bytes:
        try:
            return lzma.decompress(data)
        except lzma.LZMAError as exc:
            raise CorruptStream(str(exc)) from None


class _LibBrotli:
    """Minimal ctypes binding to the one-shot libbrotli entry points."""

    BROTLI_DEFAULT_WINDOW = 22
    BROTLI_MODE_GENERIC = 0
    DECODER_RESULT_SUCCESS = 1

    def __init__(self) -> None:
        enc = ctypes.util.find_library("brotlienc") or "libbrotlienc.so.1"
        dec = ctypes.util.find_library("brotlidec") or "libbrotlidec.so.1"
        self.enc = ctypes.CDLL(enc)
        self.dec = ctypes.CDLL(dec)
        self.enc.BrotliEncoderMaxCompressedSize.restype = ctypes.c_size_t
        self.enc.BrotliEncoderMaxCompressedSize.argtypes = [ctypes.c_size_t]
        self.enc.BrotliEncoderCompress.restype = ctypes.c_int
        self.enc.BrotliEncoderCompress.argtypes = [
            ctypes.c_int,
            ctypes.c_int,
            ctypes.c_int,
            ctypes.c_size_t,
            ctypes.c_char_p,
            ctypes.POINTER(ctypes.c_size_t),
            ctypes.c_void_p,
        ]
        self.dec.BrotliDecoderDecompress.restype = ctypes.c_int
        self.dec.BrotliDecoderDecompress.argtypes = [
            ctypes.c_size_t,
            ctypes.c_char_p,
            ctypes.POINTER(ctypes.c_size_t),
            ctypes.c_void_p,
        ]

    def compress(self, data: bytes, quality: int) -> bytes:
        cap = self.enc.BrotliEncoderMaxCompressedSize(len(data)) or len(data) + 1024
        out = ctypes.create_string_buffer(cap)
        size = ctypes.c_size_t(cap)
        ok = self.enc.BrotliEncoderCompress(
            quality,
            self.BROTLI_DEFAULT_WINDOW,
            self.BROTLI_MODE_GENERIC,
            len(data),
            data,
            ctypes.byref(size),
            out,
        )
        if not ok:
            raise RuntimeError("BrotliEncoderCompress failed")
        return out.raw[: size.value]

    def decompress(self, data: bytes) -> bytes:
        cap = max(4 * len(data), 1 << 16)
        while True:
            out = ctypes.create_string_buffer(cap)
            size = ctypes.c_size_t(cap)
            rc = self.dec.BrotliDecoderDecompress(len(data), data, ctypes.byref(size), out)
            if rc == self.DECODER_RESULT_SUCCESS:
                return out.raw[: size.value]
            # rc 3 is NEEDS_MORE_OUTPUT; anything else means a bad stream
            if rc != 3 or cap > (1 << 31):
                raise CorruptStream(f"brotli decoder result {rc}")
            cap *= 4


_libbrotli: _LibBrotli | None = None


def _load_libbrotli() -> _LibBrotli | None:
    global _libbrotli
    if _libbrotli is None:
        try:
            _libbrotli = _LibBrotli()
        except OSError:
            return None
    return _libbrotli


class BrotliCodec(Codec):
    name = "brotli"

    def __init__(self, quality: int = 5):
        self.quality = quality
        self._lib = None if _brotli_mod is not None else _load_libbrotli()
        if _brotli_mod is None and self._lib is None:
            raise RuntimeError("no brotli implementation available")

    @property
    def backend(self) -> str:
        return "module" if _brotli_mod is not None else "libbrotli"

    def compress(self, data: bytes) -> bytes:
        if _brotli_mod is not None:
            return _brotli_mod.compress(data, quality=self.quality)
        return self._lib.compress(data, self.quality)

    def decompress(self, data: bytes) -> bytes:
        if _brotli_mod is not None:
            try:
                return _brotli_mod.decompress(data)
            except _brotli_mod.error as exc:
                raise CorruptStream(str(exc)) from None
        return self._lib.decompress(data)


def brotli_available() -> bool:
    return _brotli_mod is not None or _load_libbrotli() is not None


def get_codec(name: str = "brotli", **kwargs) -> Codec:
    if name == "brotli":
        return BrotliCodec(**kwargs)
    if name == "zlib":
        return ZlibCodec(**kwargs)
    if name == "lzma":
        return LzmaCodec()
    raise ValueError(f"unknown codec {name!r}")


def default_codec() -> Codec:
    return BrotliCodec() if brotli_available() else ZlibCodec()


def compress(data: bytes, codec: Codec | None = None) -> bytes:
    return (codec or default_codec()).compress(data)


def decompress(data: bytes, codec: Codec | None = None) -> bytes:
    return (codec or default_codec()).decompress(data)


_HEADER = struct.Struct(">QI")


@dataclass(frozen=True)
class CompressedBatch:
    id: int
    payload: bytes

    def encode(self) -> bytes:
        """Container: 8-byte big-endian id, 4-byte payload length, codec bytes."""
        return _HEADER.pack(self.id, len(self.payload)) + self.payload

    @classmethod
    def decode_from(cls, buf: bytes, pos: int = 0) -> tuple["CompressedBatch", int]:
        if pos + _HEADER.size > len(buf):
            raise CorruptStream("truncated container header")
        bid, ln = _HEADER.unpack_from(buf, pos)
        start = pos + _HEADER.size
        if start + ln > len(buf):
            raise CorruptStream("truncated container payload")
        return cls(bid, bytes(buf[start : start + ln])), start + ln
