"""Local translation server: (id, digest) -> compressed batch over TCP.

Dictionary files
  hashes file      one ``<id> <digest-hex>`` line per batch
  compressed file  concatenated ``CompressedBatch`` containers
                   (8-byte id, 4-byte length, codec bytes)

Wire protocol, one request at a time on a persistent connection:
  request   8-byte big-endian id + 32-byte digest
  response  status byte (0 found, 1 not found) + 4-byte length + payload
"""

from __future__ import annotations

import socket
import socketserver
import struct
import threading
from pathlib import Path
from typing import Iterable

from ..crypto.compression import CompressedBatch

REQUEST = struct.Struct(">Q32s")
RESPONSE = struct.Struct(">BI")
FOUND, NOT_FOUND = 0, 1


class DictionaryError(ValueError):
    pass


def write_dictionary(
    hashes_path: str | Path, compressed_path: str | Path, entries: Iterable[tuple[int, bytes, bytes]]
) -> None:
    """Write ``(id, digest, compressed)`` entries as the two dictionary files."""
    with open(hashes_path, "w") as hf, open(compressed_path, "wb") as cf:
        for bid, digest, blob in entries:
            hf.write(f"{bid} {digest.hex()}\n")
            cf.write(CompressedBatch(bid, blob).encode())


def load_dictionary(hashes_path: str | Path, compressed_path: str | Path) -> dict[tuple[int, bytes], bytes]:
    digests: dict[int, bytes] = {}
    for ln, line in enumerate(Path(hashes_path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            sid, hexd = line.split()
            digests[int(sid)] = bytes.fromhex(hexd)
        except ValueError:
            raise DictionaryError(f"{hashes_path}:{ln}: expected '<id> <digest-hex>'") from None
    buf = Path(compressed_path).read_bytes()
    out: dict[tuple[int, bytes], bytes] = {}
    pos = 0
    while pos < len(buf):
        cb, pos = CompressedBatch.decode_from(buf, pos)
        if cb.id not in digests:
            raise DictionaryError(f"compressed batch {cb.id} has no hash entry")
        out[(cb.id, digests[cb.id])] = cb.payload
    return out


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    chunks, got = [], 0
    while got < n:
        part = sock.recv(n - got)
        if not part:
            return None
        chunks.append(part)
        got += len(part)
    return b"".join(chunks)


class _Handler(socketserver.BaseRequestHandler):
    def handle(self) -> None:
        table = self.server.table  # type: ignore[attr-defined]
        sock: socket.socket = self.request
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        while True:
            req = _recv_exact(sock, REQUEST.size)
            if req is None:
                return
            blob = table.get(REQUEST.unpack(req))
            if blob is None:
                sock.sendall(RESPONSE.pack(NOT_FOUND, 0))
            else:
                sock.sendall(RESPONSE.pack(FOUND, len(blob)) + blob)


class TranslateServer(socketserver.TCPServer):
    """Single-threaded loop on 127.0.0.1; port 0 picks a free port."""

    allow_reuse_address = True

    def __init__(self, table: dict[tuple[int, bytes], bytes], port: int = 0):
        self.table = table
        super().__init__(("127.0.0.1", port), _Handler)
        self._thread: threading.Thread | None = None

    @classmethod
    def from_files(cls, hashes_path, compressed_path, port: int = 0) -> "TranslateServer":
        return cls(load_dictionary(hashes_path, compressed_path), port)

    @property
    def address(self) -> tuple[str, int]:
        return self.server_address[:2]

    def start(self) -> "TranslateServer":
        self._thread = threading.Thread(target=self.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self.shutdown()
        self.server_close()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self) -> "TranslateServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


class TranslateClient:
    def __init__(self, address: tuple[str, int]):
        self.sock = socket.create_connection(address)
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)

    def translate(self, bid: int, digest: bytes) -> bytes | None:
        """Compressed batch for the tag, or None when the server does not know it."""
        self.sock.sendall(REQUEST.pack(bid, digest))
        head = _recv_exact(self.sock, RESPONSE.size)
        if head is None:
            raise ConnectionError("translation server closed the connection")
        status, ln = RESPONSE.unpack(head)
        body = _recv_exact(self.sock, ln) if ln else b""
        if body is None:
            raise ConnectionError("truncated translation response")
        return body if status == FOUND else None

    def close(self) -> None:
        self.sock.close()

    def __enter__(self) -> "TranslateClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
