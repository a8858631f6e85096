"""Content-addressed on-disk cache for completions and embedding vectors.

One file per key; the filename is the hex SHA-256 of the key string.
Completion entries hold the raw completion text (UTF-8).  Vector entries
hold a 16-byte header (8-byte magic, uint32 version, uint32 dim) followed
by little-endian float64 values.  Writes go through a temp file and an
atomic replace, so concurrent writers of the same key (always
value-identical by construction) cannot corrupt entries.
"""

from __future__ import annotations

import hashlib
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

_VECTOR_MAGIC = b"TOMUQVEC"
_VECTOR_VERSION = 1
_HEADER = struct.Struct("<8sII")


def completion_key(
    backend_id: str, fingerprint: str, sample_index: int, sampling_tag: str = ""
) -> str:
    return f"completion\x00{backend_id}\x00{fingerprint}\x00{sample_index}\x00{sampling_tag}"


def embedding_key(backend_id: str, fingerprint: str) -> str:
    return f"embedding\x00{backend_id}\x00{fingerprint}"


class ResponseCache:
    """Persistent cache; safe for concurrent readers and writers."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.hits = 0
        self.misses = 0

    def _path(self, key: str) -> Path:
        return self.directory / hashlib.sha256(key.encode("utf-8")).hexdigest()

    def _write_atomic(self, path: Path, payload: bytes) -> None:
        fd, tmp = tempfile.mkstemp(dir=self.directory, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(payload)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def get_text(self, key: str) -> str | None:
        path = self._path(key)
        if not path.exists():
            self.misses += 1
            return None
        self.hits += 1
        return path.read_bytes().decode("utf-8")

    def put_text(self, key: str, text: str) -> None:
        self._write_atomic(self._path(key), text.encode("utf-8"))

    def get_vector(self, key: str) -> np.ndarray | None:
        path = self._path(key)
        if not path.exists():
            self.misses += 1
            return None
        raw = path.read_bytes()
        magic, version, dim = _HEADER.unpack_from(raw, 0)
        if magic != _VECTOR_MAGIC or version != _VECTOR_VERSION:
            raise ValueError(f"unrecognized vector entry at {path}")
        values = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size, count=dim)
        self.hits += 1
        return values.copy()

    def put_vector(self, key: str, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=np.float64)
        header = _HEADER.pack(_VECTOR_MAGIC, _VECTOR_VERSION, values.size)
        self._write_atomic(self._path(key), header + values.astype("<f8").tobytes())

    def stats(self) -> dict[str, int]:
        return {"hits": self.hits, "misses": self.misses}
