"""Contextual embedding providers.

Three sources of per-token vectors stand in for a pre-trained encoder:

* ``trainable_hash``: token string -> crc32 bucket -> learnable row.
* ``file_backed``: precomputed matrices keyed by sentence id.
* ``http_service``: ``POST /embed`` to an external encoder.

Every provider returns one ``dim`` vector per position of the assembled
sequence ``prefix (+ [SEP]) + tokens``.
"""

from __future__ import annotations

import json
import time
import urllib.error
import urllib.request
import zlib
from pathlib import Path

import numpy as np

from .layers import Embedding

SEP_TOKEN = "[SEP]"
DEFAULT_BUCKETS = 50021


class ProviderError(RuntimeError):
    """Embedding lookup failed (missing fixture entry, bad dimension, service down)."""


def assemble(sentence, prefix_span=None, separator: bool = True) -> list[str]:
    if prefix_span is None:
        return list(sentence.tokens)
    s, e = prefix_span
    head = list(sentence.tokens[s:e + 1])
    return head + ([SEP_TOKEN] if separator else []) + list(sentence.tokens)


class TrainableHashProvider:
    kind = "trainable_hash"
    trainable = True

    def __init__(self, dim: int, buckets: int = DEFAULT_BUCKETS, rng=None):
        self.dim = dim
        self.buckets = buckets
        self.table = Embedding(buckets, dim, learnable=True, rng=rng)

    def bucket(self, token: str) -> int:
        return zlib.crc32(token.encode("utf-8")) % self.buckets

    def bucket_ids(self, tokens) -> np.ndarray:
        return np.array([self.bucket(t) for t in tokens], dtype=np.int64)

    def embed(self, sentence, prefix_span=None, separator: bool = True) -> np.ndarray:
        ids = self.bucket_ids(assemble(sentence, prefix_span, separator))
        return self.table.weights.data[ids].copy()


class FileBackedProvider:
    """Reads ``<stem>.idx`` (text) and ``<stem>.bin`` (little-endian f64).

    Index lines are ``sentence_id<TAB>rows<TAB>cols<TAB>byte_offset``.  Prefix
    rows reuse the stored trigger rows; the separator row is zero.
    """

    kind = "file_backed"
    trainable = False

    def __init__(self, path, dim: int | None = None):
        stem = Path(path)
        if stem.suffix in (".idx", ".bin"):
            stem = stem.with_suffix("")
        self.path = stem
        idx_path = stem.with_suffix(".idx")
        bin_path = stem.with_suffix(".bin")
        if not idx_path.exists() or not bin_path.exists():
            raise ProviderError(f"embedding fixture {stem}(.idx/.bin) not found")
        raw = bin_path.read_bytes()
        self._rows: dict[str, np.ndarray] = {}
        for lineno, line in enumerate(idx_path.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                sid, rows, cols, offset = line.split("\t")
                rows, cols, offset = int(rows), int(cols), int(offset)
            except ValueError:
                raise ProviderError(f"{idx_path}:{lineno}: malformed index line") from None
            if dim is None:
                dim = cols
            if cols != dim:
                raise ProviderError(f"{idx_path}:{lineno}: vectors of length {cols}, expected {dim}")
            if offset + 8 * rows * cols > len(raw):
                raise ProviderError(f"{idx_path}:{lineno}: matrix runs past end of {bin_path.name}")
            self._rows[sid] = np.frombuffer(raw, dtype="<f8", count=rows * cols, offset=offset).reshape(rows, cols).astype(np.float64)
        self.dim = dim if dim is not None else 0

    def __contains__(self, sentence_id: str) -> bool:
        return sentence_id in self._rows

    def embed(self, sentence, prefix_span=None, separator: bool = True) -> np.ndarray:
        mat = self._rows.get(sentence.id)
        if mat is None:
            raise ProviderError(f"no stored embeddings for sentence id {sentence.id!r}")
        if mat.shape[0] != len(sentence.tokens):
            raise ProviderError(f"sentence {sentence.id!r}: {mat.shape[0]} stored rows for {len(sentence.tokens)} tokens")
        if prefix_span is None:
            return mat.copy()
        s, e = prefix_span
        parts = [mat[s:e + 1]]
        if separator:
            parts.append(np.zeros((1, self.dim)))
        parts.append(mat)
        return np.concatenate(parts, axis=0)


def write_embedding_fixture(path, matrices: dict[str, np.ndarray]) -> None:
    stem = Path(path)
    if stem.suffix in (".idx", ".bin"):
        stem = stem.with_suffix("")
    lines = []
    offset = 0
    with stem.with_suffix(".bin").open("wb") as fh:
        for sid, mat in matrices.items():
            mat = np.ascontiguousarray(mat, dtype="<f8")
            fh.write(mat.tobytes())
            lines.append(f"{sid}\t{mat.shape[0]}\t{mat.shape[1]}\t{offset}")
            offset += mat.nbytes
    stem.with_suffix(".idx").write_text("".join(line + "\n" for line in lines), encoding="utf-8")


class HttpProvider:
    """Blocking client for ``POST /embed``.

    Request ``{"id", "tokens", "pair_prefix"?}``; response ``{"vectors": [[...], ...]}``.
    Single-sentence input with a trigger prefix is sent as one token list.
    """

    kind = "http_service"
    trainable = False

    def __init__(self, url: str, dim: int, timeout: float = 10.0, retries: int = 3, backoff: float = 0.5):
        self.url = url.rstrip("/")
        if not self.url.endswith("/embed"):
            self.url += "/embed"
        self.dim = dim
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self._cache: dict[tuple, np.ndarray] = {}

    def _post(self, payload: dict) -> dict:
        body = json.dumps(payload).encode("utf-8")
        errors = []
        for attempt in range(self.retries + 1):
            req = urllib.request.Request(self.url, data=body, headers={"Content-Type": "application/json"})
            try:
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    return json.loads(resp.read().decode("utf-8"))
            except (urllib.error.URLError, OSError, json.JSONDecodeError) as exc:
                errors.append(f"attempt {attempt + 1}: {exc}")
                if attempt < self.retries:
                    time.sleep(self.backoff * 2 ** attempt)
        raise ProviderError(f"embedding service {self.url} failed after {self.retries + 1} attempts; " + "; ".join(errors))

    def embed(self, sentence, prefix_span=None, separator: bool = True) -> np.ndarray:
        key = (sentence.id, tuple(sentence.tokens), prefix_span, separator)
        if key in self._cache:
            return self._cache[key].copy()
        payload = {"id": sentence.id, "tokens": list(sentence.tokens)}
        if prefix_span is not None:
            s, e = prefix_span
            prefix = list(sentence.tokens[s:e + 1])
            if separator:
                payload["pair_prefix"] = prefix
            else:
                payload["tokens"] = prefix + payload["tokens"]
        expected = len(assemble(sentence, prefix_span, separator))
        reply = self._post(payload)
        try:
            vecs = np.asarray(reply["vectors"], dtype=np.float64)
        except (KeyError, TypeError, ValueError):
            raise ProviderError(f"embedding service returned no usable 'vectors' for {sentence.id!r}") from None
        if vecs.shape != (expected, self.dim):
            raise ProviderError(f"embedding service returned shape {vecs.shape} for {sentence.id!r}, expected {(expected, self.dim)}")
        self._cache[key] = vecs
        return vecs.copy()


def make_provider(kind: str, dim: int, *, buckets: int = DEFAULT_BUCKETS, path=None, url=None,
                  timeout: float = 10.0, retries: int = 3, rng=None):
    if kind == "trainable_hash":
        return TrainableHashProvider(dim, buckets, rng)
    if kind == "file_backed":
        if not path:
            raise ProviderError("file_backed provider needs an embedding path")
        return FileBackedProvider(path, dim)
    if kind == "http_service":
        if not url:
            raise ProviderError("http_service provider needs a URL")
        return HttpProvider(url, dim, timeout=timeout, retries=retries)
    raise ValueError(f"unknown embedding provider {kind!r}")
