"""Word-embedding models: word2vec file loading and exact cosine similarity queries.

Models are immutable after loading and safe to share across worker threads.
All similarity math runs on float64 unit vectors computed once at load, so
cosine(a, b) == cosine(b, a) bit-for-bit and rankings are reproducible.
Nearest-neighbor search is an exhaustive scan by contract; large models are
meant to be loaded through ``vocab_filter``.
"""

from __future__ import annotations

import mmap
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError

# Vectors shorter than this are unusable for cosine similarity.
MIN_USABLE_NORM = 1e-12


@dataclass(frozen=True)
class NeighborResult:
    """One ranked neighbor of a query token."""

    query: str
    neighbor: str
    similarity: float


class EmbeddingModel:
    """Vocabulary plus vector matrix loaded from a word2vec file.

    Attributes:
        name: model identifier (defaults to the file stem).
        dim: vector dimensionality.
        vocab: tokens in file order.
        vectors: vocab_size x dim float32 matrix, exactly as stored on disk.
        norms: per-token Euclidean norms (float64).
    """

    def __init__(self, name: str, vocab: list[str], vectors: np.ndarray):
        if vectors.ndim != 2 or vectors.shape[0] != len(vocab):
            raise InputError("vector matrix shape does not match vocabulary")
        if len(vocab) < 1:
            raise InputError("empty vocabulary")
        if vectors.shape[1] < 1:
            raise InputError("vector dimension must be positive")
        if not np.isfinite(vectors).all():
            bad = int(np.argwhere(~np.isfinite(vectors).all(axis=1))[0][0])
            raise InputError(f"non-finite value in vector for token {vocab[bad]!r}")
        if len(set(vocab)) != len(vocab):
            raise InputError("duplicate tokens in vocabulary")

        self.name = name
        self.vocab = list(vocab)
        self.vectors = np.ascontiguousarray(vectors, dtype=np.float32)
        self.dim = int(vectors.shape[1])
        # header-declared token count of the source file, when one was parsed
        # (differs from len(vocab) under vocab_filter or duplicate dropping)
        self.declared_vocab_size: int | None = None

        v64 = self.vectors.astype(np.float64)
        self.norms = np.sqrt(np.einsum("ij,ij->i", v64, v64))
        self._usable = self.norms >= MIN_USABLE_NORM
        self._units = np.zeros_like(v64)
        np.divide(v64, self.norms[:, None], out=self._units, where=self._usable[:, None])

        self._index = {tok: i for i, tok in enumerate(self.vocab)}
        self._fold_index: dict[str, list[int]] = {}
        for i, tok in enumerate(self.vocab):
            self._fold_index.setdefault(tok.lower(), []).append(i)

    def __len__(self) -> int:
        return len(self.vocab)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def usable(self, token: str) -> bool:
        idx = self._index.get(token)
        return idx is not None and bool(self._usable[idx])

    def lookup(self, token: str, fold_case: bool = True) -> int:
        """Index of ``token``; exact match first, then case variants in file order."""
        idx = self._index.get(token)
        if idx is not None:
            return idx
        if fold_case:
            for i in self._fold_index.get(token.lower(), ()):
                return i
        raise InputError(f"token {token!r} not in vocabulary of model {self.name!r}")

    def vector(self, token: str, fold_case: bool = True) -> np.ndarray:
        """Stored float32 vector for ``token`` (a copy)."""
        return self.vectors[self.lookup(token, fold_case)].copy()

    @property
    def units(self) -> np.ndarray:
        """Float64 unit-vector matrix (read-only view); unusable rows are zero."""
        view = self._units.view()
        view.flags.writeable = False
        return view

    def cosine(self, w1: str, w2: str, fold_case: bool = True) -> float:
        """Exact cosine of the two stored vectors."""
        i = self.lookup(w1, fold_case)
        j = self.lookup(w2, fold_case)
        for tok, idx in ((w1, i), (w2, j)):
            if not self._usable[idx]:
                raise InputError(f"token {tok!r} has near-zero norm and is unusable")
        return float(np.dot(self._units[i], self._units[j]))

    def top_k(self, query: str, k: int, fold_case: bool = True) -> list[NeighborResult]:
        """The ``k`` nearest tokens to ``query`` by cosine, exhaustively scanned.

        Sorted by similarity descending, ties broken by token ascending.  The
        query itself is excluded; with ``fold_case`` its case variants are
        excluded too and the result is deduplicated by lowercase key, keeping
        the maximum-similarity variant.
        """
        if k < 0:
            raise InputError("k must be non-negative")
        qi = self.lookup(query, fold_case)
        if not self._usable[qi]:
            raise InputError(f"token {query!r} has near-zero norm and is unusable")
        if k == 0:
            return []

        sims = self._units @ self._units[qi]
        eligible = self._usable.copy()
        if fold_case:
            for i in self._fold_index.get(self.vocab[qi].lower(), ()):
                eligible[i] = False
        else:
            eligible[qi] = False
        sims[~eligible] = -np.inf
        n_eligible = int(eligible.sum())
        if n_eligible == 0:
            return []

        if not fold_case:
            ranked = self._select(sims, min(k, n_eligible))
            return [
                NeighborResult(query, self.vocab[i], float(np.dot(self._units[i], self._units[qi])))
                for i in ranked[:k]
            ]

        # Folded retrieval: widen the raw cut until k distinct lowercase keys
        # are covered.  Unexamined tokens rank strictly below the cut, so the
        # prefix is final once k keys are seen.
        m = min(max(4 * k, 64), n_eligible)
        while True:
            ranked = self._select(sims, m)
            out: list[NeighborResult] = []
            seen: set[str] = set()
            for i in ranked:
                key = self.vocab[i].lower()
                if key in seen:
                    continue
                seen.add(key)
                out.append(
                    NeighborResult(query, self.vocab[i], float(np.dot(self._units[i], self._units[qi])))
                )
                if len(out) == k:
                    return out
            if m >= n_eligible:
                return out
            m = min(m * 2, n_eligible)

    def _select(self, sims: np.ndarray, m: int) -> list[int]:
        """Indices of the top ``m`` finite sims sorted by (sim desc, token asc)."""
        finite = np.flatnonzero(sims > -np.inf)
        if m >= finite.size:
            cand = finite
        else:
            part = finite[np.argpartition(-sims[finite], m - 1)[:m]]
            thresh = sims[part].min()
            cand = finite[sims[finite] >= thresh]
        order = sorted(cand.tolist(), key=lambda i: (-sims[i], self.vocab[i]))
        return order[:m]


def load_model(
    path: str | Path,
    format: str = "binary",
    vocab_filter: set[str] | None = None,
    name: str | None = None,
) -> EmbeddingModel:
    """Load a word2vec model file.

    ``format`` is "binary" (the classic packed format) or "text".  With
    ``vocab_filter``, only tokens whose exact or lowercased form appears in
    the filter are kept; file order is preserved either way.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"model file not found: {path}")
    if format not in ("binary", "text"):
        raise InputError(f"unknown model format {format!r}")
    folded_filter = {t.lower() for t in vocab_filter} if vocab_filter is not None else None

    def keep(token: str) -> bool:
        if vocab_filter is None:
            return True
        return token in vocab_filter or token.lower() in folded_filter

    if format == "binary":
        vocab, matrix, declared = _read_binary(path, keep)
    else:
        vocab, matrix, declared = _read_text(path, keep)

    if not vocab:
        raise InputError(f"empty vocabulary after filtering: {path}")

    # Duplicate tokens: keep the first occurrence, warn with a count.
    seen: set[str] = set()
    keep_rows: list[int] = []
    for i, tok in enumerate(vocab):
        if tok not in seen:
            seen.add(tok)
            keep_rows.append(i)
    dupes = len(vocab) - len(keep_rows)
    if dupes:
        warnings.warn(f"{path}: dropped {dupes} duplicate token(s), kept first occurrences")
        vocab = [vocab[i] for i in keep_rows]
        matrix = matrix[keep_rows]
    model = EmbeddingModel(name or path.stem, vocab, matrix)
    model.declared_vocab_size = declared
    return model


def _read_binary(path: Path, keep) -> tuple[list[str], np.ndarray, int]:
    with open(path, "rb") as fh:
        mm = mmap.mmap(fh.fileno(), 0, access=mmap.ACCESS_READ)
        try:
            nl = mm.find(b"\n")
            if nl < 0:
                raise InputError(f"malformed header (no newline): {path}")
            header = mm[:nl].split()
            if len(header) != 2:
                raise InputError(f"malformed header {mm[:nl]!r}: {path}")
            try:
                vocab_size, dim = int(header[0]), int(header[1])
            except ValueError:
                raise InputError(f"malformed header {mm[:nl]!r}: {path}") from None
            if vocab_size < 1 or dim < 1:
                raise InputError(f"malformed header (non-positive sizes): {path}")

            vocab: list[str] = []
            matrix = np.empty((vocab_size, dim), dtype=np.float32)
            stored = 0
            pos = nl + 1
            size = len(mm)
            payload = 4 * dim
            for _ in range(vocab_size):
                while pos < size and mm[pos] == 0x0A:
                    pos += 1
                sp = mm.find(b" ", pos)
                if sp < 0:
                    raise InputError(f"truncated token record at byte {pos}: {path}")
                token = mm[pos:sp].decode("utf-8", errors="replace")
                if not token:
                    raise InputError(f"empty token at byte {pos}: {path}")
                vec_start = sp + 1
                if vec_start + payload > size:
                    raise InputError(f"truncated vector payload for token {token!r}: {path}")
                if keep(token):
                    matrix[stored] = np.frombuffer(mm, dtype="<f4", count=dim, offset=vec_start)
                    vocab.append(token)
                    stored += 1
                pos = vec_start + payload
            return vocab, matrix[:stored], vocab_size
        finally:
            mm.close()


def _read_text(path: Path, keep) -> tuple[list[str], np.ndarray, int | None]:
    vocab: list[str] = []
    rows: list[np.ndarray] = []
    dim: int | None = None
    declared: int | None = None
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if not first:
            raise InputError(f"empty model file: {path}")
        parts = first.rstrip("\n").split(" ")
        header_like = len(parts) == 2 and all(p.isdigit() for p in parts)
        if header_like:
            declared = int(parts[0])
            dim = int(parts[1])
            if declared < 1 or dim < 1:
                raise InputError(f"malformed header {first!r}: {path}")
        else:
            _append_text_row(parts, path, vocab, rows, keep)
            dim = len(parts) - 1
        for line in fh:
            parts = line.rstrip("\n").split(" ")
            if parts == [""]:
                continue
            if dim is not None and len(parts) != dim + 1:
                raise InputError(f"truncated vector payload for token {parts[0]!r}: {path}")
            _append_text_row(parts, path, vocab, rows, keep)
    if not rows:
        return [], np.empty((0, dim or 0), dtype=np.float32), declared
    return vocab, np.vstack(rows), declared


def _append_text_row(parts: list[str], path: Path, vocab, rows, keep) -> None:
    if len(parts) < 2:
        raise InputError(f"malformed line (token without values): {path}")
    token = parts[0]
    if not token:
        raise InputError(f"empty token in text model: {path}")
    if not keep(token):
        return
    try:
        row = np.array([float(x) for x in parts[1:]], dtype=np.float32)
    except ValueError:
        raise InputError(f"malformed vector value for token {token!r}: {path}") from None
    if not np.isfinite(row).all():
        raise InputError(f"non-finite value in vector for token {token!r}: {path}")
    vocab.append(token)
    rows.append(row)
