"""Embedding transplantation: a warm-start matrix for a new vocabulary.

Each target token's row is the arithmetic mean of the source-model embedding
rows for the greedy tokenization of its English rendering. Special tokens are
copied by role (pad to pad, sentinel k to sentinel k) because the downstream
model addresses them by role, not by surface string.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import WarmstartError
from .translate import TranslationOutcome, TranslationTable, needs_translation, normalize_token
from .vocab import Vocabulary, tokenize_greedy

EMBEDDING_MAGIC = b"EMBT"
EMBEDDING_VERSION = 1


class TransplantError(WarmstartError):
    pass


class EmbeddingFormatError(TransplantError):
    pass


class EmbeddingMatrix:
    """Dense float32 matrix, one row per token id. Always C-contiguous."""

    def __init__(self, data: np.ndarray):
        arr = np.ascontiguousarray(data, dtype=np.float32)
        if arr.ndim != 2:
            raise TransplantError(f"embedding matrix must be 2-D, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise TransplantError("embedding matrix contains NaN or Inf")
        self.data = arr

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingMatrix):
            return NotImplemented
        return self.data.shape == other.data.shape and bool(
            (self.data == other.data).all()
        )

    def __repr__(self) -> str:
        return f"EmbeddingMatrix(rows={self.rows}, dim={self.dim})"


def write_embeddings(matrix: EmbeddingMatrix, path) -> None:
    """Binary layout: "EMBT", u32 version, u32 rows, u32 dim, then rows*dim
    float32 values, row-major. All fields little-endian."""
    header = EMBEDDING_MAGIC + struct.pack(
        "<III", EMBEDDING_VERSION, matrix.rows, matrix.dim
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(matrix.data.astype("<f4", copy=False).tobytes(order="C"))


def read_embeddings(path) -> EmbeddingMatrix:
    with open(path, "rb") as f:
        header = f.read(16)
        if len(header) < 16 or header[:4] != EMBEDDING_MAGIC:
            raise EmbeddingFormatError(f"{path}: not an embedding file (bad magic)")
        version, rows, dim = struct.unpack("<III", header[4:16])
        if version != EMBEDDING_VERSION:
            raise EmbeddingFormatError(f"{path}: unsupported version {version}")
        payload = f.read()
    expected = rows * dim * 4
    if len(payload) != expected:
        raise EmbeddingFormatError(
            f"{path}: payload is {len(payload)} bytes, expected {expected}"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(rows, dim)
    return EmbeddingMatrix(data.copy())


@dataclass
class TransplantReport:
    """Tallies of which path produced each target row.

    translated + failed + bypassed + specials_copied == total. ``bypassed``
    counts FAILED entries whose token never needed a provider (digits,
    punctuation); ``failed`` counts genuine translation failures.
    ``mean_pieces_per_token`` is exact, over non-special tokens only, None
    when the target has no such tokens. ``unk_only_count`` tallies rows that
    collapsed to the unknown-token embedding.
    """

    total_tokens: int
    translated_count: int
    failed_count: int
    bypassed_count: int
    specials_copied: int
    mean_pieces_per_token: Optional[Fraction]
    unk_only_count: int

    def as_dict(self) -> dict:
        mean = self.mean_pieces_per_token
        return {
            "total_tokens": self.total_tokens,
            "translated_count": self.translated_count,
            "failed_count": self.failed_count,
            "bypassed_count": self.bypassed_count,
            "specials_copied": self.specials_copied,
            "mean_pieces_per_token": None if mean is None else str(mean),
            "mean_pieces_per_token_float": None if mean is None else float(mean),
            "unk_only_count": self.unk_only_count,
        }


def map_token(token: str, outcome: TranslationOutcome, src: Vocabulary) -> list[int]:
    """Source piece ids whose embeddings average into the target row.

    The outcome text (translation, or the token itself on failure) is greedy
    tokenized against the source vocabulary. An empty or all-unknown result
    collapses to [unk_id] so the row inherits the unknown embedding instead
    of a zero vector, which would poison tied output logits.
    """
    pieces = tokenize_greedy(src, outcome.text)
    if not pieces or all(p == src.unk_id for p in pieces):
        return [src.unk_id]
    return pieces


def transplant(
    src_emb: EmbeddingMatrix,
    src: Vocabulary,
    tgt: Vocabulary,
    table: TranslationTable,
) -> tuple[EmbeddingMatrix, TransplantReport]:
    """Build the target embedding matrix and its per-path report.

    Single-piece mappings copy the source row bit for bit. Multi-piece rows
    are the mean computed in float64 and cast once to float32, which keeps
    every coordinate inside the bounding box of the contributing rows.
    Requires a table entry for every non-special target token.
    """
    if src_emb.rows != src.size:
        raise TransplantError(
            f"embedding matrix has {src_emb.rows} rows but source vocabulary "
            f"has {src.size} tokens"
        )
    if tgt.sentinel_count > src.sentinel_count:
        raise TransplantError(
            f"target needs {tgt.sentinel_count} sentinels but source has "
            f"only {src.sentinel_count}"
        )
    out = np.empty((tgt.size, src_emb.dim), dtype=np.float32)
    src_data = src_emb.data

    role_copy = {tgt.pad_id: src.pad_id, tgt.eos_id: src.eos_id, tgt.unk_id: src.unk_id}
    for k in range(tgt.sentinel_count):
        role_copy[tgt.sentinel_id(k)] = src.sentinel_id(k)

    translated = failed = bypassed = unk_only = 0
    pieces_total = 0
    regular_total = 0
    marker = tgt.boundary_marker
    for t in range(tgt.size):
        src_role = role_copy.get(t)
        if src_role is not None:
            out[t] = src_data[src_role]
            continue
        token = tgt.tokens[t]
        normalized = normalize_token(token, marker)
        outcome = table.get(normalized)
        if outcome is None:
            raise TransplantError(
                f"no translation entry for token {token!r} (id {t}); "
                f"run translation to completion first"
            )
        if outcome.ok:
            translated += 1
        elif needs_translation(normalized, marker):
            failed += 1
        else:
            bypassed += 1
        pieces = map_token(token, outcome, src)
        if pieces == [src.unk_id]:
            unk_only += 1
        if len(pieces) == 1:
            out[t] = src_data[pieces[0]]
        else:
            # Sequential float64 accumulation, one rounding at the end: the
            # result is reproducible exactly and stays inside the coordinate
            # bounding box of the contributing rows.
            acc = np.zeros(src_emb.dim, dtype=np.float64)
            for p in pieces:
                acc += src_data[p]
            out[t] = (acc / len(pieces)).astype(np.float32)
        pieces_total += len(pieces)
        regular_total += 1

    report = TransplantReport(
        total_tokens=tgt.size,
        translated_count=translated,
        failed_count=failed,
        bypassed_count=bypassed,
        specials_copied=len(role_copy),
        mean_pieces_per_token=(
            Fraction(pieces_total, regular_total) if regular_total else None
        ),
        unk_only_count=unk_only,
    )
    return EmbeddingMatrix(out), report
