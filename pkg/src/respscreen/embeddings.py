"""Externally computed 128-d frame embeddings: loading, pooling, combination.

The network that produces the embeddings lives outside this package; we
consume a CSV of per-frame vectors (columns sample_id, frame_index,
e0..e127, one row per 0.96 s sub-sample of the 16 kHz clip) and pool them
into a 256-d vector (per-dimension mean, then per-dimension std).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, MalformedEmbeddingFile
from .features import HandcraftedVector

EMBED_DIM = 128
POOLED_DIM = 2 * EMBED_DIM

# Combined-variant lengths (256 embedding dims plus handcrafted blocks)
VARIANT_LENGTHS = {"A": 260, "B": 447, "C": 733}

_EXPECTED_COLUMNS = ["sample_id", "frame_index"] + [f"e{i}" for i in range(EMBED_DIM)]


@dataclass(frozen=True)
class EmbeddingFrames:
    """Per-sub-sample embedding rows for one recording, [n_sub x 128]."""

    sample_id: str
    frames: np.ndarray


@dataclass(frozen=True)
class PooledEmbedding:
    """256 values: per-dimension mean (0..127) then population std (128..255)."""

    values: np.ndarray

    def __post_init__(self):
        if len(self.values) != POOLED_DIM:
            raise ValueError(f"expected {POOLED_DIM} values")


@dataclass(frozen=True)
class CombinedVector:
    """Embedding + handcrafted concatenation, one of variants A/B/C."""

    variant: str
    values: np.ndarray
    names: tuple[str, ...]


def pooled_names() -> list[str]:
    return [f"vgg.e{i:03d}_mean" for i in range(EMBED_DIM)] + [
        f"vgg.e{i:03d}_std" for i in range(EMBED_DIM)
    ]


def load_embeddings(path) -> dict[str, EmbeddingFrames]:
    """Load and group frame embeddings by sample, ordered by frame_index."""
    rows: dict[str, list[tuple[int, np.ndarray]]] = {}
    try:
        with open(Path(path), newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise MalformedEmbeddingFile("empty file")
            if header != _EXPECTED_COLUMNS:
                if len(header) != len(_EXPECTED_COLUMNS):
                    raise DimensionMismatch(
                        f"expected {len(_EXPECTED_COLUMNS)} columns, got {len(header)}"
                    )
                raise MalformedEmbeddingFile(f"unexpected header {header[:4]}...")
            for line_no, row in enumerate(reader, start=2):
                if len(row) != len(_EXPECTED_COLUMNS):
                    raise DimensionMismatch(f"row {line_no} has {len(row)} fields")
                try:
                    idx = int(row[1])
                    vec = np.array([float(v) for v in row[2:]])
                except ValueError as exc:
                    raise MalformedEmbeddingFile(f"row {line_no}: {exc}") from exc
                if not np.all(np.isfinite(vec)):
                    raise MalformedEmbeddingFile(f"row {line_no}: non-finite value")
                rows.setdefault(row[0], []).append((idx, vec))
    except OSError as exc:
        raise MalformedEmbeddingFile(str(exc)) from exc

    out = {}
    for sample_id, entries in rows.items():
        entries.sort(key=lambda e: e[0])
        out[sample_id] = EmbeddingFrames(sample_id, np.stack([v for _, v in entries]))
    return out


def pool(frames: EmbeddingFrames) -> PooledEmbedding:
    """Per-dimension mean then per-dimension population std."""
    mean = frames.frames.mean(axis=0)
    std = frames.frames.std(axis=0)  # population (N)
    return PooledEmbedding(np.concatenate([mean, std]))


def combine(hand: HandcraftedVector, emb: PooledEmbedding, variant: str) -> CombinedVector:
    """Concatenate pooled embedding with a handcrafted block.

    A: the four segment-level features only (260 dims).
    B: everything except the delta/delta2 MFCC blocks (447 dims).
    C: the full handcrafted vector (733 dims).
    """
    if variant not in VARIANT_LENGTHS:
        raise ValueError(f"unknown variant {variant!r}")
    if variant == "A":
        keep = [hand.names.index(n) for n in ("duration", "tempo", "onsets", "period")]
    elif variant == "B":
        keep = [
            i for i, n in enumerate(hand.names)
            if not (n.startswith("dmfcc") or n.startswith("d2mfcc"))
        ]
    else:
        keep = list(range(len(hand.names)))
    values = np.concatenate([emb.values, hand.values[keep]])
    names = tuple(pooled_names()) + tuple(f"hc.{hand.names[i]}" for i in keep)
    assert len(values) == VARIANT_LENGTHS[variant]
    return CombinedVector(variant, values, names)
