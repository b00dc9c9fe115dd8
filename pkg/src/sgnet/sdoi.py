"""SDOI masks: per-token ancestor sets turned into boolean attention masks.

Row i of a mask marks the syntactic dependency of interest for token i: its
ancestors on the head chain plus the token itself. Special tokens (CLS/SEP/
PAD analogues) get self-only rows when sentences are composed into a full
input sequence, and masks never cross sentence boundaries.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .conllu import ROOT, DependencyTree, WordPieceAlignment, validate_tree


@dataclass(frozen=True)
class SdoiMask:
    """n-by-n boolean matrix; row = attending token, column = attended."""

    bits: np.ndarray

    def __post_init__(self):
        b = self.bits
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise ValueError(f"mask must be square, got shape {b.shape}")
        if b.dtype != np.bool_:
            object.__setattr__(self, "bits", b.astype(np.bool_))

    @property
    def n(self) -> int:
        return self.bits.shape[0]

    def check(self) -> None:
        if not np.all(np.diagonal(self.bits)):
            raise ValueError("mask diagonal must be all ones (self is in SDOI)")
        if not np.all(self.bits.any(axis=1)):
            raise ValueError("every mask row must have at least one set bit")

    def __eq__(self, other) -> bool:
        return isinstance(other, SdoiMask) and np.array_equal(self.bits, other.bits)


def ancestor_set(tree: DependencyTree, i: int) -> list[int]:
    """Strict ancestors of token i on the head chain, nearest first.

    Excludes i itself and the ROOT sentinel.
    """
    if not 0 <= i < tree.n:
        raise IndexError(f"token index {i} out of range for n={tree.n}")
    out = []
    j = tree.tokens[i].head
    while j != ROOT:
        out.append(j)
        j = tree.tokens[j].head
    return out


def build_sdoi_mask(tree: DependencyTree) -> SdoiMask:
    """Mask with M[i,j]=1 exactly when j is an ancestor of i or j=i."""
    validate_tree(tree)
    n = tree.n
    bits = np.zeros((n, n), dtype=np.bool_)
    for i in range(n):
        bits[i, i] = True
        for j in ancestor_set(tree, i):
            bits[i, j] = True
    return SdoiMask(bits)


def project_mask_to_wordpieces(mask: SdoiMask, align: WordPieceAlignment) -> SdoiMask:
    """Expand a word-level mask to wordpieces.

    Every piece of word w inherits w's row and targets every piece of each
    word in w's SDOI; pieces of one word mutually attend since M[i,i]=1.
    """
    if align.n_words != mask.n:
        raise ValueError(
            f"alignment covers {align.n_words} words but mask has n={mask.n}"
        )
    m = align.n_pieces
    word_of = np.asarray(align.word_of_piece())
    bits = mask.bits[np.ix_(word_of, word_of)]
    assert bits.shape == (m, m)
    return SdoiMask(bits)


@dataclass(frozen=True)
class SequenceLayout:
    """Assigns each sequence position to a sentence index or to a special token.

    slots[p] is the sentence index owning position p, or None for a special
    (CLS/SEP/PAD analogue). Positions of one sentence must appear in order.
    """

    slots: tuple

    @property
    def length(self) -> int:
        return len(self.slots)

    def sentence_positions(self, sent: int) -> list[int]:
        return [p for p, s in enumerate(self.slots) if s == sent]


def compose_sequence_mask(sentence_masks: list[SdoiMask], layout: SequenceLayout) -> SdoiMask:
    """Place per-sentence masks block-diagonally under a sequence layout.

    Special-token rows/columns are zero except the diagonal; no bit ever
    crosses a sentence boundary.
    """
    n = layout.length
    counts = [0] * len(sentence_masks)
    for s in layout.slots:
        if s is None:
            continue
        if not 0 <= s < len(sentence_masks):
            raise ValueError(f"layout references sentence {s} but only "
                             f"{len(sentence_masks)} masks were given")
        counts[s] += 1
    for s, mask in enumerate(sentence_masks):
        if counts[s] != mask.n:
            raise ValueError(
                f"layout assigns {counts[s]} positions to sentence {s} "
                f"but its mask has n={mask.n}"
            )
    bits = np.zeros((n, n), dtype=np.bool_)
    np.fill_diagonal(bits, True)
    for s, mask in enumerate(sentence_masks):
        pos = layout.sentence_positions(s)
        bits[np.ix_(pos, pos)] = mask.bits
    return SdoiMask(bits)


# Serialization. Binary: 8-byte little-endian n, then the n*n row-major bits
# packed 8 per byte, most significant bit first (numpy packbits order).

_HEADER = struct.Struct("<Q")


def mask_to_bytes(mask: SdoiMask) -> bytes:
    packed = np.packbits(mask.bits.reshape(-1).astype(np.uint8))
    return _HEADER.pack(mask.n) + packed.tobytes()


def mask_from_bytes(blob: bytes) -> SdoiMask:
    if len(blob) < _HEADER.size:
        raise ValueError("mask blob shorter than its length header")
    (n,) = _HEADER.unpack_from(blob)
    need = (n * n + 7) // 8
    body = np.frombuffer(blob, dtype=np.uint8, offset=_HEADER.size)
    if body.size != need:
        raise ValueError(f"mask blob body has {body.size} bytes, expected {need}")
    bits = np.unpackbits(body, count=n * n).reshape(n, n).astype(np.bool_)
    return SdoiMask(bits)


def mask_to_json(mask: SdoiMask) -> str:
    rows = [np.flatnonzero(row).tolist() for row in mask.bits]
    return json.dumps({"n": mask.n, "rows": rows})


def mask_from_json(text: str) -> SdoiMask:
    data = json.loads(text)
    n = int(data["n"])
    rows = data["rows"]
    if len(rows) != n:
        raise ValueError(f"mask JSON lists {len(rows)} rows for n={n}")
    bits = np.zeros((n, n), dtype=np.bool_)
    for i, cols in enumerate(rows):
        bits[i, cols] = True
    return SdoiMask(bits)
