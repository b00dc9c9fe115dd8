"""CoNLL-U ingestion: dependency trees and word-to-wordpiece alignments.

File indices are 1-based with HEAD=0 meaning the root; everything internal
is 0-based with ROOT as a sentinel so mask arithmetic never mixes the two.
Multiword-token ranges ("3-4") and empty nodes ("5.1") are skipped: masks
are defined over basic dependency nodes only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

ROOT = -1

_NUM_COLUMNS = 10


class ConlluError(ValueError):
    """Malformed CoNLL-U input; message names the offending line."""


class TreeError(ValueError):
    """A structurally parsed tree violates a dependency-tree invariant."""


@dataclass(frozen=True)
class Token:
    form: str
    head: int  # 0-based index of the governing token, or ROOT
    deprel: str


@dataclass(frozen=True)
class DependencyTree:
    """One sentence: ordered tokens with head indices and relation labels."""

    tokens: tuple[Token, ...]

    @property
    def n(self) -> int:
        return len(self.tokens)

    def heads(self) -> list[int]:
        return [t.head for t in self.tokens]

    def root(self) -> int:
        for i, t in enumerate(self.tokens):
            if t.head == ROOT:
                return i
        raise TreeError("tree has no root")


def tree_from_heads(heads, forms=None, deprels=None) -> DependencyTree:
    """Build a tree from 0-based head indices (ROOT for the root token)."""
    n = len(heads)
    forms = forms if forms is not None else [f"w{i}" for i in range(n)]
    deprels = deprels if deprels is not None else ["dep"] * n
    return DependencyTree(
        tuple(Token(f, h, d) for f, h, d in zip(forms, heads, deprels))
    )


def validate_tree(tree: DependencyTree) -> None:
    """Check all tree invariants; raise TreeError naming the first violation.

    Order of checks: single root, head range, self-head, acyclicity.
    """
    n = tree.n
    if n == 0:
        raise TreeError("empty tree")
    roots = [i for i, t in enumerate(tree.tokens) if t.head == ROOT]
    if len(roots) == 0:
        raise TreeError("no root token")
    if len(roots) > 1:
        raise TreeError(f"multiple roots at indices {roots}")
    for i, tok in enumerate(tree.tokens):
        if tok.head == ROOT:
            continue
        if not 0 <= tok.head < n:
            raise TreeError(f"token {i} has dangling head index {tok.head}")
        if tok.head == i:
            raise TreeError(f"token {i} is its own head")
    for i in range(n):
        j = i
        for _ in range(n):
            j = tree.tokens[j].head
            if j == ROOT:
                break
        else:
            raise TreeError(f"cycle detected on the head chain from token {i}")


def parse_conllu(text: str) -> list[DependencyTree]:
    """Parse CoNLL-U text into validated dependency trees, one per sentence.

    Tab-separated 10-column rows; '#' comments; blank-line sentence breaks;
    LF or CRLF line endings. Raises ConlluError with a 1-based line number
    on malformed input.
    """
    trees: list[DependencyTree] = []
    rows: list[tuple[int, str, str, str]] = []  # (line_no, form, head_col, deprel)
    block_start = 0

    def flush() -> None:
        nonlocal rows
        if not rows:
            return
        n = len(rows)
        tokens = []
        for line_no, form, head_col, deprel in rows:
            try:
                head_1b = int(head_col)
            except ValueError:
                raise ConlluError(
                    f"line {line_no}: non-integer HEAD column {head_col!r}"
                ) from None
            if head_1b == 0:
                head = ROOT
            elif 1 <= head_1b <= n:
                head = head_1b - 1
            else:
                raise ConlluError(
                    f"line {line_no}: HEAD {head_1b} out of range for a "
                    f"{n}-token sentence"
                )
            tokens.append(Token(form, head, deprel))
        tree = DependencyTree(tuple(tokens))
        try:
            validate_tree(tree)
        except TreeError as err:
            raise ConlluError(f"sentence starting at line {block_start}: {err}") from err
        trees.append(tree)
        rows = []

    for line_no, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r")
        if not line.strip():
            flush()
            continue
        if line.startswith("#"):
            continue
        if not rows:
            block_start = line_no
        cols = line.split("\t")
        if len(cols) != _NUM_COLUMNS:
            raise ConlluError(
                f"line {line_no}: expected {_NUM_COLUMNS} tab-separated columns, "
                f"got {len(cols)}"
            )
        token_id = cols[0]
        if "-" in token_id or "." in token_id:
            continue  # multiword range or empty node
        try:
            int(token_id)
        except ValueError:
            raise ConlluError(f"line {line_no}: non-integer ID column {token_id!r}") from None
        rows.append((line_no, cols[1], cols[6], cols[7]))
    flush()
    return trees


def to_conllu(trees: list[DependencyTree]) -> str:
    """Serialize trees back to CoNLL-U; parse_conllu round-trips field-wise."""
    blocks = []
    for tree in trees:
        lines = []
        for i, tok in enumerate(tree.tokens):
            head_1b = 0 if tok.head == ROOT else tok.head + 1
            lines.append(
                "\t".join(
                    [str(i + 1), tok.form, "_", "_", "_", "_", str(head_1b), tok.deprel, "_", "_"]
                )
            )
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


@dataclass(frozen=True)
class WordPieceAlignment:
    """Maps each word index to a contiguous wordpiece range [lo, hi)."""

    spans: tuple[tuple[int, int], ...]

    def __post_init__(self):
        pos = 0
        for w, (lo, hi) in enumerate(self.spans):
            if lo != pos:
                raise ValueError(
                    f"word {w}: span [{lo}, {hi}) does not start at piece {pos}; "
                    "spans must tile the wordpiece sequence"
                )
            if hi <= lo:
                raise ValueError(f"word {w}: empty span [{lo}, {hi})")
            pos = hi

    @property
    def n_words(self) -> int:
        return len(self.spans)

    @property
    def n_pieces(self) -> int:
        return self.spans[-1][1] if self.spans else 0

    def word_of_piece(self) -> list[int]:
        out = []
        for w, (lo, hi) in enumerate(self.spans):
            out.extend([w] * (hi - lo))
        return out


def alignment_to_json(align: WordPieceAlignment) -> str:
    return json.dumps([[lo, hi] for lo, hi in align.spans])


def alignment_from_json(text: str) -> WordPieceAlignment:
    data = json.loads(text)
    return WordPieceAlignment(tuple((int(lo), int(hi)) for lo, hi in data))
