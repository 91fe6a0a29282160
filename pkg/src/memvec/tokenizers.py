"""Text <-> token-id mapping.

Two schemes: a word-level vocabulary built from a corpus (used by the micro
LM), and byte-level BPE compatible with externally trained GPT-2-class
vocab/merges assets. Both are immutable after construction and deterministic.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from collections import Counter
from pathlib import Path


class TokenizerError(ValueError):
    pass


BOS_TOKEN = "<bos>"
UNK_TOKEN = "<unk>"

# Words are maximal alphanumeric runs; every other non-space character is its
# own token. decode() joins tokens with single spaces (canonical whitespace).
_WORD_RE = re.compile(r"[A-Za-z0-9]+|[^A-Za-z0-9\s]")


def split_words(text: str) -> list[str]:
    return _WORD_RE.findall(text)


@dataclass(frozen=True)
class Vocabulary:
    """Dense id space: 0=BOS, 1=UNK, then words by descending frequency."""

    tokens: tuple[str, ...]
    index: dict[str, int] = field(repr=False, default_factory=dict)

    def __post_init__(self):
        if not self.index:
            object.__setattr__(self, "index", {t: i for i, t in enumerate(self.tokens)})

    @property
    def size(self) -> int:
        return len(self.tokens)

    @property
    def bos_id(self) -> int:
        return 0

    @property
    def unk_id(self) -> int:
        return 1

    def encode(self, text: str) -> list[int]:
        unk = self.unk_id
        return [self.index.get(w, unk) for w in split_words(text)]

    def decode(self, ids) -> str:
        out = []
        for i in ids:
            if not 0 <= int(i) < self.size:
                raise TokenizerError(f"token id {i} out of range for vocabulary of {self.size}")
            out.append(self.tokens[int(i)])
        return " ".join(out)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(list(self.tokens), ensure_ascii=False), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        tokens = json.loads(Path(path).read_text(encoding="utf-8"))
        if tokens[:2] != [BOS_TOKEN, UNK_TOKEN]:
            raise TokenizerError("vocabulary file must start with the BOS and UNK specials")
        return cls(tokens=tuple(tokens))


def build_word_vocab(corpus: str, target_size: int) -> Vocabulary:
    """Most frequent surface forms, ties broken lexicographically."""
    if target_size < 3:
        raise TokenizerError(f"target_size must be at least 3, got {target_size}")
    if not corpus.strip():
        raise TokenizerError("corpus is empty")
    counts = Counter(split_words(corpus))
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    kept = [w for w, _ in ranked[: target_size - 2]]
    return Vocabulary(tokens=(BOS_TOKEN, UNK_TOKEN, *kept))


# ---------------------------------------------------------------------------
# byte-level BPE (GPT-2 class)
# ---------------------------------------------------------------------------


def bytes_to_unicode() -> dict[int, str]:
    """Bijective map from byte values to printable unicode characters."""
    keep = (
        list(range(ord("!"), ord("~") + 1))
        + list(range(ord("\xa1"), ord("\xac") + 1))
        + list(range(ord("\xae"), ord("\xff") + 1))
    )
    chars = keep[:]
    n = 0
    for b in range(256):
        if b not in keep:
            keep.append(b)
            chars.append(256 + n)
            n += 1
    return dict(zip(keep, (chr(c) for c in chars)))


@dataclass(frozen=True)
class BpeMerges:
    """Ordered merge pairs; rank = list position, lower merges first."""

    pairs: tuple[tuple[str, str], ...]
    ranks: dict[tuple[str, str], int] = field(repr=False, default_factory=dict)

    def __post_init__(self):
        if not self.ranks:
            object.__setattr__(self, "ranks", {p: r for r, p in enumerate(self.pairs)})

    @classmethod
    def load(cls, path) -> "BpeMerges":
        pairs = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line or line.startswith("#"):
                continue
            parts = line.split(" ")
            if len(parts) != 2:
                raise TokenizerError(f"malformed merges line: {line!r}")
            pairs.append((parts[0], parts[1]))
        return cls(pairs=tuple(pairs))


def load_bpe_vocab(path) -> dict[str, int]:
    vocab = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(vocab, dict):
        raise TokenizerError("BPE vocab file must hold a token -> id object")
    return vocab


def _merge_once(parts: list[str], pair: tuple[str, str]) -> list[str]:
    merged = []
    i = 0
    while i < len(parts):
        if i + 1 < len(parts) and (parts[i], parts[i + 1]) == pair:
            merged.append(parts[i] + parts[i + 1])
            i += 2
        else:
            merged.append(parts[i])
            i += 1
    return merged


def bpe_encode(merges: BpeMerges, vocab: dict[str, int], text: str) -> list[int]:
    """Lowest-rank-first merging over the byte-mapped text."""
    byte_map = bytes_to_unicode()
    parts = [byte_map[b] for b in text.encode("utf-8")]
    while len(parts) > 1:
        best = None
        best_rank = None
        for pair in zip(parts, parts[1:]):
            r = merges.ranks.get(pair)
            if r is not None and (best_rank is None or r < best_rank):
                best, best_rank = pair, r
        if best is None:
            break
        parts = _merge_once(parts, best)
    try:
        return [vocab[p] for p in parts]
    except KeyError as exc:
        raise TokenizerError(f"merged token {exc.args[0]!r} is absent from the BPE vocab") from None


def bpe_decode(vocab: dict[str, int], ids) -> str:
    inverse = {i: t for t, i in vocab.items()}
    unmap = {c: b for b, c in bytes_to_unicode().items()}
    try:
        joined = "".join(inverse[int(i)] for i in ids)
    except KeyError as exc:
        raise TokenizerError(f"token id {exc.args[0]} absent from the BPE vocab") from None
    return bytes(unmap[ch] for ch in joined).decode("utf-8", errors="strict")
