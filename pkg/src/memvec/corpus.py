"""Experiment text sources: sentence-aligned natural passages and random-word
sequences, both deterministic given a seed and exactly the requested token
length."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .tokenizers import Vocabulary

DATA_DIR = Path(__file__).parent / "data"
DEFAULT_CORPUS = DATA_DIR / "corpus.txt"
DEFAULT_WORD_LIST = DATA_DIR / "words.txt"


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class TextSample:
    source: str  # "natural" | "random"
    token_ids: tuple[int, ...]
    provenance: str

    @property
    def n(self) -> int:
        return len(self.token_ids)

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "provenance": self.provenance,
            "n": self.n,
            "token_ids": list(self.token_ids),
        }


# sentence boundary: terminator followed by whitespace (or file start)
_SENTENCE_START = re.compile(r"[.!?]\s+")


def sentence_starts(text: str) -> np.ndarray:
    starts = [0] + [m.end() for m in _SENTENCE_START.finditer(text)]
    return np.asarray([s for s in starts if s < len(text)], dtype=np.int64)


def load_word_list(path) -> list[str]:
    """One word per line, trimmed, deduplicated preserving first occurrence."""
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read word list {path}: {exc}") from None
    seen = set()
    words = []
    for line in raw.splitlines():
        w = line.strip()
        if w and w not in seen:
            seen.add(w)
            words.append(w)
    if not words:
        raise CorpusError(f"word list {path} holds no words")
    return words


def sample_natural_passages(
    corpus_text: str,
    vocab: Vocabulary,
    length: int,
    count: int,
    seed: int,
) -> list[TextSample]:
    """Uniformly chosen sentence-start offsets, tokenized, truncated to
    exactly ``length`` tokens; no two samples share a token sequence."""
    starts = sentence_starts(corpus_text)
    if len(starts) == 0:
        raise CorpusError("corpus has no sentence starts")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x6E6174]))
    samples: list[TextSample] = []
    seen: set[tuple[int, ...]] = set()
    # ~15 chars per word token is generous; resample if the tail is short
    char_window = max(length * 15, 200)
    attempts = 0
    while len(samples) < count:
        attempts += 1
        if attempts > 50 * count + 100:
            raise CorpusError(
                f"corpus too short to yield {count} distinct passages of {length} tokens"
            )
        offset = int(starts[rng.integers(0, len(starts))])
        ids = vocab.encode(corpus_text[offset : offset + char_window])
        if len(ids) < length:
            continue
        key = tuple(ids[:length])
        if key in seen:
            continue
        seen.add(key)
        samples.append(TextSample(source="natural", token_ids=key, provenance=f"offset={offset}"))
    return samples


def generate_random_word_texts(
    words: list[str],
    vocab: Vocabulary,
    length: int,
    count: int,
    seed: int,
) -> list[TextSample]:
    """Words drawn i.i.d. uniformly, space-joined, tokenized, truncated."""
    if not words:
        raise CorpusError("empty word list")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x726E64]))
    samples: list[TextSample] = []
    for i in range(count):
        ids: list[int] = []
        while len(ids) < length:
            draw = rng.integers(0, len(words), size=length)
            ids.extend(vocab.encode(" ".join(words[j] for j in draw)))
        samples.append(
            TextSample(source="random", token_ids=tuple(ids[:length]), provenance=f"seed={seed}/{i}")
        )
    return samples


def load_corpus_text(path=DEFAULT_CORPUS) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read corpus {path}: {exc}") from None
