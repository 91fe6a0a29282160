"""Structure of the learned vectors: cosine-similarity distributions across
restarts and texts, and accuracy along linear interpolation paths."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor
from .compress import teacher_forced_accuracy
from .model import ModelWeights


class GeometryError(ValueError):
    pass


@dataclass
class BankEntry:
    text_id: str
    tokens: np.ndarray
    states: list[np.ndarray]  # [K, d] per restart, all lossless


@dataclass
class EmbeddingBank:
    """Per-text mem solutions from independent restarts; lossless only."""

    k: int
    d_model: int
    entries: list[BankEntry] = field(default_factory=list)

    def add(self, text_id: str, tokens, vectors: np.ndarray, accuracy: float) -> None:
        if accuracy < 1.0:
            raise GeometryError(f"bank only stores lossless states (got accuracy {accuracy})")
        if vectors.shape != (self.k, self.d_model):
            raise GeometryError(f"state shape {vectors.shape} does not match bank ({self.k}, {self.d_model})")
        for e in self.entries:
            if e.text_id == text_id:
                e.states.append(np.array(vectors, dtype=np.float32))
                return
        self.entries.append(
            BankEntry(text_id=text_id, tokens=np.asarray(tokens, dtype=np.int64),
                      states=[np.array(vectors, dtype=np.float32)])
        )

    @property
    def restarts(self) -> int:
        return min((len(e.states) for e in self.entries), default=0)


HIST_BINS = np.round(np.arange(-1.0, 1.0001, 0.05), 10)  # [-1, 1] in steps of 0.05


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    fa, fb = a.reshape(-1).astype(np.float64), b.reshape(-1).astype(np.float64)
    denom = np.linalg.norm(fa) * np.linalg.norm(fb)
    if denom == 0:
        raise GeometryError("zero-norm vector in cosine similarity")
    return float(np.dot(fa, fb) / denom)


@dataclass
class SimilarityStudy:
    intra_values: list[float]
    inter_values: list[float]
    intra_hist: np.ndarray
    inter_hist: np.ndarray

    def intra_mass_above(self, threshold: float) -> float:
        if not self.intra_values:
            return 0.0
        return float(np.mean(np.asarray(self.intra_values) > threshold))


def cosine_similarity_study(bank: EmbeddingBank) -> SimilarityStudy:
    """Intra: restart pairs of the same text; inter: first restarts of
    distinct texts. Vectors are flattened to K*d before the dot product."""
    if bank.restarts < 2:
        raise GeometryError("intra-sample similarity needs at least 2 restarts per text")
    intra: list[float] = []
    for e in bank.entries:
        for i in range(len(e.states)):
            for j in range(i + 1, len(e.states)):
                intra.append(cosine(e.states[i], e.states[j]))
    inter: list[float] = []
    for i in range(len(bank.entries)):
        for j in range(i + 1, len(bank.entries)):
            inter.append(cosine(bank.entries[i].states[0], bank.entries[j].states[0]))
    intra_hist, _ = np.histogram(intra, bins=HIST_BINS)
    inter_hist, _ = np.histogram(inter, bins=HIST_BINS)
    return SimilarityStudy(intra, inter, intra_hist, inter_hist)


DEFAULT_MIX_GRID = tuple(np.linspace(0.0, 1.0, 33))


def interpolation_sweep(
    model: ModelWeights,
    state_a: np.ndarray,
    state_b: np.ndarray,
    tokens,
    mix_grid=DEFAULT_MIX_GRID,
    prefix_positions: bool = True,
) -> list[tuple[float, float]]:
    """Accuracy of (1-c)*a + c*b over the mixing grid; endpoints must be
    lossless for the tokens."""
    a = np.asarray(state_a, dtype=np.float32)
    b = np.asarray(state_b, dtype=np.float32)
    if a.shape != b.shape:
        raise GeometryError(f"endpoint shapes differ: {a.shape} vs {b.shape}")
    tokens = np.asarray(tokens, dtype=np.int64)
    for name, vec in (("a", a), ("b", b)):
        acc = teacher_forced_accuracy(model, tokens, prefix=Tensor(vec),
                                      prefix_positions=prefix_positions)
        if acc < 1.0:
            raise GeometryError(f"endpoint {name} is not lossless (accuracy {acc})")
    curve = []
    for c in mix_grid:
        mixed = (1.0 - c) * a + c * b
        acc = teacher_forced_accuracy(model, tokens, prefix=Tensor(mixed.astype(np.float32)),
                                      prefix_positions=prefix_positions)
        curve.append((float(c), acc))
    return curve
