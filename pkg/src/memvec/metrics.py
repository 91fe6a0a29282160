"""Capacity metrics: the theoretical bound, token/information gains, the
decoding-capacity grid search, and capacity utilization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .compress import CompressionConfig, CompressionResult, compress
from .model import ModelWeights


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class CapacityParams:
    d_model: int
    bits_per_element: int = 16
    vocab_size: int = 2

    def validate(self) -> None:
        if self.d_model < 1 or self.bits_per_element < 1:
            raise MetricsError("d_model and bits_per_element must be positive")
        if self.vocab_size < 2:
            raise MetricsError("vocab_size must be at least 2")


def theoretical_capacity(params: CapacityParams) -> int:
    """Largest token count a d_model x b bit vector can address:
    floor(d_model * b / log2 |V|)."""
    params.validate()
    return int(math.floor(params.d_model * params.bits_per_element / math.log2(params.vocab_size)))


def token_gain(with_mem_correct: int, without_mem_correct: int, n_tokens: int | None = None) -> int:
    """Correct-token difference; may be negative (reported, not clamped)."""
    if n_tokens is not None and (with_mem_correct > n_tokens or without_mem_correct > n_tokens):
        raise MetricsError("correct counts cannot exceed the token count")
    if with_mem_correct < 0 or without_mem_correct < 0:
        raise MetricsError("correct counts cannot be negative")
    return with_mem_correct - without_mem_correct


def information_gain(h_lm_bits: float, h_mem_bits: float) -> float:
    """Cross-entropy reduction in bits attributable to the mem vectors."""
    if h_lm_bits < 0 or h_mem_bits < 0:
        raise MetricsError("cross-entropies must be non-negative")
    return h_lm_bits - h_mem_bits


def capacity_utilization(measured_gain_tokens: float, params: CapacityParams) -> float:
    """Measured token gain over the theoretical capacity (b defaults to 16)."""
    cap = theoretical_capacity(params)
    if cap == 0:
        raise MetricsError("theoretical capacity is zero")
    return measured_gain_tokens / cap


# ---------------------------------------------------------------------------
# decoding-capacity grid search
# ---------------------------------------------------------------------------

# grid from the original protocol, used verbatim at full scale
PAPER_LENGTH_GRID = (64, 80, 96, 128, 160, 192, 256, 384, 512, 768, 1024, 1280, 1568, 2048, 2560, 3072)


@dataclass(frozen=True)
class CapacitySearchConfig:
    length_grid: tuple[int, ...] = PAPER_LENGTH_GRID
    texts_per_length: int = 50
    accuracy_threshold: float = 0.99
    aggregation: str = "mean"  # or "quantile"
    quantile: float = 0.5
    stop_after_first_failure: bool = True

    def validate(self) -> None:
        if not self.length_grid or list(self.length_grid) != sorted(set(self.length_grid)):
            raise MetricsError("length grid must be non-empty and strictly ascending")
        if not 0 < self.accuracy_threshold <= 1:
            raise MetricsError("accuracy threshold must be in (0, 1]")
        if self.aggregation not in ("mean", "quantile"):
            raise MetricsError(f"unknown aggregation {self.aggregation!r}")
        if self.texts_per_length < 1:
            raise MetricsError("texts_per_length must be positive")


@dataclass
class LengthStats:
    length: int
    mean_accuracy: float
    std_accuracy: float
    mean_gain_tokens: float
    std_gain_tokens: float
    mean_gain_bits: float
    std_gain_bits: float
    lossless_fraction: float
    aggregate_accuracy: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class CapacityReport:
    l_max: int
    per_length: list[LengthStats]
    k: int
    threshold: float
    aggregation: str
    anomalies: list[str] = field(default_factory=list)

    def gain_tokens_at_l_max(self) -> float:
        for row in self.per_length:
            if row.length == self.l_max:
                return row.mean_gain_tokens
        return 0.0

    def gain_bits_at_l_max(self) -> float:
        for row in self.per_length:
            if row.length == self.l_max:
                return row.mean_gain_bits
        return 0.0

    def to_dict(self) -> dict:
        return {
            "l_max": self.l_max,
            "k": self.k,
            "threshold": self.threshold,
            "aggregation": self.aggregation,
            "anomalies": list(self.anomalies),
            "per_length": [r.to_dict() for r in self.per_length],
        }


def aggregate_accuracy(accuracies: list[float], config: CapacitySearchConfig) -> float:
    arr = np.asarray(accuracies, dtype=np.float64)
    if config.aggregation == "mean":
        return float(arr.mean())
    return float(np.quantile(arr, config.quantile))


def summarize_length(length: int, results: list[CompressionResult],
                     config: CapacitySearchConfig) -> LengthStats:
    acc = np.asarray([r.accuracy for r in results], dtype=np.float64)
    gains_t = np.asarray(
        [token_gain(r.with_mem_correct, r.baseline_correct, r.n_tokens) for r in results],
        dtype=np.float64,
    )
    gains_b = np.asarray(
        [information_gain(r.h_lm_bits, r.h_mem_bits) for r in results], dtype=np.float64
    )
    agg = aggregate_accuracy(list(acc), config)
    return LengthStats(
        length=length,
        mean_accuracy=float(acc.mean()),
        std_accuracy=float(acc.std()),
        mean_gain_tokens=float(gains_t.mean()),
        std_gain_tokens=float(gains_t.std()),
        mean_gain_bits=float(gains_b.mean()),
        std_gain_bits=float(gains_b.std()),
        lossless_fraction=float(np.mean([r.lossless for r in results])),
        aggregate_accuracy=agg,
        passed=agg > config.accuracy_threshold,
    )


def decoding_capacity_search(
    model: ModelWeights,
    search: CapacitySearchConfig,
    compression: CompressionConfig,
    text_source,
    job_runner=None,
) -> tuple[CapacityReport, list[CompressionResult]]:
    """Largest grid length whose aggregate accuracy beats the threshold.

    ``text_source(length) -> list of token sequences``. Lengths run in
    ascending order; by default the search stops after the first failing
    length (monotonicity assumption; violations are logged as anomalies when
    later lengths are evaluated anyway).
    """
    search.validate()
    compression.validate()
    for length in search.length_grid:
        if length + compression.k > model.config.max_positions:
            raise MetricsError(
                f"grid length {length} + k {compression.k} exceeds "
                f"max_positions {model.config.max_positions}"
            )
    per_length: list[LengthStats] = []
    all_results: list[CompressionResult] = []
    anomalies: list[str] = []
    failed = False
    for length in search.length_grid:
        if failed and search.stop_after_first_failure:
            break
        texts = text_source(length)
        if len(texts) != search.texts_per_length:
            anomalies.append(f"length {length}: source yielded {len(texts)} texts")
        jobs = [
            (np.asarray(t, dtype=np.int64), f"L{length}/{i}", i)
            for i, t in enumerate(texts)
        ]
        if job_runner is None:
            results = [
                compress(model, toks, compression, text_id=tid, seed=compression.seed + 7919 * (idx + 1))[1]
                for toks, tid, idx in jobs
            ]
        else:
            results = job_runner(model, compression, jobs)
        stats = summarize_length(length, results, search)
        per_length.append(stats)
        all_results.extend(results)
        if not stats.passed:
            failed = True
    l_max = 0
    previous_failed = False
    for stats in per_length:
        if stats.passed:
            if previous_failed:
                anomalies.append(
                    f"non-monotone accuracy: length {stats.length} passed after a failure"
                )
            l_max = max(l_max, stats.length)
        else:
            previous_failed = True
    return (
        CapacityReport(
            l_max=l_max,
            per_length=per_length,
            k=compression.k,
            threshold=search.accuracy_threshold,
            aggregation=search.aggregation,
            anomalies=anomalies,
        ),
        all_results,
    )
