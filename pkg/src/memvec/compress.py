"""Per-text optimization of K trainable prefix vectors against a frozen LM.

Each text gets its own vectors, trained with AdamW on the standard next-token
cross-entropy until teacher-forced accuracy reaches the target or the step
budget runs out. The best-accuracy state (not the last) is kept, which makes
the procedure monotone in budget.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .model import LN2, ModelWeights, prediction_rows, sequence_cross_entropy
from .optim import adamw_update


class CompressionError(RuntimeError):
    pass


@dataclass(frozen=True)
class CompressionConfig:
    k: int = 1
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.9
    weight_decay: float = 0.01
    adam_epsilon: float = 1e-8
    max_steps: int = 5000
    accuracy_target: float = 1.0
    eval_every: int = 1
    init_scale_mode: str = "embedding_std"  # or "fixed"
    init_scale: float = 0.02
    seed: int = 0
    prefix_positions: bool = True

    def validate(self) -> None:
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if not 0 < self.accuracy_target <= 1:
            raise ValueError("accuracy_target must be in (0, 1]")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if self.init_scale_mode not in ("embedding_std", "fixed"):
            raise ValueError(f"unknown init_scale_mode {self.init_scale_mode!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CompressionConfig":
        cfg = cls(**d)
        cfg.validate()
        return cfg


@dataclass
class MemState:
    """K trainable vectors plus their optimizer moments."""

    vectors: Tensor
    moment1: np.ndarray
    moment2: np.ndarray
    step: int = 0

    @property
    def k(self) -> int:
        return self.vectors.shape[0]

    def copy_vectors(self) -> np.ndarray:
        return self.vectors.values.copy()


@dataclass
class CompressionResult:
    text_id: str
    n_tokens: int
    k: int
    steps_used: int
    accuracy: float
    baseline_correct: int
    with_mem_correct: int
    h_lm_bits: float
    h_mem_bits: float
    lossless: bool
    loss_trace: list[tuple[int, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["loss_trace"] = [[s, round(v, 4)] for s, v in self.loss_trace]
        return d


def init_mem(config: CompressionConfig, model: ModelWeights, seed: int | None = None) -> MemState:
    """Vectors ~ N(0, sigma^2); sigma defaults to the embedding-table std."""
    config.validate()
    d = model.config.d_model
    if config.init_scale_mode == "embedding_std":
        sigma = model.embedding_std()
    else:
        sigma = config.init_scale
    rng = np.random.default_rng(np.random.SeedSequence([config.seed if seed is None else seed, 0x6D656D]))
    vecs = Tensor(rng.normal(0.0, sigma, size=(config.k, d)).astype(np.float32), requires_grad=True)
    return MemState(
        vectors=vecs,
        moment1=np.zeros((config.k, d), dtype=np.float32),
        moment2=np.zeros((config.k, d), dtype=np.float32),
    )


def adamw_step(state: MemState, grad: np.ndarray, config: CompressionConfig) -> MemState:
    """In-place decoupled-weight-decay Adam update; bumps the step counter."""
    state.step += 1
    adamw_update(
        state.vectors.values, grad, state.moment1, state.moment2, state.step,
        config.learning_rate, config.beta1, config.beta2,
        config.weight_decay, config.adam_epsilon,
    )
    return state


def teacher_forced_accuracy(
    model: ModelWeights,
    tokens,
    prefix: Tensor | None = None,
    prefix_positions: bool = True,
) -> float:
    """Fraction of positions whose argmax prediction equals the target."""
    tokens = np.asarray(tokens, dtype=np.int64)
    rows = prediction_rows(model, tokens, prefix, prefix_positions)
    return float((rows.values.argmax(axis=1) == tokens).mean())


def correct_token_count(
    model: ModelWeights,
    tokens,
    prefix: Tensor | None = None,
    prefix_positions: bool = True,
) -> int:
    tokens = np.asarray(tokens, dtype=np.int64)
    rows = prediction_rows(model, tokens, prefix, prefix_positions)
    return int((rows.values.argmax(axis=1) == tokens).sum())


def compress(
    model: ModelWeights,
    tokens,
    config: CompressionConfig,
    text_id: str = "",
    seed: int | None = None,
) -> tuple[MemState, CompressionResult]:
    """Optimize mem vectors for one token sequence.

    Evaluates teacher-forced accuracy every ``eval_every`` steps from the same
    forward pass as the loss and stops early once the target is reached.
    """
    config.validate()
    tokens = np.asarray(tokens, dtype=np.int64)
    n = len(tokens)
    if n == 0:
        raise CompressionError("cannot compress an empty token sequence")
    if n + config.k > model.config.max_positions:
        raise CompressionError(
            f"{n} tokens + {config.k} mem vectors exceed max_positions {model.config.max_positions}"
        )
    state = init_mem(config, model, seed=seed)
    mem = state.vectors

    h_lm = sequence_cross_entropy(model, tokens)
    baseline_correct = correct_token_count(model, tokens)

    best_vectors = state.copy_vectors()
    best_accuracy = -1.0
    steps_used = config.max_steps
    trace: list[tuple[int, float]] = []
    trace_stride = max(1, config.max_steps // 50)

    for step in range(config.max_steps):
        with ad.Tape() as tape:
            rows = prediction_rows(model, tokens, prefix=mem,
                                   prefix_positions=config.prefix_positions)
            ce_bits = ad.cross_entropy_bits(rows, tokens)
            loss = ad.scale(ce_bits, LN2 / n)  # mean nats, the standard LM loss
        predictions = rows.values.argmax(axis=1)
        if step % trace_stride == 0:
            trace.append((step, float(ce_bits.values)))
        if step % config.eval_every == 0:
            accuracy = float((predictions == tokens).mean())
            if accuracy > best_accuracy:
                best_accuracy = accuracy
                np.copyto(best_vectors, mem.values)
            if accuracy >= config.accuracy_target:
                steps_used = step
                break
        tape.backward(loss)
        grad = mem.grad
        mem.zero_grad()
        adamw_step(state, grad, config)

    # evaluate the kept (best) state
    mem.values[...] = best_vectors
    final = Tensor(best_vectors)
    rows = prediction_rows(model, tokens, prefix=final,
                           prefix_positions=config.prefix_positions)
    accuracy = float((rows.values.argmax(axis=1) == tokens).mean())
    with_mem_correct = int((rows.values.argmax(axis=1) == tokens).sum())
    h_mem = float(ad.cross_entropy_bits(rows, tokens).values)
    trace.append((min(steps_used, config.max_steps), h_mem))

    result = CompressionResult(
        text_id=text_id,
        n_tokens=n,
        k=config.k,
        steps_used=steps_used,
        accuracy=accuracy,
        baseline_correct=baseline_correct,
        with_mem_correct=with_mem_correct,
        h_lm_bits=h_lm,
        h_mem_bits=h_mem,
        lossless=accuracy >= 1.0,
        loss_trace=trace,
    )
    model.check_frozen_intact()
    return state, result


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def save_mem(path, state: MemState, config: CompressionConfig, text_id: str) -> None:
    """Archive the vectors as mem.{k} rows plus a JSON config sidecar."""
    from .archive import save_tensors

    tensors = {f"mem.{i}": state.vectors.values[i] for i in range(state.k)}
    save_tensors(path, tensors)
    sidecar = Path(str(path) + ".json")
    sidecar.write_text(
        json.dumps({"text_id": text_id, "config": config.to_dict()}, indent=2, sort_keys=True),
        encoding="utf-8",
    )


def load_mem(path) -> tuple[np.ndarray, dict]:
    from .archive import load_tensors

    tensors, _ = load_tensors(path)
    ks = sorted(int(name.split(".", 1)[1]) for name in tensors)
    vectors = np.stack([tensors[f"mem.{i}"] for i in ks])
    sidecar = Path(str(path) + ".json")
    meta = json.loads(sidecar.read_text(encoding="utf-8")) if sidecar.exists() else {}
    return vectors, meta
