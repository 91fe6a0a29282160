"""Decoder-only transformer: forward with an optional raw-embedding prefix,
sequence cross-entropy, greedy decoding, and a desk-scale training loop.

Architecture is a pre-layernorm GPT-2-style block with learned positional
embeddings and (by default) tied input/output embeddings. Prefix vectors
bypass the token embedding table, occupy positions 0..K-1, and by default
receive the positional embeddings of those positions.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, asdict

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .optim import adamw_update

LN2 = float(np.log(2.0))


class ModelError(ValueError):
    pass


class FrozenModelError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    n_layers: int = 4
    d_model: int = 128
    n_heads: int = 4
    d_ff: int = 512
    vocab_size: int = 2048
    max_positions: int = 512
    layernorm_epsilon: float = 1e-5
    tied_embeddings: bool = True
    bos_id: int = 0

    def validate(self) -> None:
        if self.d_model % self.n_heads != 0:
            raise ModelError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        for name in ("n_layers", "d_model", "n_heads", "d_ff", "vocab_size", "max_positions"):
            if getattr(self, name) < 1:
                raise ModelError(f"{name} must be positive")
        if not 0 <= self.bos_id < self.vocab_size:
            raise ModelError(f"bos_id {self.bos_id} out of vocabulary range")
        if self.layernorm_epsilon <= 0:
            raise ModelError("layernorm_epsilon must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        cfg = cls(**d)
        cfg.validate()
        return cfg

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads


def parameter_names(config: ModelConfig) -> list[str]:
    """Archive tensor names, in canonical (sorted) order."""
    names = ["embedding.position", "embedding.token", "ln_final.bias", "ln_final.gain"]
    if not config.tied_embeddings:
        names.append("lm_head")
    for i in range(config.n_layers):
        base = f"transformer.layer.{i}"
        for sub in (
            "attn.b_k", "attn.b_o", "attn.b_q", "attn.b_v",
            "attn.w_k", "attn.w_o", "attn.w_q", "attn.w_v",
            "ln1.bias", "ln1.gain", "ln2.bias", "ln2.gain",
            "mlp.b_in", "mlp.b_out", "mlp.w_in", "mlp.w_out",
        ):
            names.append(f"{base}.{sub}")
    return sorted(names)


def parameter_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    d, ff, v, p = config.d_model, config.d_ff, config.vocab_size, config.max_positions
    shapes: dict[str, tuple[int, ...]] = {
        "embedding.token": (v, d),
        "embedding.position": (p, d),
        "ln_final.gain": (d,),
        "ln_final.bias": (d,),
    }
    if not config.tied_embeddings:
        shapes["lm_head"] = (v, d)
    for i in range(config.n_layers):
        base = f"transformer.layer.{i}"
        shapes.update({
            f"{base}.ln1.gain": (d,), f"{base}.ln1.bias": (d,),
            f"{base}.ln2.gain": (d,), f"{base}.ln2.bias": (d,),
            f"{base}.attn.w_q": (d, d), f"{base}.attn.b_q": (d,),
            f"{base}.attn.w_k": (d, d), f"{base}.attn.b_k": (d,),
            f"{base}.attn.w_v": (d, d), f"{base}.attn.b_v": (d,),
            f"{base}.attn.w_o": (d, d), f"{base}.attn.b_o": (d,),
            f"{base}.mlp.w_in": (d, ff), f"{base}.mlp.b_in": (ff,),
            f"{base}.mlp.w_out": (ff, d), f"{base}.mlp.b_out": (d,),
        })
    return shapes


@dataclass
class ModelWeights:
    config: ModelConfig
    tensors: dict[str, Tensor]
    frozen: bool = False
    _frozen_hash: str | None = field(default=None, repr=False)

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def freeze(self) -> "ModelWeights":
        for t in self.tensors.values():
            t.requires_grad = False
            t._track = False
            t.values.setflags(write=False)
            t.grad = None
        self.frozen = True
        self._frozen_hash = self.weights_hash()
        return self

    def weights_hash(self) -> str:
        h = hashlib.sha256()
        for name in sorted(self.tensors):
            h.update(name.encode())
            h.update(self.tensors[name].values.tobytes())
        return h.hexdigest()

    def check_frozen_intact(self) -> None:
        if self.frozen and self.weights_hash() != self._frozen_hash:
            raise FrozenModelError("frozen model weights were modified")

    def trainable(self) -> list[tuple[str, Tensor]]:
        return [(n, t) for n, t in sorted(self.tensors.items()) if t.requires_grad]

    def embedding_std(self) -> float:
        return float(self.tensors["embedding.token"].values.std(dtype=np.float64))


def init_model(config: ModelConfig, seed: int) -> ModelWeights:
    """Weights ~ N(0, 0.02^2); layernorm gains 1, all biases 0. Deterministic."""
    config.validate()
    rng = np.random.default_rng(seed)
    tensors: dict[str, Tensor] = {}
    shapes = parameter_shapes(config)
    for name in parameter_names(config):
        shape = shapes[name]
        if name.endswith(".gain"):
            vals = np.ones(shape, dtype=np.float32)
        elif name.endswith((".bias", ".b_q", ".b_k", ".b_v", ".b_o", ".b_in", ".b_out")):
            vals = np.zeros(shape, dtype=np.float32)
        else:
            vals = rng.normal(0.0, 0.02, size=shape).astype(np.float32)
        tensors[name] = Tensor(vals, requires_grad=True)
    return ModelWeights(config=config, tensors=tensors)


# ---------------------------------------------------------------------------
# forward pass
# ---------------------------------------------------------------------------

_mask_cache: dict[int, np.ndarray] = {}


def _causal_mask(t: int) -> np.ndarray:
    cached = _mask_cache.get(t)
    if cached is None:
        cached = np.triu(np.full((t, t), -1e9, dtype=np.float32), k=1)
        cached.setflags(write=False)
        _mask_cache[t] = cached
    return cached


def _block(weights: ModelWeights, i: int, h: Tensor, mask: Tensor) -> Tensor:
    cfg = weights.config
    heads, dh = cfg.n_heads, cfg.head_dim
    base = f"transformer.layer.{i}"
    w = weights.tensors
    eps = cfg.layernorm_epsilon
    lead = h.shape[:-1]

    a = ad.layernorm(h, w[f"{base}.ln1.gain"], w[f"{base}.ln1.bias"], eps)
    q = ad.add_bias(ad.linear(a, w[f"{base}.attn.w_q"]), w[f"{base}.attn.b_q"])
    k = ad.add_bias(ad.linear(a, w[f"{base}.attn.w_k"]), w[f"{base}.attn.b_k"])
    v = ad.add_bias(ad.linear(a, w[f"{base}.attn.w_v"]), w[f"{base}.attn.b_v"])
    # [..., T, d] -> [..., H, T, dh]
    split = (*lead, heads, dh)
    axes = tuple(range(len(lead) - 1)) + (len(lead) - 1 + 1, len(lead) - 1, len(lead) + 1)
    q = ad.permute(ad.reshape(q, split), axes)
    k = ad.permute(ad.reshape(k, split), axes)
    v = ad.permute(ad.reshape(v, split), axes)
    rank = len(split)
    swap_last = tuple(range(rank - 2)) + (rank - 1, rank - 2)
    scores = ad.scale(ad.bmm(q, ad.permute(k, swap_last)), 1.0 / np.sqrt(dh))
    scores = ad.add(scores, mask)
    ctx = ad.bmm(ad.softmax_rows(scores), v)
    ctx = ad.reshape(ad.permute(ctx, axes), (*lead, cfg.d_model))
    attn_out = ad.add_bias(ad.linear(ctx, w[f"{base}.attn.w_o"]), w[f"{base}.attn.b_o"])
    h = ad.add(h, attn_out)

    b = ad.layernorm(h, w[f"{base}.ln2.gain"], w[f"{base}.ln2.bias"], eps)
    ff = ad.gelu(ad.add_bias(ad.linear(b, w[f"{base}.mlp.w_in"]), w[f"{base}.mlp.b_in"]))
    ff = ad.add_bias(ad.linear(ff, w[f"{base}.mlp.w_out"]), w[f"{base}.mlp.b_out"])
    return ad.add(h, ff)


def _logits_head(weights: ModelWeights, h: Tensor) -> Tensor:
    cfg = weights.config
    h = ad.layernorm(h, weights["ln_final.gain"], weights["ln_final.bias"], cfg.layernorm_epsilon)
    out = weights["embedding.token"] if cfg.tied_embeddings else weights["lm_head"]
    return ad.linear(h, ad.transpose2d(out))


def forward(
    weights: ModelWeights,
    tokens,
    prefix: Tensor | None = None,
    prefix_positions: bool = True,
) -> Tensor:
    """Logits [K+N, vocab] for the causal sequence prefix+tokens.

    Prediction for tokens[0] sits at row K-1 when a prefix is present; with
    no prefix the sequence must begin with BOS.
    """
    cfg = weights.config
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.ndim != 1:
        raise ModelError(f"tokens must be a 1-D id sequence, got shape {tokens.shape}")
    k = 0 if prefix is None else prefix.shape[0]
    n = len(tokens)
    if prefix is not None and prefix.shape[1] != cfg.d_model:
        raise ModelError(f"prefix width {prefix.shape[1]} does not match d_model {cfg.d_model}")
    if k + n > cfg.max_positions:
        raise ModelError(f"sequence of {k + n} exceeds max_positions {cfg.max_positions}")
    if k == 0 and (n == 0 or int(tokens[0]) != cfg.bos_id):
        raise ModelError("a sequence without a prefix must start with BOS")
    if tokens.size and (tokens.min() < 0 or tokens.max() >= cfg.vocab_size):
        raise ModelError(f"token id out of range for vocabulary of {cfg.vocab_size}")

    pos_table = weights["embedding.position"]
    if n:
        tok = ad.gather_rows(weights["embedding.token"], tokens)
        tok = ad.add(tok, ad.gather_rows(pos_table, np.arange(k, k + n)))
    if k:
        pre = prefix
        if prefix_positions:
            pre = ad.add(pre, ad.gather_rows(pos_table, np.arange(k)))
        h = ad.concat_rows(pre, tok) if n else pre
    else:
        h = tok
    t = k + n
    mask = Tensor(np.broadcast_to(_causal_mask(t), (cfg.n_heads, t, t)))
    for i in range(cfg.n_layers):
        h = _block(weights, i, h, mask)
    return _logits_head(weights, h)


def forward_batch(weights: ModelWeights, token_matrix: np.ndarray) -> Tensor:
    """Training-path forward over a [B, T] id batch (no prefix); logits [B, T, V]."""
    cfg = weights.config
    ids = np.asarray(token_matrix, dtype=np.int64)
    b, t = ids.shape
    if t > cfg.max_positions:
        raise ModelError(f"sequence of {t} exceeds max_positions {cfg.max_positions}")
    pos_ids = np.broadcast_to(np.arange(t), (b, t))
    h = ad.add(
        ad.gather_rows(weights["embedding.token"], ids),
        ad.gather_rows(weights["embedding.position"], pos_ids),
    )
    mask = Tensor(np.broadcast_to(_causal_mask(t), (b, cfg.n_heads, t, t)))
    for i in range(cfg.n_layers):
        h = _block(weights, i, h, mask)
    return _logits_head(weights, h)


def prediction_rows(
    weights: ModelWeights,
    tokens,
    prefix: Tensor | None = None,
    prefix_positions: bool = True,
) -> Tensor:
    """Logit rows aligned with the targets t_1..t_N.

    With a prefix these are rows K-1..K+N-2 of the prefixed forward; without
    one, rows 0..N-1 of the BOS-started forward.
    """
    tokens = np.asarray(tokens, dtype=np.int64)
    n = len(tokens)
    if n == 0:
        raise ModelError("empty target sequence")
    if prefix is None:
        ctx = np.concatenate(([weights.config.bos_id], tokens[:-1]))
        logits = forward(weights, ctx)
        return ad.slice_rows(logits, 0, n)
    logits = forward(weights, tokens[:-1] if n > 1 else np.empty(0, np.int64),
                     prefix=prefix, prefix_positions=prefix_positions)
    k = prefix.shape[0]
    return ad.slice_rows(logits, k - 1, k + n - 1)


def sequence_cross_entropy(
    weights: ModelWeights,
    tokens,
    prefix: Tensor | None = None,
    prefix_positions: bool = True,
) -> float:
    """Total bits to encode tokens under teacher forcing.

    The no-prefix baseline conditions on a BOS start.
    """
    tokens = np.asarray(tokens, dtype=np.int64)
    rows = prediction_rows(weights, tokens, prefix, prefix_positions)
    return float(ad.cross_entropy_bits(rows, tokens).values)


def greedy_decode(
    weights: ModelWeights,
    prefix: Tensor,
    length: int,
    prefix_positions: bool = True,
) -> np.ndarray:
    """Argmax decoding for ``length`` steps from the prefix; deterministic."""
    cfg = weights.config
    k = prefix.shape[0]
    if length + k > cfg.max_positions:
        raise ModelError(f"decode length {length} exceeds max_positions {cfg.max_positions} - {k}")
    out: list[int] = []
    for _ in range(length):
        logits = forward(weights, np.asarray(out, dtype=np.int64), prefix=prefix,
                         prefix_positions=prefix_positions)
        out.append(int(np.argmax(logits.values[k + len(out) - 1])))
    return np.asarray(out, dtype=np.int64)


# ---------------------------------------------------------------------------
# desk-scale pre-training
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 3000
    batch_size: int = 8
    window: int = 256
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.99
    weight_decay: float = 0.01
    adam_epsilon: float = 1e-8
    warmup_steps: int = 100
    final_lr_fraction: float = 0.1
    # fraction of windows that begin with BOS; the rest start mid-text so
    # early positions see varied content (prefix vectors will live there)
    bos_fraction: float = 0.5
    log_every: int = 50

    def lr_at(self, step: int) -> float:
        if step < self.warmup_steps:
            return self.learning_rate * (step + 1) / self.warmup_steps
        span = max(1, self.steps - self.warmup_steps)
        progress = (step - self.warmup_steps) / span
        floor = self.final_lr_fraction
        return self.learning_rate * (floor + (1 - floor) * 0.5 * (1 + np.cos(np.pi * progress)))


def train_lm(
    config: ModelConfig,
    corpus_ids: np.ndarray,
    train: TrainConfig,
    seed: int,
    progress=None,
) -> tuple[ModelWeights, list[tuple[int, float]]]:
    """Next-token training on random corpus windows; returns a frozen model
    and its loss curve as (step, mean bits per token) pairs."""
    corpus_ids = np.asarray(corpus_ids, dtype=np.int64)
    if len(corpus_ids) < train.window + 1:
        raise ModelError(
            f"corpus of {len(corpus_ids)} tokens is shorter than one {train.window}-token window"
        )
    weights = init_model(config, seed)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x7261696E]))
    params = weights.trainable()
    m1 = {n: np.zeros_like(t.values) for n, t in params}
    m2 = {n: np.zeros_like(t.values) for n, t in params}
    curve: list[tuple[int, float]] = []
    bos = config.bos_id
    for step in range(train.steps):
        starts = rng.integers(0, len(corpus_ids) - train.window - 1, size=train.batch_size)
        use_bos = rng.random(train.batch_size) < train.bos_fraction
        rows = []
        for s, with_bos in zip(starts, use_bos):
            if with_bos:
                rows.append(np.concatenate(([bos], corpus_ids[s : s + train.window])))
            else:
                rows.append(corpus_ids[s : s + train.window + 1])
        stacked = np.stack(rows)
        batch, windows = stacked[:, :-1], stacked[:, 1:]
        with ad.Tape() as tape:
            logits = forward_batch(weights, batch)
            flat = ad.reshape(logits, (train.batch_size * train.window, config.vocab_size))
            ce_bits = ad.cross_entropy_bits(flat, windows.reshape(-1))
            loss = ad.scale(ce_bits, LN2 / flat.shape[0])
        tape.backward(loss)
        lr = train.lr_at(step)
        for name, t in params:
            adamw_update(t.values, t.grad, m1[name], m2[name], step + 1, lr,
                         train.beta1, train.beta2, train.weight_decay, train.adam_epsilon)
            t.zero_grad()
        bits_per_token = float(ce_bits.values) / flat.shape[0]
        if step % train.log_every == 0 or step == train.steps - 1:
            curve.append((step, bits_per_token))
            if progress is not None:
                progress(step, bits_per_token)
    weights.freeze()
    return weights, curve
