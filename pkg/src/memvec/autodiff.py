"""Dense float32 tensors with reverse-mode differentiation on an explicit tape.

The op set is exactly what a small decoder-only transformer needs: matrix
products, row-wise normalization and softmax, GELU, embedding gathers, shape
moves, and a bits-denominated cross-entropy. Values are float32; reductions
(layernorm statistics, softmax denominators, losses) accumulate in float64,
and scalar-valued reductions keep their float64 result so downstream checks
and finite-difference tests are not limited by a float32 round-off.

Recording is scoped: ops executed inside a ``with Tape() as tape:`` block
record adjoint closures for any tensor reachable from a ``requires_grad``
leaf. Outside a tape (or when no input tracks gradients) ops are plain numpy
and cost nothing extra. A tape and the tensors it records are confined to a
single worker; frozen tensors may be shared read-only.
"""

from __future__ import annotations

import ctypes
import os
import threading

import numpy as np

LOG2E = float(np.log2(np.e))


def tune_allocator() -> bool:
    """Raise glibc's mmap/trim thresholds so large per-step buffers are reused.

    Tape-based training keeps every intermediate alive until backward, which
    makes glibc hand big blocks straight to mmap and return them to the OS
    each step; the resulting page-fault churn more than doubles step time.
    No-op (returns False) off glibc or with MEMVEC_NO_MALLOC_TUNE set.
    """
    if os.environ.get("MEMVEC_NO_MALLOC_TUNE"):
        return False
    try:
        libc = ctypes.CDLL("libc.so.6")
        m_mmap_threshold, m_trim_threshold = -3, -1
        libc.mallopt(m_mmap_threshold, 512 * 1024 * 1024)
        libc.mallopt(m_trim_threshold, 512 * 1024 * 1024)
        return True
    except OSError:
        return False


tune_allocator()


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested op."""


class NumericsError(ArithmeticError):
    """An op produced NaN/Inf from finite inputs (overflow is an error)."""


class TapeError(RuntimeError):
    """Backward was asked for a loss the tape never produced."""


_finite_checks = True


def set_finite_checks(enabled: bool) -> None:
    """Globally enable/disable per-op output finiteness validation."""
    global _finite_checks
    _finite_checks = bool(enabled)


def _check_finite(arr: np.ndarray, op: str) -> None:
    if _finite_checks and not np.isfinite(arr).all():
        raise NumericsError(f"{op} produced non-finite values from finite inputs")


class Tensor:
    """A dense array with optional gradient buffer.

    ``requires_grad`` marks a leaf whose gradient should be materialized into
    ``.grad`` by ``backward``. Gradients accumulate (+=) across backward
    calls until ``zero_grad`` is called.
    """

    __slots__ = ("values", "requires_grad", "grad", "_track")

    def __init__(self, values, requires_grad: bool = False):
        arr = np.asarray(values)
        if arr.dtype != np.float32 and arr.ndim > 0:
            arr = arr.astype(np.float32)
        elif arr.ndim == 0 and arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.values = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._track = self.requires_grad

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def item(self) -> float:
        if self.values.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.shape}")
        return float(self.values)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, delta: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros(self.values.shape, dtype=np.float32)
        self.grad += delta

    def __repr__(self) -> str:
        flag = ", requires_grad" if self.requires_grad else ""
        return f"Tensor(shape={list(self.shape)}{flag})"


def tensor(values, requires_grad: bool = False) -> Tensor:
    return Tensor(values, requires_grad=requires_grad)


class _Op:
    """One recorded operation: output identity plus an adjoint closure."""

    __slots__ = ("inputs", "output", "backward_fn")

    def __init__(self, inputs, output, backward_fn):
        self.inputs = inputs
        self.output = output
        self.backward_fn = backward_fn


_tls = threading.local()


def _active_tape():
    return getattr(_tls, "tape", None)


class Tape:
    """Ordered record of differentiable ops, replayed backward in reverse.

    Use as a context manager; at most one tape is active per thread. Backward
    over an empty tape is a no-op.
    """

    def __init__(self):
        self.ops: list[_Op] = []
        self._outputs: set[int] = set()
        self._spent = False

    def __enter__(self) -> "Tape":
        if _active_tape() is not None:
            raise TapeError("a tape is already active on this thread")
        _tls.tape = self
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _tls.tape = None

    def record(self, inputs, output: Tensor, backward_fn) -> None:
        output._track = True
        self.ops.append(_Op(inputs, output, backward_fn))
        self._outputs.add(id(output))

    def backward(self, loss: Tensor) -> None:
        """Populate .grad on every requires_grad leaf reachable from loss.

        Single-shot: a tape may be replayed once (closures may reuse saved
        forward buffers in place).
        """
        if self._spent:
            raise TapeError("tape has already been replayed")
        self._spent = True
        if not self.ops:
            if loss._track:
                raise TapeError("loss tensor was not produced by this tape")
            return
        if id(loss) not in self._outputs:
            raise TapeError("loss tensor was not produced by this tape")
        if loss.values.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        # Adjoints are stored as (array, owned); closures may return views or
        # shared buffers, so accumulation copies on first reuse instead of
        # mutating an array it does not own.
        adjoints: dict[int, list] = {
            id(loss): [np.ones_like(loss.values, dtype=np.float64), True]
        }
        for op in reversed(self.ops):
            entry = adjoints.pop(id(op.output), None)
            if entry is None:
                continue
            grads = op.backward_fn(entry[0])
            for inp, g in zip(op.inputs, grads):
                if g is None or not inp._track:
                    continue
                prev = adjoints.get(id(inp))
                if prev is None:
                    adjoints[id(inp)] = [g, False]
                elif prev[1]:
                    prev[0] += g
                else:
                    adjoints[id(inp)] = [prev[0] + g, True]
        for op in self.ops:
            for inp in op.inputs:
                if inp.requires_grad and id(inp) in adjoints:
                    inp.accumulate_grad(adjoints.pop(id(inp))[0])


def backward(tape: Tape, loss: Tensor) -> None:
    tape.backward(loss)


def _maybe_record(inputs, output: Tensor, backward_fn) -> Tensor:
    tape = _active_tape()
    if tape is not None and any(t._track for t in inputs):
        tape.record(inputs, output, backward_fn)
    return output


# ---------------------------------------------------------------------------
# arithmetic
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Strict 2-D matrix product a[m,k] @ b[k,n]."""
    if a.values.ndim != 2 or b.values.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} vs {b.shape}")
    out = Tensor(a.values @ b.values)
    _check_finite(out.values, "matmul")

    def bwd(g):
        g = g.astype(np.float32, copy=False)
        ga = g @ b.values.T if a._track else None
        gb = a.values.T @ g if b._track else None
        return ga, gb

    return _maybe_record((a, b), out, bwd)


def linear(x: Tensor, w: Tensor) -> Tensor:
    """x[..., k] @ w[k, n]: one weight matrix applied to the last axis."""
    if w.values.ndim != 2:
        raise ShapeError(f"linear weight must be 2-D, got {w.shape}")
    if x.values.shape[-1] != w.shape[0]:
        raise ShapeError(f"linear dimensions disagree: {x.shape} vs {w.shape}")
    out = Tensor(x.values @ w.values)
    _check_finite(out.values, "linear")

    def bwd(g):
        g = g.astype(np.float32, copy=False)
        gx = g @ w.values.T if x._track else None
        gw = None
        if w._track:
            k = w.shape[0]
            gw = x.values.reshape(-1, k).T @ g.reshape(-1, w.shape[1])
        return gx, gw

    return _maybe_record((x, w), out, bwd)


def bmm(a: Tensor, b: Tensor) -> Tensor:
    """Stacked matrix product: leading (batch) dims must match exactly."""
    if a.values.ndim < 3 or a.values.ndim != b.values.ndim:
        raise ShapeError(f"bmm needs stacked operands of equal rank, got {a.shape} and {b.shape}")
    if a.shape[:-2] != b.shape[:-2] or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"bmm shapes disagree: {a.shape} vs {b.shape}")
    out = Tensor(a.values @ b.values)
    _check_finite(out.values, "bmm")

    def bwd(g):
        g = g.astype(np.float32, copy=False)
        ga = g @ np.swapaxes(b.values, -1, -2) if a._track else None
        gb = np.swapaxes(a.values, -1, -2) @ g if b._track else None
        return ga, gb

    return _maybe_record((a, b), out, bwd)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; shapes must match exactly (no silent broadcasting)."""
    if a.shape != b.shape:
        raise ShapeError(f"add shapes disagree: {a.shape} vs {b.shape}")
    out = Tensor(a.values + b.values)
    _check_finite(out.values, "add")
    return _maybe_record((a, b), out, lambda g: (g, g))


def add_bias(x: Tensor, bias: Tensor) -> Tensor:
    """x[..., d] + bias[d]: the one permitted broadcast, over the last axis."""
    if bias.values.ndim != 1 or x.values.shape[-1] != bias.shape[0]:
        raise ShapeError(f"add_bias shapes disagree: {x.shape} vs {bias.shape}")
    out = Tensor(x.values + bias.values)
    _check_finite(out.values, "add_bias")

    def bwd(g):
        gb = g.reshape(-1, bias.shape[0]).sum(axis=0, dtype=np.float64) if bias._track else None
        return (g if x._track else None), gb

    return _maybe_record((x, bias), out, bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise (Hadamard) product of same-shape tensors."""
    if a.shape != b.shape:
        raise ShapeError(f"mul shapes disagree: {a.shape} vs {b.shape}")
    out = Tensor(a.values * b.values)
    _check_finite(out.values, "mul")

    def bwd(g):
        ga = g * b.values if a._track else None
        gb = g * a.values if b._track else None
        return ga, gb

    return _maybe_record((a, b), out, bwd)


def scale(x: Tensor, c: float) -> Tensor:
    """Multiply by a python scalar constant."""
    out = Tensor(x.values * np.float32(c) if x.values.ndim else x.values * c)
    _check_finite(out.values, "scale")
    return _maybe_record((x,), out, lambda g: (g * c,))


# ---------------------------------------------------------------------------
# structure
# ---------------------------------------------------------------------------


def gather_rows(table: Tensor, ids: np.ndarray) -> Tensor:
    """Select rows of table[v, d] by integer ids; backward scatter-adds."""
    ids = np.asarray(ids)
    if table.values.ndim != 2:
        raise ShapeError(f"gather_rows table must be 2-D, got {table.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ShapeError(f"gather_rows id out of range for table with {table.shape[0]} rows")
    out = Tensor(table.values[ids])

    def bwd(g):
        # sort + reduceat: much faster than np.add.at for thousands of rows
        flat_ids = ids.reshape(-1)
        rows = g.reshape(-1, table.shape[1]).astype(np.float32, copy=False)
        order = np.argsort(flat_ids, kind="stable")
        sorted_ids = flat_ids[order]
        starts = np.flatnonzero(np.concatenate(([True], sorted_ids[1:] != sorted_ids[:-1])))
        gt = np.zeros(table.values.shape, dtype=np.float32)
        gt[sorted_ids[starts]] = np.add.reduceat(rows[order], starts, axis=0)
        return (gt,)

    return _maybe_record((table,), out, bwd)


def concat_rows(a: Tensor, b: Tensor) -> Tensor:
    """Stack two 2-D tensors along axis 0."""
    if a.values.ndim != 2 or b.values.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ShapeError(f"concat_rows shapes disagree: {a.shape} vs {b.shape}")
    out = Tensor(np.concatenate([a.values, b.values], axis=0))
    na = a.shape[0]

    def bwd(g):
        return (g[:na] if a._track else None), (g[na:] if b._track else None)

    return _maybe_record((a, b), out, bwd)


def slice_rows(x: Tensor, start: int, stop: int) -> Tensor:
    """Contiguous row slice of a 2-D tensor; backward zero-pads."""
    if x.values.ndim != 2:
        raise ShapeError(f"slice_rows needs a 2-D tensor, got {x.shape}")
    if not (0 <= start <= stop <= x.shape[0]):
        raise ShapeError(f"slice_rows [{start}:{stop}] out of range for {x.shape}")
    out = Tensor(x.values[start:stop])

    def bwd(g):
        gx = np.zeros(x.values.shape, dtype=np.float32)
        gx[start:stop] = g
        return (gx,)

    return _maybe_record((x,), out, bwd)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = Tensor(x.values.reshape(shape))
    orig = x.values.shape
    return _maybe_record((x,), out, lambda g: (g.reshape(orig),))


def permute(x: Tensor, axes: tuple[int, ...]) -> Tensor:
    out = Tensor(np.ascontiguousarray(x.values.transpose(axes)))
    inv = np.argsort(axes)
    return _maybe_record((x,), out, lambda g: (g.transpose(inv),))


def transpose2d(x: Tensor) -> Tensor:
    if x.values.ndim != 2:
        raise ShapeError(f"transpose2d needs a 2-D tensor, got {x.shape}")
    out = Tensor(x.values.T)
    return _maybe_record((x,), out, lambda g: (g.T,))


# ---------------------------------------------------------------------------
# nonlinearities and losses
# ---------------------------------------------------------------------------


def layernorm(x: Tensor, gain: Tensor, bias: Tensor, epsilon: float) -> Tensor:
    """Zero-mean unit-variance normalization over the last axis, then affine."""
    d = x.values.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(f"layernorm affine shapes {gain.shape}/{bias.shape} do not match feature dim {d}")
    if epsilon <= 0:
        raise ValueError("layernorm epsilon must be positive")
    # statistics accumulate in float64 without materializing float64 arrays
    mean = x.values.mean(axis=-1, keepdims=True, dtype=np.float64).astype(np.float32)
    centered = x.values - mean
    var = np.square(centered).mean(axis=-1, keepdims=True, dtype=np.float64)
    inv_std = (1.0 / np.sqrt(var + epsilon)).astype(np.float32)
    norm = centered * inv_std
    out = Tensor(norm * gain.values + bias.values)
    _check_finite(out.values, "layernorm")

    def bwd(g):
        g = g.astype(np.float32, copy=False)
        g_norm = g * gain.values
        gg = (g * norm).reshape(-1, d).sum(axis=0, dtype=np.float64) if gain._track else None
        gb = g.reshape(-1, d).sum(axis=0, dtype=np.float64) if bias._track else None
        gx = None
        if x._track:
            m1 = g_norm.mean(axis=-1, keepdims=True, dtype=np.float64).astype(np.float32)
            m2 = (g_norm * norm).mean(axis=-1, keepdims=True, dtype=np.float64).astype(np.float32)
            gx = inv_std * (g_norm - m1 - norm * m2)
        return gx, gg, gb

    return _maybe_record((x, gain, bias), out, bwd)


def softmax_rows(x: Tensor) -> Tensor:
    """Row-stabilized softmax over the last axis; rows sum to 1 within 1e-6."""
    m = x.values.max(axis=-1, keepdims=True)
    e = x.values - m
    np.exp(e, out=e)
    s = e.sum(axis=-1, keepdims=True, dtype=np.float64)
    out_vals = e
    out_vals /= s.astype(np.float32)
    out = Tensor(out_vals)
    _check_finite(out.values, "softmax_rows")

    def bwd(g):
        g = g.astype(np.float32, copy=False)
        dot = (g * out_vals).sum(axis=-1, keepdims=True, dtype=np.float64).astype(np.float32)
        gx = g - dot
        gx *= out_vals
        return (gx,)

    return _maybe_record((x,), out, bwd)


_GELU_C = np.float32(np.sqrt(2.0 / np.pi))


def gelu(x: Tensor) -> Tensor:
    """Tanh-form GELU."""
    v = x.values
    inner = v * v
    inner *= np.float32(0.044715)
    inner += 1.0
    inner *= v
    inner *= _GELU_C
    t = np.tanh(inner, out=inner)
    vals = t + 1.0
    vals *= v
    vals *= np.float32(0.5)
    out = Tensor(vals)
    _check_finite(out.values, "gelu")

    def bwd(g):
        u = v * v
        u *= np.float32(3 * 0.044715)
        u += 1.0
        u *= _GELU_C
        u *= 1.0 - t * t
        u *= v
        u += 1.0 + t
        u *= np.float32(0.5)
        u *= g.astype(np.float32, copy=False)
        return (u,)

    return _maybe_record((x,), out, bwd)


def cross_entropy_bits(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Total next-token cross-entropy in bits, summed over positions.

    logits[t, v] scores position t; targets[t] must be a valid class id.
    Differentiable w.r.t. logits; the scalar keeps float64 precision.
    """
    if logits.values.ndim != 2:
        raise ShapeError(f"cross_entropy_bits needs 2-D logits, got {logits.shape}")
    targets = np.asarray(targets, dtype=np.int64)
    t_count, vocab = logits.shape
    if targets.shape != (t_count,):
        raise ShapeError(f"targets shape {targets.shape} does not match {t_count} logit rows")
    if targets.size and (targets.min() < 0 or targets.max() >= vocab):
        raise ValueError(f"target id out of range for vocabulary of {vocab}")
    rows = np.arange(t_count)
    m = logits.values.max(axis=-1)
    target_logit = logits.values[rows, targets]
    e = logits.values - m[:, None]
    np.exp(e, out=e)
    s = e.sum(axis=-1, dtype=np.float64)
    log_probs_t = (target_logit - m).astype(np.float64) - np.log(s)
    total_nats = -log_probs_t.sum()
    out = Tensor(np.float64(total_nats * LOG2E))
    _check_finite(out.values, "cross_entropy_bits")
    probs = e
    probs /= s.astype(np.float32)[:, None]

    def bwd(g):
        # mutates the saved buffer; tapes replay at most once
        probs[rows, targets] -= 1.0
        np.multiply(probs, np.float32(float(g) * LOG2E), out=probs)
        return (probs,)

    return _maybe_record((logits,), out, bwd)


def sum_all(x: Tensor) -> Tensor:
    """Sum of all elements, accumulated and kept in float64."""
    out = Tensor(np.float64(x.values.sum(dtype=np.float64)))

    def bwd(g):
        return (np.full(x.values.shape, float(g), dtype=np.float32),)

    return _maybe_record((x,), out, bwd)
