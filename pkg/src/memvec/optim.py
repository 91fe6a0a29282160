"""AdamW with decoupled weight decay, shared by the compressor and LM training.

Decay is applied to the parameter before the Adam update; bias-corrected
moments; epsilon sits inside the square-root denominator's sum, i.e. the
update is m_hat / (sqrt(v_hat) + eps).
"""

from __future__ import annotations

import numpy as np


class OptimizerError(ArithmeticError):
    """Optimization cannot continue (non-finite gradient)."""


def adamw_update(
    param: np.ndarray,
    grad: np.ndarray,
    moment1: np.ndarray,
    moment2: np.ndarray,
    step: int,
    lr: float,
    beta1: float,
    beta2: float,
    weight_decay: float,
    epsilon: float,
) -> None:
    """One in-place AdamW step; ``step`` is the 1-based step number."""
    if not np.isfinite(grad).all():
        raise OptimizerError(
            f"non-finite gradient at step {step}: "
            f"{int(np.size(grad) - np.isfinite(grad).sum())} bad entries of {grad.size}"
        )
    if weight_decay:
        param *= np.float32(1.0 - lr * weight_decay)
    moment1 *= beta1
    moment1 += (1.0 - beta1) * grad
    moment2 *= beta2
    moment2 += (1.0 - beta2) * np.square(grad)
    m_hat = moment1 / (1.0 - beta1**step)
    v_hat = moment2 / (1.0 - beta2**step)
    param -= (lr * m_hat / (np.sqrt(v_hat) + epsilon)).astype(np.float32)
