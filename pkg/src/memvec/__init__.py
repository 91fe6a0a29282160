"""Compressing token sequences into trainable prefix vectors for a frozen LM.

The package bundles a minimal autodiff kernel, a micro decoder-only
transformer with its tokenizer and training loop, the per-text prefix-vector
compressor with its capacity metrics, baseline entropy coders, and geometry
analyses of the learned vectors, all runnable from one CLI.
"""

__version__ = "0.1.0"
