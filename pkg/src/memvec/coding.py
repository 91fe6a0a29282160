"""Baseline lossless coders: canonical Huffman over bytes, integer arithmetic
coding driven by the LM's next-token distributions, and adapters for external
byte compressors.

Bitstream framing for the LM coder: a little-endian uint64 token count, a
uint64 model-weight hash, then the arithmetic payload; decode is
self-validating against the model it is given.
"""

from __future__ import annotations

import heapq
import shutil
import struct
import subprocess
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .model import ModelWeights, forward
from .autodiff import Tensor


class CodingError(ValueError):
    pass


# ---------------------------------------------------------------------------
# bit io
# ---------------------------------------------------------------------------


class BitWriter:
    def __init__(self):
        self.bits: list[int] = []

    def write(self, bit: int) -> None:
        self.bits.append(bit & 1)

    def write_many(self, bits) -> None:
        self.bits.extend(b & 1 for b in bits)

    def __len__(self) -> int:
        return len(self.bits)

    def to_bytes(self) -> bytes:
        out = bytearray()
        acc = 0
        for i, b in enumerate(self.bits):
            acc = (acc << 1) | b
            if i % 8 == 7:
                out.append(acc)
                acc = 0
        tail = len(self.bits) % 8
        if tail:
            out.append(acc << (8 - tail))
        return bytes(out)


class BitReader:
    """Reads bits; past the end it yields zeros (arithmetic decode tolerates
    padding, Huffman decode treats it as exhaustion)."""

    def __init__(self, data: bytes | list[int], nbits: int | None = None):
        if isinstance(data, (bytes, bytearray)):
            self.bits = [(byte >> (7 - i)) & 1 for byte in data for i in range(8)]
        else:
            self.bits = list(data)
        if nbits is not None:
            self.bits = self.bits[:nbits]
        self.pos = 0

    def read(self) -> int:
        if self.pos >= len(self.bits):
            self.pos += 1
            return 0
        b = self.bits[self.pos]
        self.pos += 1
        return b

    @property
    def exhausted(self) -> bool:
        return self.pos > len(self.bits)


# ---------------------------------------------------------------------------
# canonical Huffman over bytes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HuffmanTable:
    """Canonical code: lengths per present symbol; codes assigned shortest
    first, ties by symbol value."""

    lengths: dict[int, int]

    def codes(self) -> dict[int, tuple[int, int]]:
        """symbol -> (code value, length), canonical order."""
        ordered = sorted(self.lengths.items(), key=lambda kv: (kv[1], kv[0]))
        codes: dict[int, tuple[int, int]] = {}
        code = 0
        prev_len = 0
        for sym, length in ordered:
            code <<= length - prev_len
            codes[sym] = (code, length)
            code += 1
            prev_len = length
        return codes

    def kraft_sum(self) -> float:
        return sum(2.0 ** -l for l in self.lengths.values())


def huffman_code_lengths(freqs: dict[int, int]) -> dict[int, int]:
    """Optimal prefix-code lengths via the standard heap construction.
    A single distinct symbol gets a 1-bit code by convention."""
    if not freqs:
        raise CodingError("cannot build a Huffman code for empty input")
    if len(freqs) == 1:
        return {next(iter(freqs)): 1}
    heap = [(f, sym, (sym,)) for sym, f in sorted(freqs.items())]
    heapq.heapify(heap)
    depths = {sym: 0 for sym in freqs}
    while len(heap) > 1:
        fa, _, syms_a = heapq.heappop(heap)
        fb, _, syms_b = heapq.heappop(heap)
        for s in syms_a + syms_b:
            depths[s] += 1
        heapq.heappush(heap, (fa + fb, min(syms_a[0], syms_b[0]), syms_a + syms_b))
    return depths


def huffman_encode(data: bytes) -> tuple[HuffmanTable, list[int]]:
    """Returns the canonical table and the payload bitstream."""
    if not data:
        raise CodingError("cannot Huffman-encode empty input")
    table = HuffmanTable(lengths=huffman_code_lengths(Counter(data)))
    codes = table.codes()
    writer = BitWriter()
    for byte in data:
        code, length = codes[byte]
        writer.write_many((code >> (length - 1 - i)) & 1 for i in range(length))
    return table, writer.bits


def huffman_decode(table: HuffmanTable, bits: list[int], n: int) -> bytes:
    codes = table.codes()
    by_code = {(code, length): sym for sym, (code, length) in codes.items()}
    max_len = max(l for _, l in codes.values())
    reader = BitReader(bits)
    out = bytearray()
    for _ in range(n):
        code = 0
        length = 0
        while True:
            code = (code << 1) | reader.read()
            length += 1
            if reader.exhausted:
                raise CodingError("bitstream exhausted before decoding finished")
            sym = by_code.get((code, length))
            if sym is not None:
                out.append(sym)
                break
            if length > max_len:
                raise CodingError("invalid prefix code in bitstream")
    return bytes(out)


def huffman_table_bits(table: HuffmanTable) -> int:
    """Header cost: 256 x 5-bit canonical code lengths (0 = absent)."""
    return 256 * 5


# ---------------------------------------------------------------------------
# integer arithmetic coder (range coder with underflow handling)
# ---------------------------------------------------------------------------

_STATE_BITS = 32
_FULL = 1 << _STATE_BITS
_HALF = _FULL >> 1
_QUARTER = _FULL >> 2
_MASK = _FULL - 1

DEFAULT_QUANT_SCALE = 1 << 18


@dataclass
class ArithCoderState:
    low: int = 0
    high: int = _MASK
    pending: int = 0
    scale: int = DEFAULT_QUANT_SCALE


class ArithmeticEncoder:
    def __init__(self, writer: BitWriter, scale: int = DEFAULT_QUANT_SCALE):
        self.state = ArithCoderState(scale=scale)
        self.writer = writer

    def _emit(self, bit: int) -> None:
        self.writer.write(bit)
        for _ in range(self.state.pending):
            self.writer.write(bit ^ 1)
        self.state.pending = 0

    def encode(self, cum_lo: int, cum_hi: int, total: int) -> None:
        s = self.state
        if not (0 <= cum_lo < cum_hi <= total):
            raise CodingError("invalid cumulative frequency range")
        span = s.high - s.low + 1
        s.high = s.low + span * cum_hi // total - 1
        s.low = s.low + span * cum_lo // total
        while True:
            if s.high < _HALF:
                self._emit(0)
            elif s.low >= _HALF:
                self._emit(1)
                s.low -= _HALF
                s.high -= _HALF
            elif s.low >= _QUARTER and s.high < 3 * _QUARTER:
                s.pending += 1
                s.low -= _QUARTER
                s.high -= _QUARTER
            else:
                break
            s.low = (s.low << 1) & _MASK
            s.high = ((s.high << 1) | 1) & _MASK

    def finish(self) -> None:
        # one disambiguating bit (plus pendings) pins the final interval
        self.state.pending += 1
        self._emit(0 if self.state.low < _QUARTER else 1)


class ArithmeticDecoder:
    def __init__(self, reader: BitReader, scale: int = DEFAULT_QUANT_SCALE):
        self.state = ArithCoderState(scale=scale)
        self.reader = reader
        self.code = 0
        for _ in range(_STATE_BITS):
            self.code = (self.code << 1) | reader.read()

    def decode_target(self, total: int) -> int:
        s = self.state
        span = s.high - s.low + 1
        return ((self.code - s.low + 1) * total - 1) // span

    def consume(self, cum_lo: int, cum_hi: int, total: int) -> None:
        s = self.state
        span = s.high - s.low + 1
        s.high = s.low + span * cum_hi // total - 1
        s.low = s.low + span * cum_lo // total
        while True:
            if s.high < _HALF:
                pass
            elif s.low >= _HALF:
                s.low -= _HALF
                s.high -= _HALF
                self.code -= _HALF
            elif s.low >= _QUARTER and s.high < 3 * _QUARTER:
                s.low -= _QUARTER
                s.high -= _QUARTER
                self.code -= _QUARTER
            else:
                break
            s.low = (s.low << 1) & _MASK
            s.high = ((s.high << 1) | 1) & _MASK
            self.code = ((self.code << 1) | self.reader.read()) & _MASK


def quantize_distribution(probs: np.ndarray, scale: int) -> np.ndarray:
    """Integer frequencies summing exactly to ``scale`` with every symbol >= 1.

    Floor of p*(scale - V) plus one each, remainder distributed to the
    largest fractional parts (ties by symbol id)."""
    v = len(probs)
    if scale <= v:
        raise CodingError(f"quantization scale {scale} must exceed the vocabulary {v}")
    budget = scale - v
    exact = probs.astype(np.float64) * budget
    freqs = np.floor(exact).astype(np.int64) + 1
    remainder = scale - int(freqs.sum())
    if remainder > 0:
        frac = exact - np.floor(exact)
        # argsort ascending on (-frac, index): largest fractions first, ties by id
        order = np.lexsort((np.arange(v), -frac))
        freqs[order[:remainder]] += 1
    elif remainder < 0:
        raise CodingError("quantization overflow")
    return freqs


def _weight_hash64(model: ModelWeights) -> int:
    return int.from_bytes(bytes.fromhex(model.weights_hash()[:16]), "little")


def _next_token_probs(model: ModelWeights, context: np.ndarray) -> np.ndarray:
    logits = forward(model, context).values[-1]
    m = logits.max()
    e = np.exp((logits - m).astype(np.float64))
    return e / e.sum()


def lm_arith_encode(model: ModelWeights, tokens, scale: int = DEFAULT_QUANT_SCALE) -> bytes:
    """Framed bitstream: uint64 token count, uint64 weight hash, payload."""
    tokens = np.asarray(tokens, dtype=np.int64)
    bos = model.config.bos_id
    writer = BitWriter()
    encoder = ArithmeticEncoder(writer, scale=scale)
    context = [bos]
    for t in tokens:
        freqs = quantize_distribution(_next_token_probs(model, np.asarray(context)), scale)
        cum = np.concatenate(([0], np.cumsum(freqs)))
        encoder.encode(int(cum[t]), int(cum[t + 1]), scale)
        context.append(int(t))
    encoder.finish()
    payload = writer.to_bytes()
    frame = struct.pack("<QQQ", len(tokens), _weight_hash64(model), len(writer))
    return frame + payload


def lm_arith_decode(model: ModelWeights, stream: bytes, scale: int = DEFAULT_QUANT_SCALE) -> np.ndarray:
    if len(stream) < 24:
        raise CodingError("bitstream shorter than its frame header")
    n, whash, nbits = struct.unpack("<QQQ", stream[:24])
    if whash != _weight_hash64(model):
        raise CodingError("bitstream was encoded with a different model")
    if len(stream) - 24 < (nbits + 7) // 8:
        raise CodingError("bitstream underrun: payload shorter than the frame declares")
    reader = BitReader(stream[24:], nbits=nbits)
    decoder = ArithmeticDecoder(reader, scale=scale)
    bos = model.config.bos_id
    context = [bos]
    out = []
    for _ in range(n):
        freqs = quantize_distribution(_next_token_probs(model, np.asarray(context)), scale)
        cum = np.concatenate(([0], np.cumsum(freqs)))
        target = decoder.decode_target(scale)
        sym = int(np.searchsorted(cum, target, side="right") - 1)
        decoder.consume(int(cum[sym]), int(cum[sym + 1]), scale)
        out.append(sym)
        context.append(sym)
    return np.asarray(out, dtype=np.int64)


def lm_arith_payload_bits(stream: bytes) -> int:
    (_, _, nbits) = struct.unpack("<QQQ", stream[:24])
    return int(nbits)


# ---------------------------------------------------------------------------
# ratios and external codecs
# ---------------------------------------------------------------------------


def compression_ratio(original_bits: float, compressed_bits: float) -> float:
    if compressed_bits <= 0:
        raise CodingError("compressed size must be positive")
    return original_bits / compressed_bits


def external_codec_bench(texts: list[str], commands: dict[str, list[str]]) -> dict[str, dict]:
    """Run external byte compressors over texts; a missing command marks its
    row unavailable instead of failing."""
    table: dict[str, dict] = {}
    for name, argv in commands.items():
        if not argv or shutil.which(argv[0]) is None:
            table[name] = {"available": False, "ratios": []}
            continue
        ratios = []
        ok = True
        for text in texts:
            raw = text.encode("utf-8")
            try:
                proc = subprocess.run(argv, input=raw, stdout=subprocess.PIPE,
                                      stderr=subprocess.DEVNULL, check=True)
            except (subprocess.CalledProcessError, OSError):
                ok = False
                break
            ratios.append(compression_ratio(8 * len(raw), 8 * max(1, len(proc.stdout))))
        if not ok:
            table[name] = {"available": False, "ratios": []}
            continue
        arr = np.asarray(ratios)
        table[name] = {
            "available": True,
            "ratios": ratios,
            "mean": float(arr.mean()),
            "std": float(arr.std()),
        }
    return table


DEFAULT_EXTERNAL_CODECS = {
    "gzip": ["gzip", "-c", "-9"],
    "bzip2": ["bzip2", "-c", "-9"],
    "xz": ["xz", "-c", "-9"],
}
