"""Disentangled slot memory.

The memory holds n independent blocks, one per semantic category, with m
slots of c values each. A block is only ever addressed with queries and
values of its own category, so nothing a block stores can leak into
another category's readout.

Updating: the slot most cosine-similar to the query moves toward the
observed value by an exponential moving average with decay rate alpha.
Reading: the initialized slots of the block contribute, weighted by the
softmax of their cosine similarity to the query; slots never written
carry only initialization noise and are excluded so they cannot dilute
the readout. An invalid query row (its semantic region was empty) and a
block with no initialized slot both read with uniform weights over all
slots, i.e. the block mean - the memory's prior for that semantic.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError, FormatError
from .regions import LatentMatrix
from .tensor import STORAGE_DTYPE

_MAGIC = b"MDM1"
_ZERO_NORM = 1e-12


@dataclass(frozen=True)
class MemoryState:
    """n x m x c slot bank with EMA decay rate and per-slot init flags."""

    slots: np.ndarray
    alpha: float
    initialized: np.ndarray

    def __post_init__(self):
        slots = np.asarray(self.slots, dtype=STORAGE_DTYPE)
        flags = np.asarray(self.initialized, dtype=bool)
        if slots.ndim != 3 or slots.size == 0:
            raise ContractViolationError("slots must be a non-empty (n, m, c) array")
        if not 0.0 <= self.alpha <= 1.0:
            raise ContractViolationError(f"alpha must lie in [0, 1], got {self.alpha}")
        if flags.shape != slots.shape[:2]:
            raise ContractViolationError("initialized flags must be shaped (n, m)")
        if not np.all(np.isfinite(slots)):
            raise ContractViolationError("slots contain non-finite values")
        object.__setattr__(self, "slots", slots)
        object.__setattr__(self, "initialized", flags)

    @property
    def n(self) -> int:
        return self.slots.shape[0]

    @property
    def m(self) -> int:
        return self.slots.shape[1]

    @property
    def c(self) -> int:
        return self.slots.shape[2]


@dataclass(frozen=True)
class ReadResult:
    q_hat: LatentMatrix
    scores: np.ndarray  # (n, m), rows sum to 1
    best_slot: np.ndarray  # (n,) argmax score per semantic


def init_memory(n: int, m: int, c: int, alpha: float, seed: int) -> MemoryState:
    """Fresh memory with slots i.i.d. uniform in [-0.05, 0.05]."""
    if n < 1 or m < 1 or c < 1:
        raise ContractViolationError("n, m, c must all be positive")
    if not 0.0 <= alpha <= 1.0:
        raise ContractViolationError(f"alpha must lie in [0, 1], got {alpha}")
    rng = np.random.default_rng(int(seed))
    slots = rng.uniform(-0.05, 0.05, size=(n, m, c)).astype(STORAGE_DTYPE)
    return MemoryState(slots, float(alpha), np.zeros((n, m), dtype=bool))


def cosine_similarity(e, q) -> float:
    """Cosine of two vectors; 0 if either norm is below 1e-12."""
    e = np.asarray(e, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    ne = np.linalg.norm(e)
    nq = np.linalg.norm(q)
    if ne < _ZERO_NORM or nq < _ZERO_NORM:
        return 0.0
    return float(np.dot(e, q) / (ne * nq))


def _block_similarities(block: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Cosine similarity of every slot in one block against one query."""
    block = block.astype(np.float64)
    query = query.astype(np.float64)
    nq = np.linalg.norm(query)
    norms = np.linalg.norm(block, axis=1)
    sims = np.zeros(block.shape[0], dtype=np.float64)
    if nq < _ZERO_NORM:
        return sims
    ok = norms >= _ZERO_NORM
    sims[ok] = block[ok] @ query / (norms[ok] * nq)
    return sims


def _check_latents(mem: MemoryState, lat: LatentMatrix, what: str) -> None:
    if lat.n != mem.n or lat.c != mem.c:
        raise ContractViolationError(
            f"{what} shape ({lat.n}, {lat.c}) does not match memory ({mem.n}, {mem.c})"
        )


def update_memory(mem: MemoryState, q: LatentMatrix, v: LatentMatrix) -> MemoryState:
    """EMA-update one slot per semantic block; returns the new state.

    For each semantic i where both q and v rows are valid, the slot most
    similar to q[i] (ties to the lowest index) moves to
    alpha*slot + (1-alpha)*v[i]. Rows with an invalid query or value leave
    their block untouched.
    """
    _check_latents(mem, q, "query matrix")
    _check_latents(mem, v, "value matrix")
    slots = mem.slots.copy()
    flags = mem.initialized.copy()
    a = float(mem.alpha)
    for i in range(mem.n):
        if not (q.valid[i] and v.valid[i]):
            continue
        sims = _block_similarities(slots[i], q.data[i])
        k = int(np.argmax(sims))  # first maximum wins ties
        updated = a * slots[i, k].astype(np.float64) + (1.0 - a) * v.data[i].astype(np.float64)
        slots[i, k] = updated.astype(STORAGE_DTYPE)
        flags[i, k] = True
    return MemoryState(slots, a, flags)


def read_memory(mem: MemoryState, q: LatentMatrix) -> ReadResult:
    """Soft-score readout per semantic block; never mutates the state.

    Valid queries softmax over the block's initialized slots (uninitialized
    slots score exactly 0); invalid queries and never-written blocks read
    uniformly, yielding the block mean.
    """
    _check_latents(mem, q, "query matrix")
    scores = np.zeros((mem.n, mem.m), dtype=STORAGE_DTYPE)
    q_hat = np.zeros((mem.n, mem.c), dtype=STORAGE_DTYPE)
    best = np.zeros(mem.n, dtype=np.int64)
    for i in range(mem.n):
        block = mem.slots[i].astype(np.float64)
        written = mem.initialized[i]
        weights = np.zeros(mem.m, dtype=np.float64)
        if q.valid[i] and written.any():
            sims = _block_similarities(mem.slots[i][written], q.data[i])
            shifted = np.exp(sims - sims.max())
            weights[written] = shifted / shifted.sum()
        else:
            weights[:] = 1.0 / mem.m
        scores[i] = weights.astype(STORAGE_DTYPE)
        q_hat[i] = (weights @ block).astype(STORAGE_DTYPE)
        best[i] = int(np.argmax(weights))
    return ReadResult(
        q_hat=LatentMatrix(q_hat, np.ones(mem.n, dtype=bool)),
        scores=scores,
        best_slot=best,
    )


def save_memory(path, mem: MemoryState) -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIIf", mem.n, mem.m, mem.c, mem.alpha))
        fh.write(mem.initialized.astype(np.uint8).tobytes())
        fh.write(mem.slots.astype("<f4").tobytes())


def load_memory(path) -> MemoryState:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4 or raw[:4] != _MAGIC:
        raise FormatError(f"bad magic {raw[:4]!r}, expected {_MAGIC!r}", offset=0)
    if len(raw) < 20:
        raise FormatError("truncated header", offset=len(raw))
    n, m, c, alpha = struct.unpack_from("<IIIf", raw, 4)
    if n == 0 or m == 0 or c == 0:
        raise FormatError(f"zero dimension in header ({n}, {m}, {c})", offset=4)
    flags_end = 20 + n * m
    expected = flags_end + 4 * n * m * c
    if len(raw) != expected:
        raise FormatError(
            f"payload length mismatch: file has {len(raw)} bytes, expected {expected}",
            offset=min(len(raw), expected),
        )
    flag_bytes = np.frombuffer(raw, dtype=np.uint8, count=n * m, offset=20)
    if not np.all(np.isin(flag_bytes, (0, 1))):
        raise FormatError("initialized flags must be 0 or 1", offset=20)
    flags = flag_bytes.reshape(n, m).astype(bool)
    slots = np.frombuffer(raw, dtype="<f4", offset=flags_end).reshape(n, m, c)
    if not 0.0 <= alpha <= 1.0 or not np.isfinite(alpha):
        raise FormatError(f"alpha {alpha} outside [0, 1]", offset=16)
    return MemoryState(slots.astype(STORAGE_DTYPE), float(alpha), flags)
