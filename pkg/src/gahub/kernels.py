"""Hot numeric kernels for the bitstring GA.

Two interchangeable implementations of each kernel: a numba @njit version and
a pure-numpy version. Both consume the *same* pre-drawn random arrays, so for
identical inputs they produce bit-identical outputs; the active backend is
chosen at import time via the GAHUB_BACKEND environment variable
("numba", "numpy", or "auto"/unset = numba when importable).
"""

from __future__ import annotations

import os

import numpy as np

_ENV_VAR = "GAHUB_BACKEND"

try:
    from numba import njit

    _NUMBA_OK = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _NUMBA_OK = False


def fitness_batch_numpy(bits: np.ndarray, block_size: int, block_reward: float) -> np.ndarray:
    """Blockwise all-ones fitness for each row of a (n, length) 0/1 array."""
    n, length = bits.shape
    blocks = bits.reshape(n, length // block_size, block_size)
    return blocks.all(axis=2).sum(axis=1) * float(block_reward)


def breed_batch_numpy(
    bits: np.ndarray,
    cumw: np.ndarray,
    crossover_priority: float,
    mutate_crossed: bool,
    per_bit_rate: float,
    u_op: np.ndarray,
    u_par: np.ndarray,
    cuts: np.ndarray,
    u_mut: np.ndarray,
) -> np.ndarray:
    """Produce k offspring rows from a fitness-sorted (best-first) population.

    Offspring i is one-point crossover of two rank-selected parents when
    u_op[i] < crossover_priority, otherwise a per-bit mutant of one
    rank-selected parent. cumw is the cumulative linear-rank weight vector;
    all randomness comes in as arrays so numba/numpy paths match exactly.
    """
    k, length = u_mut.shape
    total = cumw[-1]
    pa = np.searchsorted(cumw, u_par[:, 0] * total, side="right")
    pb = np.searchsorted(cumw, u_par[:, 1] * total, side="right")
    crossed = u_op < crossover_priority

    children = bits[pa].copy()
    tail = np.arange(length)[None, :] >= cuts[:, None]
    take_b = crossed[:, None] & tail
    children[take_b] = bits[pb][take_b]

    flips = u_mut < per_bit_rate
    if not mutate_crossed:
        flips &= ~crossed[:, None]
    children ^= flips.astype(np.uint8)
    return children


def _fitness_batch_loop(bits, block_size, block_reward):
    n, length = bits.shape
    n_blocks = length // block_size
    out = np.empty(n, np.float64)
    for i in range(n):
        done = 0
        for b in range(n_blocks):
            start = b * block_size
            complete = True
            for j in range(start, start + block_size):
                if bits[i, j] == 0:
                    complete = False
                    break
            if complete:
                done += 1
        out[i] = done * block_reward
    return out


def _breed_batch_loop(
    bits, cumw, crossover_priority, mutate_crossed, per_bit_rate, u_op, u_par, cuts, u_mut
):
    k, length = u_mut.shape
    total = cumw[cumw.shape[0] - 1]
    children = np.empty((k, length), np.uint8)
    for i in range(k):
        pa = np.searchsorted(cumw, u_par[i, 0] * total, side="right")
        if u_op[i] < crossover_priority:
            pb = np.searchsorted(cumw, u_par[i, 1] * total, side="right")
            cut = cuts[i]
            for j in range(length):
                if j < cut:
                    children[i, j] = bits[pa, j]
                else:
                    children[i, j] = bits[pb, j]
            if mutate_crossed:
                for j in range(length):
                    if u_mut[i, j] < per_bit_rate:
                        children[i, j] ^= 1
        else:
            for j in range(length):
                c = bits[pa, j]
                if u_mut[i, j] < per_bit_rate:
                    c ^= 1
                children[i, j] = c
    return children


if _NUMBA_OK:
    fitness_batch_numba = njit(cache=True)(_fitness_batch_loop)
    breed_batch_numba = njit(cache=True)(_breed_batch_loop)
else:  # pragma: no cover
    fitness_batch_numba = None
    breed_batch_numba = None

IMPLEMENTATIONS = {"numpy": (fitness_batch_numpy, breed_batch_numpy)}
if _NUMBA_OK:
    IMPLEMENTATIONS["numba"] = (fitness_batch_numba, breed_batch_numba)


def _choose_backend() -> str:
    requested = os.environ.get(_ENV_VAR, "").strip().lower()
    if requested in ("", "auto"):
        return "numba" if _NUMBA_OK else "numpy"
    if requested == "numpy":
        return "numpy"
    if requested == "numba":
        if not _NUMBA_OK:
            raise RuntimeError(f"{_ENV_VAR}=numba requested but numba is not importable")
        return "numba"
    raise RuntimeError(f"unknown {_ENV_VAR} value {requested!r}; use 'numba', 'numpy' or 'auto'")


BACKEND = _choose_backend()
fitness_batch, breed_batch = IMPLEMENTATIONS[BACKEND]
