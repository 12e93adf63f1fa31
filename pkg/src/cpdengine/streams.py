"""Counter-based uniform draws keyed by (seed, run, step, slot).

Every draw is a pure function of its coordinates, so Monte Carlo results
do not depend on batching, chunking or worker count.  The mixing function
is the SplitMix64 finalizer applied to a chained counter.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = z + _GAMMA
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def _u64(x) -> np.ndarray:
    return np.asarray(int(x) & _MASK, dtype=np.uint64)


def run_keys(seed: int, runs: np.ndarray, stream: int = 0) -> np.ndarray:
    """One 64-bit key per run index."""
    base = _mix(_u64(seed) ^ _mix(_u64(stream)))
    with np.errstate(over="ignore"):
        return _mix(base ^ _mix(np.asarray(runs, dtype=np.uint64)))


def uniforms(keys: np.ndarray, step: int, slot: int = 0) -> np.ndarray:
    """Uniform [0, 1) draws for coordinate (step, slot) of each run key."""
    with np.errstate(over="ignore"):
        z = _mix(_mix(keys ^ _mix(_u64(step))) + _u64(slot))
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53


def categorical(u: np.ndarray, cumulative: np.ndarray) -> np.ndarray:
    """Inverse-CDF sampling with one cumulative table per column.

    ``cumulative`` has shape ``(categories, len(u))``, padded with ``inf``;
    the category drawn for column ``r`` is the number of entries ``<= u[r]``.
    Looping over the (few) categories keeps every pass contiguous.
    """
    out = np.zeros(len(u), dtype=np.int64)
    for row in cumulative:
        out += row <= u
    return out


def cumulative_table(probs: np.ndarray) -> np.ndarray:
    """Cumulative rows whose last supported entry (and beyond) is ``inf``.

    Zero-probability trailing entries can never be selected, even when
    rounding leaves the running sum just below one.
    """
    probs = np.atleast_2d(np.asarray(probs, dtype=float))
    cum = np.cumsum(probs, axis=-1)
    for row, p in zip(cum.reshape(-1, cum.shape[-1]), probs.reshape(-1, probs.shape[-1])):
        nz = np.flatnonzero(p > 0)
        if len(nz):
            row[nz[-1]:] = np.inf
        else:
            row[:] = np.inf
    return cum
