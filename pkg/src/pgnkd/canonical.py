"""Rotation-invariant local map descriptors via hue-entropy minimization."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .sensing import N_HUE_BINS, N_SECTORS, LocalMapDescriptor, cyclic_shift

HALF = N_SECTORS // 2
HIST_LEVELS = 32
OCC_LEVELS = 16


def entropy(counts) -> float:
    """Shannon entropy in bits of an L1-normalized histogram (``0 log 0 = 0``).

    Summed with ``math.fsum`` so the result does not depend on bin order.
    """
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if total <= 0:
        return 0.0
    p = counts[counts > 0] / total
    return -math.fsum((p * np.log2(p)).tolist()) + 0.0


@dataclass(frozen=True, eq=False)
class CanonicalLmd:
    descriptor: LocalMapDescriptor
    shift: int
    entropy: float


def half_entropies(d: LocalMapDescriptor) -> np.ndarray:
    """Entropy of the summed hue histogram over sectors ``k .. k+5`` for each ``k``."""
    idx = (np.arange(N_SECTORS)[:, None] + np.arange(HALF)[None, :]) % N_SECTORS
    halves = d.hist[idx].sum(axis=1)
    return np.array([entropy(h) for h in halves])


def canonicalize(d: LocalMapDescriptor) -> CanonicalLmd:
    """Rotate ``d`` by the 30-degree multiple whose half-disk hue entropy is lowest.

    Equal entropies are resolved by the lexicographically smallest rotated
    descriptor, then by the smallest shift, so the result is exactly the
    same for every rotation of the input.
    """
    ent = half_entropies(d)
    best = ent.min()
    candidates = [k for k in range(N_SECTORS) if ent[k] == best]
    if len(candidates) > 1:
        def order_key(k):
            s = cyclic_shift(d, k)
            return tuple(s.hist.ravel().tolist()) + tuple(s.occupancy.tolist())

        keys = {k: order_key(k) for k in candidates}
        smallest = min(keys.values())
        candidates = [k for k in candidates if keys[k] == smallest]
    k = candidates[0]
    return CanonicalLmd(cyclic_shift(d, k), k, float(best))


def quantize(d: LocalMapDescriptor) -> tuple[np.ndarray, np.ndarray]:
    """Per-sector hue shares in 1/32 steps and occupancies in 1/16 steps."""
    totals = d.hist.sum(axis=1, keepdims=True)
    shares = np.divide(d.hist, totals, out=np.zeros(d.hist.shape), where=totals > 0)
    return (np.floor(shares * HIST_LEVELS + 0.5).astype(np.int64),
            np.floor(d.occupancy * OCC_LEVELS + 0.5).astype(np.int64))


def dedup_key(c: CanonicalLmd | LocalMapDescriptor) -> str:
    """40-character hex key; equal keys mean equal quantized descriptors."""
    d = c.descriptor if isinstance(c, CanonicalLmd) else c
    hq, oq = quantize(d)
    payload = np.concatenate([hq.ravel(), oq]).astype("<i2").tobytes()
    return hashlib.sha1(payload).hexdigest()


__all__ = ["CanonicalLmd", "canonicalize", "dedup_key", "entropy", "half_entropies",
           "quantize", "N_HUE_BINS"]
