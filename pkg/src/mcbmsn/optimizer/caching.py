"""Content popularity and cache placement."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class ContentCatalog:
    """Request probabilities of ``F`` files, most popular first."""

    popularity: np.ndarray
    skew: float = 0.0

    def __post_init__(self):
        p = np.asarray(self.popularity, dtype=float)
        if p.ndim != 1 or len(p) < 1:
            raise ValueError("popularity must be a non-empty vector")
        if np.any(p < 0):
            raise ValueError("popularity must be >= 0")
        if np.any(np.diff(p) > 0):
            raise ValueError("popularity must be sorted non-increasing")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("popularity must sum to 1")
        p.setflags(write=False)
        object.__setattr__(self, "popularity", p)

    @property
    def file_count(self) -> int:
        return len(self.popularity)

    def hit_mass(self, capacity) -> np.ndarray:
        """Request mass of the ``capacity`` most popular files (per entry)."""
        cum = np.concatenate([[0.0], np.cumsum(self.popularity)])
        cap = np.clip(np.asarray(capacity, dtype=int), 0, self.file_count)
        out = cum[cap]
        return np.where(cap >= self.file_count, 1.0, out)


def zipf_popularity(file_count: int, alpha: float) -> ContentCatalog:
    """Zipf law ``p_f ~ f^-alpha`` over ranks 1..F, normalised."""
    if file_count < 1:
        raise ValueError("file_count must be >= 1")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    w = np.arange(1, file_count + 1, dtype=float) ** -float(alpha)
    return ContentCatalog(w / w.sum(), float(alpha))


@dataclass(frozen=True, eq=False)
class CacheVector:
    """Caching probabilities ``q[f, i]`` and per-station capacities."""

    q: np.ndarray
    capacity: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        cap = np.asarray(self.capacity, dtype=float)
        if np.any(q < 0) or np.any(q > 1):
            raise ValueError("cache probabilities must lie in [0, 1]")
        if np.any(q.sum(axis=0) > cap + 1e-9):
            raise ValueError("cache occupancy exceeds capacity")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "capacity", cap)

    def hit_mass(self, catalog: ContentCatalog) -> np.ndarray:
        """Per-station probability that a request is served from cache."""
        return catalog.popularity @ self.q


def optimal_cache(catalog: ContentCatalog, capacities) -> CacheVector:
    """Deterministic top-L placement: each station caches its L most popular files.

    A capacity larger than the catalog caches everything.
    """
    cap = np.atleast_1d(np.asarray(capacities))
    if np.any(cap < 0) or np.any(np.asarray(cap, dtype=float) != np.floor(cap)):
        raise ValueError("capacities must be non-negative integers")
    cap = cap.astype(int)
    ranks = np.arange(catalog.file_count)[:, None]
    q = (ranks < cap[None, :]).astype(float)
    return CacheVector(q, cap)
