"""Discretized paths: pivot storage, arc-length bookkeeping, equal-spacing
redistribution and the tangent rule."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ChainError, NonFiniteValue
from .params import params_from_hex, params_to_hex


class Chain:
    """An ordered list of pivots with immutable endpoints.

    Chains are value-like: every operation returns a new chain and the first
    and last pivot are carried over bit-identically. The pivot array itself is
    exposed read-only.
    """

    def __init__(self, pivots):
        arr = np.array(pivots, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 2 or arr.shape[1] < 1:
            raise ChainError(f"pivots must have shape (>=2, dim), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteValue("chain pivots contain NaN or Inf")
        arr.setflags(write=False)
        self._pivots = arr

    @property
    def pivots(self) -> np.ndarray:
        return self._pivots

    @property
    def dim(self) -> int:
        return self._pivots.shape[1]

    @property
    def n_pivots(self) -> int:
        return self._pivots.shape[0]

    @property
    def n_interior(self) -> int:
        return self.n_pivots - 2

    def __len__(self) -> int:
        return self.n_pivots

    def with_interior(self, interior: np.ndarray) -> "Chain":
        """New chain with the same endpoints and replaced interior pivots."""
        stacked = np.vstack([self._pivots[:1], np.atleast_2d(interior), self._pivots[-1:]])
        return Chain(stacked)

    # -- serialization ------------------------------------------------------

    def to_json(self, encoding: str = "decimal") -> dict:
        """As a JSON-ready dict. ``decimal`` stores plain floats, ``hex``
        stores exact binary64 hex strings, ``both`` stores the two side by
        side (hex wins on load)."""
        if encoding not in ("decimal", "hex", "both"):
            raise ChainError(f"unknown encoding {encoding!r}")
        doc: dict = {"dim": self.dim}
        if encoding in ("decimal", "both"):
            doc["pivots"] = [[float(v) for v in p] for p in self._pivots]
        if encoding in ("hex", "both"):
            doc["pivots_hex"] = [params_to_hex(p) for p in self._pivots]
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "Chain":
        dim = int(doc["dim"])
        if "pivots_hex" in doc:
            rows = [params_from_hex(h, dim) for h in doc["pivots_hex"]]
        else:
            rows = [np.asarray(p, dtype=np.float64) for p in doc["pivots"]]
        return cls(np.vstack(rows))

    def save(self, path, encoding: str = "both", extra: dict | None = None) -> None:
        doc = self.to_json(encoding)
        if extra:
            doc.update(extra)
        Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "Chain":
        return cls.from_json(json.loads(Path(path).read_text()))


def arc_lengths(chain: Chain) -> np.ndarray:
    """Cumulative Euclidean arc length per pivot, starting at 0."""
    steps = np.linalg.norm(np.diff(chain.pivots, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(steps)])


def total_length(chain: Chain) -> float:
    return float(arc_lengths(chain)[-1])


def redistribute(chain: Chain) -> Chain:
    """Resample the interior pivots at equal arc-length spacing.

    Output pivots lie exactly on the piecewise-linear polyline of the input
    chain; endpoints are copied bit-identically. A zero-length chain (all
    pivots coincident) is returned unchanged.
    """
    s = arc_lengths(chain)
    total = s[-1]
    if total == 0.0:
        return chain
    pivots = chain.pivots
    # Drop zero-length segments so interpolation sees strictly increasing arcs.
    keep = np.concatenate([[True], np.diff(s) > 0.0])
    s_kept, pivots_kept = s[keep], pivots[keep]
    n = chain.n_pivots
    target = total * np.arange(n) / (n - 1)
    resampled = np.empty_like(pivots)
    for d in range(chain.dim):
        resampled[:, d] = np.interp(target, s_kept, pivots_kept[:, d])
    resampled[0] = pivots[0]
    resampled[-1] = pivots[-1]
    return Chain(resampled)


def tangent(chain: Chain, i: int, losses) -> np.ndarray:
    """Unit tangent at interior pivot ``i``.

    Points toward the adjacent pivot with the higher loss: forward difference
    when the next pivot's loss exceeds the previous one's, backward difference
    otherwise (ties included, so symmetric initializations resolve the same
    way every time).
    """
    if not (1 <= i <= chain.n_pivots - 2):
        raise ChainError(f"tangent index {i} is not interior (1..{chain.n_pivots - 2})")
    losses = np.asarray(losses, dtype=np.float64)
    if losses.shape != (chain.n_pivots,):
        raise ChainError("losses must align with the chain's pivots")
    pivots = chain.pivots
    if losses[i + 1] > losses[i - 1]:
        diff = pivots[i + 1] - pivots[i]
    else:
        diff = pivots[i] - pivots[i - 1]
    norm = float(np.linalg.norm(diff))
    if norm == 0.0:
        raise ChainError(f"zero-length tangent candidate at pivot {i}")
    return diff / norm
