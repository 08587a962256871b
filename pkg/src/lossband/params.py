"""Flat float64 parameter vectors and their exact (bit-level) serialization."""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, NonFiniteValue


def as_params(values, dim: int | None = None) -> np.ndarray:
    """Coerce ``values`` to a finite, contiguous 1-D float64 array.

    Raises ``DimensionMismatch`` if the shape is wrong and ``NonFiniteValue``
    if any entry is NaN or infinite.
    """
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatch(f"expected a 1-D parameter vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionMismatch(f"expected dimension {dim}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue("parameter vector contains NaN or Inf")
    return arr


def params_to_hex(values) -> str:
    """Encode a float64 vector as little-endian IEEE-754 hex, 16 chars per entry."""
    arr = np.ascontiguousarray(values, dtype="<f8")
    return arr.tobytes().hex()


def params_from_hex(text: str, dim: int | None = None) -> np.ndarray:
    """Decode :func:`params_to_hex` output; bit-exact round trip."""
    raw = bytes.fromhex(text)
    if len(raw) % 8 != 0:
        raise DimensionMismatch("hex payload length is not a multiple of 8 bytes")
    arr = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    if dim is not None and arr.shape[0] != dim:
        raise DimensionMismatch(f"expected dimension {dim}, got {arr.shape[0]}")
    return arr
