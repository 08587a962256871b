"""Nudged-elastic-band forces and the string-method relaxation loop.

The loss force acts only perpendicular to the path; the optional spring force
acts only parallel to it. With the default spring constant of zero plus
per-iteration equal-arc-length redistribution this is the string method.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .chain import Chain, redistribute, tangent
from .errors import ChainError, ConfigError, NonFiniteValue, RelaxationFailed
from .landscape import Evaluation, Landscape
from .params import as_params


@dataclass(frozen=True)
class NebConfig:
    steps: int
    learning_rate: float
    momentum: float = 0.9
    weight_decay: float = 1e-4
    spring_constant: float = 0.0

    def __post_init__(self):
        if self.steps < 0:
            raise ConfigError("steps must be >= 0")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if not (0.0 <= self.momentum < 1.0):
            raise ConfigError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be >= 0")
        if self.spring_constant < 0:
            raise ConfigError("spring_constant must be >= 0")


class RelaxResult(NamedTuple):
    chain: Chain
    max_interior_loss: list[float]


def elastic_band_energy(chain: Chain, losses, k: float) -> float:
    """Total band energy: interior losses plus quadratic spring terms.

    Diagnostic only; the relaxation never optimizes this directly because the
    spring term penalizes path length and cuts corners.
    """
    losses = np.asarray(losses, dtype=np.float64)
    if losses.shape != (chain.n_pivots,):
        raise ChainError("losses must align with the chain's pivots")
    segment_sq = np.sum(np.diff(chain.pivots, axis=0) ** 2, axis=1)
    return float(np.sum(losses[1:-1]) + 0.5 * k * np.sum(segment_sq))


def _require_unit(tau: np.ndarray) -> np.ndarray:
    tau = np.asarray(tau, dtype=np.float64)
    norm = float(np.linalg.norm(tau))
    if abs(norm - 1.0) > 1e-9:
        raise ChainError(f"tangent must have unit norm, got {norm}")
    return tau


def loss_force_perp(gradient, tau) -> np.ndarray:
    """Negative gradient with its tangential component removed.

    The projection is applied twice so the residual along ``tau`` stays at
    rounding level even when the gradient is nearly parallel to the path.
    """
    tau = _require_unit(tau)
    g = np.asarray(gradient, dtype=np.float64)
    force = -(g - (g @ tau) * tau)
    return force - (force @ tau) * tau


def spring_force_parallel(chain: Chain, i: int, k: float, tau) -> np.ndarray:
    """Spring force along the tangent, opposing unequal segment lengths."""
    if not (1 <= i <= chain.n_pivots - 2):
        raise ChainError(f"index {i} is not interior")
    tau = _require_unit(tau)
    pivots = chain.pivots
    d_prev = float(np.linalg.norm(pivots[i] - pivots[i - 1]))
    d_next = float(np.linalg.norm(pivots[i + 1] - pivots[i]))
    return -k * (d_prev - d_next) * tau


def _evaluate_many(landscape: Landscape, points: np.ndarray, workers: int) -> list[Evaluation]:
    """Evaluate loss+gradient per point; results ordered by index so the
    outcome is identical for any worker count."""
    if workers <= 1 or points.shape[0] < 2:
        return [landscape.evaluate(p) for p in points]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(landscape.evaluate, points))


def neb_relax(chain: Chain, landscape: Landscape, cfg: NebConfig, workers: int = 1) -> RelaxResult:
    """Relax a chain for ``cfg.steps`` iterations and return it with the
    per-iteration maximum interior loss.

    Each iteration redistributes the pivots to equal arc-length spacing,
    evaluates every interior pivot, then moves each one by momentum SGD on
    the projected force. Forces are computed from one snapshot of the chain;
    endpoints never move. Velocity buffers follow the pivot index.
    """
    if chain.dim != landscape.dim:
        raise ChainError(f"chain dim {chain.dim} != landscape dim {landscape.dim}")
    trace: list[float] = []
    if cfg.steps == 0 or chain.n_interior == 0:
        return RelaxResult(chain, trace)

    end_lo = landscape.loss(chain.pivots[0])
    end_hi = landscape.loss(chain.pivots[-1])
    velocity = np.zeros((chain.n_interior, chain.dim))
    gamma, mu, lam, k = cfg.learning_rate, cfg.momentum, cfg.weight_decay, cfg.spring_constant

    for step in range(cfg.steps):
        chain = redistribute(chain)
        interior = chain.pivots[1:-1]
        try:
            evals = _evaluate_many(landscape, interior, workers)
        except NonFiniteValue as exc:
            raise RelaxationFailed(step) from exc
        losses = np.concatenate([[end_lo], [e.loss for e in evals], [end_hi]])
        if not np.all(np.isfinite(losses)):
            raise RelaxationFailed(step)
        trace.append(float(losses[1:-1].max()))

        forces = np.empty_like(velocity)
        for j in range(chain.n_interior):
            tau = tangent(chain, j + 1, losses)
            force = loss_force_perp(evals[j].gradient, tau)
            if k > 0.0:
                force = force + spring_force_parallel(chain, j + 1, k, tau)
            forces[j] = force

        new_interior = interior.copy()
        if lam > 0.0:
            new_interior *= 1.0 - gamma * lam
        velocity = mu * velocity + forces
        new_interior += gamma * velocity
        chain = chain.with_interior(new_interior)
    return RelaxResult(chain, trace)


def write_relax_trace(path, trace) -> None:
    """Dump the relaxation diagnostic as CSV (iteration, max_interior_loss)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "max_interior_loss"])
        for i, value in enumerate(trace):
            writer.writerow([i, repr(float(value))])
