"""Adaptive path refinement: relaxation cycles interleaved with dense loss
evaluation and residual-driven pivot insertion."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .chain import Chain, arc_lengths
from .errors import ChainError, ConfigError, InsertionError
from .landscape import Landscape
from .neb import NebConfig, neb_relax
from .params import as_params

#: Pivot-loss ranges below this are treated as flat paths; the residual then
#: normalizes by the mean loss magnitude instead of the (vanishing) range.
FLAT_RANGE = 1e-12


@dataclass(frozen=True)
class AutoNebSchedule:
    """Cycle plan plus insertion parameters.

    ``cycles`` is an ordered list of (steps, learning_rate) pairs; one
    relaxation runs per cycle, followed by dense evaluation and insertion of
    at most ``insert_cap`` pivots where the loss deviates from linear
    interpolation by more than ``insert_threshold`` (relative to the
    pivot-loss range). ``dense_count`` points are probed per segment.
    """

    cycles: tuple[tuple[int, float], ...]
    insert_threshold: float = 0.2
    dense_count: int = 9
    insert_cap: int = 4
    initial_pivots: int = 3
    momentum: float = 0.9
    weight_decay: float = 1e-4
    spring_constant: float = 0.0

    def __post_init__(self):
        cycles = tuple((int(s), float(lr)) for s, lr in self.cycles)
        object.__setattr__(self, "cycles", cycles)
        if not cycles:
            raise ConfigError("schedule needs at least one cycle")
        if any(s < 0 or lr <= 0 for s, lr in cycles):
            raise ConfigError("cycles must have steps >= 0 and learning_rate > 0")
        if not (0.0 < self.insert_threshold < 1.0):
            raise ConfigError("insert_threshold must lie in (0, 1)")
        if self.dense_count < 1:
            raise ConfigError("dense_count must be >= 1")
        if self.insert_cap < 1:
            raise ConfigError("insert_cap must be >= 1")
        if self.initial_pivots < 1:
            raise ConfigError("initial_pivots must be >= 1")

    def neb_config(self, cycle: int) -> NebConfig:
        steps, lr = self.cycles[cycle]
        return NebConfig(
            steps=steps,
            learning_rate=lr,
            momentum=self.momentum,
            weight_decay=self.weight_decay,
            spring_constant=self.spring_constant,
        )

    @classmethod
    def default(cls) -> "AutoNebSchedule":
        """The 14-cycle learning-rate-decay plan used for full-scale runs:
        four cycles of 1000 steps at 0.1, two of 2000 at 0.1, four of 1000 at
        0.01 and four of 1000 at 0.001."""
        cycles = (
            [(1000, 0.1)] * 4 + [(2000, 0.1)] * 2 + [(1000, 0.01)] * 4 + [(1000, 0.001)] * 4
        )
        return cls(cycles=tuple(cycles))

    @classmethod
    def from_dict(cls, d: dict) -> "AutoNebSchedule":
        try:
            return cls(
                cycles=tuple((int(s), float(lr)) for s, lr in d["cycles"]),
                insert_threshold=float(d.get("insert_threshold", 0.2)),
                dense_count=int(d.get("dense_count", 9)),
                insert_cap=int(d.get("insert_cap", 4)),
                initial_pivots=int(d.get("initial_pivots", 3)),
                momentum=float(d.get("momentum", 0.9)),
                weight_decay=float(d.get("weight_decay", 1e-4)),
                spring_constant=float(d.get("spring_constant", 0.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid autoneb schedule: {exc}") from exc


@dataclass(frozen=True)
class DenseProfile:
    """Losses probed at equally spaced points inside every segment.

    ``guess`` is the linear interpolation of the adjacent pivot losses and
    ``residual`` the deviation from it, normalized by ``denominator`` (the
    pivot-loss range, or the mean-loss fallback on flat paths). Rebuilding
    ``(true_loss - guess) / denominator`` reproduces ``residual`` exactly.
    """

    alphas: np.ndarray        # (m,)
    true_loss: np.ndarray     # (segments, m)
    guess: np.ndarray         # (segments, m)
    residual: np.ndarray      # (segments, m)
    pivot_losses: np.ndarray  # (pivots,)
    denominator: float

    @property
    def n_segments(self) -> int:
        return self.true_loss.shape[0]

    def max_loss(self) -> float:
        """Highest loss seen anywhere: pivots and dense points."""
        return float(max(self.true_loss.max(), self.pivot_losses.max()))


class SaddleRecord(NamedTuple):
    params: np.ndarray
    loss: float
    source: str  # "pivot" | "dense_point"


class AutoNebResult(NamedTuple):
    chain: Chain
    saddle: SaddleRecord
    dense_max_per_cycle: list[float]


def residual_denominator(pivot_losses: np.ndarray) -> float:
    spread = float(pivot_losses.max() - pivot_losses.min())
    if spread > FLAT_RANGE:
        return spread
    return max(FLAT_RANGE, abs(float(pivot_losses.mean())))


def evaluate_dense(chain: Chain, landscape: Landscape, m: int) -> DenseProfile:
    """Probe the landscape at ``m`` equally spaced interior points of every
    segment and compare against linear interpolation of the pivot losses."""
    if m < 1:
        raise ConfigError("dense count m must be >= 1")
    if chain.dim != landscape.dim:
        raise ChainError(f"chain dim {chain.dim} != landscape dim {landscape.dim}")
    pivots = chain.pivots
    pivot_losses = np.array([landscape.loss(p) for p in pivots])
    alphas = np.arange(1, m + 1) / (m + 1)

    segments = chain.n_pivots - 1
    points = (
        pivots[:-1, None, :] * (1.0 - alphas)[None, :, None]
        + pivots[1:, None, :] * alphas[None, :, None]
    )
    true_loss = landscape.loss_many(points.reshape(segments * m, chain.dim)).reshape(segments, m)
    guess = pivot_losses[:-1, None] * (1.0 - alphas)[None, :] + pivot_losses[1:, None] * alphas[None, :]
    denom = residual_denominator(pivot_losses)
    residual = (true_loss - guess) / denom
    return DenseProfile(alphas, true_loss, guess, residual, pivot_losses, denom)


def insertion_candidates(
    profile: DenseProfile, pivot_losses, threshold: float, cap: int
) -> list[tuple[int, float]]:
    """Select at most ``cap`` (segment, alpha) insertion sites.

    Per segment only the largest residual competes; across segments the
    winners are ranked by residual, descending. A site qualifies when its
    residual exceeds ``threshold``.
    """
    pivot_losses = np.asarray(pivot_losses, dtype=np.float64)
    if pivot_losses.shape[0] != profile.n_segments + 1:
        raise ChainError("pivot losses do not align with the dense profile")
    best_idx = profile.residual.argmax(axis=1)
    best_res = profile.residual[np.arange(profile.n_segments), best_idx]
    qualifying = np.nonzero(best_res > threshold)[0]
    ranked = sorted(qualifying, key=lambda s: (-best_res[s], s))[: int(cap)]
    return [(int(s), float(profile.alphas[best_idx[s]])) for s in ranked]


def insert_pivots(chain: Chain, candidates) -> Chain:
    """Splice new pivots at convex combinations of segment endpoints.

    ``candidates`` holds (segment, alpha) pairs, at most one per segment. The
    polyline geometry is unchanged; only the sampling gets finer.
    """
    if not candidates:
        return chain
    segments = {}
    for seg, alpha in candidates:
        seg = int(seg)
        if not (0 <= seg < chain.n_pivots - 1):
            raise InsertionError(f"segment {seg} out of range")
        if not (0.0 < alpha < 1.0):
            raise InsertionError(f"alpha {alpha} must lie strictly inside (0, 1)")
        if seg in segments:
            raise InsertionError(f"duplicate insertion for segment {seg}")
        segments[seg] = float(alpha)
    pivots = chain.pivots
    rows = []
    for i in range(chain.n_pivots - 1):
        rows.append(pivots[i])
        if i in segments:
            a = segments[i]
            rows.append(pivots[i] * (1.0 - a) + pivots[i + 1] * a)
    rows.append(pivots[-1])
    return Chain(np.vstack(rows))


def saddle_from_profile(chain: Chain, profile: DenseProfile) -> SaddleRecord:
    """The highest-loss point over pivots and dense samples."""
    pivot_best = int(profile.pivot_losses.argmax())
    pivot_loss = float(profile.pivot_losses[pivot_best])
    flat = profile.true_loss.reshape(-1)
    dense_best = int(flat.argmax())
    dense_loss = float(flat[dense_best])
    if pivot_loss >= dense_loss:
        return SaddleRecord(chain.pivots[pivot_best].copy(), pivot_loss, "pivot")
    seg, j = divmod(dense_best, profile.alphas.shape[0])
    a = profile.alphas[j]
    point = chain.pivots[seg] * (1.0 - a) + chain.pivots[seg + 1] * a
    return SaddleRecord(point, dense_loss, "dense_point")


def initial_chain(theta1: np.ndarray, theta2: np.ndarray, interior: int) -> Chain:
    return Chain(np.linspace(theta1, theta2, interior + 2))


def auto_neb(
    theta1,
    theta2,
    landscape: Landscape,
    schedule: AutoNebSchedule,
    workers: int = 1,
) -> AutoNebResult:
    """Connect two parameter vectors with an adaptively refined path.

    Starts from pivots equally spaced on the straight segment, then per cycle:
    relax with that cycle's step count and learning rate, probe the path
    densely, insert pivots where the probe deviates most from interpolation.
    After the last cycle one more dense probe determines the saddle: the
    highest-loss point over all pivots and probes.
    """
    t1 = as_params(theta1, landscape.dim)
    t2 = as_params(theta2, landscape.dim)
    if np.array_equal(t1, t2):
        chain = Chain(np.tile(t1, (schedule.initial_pivots + 2, 1)))
        loss = landscape.loss(t1)
        return AutoNebResult(chain, SaddleRecord(t1.copy(), loss, "pivot"), [])

    chain = initial_chain(t1, t2, schedule.initial_pivots)
    dense_max: list[float] = []
    for cycle in range(len(schedule.cycles)):
        chain, _ = neb_relax(chain, landscape, schedule.neb_config(cycle), workers=workers)
        profile = evaluate_dense(chain, landscape, schedule.dense_count)
        dense_max.append(profile.max_loss())
        candidates = insertion_candidates(
            profile, profile.pivot_losses, schedule.insert_threshold, schedule.insert_cap
        )
        chain = insert_pivots(chain, candidates)
    final_profile = evaluate_dense(chain, landscape, schedule.dense_count)
    return AutoNebResult(chain, saddle_from_profile(chain, final_profile), dense_max)


def profile_rows(chain: Chain, profile: DenseProfile) -> list[tuple[float, float, float, int]]:
    """Flatten a chain + dense profile into loss-along-path rows of
    (cumulative_arc_length, alpha_global, loss, is_pivot), ordered along the
    path. ``alpha_global`` runs 0..1 over the whole arc length."""
    s = arc_lengths(chain)
    total = s[-1] if s[-1] > 0 else 1.0
    rows = []
    for i in range(chain.n_pivots):
        rows.append((float(s[i]), float(s[i] / total), float(profile.pivot_losses[i]), 1))
        if i < chain.n_pivots - 1:
            seg_len = s[i + 1] - s[i]
            for j, a in enumerate(profile.alphas):
                arc = s[i] + a * seg_len
                rows.append((float(arc), float(arc / total), float(profile.true_loss[i, j]), 0))
    return rows
