"""Exact minimax-path solver on densely sampled 2-D grids.

Ground truth for low-dimensional landscapes: the optimal bottleneck (lowest
possible maximum node loss) between two grid points, solved exactly on the
8-connected grid graph.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from heapq import heappop, heappush

import numpy as np

from .errors import ConfigError, GridDomainError, NonFiniteValue
from .landscape import Landscape
from .params import as_params


@dataclass(frozen=True)
class GridSpec:
    x_range: tuple[float, float]
    y_range: tuple[float, float]
    resolution: int | tuple[int, int]

    def __post_init__(self):
        (x0, x1), (y0, y1) = self.x_range, self.y_range
        if not (x1 > x0) or not (y1 > y0):
            raise ConfigError("grid ranges must be non-degenerate intervals")
        nx, ny = self.shape
        if nx < 3 or ny < 3:
            raise ConfigError("resolution must be >= 3 per axis")

    @property
    def shape(self) -> tuple[int, int]:
        res = self.resolution
        if isinstance(res, tuple):
            return int(res[0]), int(res[1])
        return int(res), int(res)

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        nx, ny = self.shape
        return (
            np.linspace(self.x_range[0], self.x_range[1], nx),
            np.linspace(self.y_range[0], self.y_range[1], ny),
        )


def grid_losses(landscape: Landscape, spec: GridSpec) -> np.ndarray:
    """Loss at every grid node, shape (nx, ny), indexed [ix, iy]."""
    xs, ys = spec.axes()
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    points = np.stack([xx.ravel(), yy.ravel()], axis=1)
    losses = np.asarray(landscape.loss_many(points), dtype=np.float64).reshape(xx.shape)
    if not np.all(np.isfinite(losses)):
        raise NonFiniteValue("grid contains non-finite losses")
    return losses


def _snap(spec: GridSpec, point: np.ndarray) -> tuple[int, int]:
    (x0, x1), (y0, y1) = spec.x_range, spec.y_range
    x, y = point
    if not (x0 <= x <= x1 and y0 <= y <= y1):
        raise GridDomainError(f"point ({x}, {y}) outside grid [{x0},{x1}]x[{y0},{y1}]")
    xs, ys = spec.axes()
    return int(np.argmin(np.abs(xs - x))), int(np.argmin(np.abs(ys - y)))


_NEIGHBORS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


def grid_mep(
    landscape2d: Landscape,
    spec: GridSpec,
    start,
    end,
    losses: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """Optimal bottleneck path between two points, exact on the grid.

    Start and end snap to their nearest grid nodes. The path is searched over
    8-connected nodes with max-aggregation best-first search (a minimax
    Dijkstra), so the returned value is the smallest achievable maximum node
    loss. Returns ``(saddle_value, path)`` with the path as an (k, 2) array of
    grid coordinates from start to end. Precomputed ``losses`` (from
    :func:`grid_losses`) may be passed in when solving many queries.
    """
    if landscape2d.dim != 2:
        raise ConfigError("grid oracle only supports 2-D landscapes")
    start = as_params(start, 2)
    end = as_params(end, 2)
    if losses is None:
        losses = grid_losses(landscape2d, spec)
    nx, ny = spec.shape
    if losses.shape != (nx, ny):
        raise ConfigError("loss grid shape does not match the spec")
    xs, ys = spec.axes()
    s = _snap(spec, start)
    t = _snap(spec, end)

    flat = losses.ravel()
    s_idx = s[0] * ny + s[1]
    t_idx = t[0] * ny + t[1]
    best = np.full(nx * ny, np.inf)
    pred = np.full(nx * ny, -1, dtype=np.int64)
    best[s_idx] = flat[s_idx]
    heap = [(flat[s_idx], s_idx)]
    while heap:
        cost, node = heappop(heap)
        if node == t_idx:
            break
        if cost > best[node]:
            continue
        ix, iy = divmod(node, ny)
        for dx, dy in _NEIGHBORS:
            jx, jy = ix + dx, iy + dy
            if 0 <= jx < nx and 0 <= jy < ny:
                nbr = jx * ny + jy
                ncost = cost if cost >= flat[nbr] else flat[nbr]
                if ncost < best[nbr]:
                    best[nbr] = ncost
                    pred[nbr] = node
                    heappush(heap, (ncost, nbr))

    node = t_idx
    indices = [node]
    while node != s_idx:
        node = int(pred[node])
        if node < 0:  # pragma: no cover - grid graphs are always connected
            raise GridDomainError("no path found on the grid")
        indices.append(node)
    indices.reverse()
    path = np.array([(xs[i // ny], ys[i % ny]) for i in indices])
    return float(best[t_idx]), path


def write_grid_csv(landscape: Landscape, spec: GridSpec, path) -> None:
    """Dump the loss grid as CSV rows (x, y, loss) for external plotting."""
    losses = grid_losses(landscape, spec)
    xs, ys = spec.axes()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "loss"])
        for ix, x in enumerate(xs):
            for iy, y in enumerate(ys):
                writer.writerow([repr(float(x)), repr(float(y)), repr(float(losses[ix, iy]))])
