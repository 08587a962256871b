"""Differentiable scalar loss landscapes.

Provides the ``Landscape`` abstraction (loss + exact gradient over a flat
parameter vector), closed-form 2-D test surfaces, a small from-scratch
multilayer perceptron with backpropagation over in-memory datasets, and a
deterministic full-batch trainer that produces minima.
"""

from __future__ import annotations

import csv
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DimensionMismatch,
    NonFiniteValue,
    PermutationError,
    TrainingDiverged,
)
from .params import as_params


class Evaluation(NamedTuple):
    loss: float
    gradient: np.ndarray


class Landscape(ABC):
    """A differentiable scalar field over a fixed-dimension parameter space.

    Evaluation is read-only and reentrant: concurrent calls on distinct
    parameter vectors are safe, and identical inputs give bit-identical
    results.
    """

    @property
    @abstractmethod
    def dim(self) -> int:
        ...

    @abstractmethod
    def evaluate(self, params) -> Evaluation:
        """Return loss and exact analytic gradient at ``params``."""

    def loss(self, params) -> float:
        """Loss only; subclasses may override with a cheaper forward pass."""
        return self.evaluate(params).loss

    def loss_many(self, points: np.ndarray) -> np.ndarray:
        """Losses for a batch of points, shape (n, dim) -> (n,)."""
        pts = np.asarray(points, dtype=np.float64)
        return np.array([self.loss(p) for p in pts])

    def random_init(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no default initializer")

    def _check(self, params) -> np.ndarray:
        return as_params(params, self.dim)

    @staticmethod
    def _finite(loss: float, gradient: np.ndarray) -> Evaluation:
        if not np.isfinite(loss) or not np.all(np.isfinite(gradient)):
            raise NonFiniteValue("landscape produced a non-finite loss or gradient")
        return Evaluation(float(loss), gradient)


# ---------------------------------------------------------------------------
# Analytic 2-D surfaces
# ---------------------------------------------------------------------------


class AnalyticSurface(Landscape):
    """2-D landscape given by closed-form loss and gradient callables.

    ``loss_fn(x, y)`` must broadcast over numpy arrays (dense grids are
    evaluated in one call); ``grad_fn(x, y)`` returns ``(df/dx, df/dy)``.
    ``domain`` bounds random initialization.
    """

    def __init__(
        self,
        name: str,
        loss_fn: Callable,
        grad_fn: Callable,
        domain: tuple[tuple[float, float], tuple[float, float]] = ((-2.0, 2.0), (-2.0, 2.0)),
    ):
        self.name = name
        self._loss_fn = loss_fn
        self._grad_fn = grad_fn
        self.domain = domain
        self.metadata: dict = {}

    @property
    def dim(self) -> int:
        return 2

    def evaluate(self, params) -> Evaluation:
        x, y = self._check(params)
        gx, gy = self._grad_fn(x, y)
        return self._finite(self._loss_fn(x, y), np.array([gx, gy], dtype=np.float64))

    def loss(self, params) -> float:
        x, y = self._check(params)
        value = float(self._loss_fn(x, y))
        if not np.isfinite(value):
            raise NonFiniteValue("landscape produced a non-finite loss")
        return value

    def loss_many(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return np.asarray(self._loss_fn(pts[..., 0], pts[..., 1]), dtype=np.float64)

    def random_init(self, rng: np.random.Generator) -> np.ndarray:
        (x0, x1), (y0, y1) = self.domain
        return np.array([rng.uniform(x0, x1), rng.uniform(y0, y1)])


def make_double_well() -> AnalyticSurface:
    """Canonical 2-D fixture f(x, y) = (1 - x^2)^2 + 2 (y - x^2)^2.

    Minima at (+-1, 1) with value 0 and a saddle at (0, 0) with value 1.
    The low-loss valley tracks y ~ x^2, so the optimal path is visibly
    curved while the straight segment between the minima climbs to 3.
    """

    def loss(x, y):
        return (1.0 - x**2) ** 2 + 2.0 * (y - x**2) ** 2

    def grad(x, y):
        dx = -4.0 * x * (1.0 - x**2) - 8.0 * x * (y - x**2)
        dy = 4.0 * (y - x**2)
        return dx, dy

    return AnalyticSurface("double_well", loss, grad)


def _well_sum_surface(name, centers, depths, widths, bowl):
    centers = np.asarray(centers, dtype=np.float64)
    depths = np.asarray(depths, dtype=np.float64)
    widths = np.asarray(widths, dtype=np.float64)

    def loss(x, y):
        total = bowl * (np.asarray(x) ** 2 + np.asarray(y) ** 2)
        for (cx, cy), a, w in zip(centers, depths, widths):
            total = total - a * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2.0 * w * w))
        return total

    def grad(x, y):
        dx = 2.0 * bowl * x
        dy = 2.0 * bowl * y
        for (cx, cy), a, w in zip(centers, depths, widths):
            e = a * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2.0 * w * w)) / (w * w)
            dx = dx + e * (x - cx)
            dy = dy + e * (y - cy)
        return dx, dy

    surface = AnalyticSurface(name, loss, grad)
    surface.metadata["well_centers"] = centers
    return surface


def make_gaussian_wells(
    seed: int,
    wells: int | None = None,
    bowl: float = 0.05,
    box: float = 1.2,
) -> AnalyticSurface:
    """Seeded random multi-well surface: a shallow quadratic bowl minus
    3..6 Gaussian wells with random centers, depths and widths."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 7)) if wells is None else int(wells)
    if n < 1:
        raise ConfigError("need at least one well")
    centers = rng.uniform(-box, box, size=(n, 2))
    depths = rng.uniform(0.5, 1.5, size=n)
    widths = rng.uniform(0.3, 0.55, size=n)
    return _well_sum_surface(f"gaussian_wells[{seed}]", centers, depths, widths, bowl)


def make_triple_well() -> AnalyticSurface:
    """Fixed three-well surface used by the exploration demos and CLI tests."""
    return _well_sum_surface(
        "triple_well",
        centers=[(-1.2, -0.6), (0.0, 0.9), (1.2, -0.3)],
        depths=[1.0, 0.8, 1.2],
        widths=[0.45, 0.4, 0.5],
        bowl=0.05,
    )


_ANALYTIC_FACTORIES = {
    "double_well": lambda **kw: make_double_well(),
    "triple_well": lambda **kw: make_triple_well(),
    "gaussian_wells": lambda **kw: make_gaussian_wells(
        seed=int(kw.pop("surface_seed")), wells=kw.pop("wells", None), **kw
    ),
}


def analytic_surface(name: str, **params) -> AnalyticSurface:
    """Look up a 2-D surface by registry name (``double_well``,
    ``triple_well``, ``gaussian_wells``)."""
    try:
        factory = _ANALYTIC_FACTORIES[name]
    except KeyError:
        known = ", ".join(sorted(_ANALYTIC_FACTORIES))
        raise ConfigError(f"unknown analytic surface {name!r}; known: {known}") from None
    try:
        return factory(**params)
    except KeyError as exc:
        raise ConfigError(f"surface {name!r} is missing parameter {exc}") from None


# ---------------------------------------------------------------------------
# Multilayer perceptron
# ---------------------------------------------------------------------------

ACTIVATIONS = ("tanh", "relu")
LOSS_KINDS = ("cross_entropy", "squared_error")


@dataclass(frozen=True)
class MlpSpec:
    """Architecture of a fully connected network.

    ``layer_sizes`` lists input, hidden... and output widths. Hidden layers
    share one activation; the output layer is linear.
    """

    layer_sizes: tuple[int, ...]
    activation: str = "tanh"
    loss_kind: str = "cross_entropy"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise ConfigError("layer_sizes needs at least input and output layers")
        if any(s < 1 for s in sizes):
            raise ConfigError("layer sizes must be positive")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"activation must be one of {ACTIVATIONS}")
        if self.loss_kind not in LOSS_KINDS:
            raise ConfigError(f"loss_kind must be one of {LOSS_KINDS}")

    @property
    def n_params(self) -> int:
        sizes = self.layer_sizes
        return sum((sizes[i] + 1) * sizes[i + 1] for i in range(len(sizes) - 1))

    @property
    def hidden_layers(self) -> range:
        """Indices into ``layer_sizes`` that are hidden layers."""
        return range(1, len(self.layer_sizes) - 1)

    def to_dict(self) -> dict:
        return {
            "layer_sizes": list(self.layer_sizes),
            "activation": self.activation,
            "loss_kind": self.loss_kind,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpSpec":
        try:
            return cls(
                layer_sizes=tuple(d["layer_sizes"]),
                activation=d.get("activation", "tanh"),
                loss_kind=d.get("loss_kind", "cross_entropy"),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"invalid MLP spec: {exc}") from exc


@dataclass(frozen=True)
class Dataset:
    """In-memory supervised dataset.

    ``targets`` is a 1-D integer array of class indices for cross-entropy,
    or a 2-D float matrix for squared error.
    """

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        inputs = np.ascontiguousarray(self.inputs, dtype=np.float64)
        if inputs.ndim != 2 or inputs.shape[0] < 1:
            raise DimensionMismatch("inputs must be a (n_samples, input_dim) matrix, n >= 1")
        if not np.all(np.isfinite(inputs)):
            raise NonFiniteValue("dataset inputs contain NaN or Inf")
        object.__setattr__(self, "inputs", inputs)
        targets = np.asarray(self.targets)
        if np.issubdtype(targets.dtype, np.floating):
            targets = np.ascontiguousarray(targets, dtype=np.float64)
            if not np.all(np.isfinite(targets)):
                raise NonFiniteValue("dataset targets contain NaN or Inf")
        else:
            targets = np.ascontiguousarray(targets, dtype=np.int64)
        if targets.shape[0] != inputs.shape[0]:
            raise DimensionMismatch("inputs and targets disagree on sample count")
        object.__setattr__(self, "targets", targets)

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]

    @classmethod
    def from_csv(cls, path, loss_kind: str = "cross_entropy") -> "Dataset":
        """Load from CSV: one header row, feature columns, then one target
        column (class index for cross-entropy, real value for squared error)."""
        rows = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise ConfigError(f"{path}: empty CSV")
            for row in reader:
                if row:
                    rows.append([float(v) for v in row])
        if not rows:
            raise ConfigError(f"{path}: no data rows")
        data = np.array(rows, dtype=np.float64)
        if data.shape[1] < 2:
            raise ConfigError(f"{path}: need at least one feature and one target column")
        inputs, target_col = data[:, :-1], data[:, -1]
        if loss_kind == "cross_entropy":
            labels = target_col.astype(np.int64)
            if not np.allclose(labels, target_col):
                raise ConfigError(f"{path}: cross-entropy targets must be integer class indices")
            return cls(inputs, labels)
        return cls(inputs, target_col.reshape(-1, 1))


def xor_dataset() -> Dataset:
    """The four XOR points with 0/1 targets (squared-error form)."""
    inputs = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    targets = np.array([[0.0], [1.0], [1.0], [0.0]])
    return Dataset(inputs, targets)


def two_cluster_dataset(seed: int, n: int = 200, spread: float = 0.5) -> Dataset:
    """Two seeded Gaussian blobs around (-1,-1) and (1,1), integer labels."""
    rng = np.random.default_rng(seed)
    half = n // 2
    a = rng.normal(loc=-1.0, scale=spread, size=(half, 2))
    b = rng.normal(loc=1.0, scale=spread, size=(n - half, 2))
    inputs = np.vstack([a, b])
    labels = np.concatenate([np.zeros(half, dtype=np.int64), np.ones(n - half, dtype=np.int64)])
    return Dataset(inputs, labels)


def unpack_params(spec: MlpSpec, flat) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split a flat vector into per-layer (weight, bias) copies.

    Weight layer l has shape (fan_out, fan_in) and maps layer l-1 to layer l;
    the layout is W1, b1, W2, b2, ...
    """
    flat = as_params(flat, spec.n_params)
    layers = []
    offset = 0
    sizes = spec.layer_sizes
    for l in range(len(sizes) - 1):
        fan_in, fan_out = sizes[l], sizes[l + 1]
        w = flat[offset : offset + fan_in * fan_out].reshape(fan_out, fan_in).copy()
        offset += fan_in * fan_out
        b = flat[offset : offset + fan_out].copy()
        offset += fan_out
        layers.append((w, b))
    return layers


def pack_params(spec: MlpSpec, layers: Sequence[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    parts = []
    for (w, b), fan_in, fan_out in zip(
        layers, spec.layer_sizes[:-1], spec.layer_sizes[1:]
    ):
        if w.shape != (fan_out, fan_in) or b.shape != (fan_out,):
            raise DimensionMismatch("layer arrays do not match the spec")
        parts.append(np.asarray(w, dtype=np.float64).ravel())
        parts.append(np.asarray(b, dtype=np.float64))
    return np.concatenate(parts)


class MlpLandscape(Landscape):
    """Mean loss of a fully connected network over a fixed dataset.

    The loss is pure: no regularization term is added here (weight decay
    belongs to optimizers). Cross-entropy is reported in nats; squared error
    is the plain mean over samples and output components.

    ``batch_indices`` is an optional hook returning an index array; when set,
    each evaluation uses that subset instead of the full dataset. The default
    (full batch) keeps evaluation deterministic.
    """

    def __init__(self, spec: MlpSpec, data: Dataset, batch_indices: Callable | None = None):
        if data.inputs.shape[1] != spec.layer_sizes[0]:
            raise DimensionMismatch(
                f"dataset has {data.inputs.shape[1]} features, network expects {spec.layer_sizes[0]}"
            )
        out = spec.layer_sizes[-1]
        if spec.loss_kind == "cross_entropy":
            if data.targets.ndim != 1 or not np.issubdtype(data.targets.dtype, np.integer):
                raise DimensionMismatch("cross-entropy targets must be 1-D class indices")
            if out < 2:
                raise ConfigError("cross-entropy needs at least 2 output units")
            if data.targets.min() < 0 or data.targets.max() >= out:
                raise DimensionMismatch(f"class indices must lie in [0, {out})")
        else:
            if data.targets.ndim != 2 or data.targets.shape[1] != out:
                raise DimensionMismatch(f"squared-error targets must have shape (n, {out})")
        self.spec = spec
        self.data = data
        self.batch_indices = batch_indices

    @property
    def dim(self) -> int:
        return self.spec.n_params

    def _batch(self) -> tuple[np.ndarray, np.ndarray]:
        if self.batch_indices is None:
            return self.data.inputs, self.data.targets
        idx = np.asarray(self.batch_indices(), dtype=np.int64)
        return self.data.inputs[idx], self.data.targets[idx]

    def _layer_views(self, flat: np.ndarray):
        offset = 0
        sizes = self.spec.layer_sizes
        for l in range(len(sizes) - 1):
            fan_in, fan_out = sizes[l], sizes[l + 1]
            w = flat[offset : offset + fan_in * fan_out].reshape(fan_out, fan_in)
            offset += fan_in * fan_out
            b = flat[offset : offset + fan_out]
            offset += fan_out
            yield w, b

    def _forward(self, flat: np.ndarray, inputs: np.ndarray):
        """Return pre-activations and activations per layer."""
        zs, acts = [], [inputs]
        layers = list(self._layer_views(flat))
        a = inputs
        for i, (w, b) in enumerate(layers):
            z = a @ w.T + b
            zs.append(z)
            if i < len(layers) - 1:
                a = np.tanh(z) if self.spec.activation == "tanh" else np.maximum(z, 0.0)
            else:
                a = z
            acts.append(a)
        return zs, acts

    def _loss_and_delta(self, outputs: np.ndarray, targets: np.ndarray):
        n = outputs.shape[0]
        if self.spec.loss_kind == "cross_entropy":
            shifted = outputs - outputs.max(axis=1, keepdims=True)
            logsumexp = np.log(np.exp(shifted).sum(axis=1))
            loss = float(np.mean(logsumexp - shifted[np.arange(n), targets]))
            probs = np.exp(shifted - logsumexp[:, None])
            delta = probs
            delta[np.arange(n), targets] -= 1.0
            return loss, delta / n
        diff = outputs - targets
        loss = float(np.mean(diff**2))
        return loss, 2.0 * diff / diff.size

    def predictions(self, params, inputs: np.ndarray | None = None) -> np.ndarray:
        """Raw network outputs for ``inputs`` (defaults to the dataset)."""
        flat = self._check(params)
        x = self.data.inputs if inputs is None else np.asarray(inputs, dtype=np.float64)
        _, acts = self._forward(flat, x)
        return acts[-1]

    def misclassified(self, params, inputs=None, targets=None) -> int:
        """Count wrongly classified samples; argmax for multi-output nets,
        threshold 0.5 for single-output squared error."""
        x = self.data.inputs if inputs is None else np.asarray(inputs, dtype=np.float64)
        t = self.data.targets if targets is None else np.asarray(targets)
        out = self.predictions(params, x)
        if self.spec.loss_kind == "cross_entropy":
            return int(np.sum(out.argmax(axis=1) != t))
        if out.shape[1] == 1:
            return int(np.sum((out[:, 0] > 0.5) != (t[:, 0] > 0.5)))
        return int(np.sum(out.argmax(axis=1) != t.argmax(axis=1)))

    def loss(self, params) -> float:
        flat = self._check(params)
        inputs, targets = self._batch()
        _, acts = self._forward(flat, inputs)
        value, _ = self._loss_and_delta(acts[-1], targets)
        if not np.isfinite(value):
            raise NonFiniteValue("network produced a non-finite loss")
        return value

    def evaluate(self, params) -> Evaluation:
        flat = self._check(params)
        inputs, targets = self._batch()
        zs, acts = self._forward(flat, inputs)
        loss, delta = self._loss_and_delta(acts[-1], targets)

        layers = list(self._layer_views(flat))
        grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(layers)
        for l in range(len(layers) - 1, -1, -1):
            w, _ = layers[l]
            grads[l] = (delta.T @ acts[l], delta.sum(axis=0))
            if l > 0:
                back = delta @ w
                z = zs[l - 1]
                if self.spec.activation == "tanh":
                    back *= 1.0 - np.tanh(z) ** 2
                else:
                    back *= (z > 0.0).astype(np.float64)
                delta = back
        flat_grad = np.concatenate([np.concatenate([gw.ravel(), gb]) for gw, gb in grads])
        return self._finite(loss, flat_grad)

    def random_init(self, rng: np.random.Generator) -> np.ndarray:
        """Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer, biases included."""
        parts = []
        sizes = self.spec.layer_sizes
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            parts.append(rng.uniform(-bound, bound, size=fan_in * fan_out))
            parts.append(rng.uniform(-bound, bound, size=fan_out))
        return np.concatenate(parts)


def make_mlp(spec: MlpSpec, data: Dataset, batch_indices=None) -> MlpLandscape:
    return MlpLandscape(spec, data, batch_indices=batch_indices)


def permute_hidden_units(params, spec: MlpSpec, layer: int, perm) -> np.ndarray:
    """Permute the units of one hidden layer consistently.

    Incoming weights and biases of ``layer`` and the outgoing weight columns
    of the next layer are reordered together, so the network function (and
    hence the loss) is unchanged.
    """
    if layer not in spec.hidden_layers:
        raise PermutationError(f"layer {layer} is not a hidden layer of {spec.layer_sizes}")
    width = spec.layer_sizes[layer]
    p = np.asarray(perm, dtype=np.int64)
    if p.shape != (width,) or not np.array_equal(np.sort(p), np.arange(width)):
        raise PermutationError(f"perm must be a permutation of range({width})")
    layers = unpack_params(spec, params)
    w_in, b_in = layers[layer - 1]
    w_out, b_out = layers[layer]
    layers[layer - 1] = (w_in[p, :], b_in[p])
    layers[layer] = (w_out[:, p], b_out)
    return pack_params(spec, layers)


# ---------------------------------------------------------------------------
# Trainer
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    """Gradient-descent settings: momentum SGD with optional weight decay."""

    learning_rate: float
    steps: int
    momentum: float = 0.9
    weight_decay: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if not (0.0 <= self.momentum < 1.0):
            raise ConfigError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be >= 0")
        if self.steps < 0:
            raise ConfigError("steps must be >= 0")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        try:
            return cls(
                learning_rate=float(d["learning_rate"]),
                steps=int(d["steps"]),
                momentum=float(d.get("momentum", 0.9)),
                weight_decay=float(d.get("weight_decay", 0.0)),
                seed=int(d.get("seed", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid train config: {exc}") from exc


def train_minimum(landscape: Landscape, init, cfg: TrainConfig) -> np.ndarray:
    """Run momentum SGD from ``init`` and return the best-seen iterate.

    Weight decay shrinks the parameters before each momentum step and is not
    part of the reported loss. Raises ``TrainingDiverged`` (naming the step)
    if the loss ever becomes non-finite.
    """
    theta = as_params(init, landscape.dim).copy()
    if cfg.steps == 0:
        return theta
    velocity = np.zeros_like(theta)
    gamma, mu, lam = cfg.learning_rate, cfg.momentum, cfg.weight_decay
    best_theta, best_loss = theta.copy(), np.inf
    for step in range(cfg.steps):
        try:
            ev = landscape.evaluate(theta)
        except NonFiniteValue as exc:
            raise TrainingDiverged(step) from exc
        if ev.loss < best_loss:
            best_loss, best_theta = ev.loss, theta.copy()
        if lam > 0.0:
            theta *= 1.0 - gamma * lam
        velocity = mu * velocity + ev.gradient
        theta -= gamma * velocity
    try:
        final_loss = landscape.loss(theta)
    except NonFiniteValue as exc:
        raise TrainingDiverged(cfg.steps) from exc
    if final_loss < best_loss:
        return theta
    return best_theta
