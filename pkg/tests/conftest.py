"""Shared test helpers: independent numerical oracles and common fixtures."""

import numpy as np
import pytest

import lossband as lb


def central_difference_gradient(landscape, params, h=1e-5):
    """Finite-difference gradient, independent of the analytic path."""
    params = np.asarray(params, dtype=np.float64)
    grad = np.empty_like(params)
    for i in range(params.shape[0]):
        up, down = params.copy(), params.copy()
        up[i] += h
        down[i] -= h
        grad[i] = (landscape.loss(up) - landscape.loss(down)) / (2.0 * h)
    return grad


def steepest_descent_curve(landscape, start, h=1e-3, max_steps=20000, stop_points=()):
    """Arc-length parametrized steepest descent from ``start``; the exact
    optimal path leaves a saddle along such curves."""
    p = np.asarray(start, dtype=np.float64)
    points = [p.copy()]
    for _ in range(max_steps):
        g = landscape.evaluate(p).gradient
        norm = np.linalg.norm(g)
        if norm < 1e-12:
            break
        p = p - h * g / norm
        points.append(p.copy())
        if any(np.linalg.norm(p - sp) < 1e-3 for sp in stop_points):
            break
    return np.array(points)


def train_xor_minimum(layers, seed, lr=0.3, steps=3000):
    """Train one XOR minimum; returns (landscape, parameters)."""
    spec = lb.MlpSpec(layers, activation="tanh", loss_kind="squared_error")
    net = lb.make_mlp(spec, lb.xor_dataset())
    cfg = lb.TrainConfig(learning_rate=lr, steps=steps, momentum=0.9)
    theta = lb.train_minimum(net, net.random_init(np.random.default_rng(seed)), cfg)
    return net, theta


def random_chain(rng, n_pivots=None, dim=None):
    n = int(rng.integers(3, 9)) if n_pivots is None else n_pivots
    d = int(rng.integers(1, 6)) if dim is None else dim
    return lb.Chain(rng.normal(size=(n, d)))


@pytest.fixture(scope="session")
def double_well():
    return lb.make_double_well()


@pytest.fixture(scope="session")
def double_well_mep(double_well):
    """The true optimal path of the double-well fixture, integrated by
    steepest descent from both sides of the saddle at (0, 0)."""
    minima = (np.array([1.0, 1.0]), np.array([-1.0, 1.0]))
    right = steepest_descent_curve(double_well, [1e-4, 0.0], stop_points=minima)
    left = steepest_descent_curve(double_well, [-1e-4, 0.0], stop_points=minima)
    return np.vstack([left[::-1], right])
