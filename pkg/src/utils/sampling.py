"""Random instances for the randomized suites and ``check-order --random``."""

from typing import List, Tuple

import numpy as np

from src.measures import Axis, DiscreteMeasure, SupportGrid


def random_weights(rng: np.random.Generator, size: int, zero_atoms: int = 0) -> np.ndarray:
    """Probability weights with ``zero_atoms`` entries forced to zero."""
    w = rng.uniform(0.1, 1.0, size)
    if zero_atoms:
        w[rng.choice(size, size=min(zero_atoms, size - 1), replace=False)] = 0.0
    return w / w.sum()


def random_points(rng: np.random.Generator, size: int, low: int = -6, high: int = 6) -> np.ndarray:
    """Distinct sorted integer points in ``[low, high]``."""
    return np.sort(rng.choice(np.arange(low, high + 1), size=size, replace=False)).astype(float)


def random_ot_instance(rng: np.random.Generator, m: int, n: int,
                       zero_atoms: int = 0) -> Tuple[SupportGrid, DiscreteMeasure, DiscreteMeasure, np.ndarray]:
    X = random_points(rng, m)
    Y = random_points(rng, n)
    grid = SupportGrid(X, Y)
    mu = DiscreteMeasure(X, random_weights(rng, m, zero_atoms), Axis.X)
    nu = DiscreteMeasure(Y, random_weights(rng, n, zero_atoms), Axis.Y)
    return grid, mu, nu, rng.uniform(-1.0, 1.0, (m, n))


def random_martingale_pair(rng: np.random.Generator, m: int,
                           max_step: int = 3) -> Tuple[SupportGrid, DiscreteMeasure, DiscreteMeasure]:
    """``mu`` on m integer points and ``nu`` obtained by spreading every atom in two."""
    X = random_points(rng, m, -4, 4)
    mu_w = random_weights(rng, m)
    mass = {}
    for x, w in zip(X, mu_w):
        down, up = rng.integers(1, max_step + 1, size=2)
        mass[x - down] = mass.get(x - down, 0.0) + w * up / (down + up)
        mass[x + up] = mass.get(x + up, 0.0) + w * down / (down + up)
    Y = np.array(sorted(mass))
    nu_w = np.array([mass[y] for y in Y])
    grid = SupportGrid(X, Y)
    return grid, DiscreteMeasure(X, mu_w, Axis.X), DiscreteMeasure(Y, nu_w, Axis.Y)


def random_order_pairs(rng: np.random.Generator, count: int) -> List[Tuple[DiscreteMeasure, DiscreteMeasure]]:
    """A mix of ordered, reversed and unrelated 1D pairs."""
    pairs = []
    for k in range(count):
        _, mu, nu = random_martingale_pair(rng, int(rng.integers(1, 5)))
        kind = k % 3
        if kind == 0:
            pairs.append((mu, nu))
        elif kind == 1:
            pairs.append((DiscreteMeasure(nu.points, nu.weights, Axis.X),
                          DiscreteMeasure(mu.points, mu.weights, Axis.Y)))
        else:
            size = int(rng.integers(2, 6))
            other = DiscreteMeasure(random_points(rng, size), random_weights(rng, size), Axis.Y)
            pairs.append((mu, other))
    return pairs


def centred_constraints(rng: np.random.Generator, mu: DiscreteMeasure, nu: DiscreteMeasure,
                        count: int) -> List[np.ndarray]:
    """Tables with ``||f||_inf <= 1`` vanishing under the product coupling."""
    product = np.outer(mu.weights, nu.weights)
    tables = []
    for _ in range(count):
        f = rng.uniform(-1.0, 1.0, product.shape)
        f = f - np.sum(product * f)
        tables.append(f / np.abs(f).max())
    return tables
