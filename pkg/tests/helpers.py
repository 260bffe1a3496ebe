"""Random small unfolding instances and independent reference computations."""

from __future__ import annotations

import itertools

import numpy as np

from unfoldqubo import ResponseMatrix


def random_response(rng: np.random.Generator, m: int, eff_low: float = 0.5) -> ResponseMatrix:
    """Diagonally heavy migration matrix with column sums in [eff_low, 1)."""
    raw = rng.uniform(0.0, 1.0, (m, m)) + 2.0 * np.eye(m)
    raw /= raw.sum(axis=0)
    return ResponseMatrix(raw * rng.uniform(eff_low, 1.0, m))


def second_difference(m: int) -> np.ndarray:
    # built from numpy's own differencing, not from the package
    return np.diff(np.eye(m), n=2, axis=0)


def direct_residual(R: np.ndarray, n: np.ndarray, lam: float, z: np.ndarray) -> float:
    r = R @ z - n
    out = float(r @ r)
    if lam and R.shape[0] >= 3:
        dz = second_difference(R.shape[0]) @ z
        out += lam * float(dz @ dz)
    return out


def enumerate_integer_optimum(R: np.ndarray, n: np.ndarray, lam: float, z_max) -> tuple[float, tuple[int, ...]]:
    """Minimum of the residual over the integer box, by plain enumeration."""
    best = (np.inf, ())
    for z in itertools.product(*(range(int(v) + 1) for v in z_max)):
        val = direct_residual(R, n, lam, np.asarray(z, dtype=float))
        if val < best[0]:
            best = (val, z)
    return best


def small_instance(rng: np.random.Generator, m: int, z_max) -> tuple[ResponseMatrix, np.ndarray]:
    R = random_response(rng, m)
    z_true = np.array([rng.integers(0, v + 1) for v in z_max], dtype=float)
    n = rng.poisson(R.entries @ z_true + 0.5).astype(float)
    return R, n
