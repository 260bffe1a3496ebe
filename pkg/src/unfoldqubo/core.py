"""Histograms, detector response, the folding map and the Laplacian."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import gammaln

EFFICIENCY_ATOL = 1e-12


class UnfoldingError(ValueError):
    """Base class for rejected inputs."""


class SingularResponseError(UnfoldingError):
    pass


class CapacityError(UnfoldingError):
    pass


class Method(str, enum.Enum):
    MI = "MI"
    IBU = "IBU"
    SVD = "SVD"
    CD = "CD"  # bounded-integer coordinate descent, classical MIQP stand-in
    ANNEAL = "ANNEAL"  # simulated annealing on the QUBO, hybrid-solver stand-in
    BRUTE = "BRUTE"


def _as_vector(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise UnfoldingError(f"{name} must be one-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Histogram:
    """Binned spectrum. ``integer`` marks observed (count-valued) data."""

    edges: np.ndarray
    counts: np.ndarray
    integer: bool = False

    def __post_init__(self):
        edges = _as_vector(self.edges, "edges")
        counts = _as_vector(self.counts, "counts")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "counts", counts)
        if len(edges) != len(counts) + 1:
            raise UnfoldingError(
                f"need len(edges) == len(counts) + 1, got {len(edges)} and {len(counts)}"
            )
        if len(counts) < 1:
            raise UnfoldingError("histogram needs at least one bin")
        if not np.all(np.isfinite(edges)) or np.any(np.diff(edges) <= 0):
            raise UnfoldingError("edges must be finite and strictly increasing")
        if not np.all(np.isfinite(counts)) or np.any(counts < 0):
            raise UnfoldingError("counts must be finite and non-negative")
        if self.integer and np.any(counts != np.round(counts)):
            raise UnfoldingError("observed histogram must be integer-valued")

    @property
    def nbins(self) -> int:
        return len(self.counts)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @classmethod
    def zeros_like(cls, other: "Histogram") -> "Histogram":
        return cls(other.edges, np.zeros(other.nbins))

    @classmethod
    def uniform_edges(cls, low: float, high: float, nbins: int) -> np.ndarray:
        return np.linspace(low, high, nbins + 1)

    def to_dict(self) -> dict[str, Any]:
        return {"edges": self.edges.tolist(), "counts": self.counts.tolist()}

    @classmethod
    def from_dict(cls, data: dict[str, Any], integer: bool = False) -> "Histogram":
        return cls(data["edges"], data["counts"], integer=integer)


@dataclass(frozen=True)
class ResponseMatrix:
    """Square migration matrix; ``entries[i, j]`` = P(reco bin i | truth bin j).

    Column sums are the per-truth-bin efficiencies.
    """

    entries: np.ndarray
    efficiencies: np.ndarray = None

    def __post_init__(self):
        R = np.array(self.entries, dtype=float)
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise UnfoldingError(f"response matrix must be square, got shape {R.shape}")
        if not np.all(np.isfinite(R)) or np.any(R < 0) or np.any(R > 1):
            raise UnfoldingError("response entries must be probabilities in [0, 1]")
        colsum = R.sum(axis=0)
        if self.efficiencies is None:
            eff = colsum
        else:
            eff = np.array(self.efficiencies, dtype=float)
            if eff.shape != (R.shape[1],):
                raise UnfoldingError("efficiency vector length must match the matrix")
            if np.any(np.abs(colsum - eff) > EFFICIENCY_ATOL):
                raise UnfoldingError("column sums of the response do not match efficiencies")
        if np.any(eff < -EFFICIENCY_ATOL) or np.any(eff > 1 + EFFICIENCY_ATOL):
            raise UnfoldingError("efficiencies must lie in [0, 1]")
        R.setflags(write=False)
        eff = np.array(eff)
        eff.setflags(write=False)
        object.__setattr__(self, "entries", R)
        object.__setattr__(self, "efficiencies", eff)

    @property
    def nbins(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def identity(cls, nbins: int) -> "ResponseMatrix":
        return cls(np.eye(nbins))

    def to_dict(self) -> dict[str, Any]:
        return {"entries": self.entries.tolist(), "efficiencies": self.efficiencies.tolist()}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ResponseMatrix":
        return cls(data["entries"], data.get("efficiencies"))


@dataclass(frozen=True)
class LaplacianOperator:
    """(M-2) x M second-difference matrix with rows (-1, 2, -1)."""

    matrix: np.ndarray

    def apply(self, z) -> np.ndarray:
        return self.matrix @ np.asarray(z, dtype=float)

    def penalty(self, z) -> float:
        dz = self.apply(z)
        return float(dz @ dz)


@dataclass
class UnfoldResult:
    method: Method
    estimate: np.ndarray
    errors: np.ndarray
    chi2: float = 0.0
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.method = Method(self.method)
        self.estimate = np.asarray(self.estimate, dtype=float)
        self.errors = np.asarray(self.errors, dtype=float)
        if self.estimate.shape != self.errors.shape or self.estimate.ndim != 1:
            raise UnfoldingError("estimate and errors must be vectors of equal length")
        if self.chi2 < 0:
            raise UnfoldingError("chi2 must be non-negative")

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method.value,
            "estimate": self.estimate.tolist(),
            "errors": self.errors.tolist(),
            "chi2": float(self.chi2),
            "diagnostics": _jsonable(self.diagnostics),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def dump_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_json(path):
    with open(path) as fh:
        return json.load(fh)


def _counts(h) -> np.ndarray:
    return h.counts if isinstance(h, Histogram) else np.asarray(h, dtype=float)


def fold_counts(R: ResponseMatrix, z, beta=None) -> np.ndarray:
    """``R z + beta`` as a raw vector; ``z`` may hold negative entries."""
    zc = _counts(z)
    if zc.shape != (R.nbins,):
        raise UnfoldingError(f"truth has {zc.size} bins, response has {R.nbins}")
    mu = R.entries @ zc
    if beta is not None:
        bc = _counts(beta)
        if bc.shape != mu.shape:
            raise UnfoldingError(f"background has {bc.size} bins, response has {R.nbins}")
        mu = mu + bc
    return mu


def fold(R: ResponseMatrix, z: Histogram, beta: Histogram | None = None) -> Histogram:
    """Expected reco spectrum ``mu = R z + beta``."""
    mu = fold_counts(R, z, beta)
    scale = max(1.0, float(np.max(np.abs(mu))))
    if np.any(mu < -1e-9 * scale):
        raise UnfoldingError("folded spectrum has negative bins; use fold_counts for signed input")
    edges = z.edges if isinstance(z, Histogram) else np.arange(R.nbins + 1, dtype=float)
    return Histogram(edges, np.clip(mu, 0.0, None))


def laplacian(nbins: int) -> LaplacianOperator:
    if nbins < 3:
        raise UnfoldingError(f"curvature penalty needs at least 3 bins, got {nbins}; use lambda = 0")
    D = np.zeros((nbins - 2, nbins))
    for r in range(nbins - 2):
        D[r, r : r + 3] = (-1.0, 2.0, -1.0)
    D.setflags(write=False)
    return LaplacianOperator(D)


def poisson_loglik(n, mu, diagnostics: dict | None = None) -> float:
    """Sum of Poisson log-probabilities of ``n`` given expectations ``mu``.

    Returns ``-inf`` (and sets ``diagnostics["zero_expectation"]``) when a
    bin with observed counts has zero expectation.
    """
    n = _counts(n)
    mu = _counts(mu)
    if n.shape != mu.shape:
        raise UnfoldingError("dimension mismatch between n and mu")
    if np.any((mu == 0) & (n > 0)):
        if diagnostics is not None:
            diagnostics["zero_expectation"] = True
        return float("-inf")
    with np.errstate(divide="ignore"):
        logmu = np.where(n > 0, np.log(np.where(mu > 0, mu, 1.0)), 0.0)
    return float(np.sum(n * logmu - mu - gammaln(n + 1.0)))
