"""Synthetic truth spectra, a toy detector and response-matrix estimation."""

from __future__ import annotations

import enum
from dataclasses import dataclass, asdict
from typing import Any

import numpy as np

from .core import Histogram, ResponseMatrix, UnfoldingError


class Kind(str, enum.Enum):
    NORMAL = "normal"
    EXPONENTIAL = "exponential"
    GAMMA = "gamma"
    BREIT_WIGNER = "breit_wigner"


# parameter names accepted per kind
_PARAMS = {
    Kind.NORMAL: ("mean", "sigma"),
    Kind.EXPONENTIAL: ("rate",),
    Kind.GAMMA: ("shape", "scale"),
    Kind.BREIT_WIGNER: ("location", "width"),
}
_POSITIVE = {"sigma", "rate", "shape", "scale", "width"}


def rng_from(*keys: int) -> np.random.Generator:
    """PCG64 generator keyed by an integer tuple (SeedSequence entropy)."""
    return np.random.default_rng(np.random.SeedSequence([int(k) & 0xFFFFFFFFFFFFFFFF for k in keys]))


@dataclass(frozen=True)
class DistributionSpec:
    kind: Kind
    parameters: dict[str, float]
    range: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "range", tuple(float(v) for v in self.range))
        low, high = self.range
        if not low < high:
            raise UnfoldingError(f"range must satisfy low < high, got {self.range}")
        expected = _PARAMS[self.kind]
        if set(self.parameters) != set(expected):
            raise UnfoldingError(f"{self.kind.value} takes parameters {expected}, got {sorted(self.parameters)}")
        for name, value in self.parameters.items():
            if not np.isfinite(value) or (name in _POSITIVE and value <= 0):
                raise UnfoldingError(f"invalid {self.kind.value} parameter {name}={value}")

    @classmethod
    def default(cls, kind: Kind | str, low: float | None = None, high: float | None = None) -> "DistributionSpec":
        """Shapes used by the benchmark: symmetric, falling, skewed, resonant."""
        kind = Kind(kind)
        default_ranges = {
            Kind.NORMAL: (-4.0, 4.0),
            Kind.EXPONENTIAL: (0.0, 6.0),
            Kind.GAMMA: (0.0, 16.0),
            Kind.BREIT_WIGNER: (0.0, 10.0),
        }
        lo, hi = default_ranges[kind]
        lo = lo if low is None else low
        hi = hi if high is None else high
        width = hi - lo
        center = 0.5 * (lo + hi)
        params = {
            Kind.NORMAL: {"mean": center, "sigma": width / 8},
            Kind.EXPONENTIAL: {"rate": 6.0 / width},
            Kind.GAMMA: {"shape": 2.0, "scale": width / 8},
            Kind.BREIT_WIGNER: {"location": center, "width": width / 16},
        }[kind]
        return cls(kind, params, (lo, hi))

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "parameters": dict(self.parameters), "range": list(self.range)}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "DistributionSpec":
        if "parameters" not in data:
            rng = data.get("range", (None, None))
            return cls.default(data["kind"], *rng)
        return cls(data["kind"], {k: float(v) for k, v in data["parameters"].items()}, data["range"])


@dataclass(frozen=True)
class DetectorModel:
    smear_sigma: float
    bias: float
    efficiency: float

    def __post_init__(self):
        if not self.smear_sigma >= 0:
            raise UnfoldingError(f"smear_sigma must be >= 0, got {self.smear_sigma}")
        if not 0 < self.efficiency <= 1:
            raise UnfoldingError(f"efficiency must be in (0, 1], got {self.efficiency}")
        if not np.isfinite(self.bias):
            raise UnfoldingError("bias must be finite")

    @classmethod
    def default(cls, bin_width: float) -> "DetectorModel":
        return cls(smear_sigma=bin_width, bias=0.25 * bin_width, efficiency=0.7)

    @classmethod
    def transparent(cls) -> "DetectorModel":
        return cls(0.0, 0.0, 1.0)

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class TruthRecoSample:
    """Paired truth and reco values; undetected events carry NaN reco."""

    truth_values: np.ndarray
    reco_values: np.ndarray

    def __post_init__(self):
        if len(self.truth_values) != len(self.reco_values):
            raise UnfoldingError("truth and reco arrays must have equal length")

    @property
    def detected(self) -> np.ndarray:
        return ~np.isnan(self.reco_values)


def _draw(spec: DistributionSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    p = spec.parameters
    if spec.kind is Kind.NORMAL:
        return rng.normal(p["mean"], p["sigma"], size)
    if spec.kind is Kind.EXPONENTIAL:
        return rng.exponential(1.0 / p["rate"], size)
    if spec.kind is Kind.GAMMA:
        return rng.gamma(p["shape"], p["scale"], size)
    # "width" is the full width at half maximum
    return p["location"] + 0.5 * p["width"] * rng.standard_cauchy(size)


def sample_truth(spec: DistributionSpec, n_events: int, seed: int) -> np.ndarray:
    """Draw ``n_events`` values, rejecting anything outside ``spec.range``."""
    if n_events < 1:
        raise UnfoldingError(f"n_events must be >= 1, got {n_events}")
    rng = rng_from(seed)
    low, high = spec.range
    out = np.empty(0)
    for _ in range(10_000):
        need = n_events - out.size
        if need == 0:
            return out
        draws = _draw(spec, rng, max(need, 64))
        draws = draws[(draws >= low) & (draws < high)]
        out = np.concatenate([out, draws[:need]])
    raise UnfoldingError(f"window {spec.range} holds too little probability mass for {spec.kind.value}")


def apply_detector(truth, model: DetectorModel, seed: int) -> TruthRecoSample:
    truth = np.asarray(truth, dtype=float)
    rng = rng_from(seed)
    detected = rng.random(truth.size) < model.efficiency
    noise = rng.normal(0.0, 1.0, truth.size) * model.smear_sigma
    reco = np.where(detected, truth + model.bias + noise, np.nan)
    return TruthRecoSample(truth, reco)


def build_response(sample: TruthRecoSample, edges) -> ResponseMatrix:
    """Migration matrix from truth-reco pairs; out-of-window reco counts as lost."""
    edges = np.asarray(edges, dtype=float)
    m = len(edges) - 1
    truth = np.asarray(sample.truth_values, dtype=float)
    if truth.size == 0:
        raise UnfoldingError("empty truth-reco sample")
    tbin = np.searchsorted(edges, truth, side="right") - 1
    tbin[truth == edges[-1]] = m - 1
    in_truth = (tbin >= 0) & (tbin < m)
    gen = np.bincount(tbin[in_truth], minlength=m)
    empty = np.flatnonzero(gen == 0)
    if empty.size:
        raise UnfoldingError(f"truth bin {int(empty[0])} has no events; response column undefined")

    reco = sample.reco_values
    ok = in_truth & ~np.isnan(reco)
    rbin = np.full(truth.size, -1)
    rbin[ok] = np.searchsorted(edges, reco[ok], side="right") - 1
    rbin[ok & (reco == edges[-1])] = m - 1
    ok &= (rbin >= 0) & (rbin < m)
    counts = np.zeros((m, m))
    np.add.at(counts, (rbin[ok], tbin[ok]), 1.0)
    return ResponseMatrix(counts / gen[None, :])


def histogram(values, edges, integer: bool = True) -> Histogram:
    values = np.asarray(values, dtype=float)
    counts, _ = np.histogram(values[~np.isnan(values)], bins=edges)
    return Histogram(edges, counts.astype(float), integer=integer)


def poissonize(mu: Histogram, seed: int) -> Histogram:
    counts = mu.counts if isinstance(mu, Histogram) else np.asarray(mu, dtype=float)
    if np.any(counts < 0):
        raise UnfoldingError("Poisson means must be non-negative")
    rng = rng_from(seed)
    n = rng.poisson(counts).astype(float)
    edges = mu.edges if isinstance(mu, Histogram) else np.arange(counts.size + 1, dtype=float)
    return Histogram(edges, n, integer=True)
