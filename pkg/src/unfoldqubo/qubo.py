"""Regularized least-squares objective and its binary (QUBO) encoding.

The integer problem is ``min_z a.z + z^T B z`` with ``a = -2 R^T (n - beta)``
and ``B = R^T R + lam D^T D``; adding ``offset = ||n - beta||^2`` gives the
residual form ``||R z - (n - beta)||^2 + lam ||D z||^2``.

Each ``z_i`` is written as ``p_i . x_i`` with ``p_i = (1, 2, 4, ...)`` and the
bitstrings concatenated bin by bin. ``QuboModel`` keeps the linear part
``a_bin`` separate from the symmetric quadratic part ``B_bin`` so that
``f(x) = a_bin.x + x^T B_bin x``. ``QuboModel.Q`` returns the compact form
with the linear terms absorbed into the diagonal (valid because x_k^2 = x_k).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .core import (
    CapacityError,
    LaplacianOperator,
    ResponseMatrix,
    UnfoldingError,
    _counts,
    laplacian,
)

DEFAULT_LAMBDA = 0.05
DISCREPANCY_TAU = 0.7
LAMBDA_GRID = np.geomspace(1e-6, 1e2, 81)
DEFAULT_HEADROOM = 2.0
MIN_BOUND = 16
MAX_BITS = 4096


@dataclass(frozen=True)
class QuadraticObjective:
    a: np.ndarray
    B: np.ndarray
    offset: float
    lam: float
    R: np.ndarray = field(repr=False)
    data: np.ndarray = field(repr=False)  # n - beta
    D: np.ndarray | None = field(default=None, repr=False)

    @property
    def nbins(self) -> int:
        return self.a.size

    def value(self, z) -> float:
        z = np.asarray(z, dtype=float)
        return float(self.a @ z + z @ self.B @ z)

    def residual(self, z) -> float:
        """Offset-included value, computed from its definition."""
        z = np.asarray(z, dtype=float)
        r = self.R @ z - self.data
        out = float(r @ r)
        if self.lam and self.D is not None:
            dz = self.D @ z
            out += self.lam * float(dz @ dz)
        return out


@dataclass(frozen=True)
class BoundsVector:
    z_max: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z_max)
        if z.ndim != 1 or np.any(z < 1) or np.any(z != np.round(z)):
            raise UnfoldingError("bounds must be positive integers")
        z = z.astype(np.int64)
        z.setflags(write=False)
        object.__setattr__(self, "z_max", z)


@dataclass(frozen=True)
class QuboModel:
    a_bin: np.ndarray
    B_bin: np.ndarray
    precision: list[np.ndarray]
    bit_offsets: np.ndarray
    offset: float
    z_max: np.ndarray

    @property
    def nbits(self) -> int:
        return self.a_bin.size

    @property
    def nbins(self) -> int:
        return len(self.precision)

    @property
    def Q(self) -> np.ndarray:
        return self.B_bin + np.diag(self.a_bin)

    def energy(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(self.a_bin @ x + x @ self.B_bin @ x)

    def encode_point(self, z) -> np.ndarray:
        """Bitstring whose decoded value is ``z`` (must fit the bit budget)."""
        z = np.asarray(z, dtype=np.int64)
        x = np.zeros(self.nbits, dtype=np.int8)
        for i, p in enumerate(self.precision):
            if z[i] < 0 or z[i] >= 2 ** len(p):
                raise UnfoldingError(f"value {z[i]} does not fit {len(p)} bits")
            start = self.bit_offsets[i]
            for k in range(len(p)):
                x[start + k] = (int(z[i]) >> k) & 1
        return x

    def to_dict(self) -> dict[str, Any]:
        """Dense compact form: minimize x^T Q x + offset."""
        return {
            "Q": self.Q.tolist(),
            "precision": [p.tolist() for p in self.precision],
            "bit_offsets": self.bit_offsets.tolist(),
            "z_max": self.z_max.tolist(),
            "offset": self.offset,
            "convention": "linear terms on the diagonal of Q; f(x) = x^T Q x",
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "QuboModel":
        Q = np.asarray(data["Q"], dtype=float)
        a_bin = np.diag(Q).copy()
        B_bin = Q - np.diag(a_bin)
        return cls(
            a_bin,
            B_bin,
            [np.asarray(p, dtype=np.int64) for p in data["precision"]],
            np.asarray(data["bit_offsets"], dtype=np.int64),
            float(data["offset"]),
            np.asarray(data["z_max"], dtype=np.int64),
        )


def build_objective(
    R: ResponseMatrix,
    n,
    beta=None,
    lam: float = DEFAULT_LAMBDA,
    D: LaplacianOperator | None = None,
) -> QuadraticObjective:
    if lam < 0:
        raise UnfoldingError(f"regularization strength must be >= 0, got {lam}")
    d = _counts(n).astype(float)
    if d.shape != (R.nbins,):
        raise UnfoldingError(f"measured histogram has {d.size} bins, response has {R.nbins}")
    if beta is not None:
        b = _counts(beta)
        if b.shape != d.shape:
            raise UnfoldingError("background and measured histograms differ in length")
        d = d - b
    Rm = R.entries
    B = Rm.T @ Rm
    Dm = None
    if lam > 0:
        Dm = (D if D is not None else laplacian(R.nbins)).matrix
        if Dm.shape[1] != R.nbins:
            raise UnfoldingError("Laplacian does not match the number of bins")
        B = B + lam * (Dm.T @ Dm)
    B = 0.5 * (B + B.T)
    a = -2.0 * (Rm.T @ d)
    for arr in (a, B, d):
        arr.setflags(write=False)
    return QuadraticObjective(a, B, float(d @ d), float(lam), Rm, d, Dm)


def select_lambda(R: ResponseMatrix, n, beta=None, tau: float = DISCREPANCY_TAU, grid=LAMBDA_GRID) -> float:
    """Discrepancy-principle choice of the curvature weight.

    Returns the largest grid value whose continuous solution of
    ``(R^T R + lam D^T D) z = R^T (n - beta)`` leaves a squared residual
    ``||R z - (n - beta)||^2`` no larger than ``tau * sum(n)``, the Poisson
    variance budget scaled by ``tau``. The truth is never consulted.
    """
    if R.nbins < 3:
        return 0.0
    d = _counts(n).astype(float)
    if beta is not None:
        d = d - _counts(beta)
    budget = tau * float(np.sum(np.clip(_counts(n), 0, None)))
    Rm = R.entries
    DtD = laplacian(R.nbins).matrix.T @ laplacian(R.nbins).matrix
    RtR, Rtd = Rm.T @ Rm, Rm.T @ d
    chosen = float(grid[0])
    for lam in grid:
        try:
            z = np.linalg.solve(RtR + lam * DtD, Rtd)
        except np.linalg.LinAlgError:
            continue
        r = Rm @ z - d
        if r @ r <= budget:
            chosen = float(lam)
        else:
            break
    return chosen


def resolve_lambda(lam, R: ResponseMatrix, n, beta=None, tau: float = DISCREPANCY_TAU) -> float:
    """Numeric ``lam`` passes through; ``"auto"`` runs :func:`select_lambda`."""
    if isinstance(lam, str):
        if lam != "auto":
            raise UnfoldingError(f"lambda must be a number or 'auto', got {lam!r}")
        return select_lambda(R, n, beta, tau)
    return float(lam)


def estimate_bounds(n, eff, headroom: float = DEFAULT_HEADROOM) -> BoundsVector:
    nc = _counts(n)
    eff = np.asarray(eff, dtype=float)
    if headroom < 1:
        raise UnfoldingError(f"headroom must be >= 1, got {headroom}")
    if np.any(eff <= 0):
        raise UnfoldingError(f"efficiency is zero in bin {int(np.flatnonzero(eff <= 0)[0])}")
    zmax = np.ceil(headroom * np.clip(nc, 0, None) / eff - 1e-9)
    return BoundsVector(np.maximum(MIN_BOUND, zmax).astype(np.int64))


def bit_length(z_max: int) -> int:
    """Bits needed to represent every integer in [0, z_max]."""
    return max(1, int(z_max).bit_length())


def encode(obj: QuadraticObjective, bounds: BoundsVector, max_bits: int = MAX_BITS) -> QuboModel:
    zmax = bounds.z_max
    if zmax.size != obj.nbins:
        raise UnfoldingError("bounds length does not match the objective")
    lengths = [bit_length(v) for v in zmax]
    nbits = sum(lengths)
    if nbits > max_bits:
        raise CapacityError(f"encoding needs {nbits} bits, cap is {max_bits}")
    precision = [2 ** np.arange(l, dtype=np.int64) for l in lengths]
    offsets = np.concatenate([[0], np.cumsum(lengths)[:-1]]).astype(np.int64)

    # P maps bits to bin values: z = P x
    P = np.zeros((obj.nbins, nbits))
    for i, p in enumerate(precision):
        P[i, offsets[i] : offsets[i] + len(p)] = p
    a_bin = obj.a @ P
    B_bin = P.T @ obj.B @ P
    B_bin = 0.5 * (B_bin + B_bin.T)
    return QuboModel(a_bin, B_bin, precision, offsets, obj.offset, zmax.copy())


def decode(model: QuboModel, x, diagnostics: dict | None = None) -> np.ndarray:
    """Bin values for bitstring ``x``, clamped to the bounds."""
    x = np.asarray(x)
    if x.shape != (model.nbits,):
        raise UnfoldingError(f"bitstring has length {x.size}, model has {model.nbits} bits")
    z = decode_raw(model, x)
    clamped = z > model.z_max
    if np.any(clamped):
        if diagnostics is not None:
            diagnostics["clamped_bins"] = np.flatnonzero(clamped).tolist()
        z = np.minimum(z, model.z_max)
    return z


def decode_raw(model: QuboModel, x) -> np.ndarray:
    """Unclamped decode; matches the energy the QUBO actually assigns."""
    x = np.asarray(x)
    return np.array(
        [int(model.precision[i] @ x[model.bit_offsets[i] : model.bit_offsets[i] + len(model.precision[i])])
         for i in range(model.nbins)],
        dtype=np.int64,
    )


def objective_value(obj: QuadraticObjective, z, include_offset: bool = False) -> float:
    v = obj.value(z)
    return v + obj.offset if include_offset else v
