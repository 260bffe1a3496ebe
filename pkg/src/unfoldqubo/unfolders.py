"""Baseline unfolding estimators: matrix inversion, iterative Bayes, truncated SVD."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    Method,
    ResponseMatrix,
    SingularResponseError,
    UnfoldResult,
    UnfoldingError,
    _counts,
)

MAX_CONDITION = 1e12


@dataclass(frozen=True)
class IbuConfig:
    iterations: int = 4
    prior: str | np.ndarray = "uniform"  # "uniform", "measured" or an explicit vector

    def __post_init__(self):
        if self.iterations < 1:
            raise UnfoldingError(f"IBU needs at least one iteration, got {self.iterations}")
        if not isinstance(self.prior, str):
            p = np.asarray(self.prior, dtype=float)
            if np.any(p < 0) or p.sum() <= 0:
                raise UnfoldingError("custom prior must be non-negative with positive sum")
        elif self.prior not in ("uniform", "measured"):
            raise UnfoldingError(f"unknown prior {self.prior!r}")


@dataclass(frozen=True)
class SvdConfig:
    """``rank=None`` keeps every singular value >= ``rel_threshold * s_max``."""

    rank: int | None = None
    rel_threshold: float = 1e-3

    def __post_init__(self):
        if self.rank is not None and self.rank < 1:
            raise UnfoldingError(f"SVD rank must be >= 1, got {self.rank}")


def _data_minus_background(R: ResponseMatrix, n, beta) -> np.ndarray:
    nc = _counts(n)
    if nc.shape != (R.nbins,):
        raise UnfoldingError(f"measured histogram has {nc.size} bins, response has {R.nbins}")
    if beta is None:
        return nc.copy()
    bc = _counts(beta)
    if bc.shape != nc.shape:
        raise UnfoldingError("background and measured histograms differ in length")
    return nc - bc


def unfold_mi(R: ResponseMatrix, n, beta=None) -> UnfoldResult:
    d = _data_minus_background(R, n, beta)
    cond = float(np.linalg.cond(R.entries))
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise SingularResponseError(f"response matrix is numerically singular (condition {cond:.3g})")
    z = np.linalg.solve(R.entries, d)
    return UnfoldResult(Method.MI, z, np.zeros_like(z), diagnostics={"condition": cond})


def unfold_ibu(R: ResponseMatrix, n, cfg: IbuConfig = IbuConfig(), beta=None) -> UnfoldResult:
    """D'Agostini iterations, stopped after exactly ``cfg.iterations`` updates."""
    d = _data_minus_background(R, n, beta)
    eff = R.efficiencies
    if np.any(eff <= 0):
        raise UnfoldingError("IBU requires strictly positive efficiencies")
    if isinstance(cfg.prior, str):
        if cfg.prior == "uniform":
            z = np.full(R.nbins, max(d.sum(), 1.0) / R.nbins)
        else:
            z = d.astype(float).copy()
    else:
        z = np.asarray(cfg.prior, dtype=float).copy()
    if z.shape != (R.nbins,) or np.any(z <= 0):
        raise UnfoldingError("IBU prior must be strictly positive in every bin")

    Rm = R.entries
    skipped = 0
    for _ in range(cfg.iterations):
        mu = Rm @ z
        live = mu > 0
        skipped += int(np.count_nonzero(~live & (d > 0)))
        ratio = np.where(live, d / np.where(live, mu, 1.0), 0.0)
        z = z * (Rm.T @ ratio) / eff
    diag = {"iterations": cfg.iterations}
    if skipped:
        diag["warning"] = f"{skipped} zero-denominator terms skipped"
    return UnfoldResult(Method.IBU, z, np.zeros_like(z), diagnostics=diag)


def unfold_svd(R: ResponseMatrix, n, beta=None, cfg: SvdConfig = SvdConfig()) -> UnfoldResult:
    """Truncated pseudo-inverse; singular values tied with the k-th largest are kept."""
    d = _data_minus_background(R, n, beta)
    U, s, Vt = np.linalg.svd(R.entries)
    diag = {"singular_values": s.tolist()}
    smax = s[0] if s.size else 0.0
    tol = 1e-12 * smax
    nonzero = int(np.count_nonzero(s > max(tol, 0.0)))
    if nonzero == 0:
        raise SingularResponseError("response matrix has no nonzero singular values")
    if cfg.rank is None:
        k = int(np.count_nonzero(s >= cfg.rel_threshold * smax))
    else:
        k = cfg.rank
        if k > nonzero:
            diag["warning"] = f"rank {k} clipped to {nonzero} nonzero singular values"
            k = nonzero
    keep = s >= s[k - 1] - tol
    keep &= s > tol
    inv = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
    z = Vt.T @ (inv * (U.T @ d))
    diag["rank"] = int(np.count_nonzero(keep))
    return UnfoldResult(Method.SVD, z, np.zeros_like(z), diagnostics=diag)
