"""Reconstruction-quality metrics and Poisson-bootstrap uncertainties."""

from __future__ import annotations

import logging
from typing import Callable

import numpy as np

from .core import Histogram, UnfoldResult, UnfoldingError, _counts
from .datagen import rng_from

log = logging.getLogger(__name__)


def chi2(z_true, z_hat, return_excluded: bool = False):
    """Pearson chi-square of an estimate against the truth.

    Bins with zero truth are left out; pass ``return_excluded=True`` to also
    get how many were dropped.
    """
    t = _counts(z_true)
    z = np.asarray(z_hat, dtype=float)
    if t.shape != z.shape:
        raise UnfoldingError(f"truth has {t.size} bins, estimate has {z.size}")
    keep = t > 0
    if not np.any(keep):
        raise UnfoldingError("every truth bin is empty; chi2 undefined")
    value = float(np.sum((t[keep] - z[keep]) ** 2 / t[keep]))
    if return_excluded:
        return value, int(np.count_nonzero(~keep))
    return value


def binwise_ratio(z_true, z_hat) -> np.ndarray:
    """estimate / truth per bin; NaN marks empty truth bins."""
    t = _counts(z_true)
    z = np.asarray(z_hat, dtype=float)
    if t.shape != z.shape:
        raise UnfoldingError(f"truth has {t.size} bins, estimate has {z.size}")
    out = np.full(t.shape, np.nan)
    np.divide(z, t, out=out, where=t > 0)
    return out


def bootstrap_errors(
    unfolder: Callable[[Histogram], UnfoldResult | np.ndarray],
    n: Histogram,
    n_toys: int,
    seed: int,
    diagnostics: dict | None = None,
) -> np.ndarray:
    """Per-bin standard deviation of ``unfolder`` over Poisson replicas of ``n``.

    ``unfolder`` closes over the response and its configuration. Toys whose
    unfolding raises are skipped; more than half failing is an error.
    """
    if n_toys < 2:
        raise UnfoldingError(f"need at least 2 toys, got {n_toys}")
    rng = rng_from(seed)
    counts = _counts(n)
    estimates = []
    failed = 0
    for _ in range(n_toys):
        toy = Histogram(n.edges, rng.poisson(counts).astype(float), integer=True)
        try:
            res = unfolder(toy)
        except (UnfoldingError, np.linalg.LinAlgError, FloatingPointError) as exc:
            log.debug("bootstrap toy failed: %s", exc)
            failed += 1
            continue
        estimates.append(res.estimate if isinstance(res, UnfoldResult) else np.asarray(res, dtype=float))
    if diagnostics is not None:
        diagnostics["bootstrap_toys"] = n_toys
        diagnostics["bootstrap_failed"] = failed
    if failed * 2 > n_toys or len(estimates) < 2:
        raise UnfoldingError(f"{failed} of {n_toys} bootstrap toys failed")
    return np.std(np.vstack(estimates), axis=0, ddof=1)
