"""Spectra-plus-ratio figures written as standalone SVG.

Rendering uses the object-oriented matplotlib API (no pyplot state) with a
fixed SVG hash salt and no timestamp, so identical inputs give identical bytes.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import numpy as np  # noqa: E402
from matplotlib import rc_context  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

from .core import Histogram  # noqa: E402

TRUTH_COLOR = "tab:blue"
MEASURED_COLOR = "tab:orange"
METHOD_STYLE = {
    "MI": ("tab:green", "o"),
    "IBU": ("tab:red", "s"),
    "SVD": ("tab:purple", "^"),
    "CD": ("tab:brown", "D"),
    "ANNEAL": ("tab:pink", "v"),
    "BRUTE": ("tab:gray", "x"),
}

_RC = {
    "svg.hashsalt": "unfoldqubo",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.grid": False,
}


def emit_plot(
    truth: Histogram,
    measured: Histogram,
    results: Sequence[tuple[str, np.ndarray, np.ndarray]],
    path,
    title: str = "",
) -> Path:
    """Write truth/measured bars, unfolded markers and a ratio panel.

    ``results`` holds ``(method, estimate, errors)`` triples. Every truth and
    measured bin gets its own SVG group id (``truth_bin_<i>``,
    ``measured_bin_<i>``) so the document can be inspected structurally.
    """
    path = Path(path)
    if truth.nbins != measured.nbins or not np.array_equal(truth.edges, measured.edges):
        raise ValueError("truth and measured histograms must share binning")
    edges = truth.edges
    centers = truth.centers
    widths = np.diff(edges)
    t = truth.counts

    with rc_context(_RC):
        fig = Figure(figsize=(6.0, 5.0))
        top, bottom = fig.subplots(2, 1, sharex=True, gridspec_kw={"height_ratios": [3, 1], "hspace": 0.05})

        for label, hist, color in (("truth", truth, TRUTH_COLOR), ("measured", measured, MEASURED_COLOR)):
            bars = top.bar(edges[:-1], hist.counts, width=widths, align="edge", fill=False,
                           edgecolor=color, linewidth=1.2, label=label.capitalize())
            for i, patch in enumerate(bars.patches):
                patch.set_gid(f"{label}_bin_{i}")

        k = max(len(results), 1)
        offsets = (np.arange(len(results)) - (k - 1) / 2) / (k + 2)
        for (method, est, err), frac in zip(results, offsets):
            dx = frac * widths
            color, marker = METHOD_STYLE.get(method, ("black", "o"))
            est = np.asarray(est, dtype=float)
            err = np.asarray(err, dtype=float)
            top.errorbar(centers + dx, est, yerr=err, fmt=marker, color=color, markersize=4,
                         capsize=2, linewidth=0.8, label=method, gid=f"method_{method}")
            ratio = np.full_like(est, np.nan)
            np.divide(est, t, out=ratio, where=t > 0)
            rerr = np.full_like(est, np.nan)
            np.divide(err, t, out=rerr, where=t > 0)
            bottom.errorbar(centers + dx, ratio, yerr=rerr, fmt=marker, color=color, markersize=4,
                            capsize=2, linewidth=0.8)

        bottom.axhline(1.0, color=TRUTH_COLOR, linewidth=1.0, linestyle="--", gid="unity_line")
        top.set_ylabel("Entries")
        top.legend(frameon=False, fontsize=7, ncol=2)
        if title:
            top.set_title(title)
        bottom.set_ylabel("Unfolded / truth")
        bottom.set_xlabel("Observable")
        bottom.set_xlim(edges[0], edges[-1])
        bottom.set_ylim(0.0, 2.0)
        fig.align_ylabels((top, bottom))

        try:
            fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")
        except OSError as exc:
            raise OSError(f"cannot write figure to {path}: {exc}") from exc
    return path
