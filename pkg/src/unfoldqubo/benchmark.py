"""Benchmark orchestration: data generation, all unfolders, metrics and reports.

Seed streams. For distribution index ``d`` every random draw is keyed by
``(master_seed, d, stream)`` through ``numpy.random.SeedSequence``:

====== ===============================================
stream use
====== ===============================================
0      truth sample (A)
1      response Monte Carlo truth sample (B)
2      response Monte Carlo detector simulation (B)
3      Poisson pseudo-data (C)
4      bootstrap toys
5      annealer
====== ===============================================

Changing one stream never perturbs another.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .core import (
    Histogram,
    Method,
    ResponseMatrix,
    UnfoldResult,
    UnfoldingError,
    dump_json,
    fold,
)
from .datagen import (
    DetectorModel,
    DistributionSpec,
    Kind,
    apply_detector,
    build_response,
    histogram,
    poissonize,
    sample_truth,
)
from .metrics import binwise_ratio, bootstrap_errors, chi2
from .plotting import emit_plot
from .qubo import DEFAULT_HEADROOM, DISCREPANCY_TAU, build_objective, encode, estimate_bounds, resolve_lambda
from .solvers import AnnealSchedule, solve_anneal, solve_bruteforce, solve_integer_cd
from .unfolders import IbuConfig, SvdConfig, unfold_ibu, unfold_mi, unfold_svd

log = logging.getLogger(__name__)

STREAM_TRUTH, STREAM_MC_TRUTH, STREAM_MC_DETECTOR, STREAM_DATA, STREAM_BOOTSTRAP, STREAM_ANNEAL = range(6)
ALL_METHODS = (Method.MI, Method.IBU, Method.SVD, Method.CD, Method.ANNEAL)
CSV_COLUMNS = ("distribution", "method", "lambda", "chi2", "bin_index", "truth", "measured", "estimate", "error", "ratio")

# benchmark-scale annealing: many short reads beat few long ones on this landscape
BENCH_ANNEAL = AnnealSchedule(sweeps=300, reads=100)


def stream_seed(master_seed: int, dist_index: int, stream: int) -> int:
    ss = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, dist_index, stream])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class BenchmarkConfig:
    distributions: list[DistributionSpec] = field(
        default_factory=lambda: [DistributionSpec.default(k) for k in Kind]
    )
    n_events: int = 10_000
    n_bins: int = 12
    response_events: int = 100_000
    detector: DetectorModel | None = None  # None: per-distribution default in bin-width units
    methods: tuple[Method, ...] = ALL_METHODS
    lam: float | str = "auto"  # "auto": discrepancy-principle choice per data set
    tau: float = DISCREPANCY_TAU
    headroom: float = DEFAULT_HEADROOM
    ibu: IbuConfig = field(default_factory=IbuConfig)
    svd: SvdConfig = field(default_factory=SvdConfig)
    anneal: AnnealSchedule = BENCH_ANNEAL
    bootstrap_toys: int = 30  # 0 disables uncertainties
    master_seed: int = 0
    output_dir: str = "benchmark_out"

    def __post_init__(self):
        self.methods = tuple(Method(m) for m in self.methods)
        if self.n_bins < 3:
            raise UnfoldingError(f"n_bins must be >= 3, got {self.n_bins}")
        if self.n_events < 1 or self.response_events < 1:
            raise UnfoldingError("event counts must be >= 1")
        if not self.methods:
            raise UnfoldingError("at least one method is required")
        if not self.distributions:
            raise UnfoldingError("at least one distribution is required")
        if isinstance(self.lam, str):
            if self.lam != "auto":
                raise UnfoldingError(f"lambda must be a number or 'auto', got {self.lam!r}")
        elif self.lam < 0:
            raise UnfoldingError(f"lambda must be >= 0, got {self.lam}")
        if self.tau <= 0:
            raise UnfoldingError(f"tau must be > 0, got {self.tau}")
        if self.bootstrap_toys == 1 or self.bootstrap_toys < 0:
            raise UnfoldingError("bootstrap_toys must be 0 or >= 2")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "BenchmarkConfig":
        known = {
            "distributions", "n_events", "n_bins", "response_events", "detector", "methods", "lambda",
            "tau", "headroom", "ibu", "svd", "anneal", "bootstrap_toys", "master_seed", "output_dir",
        }
        unknown = set(data) - known
        if unknown:
            raise UnfoldingError(f"unknown config keys: {sorted(unknown)}")
        kw: dict[str, Any] = {}
        if "distributions" in data:
            kw["distributions"] = [
                DistributionSpec.default(d) if isinstance(d, str) else DistributionSpec.from_dict(d)
                for d in data["distributions"]
            ]
        for key in ("n_events", "n_bins", "response_events", "bootstrap_toys", "master_seed"):
            if key in data:
                kw[key] = int(data[key])
        if data.get("detector") is not None:
            kw["detector"] = DetectorModel(**data["detector"])
        if "methods" in data:
            kw["methods"] = tuple(Method(str(m).upper()) for m in data["methods"])
        if "lambda" in data:
            kw["lam"] = data["lambda"] if data["lambda"] == "auto" else float(data["lambda"])
        if "tau" in data:
            kw["tau"] = float(data["tau"])
        if "headroom" in data:
            kw["headroom"] = float(data["headroom"])
        if "ibu" in data:
            kw["ibu"] = IbuConfig(**data["ibu"])
        if "svd" in data:
            kw["svd"] = SvdConfig(**data["svd"])
        if "anneal" in data:
            kw["anneal"] = AnnealSchedule(**data["anneal"])
        if "output_dir" in data:
            kw["output_dir"] = str(data["output_dir"])
        try:
            return cls(**kw)
        except TypeError as exc:
            raise UnfoldingError(str(exc)) from exc

    def to_dict(self) -> dict[str, Any]:
        return {
            "distributions": [d.to_dict() for d in self.distributions],
            "n_events": self.n_events,
            "n_bins": self.n_bins,
            "response_events": self.response_events,
            "detector": None if self.detector is None else self.detector.to_dict(),
            "methods": [m.value for m in self.methods],
            "lambda": self.lam,
            "tau": self.tau,
            "headroom": self.headroom,
            "ibu": {"iterations": self.ibu.iterations,
                    "prior": self.ibu.prior if isinstance(self.ibu.prior, str) else list(self.ibu.prior)},
            "svd": {"rank": self.svd.rank, "rel_threshold": self.svd.rel_threshold},
            "anneal": {"sweeps": self.anneal.sweeps, "reads": self.anneal.reads,
                       "beta_start": self.anneal.beta_start, "beta_end": self.anneal.beta_end,
                       "seed": self.anneal.seed},
            "bootstrap_toys": self.bootstrap_toys,
            "master_seed": self.master_seed,
            "output_dir": self.output_dir,
        }


@dataclass
class Dataset:
    """One generated pseudo-experiment."""

    spec: DistributionSpec
    truth: Histogram
    measured: Histogram
    response: ResponseMatrix
    detector: DetectorModel
    seeds: dict[str, int]

    def to_dict(self) -> dict[str, Any]:
        return {
            "truth": self.truth.to_dict(),
            "measured": self.measured.to_dict(),
            "response": self.response.to_dict(),
            "provenance": {
                "seeds": self.seeds,
                "spec": self.spec.to_dict(),
                "detector": self.detector.to_dict(),
            },
        }


@dataclass
class BenchmarkRecord:
    distribution: str
    method: Method
    lam: float | None
    chi2: float
    truth: np.ndarray
    measured: np.ndarray
    estimate: np.ndarray
    error: np.ndarray
    ratio: np.ndarray
    seed: int
    hyperparameters: dict[str, Any] = field(default_factory=dict)
    diagnostics: dict[str, Any] = field(default_factory=dict)
    status: str = "ok"

    def to_dict(self) -> dict[str, Any]:
        return {
            "distribution": self.distribution,
            "method": self.method.value,
            "lambda": self.lam,
            "chi2": self.chi2,
            "truth": self.truth,
            "measured": self.measured,
            "estimate": self.estimate,
            "errors": self.error,
            "ratio": [None if math.isnan(r) else r for r in self.ratio],
            "seed": self.seed,
            "hyperparameters": self.hyperparameters,
            "diagnostics": self.diagnostics,
            "status": self.status,
        }


def generate_dataset(
    spec: DistributionSpec,
    cfg: BenchmarkConfig,
    dist_index: int,
    master_seed: int | None = None,
    data_seed: int | None = None,
) -> Dataset:
    """Truth (stream A), response from independent MC (B), Poisson data (C).

    ``data_seed`` overrides only stream C.
    """
    master = cfg.master_seed if master_seed is None else master_seed
    seeds = {
        "truth": stream_seed(master, dist_index, STREAM_TRUTH),
        "mc_truth": stream_seed(master, dist_index, STREAM_MC_TRUTH),
        "mc_detector": stream_seed(master, dist_index, STREAM_MC_DETECTOR),
        "data": stream_seed(master, dist_index, STREAM_DATA) if data_seed is None else int(data_seed),
    }
    edges = Histogram.uniform_edges(*spec.range, cfg.n_bins)
    detector = cfg.detector or DetectorModel.default(edges[1] - edges[0])
    truth = histogram(sample_truth(spec, cfg.n_events, seeds["truth"]), edges)
    mc = sample_truth(spec, cfg.response_events, seeds["mc_truth"])
    R = build_response(apply_detector(mc, detector, seeds["mc_detector"]), edges)
    measured = poissonize(fold(R, truth), seeds["data"])
    return Dataset(spec, truth, measured, R, detector, seeds)


def run_method(
    method: Method | str,
    R: ResponseMatrix,
    n: Histogram,
    beta: Histogram | None = None,
    *,
    lam: float | str = "auto",
    tau: float = DISCREPANCY_TAU,
    headroom: float = DEFAULT_HEADROOM,
    ibu: IbuConfig = IbuConfig(),
    svd: SvdConfig = SvdConfig(),
    anneal: AnnealSchedule = BENCH_ANNEAL,
) -> UnfoldResult:
    method = Method(method)
    if method is Method.MI:
        return unfold_mi(R, n, beta)
    if method is Method.IBU:
        return unfold_ibu(R, n, ibu, beta)
    if method is Method.SVD:
        return unfold_svd(R, n, beta, svd)

    lam = resolve_lambda(lam, R, n, beta, tau)
    obj = build_objective(R, n, beta, lam)
    bounds = estimate_bounds(n, R.efficiencies, headroom)
    diag: dict[str, Any] = {"lambda": lam, "z_max": bounds.z_max}
    if method is Method.CD:
        out = solve_integer_cd(obj, bounds, eff=R.efficiencies)
        diag["iterations"] = out.diagnostics["sweeps"]
    else:
        model = encode(obj, bounds)
        diag["bits"] = model.nbits
        out = solve_anneal(model, anneal) if method is Method.ANNEAL else solve_bruteforce(model)
        diag["read_energies"] = out.read_energies
    diag.update({k: v for k, v in out.diagnostics.items() if k != "energy_history"})
    diag["objective"] = out.energy
    diag["residual"] = obj.residual(out.best_z)
    z = out.best_z.astype(float)
    return UnfoldResult(method, z, np.zeros_like(z), diagnostics=diag)


def _unfolder(method: Method, R, cfg: BenchmarkConfig, anneal: AnnealSchedule) -> Callable[[Histogram], UnfoldResult]:
    def run(n: Histogram) -> UnfoldResult:
        return run_method(method, R, n, lam=cfg.lam, tau=cfg.tau, headroom=cfg.headroom, ibu=cfg.ibu, svd=cfg.svd, anneal=anneal)

    return run


def _hyperparameters(method: Method, cfg: BenchmarkConfig) -> dict[str, Any]:
    if method is Method.IBU:
        return {"iterations": cfg.ibu.iterations, "prior": cfg.ibu.prior if isinstance(cfg.ibu.prior, str) else "custom"}
    if method is Method.SVD:
        return {"rank": cfg.svd.rank, "rel_threshold": cfg.svd.rel_threshold}
    if method is Method.CD:
        return {"lambda": cfg.lam, "tau": cfg.tau, "headroom": cfg.headroom}
    if method is Method.ANNEAL:
        return {"lambda": cfg.lam, "tau": cfg.tau, "headroom": cfg.headroom, "sweeps": cfg.anneal.sweeps, "reads": cfg.anneal.reads}
    return {}


def evaluate_dataset(ds: Dataset, cfg: BenchmarkConfig, dist_index: int, master: int) -> list[BenchmarkRecord]:
    records = []
    anneal = replace(cfg.anneal, seed=stream_seed(master, dist_index, STREAM_ANNEAL))
    t = ds.truth.counts
    for method in cfg.methods:
        unfolder = _unfolder(method, ds.response, cfg, anneal)
        try:
            res = unfolder(ds.measured)
            res.chi2 = chi2(ds.truth, res.estimate)
            if cfg.bootstrap_toys:
                res.errors = bootstrap_errors(unfolder, ds.measured, cfg.bootstrap_toys,
                                              stream_seed(master, dist_index, STREAM_BOOTSTRAP), res.diagnostics)
            status = "ok"
        except (UnfoldingError, np.linalg.LinAlgError) as exc:
            log.warning("%s failed on %s: %s", method.value, ds.spec.kind.value, exc)
            nan = np.full(t.shape, np.nan)
            res = UnfoldResult(method, nan, nan, diagnostics={"error": str(exc)})
            res.chi2 = float("nan")
            status = f"failed: {exc}"
        lam = res.diagnostics.get("lambda") if method in (Method.CD, Method.ANNEAL) else None
        records.append(BenchmarkRecord(
            distribution=ds.spec.kind.value,
            method=method,
            lam=lam,
            chi2=res.chi2,
            truth=t.copy(),
            measured=ds.measured.counts.copy(),
            estimate=res.estimate,
            error=res.errors,
            ratio=binwise_ratio(ds.truth, res.estimate),
            seed=master,
            hyperparameters=_hyperparameters(method, cfg),
            diagnostics=res.diagnostics,
            status=status,
        ))
    return records


def _fmt(v) -> str:
    if v is None:
        return ""
    v = float(v)
    return "" if math.isnan(v) else repr(v)


def records_to_csv(records: Sequence[BenchmarkRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in sorted(records, key=lambda r: (r.distribution, r.method.value)):
        for i in range(len(r.truth)):
            w.writerow([r.distribution, r.method.value, _fmt(r.lam), _fmt(r.chi2), i, _fmt(r.truth[i]),
                        _fmt(r.measured[i]), _fmt(r.estimate[i]), _fmt(r.error[i]), _fmt(r.ratio[i])])
    return buf.getvalue()


def plot_records(ds_truth: Histogram, ds_measured: Histogram, records: Sequence[BenchmarkRecord], path, title=""):
    results = [(r.method.value, r.estimate, r.error) for r in records if r.status == "ok"]
    return emit_plot(ds_truth, ds_measured, results, path, title=title)


def run_benchmark(cfg: BenchmarkConfig, write: bool = True) -> list[BenchmarkRecord]:
    """Run every method on every distribution; optionally write CSV, JSON and SVGs."""
    out = Path(cfg.output_dir)
    if write:
        out.mkdir(parents=True, exist_ok=True)
    records: list[BenchmarkRecord] = []
    datasets = []
    for d, spec in enumerate(cfg.distributions):
        ds = generate_dataset(spec, cfg, d)
        recs = evaluate_dataset(ds, cfg, d, cfg.master_seed)
        datasets.append((ds, recs))
        records.extend(recs)
    records.sort(key=lambda r: (r.distribution, r.method.value))
    if write:
        (out / "results.csv").write_text(records_to_csv(records))
        dump_json({"config": cfg.to_dict(), "records": [r.to_dict() for r in records]}, out / "results.json")
        for d, (ds, recs) in enumerate(datasets):
            name = f"{d:02d}_{ds.spec.kind.value}"
            dump_json(ds.to_dict(), out / f"{name}_data.json")
            plot_records(ds.truth, ds.measured, recs, out / f"{name}.svg", title=ds.spec.kind.value)
    return records


@dataclass
class ScanRow:
    lam: float
    method: Method
    chi2: float
    distribution: str
    best: bool = False


def scan_lambda(cfg: BenchmarkConfig, grid: Sequence[float]) -> list[ScanRow]:
    """chi2 of CD and ANNEAL over a lambda grid on fixed data; flags the argmin per method."""
    if not len(grid):
        raise UnfoldingError("lambda grid is empty")
    if any(l < 0 for l in grid):
        raise UnfoldingError("lambda values must be >= 0")
    methods = [m for m in cfg.methods if m in (Method.CD, Method.ANNEAL)] or [Method.CD, Method.ANNEAL]
    rows: list[ScanRow] = []
    for d, spec in enumerate(cfg.distributions):
        ds = generate_dataset(spec, cfg, d)
        anneal = replace(cfg.anneal, seed=stream_seed(cfg.master_seed, d, STREAM_ANNEAL))
        for lam in grid:
            for m in methods:
                res = run_method(m, ds.response, ds.measured, lam=float(lam), headroom=cfg.headroom, anneal=anneal)
                rows.append(ScanRow(float(lam), m, chi2(ds.truth, res.estimate), spec.kind.value))
        for m in methods:
            mine = [r for r in rows if r.method is m and r.distribution == spec.kind.value]
            min(mine, key=lambda r: r.chi2).best = True
    return rows


def scan_to_csv(rows: Sequence[ScanRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("distribution", "lambda", "method", "chi2", "best"))
    for r in rows:
        w.writerow((r.distribution, repr(r.lam), r.method.value, repr(r.chi2), int(r.best)))
    return buf.getvalue()
