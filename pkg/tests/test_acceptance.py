"""Acceptance suite: one PASS/FAIL line per criterion.

Run ``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
Each check returns ``(passed, detail)``; the pytest wrappers print the line
and then assert on it.
"""

from __future__ import annotations

import math
import sys
import tempfile
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import direct_residual, enumerate_integer_optimum, random_response, small_instance  # noqa: E402

from unfoldqubo import (  # noqa: E402
    AnnealSchedule,
    BoundsVector,
    IbuConfig,
    ResponseMatrix,
    SvdConfig,
    build_objective,
    encode,
    fold_counts,
    solve_anneal,
    solve_bruteforce,
    solve_integer_cd,
    unfold_ibu,
    unfold_mi,
    unfold_svd,
)
from unfoldqubo.benchmark import BenchmarkConfig, evaluate_dataset, generate_dataset, run_benchmark  # noqa: E402
from unfoldqubo.datagen import DetectorModel, Kind  # noqa: E402
from unfoldqubo.qubo import decode_raw  # noqa: E402

METHODS = ("MI", "IBU", "SVD", "CD", "ANNEAL")


def _line(number: int, name: str, passed: bool, detail: str) -> str:
    return f"criterion {number} [{'PASS' if passed else 'FAIL'}] {name}: {detail}"


def _bits(model_or_n) -> np.ndarray:
    n = model_or_n
    return ((np.arange(1 << n)[:, None] >> np.arange(n)[None, :]) & 1).astype(np.int8)


def check_qubo_equivalence(instances: int = 100, seed: int = 11):
    """f_Q(x) + offset equals the directly computed residual for every bitstring."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(instances):
        m = int(rng.integers(2, 5))
        lam = 0.0 if m < 3 else float(rng.choice([0.0, 0.1, 1.0]))
        z_max = rng.integers(1, 8, m)
        R, n = small_instance(rng, m, z_max)
        model = encode(build_objective(R, n, lam=lam), BoundsVector(z_max))
        X = _bits(model.nbits)
        for x in X:
            z = decode_raw(model, x).astype(float)
            ref = direct_residual(R.entries, n, lam, z)
            err = abs(model.energy(x) + model.offset - ref) / (1.0 + abs(ref))
            worst = max(worst, err)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 10.0
    return ok, f"max scaled error {worst:.2e} (<= 1e-9), {elapsed:.1f}s (< 10s)"


def _oracle_instances(count: int, seed: int):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        m = int(rng.integers(2, 5))
        z_max = rng.choice([1, 3, 7], m)
        if sum(int(v).bit_length() for v in z_max) > 12:
            continue
        lam = 0.0 if m < 3 else float(rng.choice([0.0, 0.1, 1.0]))
        R, n = small_instance(rng, m, z_max)
        out.append((R, n, lam, z_max))
    return out


def check_oracle_agreement(instances: int = 100, seed: int = 23):
    """Annealer hits the exhaustive optimum; coordinate descent lands within 1%."""
    t0 = time.perf_counter()
    anneal_hits = cd_hits = brute_ok = 0
    for i, (R, n, lam, z_max) in enumerate(_oracle_instances(instances, seed)):
        obj = build_objective(R, n, lam=lam)
        bounds = BoundsVector(z_max)
        model = encode(obj, bounds)
        ref_residual, _ = enumerate_integer_optimum(R.entries, n, lam, z_max)
        e_opt = ref_residual - obj.offset
        tol = 1e-9 * (1.0 + abs(e_opt))
        brute_ok += abs(solve_bruteforce(model).energy - e_opt) <= tol
        ann = solve_anneal(model, AnnealSchedule(seed=i))
        anneal_hits += ann.energy <= e_opt + tol
        cd = solve_integer_cd(obj, bounds, seed=i)
        cd_hits += cd.energy - e_opt <= 0.01 * abs(e_opt) + tol
    elapsed = time.perf_counter() - t0
    ok = brute_ok == instances and anneal_hits >= 95 and cd_hits >= 90 and elapsed < 60.0
    return ok, (f"brute {brute_ok}/{instances}, anneal optimum {anneal_hits}/{instances} (>= 95), "
                f"CD within 1% {cd_hits}/{instances} (>= 90), {elapsed:.1f}s (< 60s)")


def check_closure(seeds: int = 10):
    """Transparent detector: mean chi2/M over the seeds at most 2 for every method and shape."""
    t0 = time.perf_counter()
    cfg = BenchmarkConfig(detector=DetectorModel.transparent(), bootstrap_toys=0, svd=SvdConfig(rank=12),
                          ibu=IbuConfig(iterations=4))
    per = {}
    for seed in range(seeds):
        for d, spec in enumerate(cfg.distributions):
            ds = generate_dataset(spec, cfg, d, master_seed=seed)
            for r in evaluate_dataset(ds, cfg, d, seed):
                per.setdefault((r.distribution, r.method.value), []).append(r.chi2 / cfg.n_bins)
    elapsed = time.perf_counter() - t0
    means = {k: float(np.mean(v)) for k, v in per.items()}
    worst_key = max(means, key=means.get)
    ok = all(np.isfinite(v) and v <= 2.0 for v in means.values()) and len(means) == 20 and elapsed < 60.0
    return ok, (f"worst mean chi2/M {means[worst_key]:.2f} ({worst_key[0]} {worst_key[1]}, <= 2), "
                f"{elapsed:.1f}s (< 60s)")


def check_baseline_identities(instances: int = 50, seed: int = 5):
    rng = np.random.default_rng(seed)
    svd_err = trip_err = fixed_err = cons_err = 0.0
    for _ in range(instances):
        m = int(rng.integers(3, 13))
        R = random_response(rng, m)
        z_true = rng.uniform(10, 1000, m)
        n = rng.poisson(R.entries @ z_true).astype(float) + 1.0
        mi = unfold_mi(R, n).estimate
        svd = unfold_svd(R, n, cfg=SvdConfig(rank=m)).estimate
        svd_err = max(svd_err, np.max(np.abs(svd - mi)) / np.max(np.abs(mi)))
        trip_err = max(trip_err, np.max(np.abs(fold_counts(R, mi) - n)) / np.max(np.abs(n)))
        exact = R.entries @ z_true
        for k in (1, 3, 10):
            est = unfold_ibu(R, exact, IbuConfig(iterations=k, prior=z_true)).estimate
            fixed_err = max(fixed_err, np.max(np.abs(est - z_true) / z_true))
        for k in range(1, 9):
            est = unfold_ibu(R, n, IbuConfig(iterations=k)).estimate
            cons_err = max(cons_err, abs(R.efficiencies @ est - n.sum()) / n.sum())
    ok = svd_err <= 1e-8 and trip_err <= 1e-9 and fixed_err <= 1e-9 and cons_err <= 1e-9
    return ok, (f"SVD(k=M) vs MI {svd_err:.1e} (<= 1e-8), MI round trip {trip_err:.1e} (<= 1e-9), "
                f"IBU fixed point {fixed_err:.1e} (<= 1e-9), IBU conservation {cons_err:.1e} (<= 1e-9)")


def check_benchmark_ordering(seeds: int = 20):
    """Regularized integer solutions beat MI and stay within 1.5x of the better classical method."""
    t0 = time.perf_counter()
    cfg = BenchmarkConfig(bootstrap_toys=0)
    chi = {}
    for seed in range(seeds):
        for d, spec in enumerate(cfg.distributions):
            ds = generate_dataset(spec, cfg, d, master_seed=seed)
            for r in evaluate_dataset(ds, cfg, d, seed):
                chi.setdefault((r.distribution, r.method.value), []).append(r.chi2)
    elapsed = time.perf_counter() - t0
    parts, ok = [], elapsed < 300.0
    for kind in Kind:
        dist = kind.value
        med = {m: float(np.median(chi[(dist, m)])) for m in METHODS}
        cd, an = np.array(chi[(dist, "CD")]), np.array(chi[(dist, "ANNEAL")])
        consistent = int(np.sum(np.abs(an - cd) <= 0.25 * cd))
        better = min(med["IBU"], med["SVD"])
        good = (max(med["CD"], med["ANNEAL"]) <= med["MI"]
                and max(med["CD"], med["ANNEAL"]) <= 1.5 * better and consistent >= 16)
        ok &= good
        parts.append(f"{dist} CD/best {med['CD'] / better:.2f} ANNEAL/best {med['ANNEAL'] / better:.2f} "
                     f"agree {consistent}/{seeds}")
    return ok, "; ".join(parts) + f"; {elapsed:.0f}s (< 300s)"


def check_scaling():
    z_max = 100
    per_bin = math.ceil(math.log2(z_max + 1))
    bits = {}
    for m in (6, 12, 24, 48):
        R = ResponseMatrix.identity(m)
        model = encode(build_objective(R, np.zeros(m), lam=0.0), BoundsVector(np.full(m, z_max)))
        bits[m] = model.nbits
    linear = all(bits[m] == per_bin * m for m in bits)
    log_ok = True
    for zm in list(range(1, 70)) + [127, 128, 255, 256, 1000, 4095, 4096, 10**6]:
        model = encode(build_objective(ResponseMatrix.identity(6), np.zeros(6), lam=0.0), BoundsVector(np.full(6, zm)))
        log_ok &= model.nbits == 6 * math.ceil(math.log2(zm + 1))
    return linear and log_ok, f"bits {bits} at z_max={z_max} (= {per_bin}*M), per-bin ceil(log2(z_max+1)) {log_ok}"


def check_determinism():
    cfg = BenchmarkConfig()
    with tempfile.TemporaryDirectory() as tmp:
        outs = []
        for run in ("a", "b"):
            out = Path(tmp) / run
            run_benchmark(replace(cfg, output_dir=str(out)))
            outs.append(out)
        names = sorted(p.name for p in outs[0].iterdir() if p.suffix in (".csv", ".svg"))
        same = [(outs[0] / n).read_bytes() == (outs[1] / n).read_bytes() for n in names]
    ok = len(names) == 5 and all(same)
    return ok, f"{sum(same)}/{len(names)} CSV/SVG files byte-identical"


CRITERIA = [
    (1, "QUBO equivalence", check_qubo_equivalence),
    (2, "oracle agreement", check_oracle_agreement),
    (3, "closure", check_closure),
    (4, "baseline identities", check_baseline_identities),
    (5, "benchmark ordering", check_benchmark_ordering),
    (6, "bit scaling", check_scaling),
    (7, "determinism", check_determinism),
]


def _report(number, capsys):
    _, name, fn = CRITERIA[number - 1]
    ok, detail = fn()
    with capsys.disabled():
        print("\n" + _line(number, name, ok, detail))
    return ok, detail


def test_criterion_1_qubo_equivalence(capsys):
    ok, detail = _report(1, capsys)
    assert ok, detail


def test_criterion_2_oracle_agreement(capsys):
    ok, detail = _report(2, capsys)
    assert ok, detail


def test_criterion_3_closure(capsys):
    ok, detail = _report(3, capsys)
    assert ok, detail


def test_criterion_4_baseline_identities(capsys):
    ok, detail = _report(4, capsys)
    assert ok, detail


@pytest.mark.slow
def test_criterion_5_benchmark_ordering(capsys):
    ok, detail = _report(5, capsys)
    assert ok, detail


def test_criterion_6_bit_scaling(capsys):
    ok, detail = _report(6, capsys)
    assert ok, detail


@pytest.mark.slow
def test_criterion_7_determinism(capsys):
    ok, detail = _report(7, capsys)
    assert ok, detail


if __name__ == "__main__":
    failures = 0
    for number, name, fn in CRITERIA:
        ok, detail = fn()
        failures += not ok
        print(_line(number, name, ok, detail), flush=True)
    sys.exit(1 if failures else 0)
