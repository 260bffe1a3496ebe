"""Command-line entry point: ``unfoldqubo {generate,unfold,benchmark,scan-lambda,plot}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .benchmark import (
    BenchmarkConfig,
    generate_dataset,
    run_benchmark,
    run_method,
    scan_lambda,
    scan_to_csv,
)
from .core import Histogram, Method, ResponseMatrix, UnfoldingError, dump_json, load_json
from .metrics import chi2
from .plotting import emit_plot

log = logging.getLogger("unfoldqubo")


class ConfigError(Exception):
    pass


def _load_config(args) -> BenchmarkConfig:
    data = {}
    if getattr(args, "config", None):
        try:
            data = load_json(args.config)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    try:
        cfg = BenchmarkConfig.from_dict(data)
        if getattr(args, "seed", None) is not None:
            cfg = replace(cfg, master_seed=args.seed)
        if getattr(args, "out", None):
            cfg = replace(cfg, output_dir=args.out)
        if getattr(args, "methods", None):
            cfg = replace(cfg, methods=_parse_methods(args.methods))
        if getattr(args, "lam", None) is not None:
            cfg = replace(cfg, lam=args.lam)
    except (UnfoldingError, ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def _lambda_arg(text: str):
    if text == "auto":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'auto', got {text!r}") from None


def _parse_methods(text: str) -> tuple[Method, ...]:
    return tuple(Method(m.strip().upper()) for m in text.split(",") if m.strip())


def cmd_generate(args) -> None:
    cfg = _load_config(args)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for d, spec in enumerate(cfg.distributions):
        ds = generate_dataset(spec, cfg, d)
        doc = ds.to_dict()
        doc["provenance"]["master_seed"] = cfg.master_seed
        path = out / f"{d:02d}_{spec.kind.value}_data.json"
        dump_json(doc, path)
        print(path)


def cmd_unfold(args) -> None:
    cfg = _load_config(args)
    try:
        doc = load_json(args.input)
        R = ResponseMatrix.from_dict(doc["response"])
        n = Histogram.from_dict(doc["measured"], integer=True)
        truth = Histogram.from_dict(doc["truth"]) if "truth" in doc else None
        beta = Histogram.from_dict(doc["background"]) if "background" in doc else None
    except (OSError, KeyError, json.JSONDecodeError, UnfoldingError) as exc:
        raise ConfigError(f"cannot read input {args.input}: {exc}") from exc
    results = []
    for m in cfg.methods:
        res = run_method(m, R, n, beta, lam=cfg.lam, tau=cfg.tau, headroom=cfg.headroom, ibu=cfg.ibu, svd=cfg.svd,
                         anneal=replace(cfg.anneal, seed=cfg.master_seed))
        if truth is not None:
            res.chi2 = chi2(truth, res.estimate)
        results.append(res.to_dict())
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        dump_json(results, Path(args.out) / "unfold.json")
    else:
        json.dump(results, sys.stdout, indent=2)
        print()


def cmd_benchmark(args) -> None:
    cfg = _load_config(args)
    records = run_benchmark(cfg)
    for r in records:
        print(f"{r.distribution:>13s} {r.method.value:>6s} chi2={r.chi2:.4g} {r.status}")
    print(f"wrote {cfg.output_dir}")


def cmd_scan(args) -> None:
    cfg = _load_config(args)
    try:
        grid = [float(v) for v in args.grid.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad lambda grid: {exc}") from exc
    rows = scan_lambda(cfg, grid)
    text = scan_to_csv(rows)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "lambda_scan.csv").write_text(text)
    sys.stdout.write(text)


def cmd_plot(args) -> None:
    try:
        data = load_json(args.input)
        truth = Histogram.from_dict(data["truth"])
        measured = Histogram.from_dict(data["measured"])
    except (OSError, KeyError, json.JSONDecodeError, UnfoldingError) as exc:
        raise ConfigError(f"cannot read {args.input}: {exc}") from exc
    results = []
    if args.results:
        doc = load_json(args.results)
        items = doc["records"] if isinstance(doc, dict) else doc
        for rec in items:
            if args.distribution and rec.get("distribution") != args.distribution:
                continue
            if rec.get("status", "ok") != "ok":
                continue
            results.append((rec["method"], rec["estimate"], rec.get("errors", [0.0] * len(rec["estimate"]))))
    out = Path(args.out or "figure.svg")
    if out.suffix != ".svg":
        out = out / "figure.svg"
    out.parent.mkdir(parents=True, exist_ok=True)
    emit_plot(truth, measured, results, out, title=args.distribution or "")
    print(out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="unfoldqubo", description="Unfolding as quadratic/QUBO optimization")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, methods=True, lam=True):
        sp.add_argument("--config", help="JSON benchmark config")
        sp.add_argument("--seed", type=int, help="master seed")
        sp.add_argument("--out", help="output directory")
        if methods:
            sp.add_argument("--methods", help="comma-separated subset of MI,IBU,SVD,CD,ANNEAL,BRUTE")
        if lam:
            sp.add_argument("--lambda", dest="lam", type=_lambda_arg,
                           help="regularization strength, or 'auto' (discrepancy principle)")

    sp = sub.add_parser("generate", help="write truth, measured and response JSON per distribution")
    common(sp, methods=False, lam=False)
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("unfold", help="unfold a generated data file")
    common(sp)
    sp.add_argument("input", help="data JSON with 'response' and 'measured' (optional 'truth', 'background')")
    sp.set_defaults(func=cmd_unfold)

    sp = sub.add_parser("benchmark", help="run the full comparison and write CSV/JSON/SVG")
    common(sp)
    sp.set_defaults(func=cmd_benchmark)

    sp = sub.add_parser("scan-lambda", help="chi2 of CD and ANNEAL over a lambda grid")
    common(sp)
    sp.add_argument("--grid", default="0,0.001,0.003,0.007,0.01,0.03,0.1,1")
    sp.set_defaults(func=cmd_scan)

    sp = sub.add_parser("plot", help="render a spectra/ratio SVG from a data file and results")
    sp.add_argument("input", help="data JSON with 'truth' and 'measured'")
    sp.add_argument("--results", help="results JSON from benchmark or unfold")
    sp.add_argument("--distribution", help="restrict benchmark records to this distribution")
    sp.add_argument("--out", help="SVG path")
    sp.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (ConfigError, UnfoldingError) as exc:
        json.dump({"error": str(exc), "type": type(exc).__name__}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    except OSError as exc:
        json.dump({"error": str(exc), "type": "OSError"}, sys.stderr)
        sys.stderr.write("\n")
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
