"""``eerlab`` command line: run, sweep, analyze, report.

Exit codes: 0 on success, 1 when an experiment or analysis fails at run
time, 2 for usage and configuration errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from eerlab import analysis
from eerlab.engine import results as io
from eerlab.engine.config import ExperimentConfig, load_config
from eerlab.engine.loop import run_experiment
from eerlab.errors import ConfigError

log = logging.getLogger("eerlab")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


def _outdir(args) -> Path:
    return Path(args.out or os.environ.get("EERLAB_OUT") or "eerlab-out")


def _parse_seeds(text: str) -> list[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"bad seed list {text!r}") from None
    if not seeds:
        raise ConfigError("need at least one seed")
    return seeds


def _base_config(args) -> ExperimentConfig:
    return load_config(args.config, args.override)


# -- run / sweep --------------------------------------------------------------

def cmd_run(config: ExperimentConfig, seed: int | None, outdir) -> int:
    if seed is not None:
        config = config.replace(seed=seed)
    try:
        result = run_experiment(config)
    except ConfigError:
        raise
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        log.error("run failed: %s", exc)
        return EXIT_FAILURE
    csv_path, _ = io.write_run(result, outdir)
    print(f"{csv_path}: auc={result.auc:.6f}")
    return EXIT_OK


def _run_cell(config: ExperimentConfig):
    try:
        return run_experiment(config), None
    except Exception as exc:  # noqa: BLE001 - recorded per cell
        return None, f"{type(exc).__name__}: {exc}"


def cmd_sweep(config: ExperimentConfig, strategies: list[str], seeds: list[int], outdir,
              parallelism: int = 1) -> int:
    if not strategies or not seeds:
        raise ConfigError("sweep needs at least one strategy and one seed")
    cells = [config.replace(strategy=s, seed=k) for s in strategies for k in seeds]  # validates ids
    if parallelism > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            outcomes = list(pool.map(_run_cell, cells))
    else:
        outcomes = [_run_cell(c) for c in cells]

    outdir = Path(outdir)
    done, failures = [], []
    for cell, (result, error) in zip(cells, outcomes):
        if error is None:
            io.write_run(result, outdir)
            done.append(result)
        else:
            failures.append({"strategy": cell.strategy, "seed": cell.seed, "error": error})
            log.error("cell %s seed %d failed: %s", cell.strategy, cell.seed, error)
    aucs = io.aggregate(done)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "aggregate.csv").write_text(io.aggregate_csv_text(aucs))
    (outdir / "comparison.csv").write_text(io.comparison_matrix_text(aucs))
    if failures:
        (outdir / "failures.json").write_text(json.dumps(failures, indent=2) + "\n")
        return EXIT_FAILURE
    print(io.aggregate_csv_text(aucs), end="")
    return EXIT_OK


# -- analyze --------------------------------------------------------------------

def cmd_analyze(which: str, outdir) -> int:
    names = list(analysis.ANALYSES) if which == "all" else [which]
    if any(n not in analysis.ANALYSES for n in names):
        raise ConfigError(f"unknown analysis {which!r}; expected one of all, {', '.join(analysis.ANALYSES)}")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    ok = True
    for name in names:
        report = analysis.ANALYSES[name]()
        (outdir / f"analysis_{name}.json").write_text(json.dumps(report, indent=2, default=_jsonable) + "\n")
        print(f"{name}: {'pass' if report['passed'] else 'FAIL'}")
        ok &= report["passed"]
    return EXIT_OK if ok else EXIT_FAILURE


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


# -- report -----------------------------------------------------------------------

def _setting_key(config: dict) -> str:
    rest = {k: v for k, v in config.items() if k not in ("strategy", "seed")}
    return hashlib.sha1(json.dumps(rest, sort_keys=True).encode()).hexdigest()[:8]


def _svg_curves(curves: dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]], title: str) -> str:
    width, height, pad = 640, 400, 50
    xs_all = np.concatenate([c[0] for c in curves.values()])
    lo = min(float((c[1] - c[2]).min()) for c in curves.values())
    hi = max(float((c[1] + c[2]).max()) for c in curves.values())
    x0, x1 = float(xs_all.min()), float(xs_all.max())
    if x1 == x0:
        x1 = x0 + 1
    if hi == lo:
        hi = lo + 1e-3

    def px(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def py(y):
        return height - pad - (y - lo) / (hi - lo) * (height - 2 * pad)

    colours = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2}" y="{height - 10}" text-anchor="middle" font-size="12">labeled examples</text>',
        f'<text x="{pad - 5}" y="{py(lo):.1f}" text-anchor="end" font-size="10">{lo:.3f}</text>',
        f'<text x="{pad - 5}" y="{py(hi):.1f}" text-anchor="end" font-size="10">{hi:.3f}</text>',
    ]
    for n, (name, (xs, mean, std)) in enumerate(curves.items()):
        colour = colours[n % len(colours)]
        upper = [f"{px(x):.1f},{py(y):.1f}" for x, y in zip(xs, mean + std)]
        lower = [f"{px(x):.1f},{py(y):.1f}" for x, y in zip(xs[::-1], (mean - std)[::-1])]
        parts.append(f'<polygon points="{" ".join(upper + lower)}" fill="{colour}" fill-opacity="0.2" stroke="none"/>')
        line = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in zip(xs, mean))
        parts.append(f'<polyline points="{line}" fill="none" stroke="{colour}" stroke-width="2"/>')
        parts.append(f'<text x="{width - pad + 5}" y="{pad + 15 * n}" font-size="11" fill="{colour}">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_report(run_dirs: list, outdir) -> int:
    paths = sorted(p for d in run_dirs for p in Path(d).glob("*_seed*.json"))
    if not paths:
        raise ConfigError("no run summaries found in the given directories")
    settings: dict[str, list] = {}
    for p in paths:
        r = io.read_run(p)
        settings.setdefault(_setting_key(r.config), []).append(r)

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    md = ["| setting | strategy | runs | mean_auc | std_auc |", "|---|---|---|---|---|"]
    rows = ["setting,strategy,runs,mean_auc,std_auc"]
    for key, runs in settings.items():
        budgets = runs[0].budgets
        if any(r.budgets != budgets for r in runs):
            raise ConfigError(f"runs in setting {key} have inconsistent labeling budgets")
        curves = {}
        for strategy, aucs in io.aggregate(runs).items():
            acc = np.array([r.accuracies for r in runs if r.strategy == strategy])
            sd = acc.std(axis=0, ddof=1) if len(acc) > 1 else np.zeros(acc.shape[1])
            curves[strategy] = (np.array(budgets, dtype=float), acc.mean(axis=0), sd)
            std = float(aucs.std(ddof=1)) if aucs.size > 1 else 0.0
            mean = float(aucs.mean())
            md.append(f"| {key} | {strategy} | {aucs.size} | {mean:.4f} | {std:.4f} |")
            rows.append(f"{key},{strategy},{aucs.size},{mean!r},{std!r}")
        (outdir / f"curves_{key}.svg").write_text(_svg_curves(curves, f"setting {key}"))
    (outdir / "auc_table.md").write_text("\n".join(md) + "\n")
    (outdir / "auc_table.csv").write_text("\n".join(rows) + "\n")
    print("\n".join(md))
    return EXIT_OK


# -- entry point ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eerlab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, experiment=True):
        p.add_argument("--out", help="output directory (default: $EERLAB_OUT or ./eerlab-out)")
        if experiment:
            p.add_argument("--config", help="sectioned key/value config file")
            p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                           help="override one config key; repeatable")

    p = sub.add_parser("run", help="run one experiment")
    common(p)
    p.add_argument("--seed", type=int, help="experiment seed (default: from config)")

    p = sub.add_parser("sweep", help="run strategies x seeds and compare")
    common(p)
    p.add_argument("--seeds", default="0,1,2", help="comma-separated seeds")
    p.add_argument("--strategies", help="comma-separated strategy ids (default: config strategy)")
    p.add_argument("--parallel", type=int, default=1, help="worker processes")

    p = sub.add_parser("analyze", help="run the exact analysis suite")
    common(p, experiment=False)
    p.add_argument("which", nargs="?", default="all")

    p = sub.add_parser("report", help="plot curves and tabulate AUCs from run directories")
    common(p, experiment=False)
    p.add_argument("run_dirs", nargs="+")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    outdir = _outdir(args)
    try:
        if args.verb == "run":
            return cmd_run(_base_config(args), args.seed, outdir)
        if args.verb == "sweep":
            config = _base_config(args)
            strategies = args.strategies.split(",") if args.strategies else [config.strategy]
            if args.parallel < 1:
                raise ConfigError("--parallel must be at least 1")
            return cmd_sweep(config, [s.strip() for s in strategies], _parse_seeds(args.seeds),
                             outdir, args.parallel)
        if args.verb == "analyze":
            return cmd_analyze(args.which, outdir)
        return cmd_report(args.run_dirs, outdir)
    except ConfigError as exc:
        print(f"eerlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        print(f"eerlab: failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
