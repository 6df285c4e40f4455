"""Command-line front-end.

Commands:
  run     one rollout, JSON metrics to stdout or --out
  ablate  mode x capacity grid, CSV or JSON report
  verify  built-in oracle checks (exit 2 on failure)
  bench   repeated timed runs per mode, median throughput

Exit codes: 0 success, 1 validation failure, 2 verify/acceptance failure.
The MEMBANK_SEED environment variable overrides the script seed; the
--seed flag wins over both.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import statistics
import sys
from pathlib import Path

from .engine import Mode, rollout
from .errors import MembankError
from .metrics import (
    compute_metrics,
    grid_to_csv,
    metrics_to_dict,
    metrics_to_json,
    run_ablation_grid,
)
from .script import NarrativeScript, parse_script
from .toymodel import ModelConfig
from .verify import run_all_checks

SEED_ENV = "MEMBANK_SEED"

MODE_NAMES = {m.value: m for m in Mode}


def load_config(path) -> ModelConfig:
    if path is None:
        return ModelConfig()
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    known = {f.name for f in dataclasses.fields(ModelConfig)}
    unknown = set(doc) - known
    if unknown:
        raise MembankError(f"unknown config fields: {sorted(unknown)}")
    return ModelConfig(**doc)


def _effective_script(script: NarrativeScript, flag_seed) -> NarrativeScript:
    seed = flag_seed
    if seed is None and os.environ.get(SEED_ENV):
        seed = int(os.environ[SEED_ENV])
    if seed is None:
        return script
    return dataclasses.replace(script, seed=seed)


def _write_or_print(text: str, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        print(text)


def cmd_run(args) -> int:
    script = _effective_script(parse_script(args.script), args.seed)
    cfg = load_config(args.config)
    mode = MODE_NAMES[args.mode]
    run = rollout(script, cfg, mode, noise_eps=args.noise_eps)
    full = rollout(script, cfg, Mode.NAM_FULL, noise_eps=args.noise_eps) if mode is Mode.NAM_SMA else None
    m = compute_metrics(run, full)
    doc = metrics_to_json(m, extra={"mode": mode.value, "seed": script.seed, "chunks": len(run.results)})
    _write_or_print(doc, args.out)
    return 0


def cmd_ablate(args) -> int:
    script = _effective_script(parse_script(args.script), args.seed)
    cfg = load_config(args.config)
    if args.grid:
        grid = json.loads(Path(args.grid).read_text(encoding="utf-8"))
        modes = [MODE_NAMES[m] for m in grid.get("modes", [m.value for m in Mode])]
        b_values = grid.get("b_values", [cfg.bank_capacity])
    else:
        modes = list(Mode)
        b_values = [cfg.bank_capacity]
    report = run_ablation_grid(script, cfg, modes, b_values, noise_eps=args.noise_eps, repeats=args.repeat)
    _print_grid_table(report)
    if args.out:
        if str(args.out).endswith(".csv"):
            Path(args.out).write_text(grid_to_csv(report), encoding="utf-8")
        else:
            rows = [
                {"mode": r["mode"], "bank_capacity": r["bank_capacity"], **metrics_to_dict(r["metrics"])}
                for r in report["rows"]
            ]
            doc = {"rows": rows, "throughput_ordering_ok": report["throughput_ordering_ok"]}
            Path(args.out).write_text(json.dumps(doc, indent=2), encoding="utf-8")
    return 0


def _print_grid_table(report):
    header = f"{'mode':<12}{'b':>4}{'precision':>12}{'sma_l2':>12}{'keys':>12}{'chunks/s':>12}"
    print(header)
    for row in report["rows"]:
        m = row["metrics"]
        prec = "-" if m.retrieval_precision is None else f"{m.retrieval_precision:.3f}"
        print(
            f"{row['mode']:<12}{row['bank_capacity']:>4}{prec:>12}"
            f"{m.sma_vs_full_l2:>12.3e}{m.mean_attended_keys:>12.1f}{m.chunks_per_second:>12.2f}"
        )
    if report["throughput_ordering_ok"] is not None:
        print(f"throughput ordering ok: {report['throughput_ordering_ok']}")


def cmd_verify(args) -> int:
    return 0 if run_all_checks() else 2


def cmd_bench(args) -> int:
    cfg = load_config(args.config)
    if args.script:
        script = _effective_script(parse_script(args.script), args.seed)
    else:
        from .script import Segment

        script = NarrativeScript(
            seed=args.seed if args.seed is not None else 0,
            segments=tuple(
                Segment(f"benchmark segment {i}", i % 3, 5) for i in range(4)
            ),
        )
    print(f"{'mode':<12}{'median chunks/s':>18}")
    results = {}
    for mode in Mode:
        cps = []
        for _ in range(args.repeat):
            run = rollout(script, cfg, mode, noise_eps=args.noise_eps)
            cps.append(len(run.results) / run.elapsed_seconds)
        results[mode.value] = statistics.median(cps)
        print(f"{mode.value:<12}{results[mode.value]:>18.2f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="membank", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON model config file")
        sp.add_argument("--seed", type=int, help="override script seed")
        sp.add_argument("--noise-eps", type=float, default=0.05, dest="noise_eps")

    sp = sub.add_parser("run", help="run one rollout and report metrics")
    sp.add_argument("--script", required=True)
    sp.add_argument("--mode", choices=sorted(MODE_NAMES), default=Mode.NAM_SMA.value)
    sp.add_argument("--out")
    common(sp)
    sp.set_defaults(fn=cmd_run)

    sp = sub.add_parser("ablate", help="run a mode x capacity grid")
    sp.add_argument("--script", required=True)
    sp.add_argument("--grid", help="JSON file with modes and b_values")
    sp.add_argument("--out")
    sp.add_argument("--repeat", type=int, default=1)
    common(sp)
    sp.set_defaults(fn=cmd_ablate)

    sp = sub.add_parser("verify", help="run built-in oracle checks")
    sp.set_defaults(fn=cmd_verify)

    sp = sub.add_parser("bench", help="repeated timed runs per mode")
    sp.add_argument("--script")
    sp.add_argument("--repeat", type=int, default=3)
    common(sp)
    sp.set_defaults(fn=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (MembankError, FileNotFoundError, json.JSONDecodeError, KeyError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
