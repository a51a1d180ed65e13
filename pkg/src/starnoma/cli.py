"""Command-line entry point: ``starnoma <verb> [options]``.

Verbs:
  converge         train every configured algorithm on every seed
  sweep-elements   MAPPO final reward per STAR-RIS element count
  sweep-power      average MU throughput per algorithm and power budget
  dump-optimal     amplitude and beam-power report of a trained checkpoint
  validate-config  parse and check a config file without running anything

Failures print one JSON object to stderr and exit nonzero:
2 invalid config, 3 unreadable checkpoint, 1 anything else.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import harness

EXIT_CONFIG, EXIT_CHECKPOINT, EXIT_OTHER = 2, 3, 1


def _seeds(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="starnoma", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, out=True):
        sp.add_argument("--config", help="experiment YAML (defaults built in when omitted)")
        sp.add_argument("--seeds", type=_seeds, help="comma-separated seed list, overrides the config")
        if out:
            sp.add_argument("--out", default="results", help="output directory (default: results)")
            sp.add_argument("--episodes", type=int, help="episode count override")
            sp.add_argument("--workers", type=int, default=1,
                            help="parallel worker processes, one cell each (default: 1)")

    common(sub.add_parser("converge", help="learning curves of every algorithm"))
    common(sub.add_parser("sweep-elements", help="final reward versus element count"))
    common(sub.add_parser("sweep-power", help="throughput versus power budget"))
    dp = sub.add_parser("dump-optimal", help="report a trained configuration")
    common(dp)
    dp.add_argument("--checkpoint", required=True, help="checkpoint written by `converge`")
    dp.add_argument("--draws", type=int, default=20, help="channel draws to average over")
    common(sub.add_parser("validate-config", help="check a config file"), out=False)
    return p


def _load(args) -> harness.ExperimentConfig:
    cfg = harness.load_config(args.config) if args.config else harness.ExperimentConfig().validate()
    if args.seeds is not None:
        cfg = replace(cfg, seeds=args.seeds).validate()
    if getattr(args, "episodes", None) is not None and args.episodes < 1:
        raise harness.ConfigError({"episodes": "must be positive"})
    return cfg


def _report(kind: str, message: str, **extra) -> None:
    print(json.dumps({"status": "error", "error": kind, "message": message, **extra}), file=sys.stderr)


def run(args) -> dict:
    cfg = _load(args)
    if args.verb == "validate-config":
        return {"config_hash": cfg.semantic_hash(), "seeds": list(cfg.seeds),
                "algorithms": list(cfg.algorithms)}
    out = Path(args.out)
    if args.verb == "converge":
        records = harness.run_convergence(cfg, out, args.episodes, args.workers)
        return {"records": len(records), "summary": str(out / "converge_summary.csv")}
    if args.verb == "sweep-elements":
        records, increments = harness.run_element_sweep(cfg, out, args.episodes, args.workers)
        return {"records": len(records), "summary": str(out / "element_sweep.csv")}
    if args.verb == "sweep-power":
        records, rows = harness.run_power_sweep(cfg, out, args.episodes, args.workers)
        return {"records": len(records), "summary": str(out / "power_sweep.csv")}
    if args.verb == "dump-optimal":
        agents, config_hash, _ = harness.load_checkpoint(args.checkpoint)
        report = harness.dump_optimal_config(agents, cfg, draws=args.draws)
        harness.write_optimal_report(report, out)
        sums = report.side_sums()
        return {"checkpoint_config_hash": config_hash,
                "side_sums": [[float(a), float(b)] for a, b in sums],
                "non_direct_power_ratio": report.non_direct_power_ratio()}
    raise AssertionError(args.verb)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        result = run(args)
    except harness.ConfigError as exc:
        _report("config", str(exc), fields=exc.problems)
        return EXIT_CONFIG
    except harness.CheckpointError as exc:
        _report("checkpoint", str(exc))
        return EXIT_CHECKPOINT
    except Exception as exc:  # noqa: BLE001 - every failure becomes a machine-readable report
        _report(type(exc).__name__, str(exc))
        return EXIT_OTHER
    print(json.dumps({"status": "ok", "verb": args.verb, **result}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
