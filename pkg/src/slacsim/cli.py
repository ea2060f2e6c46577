"""Command-line entry point: `slacsim cebench` and `slacsim tradeoff`.

Exit codes: 0 success, 2 configuration error, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError
from .config import load_config
from .experiments import run_ce_benchmark, run_tradeoff_sweep

SCHEMA_VERSION = 1
CEBENCH_HEADER = "estimator,t_p,snr_db,nmse,eff_se_bits"
TRADEOFF_HEADER = "ris_elems,policy,t_p,peb_m,eff_se_bits"


def _fmt(x) -> str:
    """Full-precision, round-trip-stable decimal text; inf as the literal 'inf'."""
    if isinstance(x, float):
        return repr(x) if x == x and abs(x) != float("inf") else ("inf" if x > 0 else repr(x))
    return str(x)


def _write_outputs(out_dir: Path, csv_name: str, header: str, lines, cfg, command: str):
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / csv_name
        with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(header + "\n")
            for line in lines:
                fh.write(line + "\n")
        meta = {
            "command": command,
            "schema_version": SCHEMA_VERSION,
            "seed": cfg.frame.seed,
            "trials": cfg.frame.trials,
            "conventions": {
                "phase": "negative-exponent, center-referenced",
                "snr": "receive-side, per normalized path unless noise_convention=per_antenna",
                "prior_training": ("per-slot beam pointing jitter inside the "
                                   "uncertainty ball plus elementwise phase dither"),
            },
            "config": cfg.raw,
        }
        with open(out_dir / "run.json", "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return 3
    return 0


def cmd_cebench(config_path: str, out_dir: str, seed=None, trials=None) -> int:
    try:
        cfg = load_config(config_path, seed_override=seed, trials_override=trials)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return 3
    try:
        rows = run_ce_benchmark(cfg.ce_setup, cfg.frame, cfg.estimators, cfg.snr_db)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    lines = [",".join([r["estimator"], str(r["t_p"]), _fmt(float(r["snr_db"])),
                       _fmt(r["nmse"]), _fmt(r["eff_se_bits"])]) for r in rows]
    return _write_outputs(Path(out_dir), "cebench.csv", CEBENCH_HEADER, lines, cfg, "cebench")


def cmd_tradeoff(config_path: str, out_dir: str, seed=None) -> int:
    try:
        cfg = load_config(config_path, seed_override=seed)
        if cfg.tradeoff is None:
            raise ConfigError("tradeoff", "missing required section")
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return 3
    try:
        points = run_tradeoff_sweep(cfg.tradeoff, cfg.frame)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    lines = [",".join([str(p.ris_elements), p.policy, str(p.t_p),
                       _fmt(p.peb), _fmt(p.eff_se)]) for p in points]
    return _write_outputs(Path(out_dir), "tradeoff.csv", TRADEOFF_HEADER, lines, cfg, "tradeoff")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="slacsim",
                                     description="RIS mmWave SLAC simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ce = sub.add_parser("cebench", help="channel-estimation benchmark")
    p_ce.add_argument("--config", required=True)
    p_ce.add_argument("--out", required=True)
    p_ce.add_argument("--seed", type=int, default=None)
    p_ce.add_argument("--trials", type=int, default=None)

    p_td = sub.add_parser("tradeoff", help="PEB vs effective-SE sweep")
    p_td.add_argument("--config", required=True)
    p_td.add_argument("--out", required=True)
    p_td.add_argument("--seed", type=int, default=None)

    args = parser.parse_args(argv)
    if args.command == "cebench":
        return cmd_cebench(args.config, args.out, seed=args.seed, trials=args.trials)
    return cmd_tradeoff(args.config, args.out, seed=args.seed)


if __name__ == "__main__":
    sys.exit(main())
