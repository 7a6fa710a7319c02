#!/usr/bin/env python3
"""Run the full synthetic pipeline for the linear and MLP configs.

Each config goes through synth, train, generate, verify-bounds and metrics via
the CLI, writing into OUT/<config-name>/. A short table of bound statistics
and mean rank correlations is printed at the end.

    python scripts/reproduce_synthetic.py --out runs/ [--seed 0] [--configs linear mlp]
"""

import argparse
import json
import sys
import time
from pathlib import Path

from cfadv.cli import EXIT_OK, main as cli

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
STEPS = ("synth", "train", "generate", "verify-bounds", "metrics")


def run(name: str, out: Path, seed: int | None) -> dict:
    cfg = CONFIGS / f"{name}.json"
    extra = ["--seed", str(seed)] if seed is not None else []
    timings = {}
    for step in STEPS:
        t = time.perf_counter()
        rc = cli([step, "--config", str(cfg), "--out", str(out), *extra])
        timings[step] = round(time.perf_counter() - t, 2)
        if rc != EXIT_OK:
            raise SystemExit(f"{name}: step {step} exited with {rc}")
    bounds = json.loads((out / "bounds_summary.json").read_text())
    metrics = json.loads((out / "metrics.json").read_text())
    train = json.loads((out / "train_metrics.json").read_text())
    return {"timings": timings, "bounds": bounds, "metrics": metrics, "train": train}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--out", type=Path, default=Path("runs"))
    ap.add_argument("--seed", type=int, default=None, help="override the seed in the configs")
    ap.add_argument("--configs", nargs="+", default=["linear", "mlp"])
    args = ap.parse_args(argv)

    for name in args.configs:
        res = run(name, args.out / name, args.seed)
        print(f"\n== {name}  (test accuracy {res['train']['model']['test_accuracy']:.4f})")
        print("   timings: " + ", ".join(f"{k} {v}s" for k, v in res["timings"].items()))
        for pair, s in res["bounds"]["pairs"].items():
            emp, bnd = s["empirical"]["median"], s["bound"]["median"]
            med = "n/a" if emp is None else f"median empirical {emp:.4g}, median bound {bnd:.4g}"
            print(f"   {pair:18s} {s['count']:4d} compared  {s['violations']} violations  "
                  f"{s['skipped']} skipped  {med}")
        for row in res["metrics"]["rho_table"]:
            print(f"   rho {row['pair']:20s} {row['rho']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
