#!/usr/bin/env python3
"""Check the category ordering of mean rank correlations.

For each category config (linear and MLP on the 10-feature mixture), trains
the models, generates SCFE, DeepFool, C-CHVAE and NAE outputs and compares

    rho(SCFE, DeepFool)  >  rho(SCFE, NAE)
    rho(C-CHVAE, NAE)    >  rho(C-CHVAE, DeepFool)

With ``--seeds 0 1 2`` the check is repeated per seed and a pass rate is
printed, which shows how stable the ordering is across data draws.

    python scripts/category_check.py [--seeds 0] [--max-instances 200] [--json out.json]
"""

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from cfadv import pipeline
from cfadv.config import load_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
CHECKS = (("scfe_vs_deepfool", "scfe_vs_nae"), ("cchvae_vs_nae", "cchvae_vs_deepfool"))


def check(name: str, seed: int, max_instances: int | None) -> dict:
    cfg = replace(load_config(CONFIGS / f"{name}.json"), seed=seed)
    if max_instances is not None:
        cfg = replace(cfg, max_instances=max_instances)
    ds = pipeline.build_dataset(cfg)
    model, ae, rep = pipeline.train_all(cfg, ds)
    results = pipeline.generate(cfg, model, ds, ae)
    reports = {r.pair: r for r in pipeline.metric_reports(cfg, results)}
    rho = {k: r.rho_mean for k, r in reports.items()}
    outcome = {f"{a} > {b}": (rho[a] is not None and rho[b] is not None and rho[a] > rho[b]) for a, b in CHECKS}
    return {"config": name, "seed": seed, "accuracy": rep["model"]["test_accuracy"],
            "n": {k: r.n for k, r in reports.items()}, "rho": rho, "checks": outcome}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--configs", nargs="+", default=["category_linear", "category_mlp"])
    ap.add_argument("--max-instances", type=int, default=None)
    ap.add_argument("--json", type=Path, help="write all rows to this file")
    args = ap.parse_args(argv)

    rows, passed, total = [], 0, 0
    for seed in args.seeds:
        for name in args.configs:
            row = check(name, seed, args.max_instances)
            rows.append(row)
            rho = "  ".join(f"{k} {v:.3f}" for k, v in row["rho"].items())
            print(f"{name} seed {seed} acc {row['accuracy']:.3f}: {rho}")
            for k, ok in row["checks"].items():
                print(f"    {'PASS' if ok else 'FAIL'}  {k}")
                passed += ok
                total += 1
    print(f"\n{passed}/{total} comparisons hold")
    if args.json:
        args.json.write_text(json.dumps(rows, indent=1, sort_keys=True) + "\n")
    return 0 if passed == total else 1


if __name__ == "__main__":
    sys.exit(main())
