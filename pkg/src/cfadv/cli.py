"""Command-line experiment runner.

    cfadv synth          --config cfg.json --out data/ [--n 5000] [--seed 0]
    cfadv train          --config cfg.json --out run/ [--data data/]
    cfadv generate       --config cfg.json --out run/ [--model run/model.json] [--methods scfe,deepfool]
    cfadv verify-bounds  --config cfg.json --out run/ [--pairs scfe_vs_cw] [--p 2] [--assert-no-violations]
    cfadv metrics        --config cfg.json --out run/ [--results run/results.jsonl]

Exit codes: 0 success, 1 configuration error, 2 runtime failure,
3 bound violation (only with --assert-no-violations).
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import pipeline
from .config import ConfigError, ExperimentConfig, config_from_dict, load_config, with_overrides
from .data import ParseError, SchemaError

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_VIOLATION = 0, 1, 2, 3

log = logging.getLogger("cfadv")


def _csv_list(s: str) -> list[str]:
    return [t.strip() for t in s.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cfadv", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, model=False):
        p.add_argument("--config", type=Path, help="experiment config (JSON); defaults apply otherwise")
        p.add_argument("--seed", type=int, help="override the global seed")
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--data", type=Path, help="CSV file, or a directory holding data.csv and schema.json")
        if model:
            p.add_argument("--model", type=Path, help="trained model (default: OUT/model.json)")
            p.add_argument("--ae", type=Path, help="trained autoencoder (default: OUT/ae.json)")
        return p

    p = common(sub.add_parser("synth", help="write the synthetic Gaussian mixture as CSV"))
    p.add_argument("--n", type=int, help="number of rows")

    common(sub.add_parser("train", help="train the classifier and, if configured, the autoencoder"))

    p = common(sub.add_parser("generate", help="generate CEs and AEs for negatively predicted test rows"), model=True)
    p.add_argument("--methods", type=_csv_list, help="comma-separated method ids")

    p = common(sub.add_parser("verify-bounds", help="compare empirical CE/AE distances with the bounds"), model=True)
    p.add_argument("--pairs", type=_csv_list, help="comma-separated bound pairs")
    p.add_argument("--p", choices=["1", "2", "inf"], help="norm order")
    p.add_argument("--assert-no-violations", action="store_true", help="exit 3 if any bound is violated")

    p = common(sub.add_parser("metrics", help="d_match and rank correlations between generated outputs"))
    p.add_argument("--results", type=Path, help="results file (default: OUT/results.jsonl)")
    p.add_argument("--pairs", type=_csv_list, help="comma-separated '<method>_vs_<method>' pairs")
    return ap


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else config_from_dict({"seed": 0})
    cfg = with_overrides(cfg, seed=args.seed, out=str(args.out) if args.out else None,
                         methods=getattr(args, "methods", None))
    if args.command == "verify-bounds":
        cfg = with_overrides(cfg, bound_pairs=args.pairs, p=args.p)
    if args.command == "metrics" and args.pairs:
        cfg = replace(cfg, metrics=replace(cfg.metrics, pairs=tuple(args.pairs)))
    if args.data is not None:
        csv_path, schema = (args.data / "data.csv", args.data / "schema.json") if args.data.is_dir() \
            else (args.data, Path(cfg.data.schema) if cfg.data.schema else args.data.parent / "schema.json")
        cfg = replace(cfg, data=replace(cfg.data, source="csv", path=str(csv_path), schema=str(schema)))
    if getattr(args, "n", None) is not None:
        cfg = replace(cfg, data=replace(cfg.data, n=args.n))
    return cfg


def cmd_synth(cfg: ExperimentConfig, args) -> int:
    csv_path, _ = pipeline.write_synthetic(cfg, cfg.out)
    print(f"wrote {csv_path}")
    return EXIT_OK


def cmd_train(cfg: ExperimentConfig, args) -> int:
    ds = pipeline.build_dataset(cfg)
    model, ae, report = pipeline.train_all(cfg, ds)
    pipeline.save_trained(cfg, cfg.out, model, ae, report)
    print(f"test accuracy {report['model']['test_accuracy']:.4f}")
    return EXIT_OK


def _load_models(cfg, args, need_ae: bool):
    out = Path(cfg.out)
    model = pipeline.load_trained_model(args.model or out / "model.json")
    ae = None
    if need_ae:
        ae = pipeline.load_trained_ae(args.ae or out / "ae.json")
    return model, ae


def cmd_generate(cfg: ExperimentConfig, args) -> int:
    model, ae = _load_models(cfg, args, cfg.methods.needs_ae)
    ds = pipeline.build_dataset(cfg)
    results = pipeline.generate(cfg, model, ds, ae)
    Path(cfg.out).mkdir(parents=True, exist_ok=True)
    path = Path(cfg.out) / "results.jsonl"
    pipeline.write_results(path, results, cfg)
    print(f"wrote {len(results)} records to {path}")
    return EXIT_OK


def cmd_verify_bounds(cfg: ExperimentConfig, args) -> int:
    model, ae = _load_models(cfg, args, "cchvae_vs_nae" in cfg.bounds.pairs)
    ds = pipeline.build_dataset(cfg)
    run = pipeline.run_bounds(cfg, model, ds, ae)
    summary = pipeline.write_bounds(cfg.out, run, cfg, model)
    for pair, s in summary["pairs"].items():
        print(f"{pair}: {s['count']} compared, {s['violations']} violations, {s['skipped']} skipped")
    if args.assert_no_violations and summary["violations"] > 0:
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_metrics(cfg: ExperimentConfig, args) -> int:
    results = pipeline.read_results(args.results or Path(cfg.out) / "results.jsonl")
    reports = pipeline.metric_reports(cfg, results)
    pipeline.write_metrics(cfg.out, reports, cfg)
    for r in reports:
        rho = "undefined" if r.rho_mean is None else f"{r.rho_mean:.3f} +- {r.rho_std:.3f}"
        print(f"{r.pair}: n={r.n} rho={rho}")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "generate": cmd_generate,
    "verify-bounds": cmd_verify_bounds,
    "metrics": cmd_metrics,
}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except (ConfigError, SchemaError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, SchemaError, ParseError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001 - any other failure is a runtime error
        log.debug("runtime failure", exc_info=True)
        print(f"runtime failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
