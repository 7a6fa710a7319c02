"""End-to-end experiment stages shared by the CLI and the scripts.

Every stage is a pure function of the config (and of files written by earlier
stages), and every writer embeds the config hash and seed.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import replace
from pathlib import Path

import numpy as np

from .adversarial import cw_iterative_batch, cw_parity_constant, deepfool_batch, nae_search
from .bounds import BoundConfig, BoundRun, negative_test_instances, summarize, verify_bounds
from .config import ConfigError, ExperimentConfig
from .counterfactuals import NoGradientError, cchvae_search, scfe_closed_form_result, scfe_iterative_batch
from .data import (Dataset, FeatureSchema, gen_gaussian_mixture, load_csv, scale_minmax, train_test_split,
                   write_csv)
from .generative import (Autoencoder, ae_from_dict, ae_to_dict, fit_autoencoder, lipschitz_bound,
                         reconstruction_mse)
from .metrics import MatchConfig, PairReport, pairwise_report
from .models import (LinearModel, MlpModel, accuracy, fit_classifier, local_linearize, model_from_dict,
                     model_to_dict, predict_label)
from .results import METHOD_IDS, GenerationResult, read_jsonl
from .svg import bar_chart_svg, boxplot_svg

log = logging.getLogger(__name__)


# ---------------------------------------------------------------- provenance

def stamp(cfg: ExperimentConfig) -> dict:
    return {"config_hash": cfg.config_hash(), "seed": int(cfg.seed)}


def write_json(path, obj: dict, cfg: ExperimentConfig) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({**obj, **stamp(cfg)}, fh, indent=1, sort_keys=True, allow_nan=False)
        fh.write("\n")


def read_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _svg_with_stamp(svg: str, cfg: ExperimentConfig) -> str:
    st = stamp(cfg)
    return f"<!-- config_hash={st['config_hash']} seed={st['seed']} -->\n{svg}"


# ---------------------------------------------------------------------- data

def synthesize(cfg: ExperimentConfig) -> Dataset:
    d = cfg.data
    return gen_gaussian_mixture(d.n, d.mu1, d.mu2, cfg.derived_seed("data"))


def write_synthetic(cfg: ExperimentConfig, out_dir) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds = synthesize(cfg)
    st = stamp(cfg)
    csv_path, schema_path = out / "data.csv", out / "schema.json"
    write_csv(csv_path, ds, comment=f"config_hash={st['config_hash']} seed={st['seed']}")
    write_json(schema_path, ds.schema.to_dict(), cfg)
    return csv_path, schema_path


def build_dataset(cfg: ExperimentConfig) -> Dataset:
    """The dataset of a run, split and (optionally) scaled, re-derived from the config."""
    d = cfg.data
    if d.source == "synthetic":
        ds = synthesize(cfg)
    else:
        for p in (d.path, d.schema):
            if not Path(p).is_file():
                raise ConfigError(f"data file not found: {p}")
        ds = load_csv(d.path, FeatureSchema.load(d.schema))
    if d.scale:
        ds = scale_minmax(ds)
    return train_test_split(ds, d.test_fraction, cfg.derived_seed("split"))


# -------------------------------------------------------------------- models

def train_all(cfg: ExperimentConfig, ds: Dataset):
    """Train the classifier (and the autoencoder if configured). Returns ``(model, ae, report)``."""
    mc = cfg.model
    tc = replace(mc.train, seed=cfg.derived_seed("model"))
    hidden = [] if mc.kind == "linear" else list(mc.hidden)
    layers, losses = fit_classifier(ds, hidden, tc)
    if mc.kind == "linear":
        model = LinearModel(layers[0].weight[0], float(layers[0].bias[0]))
    else:
        model = MlpModel(tuple(layers))
    report = {
        "model": {
            "kind": mc.kind,
            "hidden": hidden,
            "train_accuracy": accuracy(model, ds.X_train, ds.y_train),
            "test_accuracy": accuracy(model, ds.X_test, ds.y_test),
            "losses": losses,
            "n_train": int(ds.X_train.shape[0]),
            "n_test": int(ds.X_test.shape[0]),
        }
    }
    ae = None
    if cfg.autoencoder is not None:
        ac = cfg.autoencoder
        ae, ae_losses = fit_autoencoder(ds, ac.widths(ds.d), replace(ac.train, seed=cfg.derived_seed("ae")),
                                        linear=ac.linear)
        report["autoencoder"] = {
            "widths": ac.widths(ds.d),
            "linear": ac.linear,
            "train_mse": reconstruction_mse(ae, ds.X_train),
            "test_mse": reconstruction_mse(ae, ds.X_test),
            "losses": ae_losses,
            "lipschitz": {m: lipschitz_bound(ae.decoder, cfg.bounds.M, m).L
                          for m in ("lemma4", "operator_norm_product")},
        }
    return model, ae, report


def save_trained(cfg: ExperimentConfig, out_dir, model, ae, report) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "model.json", model_to_dict(model), cfg)
    if ae is not None:
        write_json(out / "ae.json", ae_to_dict(ae), cfg)
    write_json(out / "train_metrics.json", report, cfg)


def load_trained_model(path):
    if not Path(path).is_file():
        raise ConfigError(f"model file not found: {path}")
    try:
        return model_from_dict(read_json(path))
    except (KeyError, ValueError) as e:
        raise ConfigError(f"{path}: not a usable model file ({e})") from None


def load_trained_ae(path) -> Autoencoder:
    if not Path(path).is_file():
        raise ConfigError(f"autoencoder file not found: {path}")
    try:
        return ae_from_dict(read_json(path))
    except (KeyError, ValueError) as e:
        raise ConfigError(f"{path}: not a usable autoencoder file ({e})") from None


# ---------------------------------------------------------------- generation

def _latent_params(cfg: ExperimentConfig):
    seed = cfg.derived_seed("latent")
    return replace(cfg.methods.cchvae, seed=seed), replace(cfg.methods.nae, seed=seed)


def _fail(x, method, i, msg) -> GenerationResult:
    return GenerationResult(x, x, method, False, iterations=0, message=msg, instance_id=int(i))


def _recheck(model, r: GenerationResult) -> GenerationResult:
    y0, y1 = predict_label(model, np.stack([r.x, r.x_prime]))
    return replace(r, success=bool(y0 != y1))


def generate(cfg: ExperimentConfig, model, ds: Dataset, ae: Autoencoder | None = None) -> list[GenerationResult]:
    """Run every configured method on the negatively predicted test rows.

    Records are ordered by method (in configuration order), then instance id.
    """
    mcfg = cfg.methods
    if mcfg.needs_ae and ae is None:
        raise ConfigError("methods cchvae/nae need a trained autoencoder")
    ids, X = negative_test_instances(model, ds, cfg.max_instances)
    out: list[GenerationResult] = []
    if ids.size == 0:
        log.warning("no test instance is predicted as class 0; nothing to generate")
        return out
    cc_params, nae_params = _latent_params(cfg)
    s = mcfg.scfe.target
    for method in mcfg.names:
        if method == "scfe":
            out += scfe_iterative_batch(model, X, mcfg.scfe, ids)
        elif method == "cw":
            out += cw_iterative_batch(model, X, mcfg.cw, ids)
        elif method == "deepfool":
            out += deepfool_batch(model, X, mcfg.deepfool, ids)
        elif method in ("scfe_cf", "cw_cf"):
            for i, x in zip(ids, X):
                lin = local_linearize(model, x)
                try:
                    if method == "scfe_cf":
                        r = scfe_closed_form_result(lin, x, s, None, instance_id=int(i))
                    else:
                        c = mcfg.cw.c if mcfg.cw.c is not None else cw_parity_constant(lin, x, s)
                        if c <= 0:
                            out.append(_fail(x, method, i, "non-positive c"))
                            continue
                        xp = x + c * lin.w
                        r = GenerationResult(x, xp, "cw_cf", False, iterations=0,
                                             params={"c": float(c), "target": s}, instance_id=int(i))
                except NoGradientError:
                    out.append(_fail(x, method, i, "zero gradient at x"))
                    continue
                out.append(_recheck(model, r))
        elif method == "cchvae":
            out += [cchvae_search(model, ae, x, cc_params, instance_id=int(i)) for i, x in zip(ids, X)]
        elif method == "nae":
            out += [nae_search(model, ae, x, nae_params, instance_id=int(i)) for i, x in zip(ids, X)]
        else:  # guarded by MethodsConfig
            raise ConfigError(f"unknown method {method!r}")
    return out


def write_results(path, results: list[GenerationResult], cfg: ExperimentConfig) -> None:
    st = stamp(cfg)
    with open(path, "w", encoding="utf-8") as fh:
        for r in results:
            fh.write(json.dumps(r.to_record(**st), sort_keys=True, allow_nan=False))
            fh.write("\n")


# -------------------------------------------------------------------- bounds

def bound_config(cfg: ExperimentConfig) -> BoundConfig:
    b = cfg.bounds
    cc, nae = _latent_params(cfg)
    return BoundConfig(
        s=b.s, lam=b.lam, c=b.c, p=b.p,
        deepfool=replace(cfg.methods.deepfool, overshoot=b.overshoot),
        cw=cfg.methods.cw, cchvae=cc, nae=nae,
        lipschitz_method=b.lipschitz_method, M=b.M, max_instances=cfg.max_instances,
    )


def run_bounds(cfg: ExperimentConfig, model, ds: Dataset, ae: Autoencoder | None = None) -> BoundRun:
    if "cchvae_vs_nae" in cfg.bounds.pairs and ae is None:
        raise ConfigError("bound pair cchvae_vs_nae needs a trained autoencoder")
    return verify_bounds(model, ds, cfg.bounds.pairs, bound_config(cfg), ae=ae)


BOUND_COLUMNS = ("instance_id", "pair", "p", "empirical", "bound", "violated",
                 "lambda", "c", "s", "L", "r_c", "r_nae", "config_hash", "seed")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "inf" if v == np.inf else repr(v)
    return str(v)


def write_bounds(out_dir, run: BoundRun, cfg: ExperimentConfig, model) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    st = stamp(cfg)
    with open(out / "bounds.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BOUND_COLUMNS)
        for r in run.records:
            row = {"instance_id": r.instance_id, "pair": r.pair, "p": r.p, "empirical": r.empirical,
                   "bound": r.bound, "violated": r.violated, **r.params, **st}
            w.writerow([_cell(row.get(c)) for c in BOUND_COLUMNS])
    summary = {
        "model_kind": "linear" if isinstance(model, LinearModel) else "mlp",
        # for nonlinear models the bounds hold for the linearisation only
        "violations_expected_zero": isinstance(model, LinearModel),
        "pairs": summarize(run),
        "violations": sum(r.violated for r in run.records),
        "skipped": [{"instance_id": i, "pair": p, "reason": why} for i, p, why in run.skipped],
        "p": "inf" if cfg.bounds.p == np.inf else cfg.bounds.p,
    }
    write_json(out / "bounds_summary.json", summary, cfg)
    groups = []
    for pr in cfg.bounds.pairs:
        recs = [r for r in run.records if r.pair == pr]
        groups.append((pr, {"empirical": [r.empirical for r in recs], "bound": [r.bound for r in recs]}))
    svg = boxplot_svg(groups, title="empirical distance vs upper bound")
    (out / "bounds.svg").write_text(_svg_with_stamp(svg, cfg), encoding="utf-8")
    return summary


# ------------------------------------------------------------------- metrics

def read_results(path) -> list[GenerationResult]:
    if not Path(path).is_file():
        raise ConfigError(f"results file not found: {path}")
    return read_jsonl(path)


def metric_reports(cfg: ExperimentConfig, results: list[GenerationResult]) -> list[PairReport]:
    by_method: dict[str, list[GenerationResult]] = {m: [] for m in METHOD_IDS}
    for r in results:
        by_method.setdefault(r.method, []).append(r)
    mc = MatchConfig(cfg.metrics.thresholds)
    reports = []
    for pair in cfg.metrics.pairs:
        a, b = cfg.metrics.split(pair)
        if not by_method[a] or not by_method[b]:
            raise ConfigError(f"metric pair {pair} needs results for both {a} and {b}")
        reports.append(pairwise_report(by_method[a], by_method[b], mc, pair=pair))
    return reports


def write_metrics(out_dir, reports: list[PairReport], cfg: ExperimentConfig) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = {
        "thresholds": list(cfg.metrics.thresholds),
        "pairs": [r.to_dict() for r in reports],
        "rho_table": [
            {"pair": r.pair,
             "rho": None if r.rho_mean is None else f"{r.rho_mean:.3f} +- {r.rho_std:.3f}"}
            for r in reports
        ],
    }
    write_json(out / "metrics.json", doc, cfg)
    groups = [(r.pair, {f"theta={t:g}": r.d_match[t] for t in cfg.metrics.thresholds}) for r in reports]
    svg = bar_chart_svg(groups, title="d_match per method pair")
    (out / "dmatch.svg").write_text(_svg_with_stamp(svg, cfg), encoding="utf-8")
    return doc
