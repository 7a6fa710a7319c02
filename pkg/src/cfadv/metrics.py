"""Agreement between counterfactual and adversarial outputs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .results import GenerationResult


class UndefinedCorrelation(ValueError):
    """Rank correlation is undefined when one vector is constant."""


@dataclass(frozen=True)
class MatchConfig:
    thresholds: tuple[float, ...] = (0.02, 0.05, 0.1)
    # None: take the dimension from the data
    d: int | None = None

    def __post_init__(self):
        th = tuple(float(t) for t in self.thresholds)
        if not th:
            raise ValueError("at least one threshold is needed")
        if any(t <= 0 for t in th):
            raise ValueError("thresholds must be positive")
        if any(b <= a for a, b in zip(th, th[1:])):
            raise ValueError("thresholds must be strictly ascending")
        object.__setattr__(self, "thresholds", th)
        if self.d is not None and self.d < 1:
            raise ValueError("dimension must be >= 1")


def _paired(a, b):
    A = np.atleast_2d(np.asarray(a, dtype=float))
    B = np.atleast_2d(np.asarray(b, dtype=float))
    if A.shape[0] != B.shape[0]:
        raise ValueError(f"{A.shape[0]} CE outputs vs {B.shape[0]} AE outputs")
    if A.shape[1:] != B.shape[1:]:
        raise ValueError("output dimensions differ")
    return A, B


def normalized_distances(ce_outputs, ae_outputs, d: int | None = None) -> np.ndarray:
    A, B = _paired(ce_outputs, ae_outputs)
    d = A.shape[1] if d is None else d
    return np.linalg.norm(A - B, axis=1) / np.sqrt(d)


def d_match(ce_outputs, ae_outputs, theta: float, d: int | None = None) -> float:
    """Fraction of pairs with ``||x_ce - x_ae||_2 / sqrt(d) < theta``."""
    if theta <= 0:
        raise ValueError("theta must be positive")
    dist = normalized_distances(ce_outputs, ae_outputs, d)
    if dist.size == 0:
        return float("nan")
    return float(np.mean(dist < theta))


def spearman_rho(a, b) -> float:
    """Spearman correlation with average ranks for ties."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 1 or a.shape != b.shape:
        raise ValueError("expected two vectors of equal length")
    if a.size < 2:
        raise ValueError("need at least two entries")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("inputs must be finite")
    ra = rankdata(a) - (a.size + 1) / 2.0
    rb = rankdata(b) - (b.size + 1) / 2.0
    na, nb = ra @ ra, rb @ rb
    if na == 0 or nb == 0:
        raise UndefinedCorrelation("a constant vector has no ranking")
    return float(np.clip((ra @ rb) / np.sqrt(na * nb), -1.0, 1.0))


@dataclass(frozen=True)
class PairReport:
    pair: str
    n: int
    skipped: int
    rho: tuple[float, ...]
    rho_mean: float | None
    rho_std: float | None
    rho_skipped: int
    d_match: dict

    def to_dict(self) -> dict:
        return {
            "pair": self.pair,
            "n": self.n,
            "skipped": self.skipped,
            "rho_mean": self.rho_mean,
            "rho_std": self.rho_std,
            "rho_undefined": self.rho_skipped,
            "d_match": {repr(t): v for t, v in self.d_match.items()},
        }


def pairwise_report(results_ce: list[GenerationResult], results_ae: list[GenerationResult],
                    cfg: MatchConfig = MatchConfig(), pair: str | None = None) -> PairReport:
    """Align two result lists by instance id and summarise their agreement.

    Only instances where both generations succeeded count; the rest go into
    ``skipped``. Pairs whose rank correlation is undefined (a constant
    perturbation) are left out of the rho statistics and counted separately.
    The standard deviation is the population one.
    """
    def by_id(rs):
        out = {}
        for k, r in enumerate(rs):
            key = r.instance_id if r.instance_id is not None else k
            if key in out:
                raise ValueError(f"duplicate instance id {key}")
            out[key] = r
        return out

    ce, ae = by_id(results_ce), by_id(results_ae)
    if pair is None:
        m1 = results_ce[0].method if results_ce else "ce"
        m2 = results_ae[0].method if results_ae else "ae"
        pair = f"{m1}_vs_{m2}"
    ids = sorted(set(ce) | set(ae))
    both = [i for i in ids if i in ce and i in ae and ce[i].success and ae[i].success]
    skipped = len(ids) - len(both)
    rhos = []
    undefined = 0
    for i in both:
        try:
            rhos.append(spearman_rho(ce[i].delta, ae[i].delta))
        except UndefinedCorrelation:
            undefined += 1
    if both:
        A = np.stack([ce[i].x_prime for i in both])
        B = np.stack([ae[i].x_prime for i in both])
        dm = {t: d_match(A, B, t, cfg.d) for t in cfg.thresholds}
    else:
        dm = {t: None for t in cfg.thresholds}
    r = np.asarray(rhos)
    return PairReport(
        pair=pair, n=len(both), skipped=skipped, rho=tuple(rhos),
        rho_mean=float(r.mean()) if r.size else None,
        rho_std=float(r.std()) if r.size else None,
        rho_skipped=undefined, d_match=dm,
    )
