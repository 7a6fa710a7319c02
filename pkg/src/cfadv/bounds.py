"""Upper bounds on the distance between counterfactuals and adversarial examples.

The two gradient-pair bounds are ``||A||_p ||w||_p`` for a symmetric matrix
``A`` whose product with ``w`` is exactly the difference of the closed-form
perturbations; ``||A||_p`` is the induced operator norm.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .adversarial import (CwParams, DeepFoolParams, cw_closed_form, cw_iterative_batch, deepfool_batch,
                          nae_search)
from .counterfactuals import NoGradientError, cchvae_search, scfe_closed_form
from .data import Dataset
from .generative import Autoencoder, lipschitz_bound
from .latent import LatentSearchParams, lp_norm, parse_norm
from .models import LinearModel, local_linearize, predict_label

log = logging.getLogger(__name__)

PAIRS = ("scfe_vs_cw", "scfe_vs_deepfool", "cchvae_vs_nae")
VIOLATION_TOL = 1e-9


def induced_norm(A: np.ndarray, p) -> float:
    p = parse_norm(p)
    A = np.asarray(A, dtype=float)
    if p == 2.0:
        # A is symmetric here: the spectral norm is the largest |eigenvalue|
        return float(np.max(np.abs(np.linalg.eigvalsh(A))))
    return float(np.linalg.norm(A, ord=1 if p == 1.0 else np.inf))


def _bound_inputs(lin, x, lam):
    if lam <= 0:
        raise ValueError("lambda must be positive")
    w = np.asarray(lin.w, dtype=float)
    x = np.asarray(x, dtype=float)
    if w.shape != x.shape:
        raise ValueError("input dimension does not match the weights")
    n2 = float(w @ w)
    if n2 == 0.0:
        raise NoGradientError("weight vector is zero")
    fx = float(w @ x + lin.b)
    return w, n2, fx


def _scfe_operator(w, n2, m, lam):
    """``(m / lam) (I - w w^T / (lam + ||w||^2))``, i.e. ``m (w w^T + lam I)^-1``."""
    return (m / lam) * (np.eye(w.size) - np.outer(w, w) / (lam + n2))


def thm1_matrix(lin, x, s: float, lam: float, c: float) -> np.ndarray:
    if c < 0:
        raise ValueError("c must be non-negative")
    w, n2, fx = _bound_inputs(lin, x, lam)
    return _scfe_operator(w, n2, s - fx, lam) - c * np.eye(w.size)


def thm2_matrix(lin, x, s: float, lam: float) -> np.ndarray:
    w, n2, fx = _bound_inputs(lin, x, lam)
    return _scfe_operator(w, n2, s - fx, lam) + (fx / n2) * np.eye(w.size)


def thm1_bound(lin, x, s: float, lam: float, c: float, p=2) -> float:
    """Bound on ``||x_SCFE - x_CW||_p`` for SCFE at ``lam`` and C&W at ``c``."""
    A = thm1_matrix(lin, x, s, lam, c)
    return induced_norm(A, p) * float(np.linalg.norm(lin.w, ord=parse_norm(p)))


def thm2_bound(lin, x, s: float, lam: float, p=2) -> float:
    """Bound on ``||x_SCFE - x_DF||_p`` for SCFE at ``lam`` and one DeepFool step."""
    B = thm2_matrix(lin, x, s, lam)
    return induced_norm(B, p) * float(np.linalg.norm(lin.w, ord=parse_norm(p)))


def lemma3_bound(L: float, r_c: float, r_nae: float) -> float:
    """``L (r_c + r_nae)`` for two decodings of latent points within those radii."""
    if L <= 0:
        raise ValueError("Lipschitz constant must be positive")
    if r_c < 0 or r_nae < 0:
        raise ValueError("radii must be non-negative")
    return L * (r_c + r_nae)


@dataclass(frozen=True)
class BoundRecord:
    instance_id: int
    pair: str
    p: float
    empirical: float
    bound: float
    violated: bool
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.bound < 0:
            raise ValueError("bounds are non-negative")

    @classmethod
    def make(cls, instance_id, pair, p, empirical, bound, **params) -> "BoundRecord":
        return cls(int(instance_id), pair, p, float(empirical), float(bound),
                   bool(empirical > bound + VIOLATION_TOL), params)


@dataclass(frozen=True)
class BoundConfig:
    """Hyperparameters shared by the generators and the bound formulas.

    ``c=None`` uses ``c = (s + kappa/2 - f(x)) / ||w||^2`` per instance,
    computed on the linearisation at ``x`` (``kappa`` is the C&W margin), so
    that C&W aims at the same score as SCFE.
    """

    s: float = 0.0
    lam: float = 0.1
    c: float | None = None
    p: float = 2.0
    deepfool: DeepFoolParams = DeepFoolParams(overshoot=0.0)
    cw: CwParams = CwParams()
    cchvae: LatentSearchParams = LatentSearchParams()
    nae: LatentSearchParams = LatentSearchParams(r0=0.0)
    lipschitz_method: str = "lemma4"
    M: float = 1.0
    max_instances: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "p", parse_norm(self.p))
        if self.lam <= 0:
            raise ValueError("lambda must be positive")


@dataclass
class BoundRun:
    records: list[BoundRecord]
    skipped: list[tuple[int, str, str]]  # (instance_id, pair, reason)


def negative_test_instances(model, dataset: Dataset, max_instances=None):
    X = dataset.X_test
    ids = dataset.test_idx
    if X.shape[0] == 0:
        return ids[:0], X
    keep = predict_label(model, X) == 0
    ids, X = ids[keep], X[keep]
    if max_instances is not None:
        ids, X = ids[:max_instances], X[:max_instances]
    return ids, X


def verify_bounds(model, dataset: Dataset, pairs=PAIRS, cfg: BoundConfig = BoundConfig(),
                  ae: Autoencoder | None = None) -> BoundRun:
    """Generate each method pair on the negatively predicted test rows and compare against the bound.

    For linear models the closed forms are the generators, so the comparison is
    exact. For other models the SCFE side is the closed form on the
    linearisation at ``x``, C&W and DeepFool run on the model itself, and the
    bound is evaluated on that same linearisation.
    """
    pairs = list(pairs)
    for pr in pairs:
        if pr not in PAIRS:
            raise ValueError(f"unknown method pair {pr!r}")
    if "cchvae_vs_nae" in pairs and ae is None:
        raise ValueError("the cchvae_vs_nae pair needs an autoencoder")
    ids, X = negative_test_instances(model, dataset, cfg.max_instances)
    records: list[BoundRecord] = []
    skipped: list[tuple[int, str, str]] = []
    p = cfg.p
    linear = isinstance(model, LinearModel)
    lins = [local_linearize(model, x) for x in X]

    def skip(i, pair, reason):
        log.info("instance %d, %s skipped: %s", i, pair, reason)
        skipped.append((int(i), pair, reason))

    def c_for(lin, x):
        if cfg.c is not None:
            return cfg.c
        fx = float(lin.w @ x + lin.b)
        return (cfg.s + 0.5 * cfg.cw.kappa - fx) / float(lin.w @ lin.w)

    grad_pairs = [pr for pr in pairs if pr != "cchvae_vs_nae"]
    usable = []
    for k, (i, x, lin) in enumerate(zip(ids, X, lins)):
        if not np.any(lin.w):
            for pr in grad_pairs:
                skip(i, pr, "zero gradient at x")
            continue
        usable.append(k)

    if grad_pairs and usable:
        Xu = X[usable]
        scfe = {k: x + scfe_closed_form(lins[k], x, cfg.s, cfg.lam) for k, x in zip(usable, Xu)}
        cs = {k: c_for(lins[k], X[k]) for k in usable}

        if "scfe_vs_cw" in pairs:
            if linear:
                adv = {}
                for k in usable:
                    if cs[k] <= 0:
                        skip(ids[k], "scfe_vs_cw", "non-positive c")
                        continue
                    adv[k] = X[k] + cw_closed_form(lins[k], X[k], cs[k])
            else:
                ok = [k for k in usable if cs[k] > 0]
                for k in usable:
                    if cs[k] <= 0:
                        skip(ids[k], "scfe_vs_cw", "non-positive c")
                adv = {}
                if ok:
                    res = cw_iterative_batch(model, X[ok], cfg.cw, ids[ok], c=[cs[k] for k in ok])
                    for k, r in zip(ok, res):
                        if not r.success:
                            skip(ids[k], "scfe_vs_cw", r.message or "generation failed")
                            continue
                        adv[k] = r.x_prime
            for k, xa in adv.items():
                emp = float(lp_norm(scfe[k] - xa, p))
                b = thm1_bound(lins[k], X[k], cfg.s, cfg.lam, cs[k], p)
                records.append(BoundRecord.make(ids[k], "scfe_vs_cw", p, emp, b,
                                                **{"lambda": cfg.lam, "c": cs[k], "s": cfg.s}))

        if "scfe_vs_deepfool" in pairs:
            res = deepfool_batch(model, Xu, cfg.deepfool, ids[usable])
            for k, r in zip(usable, res):
                if r.message is not None:
                    skip(ids[k], "scfe_vs_deepfool", r.message)
                    continue
                emp = float(lp_norm(scfe[k] - r.x_prime, p))
                b = thm2_bound(lins[k], X[k], cfg.s, cfg.lam, p)
                records.append(BoundRecord.make(ids[k], "scfe_vs_deepfool", p, emp, b,
                                                **{"lambda": cfg.lam, "s": cfg.s,
                                                   "overshoot": cfg.deepfool.overshoot}))

    if "cchvae_vs_nae" in pairs:
        if p != 2.0:
            raise ValueError("the manifold bound is evaluated with l2 Lipschitz constants; use p=2")
        L = lipschitz_bound(ae.decoder, cfg.M, cfg.lipschitz_method).L
        for i, x in zip(ids, X):
            rc = cchvae_search(model, ae, x, cfg.cchvae, instance_id=int(i))
            rn = nae_search(model, ae, x, cfg.nae, instance_id=int(i))
            if not (rc.success and rn.success):
                skip(i, "cchvae_vs_nae", "latent search did not flip the label")
                continue
            emp = float(lp_norm(rc.x_prime - rn.x_prime, p))
            b = lemma3_bound(L, rc.radius, rn.radius)
            records.append(BoundRecord.make(i, "cchvae_vs_nae", p, emp, b,
                                            **{"L": L, "r_c": rc.radius, "r_nae": rn.radius}))

    order = {pr: j for j, pr in enumerate(PAIRS)}
    records.sort(key=lambda r: (order[r.pair], r.instance_id))
    skipped.sort(key=lambda t: (order[t[1]], t[0]))
    return BoundRun(records, skipped)


def _quartiles(v) -> dict:
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        return {"min": None, "q1": None, "median": None, "q3": None, "max": None}
    q = np.percentile(v, [0, 25, 50, 75, 100])
    return dict(zip(("min", "q1", "median", "q3", "max"), (float(t) for t in q)))


def summarize(run: BoundRun) -> dict:
    out = {}
    pairs = sorted({r.pair for r in run.records} | {s[1] for s in run.skipped}, key=PAIRS.index)
    for pr in pairs:
        recs = [r for r in run.records if r.pair == pr]
        out[pr] = {
            "count": len(recs),
            "violations": sum(r.violated for r in recs),
            "skipped": sum(1 for s in run.skipped if s[1] == pr),
            "empirical": _quartiles([r.empirical for r in recs]),
            "bound": _quartiles([r.bound for r in recs]),
        }
    return out
