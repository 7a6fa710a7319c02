"""Counterfactual explanations: SCFE (closed form and Adam) and C-CHVAE."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from .generative import Autoencoder
from .latent import LatentSearchParams, ball_schedule, latent_search
from .models import LinearModel, _as_batch
from .optim import Adam, AdamConfig
from .results import GenerationResult

log = logging.getLogger(__name__)


class NoGradientError(ValueError):
    """Raised when a closed form needs a non-zero weight vector."""


def _linear_parts(lin, x):
    w = np.asarray(lin.w, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.shape != w.shape:
        raise ValueError(f"input dimension {x.shape} does not match weights {w.shape}")
    if not np.any(w):
        raise NoGradientError("weight vector is zero")
    return w, x, float(w @ x + lin.b)


def scfe_closed_form(lin: LinearModel, x, s: float, lam: float) -> np.ndarray:
    """Minimiser of ``(f(x+delta) - s)**2 + lam * ||delta||_2**2`` for linear ``f``.

    Solves ``(w w^T + lam I) delta = m w`` with ``m = s - f(x)``.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    w, x, fx = _linear_parts(lin, x)
    m = s - fx
    H = np.outer(w, w) + lam * np.eye(w.size)
    return np.linalg.solve(H, m * w)


def scfe_optimal_delta(lin: LinearModel, x, s: float) -> np.ndarray:
    """Smallest perturbation reaching the target score exactly: ``(m / ||w||^2) w``."""
    w, x, fx = _linear_parts(lin, x)
    return ((s - fx) / float(w @ w)) * w


def optimal_lambda(w) -> float:
    """The published "optimal" regulariser ``||w||^2 / (||w||^2 - 1)``.

    Exposed for reference only: it comes from a scalar simplification that does
    not match the matrix solve, it is negative for ``||w|| < 1`` and undefined
    at ``||w|| = 1``. The package uses :func:`scfe_optimal_delta` instead.
    """
    n2 = float(np.dot(w, w))
    if n2 == 1.0:
        raise ZeroDivisionError("optimal lambda is undefined for ||w|| = 1")
    lam = n2 / (n2 - 1.0)
    if lam < 0:
        log.warning("optimal lambda %.4g is negative (||w||^2 = %.4g < 1) and not a valid regulariser", lam, n2)
    return lam


@dataclass(frozen=True)
class ScfeParams:
    """Adam-based SCFE with an outer schedule on ``lam``.

    ``schedule="decrease"`` divides ``lam`` by ``lam_factor`` between outer
    rounds, which moves ``f(x')`` towards the target; ``"increase"`` multiplies
    it. Each inner run starts from ``x``. Success means ``|f(x') - s| <= tol``
    and, when ``require_flip`` is set, a changed label.
    """

    target: float = 0.0
    lam: float = 0.01
    lam_factor: float = 2.0
    lam_steps: int = 20
    schedule: str = "decrease"
    tol: float = 1e-4
    steps: int = 2000
    lr: float = 0.1
    lr_decay: float = 0.997
    require_flip: bool = False

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        if self.tol <= 0:
            raise ValueError("score tolerance must be positive")
        if self.lam_factor <= 1:
            raise ValueError("lambda growth factor must exceed 1")
        if self.lam_steps < 1 or self.steps < 1:
            raise ValueError("lam_steps and steps must be >= 1")
        if self.schedule not in ("decrease", "increase"):
            raise ValueError(f"unknown lambda schedule {self.schedule!r}")

    def lambdas(self):
        for k in range(self.lam_steps):
            if self.schedule == "decrease":
                yield self.lam / self.lam_factor ** k
            else:
                yield self.lam * self.lam_factor ** k


def _scfe_ok(f, y0, params: ScfeParams):
    ok = np.abs(f - params.target) <= params.tol
    if params.require_flip:
        ok &= (f >= 0.0).astype(int) != y0
    return ok


def scfe_iterative_batch(model, X, params: ScfeParams = ScfeParams(), instance_ids=None) -> list[GenerationResult]:
    """Run SCFE on every row of ``X`` at once (rows are independent problems)."""
    X, _ = _as_batch(model, X)
    n = X.shape[0]
    ids = list(range(n)) if instance_ids is None else list(instance_ids)
    f0 = model.logit(X)
    y0 = (f0 >= 0.0).astype(int)
    done = _scfe_ok(f0, y0, params)
    out = X.copy()
    lam_used = np.full(n, np.nan)
    iters = np.zeros(n, dtype=np.int64)
    s = params.target
    for lam in params.lambdas():
        act = np.flatnonzero(~done)
        if act.size == 0:
            break
        Xa = X[act]
        Xp = Xa.copy()
        opt = Adam([Xp], AdamConfig(lr=params.lr, decay=params.lr_decay))
        for _ in range(params.steps):
            f = model.logit(Xp)
            G = 2.0 * (f - s)[:, None] * model.gradient(Xp) + 2.0 * lam * (Xp - Xa)
            opt.step([G])
        out[act] = Xp
        lam_used[act] = lam
        iters[act] += params.steps
        done[act] = _scfe_ok(model.logit(Xp), y0[act], params)
    echo = asdict(params)
    results = []
    for i in range(n):
        p = {**echo, "lambda_final": None if np.isnan(lam_used[i]) else float(lam_used[i])}
        msg = None
        if iters[i] == 0:
            msg = "already within score tolerance" if done[i] else None
        elif not done[i]:
            msg = "score tolerance not reached within the lambda schedule"
        results.append(GenerationResult(X[i], out[i], "scfe", bool(done[i]), iterations=int(iters[i]),
                                        params=p, message=msg, instance_id=ids[i]))
    return results


def scfe_iterative(model, x, params: ScfeParams = ScfeParams(), instance_id: int = 0) -> GenerationResult:
    X, single = _as_batch(model, x)
    if not single:
        raise ValueError("use scfe_iterative_batch for several instances")
    return scfe_iterative_batch(model, X, params, [instance_id])[0]


def scfe_closed_form_result(lin, x, s: float, lam: float | None = None, instance_id: int = 0) -> GenerationResult:
    """Closed-form SCFE as a result record (``lam=None`` uses the exact-target delta)."""
    delta = scfe_optimal_delta(lin, x, s) if lam is None else scfe_closed_form(lin, x, s, lam)
    x = np.asarray(x, dtype=float)
    xp = x + delta
    f0, f1 = float(lin.w @ x + lin.b), float(lin.w @ xp + lin.b)
    flipped = (f1 >= 0.0) != (f0 >= 0.0)
    return GenerationResult(x, xp, "scfe_cf", flipped, iterations=0,
                            params={"target": s, "lambda": lam}, instance_id=instance_id)


def cchvae_search(model, ae: Autoencoder, x, params: LatentSearchParams = LatentSearchParams(),
                  instance_id: int = 0, protected=()) -> GenerationResult:
    """Grow an l_p ball around the latent code of ``x`` until a decoded sample flips the label."""
    return latent_search(model, ae, x, ball_schedule(params), params, "cchvae",
                         instance_id=instance_id, protected=protected)
