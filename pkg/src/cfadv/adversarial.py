"""Adversarial examples: C&W (closed form and Adam), DeepFool, NAE latent search."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .counterfactuals import NoGradientError, _linear_parts
from .generative import Autoencoder
from .latent import LatentSearchParams, annulus_schedule, latent_search
from .models import LinearModel, _as_batch
from .optim import Adam, AdamConfig
from .results import GenerationResult


def cw_loss_binary(lin: LinearModel, x, kappa: float = 0.0) -> float:
    """Margin loss ``max(0, kappa - 2 f(x))`` of a sigmoid binary classifier."""
    x = np.asarray(x, dtype=float)
    return max(0.0, kappa - 2.0 * float(np.asarray(lin.w) @ x + lin.b))


def cw_closed_form(lin: LinearModel, x, c: float) -> np.ndarray:
    """Stationary point ``c * w`` of the C&W objective while the margin loss is active."""
    if c < 0:
        raise ValueError("c must be non-negative")
    w, _, _ = _linear_parts(lin, x)
    return c * w


def cw_parity_constant(lin, x, s: float = 0.0) -> float:
    """``c = (s - f(x)) / ||w||^2``, the value making C&W and exact-target SCFE coincide."""
    w, _, fx = _linear_parts(lin, x)
    return (s - fx) / float(w @ w)


@dataclass(frozen=True)
class CwParams:
    """``c=None`` picks ``c = (kappa/2 - f(x)) / ||grad f(x)||^2`` per instance.

    ``kappa`` is the confidence margin of the original attack. With
    ``kappa=0`` the hinge switches off exactly on the decision boundary, so the
    minimiser sits at ``f = 0`` and a strict label flip is left to chance; a
    small positive margin moves it to ``f = kappa / 2``.
    """

    c: float | None = None
    kappa: float = 0.0
    clip_box: bool = False
    steps: int = 2000
    lr: float = 0.1
    lr_decay: float = 0.997
    # fraction of final steps from which label-flipping iterates are kept
    tail: float = 0.25

    def __post_init__(self):
        if self.c is not None and self.c <= 0:
            raise ValueError("c must be positive")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")
        if not 0.0 < self.tail <= 1.0:
            raise ValueError("tail must lie in (0, 1]")


def cw_iterative_batch(model, X, params: CwParams = CwParams(), instance_ids=None, c=None) -> list[GenerationResult]:
    """Adam on ``c * max(0, kappa - 2 f(x')) + ||x' - x||^2`` for every row of ``X``.

    The hinge contributes no gradient once ``2 f(x') >= kappa``. As in the original
    attack, the closest label-flipping iterate is returned, but only iterates
    from the last ``tail`` fraction of steps qualify: early overshoots of the
    still-large learning rate are not minimisers. Rows that never flip return
    the final iterate. ``c`` optionally gives one constant per row and takes
    precedence over ``params.c``.
    """
    X, _ = _as_batch(model, X)
    n = X.shape[0]
    ids = list(range(n)) if instance_ids is None else list(instance_ids)
    f0 = model.logit(X)
    y0 = (f0 >= 0.0).astype(int)
    if c is not None:
        c = np.broadcast_to(np.asarray(c, dtype=float), (n,)).copy()
        if np.any(c < 0):
            raise ValueError("c must be non-negative")
    elif params.c is None:
        g0 = model.gradient(X)
        gn = np.einsum("ij,ij->i", g0, g0)
        c = np.where(gn > 0, np.maximum(0.5 * params.kappa - f0, 0.0) / np.where(gn > 0, gn, 1.0), 0.0)
    else:
        c = np.full(n, float(params.c))
    Xp = X.copy()
    opt = Adam([Xp], AdamConfig(lr=params.lr, decay=params.lr_decay))
    best = X.copy()
    best_d = np.full(n, np.inf)
    first_tracked = int(np.floor((1.0 - params.tail) * params.steps))
    for t in range(params.steps):
        f = model.logit(Xp)
        hinge = (2.0 * f < params.kappa).astype(float)
        G = 2.0 * (Xp - X) - 2.0 * (c * hinge)[:, None] * model.gradient(Xp)
        opt.step([G])
        if params.clip_box:
            np.clip(Xp, 0.0, 1.0, out=Xp)
        if t < first_tracked:
            continue
        flipped = (model.logit(Xp) >= 0.0).astype(int) != y0
        dist = np.linalg.norm(Xp - X, axis=1)
        better = flipped & (dist < best_d)
        best[better] = Xp[better]
        best_d[better] = dist[better]
    found = np.isfinite(best_d)
    out = np.where(found[:, None], best, Xp)
    echo = asdict(params)
    return [
        GenerationResult(X[i], out[i], "cw", bool(found[i]), iterations=params.steps,
                         params={**echo, "c_used": float(c[i])},
                         message=None if found[i] else "no label-flipping iterate found",
                         instance_id=ids[i])
        for i in range(n)
    ]


def cw_iterative(model, x, params: CwParams = CwParams(), instance_id: int = 0) -> GenerationResult:
    X, single = _as_batch(model, x)
    if not single:
        raise ValueError("use cw_iterative_batch for several instances")
    return cw_iterative_batch(model, X, params, [instance_id])[0]


@dataclass(frozen=True)
class DeepFoolParams:
    max_iter: int = 50
    overshoot: float = 0.02
    # relative |f| below which an iterate counts as sitting on the boundary
    boundary_tol: float = 1e-10

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.overshoot < 0:
            raise ValueError("overshoot must be non-negative")


def deepfool_step(lin, x) -> np.ndarray:
    """One DeepFool step on a linear score: ``-(f(x) / ||w||^2) w``."""
    w, _, fx = _linear_parts(lin, x)
    return -(fx / float(w @ w)) * w


def deepfool_batch(model, X, params: DeepFoolParams = DeepFoolParams(), instance_ids=None) -> list[GenerationResult]:
    """Iterate linearised boundary steps until the label changes or the iterate sits on the boundary.

    The accumulated perturbation is scaled by ``1 + overshoot`` at the end.
    """
    X, _ = _as_batch(model, X)
    n = X.shape[0]
    ids = list(range(n)) if instance_ids is None else list(instance_ids)
    f0 = model.logit(X)
    y0 = (f0 >= 0.0).astype(int)
    scale = np.maximum(1.0, np.abs(f0))
    r_tot = np.zeros_like(X)
    xt = X.copy()
    active = np.ones(n, dtype=bool)
    iters = np.zeros(n, dtype=np.int64)
    msgs: list[str | None] = [None] * n
    for _ in range(params.max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        f = model.logit(xt[idx])
        g = model.gradient(xt[idx])
        gn = np.einsum("ij,ij->i", g, g)
        dead = gn <= 1e-24
        for j in idx[dead]:
            msgs[j] = "vanishing gradient at an iterate"
        active[idx[dead]] = False
        live = idx[~dead]
        step = -(f[~dead] / gn[~dead])[:, None] * g[~dead]
        r_tot[live] += step
        xt[live] = X[live] + r_tot[live]
        iters[live] += 1
        f_new = model.logit(xt[live])
        stop = ((f_new >= 0.0).astype(int) != y0[live]) | (np.abs(f_new) <= params.boundary_tol * scale[live])
        active[live[stop]] = False
    for j in np.flatnonzero(active):
        msgs[j] = "max_iter reached before the boundary"
    out = X + (1.0 + params.overshoot) * r_tot
    flipped = (model.logit(out) >= 0.0).astype(int) != y0
    echo = asdict(params)
    return [
        GenerationResult(X[i], out[i], "deepfool", bool(flipped[i]),
                         iterations=int(iters[i]), params=echo, message=msgs[i], instance_id=ids[i])
        for i in range(n)
    ]


def deepfool(model, x, params: DeepFoolParams = DeepFoolParams(), instance_id: int = 0) -> GenerationResult:
    X, single = _as_batch(model, x)
    if not single:
        raise ValueError("use deepfool_batch for several instances")
    return deepfool_batch(model, X, params, [instance_id])[0]


def nae_search(model, ae: Autoencoder, x, params: LatentSearchParams = LatentSearchParams(r0=0.0),
               instance_id: int = 0) -> GenerationResult:
    """Search successive latent annuli ``(r, r + delta_r]`` for a label-flipping decoding."""
    return latent_search(model, ae, x, annulus_schedule(params), params, "nae", instance_id=instance_id)
