"""Latent-space search shared by C-CHVAE (growing balls) and NAE (annuli)."""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass

import numpy as np

from .generative import Autoencoder
from .models import _as_batch
from .results import GenerationResult
from .rng import instance_rng


def parse_norm(p) -> float:
    if isinstance(p, str):
        if p.lower() in ("inf", "infinity", "linf"):
            return np.inf
        p = float(p)
    p = float(p)
    if p not in (1.0, 2.0, np.inf):
        raise ValueError(f"unsupported norm order {p!r}; use 1, 2 or inf")
    return p


def lp_norm(V: np.ndarray, p: float) -> np.ndarray:
    return np.linalg.norm(V, ord=p, axis=-1)


@dataclass(frozen=True)
class LatentSearchParams:
    """Search schedule.

    C-CHVAE samples the ball of radius ``r0 * growth**t`` in round ``t``. NAE
    samples the annulus ``(r0 + t*delta_r, r0 + (t+1)*delta_r]``. ``samples``
    (32) and ``growth`` (1.5) are package defaults, not published values.
    """

    r0: float = 0.1
    growth: float = 1.5
    delta_r: float = 0.1
    samples: int = 32
    max_rounds: int = 40
    p: float = 2.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "p", parse_norm(self.p))
        if self.r0 < 0:
            raise ValueError("r0 must be non-negative")
        if self.growth <= 1:
            raise ValueError("growth factor must exceed 1")
        if self.delta_r <= 0:
            raise ValueError("delta_r must be positive")
        if self.samples < 1 or self.max_rounds < 1:
            raise ValueError("samples and max_rounds must be >= 1")

    def echo(self) -> dict:
        d = asdict(self)
        d["p"] = "inf" if self.p == np.inf else self.p
        return d


def sample_shell(rng: np.random.Generator, n: int, k: int, lo: float, hi: float, p: float) -> np.ndarray:
    """``n`` points uniform in ``{v : lo < ||v||_p <= hi}`` in ``R^k``.

    Directions follow the cone measure of the unit sphere (normalised Gaussian,
    Laplace or cube samples for p = 2, 1, inf); the radius has density
    proportional to ``t**(k-1)`` on ``(lo, hi]``.
    """
    if p == 2.0:
        g = rng.standard_normal((n, k))
    elif p == 1.0:
        g = rng.laplace(size=(n, k))
    else:
        g = rng.uniform(-1.0, 1.0, size=(n, k))
    nrm = lp_norm(g, p)
    nrm = np.where(nrm > 0, nrm, 1.0)
    u = 1.0 - rng.random(n)  # (0, 1]
    radii = (lo ** k + u * (hi ** k - lo ** k)) ** (1.0 / k)
    return g / nrm[:, None] * radii[:, None]


def latent_search(model, ae: Autoencoder, x, shells, params: LatentSearchParams, method: str,
                  instance_id: int = 0, protected=()) -> GenerationResult:
    """Sample each shell in turn; stop at the first round producing a label flip.

    Among flipping candidates of that round the one with the smallest latent
    norm wins (ties: lowest sample index). ``protected`` feature indices are
    reset to their original values before the flip check.
    """
    X, single = _as_batch(model, x)
    if not single:
        raise ValueError("latent search expects a single instance")
    x = X[0]
    if ae.input_dim != x.size:
        raise ValueError("autoencoder and model input dimensions differ")
    rng = instance_rng(params.seed, instance_id)
    protected = np.asarray(list(protected), dtype=np.int64)
    y0 = int(model.logit(X)[0] >= 0.0)
    z = ae.encode(X)[0]
    k = z.size
    lo = hi = 0.0
    for t, (lo, hi) in enumerate(itertools.islice(shells, params.max_rounds)):
        dz = sample_shell(rng, params.samples, k, lo, hi, params.p)
        cand = ae.decode(z + dz)
        if protected.size:
            cand[:, protected] = x[protected]
        flips = (model.logit(cand) >= 0.0).astype(int) != y0
        if np.any(flips):
            norms = np.where(flips, lp_norm(dz, params.p), np.inf)
            j = int(np.argmin(norms))
            return GenerationResult(
                x, cand[j], method, True, iterations=t + 1, radius=float(hi),
                params={**params.echo(), "latent_norm": float(norms[j]), "shell": [float(lo), float(hi)]},
                instance_id=instance_id,
            )
    return GenerationResult(
        x, x, method, False, iterations=params.max_rounds, radius=float(hi),
        params=params.echo(), message="search budget exhausted without a label flip",
        instance_id=instance_id,
    )


def ball_schedule(params: LatentSearchParams):
    if params.r0 <= 0:
        raise ValueError("ball search needs r0 > 0")
    r = params.r0
    while True:
        yield 0.0, r
        r *= params.growth


def annulus_schedule(params: LatentSearchParams):
    t = 0
    while True:
        yield params.r0 + t * params.delta_r, params.r0 + (t + 1) * params.delta_r
        t += 1
