"""Deterministic autoencoders and Lipschitz constants of their decoders."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .models import FORMAT_VERSION, Dense, TrainConfig, _Raw, backward, check_stack, forward, init_layers
from .optim import Adam
from .rng import make_rng


@dataclass(frozen=True)
class Autoencoder:
    encoder: tuple[Dense, ...]
    decoder: tuple[Dense, ...]
    linear: bool = False

    def __post_init__(self):
        enc, dec = tuple(self.encoder), tuple(self.decoder)
        check_stack(enc)
        check_stack(dec)
        if enc[-1].n_out != dec[0].n_in:
            raise ValueError("encoder output width must equal decoder input width")
        if dec[-1].n_out != enc[0].n_in:
            raise ValueError("decoder must map back to the input dimension")
        object.__setattr__(self, "encoder", enc)
        object.__setattr__(self, "decoder", dec)

    @property
    def input_dim(self) -> int:
        return self.encoder[0].n_in

    @property
    def latent_dim(self) -> int:
        return self.encoder[-1].n_out

    def encode(self, X: np.ndarray) -> np.ndarray:
        return forward(self.encoder, X, relu=not self.linear)[0]

    def decode(self, Z: np.ndarray) -> np.ndarray:
        return forward(self.decoder, Z, relu=not self.linear)[0]

    def reconstruct(self, X: np.ndarray) -> np.ndarray:
        return self.decode(self.encode(X))


def _batched(fn, x, width):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != width:
        raise ValueError(f"input dimension {X.shape[-1]} does not match expected {width}")
    out = fn(X)
    return out[0] if single else out


def encode(ae: Autoencoder, x) -> np.ndarray:
    return _batched(ae.encode, x, ae.input_dim)


def decode(ae: Autoencoder, z) -> np.ndarray:
    return _batched(ae.decode, z, ae.latent_dim)


def default_decoder_widths(arch) -> list[int]:
    """Decoder widths for encoder widths ``[d, h1, ..., k]``: ``[k, h1, ..., d]``.

    This keeps the hidden widths in the same order as the encoder, as in the
    reference architecture tables (encoder [d, 16, 32, 10], decoder [10, 16, 32, d]).
    """
    arch = [int(a) for a in arch]
    return [arch[-1], *arch[1:-1], arch[0]]


def fit_autoencoder(dataset: Dataset, arch, cfg: TrainConfig, linear: bool = False, decoder_arch=None):
    """Adam on mean squared reconstruction error. Returns ``(ae, losses)``."""
    X = dataset.X_train
    if X.shape[0] == 0:
        raise ValueError("cannot train an autoencoder on empty data")
    arch = [int(a) for a in arch]
    if len(arch) < 2 or arch[0] != X.shape[1]:
        raise ValueError(f"encoder widths {arch} must start with the data dimension {X.shape[1]}")
    dec_arch = default_decoder_widths(arch) if decoder_arch is None else [int(a) for a in decoder_arch]
    if dec_arch[0] != arch[-1] or dec_arch[-1] != arch[0]:
        raise ValueError("decoder widths must run from the latent size back to the data dimension")
    rng = make_rng(cfg.seed)
    enc_p = init_layers(arch, rng, cfg.init)
    dec_p = init_layers(dec_arch, rng, cfg.init)
    params = enc_p + dec_p
    n_enc = len(enc_p)
    opt = Adam([a for pair in params for a in pair], cfg.adam())
    relu = not linear

    def run(Xb):
        enc = [_Raw(W, b) for W, b in enc_p]
        dec = [_Raw(W, b) for W, b in dec_p]
        Z, c_enc = forward(enc, Xb, relu=relu)
        R, c_dec = forward(dec, Z, relu=relu)
        return enc, dec, c_enc, c_dec, R

    def full_loss():
        return float(np.mean((run(X)[-1] - X) ** 2))

    losses = [full_loss()]
    n = X.shape[0]
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            Xb = X[perm[start:start + cfg.batch_size]]
            enc, dec, c_enc, c_dec, R = run(Xb)
            gR = 2.0 * (R - Xb) / R.size
            gZ, g_dec = backward(dec, c_dec, gR, relu=relu)
            _, g_enc = backward(enc, c_enc, gZ, relu=relu)
            opt.step([g for pair in g_enc + g_dec for g in pair])
        losses.append(full_loss())
    ae = Autoencoder(
        tuple(Dense(W, b) for W, b in params[:n_enc]),
        tuple(Dense(W, b) for W, b in params[n_enc:]),
        linear=linear,
    )
    return ae, losses


def train_autoencoder(dataset: Dataset, arch, cfg: TrainConfig, linear: bool = False, decoder_arch=None) -> Autoencoder:
    return fit_autoencoder(dataset, arch, cfg, linear, decoder_arch)[0]


def reconstruction_mse(ae: Autoencoder, X) -> float:
    X = np.asarray(X, dtype=float)
    return float(np.mean((ae.reconstruct(X) - X) ** 2))


@dataclass(frozen=True)
class LipschitzEstimate:
    L: float
    method: str
    inputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (np.isfinite(self.L) and self.L > 0):
            raise ValueError(f"Lipschitz constant must be finite and positive, got {self.L}")


def spectral_norm(W: np.ndarray, iters: int = 50, tol: float = 1e-9) -> float:
    """Largest singular value by power iteration on ``W.T @ W``."""
    W = np.asarray(W, dtype=float)
    v = make_rng(0).standard_normal(W.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(iters):
        u = W @ v
        s_new = float(np.linalg.norm(u))
        if s_new == 0.0:
            return 0.0
        v = W.T @ u
        v /= np.linalg.norm(v)
        if abs(s_new - sigma) <= tol * s_new:
            sigma = s_new
            break
        sigma = s_new
    return max(sigma, float(np.linalg.norm(W @ v)))


def lipschitz_bound(decoder, M: float = 1.0, method: str = "lemma4") -> LipschitzEstimate:
    """Lipschitz constant of a layer stack with M-Lipschitz activations.

    ``lemma4``: ``(M * c * w_max) ** depth`` with ``c`` the widest layer
    (inputs included), ``w_max`` the largest absolute weight and ``depth`` the
    number of weight layers. ``operator_norm_product``: product of spectral
    norms times ``M ** (depth - 1)``.
    """
    layers = tuple(decoder.decoder if isinstance(decoder, Autoencoder) else decoder)
    if len(layers) == 0:
        raise ValueError("decoder has no layers")
    if M <= 0:
        raise ValueError("activation Lipschitz constant M must be positive")
    depth = len(layers)
    if method == "lemma4":
        c = max(max(l.weight.shape) for l in layers)
        w_max = max(float(np.max(np.abs(l.weight))) for l in layers)
        L = (M * c * w_max) ** depth
        return LipschitzEstimate(L, method, {"M": M, "c": c, "w_max": w_max, "depth": depth})
    if method == "operator_norm_product":
        norms = [spectral_norm(l.weight) for l in layers]
        L = float(np.prod(norms)) * M ** (depth - 1)
        return LipschitzEstimate(L, method, {"M": M, "depth": depth, "spectral_norms": norms})
    raise ValueError(f"unknown Lipschitz method {method!r}")


def ae_to_dict(ae: Autoencoder) -> dict:
    return {
        "version": FORMAT_VERSION,
        "kind": "autoencoder",
        "linear": ae.linear,
        "latent_dim": ae.latent_dim,
        "encoder": {"layers": [l.to_dict() for l in ae.encoder]},
        "decoder": {"layers": [l.to_dict() for l in ae.decoder]},
    }


def ae_from_dict(d: dict) -> Autoencoder:
    if d.get("version") != FORMAT_VERSION or d.get("kind") != "autoencoder":
        raise ValueError("not a v1 autoencoder document")
    ae = Autoencoder(
        tuple(Dense.from_dict(l) for l in d["encoder"]["layers"]),
        tuple(Dense.from_dict(l) for l in d["decoder"]["layers"]),
        linear=bool(d.get("linear", False)),
    )
    if "latent_dim" in d and int(d["latent_dim"]) != ae.latent_dim:
        raise ValueError("latent_dim field disagrees with the layer shapes")
    return ae


def save_autoencoder(ae: Autoencoder, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(ae_to_dict(ae), fh, indent=1)
        fh.write("\n")


def load_autoencoder(path) -> Autoencoder:
    with open(path, encoding="utf-8") as fh:
        return ae_from_dict(json.load(fh))
