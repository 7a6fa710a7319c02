import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfadv.generative import (Autoencoder, ae_from_dict, ae_to_dict, decode, default_decoder_widths, encode,
                              fit_autoencoder, lipschitz_bound, load_autoencoder, reconstruction_mse,
                              save_autoencoder, spectral_norm)
from cfadv.models import Dense, TrainConfig

from helpers import mixture_split


def identity_ae(d):
    return Autoencoder((Dense(np.eye(d), np.zeros(d)),), (Dense(np.eye(d), np.zeros(d)),), linear=True)


def random_decoder(rng, widths):
    return tuple(Dense(rng.normal(size=(b, a)) / np.sqrt(a), rng.normal(scale=0.1, size=b))
                 for a, b in zip(widths[:-1], widths[1:]))


# ---- encode / decode

def test_identity_encoder_and_zero_encoder():
    ae = identity_ae(3)
    x = np.array([0.5, -1.0, 2.0])
    assert encode(ae, x).tolist() == x.tolist()
    assert decode(ae, x).tolist() == x.tolist()
    zero = Autoencoder((Dense(np.zeros((2, 3)), np.zeros(2)),), (Dense(np.zeros((3, 2)), np.zeros(3)),))
    assert encode(zero, x).tolist() == [0.0, 0.0]
    assert decode(zero, [1.0, 2.0]).tolist() == [0.0, 0.0, 0.0]


def test_dimension_mismatch():
    ae = identity_ae(2)
    with pytest.raises(ValueError):
        encode(ae, [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        decode(ae, [1.0])


def test_inconsistent_stacks_rejected():
    with pytest.raises(ValueError):
        Autoencoder((Dense(np.eye(2), np.zeros(2)),), (Dense(np.ones((3, 3)), np.zeros(3)),))


def test_default_decoder_order():
    assert default_decoder_widths([2, 16, 32, 10]) == [10, 16, 32, 2]


# ---- training

def test_linear_identity_capable_ae_reaches_tiny_mse():
    ds = mixture_split(n=1000)
    ae, losses = fit_autoencoder(ds, [2, 2], TrainConfig(epochs=30, learning_rate=0.01, seed=0), linear=True)
    assert reconstruction_mse(ae, ds.X_test) < 1e-4
    assert losses[-1] < losses[0]


def test_relu_ae_beats_rank_one_pca():
    ds = mixture_split(n=2000)
    ae, losses = fit_autoencoder(ds, [2, 16, 32, 10], TrainConfig(epochs=20, seed=0))
    X = ds.X_train
    Xc = X - X.mean(axis=0)
    evals = np.linalg.eigvalsh(Xc.T @ Xc / X.shape[0])
    pca_mse = evals[0] / X.shape[1]  # mean squared error per entry of the best rank-1 affine projection
    assert reconstruction_mse(ae, X) <= pca_mse
    assert losses[-1] < losses[0]


def test_zero_learning_rate_keeps_parameters():
    ds = mixture_split(n=200)
    a, la = fit_autoencoder(ds, [2, 4, 3], TrainConfig(epochs=1, learning_rate=0.0, seed=3))
    b, lb = fit_autoencoder(ds, [2, 4, 3], TrainConfig(epochs=3, learning_rate=0.0, seed=3))
    for la_, lb_ in zip(a.encoder + a.decoder, b.encoder + b.decoder):
        assert np.array_equal(la_.weight, lb_.weight) and np.array_equal(la_.bias, lb_.bias)
    assert len(set(lb)) == 1


def test_training_deterministic():
    ds = mixture_split(n=300)
    a, _ = fit_autoencoder(ds, [2, 4, 2], TrainConfig(epochs=2, seed=8))
    b, _ = fit_autoencoder(ds, [2, 4, 2], TrainConfig(epochs=2, seed=8))
    assert all(np.array_equal(u.weight, v.weight) for u, v in zip(a.decoder, b.decoder))


def test_empty_data_rejected():
    ds = mixture_split(n=10)
    from dataclasses import replace
    empty = replace(ds, X=ds.X[:0], y=ds.y[:0], train_idx=ds.train_idx[:0], test_idx=ds.test_idx[:0])
    with pytest.raises(ValueError):
        fit_autoencoder(empty, [2, 2], TrainConfig())


# ---- Lipschitz constants

def test_lemma4_example():
    layers = (Dense(np.full((3, 3), 0.5), np.zeros(3)), Dense(np.full((3, 3), -0.25), np.zeros(3)))
    est = lipschitz_bound(layers, M=1.0, method="lemma4")
    assert est.L == pytest.approx(2.25)
    assert est.inputs == {"M": 1.0, "c": 3, "w_max": 0.5, "depth": 2}


def test_operator_norm_identity():
    est = lipschitz_bound((Dense(np.eye(4), np.zeros(4)),), method="operator_norm_product")
    assert est.L == pytest.approx(1.0, abs=1e-12)


def test_empty_decoder_and_unknown_method():
    with pytest.raises(ValueError):
        lipschitz_bound(())
    with pytest.raises(ValueError):
        lipschitz_bound((Dense(np.eye(2), np.zeros(2)),), method="svd")


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_power_iteration_against_svd(seed):
    W = np.random.default_rng(seed).normal(size=(5, 7))
    sv = np.linalg.svd(W, compute_uv=False)
    est = spectral_norm(W)
    # a Rayleigh-quotient estimate never exceeds the true value
    assert est <= sv[0] * (1 + 1e-12)
    if sv[0] / sv[1] > 1.1:
        assert est == pytest.approx(sv[0], rel=1e-6)


@pytest.mark.parametrize("method", ["lemma4", "operator_norm_product"])
@pytest.mark.parametrize("widths", [[3, 8, 5], [10, 16, 32, 2], [2, 2]])
def test_empirical_lipschitz_property(method, widths):
    rng = np.random.default_rng(sum(widths))
    dec = random_decoder(rng, widths)
    ae_like = Autoencoder((Dense(np.zeros((widths[0], widths[-1])), np.zeros(widths[0])),), dec)
    L = lipschitz_bound(dec, 1.0, method).L
    Z1 = rng.normal(size=(1000, widths[0]))
    Z2 = Z1 + rng.normal(scale=rng.uniform(0.01, 3.0, size=(1000, 1)), size=Z1.shape)
    num = np.linalg.norm(ae_like.decode(Z1) - ae_like.decode(Z2), axis=1)
    assert np.all(num <= L * np.linalg.norm(Z1 - Z2, axis=1))


# ---- serialisation

def test_ae_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    enc = random_decoder(rng, [3, 5, 2])
    ae = Autoencoder(enc, random_decoder(rng, [2, 5, 3]))
    p = tmp_path / "ae.json"
    save_autoencoder(ae, p)
    back = load_autoencoder(p)
    X = rng.normal(size=(4, 3))
    assert np.array_equal(back.reconstruct(X), ae.reconstruct(X))
    d = ae_to_dict(ae)
    assert set(d) >= {"encoder", "decoder", "latent_dim"}
    d["latent_dim"] = 7
    with pytest.raises(ValueError):
        ae_from_dict(d)
