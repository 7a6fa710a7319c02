"""Builders shared by the test modules."""

import numpy as np

from cfadv.data import Dataset, FeatureSchema, gen_gaussian_mixture, train_test_split
from cfadv.models import Dense, LinearModel, MlpModel


def random_linear(rng, d, min_norm=0.5):
    while True:
        w = rng.normal(size=d)
        if np.linalg.norm(w) >= min_norm:
            return LinearModel(w, float(rng.normal()))


def random_mlp(rng, widths, scale=1.0):
    layers = []
    for a, b in zip(widths[:-1], widths[1:]):
        layers.append(Dense(rng.normal(scale=scale / np.sqrt(a), size=(b, a)), rng.normal(scale=0.1, size=b)))
    return MlpModel(tuple(layers))


def away_from_kinks(model, x, eps=1e-6):
    return all(np.all(np.abs(z) >= eps) for z in model.pre_activations(x[None])[:-1])


def mixture_split(n=5000, seed=7, split_seed=7, mu=(1.0, 1.0)):
    mu = np.asarray(mu, dtype=float)
    return train_test_split(gen_gaussian_mixture(n, -mu, mu, seed), 0.2, split_seed)


def tiny_dataset(X, y):
    X = np.asarray(X, dtype=float)
    d = X.shape[1]
    return Dataset(X, np.asarray(y), FeatureSchema.numeric([f"x{i}" for i in range(d)]), np.zeros(d), np.ones(d))
