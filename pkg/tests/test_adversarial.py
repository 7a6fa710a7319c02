import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfadv.adversarial import (CwParams, DeepFoolParams, cw_closed_form, cw_iterative, cw_iterative_batch,
                               cw_loss_binary, cw_parity_constant, deepfool, deepfool_batch, deepfool_step,
                               nae_search)
from cfadv.counterfactuals import NoGradientError, scfe_optimal_delta
from cfadv.generative import Autoencoder
from cfadv.latent import LatentSearchParams
from cfadv.models import Dense, LinearModel, MlpModel, TrainConfig, predict_label, predict_logit, train_mlp

from helpers import mixture_split, random_linear
from oracles import cw_line_search


def identity_ae(d):
    return Autoencoder((Dense(np.eye(d), np.zeros(d)),), (Dense(np.eye(d), np.zeros(d)),), linear=True)


def negative_point(lin, rng, d):
    x = rng.normal(size=d)
    if predict_label(lin, x) == 1:
        x = x - 2 * (lin.w @ x + lin.b) / (lin.w @ lin.w) * lin.w
    return x


# ---- C&W

def test_cw_loss_examples():
    lin = LinearModel([1.0, 0.0], 0.0)
    assert cw_loss_binary(lin, [-1.0, 0.0]) == 2.0
    assert cw_loss_binary(lin, [1.0, 0.0]) == 0.0
    assert cw_loss_binary(lin, [0.0, 0.0]) == 0.0
    assert cw_loss_binary(lin, [0.0, 0.0], kappa=0.5) == 0.5


def test_cw_closed_form_examples():
    lin = LinearModel([1.0, 0.0], 0.0)
    np.testing.assert_allclose(cw_closed_form(lin, [-1.0, 0.0], 0.5), [0.5, 0.0])
    assert not np.any(cw_closed_form(lin, [-1.0, 0.0], 0.0))
    with pytest.raises(ValueError):
        cw_closed_form(lin, [-1.0, 0.0], -1.0)
    with pytest.raises(NoGradientError):
        cw_closed_form(LinearModel([0.0, 0.0], 0.0), [1.0, 1.0], 1.0)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(-3, 3))
def test_cw_parity_matches_exact_target_scfe(seed, s):
    rng = np.random.default_rng(seed)
    lin = random_linear(rng, 4)
    x = rng.normal(size=4)
    c = cw_parity_constant(lin, x, s)
    np.testing.assert_allclose(c * lin.w, scfe_optimal_delta(lin, x, s), rtol=1e-12, atol=1e-12)


def test_cw_iterative_matches_line_search_below_threshold():
    rng = np.random.default_rng(1)
    for i in range(10):
        lin = random_linear(rng, 3)
        x = negative_point(lin, rng, 3)
        f0 = lin.w @ x + lin.b
        c = 0.6 * (-f0) / (lin.w @ lin.w)  # stationary point stays on the negative side
        r = cw_iterative(lin, x, CwParams(c=c, steps=3000), instance_id=i)
        assert not r.success
        ref = cw_line_search(lin.w, lin.b, x, c)
        np.testing.assert_allclose(r.delta, ref, atol=1e-3)
        np.testing.assert_allclose(ref, cw_closed_form(lin, x, c), atol=1e-6)


def test_cw_iterative_with_margin_flips_near_kappa():
    rng = np.random.default_rng(2)
    params = CwParams(kappa=2e-4)
    for i in range(10):
        lin = random_linear(rng, 2)
        x = negative_point(lin, rng, 2)
        r = cw_iterative(lin, x, params, instance_id=i)
        assert r.success and predict_label(lin, r.x_prime) == 1
        np.testing.assert_allclose(r.delta, scfe_optimal_delta(lin, x, 1e-4), atol=1e-3)


def test_cw_positive_start_stays_put():
    lin = LinearModel([1.0, 0.0], 0.0)
    r = cw_iterative(lin, [2.0, 0.0], CwParams(c=1.0, steps=200))
    # the hinge is inactive, so only the distance term acts and no flip happens
    assert not r.success and np.linalg.norm(r.delta) < 1e-8


def test_cw_clip_box():
    lin = LinearModel([1.0, 1.0], -3.0)
    r = cw_iterative(lin, [0.2, 0.3], CwParams(c=10.0, steps=300, clip_box=True))
    assert np.all((r.x_prime >= 0) & (r.x_prime <= 1))
    assert not r.success  # the box excludes the positive half-space


def test_cw_row_constants_override():
    lin = LinearModel([1.0, 0.0], 0.0)
    X = np.array([[-1.0, 0.0], [-1.0, 0.0]])
    rs = cw_iterative_batch(lin, X, CwParams(steps=3000), c=[0.2, 0.4])
    np.testing.assert_allclose(rs[0].delta, [0.2, 0.0], atol=1e-3)
    np.testing.assert_allclose(rs[1].delta, [0.4, 0.0], atol=1e-3)
    assert [r.params["c_used"] for r in rs] == [0.2, 0.4]


@pytest.mark.parametrize("kw", [{"c": 0.0}, {"steps": 0}, {"kappa": -1.0}, {"tail": 0.0}])
def test_cw_params_invariants(kw):
    with pytest.raises(ValueError):
        CwParams(**kw)


# ---- DeepFool

def test_deepfool_examples():
    lin = LinearModel([1.0, 0.0], 0.0)
    r = deepfool(lin, [-1.0, 0.0], DeepFoolParams(overshoot=0.0))
    np.testing.assert_allclose(r.delta, [1.0, 0.0])
    assert r.iterations == 1
    r = deepfool(lin, [-1.0, 0.0], DeepFoolParams(overshoot=0.02))
    np.testing.assert_allclose(r.delta, [1.02, 0.0])
    assert r.success and predict_logit(lin, r.x_prime) == pytest.approx(0.02)
    np.testing.assert_allclose(deepfool_step(lin, [-1.0, 0.0]), [1.0, 0.0])


def test_deepfool_positive_start_examples():
    lin = LinearModel([1.0, 0.0], 0.0)
    r = deepfool(lin, [2.0, 0.0], DeepFoolParams(overshoot=0.0))
    np.testing.assert_allclose(r.delta, [-2.0, 0.0])
    assert predict_logit(lin, r.x_prime) == 0.0
    r = deepfool(lin, [2.0, 0.0], DeepFoolParams(overshoot=0.02))
    np.testing.assert_allclose(r.delta, [-2.04, 0.0])
    assert predict_logit(lin, r.x_prime) == pytest.approx(-0.04) and r.success


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 6), st.floats(0.0, 0.5))
def test_deepfool_linear_one_step_and_norm(seed, d, eta):
    rng = np.random.default_rng(seed)
    lin = random_linear(rng, d)
    x = rng.normal(size=d)
    r = deepfool(lin, x, DeepFoolParams(overshoot=eta))
    f0 = lin.w @ x + lin.b
    assert r.iterations <= 1
    assert np.linalg.norm(r.delta) == pytest.approx((1 + eta) * abs(f0) / np.linalg.norm(lin.w), rel=1e-9, abs=1e-12)
    if eta == 0.0:
        np.testing.assert_allclose(r.delta, scfe_optimal_delta(lin, x, 0.0), rtol=1e-12, atol=1e-12)


def test_deepfool_vanishing_gradient():
    # all ReLUs dead: the logit is constant and its gradient is zero
    m = MlpModel((Dense(np.array([[1.0, 1.0]]), np.array([-100.0])), Dense(np.array([[1.0]]), np.array([-1.0]))))
    r = deepfool(m, [0.0, 0.0])
    assert not r.success and "vanishing" in r.message


def test_deepfool_mlp_flips():
    ds = mixture_split(n=1000)
    m = train_mlp(ds, [18, 9, 3], TrainConfig(seed=2, epochs=10))
    X = ds.X_test[predict_label(m, ds.X_test) == 0][:50]
    rs = deepfool_batch(m, X)
    assert sum(r.success for r in rs) >= 45
    for r in rs:
        if r.success:
            assert predict_label(m, r.x_prime) == 1


@pytest.mark.parametrize("kw", [{"max_iter": 0}, {"overshoot": -0.1}])
def test_deepfool_params_invariants(kw):
    with pytest.raises(ValueError):
        DeepFoolParams(**kw)


# ---- NAE

def test_nae_constant_model_fails():
    r = nae_search(LinearModel([0.0, 0.0], -1.0), identity_ae(2), [0.0, 0.0], LatentSearchParams(r0=0, max_rounds=4))
    assert not r.success and r.iterations == 4 and r.radius == pytest.approx(0.4)


def test_nae_radius_lower_bound_linear_identity():
    rng = np.random.default_rng(5)
    p = LatentSearchParams(r0=0.0, delta_r=0.05, max_rounds=200)
    for i in range(25):
        lin = random_linear(rng, 3)
        x = negative_point(lin, rng, 3)
        r = nae_search(lin, identity_ae(3), x, p, instance_id=i)
        assert r.success and predict_label(lin, r.x_prime) == 1
        gap = abs(lin.w @ x + lin.b) / np.linalg.norm(lin.w)
        lo, hi = r.params["shell"]
        assert hi - lo == pytest.approx(p.delta_r)
        assert lo >= gap - p.delta_r - 1e-12
        assert np.linalg.norm(r.delta) >= gap - 1e-12
        assert r.radius >= gap - 1e-12


def test_nae_shells_never_below_r0():
    lin = LinearModel([1.0, 0.0], 0.0)
    r = nae_search(lin, identity_ae(2), [-0.01, 0.0], LatentSearchParams(r0=0.5, delta_r=0.1), instance_id=0)
    assert r.success and r.iterations == 1 and r.params["latent_norm"] > 0.5
