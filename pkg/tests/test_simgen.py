import math

import numpy as np
import pytest
from scipy import stats

from panelpmcmc.models import Family, kendall_tau
from panelpmcmc.simgen import BETA1_SIM, SimDesign, generate, preset


def test_extreme_intercept_gives_all_zero():
    d = preset("probit-sec3.6", P=300, seed=1)
    d.beta1 = d.beta1.copy()
    d.beta1[0] = -50.0
    data, _, _ = generate(d)
    assert np.all(data.y1 == 0.0)


def test_error_correlation():
    data, th, _, eps = generate(preset("probit-sec3.6", P=1000, seed=2), return_errors=True)
    assert eps.shape == (1000, 4, 2)
    r = np.corrcoef(eps.reshape(-1, 2).T)[0, 1]
    assert abs(r - 0.5) < 0.04


@pytest.mark.parametrize("family", ["clayton", "gumbel"])
def test_copula_errors_have_target_kendall_tau(family):
    design = preset("mixed-S3", P=25_000, seed=3, family=family)
    _, th, _, eps = generate(design, return_errors=True)
    tau = stats.kendalltau(eps[..., 0].ravel(), eps[..., 1].ravel())[0]
    assert math.isclose(kendall_tau(family, th.dep), 1 / 3, rel_tol=1e-12)
    assert abs(tau - 1 / 3) < 0.02
    assert abs(eps[..., 1].std() - 1) < 0.02


@pytest.mark.parametrize("name,family", [("probit-sec3.6", None), ("mixed-S3", None),
                                         ("mixed-S3", "clayton"), ("mixed-S3", "gumbel")])
def test_outcomes_reconstruct_from_truth(name, family):
    design = preset(name, P=50, T=3, seed=4, family=family)
    data, th, alpha, eps = generate(design, return_errors=True)
    a = alpha.alpha
    s1 = data.X1 @ th.beta1 + a[:, None, 0] + eps[..., 0]
    s2 = data.X2 @ th.beta2 + a[:, None, 1] + eps[..., 1]
    assert np.array_equal(data.y1, (s1 > 0).astype(float))
    if design.family.binary_y2:
        assert np.array_equal(data.y2, (s2 > 0).astype(float))
    else:
        assert np.array_equal(data.y2, s2)
        assert np.unique(data.y2).size == data.y2.size


def test_same_seed_is_bit_identical():
    a = generate(preset("mixed-S3", P=40, seed=5, family="clayton"))
    b = generate(preset("mixed-S3", P=40, seed=5, family="clayton"))
    c = generate(preset("mixed-S3", P=40, seed=6, family="clayton"))
    for x, y in ((a[0].y1, b[0].y1), (a[0].y2, b[0].y2), (a[0].X1, b[0].X1),
                 (a[2].alpha, b[2].alpha)):
        assert np.array_equal(x, y)
    assert not np.array_equal(a[0].y2, c[0].y2)


def test_individual_streams_are_prefix_stable():
    small, _, _ = generate(preset("probit-sec3.6", P=10, seed=7))
    big, _, _ = generate(preset("probit-sec3.6", P=30, seed=7))
    assert np.array_equal(small.X1, big.X1[:10])
    assert np.array_equal(small.y1, big.y1[:10])


def test_random_effect_covariance():
    _, th, alpha = generate(preset("probit-sec3.6", P=20_000, T=1, seed=8))
    S = np.cov(alpha.alpha.T)
    assert np.allclose(S, th.sigma_alpha, atol=0.08)


def test_preset_values():
    d = preset("probit-sec3.6")
    assert d.P == 1000 and d.T == 4
    assert tuple(d.beta1) == BETA1_SIM
    assert d.beta2[0] == -2.5 and d.tau1_sq == 2.5 and d.tau2_sq == 1.0
    assert d.dep == 0.5 and d.rho_alpha == 0.5
    m = preset("mixed-S3")
    assert m.family is Family.MIXED_GAUSSIAN and m.beta2[0] == -0.5
    assert preset("mixed-S3", family="gumbel").dep == pytest.approx(1.5)
    assert preset("mixed-S3", family="clayton").dep == pytest.approx(1.0)


def test_covariates_uniform():
    data, _, _ = generate(preset("probit-sec3.6", P=2000, seed=9))
    x = data.X1[..., 1:].ravel()
    assert np.all(data.X1[..., 0] == 1.0)
    assert stats.kstest(x, "uniform").pvalue > 0.001


def test_design_validation():
    with pytest.raises(ValueError):
        preset("nope")
    with pytest.raises(ValueError):
        SimDesign(P=0, T=2, family="probit", beta1=[0.0], beta2=[0.0])
    with pytest.raises(ValueError):
        SimDesign(P=5, T=2, family="probit", beta1=[0.0], beta2=[0.0, 1.0])
    with pytest.raises(ValueError):
        SimDesign(P=5, T=2, family="clayton", beta1=[0.0], beta2=[0.0], dep=-1.0)
