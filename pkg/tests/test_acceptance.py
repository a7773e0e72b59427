"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The long-running criteria (parameter recovery, efficiency ordering and
cross-sampler agreement) take roughly half an hour on one core.
"""

import math
import os
import subprocess
import sys

import numpy as np
import pytest
from scipy import stats

from panelpmcmc.analysis import ChainOutput, ape, iact, iact_mean, tnv
from panelpmcmc.models import (Family, PanelData, PanelModel, Theta, copula_cond_cdf,
                               kendall_tau, loglik_mixed_copula, loglik_mixed_gaussian,
                               sample_copula)
from panelpmcmc.models.copulas import empirical_kendall_tau
from panelpmcmc.numeric import RngStream, chain_streams
from panelpmcmc.particles import propose_particles
from panelpmcmc.samplers import (da_gibbs_step, mcmc_mh_refresh, pmmh_transition, pmwg_sweep,
                                 run_chain)
from panelpmcmc.samplers import da_gibbs
from panelpmcmc.simgen import generate, preset

from conftest import random_panel, random_theta, record_criterion
from toy import ALPHA_GRID, ToyModel, alpha_index, chi2_against, uniform_other

FAMILIES = ["probit", "gaussian", "clayton", "gumbel"]


def _gh_nodes(n):
    x, w = np.polynomial.hermite_e.hermegauss(n)
    return x, w / math.sqrt(2 * math.pi)


# --------------------------------------------------------------- criterion 1

def test_criterion_01_gradients():
    worst = 0.0
    for family in FAMILIES:
        for point in range(10):
            data = random_panel(family, P=4, T=3, d1=3, d2=3, m1=1, m2=1, seed=100 + point)
            th = random_theta(family, data, seed=200 + point)
            alpha = np.random.default_rng(point).normal(size=(4, 2)) * 0.6
            model = PanelModel(family, data)
            _, g = model.loglik_and_grad_beta(th, alpha)
            b0, h = th.beta, 1e-4
            fd = np.empty_like(g)
            for j in range(b0.size):
                f = lambda s: model.loglik(th.with_beta(b0 + s * h * np.eye(b0.size)[j]), alpha)  # noqa
                fd[j] = (-f(2) + 8 * f(1) - 8 * f(-1) + f(-2)) / (12 * h)
            worst = max(worst, float(np.linalg.norm(g - fd) / np.linalg.norm(fd)))
    ok = worst < 1e-6
    record_criterion(1, ok, f"max relative gradient error {worst:.2e} over 4 families x 10 points")
    assert ok


# --------------------------------------------------------------- criterion 2

def test_criterion_02_unbiased_likelihood():
    X = np.concatenate([np.ones((2, 2, 1)), np.array([[[0.3], [-0.5]], [[1.1], [0.2]]])], axis=2)
    data = PanelData(np.array([[1.0, 0.0], [1.0, 1.0]]), np.array([[1.0, 1.0], [0.0, 1.0]]),
                     X, X.copy())
    model = PanelModel("probit", data)
    th = Theta([0.2, -0.4], [-0.3, 0.6], 0.4, 1.2, 0.8, 0.3)
    x, w = _gh_nodes(60)
    L = np.linalg.cholesky(th.sigma_alpha)
    g1, g2 = (a.ravel() for a in np.meshgrid(x, x, indexing="ij"))
    nodes = np.stack([L[0, 0] * g1, L[1, 0] * g1 + L[1, 1] * g2], axis=1)
    ww = np.outer(w, w).ravel()
    ll = model.loglik_individuals(th, np.broadcast_to(nodes, (2,) + nodes.shape))
    truth = float(np.prod(np.exp(ll) @ ww))

    R, N = 100_000, 10
    _, rngs = chain_streams(2024, 0, 2)
    alphas = model.sample_alpha(th, rngs, R * N)
    w_ = np.exp(model.loglik_individuals(th, alphas)).reshape(2, R, N)
    est = np.prod(w_.mean(axis=2), axis=0)
    se = est.std(ddof=1) / math.sqrt(R)
    z = (est.mean() - truth) / se
    ok = abs(z) < 3
    record_criterion(2, ok, f"mean estimate {est.mean():.6g} vs quadrature {truth:.6g}, "
                            f"{z:+.2f} standard errors")
    assert ok


# --------------------------------------------------------------- criterion 3

STEPS = 200_000


def _toy_tables(toy):
    logc = np.array([[toy.conditional_theta_logdens(j, ALPHA_GRID[a]) for a in range(3)]
                     for j in range(3)])
    cond = np.exp(logc - logc.max(axis=0))
    return cond / cond.sum(axis=0)      # cond[:, a] = p(theta | alpha = a)


def _gibbs_theta(cond):
    def update(j, alpha, rng):
        return int(rng.choice(3, p=cond[:, alpha_index(alpha[0])]))
    return update


def _run_toy(kind, N=None, seed=0):
    toy = ToyModel()
    post = toy.posterior()
    chain_rng, rngs = chain_streams(seed, 0, 1)
    cells = np.empty(STEPS, dtype=int)
    j = 0
    alpha = ALPHA_GRID[None, 1].copy()
    if kind == "pmwg":
        update = _gibbs_theta(_toy_tables(toy))
        for s in range(STEPS):
            j, alpha, _, _ = pmwg_sweep(toy, j, alpha, N, update, chain_rng, rngs)
            cells[s] = 3 * j + alpha_index(alpha[0])
    elif kind == "pmmh":
        cloud = propose_particles(toy, j, N, rngs)
        ll = float(np.log(np.mean(np.exp(cloud.log_w))))
        for s in range(STEPS):
            j, ll, alpha, _ = pmmh_transition(toy, j, ll, alpha, N,
                                              lambda t, rng: (uniform_other(t, rng), 0.0),
                                              lambda t: 0.0, chain_rng, rngs)
            cells[s] = 3 * j + alpha_index(alpha[0])
    elif kind == "mcmc-mh":
        update = _gibbs_theta(_toy_tables(toy))
        for s in range(STEPS):
            j = update(j, alpha, chain_rng)
            alpha, _ = mcmc_mh_refresh(toy, j, alpha, 1, chain_rng, rngs)
            cells[s] = 3 * j + alpha_index(alpha[0])
    return chi2_against(cells[1000:], post)


def _da_rho_posterior(model, th, grid):
    """p(rho | y) on ``grid`` for fixed coefficients and Sigma_alpha (flat prior)."""
    x, w = _gh_nodes(48)
    L = np.linalg.cholesky(th.sigma_alpha)
    g1, g2 = (a.ravel() for a in np.meshgrid(x, x, indexing="ij"))
    nodes = np.stack([L[0, 0] * g1, L[1, 0] * g1 + L[1, 1] * g2], axis=1)
    ww = np.outer(w, w).ravel()
    cloud = np.broadcast_to(nodes, (model.P,) + nodes.shape)
    logpost = np.empty(grid.size)
    for m, r in enumerate(grid):
        ll = model.loglik_individuals(Theta(th.beta1, th.beta2, r, th.tau1_sq, th.tau2_sq,
                                            th.rho_alpha), cloud)
        logpost[m] = np.sum(np.log(np.exp(ll) @ ww))
    dens = np.exp(logpost - logpost.max())
    return dens


def _run_da(seed=0):
    X = np.ones((4, 3, 1))
    y1 = np.array([[1, 1, 0], [0, 1, 1], [1, 1, 1], [0, 0, 1]], dtype=float)
    y2 = np.array([[1, 1, 0], [0, 1, 1], [1, 0, 1], [0, 0, 0]], dtype=float)
    model = PanelModel("probit", PanelData(y1, y2, X, X.copy()))
    th = Theta([0.2], [-0.1], 0.0, 0.6, 0.5, 0.2)
    grid = np.linspace(-0.999, 0.999, 4001)
    dens = _da_rho_posterior(model, th, grid)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
    cdf /= cdf[-1]
    edges = np.interp(np.linspace(0, 1, 11)[1:-1], cdf, grid)

    rng = np.random.default_rng(seed)
    state = da_gibbs.init_state(model, rng, th)
    rho = np.empty(STEPS)
    for s in range(STEPS + 2000):
        state = da_gibbs_step(state, model, rng, adapt=s < 2000, update_beta=False,
                              update_sigma=False)
        if s >= 2000:
            rho[s - 2000] = state.theta.dep
    cells = np.searchsorted(edges, rho)
    return chi2_against(cells, np.full(10, 0.1))


@pytest.mark.parametrize("kind,N", [("pmwg", 2), ("pmwg", 10), ("pmmh", 5), ("mcmc-mh", None),
                                    ("da-gibbs", None)])
def test_criterion_03_exact_invariance(kind, N):
    p, n_used, thin = _run_da() if kind == "da-gibbs" else _run_toy(kind, N)
    ok = p > 0.01
    label = f"{kind}" + (f" N={N}" if N else "")
    record_criterion(3, ok, f"{label}: chi-square p = {p:.3f} ({n_used} draws, thin {thin})")
    assert ok


# --------------------------------------------------------------- criterion 4

def test_criterion_04_parameter_recovery():
    design = preset("probit-sec3.6", P=500, T=4, seed=0)
    data, truth, _ = generate(design)
    model = PanelModel("probit", data)
    ch = run_chain(model, "pmwg", iters=11000, burnin=1000, N=100, seed=0)
    lo, hi = np.percentile(ch.draws, [2.5, 97.5], axis=0)
    t = truth.to_array()
    nb = model.spec.n_beta
    covered = int(np.sum((lo[:nb] <= t[:nb]) & (t[:nb] <= hi[:nb])))
    rho_e = ch.column("rho_eps").mean()
    rho_a = ch.column("rho_alpha").mean()
    ok = covered >= 20 and abs(rho_e - 0.5) < 0.12 and abs(rho_a - 0.5) < 0.12
    record_criterion(4, ok, f"{covered}/22 coefficient truths inside 95% intervals, "
                            f"mean rho_eps {rho_e:.3f}, rho_alpha {rho_a:.3f} "
                            f"({ch.wall_time / 60:.1f} min)")
    assert ok


# ------------------------------------------------------------ criteria 5, 8

@pytest.fixture(scope="module")
def p200_runs():
    data, _, _ = generate(preset("probit-sec3.6", P=200, T=4, seed=0))
    model = PanelModel("probit", data)
    out = {}
    for name, sampler, kw in (("pmwg", "pmwg", {}), ("da-gibbs", "da-gibbs", {}),
                              ("mh1", "mcmc-mh", {"n_inner": 1})):
        out[name] = run_chain(model, sampler, iters=11000, burnin=1000, N=100, seed=0, **kw)
    return model, out


def test_criterion_05_efficiency_ordering(p200_runs):
    model, runs = p200_runs
    nb = model.spec.n_beta
    pm, da, mh = runs["pmwg"], runs["da-gibbs"], runs["mh1"]
    beta_iact = iact_mean(pm.draws[:, :nb])
    im = {k: iact_mean(v.draws) for k, v in runs.items()}
    tv = {k: tnv(im[k], v.wall_time) for k, v in runs.items()}
    ratio = im["mh1"] / im["pmwg"]
    checks = {"beta IACT < 5": beta_iact < 5, "MH1/PMwG IACT ratio > 3": ratio > 3,
              "TNV(PMwG) < TNV(DA)": tv["pmwg"] < tv["da-gibbs"]}
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    record_criterion(5, ok, f"PMwG beta IACT {beta_iact:.2f}; IACT_mean PMwG {im['pmwg']:.2f}, "
                            f"MH1 {im['mh1']:.2f} (ratio {ratio:.2f}), DA {im['da-gibbs']:.2f}; "
                            f"TNV PMwG {tv['pmwg']:.0f}, DA {tv['da-gibbs']:.0f}, "
                            f"MH1 {tv['mh1']:.0f}" + (f"; failed: {', '.join(failed)}"
                                                      if failed else ""))
    assert ok


def test_criterion_08_cross_sampler_agreement(p200_runs):
    model, runs = p200_runs
    a, b = runs["pmwg"].draws, runs["da-gibbs"].draws
    worst, name = 0.0, None
    for j, n in enumerate(model.param_names()):
        se = [x[:, j].std(ddof=1) * math.sqrt(iact(x[:, j]) / x.shape[0]) for x in (a, b)]
        z = abs(a[:, j].mean() - b[:, j].mean()) / math.hypot(*se)
        if z > worst:
            worst, name = z, n
    ok = worst < 3
    record_criterion(8, ok, f"largest standardized difference {worst:.2f} ({name}) "
                            f"over {a.shape[1]} parameters")
    assert ok


# --------------------------------------------------------------- criterion 6

def test_criterion_06_copula_identities():
    tau_err = 0.0
    for name, th in (("clayton", 1.0), ("clayton", 4.0), ("gumbel", 1.5), ("gumbel", 3.0),
                     ("gaussian", 0.5)):
        u = sample_copula(200_000, name, th, RngStream(606, int(th * 10)).generator())
        tau_err = max(tau_err, abs(empirical_kendall_tau(u[:, 0], u[:, 1]) - kendall_tau(name, th)))

    import mpmath
    mpmath.mp.dps = 30
    cond_err = 0.0
    rng = np.random.default_rng(6)
    for _ in range(20):
        u1, u2 = rng.uniform(0.02, 0.98, 2)
        for name, th in (("clayton", rng.uniform(0.2, 5)), ("gumbel", rng.uniform(1.05, 5))):
            if name == "clayton":
                C = lambda v: (mpmath.mpf(u1) ** -th + v ** -th - 1) ** (-1 / mpmath.mpf(th))  # noqa
            else:
                C = lambda v: mpmath.exp(-((-mpmath.log(u1)) ** th  # noqa: E731
                                           + (-mpmath.log(v)) ** th) ** (1 / mpmath.mpf(th)))
            ref = float(mpmath.diff(C, mpmath.mpf(u2)))
            cond_err = max(cond_err, abs(copula_cond_cdf(u1, u2, name, th) - ref))

    lik_err = 0.0
    for seed in range(10):
        data = random_panel("gaussian", P=5, T=3, m1=1, m2=1, seed=seed)
        th = random_theta("gaussian", data, seed=seed)
        alpha = np.random.default_rng(seed).normal(size=(5, 2))
        lik_err = max(lik_err, abs(loglik_mixed_copula(th, alpha, data, "gaussian")
                                   - loglik_mixed_gaussian(th, alpha, data)))
    ok = tau_err < 0.01 and cond_err < 1e-6 and lik_err < 1e-8
    record_criterion(6, ok, f"Kendall tau error {tau_err:.4f}, conditional CDF error "
                            f"{cond_err:.1e}, Gaussian-copula likelihood gap {lik_err:.1e}")
    assert ok


# --------------------------------------------------------------- criterion 7

def test_criterion_07_iact_ar1():
    rng = np.random.default_rng(7)
    M, phi = 1_000_000, 0.5
    from scipy.signal import lfilter
    e = rng.standard_normal(M)
    e[0] /= math.sqrt(1 - phi * phi)
    x = lfilter([1.0], [1.0, -phi], e)
    val = iact(x)
    ok = 2.85 <= val <= 3.15
    record_criterion(7, ok, f"AR(1) phi=0.5, M=1e6: IACT {val:.3f} (analytic 3)")
    assert ok


# --------------------------------------------------------------- criterion 9

def test_criterion_09_ape_oracle():
    from test_analysis import _chain, _draws, _event_panel, brute_force_ape
    data = _event_panel(3, 2, 11)
    draws = _draws(50, 4, 4, 12)
    _, vals = ape(_chain(data, "probit", draws), "probit", data, "event")
    err = float(np.max(np.abs(vals - brute_force_ape(data, draws, 4))))
    zero = draws.copy()
    zero[:, 2] = 0.0
    zero[:, 5] = 0.0
    _, zvals = ape(_chain(data, "probit", zero), "probit", data, "event")
    ok = err < 1e-12 and np.all(zvals == 0.0)
    record_criterion(9, ok, f"max deviation from brute force {err:.1e}; zero-coefficient APE "
                            f"exactly 0: {bool(np.all(zvals == 0.0))}")
    assert ok


# -------------------------------------------------------------- criterion 10

def test_criterion_10_determinism(tmp_path):
    env = dict(os.environ, NUMBA_NUM_THREADS="8")
    base = [sys.executable, "-m", "panelpmcmc", "--sim", "probit-sec3.6", "--sim-P", "60",
            "--iters", "300", "--burnin", "100", "--particles", "30", "--seed", "11"]
    blobs = {}
    for sampler in ("pmwg", "mcmc-mh"):
        for workers in (1, 4, 8, 8):
            out = tmp_path / f"{sampler}_{workers}_{len(blobs)}"
            r = subprocess.run(base + ["--sampler", sampler, "--workers", str(workers),
                                       "--n-inner", "2", "--out", str(out)],
                               env=env, capture_output=True, text=True)
            assert r.returncode == 0, r.stderr
            blobs.setdefault(sampler, []).append((out / "draws_chain0.csv").read_bytes())
    same = {k: all(b == v[0] for b in v) for k, v in blobs.items()}
    ok = all(same.values())
    record_criterion(10, ok, "bit-identical draw files at 1, 4 and 8 workers plus a repeat: "
                             + ", ".join(f"{k} {v}" for k, v in same.items()))
    assert ok
