"""Acceptance gate: one test per criterion, at the stated tolerances.

Run `pytest tests/test_acceptance.py -v -s` for one PASS/FAIL line per
criterion.  These tests execute complete sampling experiments and take
roughly half an hour on two cores; the rest of the suite stays fast.

Two sub-criteria are expected to fail under the pinned problem
construction (see notes in the failing tests): the n=128 inpainting
variant's acceptance band and the n=64/128 discretization gap.  Both
bounds extrapolate full-scale behavior to desk sizes where the
fixed-lambda prior demonstrably behaves differently; the full-scale
assertions they accompany do pass.
"""

import time

import numpy as np
import pytest
from scipy import special

from besov_rto.diagnostics import ess, summarize
from besov_rto.forward import (
    DenseOperator,
    convolution_operator,
    inpainting_operator,
    make_data,
    phantom_1d,
)
from besov_rto.gengauss import GenGaussParams, g1d, g1d_deriv, gg_quantile
from besov_rto.prior import BesovPrior, Posterior
from besov_rto.rto import RtoConfig, TransformedSystem, run_chain
from besov_rto.runner import RunConfig, run_experiment
from besov_rto.wavelets import WaveletSystem, besov_weights

pytestmark = pytest.mark.acceptance


def _report(num, ok, detail):
    print(f"\nCRITERION {num}: {'PASS' if ok else 'FAIL'} - {detail}")


# -----------------------------------------------------------------------
# criterion 1: linear-Gaussian exactness
# -----------------------------------------------------------------------


def test_criterion_1_linear_gaussian_exactness():
    t0 = time.perf_counter()
    n = 16
    A = convolution_operator(n, 0.05)
    y, sigma = make_data(A, phantom_1d(n), 0.02, seed=21)
    ws = WaveletSystem.from_name("db2", 1, 4)
    post = Posterior(BesovPrior(1.0, 2.0, 1.0, ws), A, y, sigma)

    system = TransformedSystem(post)
    cov = np.linalg.inv(np.eye(n) + system.MtM)
    mean = cov @ (system.M.T @ system.yhat)

    res = run_chain(post, RtoConfig(n_samples=5000, seed=13))
    emp_mean = res.h_proposals.mean(axis=0)
    emp_cov = np.cov(res.h_proposals.T)
    mc_se = np.sqrt(np.diag(cov) / 5000)
    frob = np.linalg.norm(emp_cov - cov, "fro") / np.linalg.norm(cov, "fro")
    elapsed = time.perf_counter() - t0

    ok = (
        res.acceptance_rate == 1.0
        and np.all(np.abs(emp_mean - mean) < 3 * mc_se)
        and frob < 0.05
        and elapsed < 30
    )
    _report(1, ok, f"acceptance {res.acceptance_rate}, cov Frobenius {frob:.4f}, {elapsed:.1f}s")
    assert res.acceptance_rate == 1.0
    assert np.all(np.abs(emp_mean - mean) < 3 * mc_se)
    assert frob < 0.05
    assert elapsed < 30


# -----------------------------------------------------------------------
# criterion 2: small-instance oracle equivalence (tensor quadrature)
# -----------------------------------------------------------------------


def test_criterion_2_quadrature_equivalence():
    t0 = time.perf_counter()
    ws = WaveletSystem.from_name("haar", 1, 1)
    prior = BesovPrior(s=1.0, p=1.5, lam=1.0, wavelet=ws)
    A = DenseOperator(np.array([[1.0, 0.4], [-0.3, 0.8]]))
    post = Posterior(prior, A, np.array([0.9, 1.1]), 0.35)

    grid = np.linspace(-6.0, 6.0, 401)
    H1, H2 = np.meshgrid(grid, grid, indexing="ij")
    nodes = np.stack([H1.ravel(), H2.ravel()])
    system = TransformedSystem(post)
    resid = system.M @ system.g(nodes) - system.yhat[:, None]
    logp = -0.5 * np.sum(nodes**2, axis=0) - 0.5 * np.sum(resid**2, axis=0)
    weights = np.exp(logp - logp.max())
    weights /= weights.sum()
    oracle_mean = nodes @ weights

    res = run_chain(post, RtoConfig(n_samples=26_000, seed=5))
    chain_mean = res.h_samples.mean(axis=0)
    rel = np.abs(chain_mean - oracle_mean) / np.abs(oracle_mean)

    edges = np.linspace(-6.0, 6.0, 41)
    hist = np.histogram2d(res.h_samples[:, 0], res.h_samples[:, 1], bins=[edges, edges])[0]
    hist /= hist.sum()
    cell = np.clip(np.digitize(grid, edges) - 1, 0, 39)
    quad_cells = np.zeros((40, 40))
    np.add.at(
        quad_cells,
        (cell[:, None].repeat(401, 1), cell[None, :].repeat(401, 0)),
        weights.reshape(401, 401),
    )
    tv = 0.5 * np.abs(hist - quad_cells).sum()
    elapsed = time.perf_counter() - t0

    ok = res.n_accepted >= 20_000 and np.all(rel < 0.02) and tv < 0.05 and elapsed < 120
    _report(
        2, ok,
        f"accepted {res.n_accepted}, mean rel err {rel.max():.4f}, TV {tv:.4f}, {elapsed:.0f}s",
    )
    assert res.n_accepted >= 20_000
    assert np.all(rel < 0.02)
    assert tv < 0.05
    assert elapsed < 120


# -----------------------------------------------------------------------
# criterion 3: inpainting acceptance-rate reproduction
# -----------------------------------------------------------------------


def _inpainting_posterior(n, wavelet):
    A = inpainting_operator(n, [(0.1, 0.15), (0.425, 0.475)])
    y, sigma = make_data(A, phantom_1d(n), 0.02, seed=1234)
    ws = WaveletSystem.from_name(wavelet, 1, int(np.log2(n)))
    return Posterior(BesovPrior(1.2, 1.5, 0.025, ws), A, y, sigma)


def test_criterion_3_full_scale_acceptance_band():
    rates = {}
    for wavelet in ("haar", "db8"):
        post = _inpainting_posterior(512, wavelet)
        res = run_chain(post, RtoConfig(n_samples=10_000, seed=7, workers=2))
        rates[wavelet] = res.acceptance_rate
    ok = all(0.35 <= r <= 0.60 for r in rates.values())
    _report(3, ok, f"full-scale n=512 rates {rates} (band [0.35, 0.60])")
    for wavelet, rate in rates.items():
        assert 0.35 <= rate <= 0.60, f"{wavelet} full-scale rate {rate}"


def test_criterion_3_desk_variant_acceptance_band():
    """Expected to fail: at n=128 the fixed-lambda prior leaves no
    weakly-observed fine levels, so proposal weights vary far less than at
    n=512 and acceptance lands near 0.85 for both bases (the paper never
    ran this size; see the n-scaling analysis in the project notes)."""
    t0 = time.perf_counter()
    rates = {}
    for wavelet in ("haar", "db8"):
        post = _inpainting_posterior(128, wavelet)
        res = run_chain(post, RtoConfig(n_samples=2000, seed=7))
        rates[wavelet] = res.acceptance_rate
    elapsed = time.perf_counter() - t0
    ok = all(0.35 <= r <= 0.60 for r in rates.values()) and elapsed < 300
    _report(3, ok, f"desk variant n=128 rates {rates} (band [0.35, 0.60]), {elapsed:.0f}s")
    assert elapsed < 300
    for wavelet, rate in rates.items():
        assert 0.35 <= rate <= 0.60, f"{wavelet} desk-variant rate {rate}"


# -----------------------------------------------------------------------
# criterion 4: discretization invariance at desk sizes
# criterion 5c piggybacks on the n=128 run
# -----------------------------------------------------------------------


@pytest.fixture(scope="module")
def deconvolution_pair():
    runs = {}
    t0 = time.perf_counter()
    for n in (64, 128):
        A = convolution_operator(n, 0.02)
        y, sigma = make_data(A, phantom_1d(n), 0.02, seed=4242)
        ws = WaveletSystem.from_name("haar", 1, int(np.log2(n)))
        post = Posterior(BesovPrior(1.0, 1.5, 1.0, ws), A, y, sigma)
        runs[n] = run_chain(post, RtoConfig(n_samples=2000, seed=6))
    return runs, time.perf_counter() - t0


def test_criterion_4_discretization_invariance(deconvolution_pair):
    """Expected to fail: consecutive posterior-mean differences for this
    construction decay as 9.8% (32/64), 13.6% (64/128), 7.4% (128/256),
    2.7% (256/512) - convergence holds, but the 5% bound is reached only
    beyond the desk sizes this criterion pins."""
    runs, elapsed = deconvolution_pair
    assert all(r.n_accepted >= 1000 for r in runs.values())
    m64 = runs[64].f_samples.mean(axis=0)
    m128 = runs[128].f_samples.mean(axis=0)[::2]
    rel = np.linalg.norm(m64 - m128) / np.linalg.norm(m128)
    ok = rel < 0.05 and elapsed < 600
    _report(4, ok, f"n=64 vs n=128 posterior-mean rel L2 diff {rel:.4f}, {elapsed:.0f}s")
    assert elapsed < 600
    assert rel < 0.05


def test_criterion_5_ess_sanity(deconvolution_pair):
    rng = np.random.default_rng(33)
    iid = rng.standard_normal(10_000)
    ratio_iid = ess(iid) / iid.size

    n, rho = 100_000, 0.5
    noise = rng.standard_normal(n) * np.sqrt(1 - rho**2)
    ar1 = np.empty(n)
    ar1[0] = rng.standard_normal()
    for i in range(1, n):
        ar1[i] = rho * ar1[i - 1] + noise[i]
    ratio_ar1 = ess(ar1) / n

    runs, _ = deconvolution_pair
    stats = summarize(runs[128])
    ordered = stats.ess_min <= stats.ess_median <= stats.ess_max
    median_ok = stats.ess_median > 0.2 * runs[128].n_accepted

    ok = (
        0.8 <= ratio_iid <= 1.2
        and abs(ratio_ar1 - 1.0 / 3.0) <= 0.15 / 3.0
        and ordered
        and median_ok
    )
    _report(
        5, ok,
        f"iid ESS/N {ratio_iid:.3f}, AR(1) ESS/N {ratio_ar1:.3f} (target 1/3), "
        f"chain ESS min/med/max {stats.ess_min:.0f}/{stats.ess_median:.0f}/{stats.ess_max:.0f} "
        f"vs accepted {runs[128].n_accepted}",
    )
    assert 0.8 <= ratio_iid <= 1.2
    assert ratio_ar1 == pytest.approx(1.0 / 3.0, rel=0.15)
    assert ordered
    assert median_ok


# -----------------------------------------------------------------------
# criterion 6: wavelet / Besov kernel correctness
# -----------------------------------------------------------------------


def test_criterion_6_wavelet_besov_kernels():
    t0 = time.perf_counter()
    for name in ("haar", "db8"):
        for d, depth in ((1, 6), (2, 3)):  # n = 64 in both cases
            ws = WaveletSystem.from_name(name, d, depth)
            W = ws.matrix()
            assert np.max(np.abs(W.T @ W - np.eye(ws.size))) < 1e-10

    w = besov_weights(s=1.0, p=2.0, dimension=1, depth=3)
    np.testing.assert_array_equal(w.diagonal, [1, 1, 2, 2, 4, 4, 4, 4])

    prior = BesovPrior(1.2, 1.5, 0.7, WaveletSystem.from_name("db3", 1, 3))
    f = np.random.default_rng(8).standard_normal(8)
    delta = prior.wavelet.forward(f).values
    direct = abs(delta[0]) ** prior.p
    for j in range(3):
        sl = prior.wavelet.layout.level_slice(j)
        direct += np.sum((2.0 ** (j * prior.kappa) * np.abs(delta[sl])) ** prior.p)
    direct = direct ** (1 / prior.p)
    err = abs(prior.besov_norm(f) - direct)
    elapsed = time.perf_counter() - t0

    ok = err < 1e-12 and elapsed < 10
    _report(6, ok, f"W orthonormal (1e-10), weights exact, norm vs layout sum err {err:.2e}, {elapsed:.1f}s")
    assert err < 1e-12
    assert elapsed < 10


# -----------------------------------------------------------------------
# criterion 7: prior transform correctness
# -----------------------------------------------------------------------


def test_criterion_7_prior_transform():
    t0 = time.perf_counter()
    h = np.linspace(-6.0, 6.0, 601)
    gauss = GenGaussParams(2.0, 1.0)
    identity_err = np.max(np.abs(g1d(h, gauss) - h))

    laplace = GenGaussParams(1.0, 1.0)
    lap_err = abs(gg_quantile(0.75, laplace) - np.log(2.0) / np.sqrt(2.0))

    rng = np.random.default_rng(12)
    z = rng.standard_normal(100_000)
    var_errs = {}
    for p in (1.0, 1.5, 2.5):
        sample = g1d(z, GenGaussParams(p, 1.0))
        se = np.sqrt(2.0 / z.size)
        var_errs[p] = abs(sample.var() - 1.0) / se

    grid = np.linspace(-5.0, 5.0, 256)
    eps = 1e-6
    params = GenGaussParams(1.5, 0.025)
    fd = (g1d(grid + eps, params) - g1d(grid - eps, params)) / (2 * eps)
    deriv_rel = np.max(np.abs(g1d_deriv(grid, params) - fd) / np.abs(fd))
    elapsed = time.perf_counter() - t0

    ok = (
        identity_err < 1e-9
        and lap_err < 1e-9
        and all(v < 3.0 for v in var_errs.values())
        and deriv_rel < 1e-6
        and elapsed < 30
    )
    _report(
        7, ok,
        f"identity err {identity_err:.1e}, Laplace quantile err {lap_err:.1e}, "
        f"variance z-scores {[round(v, 2) for v in var_errs.values()]}, "
        f"deriv FD rel {deriv_rel:.1e}, {elapsed:.1f}s",
    )
    assert identity_err < 1e-9
    assert lap_err < 1e-9
    assert all(v < 3.0 for v in var_errs.values())
    assert deriv_rel < 1e-6
    assert elapsed < 30


# -----------------------------------------------------------------------
# criterion 8: CT desk-scale run with sparsity inspection
# -----------------------------------------------------------------------


def _near_zero_fractions(run_dir, depth):
    grids = {}
    for j in range(depth):
        blocks = []
        for orient in (1, 2, 3):
            blocks.append(
                np.loadtxt(
                    run_dir / f"coeff_level{j}_or{orient}.csv",
                    delimiter=",", skiprows=1, ndmin=2,
                ).ravel()
            )
        grids[j] = np.concatenate(blocks)
    top = max(np.abs(v).max() for v in grids.values())
    return np.array([np.mean(np.abs(grids[j]) < 1e-3 * top) for j in range(depth)])


def test_criterion_8_ct_desk_scale(tmp_path):
    t0 = time.perf_counter()
    common = dict(
        problem="ct", n=32, wavelet="haar", p=1.5, lam=0.025,
        relative_noise=0.02, n_angles=15, n_detectors=45,
        seed=7, workers=2,
    )
    main = run_experiment(RunConfig(
        **common, s=1.0, n_samples=5000, output_dir=str(tmp_path / "s10"),
    ))
    sparse = run_experiment(RunConfig(
        **common, s=2.5, n_samples=1000, output_dir=str(tmp_path / "s25"),
    ))

    from besov_rto.forward import phantom_shepp_logan
    from besov_rto.runner import load_samples

    samples, _ = load_samples(tmp_path / "s10")
    f_true = phantom_shepp_logan(32).ravel()
    mean_err = np.linalg.norm(samples.mean(axis=0) - f_true) / np.linalg.norm(f_true)

    frac_main = _near_zero_fractions(tmp_path / "s10", 5)
    frac_sparse = _near_zero_fractions(tmp_path / "s25", 5)
    increasing = bool(np.all(np.diff(frac_sparse) > 0))
    sparser_fine = bool(frac_sparse[-1] >= frac_main[-1])
    elapsed = time.perf_counter() - t0

    ok = (
        main.acceptance_rate > 0.01
        and mean_err < 0.5
        and increasing
        and sparser_fine
        and elapsed < 1200
    )
    _report(
        8, ok,
        f"acceptance {main.acceptance_rate:.4f}, mean rel err {mean_err:.3f}, "
        f"s=2.5 fractions {np.round(frac_sparse, 3).tolist()} "
        f"(s=1.0 finest {frac_main[-1]:.3f}), {elapsed:.0f}s",
    )
    assert main.acceptance_rate > 0.01
    assert mean_err < 0.5
    assert increasing, f"near-zero fractions not strictly increasing: {frac_sparse}"
    assert sparser_fine
    assert elapsed < 1200
