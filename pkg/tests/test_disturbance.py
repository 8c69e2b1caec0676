import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from evpipe.disturbance.ar import (
    ARModel,
    ar_generate,
    fit_channels,
    generate_channels,
    load_ar_model,
    sample_autocovariance,
    save_ar_model,
    yule_walker_fit,
)
from evpipe.disturbance.spectral import band_ratios, welch_psd
from evpipe.disturbance.wrench_map import (
    PIPE_RADIUS,
    Basis,
    eval_disturbance_map,
    fit_disturbance_map,
    load_map,
    read_samples,
    save_map,
    synthetic_samples,
    write_samples,
)
from evpipe.errors import ConfigError, DomainError, InsufficientDataError, ParseError, SingularSystemError


@st.composite
def ar_models(draw, max_order=6, max_radius=0.9):
    """Stationary AR models built from random roots (real or conjugate pairs)."""
    p = draw(st.integers(1, max_order))
    roots = []
    while len(roots) < p:
        r = draw(st.floats(0, max_radius))
        if p - len(roots) >= 2 and draw(st.booleans()):
            th = draw(st.floats(0.05, np.pi - 0.05))
            roots += [r * np.exp(1j * th), r * np.exp(-1j * th)]
        else:
            roots.append(r * draw(st.sampled_from([-1, 1])))
    a = -np.real(np.poly(roots))[1:]
    return ARModel(a, draw(st.floats(0.1, 10)))


# -------------------------------------------------------------------- PSD


def test_white_noise_psd_is_flat():
    x = np.random.default_rng(0).standard_normal(2**16)
    est = welch_psd(x)
    mid = (est.freqs > 0.05) & (est.freqs < 0.45)
    bands = np.array_split(est.power[mid], 8)
    means = [b.mean() for b in bands]
    assert max(means) / min(means) < 3
    assert est.total_power() == pytest.approx(x.var(), rel=0.1)


def test_sinusoid_peak():
    fs, f0 = 1000.0, 123.0
    t = np.arange(2**14) / fs
    est = welch_psd(np.sin(2 * np.pi * f0 * t), fs=fs)
    k = int(np.argmax(est.power))
    assert abs(est.freqs[k] - f0) <= fs / 1024 / 2
    assert est.total_power() == pytest.approx(0.5, rel=0.1)


def test_ar1_psd_matches_closed_form():
    m = ARModel([0.9], 1.0)
    x = ar_generate(m, 2**17, seed=1)
    est = welch_psd(x)
    closed = 2.0 / np.abs(1 - 0.9 * np.exp(-2j * np.pi * est.freqs)) ** 2
    r = band_ratios(est, closed)
    assert len(r) >= 4 and np.all(np.abs(r - 1) < 0.2)
    mean_power = [est.power[b].mean() for b in est.bands()]
    assert all(a > b for a, b in zip(mean_power, mean_power[1:]))


def test_psd_errors():
    with pytest.raises(InsufficientDataError):
        welch_psd(np.zeros(2047))
    with pytest.raises(ConfigError):
        welch_psd(np.zeros(4096), overlap=1024)


# ------------------------------------------------------------ Yule-Walker


def test_fit_ar1():
    x = ar_generate(ARModel([0.9], 1.0), 100_000, seed=2)
    m = yule_walker_fit(x, 1)
    assert 0.88 <= m.coeffs[0] <= 0.92
    assert m.sigma2 == pytest.approx(1.0, rel=0.05)


def test_fit_ar2():
    x = ar_generate(ARModel([0.5, -0.3], 1.0), 100_000, seed=3)
    m = yule_walker_fit(x, 2)
    assert np.allclose(m.coeffs, [0.5, -0.3], atol=0.03)


def test_fit_white_noise():
    m = yule_walker_fit(np.random.default_rng(4).standard_normal(100_000), 1)
    assert abs(m.coeffs[0]) < 0.02


def test_fit_errors():
    with pytest.raises(SingularSystemError):
        yule_walker_fit(np.full(500, 3.0), 2)
    with pytest.raises(InsufficientDataError):
        yule_walker_fit(np.arange(19.0), 2)
    with pytest.raises(ConfigError):
        yule_walker_fit(np.arange(100.0), 0)


def test_model_validation_and_io(tmp_path):
    with pytest.raises(ConfigError):
        ARModel([1.0], 1.0)
    with pytest.raises(ConfigError):
        ARModel([0.5], 0.0)
    m = ARModel([0.5, -0.3], 2.0)
    save_ar_model(m, tmp_path / "ar.json")
    back = load_ar_model(tmp_path / "ar.json")
    assert np.array_equal(back.coeffs, m.coeffs) and back.sigma2 == m.sigma2
    with pytest.raises(ConfigError):
        ARModel.from_dict({"order": 3, "coeffs": [0.1], "sigma2": 1.0})


@given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.integers(200, 800))
@settings(max_examples=1000)
def test_fitted_models_are_stationary(seed, order, n):
    rng = np.random.default_rng(seed)
    kind = seed % 4
    if kind == 0:
        x = rng.standard_normal(n)
    elif kind == 1:
        x = np.cumsum(rng.standard_normal(n))  # random walk, nearly non-stationary
    elif kind == 2:
        x = np.sin(np.arange(n) * rng.uniform(0.01, 3)) + 1e-3 * rng.standard_normal(n)
    else:
        x = rng.integers(-3, 4, n).astype(float)
    m = yule_walker_fit(x, order)
    assert np.all(np.abs(m.roots()) < 1)


# -------------------------------------------------------------- generation


def test_ar1_generated_variance():
    x = ar_generate(ARModel([0.9], 1.0), 100_000, seed=5)
    assert x.var() == pytest.approx(1 / (1 - 0.81), rel=0.1)


def test_zero_coefficient_is_white():
    x = ar_generate(ARModel([0.0], 2.0), 100_000, seed=6)
    assert x.var() == pytest.approx(2.0, rel=0.05)
    g = sample_autocovariance(x, 3)
    assert np.all(np.abs(g[1:]) < 0.02 * g[0])


def test_generation_determinism_and_burn_in():
    m = ARModel([0.5, 0.2], 1.0)
    assert np.array_equal(ar_generate(m, 1000, seed=7), ar_generate(m, 1000, seed=7))
    assert not np.array_equal(ar_generate(m, 1000, seed=7), ar_generate(m, 1000, seed=8))
    with pytest.raises(ConfigError):
        ar_generate(m, 100, burn_in=19)
    assert ar_generate(m, 0).size == 0


@given(ar_models())
@settings(max_examples=200)
def test_generated_autocovariance_matches_model(m):
    x = ar_generate(m, 50_000, seed=9)
    g = sample_autocovariance(x, m.order)
    th = m.autocovariance()
    # sampling error of autocovariances grows with the spectral peak
    assert np.all(np.abs(g - th) <= 0.15 * th[0])


@given(ar_models(max_radius=0.9))
@settings(max_examples=200)
def test_spectral_round_trip(m):
    f = np.linspace(0, 0.5, 513)
    spec = m.psd(f)
    # Yule-Walker from biased autocovariances degrades on extreme peak-to-floor
    # ratios; stay within 50 dB
    assume(spec.max() / spec.min() <= 1e5)
    x = ar_generate(m, 2**17, seed=10)
    fit = yule_walker_fit(x, m.order)
    y = ar_generate(fit, 2**17, seed=11)
    r = band_ratios(welch_psd(y), welch_psd(x).power)
    assert len(r) >= 4
    assert np.all(np.abs(r - 1) <= 0.2), r


def test_channels_round_trip():
    src = [ARModel([0.9], 1.0), ARModel([0.5, -0.3], 0.5), ARModel([0.0], 3.0)]
    X = generate_channels(src, 50_000, seed=12)
    assert X.shape == (50_000, 3)
    fits = fit_channels(X, order=2)
    assert fits[0].coeffs[0] == pytest.approx(0.9, abs=0.03)
    assert np.allclose(fits[1].coeffs, [0.5, -0.3], atol=0.03)
    assert np.allclose(fits[2].coeffs, 0, atol=0.03)


# ------------------------------------------------------------ wrench map


def disk_points(n, seed=0):
    rng = np.random.default_rng(seed)
    r = PIPE_RADIUS * np.sqrt(rng.random(n))
    th = rng.uniform(0, 2 * np.pi, n)
    return np.column_stack([r * np.cos(th), r * np.sin(th)])


def test_planted_polynomial_recovered():
    P = disk_points(200)
    u, v = P[:, 0] / PIPE_RADIUS, P[:, 1] / PIPE_RADIUS
    basis = Basis("polynomial", degree=2)
    C = np.random.default_rng(1).normal(size=(basis.size, 3))
    F = basis.design(u, v) @ C
    m = fit_disturbance_map(P, F, basis, lam=1e-9)
    assert np.all(m.rmse < 1e-8)
    assert np.abs(m.coeffs - C).max() < 1e-6
    assert np.abs(eval_disturbance_map(m, P[:, 0], P[:, 1]) - F).max() < 1e-8


def test_constant_wrench_gives_constant_map():
    P = disk_points(100)
    F = np.tile([0.1, -0.2, 0.03], (100, 1))
    m = fit_disturbance_map(P, F, Basis(), lam=1e-9)
    assert np.allclose(m.coeffs[0], [0.1, -0.2, 0.03], atol=1e-8)
    assert np.abs(m.coeffs[1:]).max() < 1e-6
    y, z = np.array([0.0, 0.1, -0.05]), np.array([0.0, -0.1, 0.15])
    assert np.allclose(m(y, z), [0.1, -0.2, 0.03], atol=1e-8)


@pytest.mark.parametrize("basis", [Basis("polynomial", 4), Basis("rbf", grid=5, width=0.5)])
def test_mirror_symmetry(basis):
    P, F = synthetic_samples(400, seed=2, noise=0.05)
    m = fit_disturbance_map(P, F, basis, lam=1e-3)
    Q = disk_points(300, seed=3)
    a = m(Q[:, 0], Q[:, 1])
    b = m(-Q[:, 0], Q[:, 1])
    assert np.abs(a[:, 0] + b[:, 0]).max() < 1e-6
    assert np.abs(a[:, 2] + b[:, 2]).max() < 1e-6
    assert np.abs(a[:, 1] - b[:, 1]).max() < 1e-6
    on_axis = m(np.zeros(5), np.linspace(-0.15, 0.15, 5))
    assert np.abs(on_axis[:, [0, 2]]).max() < 1e-6


def test_outward_push_and_roll():
    P, F = synthetic_samples(400, seed=4, noise=0.02)
    m = fit_disturbance_map(P, F)
    w = m(np.array([-0.1, 0.1]), np.zeros(2))
    assert w[0, 0] < 0 < w[1, 0]
    assert w[0, 2] < 0 < w[1, 2]


@given(st.integers(0, 2**32 - 1), st.floats(1e-8, 1e2), st.floats(1.01, 100))
def test_ridge_shrinkage(seed, lam, factor):
    rng = np.random.default_rng(seed)
    P = disk_points(60, seed)
    F = rng.normal(size=(60, 3))
    basis = Basis("polynomial", 3)
    a = fit_disturbance_map(P, F, basis, lam=lam)
    b = fit_disturbance_map(P, F, basis, lam=lam * factor)
    for k in range(3):
        assert np.linalg.norm(b.coeffs[:, k]) <= np.linalg.norm(a.coeffs[:, k]) * (1 + 1e-9)


def test_map_errors():
    P = disk_points(100)
    F = np.zeros((100, 3))
    with pytest.raises(InsufficientDataError):
        fit_disturbance_map(P[:40], F[:40], Basis("polynomial", 4))
    P_line = np.column_stack([np.linspace(-0.1, 0.1, 100), np.zeros(100)])
    with pytest.raises(SingularSystemError):
        fit_disturbance_map(P_line, F, Basis("polynomial", 2), lam=0.0)
    m = fit_disturbance_map(P, F)
    with pytest.raises(DomainError):
        m(0.2, 0.0)
    m(PIPE_RADIUS, 0.0)  # boundary is inside


def test_map_and_samples_io(tmp_path):
    P, F = synthetic_samples(100, seed=5)
    write_samples(P, F, tmp_path / "s.csv")
    P2, F2 = read_samples(tmp_path / "s.csv")
    assert np.array_equal(P, P2) and np.array_equal(F, F2)
    m = fit_disturbance_map(P, F, Basis("rbf"), lam=1e-4)
    save_map(m, tmp_path / "m.json")
    back = load_map(tmp_path / "m.json")
    q = disk_points(20, 6)
    assert np.array_equal(back(q[:, 0], q[:, 1]), m(q[:, 0], q[:, 1]))
    (tmp_path / "bad.csv").write_text("y_m,z_m,fy_N,fz_N,taux_Nm\n0,0,1,2,x\n")
    with pytest.raises(ParseError) as info:
        read_samples(tmp_path / "bad.csv")
    assert info.value.line == 2
