import math

import numpy as np
import pytest

from oracles import gl_tensor_2d, stft_quad
from qmcframes.gabor import (GaussianWindow, NyquistError, ambiguity, iterated_kernel, kernel_R,
                             omega_argmin, omega_direct, omega_gaussian_closed, omega_numeric,
                             parseval_ratio, poly_window, read_signal_csv, read_stft_csv, stft_numeric,
                             write_signal_csv, write_stft_csv)

S0 = 1 / math.sqrt(2)


@pytest.mark.parametrize("sigma, tau", [(S0, 1.0), (0.3, 2.0), (2.0, 0.25), (1.0, 1.0)])
def test_window_normalized_on_grid(sigma, tau):
    w = GaussianWindow(sigma, tau)
    t = np.linspace(-40, 40, 400001)
    assert np.sum(w.sample(t) ** 2) * (t[1] - t[0]) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("bad", [0.0, -1.0, math.nan, math.inf])
def test_window_validation(bad):
    with pytest.raises(ValueError):
        GaussianWindow(bad)
    with pytest.raises(ValueError):
        GaussianWindow(1.0, bad)


def test_ambiguity_spot_values():
    w = GaussianWindow(1.0)
    assert ambiguity(w, (0.0, 0.0)) == 1
    assert abs(ambiguity(w, (1.0, 0.0))) == pytest.approx(math.exp(-math.pi / 4), abs=1e-15)
    assert abs(ambiguity(w, (1.0, 0.0))) == pytest.approx(abs(stft_quad(1.0, 1.0, 0.0)), abs=1e-8)


@pytest.mark.parametrize("sigma", [0.5, S0, 1.3])
def test_ambiguity_against_quad_oracle(sigma):
    w = GaussianWindow(sigma)
    rng = np.random.default_rng(int(sigma * 1000))
    for x, om in rng.uniform(-2, 2, size=(10, 2)):
        assert abs(ambiguity(w, (x, om)) - stft_quad(sigma, x, om)) < 1e-8


@pytest.mark.parametrize("sigma", [0.5, S0, 1.0, 2.0])
def test_ambiguity_l1_norm_is_two(sigma):
    w = GaussianWindow(sigma)
    rx, rw = 12 * sigma, 6 / sigma
    val = gl_tensor_2d(lambda x, y: np.abs(ambiguity(w, np.stack([x, y], -1))), (-rx, rx, -rw, rw))
    assert val == pytest.approx(2.0, abs=1e-9)


def test_kernel_diagonal_and_bound():
    w = GaussianWindow(S0)
    rng = np.random.default_rng(0)
    eta, nu = rng.normal(size=(2, 50, 2)) * 2
    np.testing.assert_allclose(kernel_R(w, eta, eta), 1.0, atol=1e-15)
    assert np.all(np.abs(kernel_R(w, eta, nu)) <= 1 + 1e-15)
    # modulus only depends on the difference
    shift = np.array([0.7, -1.9])
    np.testing.assert_allclose(np.abs(kernel_R(w, eta + shift, nu + shift)), np.abs(kernel_R(w, eta, nu)), atol=1e-14)


def test_kernel_is_inner_product_of_atoms():
    s = 0.8
    w = GaussianWindow(s)
    eta, nu = np.array([0.4, -0.3]), np.array([-0.5, 0.6])
    # <pi(nu) g, pi(eta) g> = ∫ g(t - nu1) e^{2 pi i nu2 t} g(t - eta1) e^{-2 pi i eta2 t} dt
    from scipy.integrate import quad
    f = lambda t: w.sample(t - nu[0]) * w.sample(t - eta[0])
    re = quad(lambda t: f(t) * math.cos(2 * math.pi * (nu[1] - eta[1]) * t), -15, 15, epsabs=1e-13)[0]
    im = quad(lambda t: f(t) * math.sin(2 * math.pi * (nu[1] - eta[1]) * t), -15, 15, epsabs=1e-13)[0]
    assert abs(kernel_R(w, eta, nu) - complex(re, im)) < 1e-10


def test_reproducing_identity_random_pairs():
    w = GaussianWindow(S0)
    rng = np.random.default_rng(4)
    for eta, nu in rng.uniform(-1.5, 1.5, size=(20, 2, 2)):
        f = lambda x, y: kernel_R(w, eta, np.stack([x, y], -1)) * kernel_R(w, np.stack([x, y], -1), nu)
        val = gl_tensor_2d(f, (-9, 9, -9, 9), n=240, panels=12)
        assert abs(val - kernel_R(w, eta, nu)) < 1e-8


def test_reproducing_identity_named_pair():
    w = GaussianWindow(S0)
    K = iterated_kernel(w, (1, 0), (0, 1))
    assert abs(K.exact_integral - kernel_R(w, (1, 0), (0, 1))) < 1e-14


def test_iterated_kernel_pointwise_and_partials():
    w = GaussianWindow(0.9)
    eta, nu = (0.3, -0.8), (1.1, 0.4)
    K = iterated_kernel(w, eta, nu)
    rng = np.random.default_rng(8)
    rho = rng.normal(size=(30, 2))
    ref = kernel_R(w, eta, rho) * kernel_R(w, rho, nu)
    np.testing.assert_allclose(K(rho[:, 0], rho[:, 1]), ref, atol=1e-14)
    np.testing.assert_allclose(iterated_kernel(w, eta, nu, rho), ref, atol=1e-14)
    np.testing.assert_allclose(np.abs(ref), np.abs(kernel_R(w, eta, rho)) * np.abs(kernel_R(w, rho, nu)), atol=1e-15)
    h = 1e-5
    x, y = rho[:, 0], rho[:, 1]
    np.testing.assert_allclose(K.d1(x, y), (K(x + h, y) - K(x - h, y)) / (2 * h), atol=1e-8)
    np.testing.assert_allclose(K.d2(x, y), (K(x, y + h) - K(x, y - h)) / (2 * h), atol=1e-8)
    d12 = (K(x + h, y + h) - K(x + h, y - h) - K(x - h, y + h) + K(x - h, y - h)) / (4 * h * h)
    np.testing.assert_allclose(K.d12(x, y), d12, atol=1e-5)


@pytest.mark.parametrize("tau", [0.25, 0.5, 2.0, 4.0])
def test_dilated_window_is_coordinate_dilation(tau):
    w = GaussianWindow(S0)
    rng = np.random.default_rng(9)
    eta, nu = rng.normal(size=(2, 25, 2))
    D = np.array([1 / tau, tau])
    np.testing.assert_allclose(kernel_R(w.dilate(tau), eta, nu), kernel_R(w, eta * D, nu * D), atol=1e-10)


def test_poly_windows_against_quad_oracle():
    s = 0.9
    w = GaussianWindow(s)
    g = poly_window(w)
    for pg in (g, g.D(), g.Z(), g.D().Z()):
        for x, om in [(0.3, -0.2), (-1.0, 0.7), (0.0, 0.0)]:
            f = lambda t, pg=pg: pg.sample(t)
            re = stft_quad(s, x, om, lambda t: f(t).real)
            im = stft_quad(s, x, om, lambda t: f(t).imag)
            assert abs(pg.stft(np.array([x, om])) - (re + 1j * im)) < 1e-9


def test_derivative_window_definitions():
    w = GaussianWindow(0.6)
    g = poly_window(w)
    t = np.linspace(-2, 2, 41)
    h = 1e-6
    np.testing.assert_allclose(g.D().sample(t), (w.sample(t + h) - w.sample(t - h)) / (2 * h), atol=1e-7)
    np.testing.assert_allclose(g.Z().sample(t), 2j * math.pi * t * w.sample(t), atol=1e-14)


# --- omega ---------------------------------------------------------------------


def test_omega_closed_values():
    assert omega_gaussian_closed(S0) == pytest.approx(8 * math.pi + 4 * math.pi**2, rel=1e-15)
    assert omega_gaussian_closed(math.sqrt(2)) == pytest.approx(10 * math.pi + 4 * math.pi**2, rel=1e-15)
    assert round(omega_gaussian_closed(S0), 2) == 64.61
    with pytest.raises(ValueError):
        omega_gaussian_closed(0.0)


@pytest.mark.parametrize("sigma", [0.2, 0.5, 1.0, 3.7])
def test_omega_closed_symmetry(sigma):
    assert omega_gaussian_closed(sigma) == pytest.approx(omega_gaussian_closed(1 / (2 * sigma)), rel=1e-14)
    assert omega_gaussian_closed(sigma) >= omega_gaussian_closed(S0)


def test_omega_argmin():
    assert omega_argmin() == pytest.approx(S0, abs=1e-6)


@pytest.mark.parametrize("sigma", [0.5, S0, 2.0])
def test_omega_numeric_components(sigma):
    r = omega_numeric(GaussianWindow(sigma))
    assert r.norm_g == pytest.approx(2.0, abs=1e-6)
    assert r.norm_Dg == pytest.approx(math.pi / sigma, rel=1e-7)
    assert r.norm_Zg == pytest.approx(2 * math.pi * sigma, rel=1e-7)
    assert r.bound >= r.closed
    assert r.flagged == (abs(r.deviation) > 0.02)


def test_omega_numeric_symmetry():
    a = omega_numeric(GaussianWindow(0.4)).bound
    b = omega_numeric(GaussianWindow(1 / 0.8)).bound
    assert a == pytest.approx(b, rel=1e-7)


def test_omega_direct_converges_to_closed_form():
    val = omega_direct(GaussianWindow(S0))
    assert val == pytest.approx(omega_gaussian_closed(S0), rel=1e-4)


# --- numeric STFT ---------------------------------------------------------------


def _grid(n=1024, dt=1 / 16):
    return (np.arange(n) - n // 2) * dt


def test_stft_of_window_at_origin():
    w = GaussianWindow(S0)
    t = _grid()
    assert abs(stft_numeric(w.sample(t), t, w, 0.0, 0.0)[0, 0] - 1) < 1e-6


def test_stft_numeric_matches_closed_form():
    w = GaussianWindow(S0)
    t = _grid()
    x = np.array([-1.0, 0.0, 0.5])
    om = np.array([-2.0, 0.3, 1.0])
    V = stft_numeric(w.sample(t), t, w, x, om)
    X, O = np.meshgrid(x, om, indexing="ij")
    np.testing.assert_allclose(V, ambiguity(w, np.stack([X, O], -1)), atol=1e-10)


def _band_limited(t, rng):
    f = np.zeros_like(t, dtype=complex)
    for _ in range(6):
        c, fr, amp = rng.uniform(-6, 6), rng.uniform(-3, 3), rng.normal() + 1j * rng.normal()
        f += amp * np.exp(-math.pi * (t - c) ** 2 / 2) * np.exp(2j * math.pi * fr * t)
    return f


def test_parseval_ratio():
    rng = np.random.default_rng(12)
    t = _grid()
    for sigma in (S0, 1.5):
        assert parseval_ratio(_band_limited(t, rng), t, GaussianWindow(sigma)) == pytest.approx(1.0, abs=1e-4)


def test_shift_covariance():
    rng = np.random.default_rng(13)
    t = _grid()
    w = GaussianWindow(S0)
    f = _band_limited(t, rng)
    k = 24
    fs = np.roll(f, k)
    s = k * (t[1] - t[0])
    x = np.linspace(-3, 3, 7)
    om = np.linspace(-2, 2, 9)
    a = np.abs(stft_numeric(f, t, w, x, om))
    b = np.abs(stft_numeric(fs, t, w, x + s, om))
    np.testing.assert_allclose(a, b, atol=1e-6)


def test_nyquist_and_grid_errors():
    w = GaussianWindow(S0)
    t = _grid(64, 0.25)
    with pytest.raises(NyquistError):
        stft_numeric(w.sample(t), t, w, 0.0, 3.0)
    with pytest.raises(NyquistError):
        stft_numeric(w.sample(t), t, GaussianWindow(0.1), 0.0, 0.0)
    with pytest.raises(ValueError):
        stft_numeric(w.sample(t), t[::-1], w, 0.0, 0.0)


def test_csv_round_trips(tmp_path):
    t = _grid(32, 0.25)
    f = np.exp(1j * t) * np.exp(-t * t)
    write_signal_csv(tmp_path / "sig.csv", t, f)
    t2, f2 = read_signal_csv(tmp_path / "sig.csv")
    np.testing.assert_array_equal(t2, t)
    np.testing.assert_array_equal(f2, f)
    w = GaussianWindow(S0)
    x, om = np.array([0.0, 1.0]), np.array([-0.5, 0.5, 1.5])
    V = stft_numeric(f, t, w, x, om)
    write_stft_csv(tmp_path / "V.csv", x, om, V)
    x2, om2, V2 = read_stft_csv(tmp_path / "V.csv")
    np.testing.assert_array_equal(x2, x)
    np.testing.assert_array_equal(om2, om)
    np.testing.assert_array_equal(V2, V)
