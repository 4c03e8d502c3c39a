"""Gaussian Gabor systems: ambiguity function, reproducing kernel, oscillation.

Conventions: ``pi(x, w) g(t) = exp(2 pi i w t) g(t - x)`` and
``V_g f(x, w) = <f, pi(x, w) g> = ∫ f(t) conj(g(t - x)) exp(-2 pi i t w) dt``.
For ``g_s(t) = s^(-1/2) exp(-pi t^2 / (2 s^2))`` this gives

    V_g g(x, w) = exp(-pi i x w - alpha x^2 - beta w^2),
    alpha = pi / (4 s^2),  beta = pi s^2.

Windows of the form ``p(t) g(t)`` with a polynomial ``p`` are closed under
``D`` (derivative) and ``Z`` (multiplication by ``2 pi i t``), and their
STFT against ``g`` is ``V_g g`` times a polynomial in ``z = x/2 - i s^2 w``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .functions import QuadExp2D
from .integrate import gauss_legendre_grid, integrate_2d

ENVELOPE_CUTOFF = 1e-12


@dataclass(frozen=True)
class GaussianWindow:
    """``g_tau(t) = tau^(-1/2) g_sigma(t / tau)``, itself a Gaussian of width ``sigma * tau``."""

    sigma: float
    tau: float = 1.0

    def __post_init__(self):
        for name in ("sigma", "tau"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite")

    @property
    def sigma_eff(self) -> float:
        return self.sigma * self.tau

    @property
    def alpha(self) -> float:
        return math.pi / (4 * self.sigma_eff**2)

    @property
    def beta(self) -> float:
        return math.pi * self.sigma_eff**2

    def dilate(self, tau: float) -> "GaussianWindow":
        return GaussianWindow(self.sigma, self.tau * tau)

    def sample(self, t):
        s = self.sigma_eff
        return np.exp(-math.pi * np.square(t) / (2 * s * s)) / math.sqrt(s)

    def support_radius(self, cutoff: float = ENVELOPE_CUTOFF) -> float:
        """Radius beyond which ``|g| < cutoff * max|g|``."""
        return self.sigma_eff * math.sqrt(2 * math.log(1 / cutoff) / math.pi)


def _xw(eta):
    eta = np.asarray(eta, dtype=float)
    return eta[..., 0], eta[..., 1]


def ambiguity(w: GaussianWindow, eta):
    """``V_g g(eta)`` in closed form; ``eta`` has shape ``(..., 2)``."""
    x, om = _xw(eta)
    return np.exp(-1j * math.pi * x * om - w.alpha * x * x - w.beta * om * om)


def kernel_R(w: GaussianWindow, eta, nu):
    """``R(eta, nu) = <pi(nu) g, pi(eta) g> = exp(-2 pi i nu_1 (eta_2 - nu_2)) V_g g(eta - nu)``."""
    eta = np.asarray(eta, dtype=float)
    nu = np.asarray(nu, dtype=float)
    phase = np.exp(-2j * math.pi * nu[..., 0] * (eta[..., 1] - nu[..., 1]))
    return phase * ambiguity(w, eta - nu)


def iterated_kernel(w: GaussianWindow, eta, nu, rho=None):
    """``K(rho) = R(eta, rho) R(rho, nu)`` as a :class:`QuadExp2D` in ``rho``.

    The ``rho_1 rho_2`` cross terms of the two phases cancel, leaving
    ``A = diag(2 alpha, 2 beta)``.  With ``rho`` given, returns ``K(rho)``.
    """
    e1, e2 = (float(v) for v in eta)
    n1, n2 = (float(v) for v in nu)
    al, be = w.alpha, w.beta
    pi = math.pi
    A = np.diag([2 * al, 2 * be])
    b = (2 * al * (e1 + n1) + 1j * pi * (n2 - e2), 2 * be * (e2 + n2) + 1j * pi * (e1 - n1))
    c = -1j * pi * e1 * e2 + 1j * pi * n1 * n2 - al * (e1 * e1 + n1 * n1) - be * (e2 * e2 + n2 * n2)
    K = QuadExp2D(A, b, c)
    if rho is None:
        return K
    r = np.asarray(rho, dtype=float)
    return K(r[..., 0], r[..., 1])


# ---------------------------------------------------------------------------
# polynomial x Gaussian windows


@dataclass(frozen=True)
class PolyGaussian:
    """The window ``(sum_k coef[k] t^k) g(t)`` for a Gaussian ``g``."""

    coef: tuple
    window: GaussianWindow

    def D(self) -> "PolyGaussian":
        # (p g)' = (p' - pi t p / s^2) g
        p = np.asarray(self.coef, dtype=complex)
        dp = np.zeros(len(p) + 1, dtype=complex)
        dp[:len(p) - 1] += p[1:] * np.arange(1, len(p))
        dp[1:] -= math.pi / self.window.sigma_eff**2 * p
        return PolyGaussian(tuple(dp), self.window)

    def Z(self) -> "PolyGaussian":
        p = np.asarray(self.coef, dtype=complex)
        return PolyGaussian(tuple(np.concatenate([[0], 2j * math.pi * p])), self.window)

    def sample(self, t):
        return np.polynomial.polynomial.polyval(t, np.asarray(self.coef, dtype=complex)) * self.window.sample(t)

    def stft_factor(self, eta):
        """``V_g(p g) / V_g g``: the moments of ``t`` under the complex Gaussian centred at ``z``."""
        x, om = _xw(eta)
        s2 = self.window.sigma_eff**2
        z = x / 2 - 1j * s2 * om
        var = s2 / (2 * math.pi)
        out = np.zeros(np.broadcast(x, om).shape, dtype=complex)
        for k, ck in enumerate(self.coef):
            if ck == 0:
                continue
            mk = np.zeros_like(out)
            for j in range(k // 2 + 1):
                mk = mk + math.comb(k, 2 * j) * _double_factorial(2 * j - 1) * var**j * z ** (k - 2 * j)
            out = out + ck * mk
        return out

    def stft(self, eta):
        return self.stft_factor(eta) * ambiguity(self.window, eta)


def _double_factorial(n: int) -> int:
    return math.prod(range(n, 0, -2)) if n > 0 else 1


def poly_window(w: GaussianWindow) -> PolyGaussian:
    return PolyGaussian((1.0,), w)


# ---------------------------------------------------------------------------
# oscillation


def omega_gaussian_closed(sigma: float) -> float:
    """``4 pi (1/(sqrt2 sigma) + sqrt2 sigma) + 4 pi^2``."""
    if not (math.isfinite(sigma) and sigma > 0):
        raise ValueError("sigma must be positive")
    r2 = math.sqrt(2.0)
    return 4 * math.pi * (1 / (r2 * sigma) + r2 * sigma) + 4 * math.pi**2


def omega_argmin(lo: float = 0.1, hi: float = 10.0, tol: float = 1e-10) -> float:
    """Golden-section search for the width minimizing the closed form on ``[lo, hi]``."""
    mid = math.sqrt(lo * hi)
    res = minimize_scalar(omega_gaussian_closed, bracket=(lo, mid, hi), method="golden", tol=tol)
    if not lo <= res.x <= hi:
        raise RuntimeError("golden-section search left the bracket")
    return float(res.x)


@dataclass(frozen=True)
class OmegaNumeric:
    """Numerically integrated component norms and the bound they combine into."""

    norm_g: float
    norm_Dg: float
    norm_Zg: float
    norm_ZDg: float
    bound: float
    closed: float
    deviation: float  # (bound - closed) / closed
    flagged: bool     # |deviation| > 2%


def _l1_norm(pg: PolyGaussian, abs_tol: float) -> float:
    w = pg.window
    # the polynomial factor grows at most like |eta|^deg; pad the envelope radius
    deg = len(pg.coef) - 1
    rx = math.sqrt((math.log(1 / ENVELOPE_CUTOFF) + 4 * deg) / w.alpha)
    rw = math.sqrt((math.log(1 / ENVELOPE_CUTOFF) + 4 * deg) / w.beta)
    f = lambda x, y: np.abs(pg.stft(np.stack([x, y], axis=-1)))
    val, _ = integrate_2d(f, (-rx, rx, -rw, rw), abs_tol=abs_tol)
    return float(val)


def stft_l1_norms(w: GaussianWindow, abs_tol: float = 1e-9) -> tuple[float, float, float, float]:
    """``||V_g g||_1, ||V_g Dg||_1, ||V_g Zg||_1, ||V_g ZDg||_1``."""
    g = poly_window(w)
    return tuple(_l1_norm(pg, abs_tol) for pg in (g, g.D(), g.Z(), g.D().Z()))


def omega_numeric(w: GaussianWindow, abs_tol: float = 1e-9) -> OmegaNumeric:
    """Integrate the four STFT norms and combine them into the oscillation upper bound

    ``2 [|Vg||VDg| + |Vg||VZg| + |Vg||VZDg| + |VDg||VZg|]``.
    """
    ng, nd, nz, nzd = stft_l1_norms(w, abs_tol)
    bound = 2 * (ng * nd + ng * nz + ng * nzd + nd * nz)
    closed = omega_gaussian_closed(w.sigma_eff)
    dev = (bound - closed) / closed
    return OmegaNumeric(ng, nd, nz, nzd, bound, closed, dev, abs(dev) > 0.02)


def omega_direct(w: GaussianWindow, n_eta: int = 48, n_rho: int = 48, panels: int = 6) -> float:
    """The oscillation functional evaluated directly from the iterated kernel.

    ``∫ (||d1 K||_1 + ||d2 K||_1 + ||d12 K||_1) d eta`` with ``K`` the
    iterated kernel at ``nu = 0``; the value does not depend on ``nu``
    because the translation phases of ``K`` do not depend on ``rho``.
    Both integrals use composite Gauss-Legendre on the envelope boxes, so
    the kinks of the moduli limit accuracy to roughly 1e-3 relative at the
    default sizes.
    """
    al, be = w.alpha, w.beta
    L = math.log(1 / ENVELOPE_CUTOFF)
    # |K| <= exp(-alpha/2 |eta_1|^2 ...) in eta and exp(-2 alpha |rho_1 - eta_1/2|^2 ...) in rho
    ex, wx = gauss_legendre_grid(-math.sqrt(2 * L / al), math.sqrt(2 * L / al), panels, n_eta // panels)
    ey, wy = gauss_legendre_grid(-math.sqrt(2 * L / be), math.sqrt(2 * L / be), panels, n_eta // panels)
    ux, vx = gauss_legendre_grid(-math.sqrt(L / (2 * al)), math.sqrt(L / (2 * al)), panels, n_rho // panels)
    uy, vy = gauss_legendre_grid(-math.sqrt(L / (2 * be)), math.sqrt(L / (2 * be)), panels, n_rho // panels)
    R1, R2 = np.meshgrid(ux, uy, indexing="ij")
    wr = np.outer(vx, vy)
    pi = math.pi
    total = 0.0
    for i, e1 in enumerate(ex):
        e2 = ey[:, None, None]
        # shift rho by eta/2 so the kernel's centre sits at the origin of the rho grid
        r1 = R1[None] + e1 / 2
        r2 = R2[None] + e2 / 2
        b1 = 2 * al * e1 - 1j * pi * e2
        b2 = 2 * be * e2 + 1j * pi * e1
        c = -1j * pi * e1 * e2 - al * e1 * e1 - be * e2 * e2
        q1 = b1 - 4 * al * r1
        q2 = b2 - 4 * be * r2
        K = np.exp(c + b1 * r1 + b2 * r2 - 2 * al * r1 * r1 - 2 * be * r2 * r2)
        aK = np.abs(K)
        integrand = (np.abs(q1) + np.abs(q2) + np.abs(q1 * q2)) * aK
        inner = (integrand * wr[None]).sum(axis=(1, 2))
        total += wx[i] * float(inner @ wy)
    return total


# ---------------------------------------------------------------------------
# numeric STFT


class NyquistError(ValueError):
    pass


def stft_numeric(f, t, w: GaussianWindow, x, omega):
    """Riemann-sum STFT of samples ``f`` on the uniform grid ``t``.

    Returns the matrix ``V[i, j] ≈ V_g f(x[i], omega[j])``.  Frequencies above
    the grid's Nyquist limit are refused.
    """
    f = np.asarray(f, dtype=complex)
    t = np.asarray(t, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if f.shape != t.shape or t.ndim != 1 or len(t) < 2:
        raise ValueError("f and t must be 1D arrays of equal length >= 2")
    dt = float(t[1] - t[0])
    if not dt > 0 or not np.allclose(np.diff(t), dt, rtol=1e-9, atol=0):
        raise ValueError("time grid must be uniform and increasing")
    nyq = 1 / (2 * dt)
    if np.abs(omega).max() > nyq * (1 + 1e-12):
        raise NyquistError(f"frequency {np.abs(omega).max():.6g} exceeds Nyquist limit {nyq:.6g}")
    if w.sigma_eff < 2 * dt:
        raise NyquistError("time step too coarse for the window width")
    win = w.sample(t[None, :] - x[:, None])  # real window, conj is a no-op
    E = np.exp(-2j * math.pi * t[:, None] * omega[None, :])
    return (win * f[None, :]) @ E * dt


def stft_full(f, t, w: GaussianWindow):
    """STFT on the full discrete phase-space grid: ``x = t``, ``omega`` the FFT frequencies.

    Returns ``(x, omega, V)`` with ``omega`` sorted ascending.
    """
    t = np.asarray(t, dtype=float)
    n = len(t)
    dt = float(t[1] - t[0])
    omega = np.fft.fftshift(np.fft.fftfreq(n, dt))
    return t, omega, stft_numeric(f, t, w, t, omega)


def parseval_ratio(f, t, w: GaussianWindow) -> float:
    """``∫∫ |V_g f|^2 / ||f||^2`` on the full discrete grid (1 for a Parseval frame)."""
    f = np.asarray(f, dtype=complex)
    x, omega, V = stft_full(f, t, w)
    dt = float(t[1] - t[0])
    dw = float(omega[1] - omega[0])
    return float((np.abs(V) ** 2).sum() * dt * dw / ((np.abs(f) ** 2).sum() * dt))


def read_signal_csv(path):
    """Read ``t,re,im`` rows (header optional) into ``(t, f)``."""
    ts, vals = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                t, re, im = (float(v) for v in row)
            except ValueError:
                if not ts and [c.strip() for c in row] == ["t", "re", "im"]:
                    continue
                raise ValueError(f"bad signal row {row!r}") from None
            ts.append(t)
            vals.append(complex(re, im))
    return np.array(ts), np.array(vals)


def write_signal_csv(path, t, f):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["t", "re", "im"])
        for ti, fi in zip(t, np.asarray(f, dtype=complex)):
            wr.writerow([f"{ti:.17g}", f"{fi.real:.17g}", f"{fi.imag:.17g}"])


def _fmt_complex(z: complex) -> str:
    return f"{z.real:.17g}{z.imag:+.17g}j"


def write_stft_csv(path, x, omega, V):
    """Grid CSV: header row ``x\\omega, omega_0, ...``; each row starts with its ``x``.

    Cells are complex literals such as ``0.5-0.25j`` (readable by ``complex()``).
    """
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["x\\omega"] + [f"{o:.17g}" for o in omega])
        for xi, row in zip(x, V):
            wr.writerow([f"{xi:.17g}"] + [_fmt_complex(complex(z)) for z in row])


def read_stft_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    omega = np.array([float(v) for v in rows[0][1:]])
    x = np.array([float(r[0]) for r in rows[1:]])
    V = np.array([[complex(v) for v in r[1:]] for r in rows[1:]])
    return x, omega, V
