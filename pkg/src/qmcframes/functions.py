"""Integrands on the plane with their first mixed partial derivatives.

Every integrand exposes ``h``, ``d1``, ``d2``, ``d12`` as vectorized
callables ``f(x, y)``, a radial decay envelope around ``center`` and,
when known, the exact integral and the exact L1 norms of the partials.
"""
from __future__ import annotations

import math

import numpy as np


class SmoothFn2D:
    """Base integrand contract.

    Subclasses implement :meth:`__call__`, :meth:`d1`, :meth:`d2`,
    :meth:`d12` and :meth:`envelope`; ``envelope(r)`` must bound ``|h(p)|``
    for ``|p - center| >= r`` and be non-increasing in ``r``.
    ``partial_envelope`` bounds the three partials the same way.
    """

    center: tuple[float, float] = (0.0, 0.0)
    exact_integral: complex | None = None
    exact_partial_l1: tuple[float, float, float] | None = None

    def __call__(self, x, y):
        raise NotImplementedError

    def d1(self, x, y):
        raise NotImplementedError

    def d2(self, x, y):
        raise NotImplementedError

    def d12(self, x, y):
        raise NotImplementedError

    def envelope(self, r):
        raise NotImplementedError

    def partial_envelope(self, r):
        raise NotImplementedError

    def cutoff_radius(self, tol: float, which: str = "h") -> float:
        """Smallest radius (on a doubling/bisection search) whose envelope tail mass is below tol."""
        env = self.envelope if which == "h" else self.partial_envelope
        return _tail_radius(env, tol)


def _tail_mass(env, R: float) -> float:
    from scipy.integrate import quad

    val, _ = quad(lambda r: 2 * math.pi * r * env(r), R, np.inf, limit=200)
    return val


def _tail_radius(env, tol: float) -> float:
    lo, hi = 0.0, 1.0
    while _tail_mass(env, hi) > tol:
        lo, hi = hi, 2 * hi
        if hi > 1e6:
            raise ValueError("envelope is not integrable")
    for _ in range(40):
        mid = (lo + hi) / 2
        if _tail_mass(env, mid) > tol:
            lo = mid
        else:
            hi = mid
    return hi


class QuadExp2D(SmoothFn2D):
    """``h(p) = exp(c + b.p - p^T A p)`` with complex coefficients.

    ``A`` must be symmetric with positive definite real part.  Gaussians,
    chirps and the STFT kernels of Gaussian windows are all of this form,
    and the family is closed under products and coordinate dilations.
    """

    def __init__(self, A, b=(0.0, 0.0), c=0.0, partial_l1=None):
        A = np.asarray(A, dtype=complex).reshape(2, 2)
        if abs(A[0, 1] - A[1, 0]) > 1e-14 * (1 + abs(A).max()):
            raise ValueError("A must be symmetric")
        A = (A + A.T) / 2
        ReA = A.real
        lam = np.linalg.eigvalsh(ReA)
        if lam.min() <= 0:
            raise ValueError("Re A must be positive definite")
        self.A = A
        self.b = np.asarray(b, dtype=complex).reshape(2)
        self.c = complex(c)
        self._lam = float(lam.min())
        rho = np.linalg.solve(2 * ReA, self.b.real)
        self.center = (float(rho[0]), float(rho[1]))
        self._peak = float(self.c.real + self.b.real @ rho - rho @ ReA @ rho)
        self.exact_integral = self._integral()
        self.exact_partial_l1 = partial_l1

    def _exponent(self, x, y):
        A, b = self.A, self.b
        return self.c + b[0] * x + b[1] * y - (A[0, 0] * x * x + 2 * A[0, 1] * x * y + A[1, 1] * y * y)

    def _q1(self, x, y):
        return self.b[0] - 2 * (self.A[0, 0] * x + self.A[0, 1] * y)

    def _q2(self, x, y):
        return self.b[1] - 2 * (self.A[0, 1] * x + self.A[1, 1] * y)

    def __call__(self, x, y):
        return np.exp(self._exponent(x, y))

    def d1(self, x, y):
        return self._q1(x, y) * self(x, y)

    def d2(self, x, y):
        return self._q2(x, y) * self(x, y)

    def d12(self, x, y):
        return (-2 * self.A[0, 1] + self._q1(x, y) * self._q2(x, y)) * self(x, y)

    def envelope(self, r):
        return math.exp(self._peak - self._lam * r * r)

    def partial_envelope(self, r):
        # |q1|, |q2| <= c0 + c1 r around the center; |d12| <= (c0 + c1 r)^2 + c1
        c1 = 2 * float(np.abs(self.A).sum(axis=1).max())
        q0 = max(abs(self._q1(*self.center)), abs(self._q2(*self.center)))
        s = q0 + c1 * r
        return (s * s + s + c1 + 1) * self.envelope(r)

    def _integral(self) -> complex:
        # integrate y first, then x; principal square roots are valid since
        # both pivots have positive real part
        A, b = self.A, self.b
        a22 = A[1, 1]
        schur = A[0, 0] - A[0, 1] ** 2 / a22
        b1 = b[0] - b[1] * A[0, 1] / a22
        expo = self.c + b[1] ** 2 / (4 * a22) + b1**2 / (4 * schur)
        return complex(math.pi / (np.sqrt(a22) * np.sqrt(schur)) * np.exp(expo))

    def __mul__(self, other: "QuadExp2D") -> "QuadExp2D":
        return QuadExp2D(self.A + other.A, self.b + other.b, self.c + other.c)

    def dilate(self, tau: float) -> "QuadExp2D":
        """``p -> h(tau p1, p2 / tau)`` as another QuadExp2D."""
        D = np.diag([tau, 1 / tau])
        pl1 = None
        if self.exact_partial_l1 is not None:
            n1, n2, n12 = self.exact_partial_l1
            pl1 = (tau * n1, n2 / tau, n12)
        return QuadExp2D(D @ self.A @ D, D @ self.b, self.c, partial_l1=pl1)


class DilatedFn(SmoothFn2D):
    """``h_tau(p) = h(tau p1, p2 / tau)`` for any integrand ``h``."""

    def __init__(self, h: SmoothFn2D, tau: float):
        if not tau > 0:
            raise ValueError("tau must be positive")
        self.h, self.tau = h, float(tau)
        self.center = (h.center[0] / tau, h.center[1] * tau)
        self.exact_integral = h.exact_integral
        if h.exact_partial_l1 is not None:
            n1, n2, n12 = h.exact_partial_l1
            self.exact_partial_l1 = (tau * n1, n2 / tau, n12)
        self._k = max(tau, 1 / tau)

    def __call__(self, x, y):
        return self.h(self.tau * x, y / self.tau)

    def d1(self, x, y):
        return self.tau * self.h.d1(self.tau * x, y / self.tau)

    def d2(self, x, y):
        return self.h.d2(self.tau * x, y / self.tau) / self.tau

    def d12(self, x, y):
        return self.h.d12(self.tau * x, y / self.tau)

    # distances shrink by at most a factor max(tau, 1/tau) under the dilation
    def envelope(self, r):
        return self.h.envelope(r / self._k)

    def partial_envelope(self, r):
        return self._k * self.h.partial_envelope(r / self._k)


def dilate_fn(h: SmoothFn2D, tau: float) -> SmoothFn2D:
    if tau == 1:
        return h
    return DilatedFn(h, tau)


class ZeroFn(SmoothFn2D):
    exact_integral = 0.0
    exact_partial_l1 = (0.0, 0.0, 0.0)

    def __call__(self, x, y):
        return np.zeros(np.broadcast(x, y).shape)

    d1 = d2 = d12 = __call__

    def envelope(self, r):
        return 0.0

    def partial_envelope(self, r):
        return 0.0


def gaussian(center=(0.0, 0.0)) -> QuadExp2D:
    """``exp(-pi |p - center|^2)``: integral 1, partial L1 norms (2, 2, 4)."""
    return anisotropic_gaussian(1.0, 1.0, center)


def anisotropic_gaussian(sx: float, sy: float, center=(0.0, 0.0)) -> QuadExp2D:
    """``exp(-pi ((x-cx)^2/sx^2 + (y-cy)^2/sy^2))``."""
    if not (sx > 0 and sy > 0):
        raise ValueError("widths must be positive")
    cx, cy = (float(v) for v in center)
    ax, ay = math.pi / sx**2, math.pi / sy**2
    A = np.diag([ax, ay])
    b = (2 * ax * cx, 2 * ay * cy)
    c = -(ax * cx * cx + ay * cy * cy)
    return QuadExp2D(A, b, c, partial_l1=(2 * sy, 2 * sx, 4.0))


def integrand_by_name(name: str) -> SmoothFn2D:
    """``gauss`` or ``gauss_aniso:sx,sy`` (no user code is ever evaluated)."""
    if name == "gauss":
        return gaussian()
    if name == "zero":
        return ZeroFn()
    if name.startswith("gauss_aniso:"):
        parts = name.split(":", 1)[1].split(",")
        if len(parts) != 2:
            raise ValueError("gauss_aniso needs two widths, e.g. gauss_aniso:1,2")
        sx, sy = (float(p) for p in parts)
        return anisotropic_gaussian(sx, sy)
    raise ValueError(f"unknown integrand {name!r}")
