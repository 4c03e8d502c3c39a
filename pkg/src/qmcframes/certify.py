"""Frame-bound certificates for Gaussian Gabor systems on lattices.

A certificate states frame bounds ``1 - eps`` and ``1 + eps`` with
``eps = D* x Omega``.  Two independent checks sit next to it: the direct
Schur quantity ``sup_nu ∫ |e(K^(eta,nu), Lambda)| d eta`` and the extreme
Rayleigh quotients of the sampled frame operator on a concentrated test
subspace.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import erf

from .discrepancy import DiscrepancyEstimate, dilation_discrepancy, shift_discrepancy
from .gabor import GaussianWindow, kernel_R, omega_gaussian_closed, omega_numeric
from .integrate import gauss_legendre_grid
from .lattice import Lattice, PointSet, admissibility_margin, as_point_source, enumerate_in_box, make_lattice
from .quadrature import qmc_weights

CUTOFF_LOG = math.log(1e14)


@dataclass(frozen=True)
class Certificate:
    epsilon: float
    A: float
    B: float
    valid: bool
    eps_optimistic: float
    discrepancy: DiscrepancyEstimate
    omega: float
    omega_source: str          # "closed" or "numeric"
    dilation_uniform: bool = False
    empirically_admissible: bool = False
    scale: float = 1.0
    sigma: float = 1.0
    tau: float = 1.0

    @classmethod
    def from_parts(cls, d: DiscrepancyEstimate, omega: float, omega_source: str, **kw) -> "Certificate":
        eps = d.estimate * omega
        return cls(epsilon=eps, A=1.0 - eps, B=1.0 + eps, valid=eps < 1.0,
                   eps_optimistic=d.lower_bound * omega, discrepancy=d,
                   omega=omega, omega_source=omega_source, **kw)


def _omega(w: GaussianWindow, source: str) -> float:
    if source == "closed":
        return omega_gaussian_closed(w.sigma_eff)
    if source == "numeric":
        return omega_numeric(w).bound
    raise ValueError(f"unknown omega source {source!r}")


def certificate(lat: Lattice, a: float, w: GaussianWindow, discrepancy_cfg: dict | None = None,
                omega_source: str = "closed") -> Certificate:
    """Certificate for ``(sqrt(det) pi(lambda) g)`` over ``lambda ∈ a * lat``.

    ``epsilon`` uses the refined discrepancy estimate, ``eps_optimistic`` the
    uniform-grid lower bound.  The window's own dilation enters through
    ``Omega(sigma * tau)``.
    """
    if not a > 0:
        raise ValueError("scale must be positive")
    d = shift_discrepancy(lat.rescale(a), **(discrepancy_cfg or {}))
    return Certificate.from_parts(d, _omega(w, omega_source), omega_source,
                                  scale=a, sigma=w.sigma, tau=w.tau)


class NotAdmissibleError(ValueError):
    pass


def dilation_uniform_certificate(lat: Lattice, a: float, w: GaussianWindow, tau_samples: Sequence[float],
                                 discrepancy_cfg: dict | None = None, margin_bound: int = 1000,
                                 omega_source: str = "closed") -> Certificate:
    """Certificate valid for every dilated window ``g_tau`` at once.

    ``epsilon = max_tau D*_shift(a lat_tau) x Omega(g)`` with ``Omega`` taken
    at the undilated width ``w.sigma``, so passing ``w.dilate(t)`` yields the
    same certificate.  Lattices whose finite-box admissibility margin is zero
    are refused.
    """
    m = admissibility_margin(lat, margin_bound)
    if not m.margin > 0:
        raise NotAdmissibleError(f"admissibility margin is 0 at M={margin_bound}; lattice is not admissible")
    d = dilation_discrepancy(lat, a, tau_samples, **(discrepancy_cfg or {}))
    base = GaussianWindow(w.sigma)
    return Certificate.from_parts(d, _omega(base, omega_source), omega_source, dilation_uniform=True,
                                  empirically_admissible=True, scale=a, sigma=w.sigma, tau=1.0)


def find_certifiable_scale(lat: Lattice, w: GaussianWindow, a_lo: float, a_hi: float,
                           tau_samples: Sequence[float] = (1.0,), iterations: int = 6,
                           discrepancy_cfg: dict | None = None):
    """Bisect ``log a`` for a large scale with ``epsilon < 1``.

    ``a_lo`` must certify and ``a_hi`` must not.  Returns
    ``(a, certificate, history)`` where ``a`` is the largest certifying
    scale seen and ``history`` lists ``(a, epsilon)`` for every evaluation.
    """
    cfg = discrepancy_cfg or {}

    def cert(a):
        if len(tau_samples) == 1 and tau_samples[0] == 1.0:
            return certificate(lat, a, w, cfg)
        return dilation_uniform_certificate(lat, a, w, tau_samples, cfg)

    history = []
    c_lo = cert(a_lo)
    history.append((a_lo, c_lo.epsilon))
    if not c_lo.valid:
        raise ValueError(f"a_lo={a_lo} does not certify (epsilon={c_lo.epsilon:.4g})")
    c_hi = cert(a_hi)
    history.append((a_hi, c_hi.epsilon))
    if c_hi.valid:
        return a_hi, c_hi, history
    best = (a_lo, c_lo)
    lo, hi = math.log(a_lo), math.log(a_hi)
    for _ in range(iterations):
        mid = (lo + hi) / 2
        a = math.exp(mid)
        c = cert(a)
        history.append((a, c.epsilon))
        if c.valid:
            lo = mid
            if a > best[0]:
                best = (a, c)
        else:
            hi = mid
    return best[0], best[1], history


# ---------------------------------------------------------------------------
# Schur estimate


@dataclass(frozen=True)
class SchurEstimate:
    epsilon: float             # max over sampled nu
    per_nu: np.ndarray         # (n, 3): nu_1, nu_2, ∫|e| d eta
    tail_budget: float
    eta_nodes: int
    poisson_bound: float | None = None  # 2 sum_{k != 0} exp(-beta k1^2 - alpha k2^2), lattices only


def _dual(lat: Lattice) -> Lattice:
    G = lat.generator
    return make_lattice(np.linalg.inv(G).T)


def poisson_schur_bound(lat: Lattice, w: GaussianWindow, tol: float = 1e-15) -> float:
    """``∫ sum_{k in dual \\ 0} |K^(eta,nu)^(k)| d eta``, an upper bound of the Schur quantity for every ``nu``."""
    al, be = w.alpha, w.beta
    r1 = math.sqrt(math.log(1 / tol) / be) + 1
    r2 = math.sqrt(math.log(1 / tol) / al) + 1
    k = enumerate_in_box(_dual(lat), (-r1, r1, -r2, r2))
    k = k[np.any(np.abs(k) > 1e-12, axis=1)]
    return float(2 * np.exp(-be * k[:, 0] ** 2 - al * k[:, 1] ** 2).sum()) if len(k) else 0.0


def _khat(w: GaussianWindow, e1, e2, nu, k):
    # Fourier transform at k of the iterated kernel (as a function of rho),
    # vectorized over eta (broadcast e1, e2) and dual points k (last axis)
    al, be = w.alpha, w.beta
    n1, n2 = nu
    pi = math.pi
    b1 = 2 * al * (e1 + n1) + 1j * pi * (n2 - e2)
    b2 = 2 * be * (e2 + n2) + 1j * pi * (e1 - n1)
    c = -1j * pi * e1 * e2 + 1j * pi * n1 * n2 - al * (e1 * e1 + n1 * n1) - be * (e2 * e2 + n2 * n2)
    b1 = b1[..., None] - 2j * pi * k[:, 0]
    b2 = b2[..., None] - 2j * pi * k[:, 1]
    pref = pi / (2 * math.sqrt(al * be))
    return pref * np.exp(c[..., None] + b1 * b1 / (8 * al) + b2 * b2 / (8 * be))


def _eta_grid(lo, hi, step, order=8):
    panels = max(1, math.ceil((hi - lo) / (step * order)))
    return gauss_legendre_grid(lo, hi, panels, order)


def _box_tail(al, be, n1, n2, box):
    # ∫ over the complement of box of exp(-alpha (x-n1)^2 - beta (y-n2)^2) for unit-mass-normalized
    # separable Gaussians: total minus inside
    x0, x1, y0, y1 = box
    fx = 0.5 * (erf(math.sqrt(al) * (x1 - n1)) - erf(math.sqrt(al) * (x0 - n1)))
    fy = 0.5 * (erf(math.sqrt(be) * (y1 - n2)) - erf(math.sqrt(be) * (y0 - n2)))
    return 1.0 - fx * fy


def _schur_one_nu_poisson(lat, w, nu, step, k_all):
    al, be = w.alpha, w.beta
    n1, n2 = nu
    # |K^| is a Gaussian in eta centred at nu + (k2, -k1) with rates (alpha, beta)
    rx = math.sqrt(CUTOFF_LOG / al)
    ry = math.sqrt(CUTOFF_LOG / be)
    centers = np.column_stack([n1 + k_all[:, 1], n2 - k_all[:, 0]])
    mass = 2 * np.exp(-be * k_all[:, 0] ** 2 - al * k_all[:, 1] ** 2)
    live = mass > 1e-16
    if not live.any():
        return 0.0, float(mass.sum())
    k, centers, mass = k_all[live], centers[live], mass[live]
    box = (centers[:, 0].min() - rx, centers[:, 0].max() + rx, centers[:, 1].min() - ry, centers[:, 1].max() + ry)
    ex, wx = _eta_grid(box[0], box[1], step)
    ey, wy = _eta_grid(box[2], box[3], step)
    total = 0.0
    E2 = ey[None, :]
    for i0 in range(0, len(ex), 64):
        E1 = ex[i0:i0 + 64, None]
        e = -_khat(w, E1, E2 + 0 * E1, nu, k).sum(axis=-1)
        total += float(wx[i0:i0 + 64] @ np.abs(e) @ wy)
    tail = float(k_all.shape[0] and (2 * np.exp(-be * k_all[~live, 0] ** 2 - al * k_all[~live, 1] ** 2)).sum())
    for c, m in zip(centers, mass):
        tail += m * _box_tail(al, be, c[0], c[1], box)
    return total, tail


def _schur_one_nu_direct(pts, wts, w, nu, step, box):
    # e(eta) = R(eta, nu) - sum_l a_l R(eta, l) R(l, nu); the sum is separable on a tensor eta grid
    al, be = w.alpha, w.beta
    ex, wx = _eta_grid(box[0], box[1], step)
    ey, wy = _eta_grid(box[2], box[3], step)
    l1, l2 = pts[:, 0], pts[:, 1]
    v = wts * kernel_R(w, pts, np.asarray(nu, dtype=float)[None, :]) * np.exp(1j * math.pi * l1 * l2)
    A = np.exp(1j * math.pi * ex[:, None] * l2[None, :] - al * (ex[:, None] - l1[None, :]) ** 2)
    B = np.exp(-1j * math.pi * l1[:, None] * ey[None, :] - be * (ey[None, :] - l2[:, None]) ** 2)
    S = np.exp(-1j * math.pi * ex[:, None] * ey[None, :]) * ((A * v[None, :]) @ B)
    EE = np.stack(np.meshgrid(ex, ey, indexing="ij"), axis=-1)
    e = kernel_R(w, EE, np.asarray(nu, dtype=float)) - S
    return float(wx @ np.abs(e) @ wy)


def schur_epsilon(points, w: GaussianWindow, nu_samples: int = 16, eta_step: float | None = None,
                  method: str = "auto", workers: int = 1, nu_points=None) -> SchurEstimate:
    """Direct estimate of ``sup_nu ∫ |e(K^(eta,nu), Lambda)| d eta``.

    ``nu`` runs over an ``nu_samples x nu_samples`` grid of the reduced
    fundamental cell (the integral is periodic in ``nu`` for a lattice).
    For lattices (``method="poisson"``) the error is the dual-lattice sum
    ``-sum_{k != 0} K^(k)``; ``method="direct"`` sums the weighted kernel
    over the points instead and also accepts weighted point sets, for which
    ``nu_points`` must be given.  ``eta_step`` defaults to a quarter of the
    shortest lattice vector (the error oscillates in ``eta`` on that scale).
    """
    src = as_point_source(points)
    is_lat = isinstance(src, Lattice)
    if method == "auto":
        method = "poisson" if is_lat else "direct"
    if method not in ("poisson", "direct"):
        raise ValueError(f"unknown method {method!r}")
    if method == "poisson" and not is_lat:
        raise ValueError("the Poisson path needs a lattice")
    if is_lat:
        G = src.reduced_generator()
        shortest = float(np.linalg.norm(G, axis=0).min())
        if nu_points is None:
            s = (np.arange(nu_samples) + 0.5) / nu_samples
            ss, tt = np.meshgrid(s, s, indexing="ij")
            nu_points = np.column_stack([ss.ravel(), tt.ravel()]) @ G.T
    else:
        if nu_points is None:
            raise ValueError("nu_points are required for non-lattice point sets")
        shortest = 0.5
    nu_points = np.asarray(nu_points, dtype=float).reshape(-1, 2)
    step = eta_step if eta_step is not None else min(0.25, shortest / 4)
    if not step > 0:
        raise ValueError("eta_step must be positive")
    al, be = w.alpha, w.beta

    if method == "poisson":
        pb = poisson_schur_bound(src, w)
        r1 = math.sqrt(CUTOFF_LOG / be) + 1
        r2 = math.sqrt(CUTOFF_LOG / al) + 1
        k_all = enumerate_in_box(_dual(src), (-r1, r1, -r2, r2))
        k_all = k_all[np.any(np.abs(k_all) > 1e-12, axis=1)]
        job = lambda nu: _schur_one_nu_poisson(src, w, nu, step, k_all)
    else:
        pb = poisson_schur_bound(src, w) if is_lat else None
        rx = 2 * math.sqrt(CUTOFF_LOG / al)
        ry = 2 * math.sqrt(CUTOFF_LOG / be)

        def job(nu):
            n1, n2 = nu
            box = (n1 - rx, n1 + rx, n2 - ry, n2 + ry)
            lbox = (n1 - rx / 2 - 1, n1 + rx / 2 + 1, n2 - ry / 2 - 1, n2 + ry / 2 + 1)
            ps = qmc_weights(src, lbox) if is_lat else src.points_in_box(lbox)
            val = _schur_one_nu_direct(ps.points, ps.weights, w, nu, step, box)
            # both terms of e are bounded by Gaussians of rates (alpha/2, beta/2) around nu
            tail = 4 * math.pi / math.sqrt(al * be) * _box_tail(al / 2, be / 2, n1, n2, box)
            return val, tail

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            res = list(pool.map(job, nu_points))
    else:
        res = [job(nu) for nu in nu_points]
    vals = np.array([r[0] for r in res])
    tails = np.array([r[1] for r in res])
    per_nu = np.column_stack([nu_points, vals])
    return SchurEstimate(float(vals.max()), per_nu, float(tails.max()), 0, pb)


# ---------------------------------------------------------------------------
# empirical frame bounds


@dataclass(frozen=True)
class FrameModel:
    """Finite model of ``L^2(R)``: a uniform time grid and a Hermite test subspace.

    ``time_span``/``freq_span`` of ``None`` are derived from the window and
    the subspace: concentration radius plus a margin of ``margin_widths``
    window widths on each side.
    """

    signal_length: int | None = None
    time_span: float | None = None
    freq_span: float | None = None
    test_subspace_dim: int = 12
    iterations: int = 100000
    margin_widths: float = 5.0
    seed: int = 0


@dataclass(frozen=True)
class FrameBounds:
    A_emp: float
    B_emp: float
    power_A: float
    power_B: float
    power_iterations: tuple[int, int]
    boundary_influence: float   # spectral norm of the contribution from the outermost atom shell
    atoms: int
    phase_box: tuple[float, float, float, float]
    notes: str = field(default="")


class PhaseSpaceError(ValueError):
    pass


def hermite_functions(t, s: float, n: int) -> np.ndarray:
    """First ``n`` Hermite functions matched to ``exp(-pi t^2 / (2 s^2))``, shape ``(n, len(t))``, unit L^2 norm."""
    u = np.asarray(t, dtype=float) * math.sqrt(math.pi) / s
    out = np.empty((n, len(u)))
    out[0] = math.pi ** -0.25 * np.exp(-u * u / 2)
    if n > 1:
        out[1] = math.sqrt(2.0) * u * out[0]
    for k in range(1, n - 1):
        out[k + 1] = math.sqrt(2 / (k + 1)) * u * out[k] - math.sqrt(k / (k + 1)) * out[k - 1]
    return out * (math.pi ** 0.5 / s) ** 0.5


def _power(apply, d, rng, iterations, tol=1e-8):
    x = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    x /= np.linalg.norm(x)
    r_old = None
    for it in range(1, iterations + 1):
        y = apply(x)
        r = float(np.real(np.vdot(x, y)))
        ny = np.linalg.norm(y)
        if ny == 0:
            return 0.0, it
        x = y / ny
        if r_old is not None and abs(r - r_old) <= tol * abs(r):
            return r, it
        r_old = r
    raise RuntimeError(f"power iteration did not stagnate within {iterations} iterations")


def empirical_frame_bounds(lat: Lattice, a: float, w: GaussianWindow, model: FrameModel = FrameModel(),
                           weights: float | None = None, chunk: int = 4096) -> FrameBounds:
    """Extreme Rayleigh quotients of ``S f = sum a_l <f, psi_l> psi_l`` on a Hermite test subspace.

    Atoms ``psi_l = pi(l) g_tau`` are sampled on the model's time grid for
    every ``l ∈ a * lat`` inside the phase-space box; weights default to
    ``det(a * lat)``.  Power iteration runs on the compressed operator and on
    ``c I - S`` with ``c = 2 B_guess``; the dense eigenvalues of the
    compression are returned as ``A_emp``, ``B_emp`` and the power-iteration
    values are kept for comparison.
    """
    if not a > 0:
        raise ValueError("scale must be positive")
    d = model.test_subspace_dim
    if d < 1:
        raise ValueError("test subspace dimension must be >= 1")
    s = w.sigma_eff
    sf = 1 / (2 * s)  # width of the window's Fourier transform in the same convention
    spread = math.sqrt((2 * d + 1) / math.pi)
    rt = s * spread + model.margin_widths * s
    rw = sf * spread + model.margin_widths * sf
    T = model.time_span if model.time_span is not None else 2 * (rt + w.support_radius())
    n = model.signal_length if model.signal_length is not None else int(2 ** math.ceil(math.log2(4 * T * (rw + 4 * sf))))
    dt = T / n
    nyq = 1 / (2 * dt)
    W = model.freq_span if model.freq_span is not None else 2 * rw
    if T / 2 < rt + w.support_radius():
        raise PhaseSpaceError(f"time span {T:.4g} too small: need {2 * (rt + w.support_radius()):.4g}")
    if nyq < W / 2 + 6 * sf:
        raise PhaseSpaceError(f"signal_length {n} too small: Nyquist {nyq:.4g} below {W / 2 + 6 * sf:.4g}")
    t = (np.arange(n) - n // 2) * dt
    H = hermite_functions(t, s, d)
    # orthonormalize on the grid (discretization makes them very nearly so already)
    Q, _ = np.linalg.qr((H * math.sqrt(dt)).T)
    Hq = Q.T / math.sqrt(dt)  # (d, n), orthonormal under the dt-weighted inner product

    lam_all = (lat.rescale(a)).points_in_box((-rt, rt, -W / 2, W / 2)).points
    if len(lam_all) == 0:
        raise PhaseSpaceError("no lattice points in the phase-space box")
    wt = float(lat.rescale(a).det if weights is None else weights)
    shell = (np.abs(lam_all[:, 0]) > rt - s) | (np.abs(lam_all[:, 1]) > W / 2 - sf)
    C = np.empty((len(lam_all), d), dtype=complex)
    for i0 in range(0, len(lam_all), chunk):
        lam = lam_all[i0:i0 + chunk]
        atoms = w.sample(t[None, :] - lam[:, :1]) * np.exp(2j * math.pi * lam[:, 1:] * t[None, :])
        C[i0:i0 + chunk] = np.conj(atoms) @ Hq.T * dt  # <h_j, psi_l>
    Cw = math.sqrt(wt) * C
    G = Cw.conj().T @ Cw
    G = (G + G.conj().T) / 2
    ev = np.linalg.eigvalsh(G)
    Gs = Cw[shell].conj().T @ Cw[shell]
    influence = float(np.linalg.norm(Gs, 2)) if shell.any() else 0.0

    rng = np.random.default_rng(model.seed)
    apply = lambda x: G @ x
    pB, itB = _power(apply, d, rng, model.iterations)
    c = 2 * pB
    pc, itA = _power(lambda x: c * x - apply(x), d, rng, model.iterations)
    pA = c - pc
    return FrameBounds(float(ev[0]), float(ev[-1]), pA, pB, (itA, itB), influence, len(lam_all),
                       (-rt, rt, -W / 2, W / 2),
                       notes="Rayleigh quotients restricted to the test subspace; truncation allowance 0.05")


def apply_frame_operator(lat: Lattice, a: float, w: GaussianWindow, t, f, box, weights: float | None = None):
    """``S f`` on the grid ``t`` with atoms from ``a * lat`` inside ``box`` (matrix-free, chunked)."""
    t = np.asarray(t, dtype=float)
    dt = float(t[1] - t[0])
    lam_all = lat.rescale(a).points_in_box(box).points
    wt = float(lat.rescale(a).det if weights is None else weights)
    out = np.zeros(len(t), dtype=complex)
    for i0 in range(0, len(lam_all), 2048):
        lam = lam_all[i0:i0 + 2048]
        atoms = w.sample(t[None, :] - lam[:, :1]) * np.exp(2j * math.pi * lam[:, 1:] * t[None, :])
        coef = np.conj(atoms) @ f * dt
        out += wt * (coef @ atoms)
    return out


def report_row(cert: Certificate, lattice_name: str, omega_num: float | None = None,
               delta: float = 0.05) -> dict:
    """Flat record for the certificate CSV."""
    return {
        "lattice": lattice_name,
        "a": cert.scale,
        "tau": cert.tau,
        "sigma": cert.sigma,
        "D_low": cert.discrepancy.lower_bound,
        "D_est": cert.discrepancy.estimate,
        "omega_closed": omega_gaussian_closed(cert.sigma * cert.tau),
        "omega_numeric": omega_num if omega_num is not None else "",
        "epsilon": cert.epsilon,
        "eps_optimistic": cert.eps_optimistic,
        "A": cert.A,
        "B": cert.B,
        "valid": cert.valid,
        "dilation_uniform": cert.dilation_uniform,
        "delta": delta,
    }


__all__ = [
    "Certificate", "certificate", "dilation_uniform_certificate", "find_certifiable_scale",
    "NotAdmissibleError", "SchurEstimate", "schur_epsilon", "poisson_schur_bound",
    "FrameModel", "FrameBounds", "PhaseSpaceError", "empirical_frame_bounds", "hermite_functions",
    "apply_frame_operator", "report_row", "PointSet",
]
