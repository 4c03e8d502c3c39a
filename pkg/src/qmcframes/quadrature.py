"""Weighted QMC quadrature over the whole plane.

The weight of a sampling point ``lam`` is ``a_lam = ∫ chi(lam ∈ rho + [0,1]^2) / N_rho d rho``
where ``N_rho`` counts sampling points in the closed unit square at ``rho``.
On ``lam - [0,1]^2`` the count ``N_rho`` is constant on the cells cut out
by the coordinates ``p`` and ``p - 1`` of nearby points, so the integral is
a finite sum over those cells.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .discrepancy import CoverageError
from .functions import SmoothFn2D
from .integrate import integrate_2d
from .lattice import BOX_TOL, Lattice, PointSet, as_point_source

SQRT2_HALF = math.sqrt(2.0) / 2


def box_count(src, rho) -> int:
    """Number of points of ``src`` in the closed square ``rho + [0,1]^2`` (0 flags a coverage gap)."""
    rx, ry = float(rho[0]), float(rho[1])
    return len(as_point_source(src).points_in_box((rx, rx + 1.0, ry, ry + 1.0)))


def _anchor_cells(anchor_box, pts: np.ndarray):
    """Cells of constant ``N_rho`` for anchors ``rho`` in ``anchor_box``.

    A point ``p`` lies in ``rho + [0,1]^2`` iff ``rho_x ∈ [p_x - 1, p_x]`` and
    likewise in y, so ``N_rho`` only changes at those coordinates.  Returns
    ``(xb, yb, counts, area)`` with counts accumulated in a 2D difference array.
    """
    x0, x1, y0, y1 = anchor_box
    xb = np.unique(np.clip(np.concatenate([[x0, x1], pts[:, 0], pts[:, 0] - 1.0]), x0, x1))
    yb = np.unique(np.clip(np.concatenate([[y0, y1], pts[:, 1], pts[:, 1] - 1.0]), y0, y1))
    nx, ny = len(xb) - 1, len(yb) - 1
    diff = np.zeros((nx + 1, ny + 1))
    i0 = np.clip(np.searchsorted(xb, pts[:, 0] - 1.0 - BOX_TOL, side="left"), 0, nx)
    i1 = np.clip(np.searchsorted(xb, pts[:, 0] + BOX_TOL, side="right") - 1, 0, nx)
    j0 = np.clip(np.searchsorted(yb, pts[:, 1] - 1.0 - BOX_TOL, side="left"), 0, ny)
    j1 = np.clip(np.searchsorted(yb, pts[:, 1] + BOX_TOL, side="right") - 1, 0, ny)
    keep = (i1 > i0) & (j1 > j0)
    np.add.at(diff, (i0[keep], j0[keep]), 1)
    np.add.at(diff, (i1[keep], j0[keep]), -1)
    np.add.at(diff, (i0[keep], j1[keep]), -1)
    np.add.at(diff, (i1[keep], j1[keep]), 1)
    counts = diff.cumsum(0).cumsum(1)[:nx, :ny]
    area = np.outer(np.diff(xb), np.diff(yb))
    return xb, yb, counts, area


def _first_gap(xb, yb, counts, area):
    bad = (area > 0) & (counts < 0.5)
    if not bad.any():
        return None
    i, j = np.argwhere(bad)[0]
    return (xb[i] + xb[i + 1]) / 2, (yb[j] + yb[j + 1]) / 2


def coverage_gap(src, anchor_box):
    """An anchor in ``anchor_box`` whose unit square is empty, or None.

    For a lattice pass any box containing a fundamental cell; the check is
    then global because ``N_rho`` is periodic.
    """
    x0, x1, y0, y1 = anchor_box
    pts = as_point_source(src).points_in_box((x0, x1 + 1.0, y0, y1 + 1.0)).points
    return _first_gap(*_anchor_cells(anchor_box, pts))


def lattice_coverage_gap(lat: Lattice):
    G = lat.reduced_generator()
    corners = G @ np.array([[0, 1, 0, 1], [0, 0, 1, 1]], dtype=float)
    box = (corners[0].min(), corners[0].max(), corners[1].min(), corners[1].max())
    return coverage_gap(lat, box)


def _sweep_weight(lam: np.ndarray, nbrs: np.ndarray) -> float:
    lx, ly = lam
    xb, yb, counts, area = _anchor_cells((lx - 1.0, lx, ly - 1.0, ly), nbrs)
    live = area > 0
    gap = _first_gap(xb, yb, counts, area)
    if gap is not None:
        raise CoverageError(gap)
    return float((area[live] / counts[live]).sum())


def qmc_weights(src, region, method: str = "auto", check_coverage: bool = True) -> PointSet:
    """Sampling points of ``src`` in ``region`` with their QMC weights.

    ``method="auto"`` uses ``det`` directly for lattices and the exact cell
    sweep otherwise; ``method="sweep"`` always sweeps.  With
    ``check_coverage`` every anchor square that can influence a weight in
    the region (all squares, for a lattice) must contain a point, otherwise
    :class:`CoverageError` is raised.
    """
    if method not in ("auto", "sweep"):
        raise ValueError(f"unknown method {method!r}")
    src = as_point_source(src)
    if check_coverage:
        if isinstance(src, Lattice):
            gap = lattice_coverage_gap(src)
        else:
            x0, x1, y0, y1 = region
            gap = coverage_gap(src, (x0 - 1.0, x1, y0 - 1.0, y1))
        if gap is not None:
            raise CoverageError(gap)
    pts = src.points_in_box(region).points
    if method == "auto" and isinstance(src, Lattice):
        return PointSet(pts, np.full(len(pts), src.det))
    w = np.empty(len(pts))
    for k, lam in enumerate(pts):
        nbrs = src.points_in_box((lam[0] - 1.0, lam[0] + 1.0, lam[1] - 1.0, lam[1] + 1.0)).points
        w[k] = _sweep_weight(lam, nbrs)
    return PointSet(pts, w)


@dataclass(frozen=True)
class QuadratureResult:
    error: complex          # ∫h - Σ a_lam h(lam)
    integral: complex
    qmc_sum: complex
    tail_budget: float      # bound on |truncation effect| of integral and sum together
    radius: float
    n_points: int


def _sum_tail(env, R: float) -> float:
    # Σ_{|lam-c|>R} a_lam E(|lam-c|) for QMC weights: average over each
    # anchor square is at most its max, and the square has radius sqrt(2)/2
    f = lambda r: 2 * math.pi * r * env(max(R, r - SQRT2_HALF))
    val, _ = quad(f, max(R - SQRT2_HALF, 0.0), np.inf, limit=200)
    return val


def _int_tail(env, R: float) -> float:
    val, _ = quad(lambda r: 2 * math.pi * r * env(r), R, np.inf, limit=200)
    return val


def quadrature_error(h: SmoothFn2D, points, truncation_radius: float | None = None,
                     tol: float = 1e-12, abs_tol: float = 1e-10) -> QuadratureResult:
    """Weighted quadrature error ``e(h, points) = ∫ h - Σ a_lam h(lam)``.

    ``points`` is a :class:`Lattice` (weights ``det``) or a weighted
    :class:`PointSet`.  Both the sum and, if no exact integral is known, the
    integral are cut at ``truncation_radius`` around ``h.center``; the
    envelope tails of both go into ``tail_budget``.  Without a radius the
    smallest one with ``tail_budget <= tol`` is used.
    """
    cx, cy = h.center
    if truncation_radius is None:
        R = h.cutoff_radius(tol / 4) + SQRT2_HALF
    else:
        R = float(truncation_radius)
    if not R > 0:
        raise ValueError("truncation radius must be positive")
    tail = _sum_tail(h.envelope, R)
    if h.exact_integral is not None:
        integral = complex(h.exact_integral)
    else:
        val, err = integrate_2d(lambda x, y: h(x, y), (cx - R, cx + R, cy - R, cy + R), abs_tol=abs_tol)
        integral = complex(val)
        tail += _int_tail(h.envelope, R) + err
    if truncation_radius is None and tail > tol:
        raise ValueError(f"truncation budget {tail:.3g} exceeds tolerance {tol:.3g}")
    box = (cx - R, cx + R, cy - R, cy + R)
    ps = as_point_source(points).points_in_box(box)
    p = ps.points
    inside = (p[:, 0] - cx) ** 2 + (p[:, 1] - cy) ** 2 <= R * R
    p, w = p[inside], ps.weights[inside]
    vals = w * h(p[:, 0], p[:, 1])
    s = complex(np.sum(vals)) if len(vals) else 0j
    return QuadratureResult(integral - s, integral, s, float(tail), R, int(len(p)))


def partial_l1_norms(h: SmoothFn2D, abs_tol: float = 1e-9) -> tuple[float, float, float]:
    """L1 norms of ``d1 h``, ``d2 h``, ``d12 h`` over the plane.

    Uses ``h.exact_partial_l1`` if available, else adaptive integration on a
    square around ``h.center`` sized by the partial-derivative envelope.
    """
    if h.exact_partial_l1 is not None:
        return tuple(float(v) for v in h.exact_partial_l1)
    return numeric_partial_l1(h, abs_tol)


def numeric_partial_l1(h: SmoothFn2D, abs_tol: float = 1e-9) -> tuple[float, float, float]:
    cx, cy = h.center
    R = h.cutoff_radius(abs_tol / 10, which="partials")
    box = (cx - R, cx + R, cy - R, cy + R)
    out = []
    for d in (h.d1, h.d2, h.d12):
        val, _ = integrate_2d(lambda x, y, d=d: np.abs(d(x, y)), box, abs_tol=abs_tol)
        out.append(float(val))
    return tuple(out)


def kh_bound(h: SmoothFn2D, d_star: float) -> float:
    """Koksma-Hlawka right-hand side ``D* (|d1 h|_1 + |d2 h|_1 + |d12 h|_1)``."""
    if not 0.0 <= d_star <= 1.0:
        raise ValueError("discrepancy must lie in [0, 1]")
    if d_star == 0.0:
        return 0.0
    return d_star * sum(partial_l1_norms(h))


def local_error(h: SmoothFn2D, src, rho, abs_tol: float = 1e-10) -> complex:
    """Cell error ``∫_{rho+[0,1]^2} h - (1/N_rho) sum_{lam in rho+[0,1]^2} h(lam)``.

    Integrating this over all anchors ``rho`` gives ``e(h, src)`` when the
    source is covered.
    """
    rx, ry = float(rho[0]), float(rho[1])
    box = (rx, rx + 1.0, ry, ry + 1.0)
    pts = as_point_source(src).points_in_box(box).points
    if len(pts) == 0:
        raise CoverageError((rx, ry))
    re, _ = integrate_2d(lambda x, y: np.real(h(x, y)), box, abs_tol=abs_tol)
    im, _ = integrate_2d(lambda x, y: np.imag(h(x, y)), box, abs_tol=abs_tol)
    return complex(re, im) - complex(np.mean(h(pts[:, 0], pts[:, 1])))


def read_pointset_csv(path) -> PointSet:
    """``x,y,weight`` rows (``#`` comments and a header row allowed); weight defaults to 1."""
    import csv

    pts, wts = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            if not pts and row[0].strip() == "x":
                continue
            if len(row) not in (2, 3):
                raise ValueError(f"bad point row {row!r}")
            pts.append((float(row[0]), float(row[1])))
            wts.append(float(row[2]) if len(row) == 3 else 1.0)
    return PointSet(np.array(pts, dtype=float).reshape(-1, 2), np.array(wts, dtype=float))


def write_pointset_csv(path, ps: PointSet) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x,y,weight\n")
        for (x, y), w in zip(ps.points, ps.weights):
            fh.write(f"{x:.17g},{y:.17g},{w:.17g}\n")
