"""Star, anchored, shift and dilation discrepancy of planar point sets.

Boxes are closed throughout.  The exact unit-square routine evaluates both
the closed-count and the open-count envelope at every critical corner, so a
point sitting on a box edge is handled for either boundary convention.

The shift discrepancy (a supremum over all anchors in the plane) is only
*estimated*: for a lattice the anchored discrepancy is periodic, so anchors
are drawn from one fundamental cell, first on a uniform grid and then around
the best candidates, including anchors nudged to either side of the
positions where a lattice point enters or leaves the unit square.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from numba import njit

from .lattice import BOX_TOL, Lattice, in_closed_box


class CoverageError(ValueError):
    """A unit square ``rho + [0,1]^2`` contains no sampling point."""

    def __init__(self, rho):
        self.rho = (float(rho[0]), float(rho[1]))
        super().__init__(f"unit square anchored at rho=({self.rho[0]:.17g}, {self.rho[1]:.17g}) "
                         "contains no point (N_rho = 0)")


# ---------------------------------------------------------------------------
# unit square


def _grid_values(v: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Distinct sorted coordinates (merged within tol, with 0 and 1 added) and ranks of v."""
    allv = np.concatenate([v, [0.0, 1.0]])
    order = np.argsort(allv, kind="stable")
    sv = allv[order]
    new = np.empty(len(sv), dtype=bool)
    new[0] = True
    new[1:] = np.diff(sv) > tol
    group = np.cumsum(new) - 1
    grid = sv[new]
    ranks = np.empty(len(allv), dtype=np.int64)
    ranks[order] = group
    return grid, ranks[: len(v)]


@njit(cache=True)
def _star_sweep(xs, ys, ix, iy, n):  # pragma: no cover - compiled
    # points sorted by x-rank; col[j] counts points seen so far with y-rank j
    nx, ny, m = len(xs), len(ys), len(ix)
    col = np.zeros(ny, np.int64)
    prev = np.zeros(ny, np.int64)
    cur = np.zeros(ny, np.int64)
    best = 0.0
    p = 0
    for i in range(nx):
        while p < m and ix[p] == i:
            col[iy[p]] += 1
            p += 1
        run = 0
        xi = xs[i]
        for j in range(ny):
            run += col[j]
            cur[j] = run
            area = xi * ys[j]
            over = run / n - area
            opened = prev[j - 1] if j > 0 else 0
            under = area - opened / n
            if over > best:
                best = over
            if under > best:
                best = under
        prev, cur = cur, prev
    return best


def star_discrepancy_unit(points, n: int | None = None, tol: float = BOX_TOL) -> float:
    """Exact star discrepancy of a point list in ``[0,1]^2``.

    ``sup_eta |#(P ∩ [0,eta]) / n - eta_1 eta_2|`` with closed boxes; ``n``
    defaults to ``len(points)``.  At every corner of the grid spanned by the
    point coordinates (plus 0 and 1) the closed count bounds the excess and
    the open count bounds the deficit.  ``O(len(points)^2)``.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("empty point set")
    if n is None:
        n = len(pts)
    if n < 1:
        raise ValueError("normalizer must be >= 1")
    if np.any(pts < -tol) or np.any(pts > 1 + tol):
        raise ValueError("points must lie in the unit square")
    pts = np.clip(pts, 0.0, 1.0)
    xs, ix = _grid_values(pts[:, 0], tol)
    ys, iy = _grid_values(pts[:, 1], tol)
    # merging may have moved an end of the grid by < tol; pin it
    xs[0], xs[-1], ys[0], ys[-1] = 0.0, 1.0, 0.0, 1.0
    order = np.argsort(ix, kind="stable")
    return float(_star_sweep(xs, ys, ix[order], iy[order], float(n)))


# ---------------------------------------------------------------------------
# anchored


def _source_points(src, box) -> np.ndarray:
    return src.points_in_box(box).points


def anchored_discrepancy(src, rho) -> float:
    """``D*_rho``: star discrepancy of ``src ∩ (rho + [0,1]^2)`` moved to the origin.

    The normalizer is the number of points in the closed unit square; an
    empty square raises :class:`CoverageError`.
    """
    rx, ry = float(rho[0]), float(rho[1])
    pts = _source_points(src, (rx, rx + 1.0, ry, ry + 1.0))
    if len(pts) == 0:
        raise CoverageError((rx, ry))
    return star_discrepancy_unit(pts - np.array([rx, ry]), len(pts))


class _AnchorEvaluator:
    """Anchored discrepancies of one point cloud at many anchors."""

    def __init__(self, pts: np.ndarray, workers: int = 1):
        self.pts = pts
        self.workers = max(1, int(workers))
        order = np.argsort(pts[:, 0], kind="stable")
        self.sx = pts[order]

    def one(self, rho) -> float:
        rx, ry = rho
        lo = np.searchsorted(self.sx[:, 0], rx - BOX_TOL, side="left")
        hi = np.searchsorted(self.sx[:, 0], rx + 1.0 + BOX_TOL, side="right")
        strip = self.sx[lo:hi]
        mask = (strip[:, 1] >= ry - BOX_TOL) & (strip[:, 1] <= ry + 1.0 + BOX_TOL)
        local = strip[mask]
        if len(local) == 0:
            raise CoverageError(rho)
        return star_discrepancy_unit(local - np.array([rx, ry]), len(local))

    def many(self, anchors: np.ndarray) -> np.ndarray:
        anchors = np.asarray(anchors, dtype=float).reshape(-1, 2)
        if self.workers == 1 or len(anchors) < 64:
            return np.array([self.one(a) for a in anchors])
        # fixed chunking keeps the result independent of scheduling
        chunks = np.array_split(anchors, self.workers * 4)
        with ThreadPoolExecutor(self.workers) as pool:
            parts = list(pool.map(lambda c: np.array([self.one(a) for a in c]), chunks))
        return np.concatenate(parts)


# ---------------------------------------------------------------------------
# shift / dilation


@dataclass(frozen=True)
class DiscrepancyEstimate:
    """Estimated ``D*_shift`` (or ``D*_dil``) with its evidence.

    ``lower_bound`` is the maximum over the uniform anchor grid, ``estimate``
    the maximum after local refinement.  Both are attained anchored
    discrepancies, hence lower bounds for the true supremum.
    """

    lower_bound: float
    estimate: float
    grid_resolution: float
    anchors_evaluated: int
    argmax_anchor: tuple[float, float]
    scale: float = 1.0
    tau: float = 1.0
    per_tau: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if not (0.0 <= self.lower_bound <= self.estimate <= 1.0 + 1e-12):
            raise ValueError(f"inconsistent estimate {self.lower_bound} / {self.estimate}")


NUDGE = 1e-9  # must stay well above BOX_TOL


def _event_coordinates(pts: np.ndarray, rho: np.ndarray, radius: float, limit: int) -> tuple[np.ndarray, np.ndarray]:
    """Anchor coordinates near rho at which some point sits on a square edge."""
    rx, ry = rho
    near_y = (pts[:, 1] >= ry - radius) & (pts[:, 1] <= ry + 1.0 + radius)
    near_x = (pts[:, 0] >= rx - radius) & (pts[:, 0] <= rx + 1.0 + radius)
    xs = np.concatenate([pts[near_y, 0], pts[near_y, 0] - 1.0])
    ys = np.concatenate([pts[near_x, 1], pts[near_x, 1] - 1.0])
    xs = xs[np.abs(xs - rx) <= radius]
    ys = ys[np.abs(ys - ry) <= radius]
    xs = np.unique(xs[np.argsort(np.abs(xs - rx), kind="stable")][:limit])
    ys = np.unique(ys[np.argsort(np.abs(ys - ry), kind="stable")][:limit])
    return xs, ys


def _event_anchors(pts, rho, radius, limit=4) -> np.ndarray:
    xs, ys = _event_coordinates(pts, rho, radius, limit)
    cx = np.concatenate([[rho[0]], xs - NUDGE, xs + NUDGE])
    cy = np.concatenate([[rho[1]], ys - NUDGE, ys + NUDGE])
    gx, gy = np.meshgrid(cx, cy, indexing="ij")
    out = np.column_stack([gx.ravel(), gy.ravel()])
    return out[1:]  # drop rho itself, already evaluated


def shift_discrepancy(lat: Lattice, grid_resolution: float = 1 / 64, refinement_rounds: int = 3, *,
                      candidates: int = 8, workers: int = 1) -> DiscrepancyEstimate:
    """Estimate ``D*_shift(lat) = sup_rho D*_rho(lat)``.

    Anchors ``rho = G (s, t)`` with ``G`` a reduced generator and ``(s, t)``
    on a uniform grid of step ``grid_resolution`` in ``[0,1)^2``.  Each
    refinement round takes the ``candidates`` best anchors so far, evaluates
    a 9x9 local grid at a quarter of the current step plus anchors nudged to
    both sides of nearby entry/exit events, and shrinks the step by 4.
    """
    if not (grid_resolution > 0 and math.isfinite(grid_resolution)):
        raise ValueError("grid_resolution must be positive")
    if refinement_rounds < 0:
        raise ValueError("refinement_rounds must be >= 0")
    G = lat.reduced_generator()
    n = max(1, int(round(1.0 / grid_resolution)))
    diam = float(np.abs(G).sum(axis=1).max())  # covers both fundamental-cell diagonals
    margin = 2.0 * diam + 1e-6
    corners = G @ np.array([[0, 1, 0, 1], [0, 0, 1, 1]], dtype=float)
    box = (corners[0].min() - margin, corners[0].max() + 1.0 + margin,
           corners[1].min() - margin, corners[1].max() + 1.0 + margin)
    pts = lat.points_in_box(box).points
    ev = _AnchorEvaluator(pts, workers)

    st = (np.arange(n) / n)
    ss, tt = np.meshgrid(st, st, indexing="ij")
    fd = np.column_stack([ss.ravel(), tt.ravel()])
    anchors = fd @ G.T
    vals = ev.many(anchors)
    lower = float(vals.max())
    all_fd, all_vals = fd, vals
    step = 1.0 / n
    for _ in range(refinement_rounds):
        order = np.argsort(-all_vals, kind="stable")[:candidates]
        new_fd = []
        k = np.arange(-4, 5) / 4.0 * step
        kx, ky = np.meshgrid(k, k, indexing="ij")
        local = np.column_stack([kx.ravel(), ky.ravel()])
        for i in order:
            new_fd.append(all_fd[i] + local)
            rho = all_fd[i] @ G.T
            radius = step * diam
            ea = _event_anchors(pts, rho, radius)
            if len(ea):
                new_fd.append(ea @ np.linalg.inv(G).T)
        new_fd = np.concatenate(new_fd)
        new_vals = ev.many(new_fd @ G.T)
        all_fd = np.concatenate([all_fd, new_fd])
        all_vals = np.concatenate([all_vals, new_vals])
        step /= 4.0
    best = int(np.argmax(all_vals))
    arg = all_fd[best] @ G.T
    return DiscrepancyEstimate(
        lower_bound=lower,
        estimate=float(all_vals[best]),
        grid_resolution=float(grid_resolution),
        anchors_evaluated=int(len(all_vals)),
        argmax_anchor=(float(arg[0]), float(arg[1])),
        scale=lat.scale,
        tau=lat.tau,
    )


def dilation_discrepancy(lat: Lattice, a: float, tau_samples: Sequence[float], **kwargs) -> DiscrepancyEstimate:
    """Maximum of the shift discrepancy of ``a * Gamma_tau`` over the sampled ``tau``.

    This is a lower bound for ``D*_dil(a Gamma)``; ``tau`` of the returned
    estimate is the maximizing sample and ``per_tau`` holds every run.
    """
    if not a > 0:
        raise ValueError("scale must be positive")
    taus = [float(t) for t in tau_samples]
    if not taus or any(not t > 0 for t in taus):
        raise ValueError("tau samples must be non-empty and positive")
    runs = [shift_discrepancy(lat.rescale(a).dilate(t), **kwargs) for t in taus]
    best = max(range(len(runs)), key=lambda i: (runs[i].estimate, -i))
    r = runs[best]
    return replace(r,
                   lower_bound=max(x.lower_bound for x in runs),
                   estimate=r.estimate,
                   anchors_evaluated=sum(x.anchors_evaluated for x in runs),
                   per_tau=tuple(runs))


@dataclass(frozen=True)
class DecayFit:
    slope: float
    c_hat: float
    table: list  # list of DiscrepancyEstimate, one per scale


def admissible_rate(a):
    """Reference decay ``a^2 ln(2 + 1/a)``."""
    a = np.asarray(a, dtype=float)
    return a**2 * np.log(2.0 + 1.0 / a)


def decay_fit(lat: Lattice, a_list: Sequence[float], **kwargs) -> DecayFit:
    """Fit ``log D*_shift(a lat)`` against ``log a`` by least squares.

    ``c_hat`` is ``max_a D* / (a^2 ln(2 + 1/a))``.
    """
    a_list = [float(a) for a in a_list]
    if len(a_list) < 4:
        raise ValueError("insufficient points for fit: need at least 4 scales")
    if any(not 0 < a < 1 for a in a_list):
        raise ValueError("scales must lie in (0, 1)")
    table = [shift_discrepancy(lat.rescale(a), **kwargs) for a in a_list]
    d = np.array([t.estimate for t in table])
    la = np.log(a_list)
    slope = float(np.polyfit(la, np.log(d), 1)[0])
    c_hat = float(np.max(d / admissible_rate(np.array(a_list))))
    return DecayFit(slope, c_hat, table)
