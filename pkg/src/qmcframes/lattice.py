"""Planar lattices ``a * Gamma_tau`` and finite weighted point sets.

A lattice is stored as a 2x2 basis whose *columns* are the generators,
together with a scale ``a`` and an area-preserving dilation ``tau``.  The
effective generator matrix is ``diag(a*tau, a/tau) @ basis``.

Lattice points are always produced from integer coefficient vectors; no
point is ever obtained by accumulating floating-point steps.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .surd import QuadraticSurd

PHI = (1.0 + math.sqrt(5.0)) / 2.0
INV_PHI = PHI - 1.0

# Closed boxes everywhere: a coordinate within BOX_TOL of an edge counts as inside.
BOX_TOL = 1e-12

Box = tuple[float, float, float, float]  # (x0, x1, y0, y1)


def _check_box(box: Box) -> Box:
    x0, x1, y0, y1 = (float(v) for v in box)
    if not all(math.isfinite(v) for v in (x0, x1, y0, y1)):
        raise ValueError(f"box must be finite, got {box}")
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate box {box}")
    return x0, x1, y0, y1


def in_closed_box(points: np.ndarray, box: Box, tol: float = BOX_TOL) -> np.ndarray:
    x0, x1, y0, y1 = box
    px, py = points[:, 0], points[:, 1]
    return (px >= x0 - tol) & (px <= x1 + tol) & (py >= y0 - tol) & (py <= y1 + tol)


@dataclass(frozen=True, eq=False)
class PointSet:
    """Finite point list in the plane with positive quadrature weights."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(w) != len(pts):
            raise ValueError("points and weights differ in length")
        if np.any(~np.isfinite(pts)):
            raise ValueError("non-finite point coordinates")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def unweighted(cls, points) -> "PointSet":
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        return cls(pts, np.ones(len(pts)))

    def __len__(self) -> int:
        return len(self.points)

    def points_in_box(self, box: Box) -> "PointSet":
        box = _check_box(box)
        mask = in_closed_box(self.points, box)
        return PointSet(self.points[mask], self.weights[mask])

    def with_weights(self, weights) -> "PointSet":
        return PointSet(self.points, weights)


@dataclass(frozen=True, eq=False)
class PointUnion:
    """Superposition of point sources, e.g. a lattice plus a few extra points."""

    sources: tuple

    def points_in_box(self, box: Box) -> PointSet:
        parts = [s.points_in_box(box) for s in self.sources]
        pts = np.concatenate([p.points for p in parts]) if parts else np.empty((0, 2))
        w = np.concatenate([p.weights for p in parts]) if parts else np.empty(0)
        return PointSet(pts, w)


@dataclass(frozen=True, eq=False)
class Lattice:
    """The point set ``a * Gamma_tau`` with ``Gamma = basis @ Z^2``."""

    basis: np.ndarray
    scale: float = 1.0
    tau: float = 1.0
    # optional exact entries (r, s, u, v) of the basis as quadratic surds
    exact: tuple | None = None

    def __post_init__(self):
        if self.exact is not None and len(self.exact) != 4:
            raise ValueError("exact basis needs four entries (r, s, u, v)")
        b = np.array(self.basis, dtype=float).reshape(2, 2)
        if not np.all(np.isfinite(b)):
            raise ValueError("basis entries must be finite")
        if abs(np.linalg.det(b)) <= 1e-14 * max(1.0, np.abs(b).max() ** 2):
            raise ValueError("singular basis")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ValueError("scale must be positive")
        if not (math.isfinite(self.tau) and self.tau > 0):
            raise ValueError("tau must be positive")
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)
        object.__setattr__(self, "scale", float(self.scale))
        object.__setattr__(self, "tau", float(self.tau))

    @property
    def generator(self) -> np.ndarray:
        """Effective generator matrix (columns span ``a * Gamma_tau``)."""
        a, t = self.scale, self.tau
        return np.array([[a * t], [a / t]]) * self.basis

    @property
    def det(self) -> float:
        return self.scale**2 * abs(float(np.linalg.det(self.basis)))

    def dilate(self, tau: float) -> "Lattice":
        return Lattice(self.basis, self.scale, self.tau * tau, self.exact)

    def rescale(self, a: float) -> "Lattice":
        return Lattice(self.basis, self.scale * a, self.tau, self.exact)

    def reduced_generator(self) -> np.ndarray:
        return lattice_reduce_cached(self)[0]

    def points_in_box(self, box: Box) -> PointSet:
        pts = enumerate_in_box(self, box)
        return PointSet(pts, np.full(len(pts), self.det))

    def describe(self) -> str:
        b = self.basis
        return (f"basis=[[{b[0, 0]:.17g},{b[0, 1]:.17g}],[{b[1, 0]:.17g},{b[1, 1]:.17g}]]"
                f" a={self.scale:.17g} tau={self.tau:.17g}")


def make_lattice(basis, a: float = 1.0, tau: float = 1.0) -> Lattice:
    return Lattice(np.asarray(basis, dtype=float), a, tau)


def golden_lattice() -> Lattice:
    one = QuadraticSurd.rational(1)
    inv_phi = QuadraticSurd.golden_ratio().inverse()
    return Lattice(np.array([[1.0, INV_PHI], [-INV_PHI, 1.0]]), exact=(one, inv_phi, -inv_phi, one))


def integer_lattice() -> Lattice:
    return Lattice(np.eye(2))


def lagrange_reduce(gen: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Lagrange-Gauss reduction of a 2D basis given as columns.

    Returns ``(reduced, U)`` with ``reduced = gen @ U`` and ``U`` an integer
    unimodular matrix.
    """
    gen = np.asarray(gen, dtype=float)
    U = np.eye(2, dtype=np.int64)
    if gen[:, 0] @ gen[:, 0] > gen[:, 1] @ gen[:, 1]:
        U = U[:, ::-1].copy()
    for _ in range(200):
        b1, b2 = gen @ U[:, 0], gen @ U[:, 1]
        mu = round(float(b1 @ b2) / float(b1 @ b1))
        U[:, 1] -= mu * U[:, 0]
        b2 = gen @ U[:, 1]
        if b2 @ b2 >= b1 @ b1:
            break
        U = U[:, ::-1].copy()
    return gen @ U, U


def enumerate_in_box(lat: Lattice, box: Box) -> np.ndarray:
    """All lattice points inside the closed box, shape (n, 2).

    The box corners are pulled back through a reduced basis, the integer
    coefficients covering that parallelogram are enumerated, and the points
    are filtered against the box.
    """
    box = _check_box(box)
    gen = lat.generator
    red, U = lattice_reduce_cached(lat)
    inv = np.linalg.inv(red)
    x0, x1, y0, y1 = box
    corners = np.array([[x0, x0, x1, x1], [y0, y1, y0, y1]])
    coef = inv @ corners
    lo = np.floor(coef.min(axis=1) - 1e-9).astype(np.int64)
    hi = np.ceil(coef.max(axis=1) + 1e-9).astype(np.int64)
    if (hi[0] - lo[0] + 1) * (hi[1] - lo[1] + 1) > 50_000_000:
        raise ValueError("box too large for enumeration")
    kk = np.mgrid[lo[0]:hi[0] + 1, lo[1]:hi[1] + 1].reshape(2, -1)
    mn = U @ kk  # integer coefficients w.r.t. the original generator
    pts = (np.outer(mn[0], gen[:, 0]) + np.outer(mn[1], gen[:, 1]))
    return pts[in_closed_box(pts, box)]


def lattice_reduce_cached(lat: Lattice) -> tuple[np.ndarray, np.ndarray]:
    cached = lat.__dict__.get("_reduced")
    if cached is None:
        cached = lagrange_reduce(lat.generator)
        object.__setattr__(lat, "_reduced", cached)
    return cached


class AdmissibilityMargin(NamedTuple):
    margin: float
    coefficient_bound: int


def admissibility_margin(lat: Lattice, M: int) -> AdmissibilityMargin:
    """Minimum of ``|g1 * g2|`` over nonzero lattice vectors with ``|m|, |n| <= M``.

    This is an upper bound for the lattice norm ``inf |g1 g2|`` and never a
    proof of admissibility.  For each ``m`` the product is a quadratic in
    ``n`` with roots ``-m r/s`` and ``-m u/v``, so the minimum of its modulus
    over integers sits next to a root or at the box edge.

    Lattices carrying an exact surd basis get their smallest float candidates
    re-evaluated exactly; otherwise the result carries float cancellation
    error of order ``M**2 * eps``.
    """
    M = int(M)
    if M < 1:
        raise ValueError("M must be >= 1")
    (r, s), (u, v) = lat.generator
    m = np.arange(-M, M + 1, dtype=float)
    cands = [np.full_like(m, -M), np.full_like(m, M), np.full_like(m, -1.0), np.full_like(m, 1.0)]
    for num, den in ((r, s), (u, v)):
        if den != 0.0:
            root = -m * num / den
            cands += [np.floor(root), np.ceil(root)]
    n = np.clip(np.stack(cands), -M, M)
    mm = np.broadcast_to(m, n.shape)
    g1 = mm * r + n * s
    g2 = mm * u + n * v
    prod = np.abs(g1 * g2)
    prod[(mm == 0) & (n == 0)] = np.inf
    if lat.exact is None:
        return AdmissibilityMargin(float(prod.min()), M)
    flat = prod.ravel()
    k = min(256, flat.size)
    idx = np.argpartition(flat, k - 1)[:k]
    er, es, eu, ev = lat.exact
    best = None
    for i in idx:
        mi, ni = int(mm.ravel()[i]), int(n.ravel()[i])
        if mi == 0 and ni == 0:
            continue
        val = abs((er * mi + es * ni) * (eu * mi + ev * ni))
        if best is None or val < best:
            best = val
    return AdmissibilityMargin(float(best) * lat.scale**2, M)


# --- lattice config text format -------------------------------------------

_TOKENS = {"phi": PHI, "inv_phi": INV_PHI, "sqrt2": math.sqrt(2.0)}


def _parse_scalar(tok: str) -> float:
    tok = tok.strip()
    sign = 1.0
    if tok.startswith("-"):
        sign, tok = -1.0, tok[1:].strip()
    elif tok.startswith("+"):
        tok = tok[1:].strip()
    if tok in _TOKENS:
        return sign * float(f"{_TOKENS[tok]:.17g}")
    try:
        val = float(tok)
    except ValueError:
        raise ValueError(f"bad number {tok!r} in lattice config") from None
    if not math.isfinite(val):
        raise ValueError(f"non-finite number {tok!r} in lattice config")
    return sign * val


def parse_lattice_config(text: str) -> Lattice:
    """Parse ``basis = [[r, s], [u, v]]``, ``a = ...``, ``tau = ...`` lines."""
    vals: dict[str, object] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"cannot parse line {raw!r}")
        key, rhs = (p.strip() for p in line.split("=", 1))
        if key in vals:
            raise ValueError(f"duplicate key {key!r}")
        if key == "basis":
            m = re.fullmatch(r"\[\s*\[([^\]]*)\]\s*,\s*\[([^\]]*)\]\s*\]", rhs)
            if not m:
                raise ValueError(f"bad basis {rhs!r}")
            rows = [[_parse_scalar(t) for t in grp.split(",")] for grp in m.groups()]
            if any(len(row) != 2 for row in rows):
                raise ValueError("basis must be 2x2")
            vals[key] = rows
        elif key in ("a", "tau"):
            vals[key] = _parse_scalar(rhs)
        else:
            raise ValueError(f"unknown key {key!r} in lattice config")
    if "basis" not in vals:
        raise ValueError("lattice config needs a basis")
    return make_lattice(vals["basis"], vals.get("a", 1.0), vals.get("tau", 1.0))


def format_lattice_config(lat: Lattice) -> str:
    b = lat.basis
    return (f"basis = [[{b[0, 0]:.17g}, {b[0, 1]:.17g}], [{b[1, 0]:.17g}, {b[1, 1]:.17g}]]\n"
            f"a = {lat.scale:.17g}\ntau = {lat.tau:.17g}\n")


def lattice_from_name(name: str, a: float = 1.0, tau: float = 1.0) -> Lattice:
    """``golden``, ``zsq`` or a path to a lattice config file."""
    if name == "golden":
        base = golden_lattice()
    elif name == "zsq":
        base = integer_lattice()
    else:
        with open(name, encoding="utf-8") as fh:
            base = parse_lattice_config(fh.read())
    return Lattice(base.basis, base.scale * a, base.tau * tau, base.exact)


def as_point_source(src: "Lattice | PointSet | PointUnion | Sequence"):
    if isinstance(src, (Lattice, PointSet, PointUnion)):
        return src
    return PointUnion(tuple(src))
