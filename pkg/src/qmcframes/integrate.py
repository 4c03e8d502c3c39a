"""Adaptive tensor Gauss-Legendre integration on rectangles."""
from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import leggauss


class IntegrationError(RuntimeError):
    pass


def _panel_rule(f, x0, x1, y0, y1, nodes, weights):
    # x0.. are (P,) arrays of panel edges; returns (P,) integrals
    hx = (x1 - x0) / 2
    hy = (y1 - y0) / 2
    X = (x0 + x1)[:, None, None] / 2 + hx[:, None, None] * nodes[None, :, None]
    Y = (y0 + y1)[:, None, None] / 2 + hy[:, None, None] * nodes[None, None, :]
    X, Y = np.broadcast_arrays(X, Y)
    vals = f(X, Y)
    return (vals * weights[None, :, None] * weights[None, None, :]).sum(axis=(1, 2)) * hx * hy


def integrate_2d(f, box, abs_tol: float = 1e-10, order: int = 12, initial: int = 4, max_level: int = 14):
    """Integrate a vectorized ``f(X, Y)`` over ``box = (x0, x1, y0, y1)``.

    Panels are bisected in both directions until the change from splitting a
    panel is below its share (by area) of ``abs_tol``.  Returns
    ``(value, error_estimate)``.
    """
    nodes, weights = leggauss(order)
    x0, x1, y0, y1 = (float(v) for v in box)
    total_area = (x1 - x0) * (y1 - y0)
    ex = np.linspace(x0, x1, initial + 1)
    ey = np.linspace(y0, y1, initial + 1)
    gx0, gy0 = np.meshgrid(ex[:-1], ey[:-1], indexing="ij")
    gx1, gy1 = np.meshgrid(ex[1:], ey[1:], indexing="ij")
    P = [a.ravel() for a in (gx0, gx1, gy0, gy1)]
    coarse = _panel_rule(f, *P, nodes, weights)
    value = 0.0
    err = 0.0
    for level in range(max_level + 1):
        px0, px1, py0, py1 = P
        mx, my = (px0 + px1) / 2, (py0 + py1) / 2
        cx0 = np.concatenate([px0, mx, px0, mx])
        cx1 = np.concatenate([mx, px1, mx, px1])
        cy0 = np.concatenate([py0, py0, my, my])
        cy1 = np.concatenate([my, my, py1, py1])
        child = _panel_rule(f, cx0, cx1, cy0, cy1, nodes, weights)
        n = len(px0)
        fine = child[:n] + child[n:2 * n] + child[2 * n:3 * n] + child[3 * n:]
        diff = np.abs(fine - coarse)
        share = abs_tol * (px1 - px0) * (py1 - py0) / total_area
        ok = diff <= share
        if level == max_level:
            ok[:] = True
        value = value + fine[ok].sum()
        err += diff[ok].sum()
        bad = ~ok
        if not bad.any():
            break
        idx = np.concatenate([np.flatnonzero(bad) + k * n for k in range(4)])
        P = [cx0[idx], cx1[idx], cy0[idx], cy1[idx]]
        coarse = child[idx]
    if err > 100 * abs_tol:
        raise IntegrationError(f"adaptive integration did not converge (error estimate {err:.3g})")
    return value, err


def gauss_legendre_grid(lo: float, hi: float, panels: int, order: int = 16):
    """Composite Gauss-Legendre nodes and weights on ``[lo, hi]``."""
    nodes, weights = leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    h = np.diff(edges) / 2
    mid = (edges[:-1] + edges[1:]) / 2
    x = (mid[:, None] + h[:, None] * nodes[None, :]).ravel()
    w = (h[:, None] * weights[None, :]).ravel()
    return x, w
