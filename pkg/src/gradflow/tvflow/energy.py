"""Discrete total variation and its difference operators.

In 1D the energy is the sum of absolute jumps. In 2D it is the isotropic
forward-difference TV weighted by ``h``. Dirichlet functions are padded by
a ghost layer of zeros so the boundary trace enters as extra jumps.
"""

from __future__ import annotations

import numpy as np

from .grid import GridFunction

__all__ = ["tv_energy", "grad1d", "grad2d", "grad2d_adjoint"]


def grad1d(w: np.ndarray, dirichlet: bool) -> np.ndarray:
    """Jumps of a 1D array: ``n + 1`` (Dirichlet, zero padded) or ``n - 1``."""
    if dirichlet:
        return np.diff(np.concatenate([[0.0], w, [0.0]]))
    return np.diff(w)


def grad2d(w: np.ndarray, dirichlet: bool):
    """Forward differences in both axes.

    Dirichlet returns ``(n + 1, m + 1)`` fields over the grid plus one ghost
    row and column; Neumann returns ``(n, m)`` fields with zero differences
    across the far boundary.
    """
    if dirichlet:
        P = np.pad(w, 1)
        return P[1:, :-1] - P[:-1, :-1], P[:-1, 1:] - P[:-1, :-1]
    dx = np.zeros_like(w)
    dy = np.zeros_like(w)
    dx[:-1] = w[1:] - w[:-1]
    dy[:, :-1] = w[:, 1:] - w[:, :-1]
    return dx, dy


def grad2d_adjoint(px: np.ndarray, py: np.ndarray, dirichlet: bool) -> np.ndarray:
    """Adjoint of :func:`grad2d` (a negative discrete divergence)."""
    if dirichlet:
        n1, m1 = px.shape
        Q = np.zeros((n1 + 1, m1 + 1))
        Q[1:, :-1] += px
        Q[:-1, :-1] -= px
        Q[:-1, 1:] += py
        Q[:-1, :-1] -= py
        return Q[1:-1, 1:-1]
    Q = np.zeros_like(px)
    Q[1:] += px[:-1]
    Q[:-1] -= px[:-1]
    Q[:, 1:] += py[:, :-1]
    Q[:, :-1] -= py[:, :-1]
    return Q


def tv_energy(u: GridFunction) -> float:
    """Total variation, including the boundary trace for Dirichlet data."""
    d = u.bc == "dirichlet"
    if u.dims == 1:
        return float(np.sum(np.abs(grad1d(u.values, d))))
    dx, dy = grad2d(u.values, d)
    return float(u.h * np.sum(np.sqrt(dx * dx + dy * dy)))
