"""Free energies ``H_F + H_V + H_W`` in quantile coordinates.

With gaps ``g_j = X_{j+1} - X_j`` and densities ``rho_j = 1/(M g_j)`` the
discrete free energy is

    E_M(X) = sum_j g_j F(rho_j) + (1/M) sum_i V(X_i)
             + 1/(2 M^2) sum_{i,k} W(X_i - X_k).

Its gradient times ``M`` is the Lagrangian velocity field

    xi_i = M (P(rho_{i}) - P(rho_{i-1})) + V'(X_i) + (1/M) sum_k W'(X_i - X_k),

(pressure ``P(s) = s F'(s) - F(s)``, zero outside the support), which is the
quantile form of ``grad P(rho)/rho + grad V + grad W * rho``. The Fisher
information is ``(1/M) sum |xi_i|^p'``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .quantile import QuantileRepr

__all__ = [
    "Internal",
    "Potential",
    "FreeEnergySpec",
    "FisherInfo",
    "entropy",
    "power",
    "quadratic_potential",
    "linear_potential",
    "preset",
    "free_energy",
    "energy_array",
    "velocity",
    "fisher_information",
    "gap_min",
]


@dataclass(frozen=True)
class Internal:
    """Internal energy density ``F`` with pressure ``P`` and ``P'``."""

    F: Callable[[np.ndarray], np.ndarray]
    P: Callable[[np.ndarray], np.ndarray]
    dP: Callable[[np.ndarray], np.ndarray]
    name: str
    superlinear: bool = True


def entropy() -> Internal:
    """``F(s) = s log s``, pressure ``P(s) = s``."""
    return Internal(lambda s: s * np.log(s), lambda s: s, lambda s: np.ones_like(s), "s log s")


def power(m: float, a: Optional[float] = None) -> Internal:
    """``F(s) = a s^m`` with ``a = 1/(m-1)`` by default; ``P(s) = a (m-1) s^m``."""
    if m <= 1:
        raise ValueError("power internal energy needs m > 1")
    a = 1.0 / (m - 1.0) if a is None else a
    k = a * (m - 1.0)
    return Internal(lambda s: a * s ** m, lambda s: k * s ** m,
                    lambda s: k * m * s ** (m - 1.0), f"{a:g} s^{m:g}")


@dataclass(frozen=True)
class Potential:
    """Scalar function with two derivatives, a convexity modulus and a domain."""

    f: Callable[[np.ndarray], np.ndarray]
    df: Callable[[np.ndarray], np.ndarray]
    d2f: Callable[[np.ndarray], np.ndarray]
    lam: Optional[float]
    name: str
    domain: tuple = (-math.inf, math.inf)


def quadratic_potential(kappa: float = 1.0, center: float = 0.0, p: float = 2.0) -> Potential:
    """``kappa/2 (x - center)^2``.

    The declared modulus follows ``f(y) - f(x) >= f'(x)(y - x) + lam |y - x|^p``,
    which for ``p = 2`` gives ``lam = kappa/2``; other ``p`` admit no positive
    modulus and get ``lam = 0``.
    """
    lam = 0.5 * kappa if p == 2 else 0.0
    return Potential(lambda x: 0.5 * kappa * (x - center) ** 2, lambda x: kappa * (x - center),
                     lambda x: np.full_like(x, kappa, dtype=float), lam,
                     f"{kappa:g}/2 (x - {center:g})^2")


def linear_potential(slope: float, domain: tuple = (-math.inf, math.inf)) -> Potential:
    """``slope * x`` restricted to ``domain`` (``+inf`` outside)."""
    return Potential(lambda x: slope * x, lambda x: np.full_like(x, slope, dtype=float),
                     lambda x: np.zeros_like(x, dtype=float), 0.0, f"{slope:g} x", tuple(domain))


@dataclass
class FreeEnergySpec:
    """Internal energy, confinement and interaction of a free energy.

    Any of the three parts may be ``None``. ``W`` must be even.
    """

    F: Optional[Internal] = None
    V: Optional[Potential] = None
    W: Optional[Potential] = None
    name: str = "free-energy"
    hypotheses: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.W is not None:
            x = np.linspace(-3.0, 3.0, 13)
            if not np.allclose(self.W.f(x), self.W.f(-x), rtol=1e-12, atol=1e-12):
                raise ValueError("interaction potential must be even")
        if self.F is not None:
            z = np.array([1e-300])
            if abs(float(self.F.F(z)[0])) > 1e-200:
                raise ValueError("internal energy must vanish at zero density")

    @property
    def lambda_V(self) -> Optional[float]:
        return None if self.V is None else self.V.lam

    def describe(self) -> dict:
        return {"name": self.name,
                "F": None if self.F is None else self.F.name,
                "V": None if self.V is None else self.V.name,
                "W": None if self.W is None else self.W.name,
                "lambda_V": self.lambda_V,
                "lambda_W": None if self.W is None else self.W.lam,
                "hypotheses": self.hypotheses}


def preset(name: str, **kw) -> FreeEnergySpec:
    """Named free energies.

    ``fokker-planck`` (kappa), ``porous-medium`` (m, kappa),
    ``doubly-nonlinear`` (p, m: ``F = s^q/(q-1)``, ``q = m + 2 - p``, no
    confinement) and ``drift-interaction`` (kappa, w: entropy, quadratic
    confinement and interaction ``w x^2 / 2``).
    """
    name = name.lower()
    p = float(kw.get("p", 2.0))
    kappa = float(kw.get("kappa", 1.0))
    if name == "fokker-planck":
        return FreeEnergySpec(entropy(), quadratic_potential(kappa, kw.get("center", 0.0), p), None,
                              name, {"F": True, "V": True, "W": True})
    if name == "porous-medium":
        m = float(kw.get("m", 2.0))
        return FreeEnergySpec(power(m), quadratic_potential(kappa, 0.0, p), None, name,
                              {"F": True, "V": True, "W": True})
    if name == "doubly-nonlinear":
        m = float(kw.get("m", 2.0))
        q = m + 2.0 - p
        F = entropy() if q == 1 else power(q)
        return FreeEnergySpec(F, None, None, name, {"F": True, "V": False, "W": True})
    if name == "drift-interaction":
        w = float(kw.get("w", 1.0))
        W = Potential(lambda x: 0.5 * w * x * x, lambda x: w * x,
                      lambda x: np.full_like(x, w, dtype=float), 0.5 * w if p == 2 else 0.0,
                      f"{w:g}/2 x^2")
        return FreeEnergySpec(entropy(), quadratic_potential(kappa, 0.0, p), W, name,
                              {"F": True, "V": True, "W": True})
    raise ValueError(f"unknown preset {name!r}")


def gap_min(X: np.ndarray) -> float:
    """Smallest admissible gap: ``1e-8 * width / M``."""
    return 1e-8 * max(float(X[-1] - X[0]), 1e-300) / X.size


def energy_array(spec: FreeEnergySpec, X: np.ndarray) -> float:
    """Discrete free energy of a quantile array; ``inf`` when inadmissible."""
    M = X.size
    g = np.diff(X)
    total = 0.0
    if spec.F is not None:
        if np.any(g <= gap_min(X)):
            return math.inf
        rho = 1.0 / (M * g)
        total += float(np.sum(g * spec.F.F(rho)))
    elif np.any(g < 0):
        return math.inf
    if spec.V is not None:
        lo, hi = spec.V.domain
        if X[0] < lo or X[-1] > hi:
            return math.inf
        total += float(np.mean(spec.V.f(X)))
    if spec.W is not None:
        total += 0.5 * float(np.mean(spec.W.f(X[:, None] - X[None, :])))
    return total


def free_energy(spec: FreeEnergySpec, X: QuantileRepr) -> float:
    """Free energy of a quantile representation (``inf`` outside the domain).

    Raises
    ------
    ValueError
        If some gap is below ``gap_min`` while an internal energy is present.
    """
    if spec.F is not None and np.any(np.diff(X.X) <= gap_min(X.X)):
        raise ValueError("degenerate quantile gaps: density blow-up")
    return energy_array(spec, X.X)


def velocity(spec: FreeEnergySpec, X: np.ndarray) -> np.ndarray:
    """Lagrangian velocity field ``xi`` (``M`` times the energy gradient)."""
    M = X.size
    xi = np.zeros(M)
    if spec.F is not None:
        rho = 1.0 / (M * np.diff(X))
        pr = np.concatenate([[0.0], spec.F.P(rho), [0.0]])
        xi += M * (pr[1:] - pr[:-1])
    if spec.V is not None:
        xi += spec.V.df(X)
    if spec.W is not None:
        xi += np.mean(spec.W.df(X[:, None] - X[None, :]), axis=1)
    return xi


def hessian_parts(spec: FreeEnergySpec, X: np.ndarray):
    """``M`` times the Hessian as tridiagonal part plus optional dense part."""
    M = X.size
    diag = np.zeros(M)
    off = np.zeros(M - 1)
    if spec.F is not None:
        g = np.diff(X)
        rho = 1.0 / (M * g)
        c = M * rho * spec.F.dP(rho) / g
        diag[:-1] += c
        diag[1:] += c
        off -= c
    if spec.V is not None:
        diag += spec.V.d2f(X)
    dense = None
    if spec.W is not None:
        H = spec.W.d2f(X[:, None] - X[None, :]) / M
        dense = -H
        dense[np.diag_indices(M)] += np.sum(H, axis=1)
    return diag, off, dense


@dataclass
class FisherInfo:
    """Fisher information ``I``, slope ``I^(1/p')`` and the velocity field."""

    I: float
    slope: float
    xi: np.ndarray
    windowed_mass: float = 1.0


def fisher_information(spec: FreeEnergySpec, X: QuantileRepr, q: float = 2.0,
                       window: float = 0.0) -> FisherInfo:
    """Generalized Fisher information ``(1/M) sum |xi_i|^q`` with ``q = p'``.

    ``window`` trims that fraction of the mass from each end of the support
    before averaging; the retained fraction is returned as
    ``windowed_mass``. Edge quantiles carry the largest discretization error,
    so the windowed value isolates the interior behaviour.

    Raises
    ------
    ValueError
        If the density cannot be reconstructed (gaps below ``gap_min``).
    """
    if spec.F is not None and np.any(np.diff(X.X) <= gap_min(X.X)):
        raise ValueError("density reconstruction failed: degenerate gaps")
    if not 0.0 <= window < 0.5:
        raise ValueError("window must lie in [0, 1/2)")
    xi = velocity(spec, X.X)
    k = int(math.floor(window * X.M))
    kept = np.abs(xi[k:X.M - k]) ** q
    I = float(np.sum(kept)) / X.M
    return FisherInfo(I, I ** (1.0 / q), xi, kept.size / X.M)
