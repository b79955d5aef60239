"""Smooth test energies on R^n, line talwegs and stability probes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from ..core import EnergyOracle
from ..mms import MMConfig, ProxOracle, evolve

__all__ = ["SmoothEnergy", "GradientCheckError", "make_energy", "ENERGIES", "LineTalweg",
           "smooth_line_talweg", "StabilityReport", "stability_probe", "sphere_samples"]


class GradientCheckError(ValueError):
    """Declared gradient disagrees with finite differences of the value."""


@dataclass
class SmoothEnergy:
    """``C^2`` energy with gradient, optional Hessian at ``phi`` and modulus ``lam``.

    The gradient is checked against central differences on seeded random
    probes at construction (relative error at most ``1e-5``).
    """

    dim: int
    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    phi: np.ndarray
    lam: Optional[float] = None
    hess_phi: Optional[np.ndarray] = None
    name: str = "smooth"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        rng = np.random.default_rng(12345)
        for _ in range(8):
            x = self.phi + rng.uniform(-1.0, 1.0, self.dim)
            g = np.asarray(self.grad(x), dtype=float)
            fd = np.empty(self.dim)
            for i in range(self.dim):
                h = 1e-6 * (1.0 + abs(x[i]))
                e = np.zeros(self.dim)
                e[i] = h
                fd[i] = (self.value(x + e) - self.value(x - e)) / (2 * h)
            err = np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-8)
            if err > 1e-5:
                raise GradientCheckError(f"{self.name}: gradient check failed ({err:.2e})")

    def slope(self, x) -> float:
        return float(np.linalg.norm(self.grad(np.asarray(x, dtype=float))))

    def oracle(self) -> EnergyOracle:
        return EnergyOracle(lambda x: float(self.value(np.asarray(x, dtype=float))), self.phi,
                            lam=self.lam, slope=self.slope, name=self.name)


def _quadratic(dim=2, Q=None, b=None, **_):
    Q = np.eye(dim) if Q is None else np.asarray(Q, dtype=float).reshape(dim, dim)
    b = np.zeros(dim) if b is None else np.asarray(b, dtype=float)
    if not np.allclose(Q, Q.T):
        raise ValueError("Q must be symmetric")
    w = np.linalg.eigvalsh(Q)
    if w.min() <= 0:
        raise ValueError("Q must be positive definite")
    phi = np.linalg.solve(Q, b)
    return SmoothEnergy(dim, lambda x: 0.5 * x @ Q @ x - b @ x, lambda x: Q @ x - b, phi,
                        float(w.min()), Q, "quadratic", {"Q": Q.tolist(), "b": b.tolist()})


def _quartic(dim=2, **_):
    return SmoothEnergy(dim, lambda x: 0.25 * float(x @ x) ** 2, lambda x: float(x @ x) * x,
                        np.zeros(dim), 0.0, np.zeros((dim, dim)), "quartic")


def _coscup(dim=2, **_):
    # sum of 1 - cos(x_i): nonconvex away from the minimum at 0
    return SmoothEnergy(dim, lambda x: float(np.sum(1.0 - np.cos(x))), lambda x: np.sin(x),
                        np.zeros(dim), None, np.eye(dim), "coscup")


def _saddle(dim=2, **_):
    s = np.ones(dim)
    s[1:] = -1.0
    return SmoothEnergy(dim, lambda x: float(np.sum(s * x * x)), lambda x: 2 * s * x,
                        np.zeros(dim), None, np.diag(2 * s), "saddle")


def _polynomial(dim=2, coeffs=(0.0, 0.0, 0.5), phi=None, **_):
    """Separable ``sum_i P(x_i)`` with ``P = sum_k coeffs[k] t^k``."""
    P = np.polynomial.Polynomial(np.asarray(coeffs, dtype=float))
    dP, d2P = P.deriv(), P.deriv(2)
    if phi is None:
        crit = [z.real for z in dP.roots() if abs(z.imag) < 1e-12 and d2P(z.real) > 0]
        if not crit:
            raise ValueError("polynomial has no strict local minimum")
        t = min(crit, key=lambda z: (P(z), z))
        phi = np.full(dim, t)
    phi = np.asarray(phi, dtype=float)
    return SmoothEnergy(dim, lambda x: float(np.sum(P(x))), lambda x: dP(x), phi, None,
                        np.diag(d2P(phi)), "polynomial", {"coeffs": list(map(float, coeffs))})


ENERGIES = {"quadratic": _quadratic, "quartic": _quartic, "coscup": _coscup,
            "polynomial": _polynomial, "saddle": _saddle}


def make_energy(name: str, **kw) -> SmoothEnergy:
    """Instantiate an energy from the registry."""
    if name not in ENERGIES:
        raise ValueError(f"unknown energy {name!r}; known: {sorted(ENERGIES)}")
    return ENERGIES[name](**kw)


@dataclass
class LineTalweg:
    """Straight talweg ``x(r) = phi + r (v0 - phi)`` with its certificate."""

    r: np.ndarray
    h: np.ndarray
    slopes: np.ndarray
    increasing: bool
    C_line: float
    C_ball: float
    taylor: list
    ball_radius: float

    @property
    def C(self) -> float:
        return max(self.C_line, self.C_ball)

    def to_dict(self) -> dict:
        return {"C": self.C, "C_line": self.C_line, "C_ball": self.C_ball,
                "increasing": self.increasing, "ball_radius": self.ball_radius,
                "taylor": self.taylor, "alpha": 0.5}


def sphere_samples(dim: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` uniform directions on the unit sphere."""
    z = rng.standard_normal((n, dim))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def smooth_line_talweg(E: SmoothEnergy, phi, v0, delta: float, n: int = 200,
                       n_ball: int = 2000, seed: int = 0) -> LineTalweg:
    """Tabulate ``h(r) = E(x(r)|phi)`` on ``(0, delta]`` and fit the LS(1/2) constant.

    The certificate is ``1 <= C |E'(v)| E(v|phi)^(-1/2)``; ``C_line`` is the
    smallest such ``C`` along the line and ``C_ball`` on seeded samples of the
    ball of radius ``delta |v0 - phi|``. ``taylor`` lists ``h(d)/d^2`` for
    ``d = delta, delta/2, ...`` next to its limit ``<E''(phi) e, e>/2``.

    Raises
    ------
    ValueError
        If ``v0 = phi`` or ``h`` is not strictly increasing on the grid.
    """
    phi = np.asarray(phi, dtype=float)
    e = np.asarray(v0, dtype=float) - phi
    if not np.linalg.norm(e) > 0:
        raise ValueError("degenerate direction: v0 equals phi")
    e_phi = E.value(phi)
    r = np.linspace(delta / n, delta, n)
    h = np.array([E.value(phi + t * e) - e_phi for t in r])
    g = np.array([E.slope(phi + t * e) for t in r])
    increasing = bool(np.all(np.diff(h) > 0) and h[0] > 0)
    if not increasing:
        raise ValueError("h is not strictly increasing: example hypotheses violated")
    C_line = float(np.max(np.sqrt(h) / g))
    rad = delta * float(np.linalg.norm(e))
    rng = np.random.default_rng(seed)
    pts = phi + sphere_samples(E.dim, n_ball, rng) * (rad * rng.uniform(0, 1, (n_ball, 1))
                                                       ** (1.0 / E.dim))
    hb = np.array([E.value(x) - e_phi for x in pts])
    gb = np.array([E.slope(x) for x in pts])
    ok = (hb > 0) & (gb > 0)
    C_ball = float(np.max(np.sqrt(hb[ok]) / gb[ok])) if np.any(ok) else 0.0
    taylor = []
    if E.hess_phi is not None:
        lim = 0.5 * float(e @ E.hess_phi @ e)
        d = delta
        for _ in range(6):
            taylor.append({"delta": d, "ratio": (E.value(phi + d * e) - e_phi) / d ** 2,
                           "limit": lim})
            d /= 2
    return LineTalweg(r, h, g, increasing, C_line, C_ball, taylor, rad)


def _prox(E: SmoothEnergy):
    def solve(tau, v, p):
        v = np.asarray(v, dtype=float)

        def f(u):
            d = u - v
            n = float(np.linalg.norm(d))
            return n ** p / (p * tau ** (p - 1)) + E.value(u)

        def jac(u):
            d = u - v
            n = float(np.linalg.norm(d))
            return (n ** (p - 2) if n > 0 else 0.0) * d / tau ** (p - 1) + E.grad(u)

        x0 = v - tau * E.grad(v) if p == 2 else v
        if f(x0) > f(v):
            x0 = v
        res = minimize(f, x0, jac=jac, method="BFGS", options={"gtol": 1e-12})
        return res.x if res.fun <= f(v) else v
    return solve


@dataclass
class StabilityReport:
    """Excursions per ``delta`` and the verdict per ``eps``."""

    deltas: list
    excursions: list
    local_min_gap: float
    local_min: bool
    verdicts: dict

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def stability_probe(E: SmoothEnergy, phi, eps: Sequence[float], deltas: Sequence[float],
                    tau: float = 0.05, horizon: float = 3.0, p: float = 2.0,
                    seed: int = 0) -> StabilityReport:
    """Empirical Lyapunov stability of ``phi`` under the minimizing-movement flow.

    From ``16 * dim`` seeded points on the sphere of radius ``delta`` the
    flow runs to ``horizon``; the excursion is ``sup_t |v(t) - phi|``.
    ``STABLE`` for a given ``eps`` iff some ``delta`` keeps every excursion
    below ``eps``. The local-minimum probe compares ``E`` on all sampled
    spheres with ``E(phi)``.
    """
    phi = np.asarray(phi, dtype=float)
    rng = np.random.default_rng(seed)
    dirs = sphere_samples(E.dim, 16 * E.dim, rng)
    prox = ProxOracle(_prox(E), tolerance=1e-9)
    oracle = E.oracle()
    cfg = MMConfig(p=p, tau=tau, horizon=horizon, refine_levels=1, record_slopes=False)
    e_phi = E.value(phi)
    excursions, gap = [], math.inf
    for d in deltas:
        worst = 0.0
        for u in dirs:
            x0 = phi + d * u
            gap = min(gap, E.value(x0) - e_phi)
            traj = evolve(prox, oracle, x0, cfg)
            worst = max(worst, max(float(np.linalg.norm(s - phi)) for s in traj.states))
        excursions.append(worst)
    verdicts = {}
    for e_ in eps:
        good = [d for d, x in zip(deltas, excursions) if x < e_]
        verdicts[float(e_)] = {"verdict": "STABLE" if good else "UNSTABLE",
                               "delta": max(good) if good else None}
    return StabilityReport(list(map(float, deltas)), excursions, float(gap), bool(gap >= 0),
                           verdicts)
