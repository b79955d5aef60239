"""Decay and extinction predictions from a Lojasiewicz-Simon inequality.

Given ``E(v|phi)^(1-alpha) <= c * g(v)`` along a p-gradient flow, the
distance to phi is controlled by ``H(t) = (c/alpha) * E(v(t)|phi)^alpha``,
which obeys

    -H' >= K * H^((1-alpha)/(alpha(p-1))),
    K = (alpha^(1-alpha) / c)^(1/(alpha(p-1))).

Three regimes follow: polynomial decay (alpha < 1/p), exponential decay
(alpha = 1/p) and extinction in finite time (alpha > 1/p).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import Trajectory

__all__ = [
    "DecayPrediction",
    "ComparisonReport",
    "predict",
    "compare",
    "extinction_bound_inf",
    "extinction_bound_profile",
    "classify",
]

_BOUNDARY_TOL = 1e-12


def classify(p: float, alpha: float) -> str:
    """Regime name for exponent ``alpha`` and growth ``p``."""
    x = alpha * p
    if abs(x - 1.0) <= _BOUNDARY_TOL:
        return "exponential"
    return "polynomial" if x < 1.0 else "extinction"


@dataclass
class DecayPrediction:
    """Upper bound on ``d(v(t), phi)`` for ``t >= t0``.

    ``t_hat`` and ``c_tilde`` are the closed-form extinction deadline and
    prefactor. ``t_hat_ode`` is the zero of the integrated comparison
    inequality started from ``H(t0) = (c/alpha) E0^alpha``; the returned
    ``bound`` uses it so that ``bound(t0) = H(t0)``.
    """

    regime: str
    p: float
    alpha: float
    c: float
    t0: float
    E0: float
    K: float
    H0: float
    rate: Optional[float] = None
    c_tilde: Optional[float] = None
    t_hat: Optional[float] = None
    t_hat_ode: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def bound(self, t):
        """Evaluate the bound at scalar or array ``t`` (clamped to ``t >= t0``)."""
        t = np.asarray(t, dtype=float)
        s = np.maximum(t - self.t0, 0.0)
        p, a = self.p, self.alpha
        if self.H0 == 0.0:
            out = np.zeros_like(s)
        elif self.regime == "exponential":
            out = self.H0 * np.exp(-self.rate * s)
        elif self.regime == "polynomial":
            # H0 (1 + K gam s H0^gam)^(-1/gam), in logs since K and H0^gam
            # leave floating range for small alpha (p - 1)
            gam = (1.0 - p * a) / (a * (p - 1.0))
            log_k = (1.0 - a) * math.log(a) / (a * (p - 1.0)) - math.log(self.c) / (a * (p - 1.0))
            with np.errstate(divide="ignore"):
                z = log_k + math.log(gam) + gam * math.log(self.H0) + np.log(s)
            out = self.H0 * np.exp(-np.logaddexp(0.0, z) / gam)
        else:
            beta = (p * a - 1.0) / (a * (p - 1.0))
            left = np.maximum(self.t_hat_ode - self.t0 - s, 0.0)
            out = self.c_tilde * left ** (1.0 / beta)
        return out if out.ndim else float(out)

    def to_dict(self) -> dict:
        return {
            "regime": self.regime, "p": self.p, "alpha": self.alpha, "c": self.c,
            "t0": self.t0, "E0": self.E0, "K": self.K, "H0": self.H0,
            "rate": self.rate, "t_hat": self.t_hat, "c_tilde": self.c_tilde,
            "t_hat_ode": self.t_hat_ode, **self.meta,
        }


def predict(p: float, alpha: float, c: float, t0: float = 0.0, E0: float = 1.0) -> DecayPrediction:
    """Closed-form decay prediction.

    Parameters
    ----------
    p : float
        Growth exponent of the flow, ``p > 1``.
    alpha : float
        Lojasiewicz exponent in ``(0, 1]``.
    c : float
        Lojasiewicz constant.
    t0 : float
        Anchor time.
    E0 : float
        Relative entropy at ``t0``.
    """
    if not p > 1:
        raise ValueError("p must exceed 1")
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if not c > 0:
        raise ValueError("c must be positive")
    if E0 < 0:
        raise ValueError("E0 must be nonnegative")
    regime = classify(p, alpha)
    q = p / (p - 1.0)
    K = (alpha ** (1.0 - alpha) / c) ** (1.0 / (alpha * (p - 1.0)))
    H0 = (c / alpha) * E0 ** alpha
    pred = DecayPrediction(regime, p, alpha, c, t0, E0, K, H0)
    if regime == "exponential":
        pred.rate = 1.0 / (p * c ** q)
    elif regime == "polynomial":
        pred.rate = (alpha * (p - 1.0)) / (1.0 - p * alpha)
        pred.meta["anchor"] = "bound(t0) = (c/alpha) E0^alpha, integrated comparison ODE"
    else:
        beta = (p * alpha - 1.0) / (alpha * (p - 1.0))
        pred.c_tilde = (K * beta) ** (1.0 / beta)
        pred.t_hat = t0 + (alpha ** ((alpha - 1.0) / (alpha * (p - 1.0)))
                           * c ** (1.0 / (alpha * (p - 1.0)))
                           * (alpha * (p - 1.0) / (p * alpha - 1.0))
                           * E0 ** beta)
        pred.t_hat_ode = t0 + H0 ** beta / (K * beta)
    return pred


@dataclass
class ComparisonReport:
    """Per-sample slack ``bound(t) - d(t)`` of a measured trajectory."""

    times: np.ndarray
    bound: np.ndarray
    measured: np.ndarray
    slack: np.ndarray
    tol: float
    passed: bool
    t_star: Optional[float] = None
    t_hat: Optional[float] = None
    t_hat_ode: Optional[float] = None
    t_star_ok: Optional[bool] = None

    @property
    def worst_slack(self) -> float:
        return float(np.min(self.slack)) if len(self.slack) else math.inf

    def rows(self):
        return [{"t": float(t), "bound": float(b), "measured": float(m), "slack": float(s)}
                for t, b, m, s in zip(self.times, self.bound, self.measured, self.slack)]

    def to_dict(self) -> dict:
        return {"passed": self.passed, "tol": self.tol, "worst_slack": self.worst_slack,
                "t_star": self.t_star, "t_hat": self.t_hat, "t_hat_ode": self.t_hat_ode,
                "t_star_ok": self.t_star_ok}


def compare(pred: DecayPrediction, traj: Trajectory, distance_to_phi: Sequence[float],
            tol_cmp: float = 0.0, t_star: Optional[float] = None) -> ComparisonReport:
    """Check a trajectory against a prediction from ``pred.t0`` onwards.

    In the extinction regime the measured extinction time ``t_star`` (first
    sample with zero distance when not supplied) must not exceed
    ``t_hat + tol_cmp``.
    """
    d = np.asarray(distance_to_phi, dtype=float)
    if len(d) != len(traj):
        raise ValueError("one distance per sample required")
    if traj.times[0] > pred.t0 + 1e-12 or traj.times[-1] < pred.t0:
        raise ValueError("trajectory does not cover the anchor time")
    mask = traj.times >= pred.t0 - 1e-12
    t = traj.times[mask]
    b = np.asarray(pred.bound(t), dtype=float)
    slack = b - d[mask]
    passed = bool(np.all(slack >= -tol_cmp))
    rep = ComparisonReport(t, b, d[mask], slack, tol_cmp, passed)
    if pred.regime == "extinction":
        if t_star is None:
            hit = np.flatnonzero(d[mask] == 0.0)
            t_star = float(t[hit[0]]) if len(hit) else None
        rep.t_star, rep.t_hat, rep.t_hat_ode = t_star, pred.t_hat, pred.t_hat_ode
        rep.t_star_ok = t_star is not None and t_star <= pred.t_hat + tol_cmp
        rep.passed = rep.passed and bool(rep.t_star_ok)
    return rep


def extinction_bound_profile(traj: Trajectory, C: float, reference_energy: float = 0.0) -> np.ndarray:
    """``s + C * E(v(s)|phi)`` at every sample time ``s``."""
    if not C > 0:
        raise ValueError("C must be positive")
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    return traj.times + C * (traj.energies - reference_energy)


def extinction_bound_inf(traj: Trajectory, C: float, reference_energy: float = 0.0) -> float:
    """Sampled infimum of ``s + C * E(v(s)|phi)``."""
    return float(np.min(extinction_bound_profile(traj, C, reference_energy)))
