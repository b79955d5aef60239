"""Minimizing-movement (implicit Euler / JKO type) time stepping.

One step from ``v`` minimizes

    Phi_p(tau, v; u) = d(v, u)^p / (p tau^(p-1)) + E(u)

over ``u`` using a space specific proximal oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from .core import EnergyOracle, Trajectory, euclidean, slope_estimate

__all__ = [
    "ProxOracle",
    "ProxError",
    "StepError",
    "EvolveError",
    "MMConfig",
    "RefineStudy",
    "phi_p",
    "mm_step",
    "evolve",
    "refine_study",
]


class ProxError(RuntimeError):
    """Inner solver did not reach its declared tolerance."""

    def __init__(self, message: str, gap: float = math.nan):
        super().__init__(message)
        self.gap = gap


class StepError(RuntimeError):
    """A step violated the minimizing-movement decrease inequality."""


class EvolveError(RuntimeError):
    """A step failed; the trajectory computed so far is attached."""

    def __init__(self, message: str, partial: Trajectory):
        super().__init__(message)
        self.partial = partial


@dataclass
class ProxOracle:
    """Proximal map of an energy in a metric space.

    Parameters
    ----------
    solve : callable
        ``(tau, base, p) -> state`` approximately minimizing ``Phi_p``.
        Raises :class:`ProxError` when its tolerance cannot be met.
    tolerance : float or callable
        Bound on the optimality gap of ``solve`` in units of ``Phi_p``. A
        float is scaled by ``max(1, |E(base)|)``; a callable receives
        ``(E(base), tau)``.
    distance : callable
        Metric of the state space.
    """

    solve: Callable[[float, Any, float], Any]
    tolerance: Any = 1e-9
    distance: Callable[[Any, Any], float] = euclidean

    def tol(self, e_base: float, tau: float) -> float:
        if callable(self.tolerance):
            return float(self.tolerance(e_base, tau))
        return float(self.tolerance) * max(1.0, abs(e_base))


@dataclass
class MMConfig:
    """Uniform-partition settings for :func:`evolve`."""

    p: float = 2.0
    tau: float = 0.01
    horizon: float = 1.0
    refine_levels: int = 3
    record_slopes: bool = True

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if not (self.tau > 0 and self.horizon > 0):
            raise ValueError("tau and horizon must be positive")
        if self.refine_levels < 1:
            raise ValueError("refine_levels must be at least 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.tau))


def phi_p(oracle: EnergyOracle, distance, tau: float, v, u, p: float) -> float:
    """Minimizing-movement functional ``Phi_p(tau, v; u)``."""
    d = float(distance(v, u))
    return d ** p / (p * tau ** (p - 1.0)) + oracle(u)


def mm_step(prox: ProxOracle, oracle: EnergyOracle, tau: float, v, p: float = 2.0):
    """One minimizing-movement step with a decrease check.

    Raises
    ------
    StepError
        If ``Phi_p(tau, v; v+)`` exceeds ``E(v)`` by more than the prox
        tolerance.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    e_v = oracle(v)
    if not math.isfinite(e_v):
        raise ValueError("energy at the base point is not finite")
    v_new = prox.solve(tau, v, p)
    tol = prox.tol(e_v, tau)
    val = phi_p(oracle, prox.distance, tau, v, v_new, p)
    if not val <= e_v + tol:
        raise StepError(f"step increased Phi_p: {val!r} > {e_v!r} + {tol:.3g}")
    return v_new


def _slope(oracle, state, record):
    if not record:
        return math.nan
    if oracle.slope is not None:
        return float(oracle.slope(state))
    return slope_estimate(oracle, state).value


def evolve(prox: ProxOracle, oracle: EnergyOracle, v0, cfg: MMConfig,
           slope_fn: Optional[Callable[[Any], float]] = None,
           space_id: str = "euclidean") -> Trajectory:
    """Minimizing-movement trajectory at times ``k * tau`` up to the horizon.

    Slopes come from ``slope_fn``, else ``oracle.slope``, else a probed
    lower bound (array states only). Pass ``cfg.record_slopes=False`` to skip.
    """
    e0 = oracle(v0)
    if not math.isfinite(e0):
        raise ValueError("initial energy is not finite")
    rec = cfg.record_slopes
    slope = slope_fn if slope_fn is not None else (lambda s: _slope(oracle, s, rec))
    times, states, energies, slopes = [0.0], [v0], [e0], [slope(v0) if rec else math.nan]
    v = v0
    meta = {"p": cfg.p, "tau": cfg.tau, "horizon": cfg.horizon, "solver": "minimizing-movement"}
    for k in range(1, cfg.n_steps + 1):
        try:
            v = mm_step(prox, oracle, cfg.tau, v, cfg.p)
        except (ProxError, StepError) as exc:
            part = Trajectory(times, states, energies, slopes, space_id, dict(meta, aborted_at=k))
            raise EvolveError(f"step {k} failed: {exc}", part) from exc
        times.append(k * cfg.tau)
        states.append(v)
        energies.append(oracle(v))
        slopes.append(slope(v) if rec else math.nan)
    return Trajectory(times, states, energies, slopes, space_id, meta)


@dataclass
class RefineStudy:
    """Trajectories at tau, tau/2, ... and consecutive-level distances."""

    taus: list
    trajectories: list
    cauchy: list = field(default_factory=list)

    @property
    def contracting(self) -> list:
        return [b <= a for a, b in zip(self.cauchy[:-1], self.cauchy[1:])]

    @property
    def non_contracting(self) -> list:
        return [i + 1 for i, ok in enumerate(self.contracting) if not ok]


def refine_study(prox: ProxOracle, oracle: EnergyOracle, v0, cfg: MMConfig,
                 slope_fn=None) -> RefineStudy:
    """Run :func:`evolve` with successively halved steps.

    ``cauchy[i]`` is the largest distance between levels ``i`` and ``i + 1``
    over the time stamps of level ``i`` (all of which level ``i + 1`` also
    visits).
    """
    if cfg.refine_levels < 2:
        raise ValueError("refine_levels must be at least 2")
    taus, trajs = [], []
    for level in range(cfg.refine_levels):
        c = MMConfig(cfg.p, cfg.tau / 2 ** level, cfg.horizon, cfg.refine_levels, cfg.record_slopes)
        taus.append(c.tau)
        trajs.append(evolve(prox, oracle, v0, c, slope_fn=slope_fn))
    cauchy = []
    for coarse, fine in zip(trajs[:-1], trajs[1:]):
        n = len(coarse)
        d = [prox.distance(coarse.states[k], fine.states[2 * k]) for k in range(n)]
        cauchy.append(float(np.max(d)))
    return RefineStudy(taus, trajs, cauchy)
