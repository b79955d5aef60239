"""Trajectories, metric derivatives, slopes and energy dissipation checks.

Every solver in the package returns a :class:`Trajectory` and every
certification routine consumes an :class:`EnergyOracle`. States are opaque
handles; all geometry enters through a user supplied ``distance`` callable.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np

Distance = Callable[[Any, Any], float]

__all__ = [
    "Trajectory",
    "EnergyOracle",
    "DissipationReport",
    "SlopeEstimate",
    "euclidean",
    "metric_derivative",
    "metric_derivatives",
    "arc_length",
    "slope_estimate",
    "check_dissipation",
    "total_dissipation",
    "relative_entropy",
    "monotone_tolerance",
    "write_trajectory",
    "read_trajectory_csv",
]


def euclidean(a, b) -> float:
    """Euclidean distance between two array-like states."""
    return float(np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))


def monotone_tolerance(e0: float) -> float:
    """Tolerance used when asserting that energies do not increase."""
    return 1e-10 * max(1.0, abs(float(e0)))


@dataclass
class Trajectory:
    """Time-stamped sequence of states with cached energies and slopes.

    Parameters
    ----------
    times : array_like
        Strictly increasing sample times.
    states : sequence
        State handles, one per time.
    energies : array_like
        Energy at each state.
    slopes : array_like, optional
        Upper gradient values. ``nan`` marks a sample without a slope.
    space_id : str
        Tag naming the state space.
    meta : dict
        Free-form solver metadata (p, tau, solver name, ...).
    """

    times: np.ndarray
    states: list
    energies: np.ndarray
    slopes: Optional[np.ndarray] = None
    space_id: str = "euclidean"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.energies = np.asarray(self.energies, dtype=float)
        self.states = list(self.states)
        n = len(self.times)
        if self.slopes is None:
            self.slopes = np.full(n, np.nan)
        self.slopes = np.asarray(self.slopes, dtype=float)
        if not (len(self.states) == n and len(self.energies) == n and len(self.slopes) == n):
            raise ValueError("times, states, energies and slopes must have equal length")
        if n > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def has_slopes(self) -> bool:
        return bool(len(self)) and bool(np.all(np.isfinite(self.slopes)))

    def monotone_violations(self, tol: Optional[float] = None) -> np.ndarray:
        """Indices ``k`` with ``E[k+1] > E[k] + tol``."""
        if len(self) < 2:
            return np.zeros(0, dtype=int)
        if tol is None:
            tol = monotone_tolerance(self.energies[0])
        return np.flatnonzero(np.diff(self.energies) > tol)

    def distances_to(self, target, distance: Distance) -> np.ndarray:
        return np.array([distance(s, target) for s in self.states])


@dataclass
class EnergyOracle:
    """Evaluation contract for an energy functional.

    Parameters
    ----------
    eval : callable
        ``state -> float``, may return ``inf`` outside the domain.
    equilibrium : state
        Reference state phi.
    lam : float, optional
        Geodesic convexity modulus, ``None`` when unknown.
    slope : callable, optional
        Closed-form descending slope.
    """

    eval: Callable[[Any], float]
    equilibrium: Any
    lam: Optional[float] = None
    slope: Optional[Callable[[Any], float]] = None
    name: str = "energy"

    def __call__(self, v) -> float:
        return float(self.eval(v))


@dataclass
class DissipationReport:
    """Both sides of the energy dissipation equality on ``[s, t]``."""

    interval: tuple
    lhs: float
    metric_term: float
    slope_term: float
    residual: float
    monotone_violations: int = 0

    def to_dict(self) -> dict:
        return {
            "interval": list(self.interval),
            "lhs": self.lhs,
            "metric_term": self.metric_term,
            "slope_term": self.slope_term,
            "residual": self.residual,
            "monotone_violations": self.monotone_violations,
        }


@dataclass(frozen=True)
class SlopeEstimate:
    """Probed lower bound for the descending slope."""

    value: float
    lam: float
    tag: str

    def __float__(self) -> float:
        return self.value


def metric_derivative(traj: Trajectory, distance: Distance, k: int) -> float:
    """Finite-difference metric speed at sample ``k``.

    Central difference in the interior, one-sided at both ends.
    """
    n = len(traj)
    if n < 2:
        raise ValueError("need at least two samples")
    if not 0 <= k < n:
        raise IndexError(f"sample index {k} out of range for length {n}")
    lo = max(k - 1, 0)
    hi = min(k + 1, n - 1)
    d = float(distance(traj.states[lo], traj.states[hi]))
    if not math.isfinite(d):
        raise ValueError(f"non-finite distance at sample {k}")
    return abs(d) / (traj.times[hi] - traj.times[lo])


def metric_derivatives(traj: Trajectory, distance: Distance) -> np.ndarray:
    """``metric_derivative`` at every sample."""
    return np.array([metric_derivative(traj, distance, k) for k in range(len(traj))])


def arc_length(traj: Trajectory, distance: Distance) -> float:
    """Polygonal length, a lower bound for the length of the curve."""
    if len(traj) < 2:
        raise ValueError("need at least two samples")
    return float(sum(distance(a, b) for a, b in zip(traj.states[:-1], traj.states[1:])))


def _default_probes(v, scale: float):
    x = np.asarray(v, dtype=float)
    r = 1e-3 * scale
    probes = []
    for radius in (r, r / 2, r / 4):
        for i in range(x.size):
            for sign in (1.0, -1.0):
                e = np.zeros(x.size)
                e[i] = sign * radius
                probes.append((x.ravel() + e).reshape(x.shape))
    return probes


def slope_estimate(oracle: EnergyOracle, v, probes: Optional[Sequence] = None,
                   distance: Distance = euclidean, scale: Optional[float] = None) -> SlopeEstimate:
    """Lower bound for the descending slope from a finite probe set.

    For a lambda-convex energy the slope is the supremum over ``u`` of
    ``(E(v) - E(u)) / d(v, u) + lam/2 * d(v, u)``, clipped at zero. Any finite
    set of probes therefore gives a lower bound. Without probes the state must
    be array-like and coordinate probes at three radii are used.

    Returns
    -------
    SlopeEstimate
        ``tag`` is ``"convexity-unverified"`` when ``oracle.lam`` is unknown
        and zero was used in its place.
    """
    lam = oracle.lam
    tag = "lambda-declared"
    if lam is None:
        lam, tag = 0.0, "convexity-unverified"
    if probes is None:
        if scale is None:
            scale = max(1.0, float(np.linalg.norm(np.asarray(v, dtype=float))))
        probes = _default_probes(v, scale)
    if len(probes) == 0:
        raise ValueError("empty probe set")
    ev = oracle(v)
    if not math.isfinite(ev):
        raise ValueError("energy at v is not finite")
    best = 0.0
    used = 0
    for u in probes:
        d = float(distance(v, u))
        if d <= 0.0:
            continue
        eu = oracle(u)
        if math.isnan(eu):
            raise ValueError("energy at a probe is nan")
        if eu == math.inf:
            continue
        used += 1
        best = max(best, (ev - eu) / d + 0.5 * lam * d)
    if used == 0:
        raise ValueError("all probes coincide with v or lie outside the domain")
    return SlopeEstimate(best, float(lam), tag)


def _trapezoid(y: np.ndarray, t: np.ndarray) -> float:
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(t)))


def _check_inputs(traj: Trajectory, p: float):
    if p <= 1:
        raise ValueError("p must exceed 1")
    if len(traj) < 2:
        raise ValueError("need at least two samples")
    if not traj.has_slopes:
        raise ValueError("slopes missing at some samples")


def _report(traj, speeds, lo, hi, p, tol):
    q = p / (p - 1.0)
    t = traj.times[lo:hi + 1]
    lhs = float(traj.energies[lo] - traj.energies[hi])
    metric = _trapezoid(speeds[lo:hi + 1] ** p, t) / p
    slope = _trapezoid(traj.slopes[lo:hi + 1] ** q, t) / q
    viol = int(np.sum(np.diff(traj.energies[lo:hi + 1]) > tol))
    return DissipationReport((float(t[0]), float(t[-1])), lhs, metric, slope,
                             lhs - metric - slope, viol)


def check_dissipation(traj: Trajectory, p: float, distance: Distance,
                      tau_mono: Optional[float] = None) -> list:
    """Energy dissipation balance on each sampling interval.

    Both integrals use the trapezoid rule with finite-difference metric
    speeds. The residual is reported with its sign.

    Returns
    -------
    list of DissipationReport
        One entry per consecutive pair of samples.
    """
    _check_inputs(traj, p)
    tol = monotone_tolerance(traj.energies[0]) if tau_mono is None else tau_mono
    speeds = metric_derivatives(traj, distance)
    return [_report(traj, speeds, k, k + 1, p, tol) for k in range(len(traj) - 1)]


def total_dissipation(traj: Trajectory, p: float, distance: Distance,
                      tau_mono: Optional[float] = None) -> DissipationReport:
    """Energy dissipation balance over the whole sampled time range."""
    _check_inputs(traj, p)
    tol = monotone_tolerance(traj.energies[0]) if tau_mono is None else tau_mono
    speeds = metric_derivatives(traj, distance)
    return _report(traj, speeds, 0, len(traj) - 1, p, tol)


def relative_entropy(oracle: EnergyOracle, v) -> float:
    """``E(v) - E(phi)``."""
    ev = oracle(v)
    if not math.isfinite(ev):
        raise ValueError("energy at v is not finite")
    e_phi = oracle(oracle.equilibrium)
    if not math.isfinite(e_phi):
        raise ValueError("energy at the equilibrium is not finite")
    return ev - e_phi


def _num(x: float) -> str:
    return repr(float(x))


def write_trajectory(traj: Trajectory, path, dist_to_equilibrium: Optional[Sequence[float]] = None,
                     manifest: Optional[dict] = None) -> tuple:
    """Write ``<path>.csv`` and ``<path>.json``.

    The CSV has columns ``t, energy, slope, dist_to_equilibrium``; missing
    values are left empty. The JSON manifest carries ``space_id`` and the
    trajectory metadata merged with ``manifest``.
    """
    path = Path(path)
    csv_path = path.with_suffix(".csv")
    json_path = path.with_suffix(".json")
    dist = dist_to_equilibrium if dist_to_equilibrium is not None else [math.nan] * len(traj)
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "energy", "slope", "dist_to_equilibrium"])
        for t, e, g, d in zip(traj.times, traj.energies, traj.slopes, dist):
            w.writerow([_num(t), _num(e), "" if math.isnan(g) else _num(g),
                        "" if math.isnan(d) else _num(d)])
    info = {"space_id": traj.space_id}
    info.update(_jsonable(traj.meta))
    if manifest:
        info.update(_jsonable(manifest))
    with open(json_path, "w") as fh:
        json.dump(info, fh, indent=2, sort_keys=True)
    return csv_path, json_path


def read_trajectory_csv(path) -> dict:
    """Read the columns of a trajectory CSV into float arrays."""
    cols: dict = {"t": [], "energy": [], "slope": [], "dist_to_equilibrium": []}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            for k in cols:
                cols[k].append(float(row[k]) if row[k] != "" else math.nan)
    return {k: np.array(v) for k, v in cols.items()}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj
