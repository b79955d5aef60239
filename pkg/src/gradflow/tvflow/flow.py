"""Total variation flows by minimizing movements and extinction audits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .. import rates
from ..core import EnergyOracle, Trajectory
from ..mms import MMConfig, ProxError, ProxOracle, evolve
from .energy import tv_energy
from .grid import GridFunction, l2_distance
from .prox import tv_prox_1d, tv_prox_2d

__all__ = [
    "S2",
    "TVInstance",
    "TVProx",
    "TVRun",
    "ExtinctionAudit",
    "et_constant_1d",
    "et_constant_2d_neumann",
    "make_instance",
    "run_tv_flow",
    "extinction_audit",
]

# sharp constant of ||v||_{L2} <= S2 * TV(v) for v extended by zero in the plane
S2 = 1.0 / math.sqrt(2.0 * math.pi)


def et_constant_1d(length: float, bc: str, n: int = 256) -> dict:
    """Best constant ``C`` in ``||v - target||_{L2} <= C * TV(v)`` on an interval.

    By the coarea formula the supremum of the ratio is approached by
    indicators of sets, and in 1D by indicators of intervals. All grid
    intervals ``[a, b)`` of an ``n`` cell partition are scanned; the target is
    the mean (Neumann) or zero (Dirichlet).

    Returns
    -------
    dict
        ``C`` (the constant), ``C_PS`` (``C / |Omega|^(1/2)``) and the
        maximizing interval.
    """
    bc = bc.lower()
    a, b = np.triu_indices(n + 1, k=1)
    f = (b - a) / n
    if bc == "dirichlet":
        num = np.sqrt(length * f)
        tv = np.full(f.shape, 2.0)
    elif bc == "neumann":
        num = np.sqrt(length * f * (1.0 - f))
        tv = (a > 0).astype(float) + (b < n).astype(float)
    else:
        raise ValueError("bc must be dirichlet or neumann")
    ratio = np.where(tv > 0, num / np.where(tv > 0, tv, 1.0), 0.0)
    j = int(np.argmax(ratio))
    C = float(ratio[j])
    return {"C": C, "C_PS": C / math.sqrt(length), "interval": (a[j] * length / n, b[j] * length / n),
            "method": "interval-indicator scan"}


def et_constant_2d_neumann(width: float = 1.0, height: float = 1.0) -> dict:
    """Lower estimate of the Neumann constant on a rectangle.

    Maximizes ``||1_E - |E|/|Omega| ||_{L2} / Per(E; Omega)`` over two
    families of sets: half-planes cut parallel to a side and quarter discs at a
    corner. The result is a lower bound for the sharp constant.
    """
    A = width * height

    def ratio(area, per):
        f = area / A
        return math.sqrt(A * f * (1 - f)) / per

    cut_x = -minimize_scalar(lambda s: -ratio(s * A, height), bounds=(1e-9, 1 - 1e-9),
                             method="bounded").fun
    cut_y = -minimize_scalar(lambda s: -ratio(s * A, width), bounds=(1e-9, 1 - 1e-9),
                             method="bounded").fun
    rmax = min(width, height)
    quarter = -minimize_scalar(lambda r: -ratio(math.pi * r * r / 4, math.pi * r / 2),
                               bounds=(1e-9 * rmax, rmax), method="bounded").fun
    C = max(cut_x, cut_y, quarter)
    return {"C": C, "C_PS": C / math.sqrt(A), "method": "half-plane and corner quarter-disc families"}


@dataclass
class TVInstance:
    """Initial datum plus the entropy-transport constant used by audits."""

    v0: GridFunction
    constant: float
    constant_source: str

    @property
    def bc(self) -> str:
        return self.v0.bc

    @property
    def target(self) -> GridFunction:
        if self.bc == "neumann":
            return self.v0.like(np.full(self.v0.shape, self.v0.mean()))
        return self.v0.like(np.zeros(self.v0.shape))

    def oracle(self) -> EnergyOracle:
        return EnergyOracle(tv_energy, self.target, lam=0.0, name=f"tv-{self.bc}")


def make_instance(v0: GridFunction) -> TVInstance:
    """Attach the applicable constant to an initial datum."""
    if v0.dims == 2 and v0.bc == "dirichlet":
        return TVInstance(v0, S2, "sharp planar isoperimetric constant 1/sqrt(2 pi)")
    if v0.dims == 1:
        length = v0.shape[0] * v0.h
        info = et_constant_1d(length, v0.bc, n=min(v0.shape[0], 1024))
        return TVInstance(v0, info["C"], f"{info['method']} (C_PS = {info['C_PS']:.6g})")
    info = et_constant_2d_neumann(v0.shape[0] * v0.h, v0.shape[1] * v0.h)
    return TVInstance(v0, info["C"], f"{info['method']} (C_PS = {info['C_PS']:.6g})")


class TVProx:
    """Proximal oracle for one TV flow run.

    The 2D solver is warm-started from the dual field of the previous step,
    so use one instance per run.
    """

    def __init__(self, tol: float = 1e-9, max_iter: int = 20000):
        self.tol = tol
        self.max_iter = max_iter
        self.dual = None
        self.iterations: list = []
        self.gaps: list = []

    def solve(self, tau: float, base: GridFunction, p: float = 2.0) -> GridFunction:
        if p != 2:
            raise ValueError("TV flows are L2 flows (p = 2)")
        if base.dims == 1:
            self.iterations.append(0)
            self.gaps.append(0.0)
            return tv_prox_1d(base, tau)
        res = tv_prox_2d(base, tau, max_iter=self.max_iter, tol=self.tol, dual=self.dual)
        self.iterations.append(res.iterations)
        self.gaps.append(res.gap)
        if not res.ok:
            raise ProxError(f"dual iteration stopped with gap {res.gap:.3g}", res.gap)
        self.dual = res.dual
        return res.grid

    def oracle(self) -> ProxOracle:
        # the dual gap lives on the scale of tau * Phi_2
        return ProxOracle(self.solve, tolerance=lambda e, tau: self.tol * (1.0 + abs(e)) / tau,
                          distance=l2_distance)


@dataclass
class TVRun:
    """Flow trajectory with the measured extinction time."""

    traj: Trajectory
    t_star: Optional[float]
    eps_ext: float
    norms: np.ndarray
    target: GridFunction
    iterations: list = field(default_factory=list)
    gaps: list = field(default_factory=list)

    @property
    def reached(self) -> bool:
        return self.t_star is not None


def _measure(times, norms, eps):
    hit = np.flatnonzero(norms <= eps)
    return float(times[hit[0]]) if len(hit) else None


def run_tv_flow(inst: TVInstance, tau: float, horizon: float, eps_factor: float = 1e-3,
                tol: float = 1e-9, max_iter: int = 20000) -> TVRun:
    """Minimizing-movement TV flow with extinction measurement.

    ``t_star`` is the first sample time with ``||v(t) - target|| <= eps_ext``
    where ``eps_ext = eps_factor * ||v0||``; ``None`` when the horizon is
    reached first. Slopes are the discrete dissipation rates
    ``sqrt((E_{k-1} - E_k) / tau)`` (the first sample reuses the first rate).
    """
    prox = TVProx(tol, max_iter)
    oracle = inst.oracle()
    cfg = MMConfig(p=2.0, tau=tau, horizon=horizon, refine_levels=1, record_slopes=False)
    traj = evolve(prox.oracle(), oracle, inst.v0, cfg, space_id=f"L2-grid-{inst.v0.dims}d-{inst.bc}")
    e = traj.energies
    if len(e) > 1:
        rate = np.sqrt(np.maximum(e[:-1] - e[1:], 0.0) / tau)
        traj.slopes = np.concatenate([[rate[0]], rate])
    else:
        traj.slopes = np.zeros(1)
    target = inst.target
    norms = np.array([l2_distance(s, target) for s in traj.states])
    eps = eps_factor * inst.v0.norm()
    traj.meta.update({"bc": inst.bc, "dims": inst.v0.dims, "h": inst.v0.h, "eps_ext": eps,
                      "constant": inst.constant, "constant_source": inst.constant_source})
    return TVRun(traj, _measure(traj.times, norms, eps), eps, norms, target,
                 prox.iterations, prox.gaps)


@dataclass
class ExtinctionAudit:
    """Measured extinction time against the sampled infimum bound."""

    t_star: Optional[float]
    bound: float
    tol: float
    violations: int
    profile: np.ndarray
    r2: float
    slope: float
    t_star_fit: float
    require_affine: bool
    passed: bool

    def to_dict(self) -> dict:
        return {"t_star": self.t_star, "bound": self.bound, "tol": self.tol,
                "violations": self.violations, "r2": self.r2, "slope": self.slope,
                "t_star_fit": self.t_star_fit, "require_affine": self.require_affine,
                "passed": self.passed}


def extinction_audit(inst: TVInstance, run: TVRun, require_affine: bool = False,
                     tol: Optional[float] = None) -> ExtinctionAudit:
    """Compare ``T*`` with ``inf_s (s + C E(v(s)|target))`` and test affine decay.

    Every sample ``s`` gives its own upper bound ``s + C E(v(s))``; the audit
    counts samples where that bound is below the measured ``T*`` by more than
    ``tol`` (default two time steps). The decay of ``||v(t) - target||`` before
    extinction is fitted by a straight line; with ``require_affine`` its R^2
    must reach 0.99.

    Raises
    ------
    ValueError
        If the run did not reach extinction.
    """
    if not run.reached:
        raise ValueError("extinction was not reached within the horizon")
    traj = run.traj
    tau = traj.meta.get("tau", float(np.min(np.diff(traj.times))) if len(traj) > 1 else 0.0)
    tol = 2.0 * tau if tol is None else tol
    ref = tv_energy(run.target)
    profile = rates.extinction_bound_profile(traj, inst.constant, ref)
    bound = float(np.min(profile))
    violations = int(np.sum(profile < run.t_star - tol))
    pre = traj.times < run.t_star
    r2, slope, t_fit = math.nan, math.nan, math.nan
    if np.sum(pre) >= 3:
        t, y = traj.times[pre], run.norms[pre]
        slope, icpt = np.polyfit(t, y, 1)
        res = y - (slope * t + icpt)
        ss = float(np.sum((y - y.mean()) ** 2))
        r2 = 1.0 - float(np.sum(res ** 2)) / ss if ss > 0 else 1.0
        t_fit = -icpt / slope if slope != 0 else math.inf
    ok = violations == 0 and run.t_star <= bound + tol
    if require_affine:
        ok = ok and r2 >= 0.99
    return ExtinctionAudit(run.t_star, bound, tol, violations, profile, float(r2), float(slope),
                           float(t_fit), require_affine, bool(ok))
