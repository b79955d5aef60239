"""Kurdyka-Lojasiewicz certificates built from sampled energy landscapes.

A certificate is a strictly increasing piecewise-linear ``theta`` with
``theta(0) = 0`` such that ``theta'(E(v|phi)) * g(v) >= 1`` on every sample of
a cloud. It is synthesized from the smallest slope seen on each entropy level
band, scaled by a valley constant ``C >= 1``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np

__all__ = [
    "SampleCloud",
    "LevelProfile",
    "TalwegChain",
    "KLCertificate",
    "LSFit",
    "LSStudy",
    "EquivalenceAudit",
    "SardViolation",
    "RegionError",
    "level_profile",
    "discrete_talweg",
    "build_theta",
    "verify_kl",
    "restrict_to_region",
    "fit_ls",
    "et_ls_equivalence",
    "read_cloud_csv",
]

VERIFY_TOL = 1e-12


class SardViolation(ValueError):
    """A level band contains a sample with zero slope and positive entropy."""


class RegionError(ValueError):
    """A sample lies outside the region a certificate was issued for."""


@dataclass(frozen=True)
class SampleCloud:
    """Samples with relative entropy ``r``, slope ``g`` and distance to phi.

    ``points`` holds the underlying states when available (needed for
    talweg chains and distance audits).
    """

    r: np.ndarray
    g: np.ndarray
    dist: Optional[np.ndarray] = None
    points: Optional[Any] = None
    source: str = "unspecified"

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        g = np.asarray(self.g, dtype=float)
        if r.shape != g.shape or r.ndim != 1:
            raise ValueError("r and g must be 1D arrays of equal length")
        if not np.all(np.isfinite(r)):
            raise ValueError("relative entropies must be finite")
        if np.any(g < 0) or np.any(np.isnan(g)):
            raise ValueError("slopes must be nonnegative")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "g", g)
        if self.dist is not None:
            object.__setattr__(self, "dist", np.asarray(self.dist, dtype=float))

    def __len__(self) -> int:
        return len(self.r)

    @classmethod
    def from_energy(cls, points, energy: Callable, slope: Callable, phi,
                    distance: Optional[Callable] = None, source: str = "grid") -> "SampleCloud":
        """Evaluate ``energy``, ``slope`` and ``distance`` on each point."""
        pts = np.asarray(points, dtype=float)
        e_phi = energy(phi)
        r = np.array([energy(x) - e_phi for x in pts])
        g = np.array([slope(x) for x in pts])
        if distance is None:
            dist = np.linalg.norm(pts - np.asarray(phi, dtype=float), axis=-1)
        else:
            dist = np.array([distance(x, phi) for x in pts])
        return cls(r, g, dist, pts, source)

    def subset(self, mask) -> "SampleCloud":
        mask = np.asarray(mask)
        pts = None if self.points is None else np.asarray(self.points)[mask]
        dist = None if self.dist is None else self.dist[mask]
        return SampleCloud(self.r[mask], self.g[mask], dist, pts, self.source)


@dataclass
class LevelProfile:
    """Per-band minimum slope ``s_D`` on geometric entropy bands.

    Band ``k`` is the interval ``(bin_edges[k], bin_edges[k+1]]``.
    """

    bin_edges: np.ndarray
    s_vals: np.ndarray
    witness: np.ndarray
    counts: np.ndarray

    @property
    def empty(self) -> np.ndarray:
        return self.counts == 0

    @property
    def R(self) -> float:
        return float(self.bin_edges[-1])

    def band_of(self, r) -> np.ndarray:
        """Band index of each entropy value, ``-1`` outside ``(0, R]``."""
        r = np.asarray(r, dtype=float)
        k = np.searchsorted(self.bin_edges, r, side="left") - 1
        return np.where((r > 0) & (r <= self.R), k, -1)


def level_profile(cloud: SampleCloud, n_bins: int, R: Optional[float] = None) -> LevelProfile:
    """Minimum slope per entropy band with lowest-index witness.

    The first band is ``(0, r_min]`` with ``r_min`` the smallest positive
    entropy in the cloud; the remaining ``n_bins - 1`` bands split
    ``(r_min, R]`` geometrically.
    """
    if n_bins < 1:
        raise ValueError("n_bins must be at least 1")
    pos = cloud.r > 0
    if R is None:
        R = float(np.max(cloud.r[pos])) if np.any(pos) else 0.0
    use = pos & (cloud.r <= R)
    if not np.any(use):
        raise ValueError("no samples with 0 < r <= R")
    r_min = float(np.min(cloud.r[use]))
    if n_bins == 1 or r_min >= R:
        edges = np.array([0.0, R])
    else:
        edges = np.concatenate([[0.0], np.geomspace(r_min, R, n_bins)])
        edges[-1] = R
    nb = len(edges) - 1
    idx = np.flatnonzero(use)
    band = np.clip(np.searchsorted(edges, cloud.r[idx], side="left") - 1, 0, nb - 1)
    order = np.lexsort((idx, cloud.g[idx], band))
    s_vals = np.full(nb, np.nan)
    witness = np.full(nb, -1, dtype=int)
    counts = np.bincount(band, minlength=nb)
    first = np.ones(len(order), dtype=bool)
    first[1:] = band[order][1:] != band[order][:-1]
    for j in order[first]:
        s_vals[band[j]] = cloud.g[idx[j]]
        witness[band[j]] = idx[j]
    return LevelProfile(edges, s_vals, witness, counts)


@dataclass
class TalwegChain:
    """Ordered chain of valley members, one per nonempty band, top band first."""

    indices: np.ndarray
    bands: np.ndarray
    r: np.ndarray
    g: np.ndarray
    length: float
    straight: float
    valley_ok: bool
    monotone_r: bool


def discrete_talweg(cloud: SampleCloud, profile: LevelProfile, C: float = 2.0,
                    distance: Optional[Callable] = None, phi=None) -> TalwegChain:
    """Chain through the C-valley ``{g <= C * s_D(band)}``.

    The top band contributes its witness. Each lower band contributes the
    valley member closest to the previous chain point, which keeps the chain
    close to a curve; without coordinates the band witnesses are used. The
    reported length includes the final link to ``phi`` when it is given.
    """
    if not C > 1:
        raise ValueError("C must exceed 1")
    nonempty = np.flatnonzero(~profile.empty)[::-1]
    if len(nonempty) == 0:
        raise ValueError("profile has no nonempty band")
    pts = cloud.points
    if pts is not None and distance is None:
        def distance(a, b):
            return float(np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))
    band_of = profile.band_of(cloud.r)
    chain = []
    for k in nonempty:
        if pts is None or not chain:
            chain.append(int(profile.witness[k]))
            continue
        members = np.flatnonzero((band_of == k) & (cloud.g <= C * profile.s_vals[k]))
        prev = pts[chain[-1]]
        d = np.array([distance(prev, pts[j]) for j in members])
        chain.append(int(members[np.argmin(d)]))
    chain = np.array(chain, dtype=int)
    length = 0.0
    straight = math.nan
    if pts is not None:
        length = float(sum(distance(pts[a], pts[b]) for a, b in zip(chain[:-1], chain[1:])))
        if phi is not None:
            length += distance(pts[chain[-1]], phi)
            straight = distance(pts[chain[0]], phi)
    r = cloud.r[chain]
    g = cloud.g[chain]
    bands = nonempty
    valley_ok = bool(np.all(g <= C * profile.s_vals[bands]))
    monotone = bool(np.all(np.diff(r) < 0))
    return TalwegChain(chain, bands, r, g, length, straight, valley_ok, monotone)


@dataclass
class KLCertificate:
    """Piecewise-linear ``theta`` with the region it is certified on."""

    theta_knots: np.ndarray
    slopes: np.ndarray
    region: dict
    C: float
    margin: float = math.nan
    status: str = "UNCHECKED"

    def theta_prime(self, s) -> np.ndarray:
        """Slope of the piece containing ``s`` (pieces are ``(s_k, s_{k+1}]``)."""
        s = np.asarray(s, dtype=float)
        knots = self.theta_knots[:, 0]
        k = np.clip(np.searchsorted(knots, s, side="left") - 1, 0, len(self.slopes) - 1)
        return self.slopes[k]

    def theta(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        knots = self.theta_knots
        inside = np.interp(s, knots[:, 0], knots[:, 1])
        above = knots[-1, 1] + self.slopes[-1] * (s - knots[-1, 0])
        return np.where(s > knots[-1, 0], above, inside)

    def to_dict(self) -> dict:
        return {
            "theta_knots": self.theta_knots.tolist(),
            "region": self.region,
            "C": self.C,
            "margin": self.margin,
            "status": self.status,
        }


def build_theta(profile: LevelProfile, C: float = 2.0, cloud: Optional[SampleCloud] = None,
                center_id: str = "phi") -> KLCertificate:
    """Integrate ``C / s_D`` band by band into a piecewise-linear ``theta``.

    Empty bands borrow the value of the nearest nonempty band (the lower one
    on ties). Above ``R`` the last slope continues, so ``theta`` is affine
    there. When ``cloud`` is given the margin is computed on it.

    Raises
    ------
    SardViolation
        If a nonempty band has minimum slope zero.
    """
    if not C >= 1:
        raise ValueError("C must be at least 1")
    ne = np.flatnonzero(~profile.empty)
    if len(ne) == 0:
        raise ValueError("profile has no nonempty band")
    if np.any(profile.s_vals[ne] <= 0):
        raise SardViolation("zero slope at positive entropy; no KL function exists on this cloud")
    s = profile.s_vals.copy()
    for k in np.flatnonzero(profile.empty):
        nearest = ne[np.argmin(np.abs(ne - k))]
        s[k] = profile.s_vals[nearest]
    u = C / s
    edges = profile.bin_edges
    vals = np.concatenate([[0.0], np.cumsum(u * np.diff(edges))])
    region = {"center_id": center_id, "R": float(edges[-1]),
              "r_floor": float(edges[1]) if len(edges) > 2 else 0.0, "eps": math.inf}
    if cloud is not None:
        used = (cloud.r > 0) & (cloud.r <= edges[-1])
        if cloud.dist is not None and np.any(used):
            region["eps"] = float(np.max(cloud.dist[used]))
    cert = KLCertificate(np.column_stack([edges, vals]), u, region, float(C))
    if cloud is not None:
        rep = verify_kl(cert, cloud)
        cert.margin, cert.status = rep["margin"], rep["status"]
    return cert


def restrict_to_region(cert: KLCertificate, cloud: SampleCloud) -> SampleCloud:
    """Samples of ``cloud`` lying in the certified region (positive entropy only)."""
    reg = cert.region
    mask = (cloud.r > 0) & (cloud.r >= reg["r_floor"]) & (cloud.r <= reg["R"])
    if cloud.dist is not None and math.isfinite(reg["eps"]):
        mask &= cloud.dist <= reg["eps"]
    return cloud.subset(mask)


def verify_kl(cert: KLCertificate, cloud: SampleCloud) -> dict:
    """Recompute ``min theta'(r) g - 1`` over the positive-entropy samples.

    Returns a dict with ``margin``, ``status`` (PASS iff margin >= -1e-12),
    the index of the worst sample and the number of samples checked.
    """
    reg = cert.region
    pos = cloud.r > 0
    r = cloud.r[pos]
    if np.any(r > reg["R"]) or np.any(r < reg["r_floor"]):
        raise RegionError("sample entropy outside the certified band")
    if cloud.dist is not None and math.isfinite(reg["eps"]):
        if np.any(cloud.dist[pos] > reg["eps"] * (1 + 1e-12)):
            raise RegionError("sample outside the certified ball")
    if len(r) == 0:
        return {"margin": math.inf, "status": "PASS", "worst": -1, "n": 0}
    vals = cert.theta_prime(r) * cloud.g[pos] - 1.0
    j = int(np.argmin(vals))
    margin = float(vals[j])
    return {"margin": margin, "status": "PASS" if margin >= -VERIFY_TOL else "FAIL",
            "worst": int(np.flatnonzero(pos)[j]), "n": int(len(r))}


@dataclass
class LSFit:
    """Lojasiewicz-Simon constant ``c`` for exponent ``alpha`` on a cloud."""

    alpha: float
    c: float
    worst_ratio: float
    n_samples: int
    alpha_regression: float = math.nan

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "c": self.c, "worst_ratio": self.worst_ratio,
                "alpha_regression": self.alpha_regression, "n_samples": self.n_samples}


@dataclass
class LSStudy:
    """Fits over an exponent grid plus the log-log regression slope.

    ``alpha_regression`` is the least-squares slope of ``log g`` against
    ``log r``. If ``g ~ r^b`` then ``r^(1-alpha)/g`` stays bounded as
    ``r -> 0`` exactly when ``alpha <= 1 - b``; that exponent is reported as
    ``alpha_implied``.
    """

    fits: list
    alpha_regression: float
    alpha_implied: float
    recommended: Optional[float]
    sweep_radii: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def fit_for(self, alpha: float) -> LSFit:
        for f in self.fits:
            if abs(f.alpha - alpha) < 1e-12:
                return f
        raise KeyError(alpha)


def _c_of_alpha(r, g, alpha):
    return float(np.max(r ** (1.0 - alpha) / g))


def fit_ls(cloud: SampleCloud, alphas: Sequence[float] = tuple(np.linspace(0.05, 1.0, 20)),
           n_radii: int = 8) -> LSStudy:
    """Fit ``r^(1-alpha) <= c g`` for each ``alpha`` in the grid.

    ``recommended`` is the largest ``alpha`` not above ``alpha_implied``
    whose constant, recomputed on the sub-clouds ``dist <= rho`` for a
    geometric sweep of radii, never exceeds ten times its median over the
    sweep. The sweep needs distances; without them no recommendation is made.
    """
    use = (cloud.r > 0) & (cloud.g > 0)
    if not np.any(use):
        raise ValueError("no samples with positive entropy and slope")
    r, g = cloud.r[use], cloud.g[use]
    alphas = [float(a) for a in alphas]
    if any(not 0 < a <= 1 for a in alphas):
        raise ValueError("alphas must lie in (0, 1]")
    lr = np.log(r)
    slope = float(np.polyfit(lr, np.log(g), 1)[0]) if np.ptp(lr) > 0 else math.nan
    fits = []
    for a in alphas:
        c = _c_of_alpha(r, g, a)
        fits.append(LSFit(a, c, c, int(len(r)), slope))
    recommended = None
    radii = np.zeros(0)
    if cloud.dist is not None and len(r) > 10:
        d = cloud.dist[use]
        lo = np.sort(d)[min(9, len(d) - 1)]
        hi = float(np.max(d))
        if lo > 0 and hi > lo:
            radii = np.geomspace(hi, lo, n_radii)
            stable = []
            for a in alphas:
                if a > 1.0 - slope + 1e-6:
                    continue
                cs = np.array([_c_of_alpha(r[d <= rho], g[d <= rho], a) for rho in radii])
                if np.max(cs) <= 10.0 * np.median(cs):
                    stable.append(a)
            recommended = max(stable) if stable else None
    return LSStudy(fits, slope, 1.0 - slope, recommended, radii)


@dataclass
class EquivalenceAudit:
    """Both directions of the LS to ET transfer with worst slacks."""

    et_slack: float
    et_pass: bool
    ls_slack: float
    ls_pass: bool
    c: float
    c_hat: float
    alpha: float

    @property
    def passed(self) -> bool:
        return self.et_pass and self.ls_pass

    def to_dict(self) -> dict:
        return dict(self.__dict__, passed=self.passed)


def et_ls_equivalence(cloud: SampleCloud, fit: LSFit, equilibria: Sequence,
                      lam: Optional[float], distance: Optional[Callable] = None,
                      c_hat: Optional[float] = None, tol: float = 1e-12) -> EquivalenceAudit:
    """Audit the LS and ET inequalities against each other on a cloud.

    Direction 1 checks ``min_j d(v, phi_j) <= (c/alpha) r^alpha``. Direction 2
    takes an ET constant ``c_hat`` (default ``fit.c``) and checks
    ``r^(1-alpha) <= (c_hat/alpha) g``. Slacks are ``rhs - lhs``; a pass
    requires ``slack >= -tol * max(1, |rhs|)``.

    Raises
    ------
    ValueError
        If the instance is not declared geodesically convex (``lam`` unknown
        or negative); the transfer needs ``lam >= 0``.
    """
    if lam is None or lam < 0:
        raise ValueError("audit requires a declared convexity modulus lam >= 0")
    if cloud.points is None:
        raise ValueError("cloud needs its points for distance evaluation")
    if len(equilibria) == 0:
        raise ValueError("at least one equilibrium required")
    if distance is None:
        def distance(a, b):
            return float(np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))
    a, c = fit.alpha, fit.c
    c_hat = c if c_hat is None else c_hat
    r = np.maximum(cloud.r, 0.0)
    d = np.array([min(distance(x, e) for e in equilibria) for x in cloud.points])
    rhs1 = (c / a) * r ** a
    s1 = rhs1 - d
    lhs2 = r ** (1.0 - a)
    rhs2 = (c_hat / a) * cloud.g
    s2 = rhs2 - np.where(r > 0, lhs2, 0.0)
    ok1 = bool(np.all(s1 >= -tol * np.maximum(1.0, rhs1)))
    ok2 = bool(np.all(s2 >= -tol * np.maximum(1.0, rhs2)))
    return EquivalenceAudit(float(np.min(s1)), ok1, float(np.min(s2)), ok2, c, c_hat, a)


def read_cloud_csv(path) -> SampleCloud:
    """Read a cloud from CSV with columns ``r``, ``g`` and optionally ``dist``."""
    r, g, dist = [], [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        has_dist = reader.fieldnames is not None and "dist" in reader.fieldnames
        for row in reader:
            r.append(float(row["r"]))
            g.append(float(row["g"]))
            if has_dist:
                dist.append(float(row["dist"]))
    return SampleCloud(np.array(r), np.array(g), np.array(dist) if dist else None, source=str(path))
