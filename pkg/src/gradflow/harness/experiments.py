"""Experiment runners: one function per kind, artifacts written atomically."""

from __future__ import annotations

import json
import math
import os
import shutil
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .. import rates, tvflow, wflow1d
from ..core import _jsonable, write_trajectory
from ..klcert import (SampleCloud, build_theta, et_ls_equivalence, fit_ls, level_profile,
                      read_cloud_csv, verify_kl)
from .config import ExperimentConfig
from .plots import line_plot, scatter_fit
from .smooth import make_energy, smooth_line_talweg

__all__ = ["run_experiment", "run_batch", "criterion", "dump_json", "worker_cap", "RUNNERS"]


def criterion(name: str, slack: float, ok: Optional[bool] = None, **detail) -> dict:
    """PASS/FAIL record backed by a numeric slack (PASS iff ``slack >= 0`` by default)."""
    slack = float(slack)
    ok = (slack >= 0) if ok is None else bool(ok)
    return dict({"name": name, "status": "PASS" if ok else "FAIL", "slack": slack}, **detail)


def dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------- TV flows

def _tv_initial(cfg: ExperimentConfig, bc: str):
    preset = cfg.get("preset", "disc" if bc == "dirichlet" else "half")
    n = int(cfg.get("n", 128 if preset == "disc" else 256))
    a = float(cfg.get("height", 1.0))
    if preset == "disc":
        R = float(cfg.get("radius", 0.25))
        v0 = tvflow.disc(n, R, height=a, bc=bc, ramp=float(cfg.get("ramp", 0.0)))
        return v0, {"preset": preset, "a": a, "R": R}
    if preset == "box":
        lo, hi = cfg.get("interval", [0.25, 0.75])
        return tvflow.box(n, float(lo), float(hi), a, bc=bc), {"preset": preset, "a": a}
    if preset == "half":
        return tvflow.box(n, 0.0, 0.5, a, bc=bc), {"preset": preset, "a": a}
    raise ValueError(f"unknown TV preset {preset!r}")


def _tv(cfg: ExperimentConfig, out: Path, bc: str) -> dict:
    v0, info = _tv_initial(cfg, bc)
    inst = tvflow.make_instance(v0)
    tau = float(cfg.get("tau", 2.5e-4 if v0.dims == 2 else 1e-4))
    horizon = float(cfg.get("horizon", 0.15 if v0.dims == 2 else 0.3))
    run = tvflow.run_tv_flow(inst, tau, horizon, eps_factor=float(cfg.get("eps_factor", 1e-3)),
                             tol=float(cfg.get("tol", 1e-9)))
    traj = run.traj
    crit = [criterion("extinction reached", (horizon - run.t_star) if run.reached else -1.0,
                      run.reached)]
    res = {"t_star": run.t_star, "constant": inst.constant, "constant_source": inst.constant_source,
           "eps_ext": run.eps_ext, "instance": info}
    if run.reached:
        aud = tvflow.extinction_audit(inst, run, require_affine=(bc == "dirichlet"),
                                      tol=float(cfg.get("audit_tol", 0.0)))
        res["audit"] = aud.to_dict()
        crit.append(criterion("extinction bound dominates T* at every re-anchoring time",
                              float(np.min(aud.profile) - run.t_star), aud.violations == 0,
                              violations=aud.violations, bound=aud.bound))
        if bc == "dirichlet":
            crit.append(criterion("affine height decay (R^2 >= 0.99)", aud.r2 - 0.99, r2=aud.r2))
        if info["preset"] == "disc" and bc == "dirichlet" and v0.dims == 2:
            a, R = info["a"], info["R"]
            lo, hi = 0.85 * a * R / 2, 1.15 * a * R / 2
            crit.append(criterion("T* within aR/2 +- 15%", min(run.t_star - lo, hi - run.t_star),
                                  window=[lo, hi], predicted=a * R / 2))
            crit.append(criterion("T* <= a R sqrt(2 pi)", a * R * math.sqrt(2 * math.pi) - run.t_star))
    if bc == "neumann":
        means = np.array([s.mean() for s in traj.states])
        drift = float(np.max(np.abs(np.diff(means)))) if len(means) > 1 else 0.0
        final = float(run.norms[-1])
        crit.append(criterion("mean conserved to 1e-12 per step", 1e-12 - drift, drift=drift,
                              total_drift=float(abs(means[-1] - means[0]))))
        crit.append(criterion("final state within 1e-6 of the mean", 1e-6 - final, final=final))
    write_trajectory(traj, out / "trajectory", run.norms, {"experiment": cfg.name})
    line_plot(out / "energy.svg", traj.times, {"TV energy": traj.energies}, "t", "E(v(t))")
    line_plot(out / "distance.svg", traj.times, {"||v - target||": run.norms}, "t",
              "distance to equilibrium", logy=True)
    if len(traj) > 2:
        r = traj.energies - tvflow.tv_energy(run.target)
        res["scatter_slope"] = scatter_fit(out / "slope_vs_entropy.svg", r, traj.slopes,
                                           "E(v|phi)", "dissipation rate")
    res["criteria"] = crit
    return res


def _tv_dirichlet(cfg, out):
    return _tv(cfg, out, "dirichlet")


def _tv_neumann(cfg, out):
    return _tv(cfg, out, "neumann")


# ---------------------------------------------------------- Wasserstein

def _wflow(cfg: ExperimentConfig, out: Path) -> dict:
    name = cfg.get("preset", "fokker-planck")
    p = float(cfg.get("p", 2.0))
    kw = {k: cfg.get(k) for k in ("kappa", "m", "w") if cfg.get(k) is not None}
    spec = wflow1d.preset(name, p=p, **kw)
    M = int(cfg.get("m_quantiles", 2048))
    tau = float(cfg.get("tau", 0.01))
    horizon = float(cfg.get("horizon", 3.0))
    m0, s0 = float(cfg.get("m0", 2.0)), float(cfg.get("s0", 1.0))
    X0 = wflow1d.gaussian(m0, s0, M)
    res = {"spec": spec.describe(), "M": M}
    nu = None
    if spec.lambda_V is not None and spec.lambda_V > 0:
        eq = wflow1d.equilibrium_solve(spec, M)
        nu = eq.X
        res["equilibrium_fisher"] = eq.residual
    traj = wflow1d.run_wflow(spec, X0, p, tau, horizon, nu=nu)
    viol = traj.monotone_violations()
    crit = [criterion("energy non-increasing", float(-len(viol)), len(viol) == 0)]
    dist = None
    if nu is not None:
        dist = np.array([wflow1d.wasserstein_p(s, nu, p) for s in traj.states])
        dec = wflow1d.decay_audit(spec, traj, nu, p)
        res["decay_audit"] = dec.to_dict()
        crit.append(criterion("transport bound at every sample",
                              float(np.min(dec.slack_transport)), dec.transport_pass))
        crit.append(criterion("exponential envelope at every sample",
                              float(np.min(dec.slack_envelope)), dec.envelope_pass))
        ia = wflow1d.audit_inequalities(spec, X0, nu, p)
        res["inequalities_at_start"] = ia.to_dict()
        crit.append(criterion("inequality suite at the initial measure",
                              min(r["slack"] + r["tol"] for r in ia.records), ia.passed))
        kappa = float(kw.get("kappa", 1.0))
        if name == "fokker-planck" and p == 2:
            t = traj.times
            m = m0 * np.exp(-kappa * t)
            sig = np.sqrt(1 / kappa + (s0 ** 2 - 1 / kappa) * np.exp(-2 * kappa * t))
            exact = np.sqrt(m ** 2 + (sig - 1 / math.sqrt(kappa)) ** 2)
            rel = float(np.max(np.abs(dist / exact - 1)))
            rate = float(np.polyfit(t, np.log(dist), 1)[0])
            res.update({"ou_max_rel_error": rel, "fitted_rate": rate})
            crit.append(criterion("W2 matches the Ornstein-Uhlenbeck closed form within 3%",
                                  0.03 - rel))
            crit.append(criterion("fitted decay rate <= -0.95 kappa", -0.95 * kappa - rate))
    write_trajectory(traj, out / "trajectory", dist, {"experiment": cfg.name})
    line_plot(out / "energy.svg", traj.times, {"free energy": traj.energies}, "t", "E(mu(t))")
    if dist is not None:
        line_plot(out / "distance.svg", traj.times, {"W_p(mu(t), nu)": dist}, "t",
                  "distance to equilibrium", logy=True)
        e_rel = traj.energies - wflow1d.energy_array(spec, nu.X)
        res["scatter_slope"] = scatter_fit(out / "slope_vs_entropy.svg", e_rel, traj.slopes,
                                           "E(mu|nu)", "I^(1/p')")
    np.savetxt(out / "final_quantiles.csv", traj.states[-1].X, delimiter=",", header="X",
               comments="")
    res["criteria"] = crit
    return res


# ------------------------------------------------------------ smooth LS

def _ball_cloud(E, radius: float, n: int, rng) -> SampleCloud:
    z = rng.standard_normal((n, E.dim))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    pts = E.phi + z * radius * rng.uniform(0, 1, (n, 1)) ** (1.0 / E.dim)
    return SampleCloud.from_energy(pts, E.value, E.slope, E.phi, source=f"ball:{E.name}")


def _smooth_ls(cfg: ExperimentConfig, out: Path) -> dict:
    name = cfg.get("preset", "quadratic")
    kw = {"dim": int(cfg.get("dim", 2))}
    if cfg.get("coeffs") is not None:
        kw["coeffs"] = cfg.get("coeffs")
    E = make_energy(name, **kw)
    rng = np.random.default_rng(cfg.seed)
    cloud = _ball_cloud(E, float(cfg.get("radius", 0.1)), int(cfg.get("n", 10000)), rng)
    study = fit_ls(cloud)
    C = float(cfg.get("C", 2.0))
    prof = level_profile(cloud, int(cfg.get("bins", 32)))
    cert = build_theta(prof, C, cloud, center_id=name)
    rep = verify_kl(cert, cloud)
    res = {"alpha_regression": study.alpha_regression, "alpha_implied": study.alpha_implied,
           "recommended_alpha": study.recommended, "certificate": cert.to_dict(),
           "fits": [f.to_dict() for f in study.fits]}
    crit = [criterion("KL certificate margin >= 0 on the generating cloud", rep["margin"],
                      rep["status"] == "PASS")]
    lo, hi = cfg.get("alpha_lo"), cfg.get("alpha_hi")
    if lo is not None and hi is not None:
        a = study.alpha_regression
        crit.append(criterion(f"alpha_regression in [{lo}, {hi}]", min(a - lo, hi - a)))
    if E.lam is not None and E.lam >= 0 and study.recommended is not None:
        fit = study.fit_for(study.recommended)
        eq = et_ls_equivalence(cloud, fit, [E.phi], E.lam, tol=float(cfg.get("equiv_tol", 1e-12)))
        res["equivalence"] = eq.to_dict()
        crit.append(criterion("LS implies ET on the cloud", eq.et_slack, eq.et_pass))
        crit.append(criterion("ET implies LS on the cloud", eq.ls_slack, eq.ls_pass))
    if E.hess_phi is not None and np.all(np.linalg.eigvalsh(E.hess_phi) > 0):
        v0 = E.phi + np.asarray(cfg.get("v0", [1.0] + [0.0] * (E.dim - 1)), dtype=float)
        tal = smooth_line_talweg(E, E.phi, v0, float(cfg.get("delta", 0.1)), seed=cfg.seed)
        res["line_talweg"] = tal.to_dict()
    res["scatter_slope"] = scatter_fit(out / "slope_vs_entropy.svg", cloud.r, cloud.g,
                                       "E(v|phi)", "|E'(v)|")
    with open(out / "cloud.csv", "w") as fh:
        fh.write("r,g,dist\n")
        for r, g, d in zip(cloud.r, cloud.g, cloud.dist):
            fh.write(f"{float(r)!r},{float(g)!r},{float(d)!r}\n")
    res["criteria"] = crit
    return res


def _certify_kl(cfg: ExperimentConfig, out: Path) -> dict:
    cloud = read_cloud_csv(cfg.get("cloud"))
    C = float(cfg.get("C", 2.0))
    prof = level_profile(cloud, int(cfg.get("bins", 32)))
    cert = build_theta(prof, C, cloud)
    rep = verify_kl(cert, cloud)
    res = {"certificate": cert.to_dict(), "verify": rep}
    if np.any((cloud.r > 0) & (cloud.g > 0)):
        study = fit_ls(cloud)
        res["alpha_regression"] = study.alpha_regression
        res["scatter_slope"] = scatter_fit(out / "slope_vs_entropy.svg", cloud.r, cloud.g,
                                           "E(v|phi)", "g(v)")
    res["criteria"] = [criterion("KL certificate margin >= 0", rep["margin"],
                                 rep["status"] == "PASS")]
    return res


def _listify(x, default):
    x = default if x is None else x
    return [float(v) for v in (x if isinstance(x, list) else [x])]


def _rates_table(cfg: ExperimentConfig, out: Path) -> dict:
    rows = []
    for p in _listify(cfg.get("p"), 2.0):
        for a in _listify(cfg.get("alpha"), 0.5):
            for c in _listify(cfg.get("c"), 1.0):
                for e0 in _listify(cfg.get("e0"), 1.0):
                    for t0 in _listify(cfg.get("t0"), 0.0):
                        rows.append(rates.predict(p, a, c, t0, e0).to_dict())
    return {"table": rows, "criteria": []}


RUNNERS: dict = {"tv-dirichlet": _tv_dirichlet, "tv-neumann": _tv_neumann, "wflow": _wflow,
                 "smooth-ls": _smooth_ls, "certify-kl": _certify_kl, "rates-table": _rates_table}


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run one experiment and publish its directory atomically.

    Artifacts are written to a scratch folder beside the destination and
    moved into place once complete, so readers never see partial output.
    The returned summary carries ``passed`` and the per-criterion records.
    """
    runner: Callable = RUNNERS[cfg.kind]
    dest = cfg.directory
    dest.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{cfg.name}.", dir=dest.parent))
    try:
        res = runner(cfg, tmp)
        res = dict(res, name=cfg.name, kind=cfg.kind, params=cfg.params, seed=cfg.seed,
                   passed=all(c["status"] == "PASS" for c in res["criteria"]))
        dump_json(res, tmp / "report.json")
        if dest.exists():
            shutil.rmtree(dest)
        os.replace(tmp, dest)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return {"name": cfg.name, "kind": cfg.kind, "passed": res["passed"],
            "criteria": res["criteria"], "directory": str(dest)}


def _run_safe(cfg: ExperimentConfig) -> dict:
    try:
        return run_experiment(cfg)
    except Exception as exc:  # reported as a failed experiment, with context
        return {"name": cfg.name, "kind": cfg.kind, "passed": False, "directory": None,
                "criteria": [criterion("experiment completed", -1.0, False,
                                       error=f"{type(exc).__name__}: {exc}")]}


def worker_cap(n_jobs: int) -> int:
    """Workers for a batch: ``GRADFLOW_WORKERS`` if set, else the CPU count."""
    env = os.environ.get("GRADFLOW_WORKERS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, n_jobs))


def run_batch(configs: list) -> list:
    """Run experiments concurrently; results come back in config order."""
    n = worker_cap(len(configs))
    if n == 1:
        return [_run_safe(c) for c in configs]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(_run_safe, configs))
