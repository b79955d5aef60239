"""Acceptance criteria, one test each, at their stated tolerances.

Every test prints a ``PASS``/``FAIL`` line with the measured values and
appends it to the summary shown at the end of the pytest run.
"""

import math
import time

import numpy as np
import pytest

from gradflow import harness, klcert, rates, tvflow, wflow1d
from gradflow.core import euclidean, total_dissipation
from gradflow.mms import MMConfig, ProxOracle, evolve
from oracles import ou_w2


def report(log, n, desc, ok, **values):
    vals = ", ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                     for k, v in values.items())
    line = f"{'PASS' if ok else 'FAIL'} [{n}] {desc}: {vals}"
    print(line)
    log.append(line)
    assert ok, line


def test_criterion_01_disc_extinction(disc_run, acceptance_log):
    inst, run = disc_run
    audit = tvflow.extinction_audit(inst, run, require_affine=True)
    a, R = 1.0, 0.25
    t = run.t_star
    ok = (run.reached and 0.106 <= t <= 0.144 and audit.r2 >= 0.99
          and t <= a * R * math.sqrt(2 * math.pi))
    report(acceptance_log, 1, "disc extinction time, affine decay, sqrt(2 pi) bound", ok,
           t_star=t, window="[0.106, 0.144]", r2=audit.r2, bound=a * R * math.sqrt(2 * math.pi),
           fitted_slope=audit.slope)


def test_criterion_02_extinction_bound(disc_run, acceptance_log):
    inst, run = disc_run
    profile = rates.extinction_bound_profile(run.traj, tvflow.S2, 0.0)
    violations = int(np.sum(profile < run.t_star))
    inf = rates.extinction_bound_inf(run.traj, tvflow.S2, 0.0)
    ok = inst.constant == tvflow.S2 and violations == 0 and inf >= run.t_star
    report(acceptance_log, 2, "inf_s (s + S2 E(v(s))) dominates T* at every sample", ok,
           violations=violations, samples=len(profile), inf_bound=inf,
           t_star=run.t_star)


def test_criterion_03_neumann_mean(acceptance_log):
    start = time.perf_counter()
    inst = tvflow.make_instance(tvflow.box(256, 0.0, 0.5, 1.0, bc="neumann"))
    run = tvflow.run_tv_flow(inst, 1e-4, 0.3)
    elapsed = time.perf_counter() - start
    means = np.array([s.mean() for s in run.traj.states])
    drift = float(np.max(np.abs(np.diff(means))))
    final = float(np.max(np.abs(run.traj.states[-1].values - 0.5)))
    ok = run.reached and final <= 1e-6 and drift <= 1e-12 and elapsed <= 30
    report(acceptance_log, 3, "Neumann flow reaches the mean 0.5 with conserved mean", ok,
           t_star=run.t_star, final_max_dev=final, max_step_drift=drift, seconds=elapsed)


def test_criterion_04_fokker_planck(fp_trajectory, fp_equilibrium, acceptance_log):
    tr = fp_trajectory
    W = np.array([wflow1d.wasserstein_p(X, fp_equilibrium, 2) for X in tr.states])
    exact = ou_w2(tr.times)
    rel = float(np.max(np.abs(W / exact - 1)))
    rate = float(np.polyfit(tr.times, np.log(W), 1)[0])
    ok = tr.times[-1] >= 3 - 1e-9 and rel <= 0.03 and rate <= -0.95
    report(acceptance_log, 4, "W2 decay against the Ornstein-Uhlenbeck closed form", ok,
           max_rel_error=rel, fitted_rate=rate, M=tr.states[0].M)


def test_criterion_05_inequality_suite(fp_spec, fp_equilibrium, acceptance_log):
    start = time.perf_counter()
    rng = np.random.default_rng(5)
    mus = [wflow1d.gaussian(2.0, 1.0, 2048)]
    mus += [wflow1d.gaussian(rng.uniform(-2, 2), rng.uniform(0.5, 2), 2048) for _ in range(100)]
    names = ("ET", "Talagrand", "LogSobolev", "HWI")
    fails, worst, identity = 0, math.inf, 0.0
    for mu in mus:
        aud = wflow1d.audit_inequalities(fp_spec, mu, fp_equilibrium)
        for n in names:
            r = aud.get(n)
            fails += r["status"] != "PASS"
            worst = min(worst, r["slack"] / max(abs(r["lhs"]), abs(r["rhs"]), 1e-300))
        g, ls = aud.get(f"genLS[{fp_spec.lambda_V:g}]"), aud.get("LogSobolev")
        identity = max(identity, abs(g["lhs"] - ls["lhs"]), abs(g["rhs"] - ls["rhs"]))
    elapsed = time.perf_counter() - start
    ok = fails == 0 and identity <= 1e-12 and elapsed <= 120
    report(acceptance_log, 5, "ET, Talagrand, log-Sobolev, HWI on 101 Gaussians", ok,
           failures=fails, worst_relative_slack=worst, genLS_identity=identity, seconds=elapsed)


def test_criterion_06_decay_chain(fp_spec, fp_trajectory, fp_equilibrium, acceptance_log):
    rep = wflow1d.decay_audit(fp_spec, fp_trajectory, fp_equilibrium)
    ok = fp_spec.lambda_V == 0.5 and rep.passed
    report(acceptance_log, 6, "transport bound and exponential envelope along the flow", ok,
           worst_transport_slack=float(np.min(rep.slack_transport)),
           worst_envelope_slack=float(np.min(rep.slack_envelope)), samples=len(rep.times))


def _ball(seed, n, radius):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, 2))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return z * radius * rng.uniform(0, 1, (n, 1)) ** 0.5


@pytest.mark.parametrize("name, lo, hi", [("quadratic", 0.45, 0.55), ("quartic", 0.70, 0.80)])
def test_criterion_07_ls_exponent(name, lo, hi, acceptance_log):
    E = harness.make_energy(name)
    start = time.perf_counter()
    cloud = klcert.SampleCloud.from_energy(_ball(7, 10_000, 0.1), E.value, E.slope, E.phi)
    study = klcert.fit_ls(cloud)
    elapsed = time.perf_counter() - start
    a = study.alpha_regression
    report(acceptance_log, 7, f"alpha_regression for the {name} energy", lo <= a <= hi
           and elapsed <= 10, alpha_regression=a, window=f"[{lo}, {hi}]",
           alpha_implied=study.alpha_implied, seconds=elapsed)


def test_criterion_08_certificate_soundness(acceptance_log):
    margins = {}
    for name in ("quadratic", "quartic", "coscup", "polynomial"):
        E = harness.make_energy(name)
        pts = E.phi + _ball(8, 4000, 0.5)
        cloud = klcert.SampleCloud.from_energy(pts, E.value, E.slope, E.phi)
        cert = klcert.build_theta(klcert.level_profile(cloud, 32), 2.0, cloud)
        margins[name] = klcert.verify_kl(cert, cloud)["margin"]
    E = harness.make_energy("quadratic")
    cloud = klcert.SampleCloud.from_energy(_ball(9, 4000, 0.1), E.value, E.slope, E.phi)
    fit = klcert.fit_ls(cloud).fit_for(0.5)
    eq = klcert.et_ls_equivalence(cloud, fit, [E.phi], E.lam)
    ok = all(m >= 0 for m in margins.values()) and eq.passed
    report(acceptance_log, 8, "KL margins on generating clouds and LS/ET equivalence", ok,
           **{f"margin_{k}": float(v) for k, v in margins.items()},
           et_slack=eq.et_slack, ls_slack=eq.ls_slack)


def test_criterion_09_decay_formulas(acceptance_log):
    pred = rates.predict(p=2, alpha=1, c=1, t0=0, E0=0.5)
    worst = 0.0
    grid = [(p, a) for p in (1.5, 2.0, 3.0, 4.0, 6.0) for a in (0.7, 0.8, 0.9, 1.0)]
    for p, a in grid:
        beta = (p * a - 1) / (a * (p - 1))
        t0 = 0.3
        one = rates.predict(p, a, 1.7, t0, 0.8).t_hat - t0
        two = rates.predict(p, a, 1.7, t0, 1.6).t_hat - t0
        worst = max(worst, abs(two / one / 2 ** beta - 1))
    ok = (pred.t_hat == pytest.approx(0.5, abs=1e-15) and pred.c_tilde == pytest.approx(1.0, abs=1e-15)
          and len(grid) == 20 and worst <= 1e-12)
    report(acceptance_log, 9, "extinction time example and E0 scaling identity", ok,
           t_hat=pred.t_hat, c_tilde=pred.c_tilde, grid_points=len(grid), worst_rel_error=worst)


def _quadratic_residuals():
    E = harness.make_energy("quadratic", Q=[1.0, 0.0, 0.0, 3.0])
    Q = E.hess_phi
    prox = ProxOracle(lambda tau, v, p: np.linalg.solve(np.eye(2) + tau * Q, v))
    out = []
    for tau in (0.1, 0.05, 0.025):
        tr = evolve(prox, E.oracle(), np.array([1.0, 0.5]), MMConfig(tau=tau, horizon=1.0))
        out.append(total_dissipation(tr, 2.0, euclidean))
    return out


def _tv_residuals(v0):
    inst = tvflow.make_instance(v0)
    out = []
    for tau in (0.01, 0.005, 0.0025):
        run = tvflow.run_tv_flow(inst, tau, 0.4)
        out.append(total_dissipation(run.traj, 2.0, tvflow.l2_distance))
    return out


@pytest.mark.parametrize("instance", ["quadratic", "tv-neumann", "tv-dirichlet"])
def test_criterion_10_dissipation_convergence(instance, acceptance_log):
    if instance == "quadratic":
        reps = _quadratic_residuals()
    elif instance == "tv-neumann":
        reps = _tv_residuals(tvflow.box(256, 0.0, 0.5, 1.0, bc="neumann"))
    else:
        reps = _tv_residuals(tvflow.box(256, 0.25, 0.75, 1.0, bc="dirichlet"))
    res = [abs(r.residual) for r in reps]
    rel = res[-1] / reps[-1].lhs
    ok = res[0] > res[1] > res[2] and rel <= 0.02
    report(acceptance_log, 10, f"EDE residual across tau, tau/2, tau/4 ({instance})", ok,
           residuals="/".join(f"{r:.3g}" for r in res), final_over_drop=rel)
