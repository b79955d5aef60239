"""Entropy-transport, log-Sobolev, HWI and decay audits for quantile flows.

With ``E(mu|nu) = E(mu) - E(nu)``, ``W = W_p(mu, nu)``, ``I = I_p'(mu)``,
``lam = lambda_V`` and ``K(l) = (p-1)/p^p' * l^(-1/(p-1))`` the audited
inequalities are

    ET              lam W^p                     <= E(mu|nu)
    Talagrand       W                           <= lam^(-1/p) E(mu|nu)^(1/p)
    genLS(l)        E(mu|nu) + (lam - l) W^p    <= K(l) I
    LogSobolev      E(mu|nu)                    <= K(lam) I
    HWI             E(mu|nu) + lam W^p          <= I^(1/p') W
    LS              E(mu|nu)^(1/p')             <= lam^(-1/p) I^(1/p')
    LogS            E(mu|nu)                    <= lam^(-1/(p-1)) I
    decay-transport W                           <= (p-1)^(1/p') lam^(-1/p) E(mu|nu)^(1/p)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..core import Trajectory
from .energy import FreeEnergySpec, energy_array, fisher_information
from .jko import EQ_TOL
from .quantile import QuantileRepr, wasserstein_p

__all__ = ["InequalityAudit", "DecayAudit", "K_const", "audit_inequalities", "decay_audit",
           "EquilibriumResidualError"]

REL_TOL = 1e-8


class EquilibriumResidualError(ValueError):
    """The reference measure is not an equilibrium to the required accuracy."""


def K_const(p: float, lam_hat: float) -> float:
    """``(p-1)/p^p' * lam_hat^(-1/(p-1))``."""
    q = p / (p - 1.0)
    return (p - 1.0) / p ** q * lam_hat ** (-1.0 / (p - 1.0))


def _tol(lhs, rhs, floor):
    return REL_TOL * max(abs(lhs), abs(rhs)) + floor


@dataclass
class InequalityAudit:
    """Records ``{name, lhs, rhs, slack, status}`` with ``slack = rhs - lhs``."""

    records: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)

    def add(self, name, lhs, rhs, floor):
        slack = rhs - lhs
        tol = _tol(lhs, rhs, floor)
        self.records.append({"name": name, "lhs": float(lhs), "rhs": float(rhs),
                             "slack": float(slack), "tol": float(tol),
                             "status": "PASS" if slack >= -tol else "FAIL"})

    def get(self, name: str) -> dict:
        for r in self.records:
            if r["name"] == name:
                return r
        raise KeyError(name)

    @property
    def passed(self) -> bool:
        return all(r["status"] == "PASS" for r in self.records)

    def to_dict(self) -> dict:
        return {"records": self.records, "constants": self.constants, "passed": self.passed}


def _check_equilibrium(spec, nu, q):
    e_nu = energy_array(spec, nu.X)
    info = fisher_information(spec, nu, q)
    if not info.I <= EQ_TOL * (1.0 + abs(e_nu)):
        raise EquilibriumResidualError(f"Fisher information of nu is {info.I:.3g}")
    return e_nu, info.I


def audit_inequalities(spec: FreeEnergySpec, mu: QuantileRepr, nu: QuantileRepr, p: float = 2.0,
                       lam_hats: Optional[Sequence[float]] = None,
                       lam: Optional[float] = None) -> InequalityAudit:
    """Evaluate the inequality suite at ``mu`` relative to the equilibrium ``nu``.

    ``lam`` overrides the declared ``lambda_V``. Status uses a relative
    tolerance of ``1e-8`` plus a floor of ``1e-14 (1 + |E(nu)|)`` for the
    rounding of energy differences. Inequalities stated through a root of
    the relative entropy take the same root of the floor.

    Raises
    ------
    EquilibriumResidualError
        If ``nu`` is not stationary (all constants presume it is).
    """
    lam = spec.lambda_V if lam is None else lam
    if lam is None or not lam > 0:
        raise ValueError("the audit needs lambda_V > 0")
    q = p / (p - 1.0)
    e_nu, i_nu = _check_equilibrium(spec, nu, q)
    floor = 1e-14 * (1.0 + abs(e_nu))
    H = energy_array(spec, mu.X) - e_nu
    W = wasserstein_p(mu, nu, p)
    I = fisher_information(spec, mu, q).I
    Hp = max(H, 0.0)
    aud = InequalityAudit(constants={"p": p, "p_dual": q, "lambda_V": lam, "E_rel": H, "W": W,
                                     "I": I, "nu_fisher": i_nu, "K(lambda_V)": K_const(p, lam)})
    aud.add("ET", lam * W ** p, H, floor)
    aud.add("Talagrand", W, lam ** (-1.0 / p) * Hp ** (1.0 / p),
            lam ** (-1.0 / p) * floor ** (1.0 / p))
    for lh in ([lam] if lam_hats is None else lam_hats):
        aud.add(f"genLS[{lh:g}]", H + (lam - lh) * W ** p, K_const(p, lh) * I, floor)
    aud.add("LogSobolev", H, K_const(p, lam) * I, floor)
    aud.add("HWI", H + lam * W ** p, I ** (1.0 / q) * W, floor)
    aud.add("LS", Hp ** (1.0 / q), lam ** (-1.0 / p) * I ** (1.0 / q), floor ** (1.0 / q))
    aud.add("LogS", H, lam ** (-1.0 / (p - 1.0)) * I, floor)
    A = (p - 1.0) ** (1.0 / q) * lam ** (-1.0 / p)
    aud.add("decay-transport", W, A * Hp ** (1.0 / p), A * floor ** (1.0 / p))
    return aud


@dataclass
class DecayAudit:
    """Per-sample slacks of the transport bound and the exponential envelope."""

    times: np.ndarray
    W: np.ndarray
    E: np.ndarray
    transport_bound: np.ndarray
    envelope: np.ndarray
    slack_transport: np.ndarray
    slack_envelope: np.ndarray
    rate: float
    prefactor: float
    transport_pass: bool
    envelope_pass: bool

    @property
    def passed(self) -> bool:
        return self.transport_pass and self.envelope_pass

    def to_dict(self) -> dict:
        return {"rate": self.rate, "prefactor": self.prefactor,
                "transport_pass": self.transport_pass, "envelope_pass": self.envelope_pass,
                "worst_transport_slack": float(np.min(self.slack_transport)),
                "worst_envelope_slack": float(np.min(self.slack_envelope)),
                "passed": self.passed}


def decay_audit(spec: FreeEnergySpec, traj: Trajectory, nu: QuantileRepr, p: float = 2.0,
                lam: Optional[float] = None) -> DecayAudit:
    """Check ``W <= A E^(1/p) <= A E0^(1/p) exp(-rate (t - t0))`` along a trajectory.

    ``A = (p-1)^(1/p') lam^(-1/p)`` and ``rate = p^(1/p) lam^(1/(p-1)) / (p-1)``.
    """
    lam = spec.lambda_V if lam is None else lam
    if lam is None or not lam > 0:
        raise ValueError("the audit needs lambda_V > 0")
    q = p / (p - 1.0)
    e_nu, _ = _check_equilibrium(spec, nu, q)
    A = (p - 1.0) ** (1.0 / q) * lam ** (-1.0 / p)
    floor = A * (1e-14 * (1.0 + abs(e_nu))) ** (1.0 / p)
    rate = p ** (1.0 / p) * lam ** (1.0 / (p - 1.0)) / (p - 1.0)
    t = traj.times
    E = np.array([energy_array(spec, X.X) for X in traj.states]) - e_nu
    W = np.array([wasserstein_p(X, nu, p) for X in traj.states])
    tb = A * np.maximum(E, 0.0) ** (1.0 / p)
    env = A * max(E[0], 0.0) ** (1.0 / p) * np.exp(-rate * (t - t[0]))
    s1 = tb - W
    s2 = env - tb
    tol1 = REL_TOL * np.maximum(np.abs(tb), np.abs(W)) + floor
    tol2 = REL_TOL * np.maximum(np.abs(tb), np.abs(env)) + floor
    return DecayAudit(t, W, E, tb, env, s1, s2, rate, A, bool(np.all(s1 >= -tol1)),
                      bool(np.all(s2 >= -tol2)))
