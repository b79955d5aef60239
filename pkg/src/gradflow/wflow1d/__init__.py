"""1D p-Wasserstein gradient flows of free energies in quantile coordinates."""

from .audit import (DecayAudit, EquilibriumResidualError, InequalityAudit, K_const,
                    audit_inequalities, decay_audit)
from .energy import (FisherInfo, FreeEnergySpec, Internal, Potential, energy_array, entropy,
                     fisher_information, free_energy, gap_min, linear_potential, power, preset,
                     quadratic_potential, velocity)
from .jko import EQ_TOL, JKOResult, JKOWarning, equilibrium_solve, jko_solve, jko_step, run_wflow
from .quantile import QuantileRepr, from_ppf, gaussian, midpoints, wasserstein_p

__all__ = [
    "QuantileRepr", "from_ppf", "gaussian", "midpoints", "wasserstein_p",
    "FreeEnergySpec", "Internal", "Potential", "FisherInfo", "entropy", "power",
    "quadratic_potential", "linear_potential", "preset", "free_energy", "energy_array",
    "velocity", "fisher_information", "gap_min",
    "JKOResult", "JKOWarning", "EQ_TOL", "jko_solve", "jko_step", "equilibrium_solve", "run_wflow",
    "InequalityAudit", "DecayAudit", "EquilibriumResidualError", "K_const",
    "audit_inequalities", "decay_audit",
]
