"""Total variation flows on uniform 1D and 2D grids."""

from .energy import grad1d, grad2d, grad2d_adjoint, tv_energy
from .flow import (S2, ExtinctionAudit, TVInstance, TVProx, TVRun, et_constant_1d,
                   et_constant_2d_neumann, extinction_audit, make_instance, run_tv_flow)
from .grid import GridFunction, box, disc, from_csv, l2_distance
from .prox import (Prox2DResult, ProxCertificateError, certificate_1d, tv_denoise_1d,
                   tv_prox_1d, tv_prox_2d)

__all__ = [
    "GridFunction", "box", "disc", "from_csv", "l2_distance",
    "tv_energy", "grad1d", "grad2d", "grad2d_adjoint",
    "tv_denoise_1d", "certificate_1d", "tv_prox_1d", "tv_prox_2d",
    "Prox2DResult", "ProxCertificateError",
    "S2", "TVInstance", "TVProx", "TVRun", "ExtinctionAudit", "make_instance",
    "et_constant_1d", "et_constant_2d_neumann", "run_tv_flow", "extinction_audit",
]
