"""Gradient flows in metric spaces by minimizing movements.

Subpackages and modules
-----------------------
core      trajectories, metric derivatives, slopes, dissipation checks
mms       minimizing-movement time stepping
klcert    Kurdyka-Lojasiewicz certificates and Lojasiewicz exponent fits
rates     decay and extinction predictions
tvflow    total variation flows on grids
wflow1d   1D p-Wasserstein flows in quantile coordinates
harness   configuration, experiments, plots and the command line
"""

__version__ = "0.1.0"
