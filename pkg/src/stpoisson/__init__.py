"""Spatio-temporal discretization and Poisson intensity calibration.

Submodules:
    geometry    planar polygon primitives (area, clipping, hulls, Voronoi)
    spacegrid   spatial discretizations, neighbor graphs, attribute transfer
    timegrid    periodic time discretizations, day classes, custom subsets
    events      event aggregation into count tensors, fold splitting
    intensity   regularized no-covariate intensity model
    covariates  linear-in-covariates intensity model
    projgrad    projected gradient solvers and gap-based stopping
    crossval    held-out-likelihood weight selection
    synthetic   benchmark scenario generators and the error metric
    cli         command-line front-end
"""

__version__ = "0.1.0"
