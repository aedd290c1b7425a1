"""
Coriolis branches - closed orbits emanating from equilibria of rotating-frame systems.

Modules:
    linalg: characteristic polynomials, Morse indices, De Gua root counts
    spectrum: the matrices A and S_T and their closed-form factorizations
    classify: regions of the (beta1, beta2) plane and bifurcation numbers
    degree: winding degree of planar fields along segment/arc curves
    rt4bp: restricted triangular four-body problem
    dynamics: flows, shooting and pseudo-arclength continuation
    cli: command-line front end
"""

__version__ = "0.1.0"

__all__ = [
    "classify",
    "cli",
    "config",
    "degree",
    "dynamics",
    "linalg",
    "models",
    "rt4bp",
    "spectrum",
    "utils",
]
