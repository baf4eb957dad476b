"""Spectral laboratory for the Dirichlet Laplacian on conical layers.

Modules
-------
specfun      Bessel functions of order 0 and 1, the Airy function and their zeros.
geometry     Meridian domains, coordinate maps and graded column meshes.
assembly     Weighted finite element stiffness and mass matrices of the fiber forms.
eigensolve   Shift-invert block Lanczos with inertia certification, dense oracle.
potential1d  Effective Born-Oppenheimer potential and 1D model operators.
asymptotics  Closed-form asymptotic laws, staircases, Agmon diagnostics.
cli          Experiment runner (``conilay`` console script).
"""

__version__ = "0.1.0"
