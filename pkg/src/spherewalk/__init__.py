"""Grid-free Monte Carlo solutions of second-order linear elliptic PDEs.

Solves div(alpha grad u) + omega . grad u - sigma u = -f with Dirichlet
data on arbitrary 2D/3D domains by walking on spheres: each estimate is an
independent random walk that only ever asks the geometry for a distance,
so no volumetric mesh or grid is built. Variable coefficients are handled
by transforming the PDE to a screened Poisson form and compensating the
spatially varying screening with delta-tracking or next-flight estimators
inside each ball.
"""

from __future__ import annotations

__version__ = "0.1.0"
