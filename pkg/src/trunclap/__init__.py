"""trunclap: certified eigenvalue bounds for the truncated Laplacian.

The truncated Laplacian of order k sums the k smallest Hessian eigenvalues;
with a first-order drift term -h|grad u| it becomes a degenerate Bellman
operator.  This package provides

* exact partial-trace spectral helpers (:mod:`trunclap.spectral`),
* explicit radial supersolution profiles with verified residuals
  (:mod:`trunclap.radial`),
* greedy ball covers and gauge sums for compact sets
  (:mod:`trunclap.covering`),
* assembled supersolution certificates turning a cover into a principal
  eigenvalue lower bound (:mod:`trunclap.supersol`),
* a monotone wide-stencil grid operator (:mod:`trunclap.grid`) and three
  independent eigenvalue solvers on top of it (:mod:`trunclap.eigen`),
* report figures (:mod:`trunclap.plots`) and a CLI (:mod:`trunclap.cli`).
"""

from . import covering, eigen, grid, radial, spectral, supersol

__version__ = "0.1.0"

__all__ = [
    "covering",
    "eigen",
    "grid",
    "radial",
    "spectral",
    "supersol",
    "__version__",
]
