"""Minimizing Lipschitz extensions and subelliptic infinity-Laplace solves
on Carnot-Caratheodory grids: euclidean(n), the first Heisenberg group and
the Grushin plane.

The usual entry points:

    groups.from_id / euclidean / heisenberg1 / grushin
    grids.GridDomain.box, grids.ScalarField
    calculus.horizontal_gradient / infinity_laplacian / aronsson_residual
    metric.build_graph / cc_distance
    convolution.sup_convolution / inf_convolution
    solver.infinity_solve / aux_solve / minimize_k / strictify
    verify.viscosity_check / comparison_check / amle_check
"""

__version__ = "0.1.0"

from . import (  # noqa: F401
    calculus,
    convolution,
    errors,
    grids,
    groups,
    integrands,
    metric,
    solver,
    verify,
)
