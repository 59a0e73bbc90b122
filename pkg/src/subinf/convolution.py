"""Sup and inf convolutions with the gauge-power kernel, plus domain shrinking.

The sup convolution of a field u at scale eps is the exact discrete maximum

    u^eps(x) = max_y [ u(y) - K(x, y) / (2 eps) ]

over all non-exterior nodes y, where K(x, y) is the gauge norm of x * y^-1
raised to the homogeneity exponent (``kernel="right"``, the default) or of
x^-1 * y (``kernel="left"``).  Both agree on euclidean geometries.  The
maximisation prunes candidates using the attainment bound K <= 4 R0 eps
(R0 = 2 ||u||_inf) with slack 2h; the pruned set always contains y = x, so
pruning never changes the maximum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .grids import GridDomain, ScalarField
from .groups import gauge_kernel, inverse, multiply


def _kernel_rows(dom: GridDomain, x_coords: np.ndarray, y_coords: np.ndarray, kernel: str) -> np.ndarray:
    spec = dom.spec
    if kernel == "right":
        diff = multiply(spec, x_coords[:, None, :], inverse(spec, y_coords)[None, :, :])
    elif kernel == "left":
        diff = multiply(spec, inverse(spec, x_coords)[:, None, :], y_coords[None, :, :])
    else:
        raise ParameterError(f"kernel must be 'right' or 'left', got {kernel!r}")
    return gauge_kernel(spec, diff)


@dataclass
class ConvolutionReport:
    """Result of a sup or inf convolution."""

    field: ScalarField
    epsilon: float
    side: str
    attainment: np.ndarray  # flat index of the attaining node, -1 off-lattice
    r0: float
    shrunken: np.ndarray  # nodes of shrink_domain(domain, (1 + 4 r0) eps)


def shrink_domain(dom: GridDomain, eps: float, kernel: str = "right") -> np.ndarray:
    """Interior nodes at kernel distance >= eps from the boundary band.

    Returns the flat indices of {x interior : min_y in band K(x, y) >= eps}.
    eps = 0 keeps every interior node.
    """
    if eps < 0:
        raise ParameterError(f"shrink threshold must be nonnegative, got {eps}")
    interior = dom.interior_flat
    if eps == 0.0 or dom.boundary_flat.size == 0:
        return interior.copy()
    band = dom.coords[dom.boundary_flat]
    keep = np.zeros(interior.size, dtype=bool)
    chunk = max(1, 2_000_000 // max(band.shape[0], 1))
    for start in range(0, interior.size, chunk):
        xs = dom.coords[interior[start : start + chunk]]
        K = _kernel_rows(dom, xs, band, kernel)
        keep[start : start + xs.shape[0]] = K.min(axis=1) >= eps
    return interior[keep]


def sup_convolution(u: ScalarField, eps: float, kernel: str = "right") -> ConvolutionReport:
    """Exact discrete sup convolution at scale eps > 0."""
    if eps <= 0:
        raise ParameterError(f"sup convolution needs eps > 0, got {eps}")
    dom = u.domain
    nodes = dom.nonexterior_flat
    y_coords = dom.coords[nodes]
    u_y = u.values[nodes]
    r0 = 2.0 * u.sup_norm()
    threshold = 4.0 * r0 * eps + 2.0 * dom.h
    out = np.full(dom.n_nodes, np.nan)
    arg = np.full(dom.n_nodes, -1, dtype=np.int64)
    chunk = max(1, 2_000_000 // max(nodes.size, 1))
    inv_two_eps = 1.0 / (2.0 * eps)
    for start in range(0, nodes.size, chunk):
        xs_idx = nodes[start : start + chunk]
        K = _kernel_rows(dom, dom.coords[xs_idx], y_coords, kernel)
        vals = u_y[None, :] - K * inv_two_eps
        vals = np.where(K <= threshold, vals, -np.inf)
        best = np.argmax(vals, axis=1)
        rows = np.arange(xs_idx.size)
        out[xs_idx] = vals[rows, best]
        arg[xs_idx] = nodes[best]
    field = ScalarField(dom, out, validate=False)
    shrunk = shrink_domain(dom, (1.0 + 4.0 * r0) * eps, kernel)
    return ConvolutionReport(field, eps, "sup", arg, r0, shrunk)


def inf_convolution(v: ScalarField, eps: float, kernel: str = "right") -> ConvolutionReport:
    """Inf convolution, computed by duality as -sup_convolution(-v)."""
    neg = ScalarField(v.domain, -v.values, validate=False)
    rep = sup_convolution(neg, eps, kernel)
    field = ScalarField(v.domain, -rep.field.values, validate=False)
    return ConvolutionReport(field, eps, "inf", rep.attainment, rep.r0, rep.shrunken)


def semiconvexity_modulus(u: ScalarField) -> float:
    """Most negative centred second difference over interior nodes and axes.

    Values are divided by h^2, so a smooth field reports roughly its smallest
    pure second derivative (e.g. -2 for u = -|x|^2).
    """
    dom = u.domain
    vals = u.values
    worst = np.inf
    for axis in range(dom.spec.dim):
        stride = int(dom.strides[axis])
        pos = dom.multi_indices[:, axis]
        ok = (
            dom.interior_mask
            & (pos >= 1)
            & (pos <= dom.dims[axis] - 2)
        )
        idx = np.flatnonzero(ok)
        usable = dom.nonexterior_mask[idx - stride] & dom.nonexterior_mask[idx + stride]
        idx = idx[usable]
        if idx.size == 0:
            continue
        second = vals[idx + stride] - 2.0 * vals[idx] + vals[idx - stride]
        worst = min(worst, float(second.min()) / dom.h**2)
    if not np.isfinite(worst):
        raise ParameterError("domain has no interior node with two axis neighbours")
    return worst


def kernel_second_difference_bound(dom: GridDomain, kernel: str = "right") -> float:
    """Max positive centred second x-difference of the kernel, over all (x, y).

    Divided by h^2; used as the measured constant C_d in the semiconvexity
    bound modulus(u^eps) >= -C_d / eps.
    """
    nodes = dom.nonexterior_flat
    y_coords = dom.coords[nodes]
    worst = 0.0
    for axis in range(dom.spec.dim):
        stride = int(dom.strides[axis])
        pos = dom.multi_indices[:, axis]
        ok = dom.interior_mask & (pos >= 1) & (pos <= dom.dims[axis] - 2)
        idx = np.flatnonzero(ok)
        usable = dom.nonexterior_mask[idx - stride] & dom.nonexterior_mask[idx + stride]
        idx = idx[usable]
        if idx.size == 0:
            continue
        chunk = max(1, 1_000_000 // max(nodes.size, 1))
        for start in range(0, idx.size, chunk):
            sel = idx[start : start + chunk]
            Kc = _kernel_rows(dom, dom.coords[sel], y_coords, kernel)
            Kp = _kernel_rows(dom, dom.coords[sel + stride], y_coords, kernel)
            Km = _kernel_rows(dom, dom.coords[sel - stride], y_coords, kernel)
            second = (Kp - 2.0 * Kc + Km) / dom.h**2
            worst = max(worst, float(second.max()))
    return worst
