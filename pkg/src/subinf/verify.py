"""Empirical checks of the structural properties behind the solvers.

Four audits: degenerate subellipticity of the shipped operators,
viscosity sub/supersolution tests via discretely certified touching
quadratics, the comparison-principle margin, and the absolutely
minimizing property on random sub-boxes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .calculus import horizontal_gradient
from .errors import ParameterError
from .grids import EXTERIOR, GridDomain, ScalarField, require_same_lattice
from .groups import horizontal_frame
from .integrands import Integrand
from .solver import BoundaryData, SolverConfig, infinity_solve

_KINDS = ("infinity_laplacian", "aronsson", "aux_lower", "aux_upper", "custom")


@dataclass(frozen=True)
class OperatorSpec:
    """A degenerate operator A(x, p, M) acting on second-order jets.

    p is an m-vector (horizontal gradient), M an m-by-m symmetric
    matrix (symmetrized horizontal Hessian).  The shipped kinds ignore
    x; kind='custom' wraps an arbitrary evaluator, which the test suite
    uses for deliberately broken controls.
    """

    kind: str
    f: Optional[Integrand] = None
    eps: float = 0.0
    evaluator: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ParameterError("unknown operator kind %r" % (self.kind,))
        if self.kind == "custom" and self.evaluator is None:
            raise ParameterError("custom operators need an evaluator")
        if self.kind in ("aronsson", "aux_lower", "aux_upper") and self.f is None:
            raise ParameterError("%s needs an integrand" % (self.kind,))
        if self.kind in ("aux_lower", "aux_upper") and self.eps <= 0:
            raise ParameterError("auxiliary operators need eps > 0")

    @classmethod
    def infinity_laplacian(cls) -> "OperatorSpec":
        return cls(kind="infinity_laplacian")

    @classmethod
    def aronsson(cls, f: Integrand) -> "OperatorSpec":
        return cls(kind="aronsson", f=f)

    @classmethod
    def aux_lower(cls, f: Integrand, eps: float) -> "OperatorSpec":
        return cls(kind="aux_lower", f=f, eps=eps)

    @classmethod
    def aux_upper(cls, f: Integrand, eps: float) -> "OperatorSpec":
        return cls(kind="aux_upper", f=f, eps=eps)

    @classmethod
    def custom(cls, evaluator: Callable) -> "OperatorSpec":
        return cls(kind="custom", evaluator=evaluator)

    def evaluate(self, x, p, M) -> np.ndarray:
        """A(x, p, M), vectorized over leading axes of p and M."""
        p = np.asarray(p, dtype=float)
        M = np.asarray(M, dtype=float)
        if self.kind == "custom":
            return np.asarray(self.evaluator(x, p, M), dtype=float)
        if self.kind == "infinity_laplacian":
            w = p
        else:
            w = self.f.grad(p)
        principal = -np.einsum("...i,...ij,...j->...", w, M, w)
        if self.kind in ("infinity_laplacian", "aronsson"):
            return principal
        fv = self.f.value(p)
        if self.kind == "aux_lower":
            return np.minimum(fv - self.eps, principal)
        return np.maximum(self.eps - fv, principal)


def subelliptic_check(op: OperatorSpec, samples: int, m: int = 2,
                      seed: int = 0):
    """Monotonicity in the matrix slot: A(x,p,M) <= A(x,p,M-E) for PSD E.

    Returns (passed, worst margin) where the margin is the largest
    observed A(x,p,M) - A(x,p,M-E); anything above 1e-9 fails.
    """
    if samples < 1:
        raise ParameterError("samples must be at least 1")
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(samples, m))
    p = rng.normal(size=(samples, m)) * rng.uniform(0.0, 3.0, (samples, 1))
    B = rng.normal(size=(samples, m, m))
    M = 0.5 * (B + np.swapaxes(B, 1, 2))
    C = rng.normal(size=(samples, m, m))
    E = np.einsum("kji,kjl->kil", C, C)
    worst = float(np.max(op.evaluate(x, p, M) - op.evaluate(x, p, M - E)))
    return worst <= 1e-9, worst


@dataclass
class ViscosityReport:
    """Worst per-node violations of the touching-quadratic inequalities.

    subsolution_violations[i] is the largest positive A over quadratics
    certified to touch u from above at interior node i (the definition
    demands A <= 0 there); supersolution_violations mirrors it from
    below with A >= 0.  jets_above/jets_below count certified jets.
    """

    domain: GridDomain
    subsolution_violations: np.ndarray
    supersolution_violations: np.ndarray
    jets_above: int
    jets_below: int
    candidates: int
    tol: float

    @property
    def worst_subsolution_violation(self) -> float:
        return float(np.max(self.subsolution_violations, initial=0.0))

    @property
    def worst_supersolution_violation(self) -> float:
        return float(np.max(self.supersolution_violations, initial=0.0))

    @property
    def passed(self) -> bool:
        return (self.worst_subsolution_violation <= self.tol
                and self.worst_supersolution_violation <= self.tol)


def _stencil_table(domain: GridDomain, radius: int = 2):
    """Offsets delta and per-interior-node neighbor values u(x + delta).

    Neighbors outside the lattice or in the exterior are NaN and are
    skipped by the touching filter.
    """
    n = domain.spec.dim
    ticks = np.arange(-radius, radius + 1)
    grids = np.meshgrid(*([ticks] * n), indexing="ij")
    offs = np.stack([g.reshape(-1) for g in grids], axis=1)
    inodes = domain.interior_flat
    mi = domain.multi_indices[inodes]
    dims = np.asarray(domain.dims)
    nb_multi = mi[:, None, :] + offs[None, :, :]
    inside = np.all((nb_multi >= 0) & (nb_multi < dims[None, None, :]), axis=2)
    nb_flat = np.clip(nb_multi, 0, dims - 1) @ domain.strides
    valid = inside & (domain.classification[nb_flat] != EXTERIOR)
    return offs, nb_flat, valid


def _second_difference_matrices(u: ScalarField):
    """Dense symmetric n-by-n second differences at interior nodes.

    Diagonal entries are the usual centered second differences; mixed
    entries use the four-point cross stencil and fall back to zero when
    a corner neighbor is missing.
    """
    dom = u.domain
    n = dom.spec.dim
    h = dom.h
    inodes = dom.interior_flat
    mi = dom.multi_indices[inodes]
    dims = np.asarray(dom.dims)
    vals = u.values

    def at(offset):
        nb = mi + np.asarray(offset)[None, :]
        inside = np.all((nb >= 0) & (nb < dims[None, :]), axis=1)
        flat = np.clip(nb, 0, dims - 1) @ dom.strides
        ok = inside & (dom.classification[flat] != EXTERIOR)
        out = np.where(ok, vals[flat], np.nan)
        return out

    center = vals[inodes]
    D2 = np.zeros((inodes.size, n, n))
    for a in range(n):
        e = np.zeros(n, dtype=int)
        e[a] = 1
        D2[:, a, a] = (at(e) - 2.0 * center + at(-e)) / (h * h)
    for a in range(n):
        for b in range(a + 1, n):
            ea = np.zeros(n, dtype=int)
            eb = np.zeros(n, dtype=int)
            ea[a] = 1
            eb[b] = 1
            cross = (at(ea + eb) - at(ea - eb) - at(eb - ea) + at(-ea - eb)) \
                / (4.0 * h * h)
            cross = np.where(np.isfinite(cross), cross, 0.0)
            D2[:, a, b] = cross
            D2[:, b, a] = cross
    D2[~np.isfinite(D2)] = 0.0
    return D2


def _one_sided_slopes(u: ScalarField):
    """Forward and backward axis slopes at interior nodes."""
    dom = u.domain
    n = dom.spec.dim
    h = dom.h
    inodes = dom.interior_flat
    mi = dom.multi_indices[inodes]
    vals = u.values
    center = vals[inodes]
    fwd = np.zeros((inodes.size, n))
    bwd = np.zeros((inodes.size, n))
    for a in range(n):
        up = vals[(mi + np.eye(n, dtype=int)[a]) @ dom.strides]
        dn = vals[(mi - np.eye(n, dtype=int)[a]) @ dom.strides]
        fwd[:, a] = (up - center) / h
        bwd[:, a] = (center - dn) / h
    return fwd, bwd


def viscosity_check(u: ScalarField, op: OperatorSpec,
                    jet_samples: int = 64, tol: float | None = None,
                    seed: int = 0) -> ViscosityReport:
    """Test the sub/supersolution inequalities with discrete jets.

    Candidate quadratics at each interior node mix the one-sided
    slopes (gradient part) and scale the full second-difference matrix
    (Hessian part), plus sign-paired random shifts of size about h in
    the gradient and about 1 in the Hessian.  A quadratic counts only
    if it dominates u (resp. is dominated) on the whole radius-2
    stencil with equality at the node; the candidate families are
    closed under negation, so running the check on -u swaps the two
    violation columns exactly.
    """
    dom = u.domain
    n = dom.spec.dim
    h = dom.h
    if tol is None:
        tol = 10.0 * h * h
    inodes = dom.interior_flat
    n_int = inodes.size
    offs, nb_flat, valid = _stencil_table(dom)
    du = np.where(valid, u.values[nb_flat] - u.values[inodes][:, None], np.nan)
    delta = offs.astype(float) * h
    fwd, bwd = _one_sided_slopes(u)
    D2 = _second_difference_matrices(u)
    frame = horizontal_frame(dom.spec)
    coords = dom.coords[inodes]
    a = frame.coefficients(coords)
    da = frame.coefficient_derivatives(coords)
    slack = 1e-12 * max(1.0, float(np.max(np.abs(u.values[inodes]), initial=0.0)))

    lam_base = (0.0, 0.25, 0.5, 0.75, 1.0)
    zeta_base = (0.0, h, 1.0)
    cands = []
    for lam in lam_base:
        for zeta in zeta_base:
            cands.append((np.full(n, lam), np.zeros(n), zeta,
                          np.zeros((n, n))))
    rng = np.random.default_rng(seed)
    for _ in range((max(int(jet_samples), 0) + 1) // 2):
        lam = rng.uniform(0.0, 1.0, n)
        gshift = rng.normal(size=n) * h
        zeta = rng.uniform(0.0, 1.0)
        B = rng.normal(size=(n, n))
        hshift = 0.5 * (B + B.T)
        cands.append((lam, gshift, zeta, hshift))
        cands.append((lam, -gshift, zeta, -hshift))

    sub_viol = np.zeros(n_int)
    sup_viol = np.zeros(n_int)
    jets_above = 0
    jets_below = 0
    for lam, gshift, zeta, hshift in cands:
        xi = lam[None, :] * fwd + (1.0 - lam)[None, :] * bwd + gshift[None, :]
        S = zeta * D2 + hshift[None, :, :]
        lin = xi @ delta.T
        quad = 0.5 * np.einsum("oa,kab,ob->ko", delta, S, delta)
        diff = lin + quad - du
        with np.errstate(invalid="ignore"):
            lo = np.nanmin(diff, axis=1)
            hi = np.nanmax(diff, axis=1)
        above = lo >= -slack
        below = hi <= slack
        if not (np.any(above) or np.any(below)):
            continue
        p = np.einsum("kia,ka->ki", a, xi)
        M = np.einsum("kia,kjb,kab->kij", a, a, S) \
            + np.einsum("kia,kajb,kb->kij", a, da, xi)
        M = 0.5 * (M + np.swapaxes(M, 1, 2))
        A = op.evaluate(coords, p, M)
        sub_viol = np.where(above, np.maximum(sub_viol, np.maximum(A, 0.0)),
                            sub_viol)
        sup_viol = np.where(below, np.maximum(sup_viol, np.maximum(-A, 0.0)),
                            sup_viol)
        jets_above += int(np.sum(above))
        jets_below += int(np.sum(below))
    return ViscosityReport(
        domain=dom,
        subsolution_violations=sub_viol,
        supersolution_violations=sup_viol,
        jets_above=jets_above,
        jets_below=jets_below,
        candidates=len(cands),
        tol=float(tol),
    )


def comparison_check(u: ScalarField, v: ScalarField) -> float:
    """sup of (u - v) on the boundary minus sup over the interior.

    Nonnegative means the comparison principle holds for this pair.
    """
    require_same_lattice(u.domain, v.domain)
    diff = u.values - v.values
    dom = u.domain
    return float(np.max(diff[dom.boundary_flat])
                 - np.max(diff[dom.interior_flat]))


def amle_check(u: ScalarField, f: Integrand, trials: int,
               config: SolverConfig | None = None, seed: int = 0,
               floor: float = 1e-12) -> float:
    """Absolutely-minimizing audit on random sub-boxes.

    Each trial re-solves a random sub-box with u's own trace as
    boundary data and compares sup f(Xu) against sup f(Xw) there; for
    a true minimizer the ratio stays at or below 1 up to solver
    tolerance.  Degenerate sub-boxes (fewer than 3 interior nodes) are
    skipped.  Returns the worst ratio observed.
    """
    if trials < 1:
        raise ParameterError("trials must be at least 1")
    config = config or SolverConfig(k_max=16)
    dom = u.domain
    dims = np.asarray(dom.dims)
    rng = np.random.default_rng(seed)
    worst = 0.0
    tested = 0
    for _ in range(int(trials)):
        span = np.array([rng.integers(3, d + 1) for d in dims])
        lo = np.array([rng.integers(0, d - s + 1)
                       for d, s in zip(dims, span)])
        hi = lo + span - 1
        if np.prod(np.maximum(span - 2, 0)) < 3:
            continue
        sub = dom.subbox(lo, hi)
        parent_flat = (sub.multi_indices + lo) @ dom.strides
        sub_vals = u.values[parent_flat].copy()
        sub_u = ScalarField(sub, sub_vals)
        g = BoundaryData.from_field(sub_u)
        w = infinity_solve(g, f, config).solution
        num = float(np.max(f.value(horizontal_gradient(sub_u).values)))
        den = float(np.max(f.value(horizontal_gradient(w).values)))
        worst = max(worst, num / max(den, floor))
        tested += 1
    if tested == 0:
        raise ParameterError("all %d sub-boxes were degenerate" % (trials,))
    return worst
