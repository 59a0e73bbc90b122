"""Dirichlet solvers for the k-energy and its k -> infinity limit.

The continuous problem is to minimize the L^k norm of f(Xu) over fields
with prescribed boundary values, then let k grow along a doubling
schedule.  The limits approximate infinity-harmonic fields (eps = 0) and
the auxiliary sub/supersolution pair (eps > 0, side lower/upper).

Discretization note: the descent objective is assembled from forward
(cell) differences, one gradient sample per lattice cell, rather than
the centered interior stencils used by the calculus module.  Centered
interior quadrature decouples the odd and even sublattices (the energy
never couples a node to its immediate neighbor), so its minimizer is
non-unique and the eps source term is unbounded below along the
decoupled directions.  The cell quadrature couples every adjacent pair,
pins cleanly to the boundary, and reproduces the linear interpolant
exactly in 1D at every k.  Reported energies in SolveReport come from
this cell quadrature; the public energy() function below keeps the
centered interior form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.sparse as sp

from .errors import IncompleteFieldError, ParameterError
from .grids import EXTERIOR, GridDomain, ScalarField, require_same_lattice
from .groups import gauge_distance
from .integrands import Integrand

_SIDES = ("lower", "upper")

# Largest exponent exp() survives in doubles; beyond it energies are +inf.
_EXP_MAX = 709.0


class BoundaryData:
    """Prescribed values on the boundary nodes of a grid domain."""

    def __init__(self, domain: GridDomain, values):
        vals = np.asarray(values, dtype=float).reshape(-1)
        if vals.size != domain.boundary_flat.size:
            raise ParameterError(
                "expected %d boundary values, got %d"
                % (domain.boundary_flat.size, vals.size)
            )
        if not np.all(np.isfinite(vals)):
            bad = int(domain.boundary_flat[np.flatnonzero(~np.isfinite(vals))[0]])
            raise IncompleteFieldError(
                "non-finite boundary value at node %s"
                % (tuple(domain.multi_of_flat(bad)),)
            )
        self.domain = domain
        self.values = vals

    @classmethod
    def from_function(cls, domain: GridDomain, fn) -> "BoundaryData":
        coords = domain.coords[domain.boundary_flat]
        return cls(domain, np.asarray(fn(coords), dtype=float))

    @classmethod
    def from_field(cls, u: ScalarField) -> "BoundaryData":
        return cls(u.domain, u.values[u.domain.boundary_flat])

    def shift(self, c: float) -> "BoundaryData":
        return BoundaryData(self.domain, self.values + float(c))

    def base_values(self) -> np.ndarray:
        """Full-lattice array: boundary values in place, zero elsewhere."""
        full = np.zeros(self.domain.n_nodes)
        full[self.domain.boundary_flat] = self.values
        return full

    def extend_nearest(self) -> ScalarField:
        """Constant extension along nearest-boundary-node assignment.

        Ties go to the lowest flat index, so the extension is
        reproducible across runs.
        """
        dom = self.domain
        bc = dom.coords[dom.boundary_flat]
        out = np.full(dom.n_nodes, np.nan)
        out[dom.boundary_flat] = self.values
        inodes = dom.interior_flat
        ic = dom.coords[inodes]
        chunk = max(1, int(2e7) // max(1, bc.shape[0]))
        for s in range(0, inodes.size, chunk):
            blk = ic[s : s + chunk]
            d2 = ((blk[:, None, :] - bc[None, :, :]) ** 2).sum(axis=2)
            out[inodes[s : s + chunk]] = self.values[np.argmin(d2, axis=1)]
        return ScalarField(dom, out)

    def graph_lipschitz(self) -> float:
        """Largest |g(a) - g(b)| / gauge distance over boundary pairs.

        Used to normalize the solve so that f(Xu) stays near unit size;
        the max principle keeps solution slopes at this order.
        """
        if getattr(self, "_lip", None) is not None:
            return self._lip
        dom = self.domain
        bc = dom.coords[dom.boundary_flat]
        nb = bc.shape[0]
        best = 0.0
        chunk = max(1, int(2e7) // max(1, nb))
        for s in range(0, nb, chunk):
            if dom.spec.is_group:
                d = gauge_distance(dom.spec, bc[s : s + chunk, None, :],
                                   bc[None, :, :])
            else:
                d = np.sqrt(((bc[s : s + chunk, None, :]
                              - bc[None, :, :]) ** 2).sum(axis=2))
            dv = np.abs(self.values[s : s + chunk, None] - self.values[None, :])
            with np.errstate(divide="ignore", invalid="ignore"):
                r = np.where(d > 0, dv / np.where(d > 0, d, 1.0), 0.0)
            if r.size:
                best = max(best, float(np.max(r)))
        self._lip = best
        return best


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for the descent and the k-doubling schedule.

    k_schedule overrides the default dyadic schedule 2, 4, ..., k_max.
    eps is carried for plumbing (CLI round trips); the solve entry
    points take eps explicitly.  cross_tolerance is the sup-norm change
    between consecutive k levels at which the schedule stops early.
    """

    k_max: int = 256
    eps: float = 0.0
    max_iterations: int = 20000
    gradient_tolerance: float = 1e-8
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    max_backtracks: int = 60
    cross_tolerance: float = 1e-4
    initialization: str = "boundary"
    k_schedule: tuple = ()
    deterministic: bool = True

    def __post_init__(self):
        if int(self.k_max) < 4:
            raise ParameterError("k_max must be at least 4, got %s" % (self.k_max,))
        for name in ("gradient_tolerance", "cross_tolerance", "armijo_c",
                     "armijo_shrink"):
            if getattr(self, name) <= 0:
                raise ParameterError("%s must be positive" % name)
        if self.armijo_shrink >= 1.0:
            raise ParameterError("armijo_shrink must be below 1")
        if self.max_iterations < 1 or self.max_backtracks < 1:
            raise ParameterError("iteration limits must be at least 1")
        if self.eps < 0:
            raise ParameterError("eps must be nonnegative")
        if self.initialization not in ("boundary", "zero"):
            raise ParameterError(
                "initialization must be 'boundary' or 'zero', got %r"
                % (self.initialization,)
            )
        if self.k_schedule:
            ks = tuple(int(k) for k in self.k_schedule)
            if any(k < 1 for k in ks) or list(ks) != sorted(set(ks)):
                raise ParameterError("k_schedule must be strictly increasing, >= 1")
            object.__setattr__(self, "k_schedule", ks)

    def schedule(self) -> tuple:
        if self.k_schedule:
            return self.k_schedule
        ks = []
        k = 2
        while k <= self.k_max:
            ks.append(k)
            k *= 2
        if ks[-1] != self.k_max:
            ks.append(int(self.k_max))
        return tuple(ks)


@dataclass
class SolveReport:
    """Outcome of a solve: the field plus convergence bookkeeping.

    energy_trace maps each k level to its per-iteration objective values
    (cell quadrature, original units).  cross_trace lists (k, sup-norm
    change from the previous level).  residual is the final
    Euler-Lagrange sup-norm in normalized units (the problem is scaled
    so the initial max of f(Xu) is about 1).
    """

    solution: ScalarField
    k_schedule: tuple
    energy_trace: dict
    residual: float
    iterations: int
    converged: bool
    cross_trace: list = dc_field(default_factory=list)
    message: str = ""


@dataclass
class StrictifyResult:
    field: ScalarField
    mu: float
    c0: float
    deviation: float
    degenerate: bool = False

    def __iter__(self):
        # unpacking sugar: w, mu = strictify(...)
        return iter((self.field, self.mu))


def _power_sum(fv: np.ndarray, k: int) -> float:
    """sum(fv**k) with the large-base branch done in log space."""
    if k == 1:
        return float(np.sum(fv))
    small = fv <= 1e3
    out = np.sum(fv[small] ** k, dtype=float)
    big = fv[~small]
    if big.size:
        logs = k * np.log(big)
        if np.any(logs > _EXP_MAX):
            return math.inf
        out += float(np.sum(np.exp(logs)))
    return float(out)


def _power_vec(fv: np.ndarray, k: int) -> np.ndarray:
    """fv**k elementwise, +inf past the exp range instead of raising."""
    if k == 0:
        return np.ones_like(fv)
    out = np.empty_like(fv)
    small = fv <= 1e3
    out[small] = fv[small] ** k
    big = ~small
    if np.any(big):
        logs = k * np.log(fv[big])
        vals = np.where(logs > _EXP_MAX, np.inf, np.exp(np.minimum(logs, _EXP_MAX)))
        out[big] = vals
    return out


def energy(u: ScalarField, f: Integrand, k: int, eps: float = 0.0,
           side: str = "lower") -> float:
    """Midpoint quadrature of the k-energy over interior nodes.

    Lower side subtracts the eps^(k-1) * u source, upper side adds it.
    With eps = 0 there is no source term regardless of k.
    """
    from .calculus import horizontal_gradient

    if k < 1:
        raise ParameterError("k must be at least 1, got %s" % (k,))
    if side not in _SIDES:
        raise ParameterError("side must be 'lower' or 'upper', got %r" % (side,))
    if eps < 0:
        raise ParameterError("eps must be nonnegative")
    dom = u.domain
    grad = horizontal_gradient(u)
    fv = f.value(grad.values)
    cell = float(dom.h) ** dom.spec.dim
    total = _power_sum(fv, int(k)) * cell
    if eps > 0:
        src = eps ** (k - 1) * cell * float(np.sum(u.values[dom.interior_flat]))
        total = total - src if side == "lower" else total + src
    return float(total)


def _cell_operators(domain: GridDomain):
    """Forward-difference horizontal gradient, one row per lattice cell.

    Rows are nodes whose +1 neighbor along every axis exists and is not
    exterior.  Returns (row flat indices, [X_1, ..., X_m] csr matrices
    acting on full-lattice vectors).
    """
    key = ("cell_gradient",)
    cached = domain._op_cache.get(key)
    if cached is not None:
        return cached
    n = domain.spec.dim
    dims = np.asarray(domain.dims)
    strides = domain.strides
    mi = domain.multi_indices
    ok = np.all(mi < (dims - 1)[None, :], axis=1)
    ok &= domain.classification != EXTERIOR
    rows = np.flatnonzero(ok)
    for j in range(n):
        nb = rows + strides[j]
        keep = domain.classification[nb] != EXTERIOR
        rows = rows[keep]
    if rows.size == 0:
        raise ParameterError("domain has no complete cells for the solver")
    nr = rows.size
    h = domain.h
    ridx = np.arange(nr)
    diffs = []
    for j in range(n):
        data = np.concatenate([np.full(nr, -1.0 / h), np.full(nr, 1.0 / h)])
        rr = np.concatenate([ridx, ridx])
        cc = np.concatenate([rows, rows + strides[j]])
        diffs.append(sp.csr_matrix((data, (rr, cc)),
                                   shape=(nr, domain.n_nodes)))
    coeff = domain.frame_coefficients[rows]
    ops = []
    for i in range(domain.spec.horizontal_dim):
        op = None
        for j in range(n):
            col = coeff[:, i, j]
            if not np.any(col):
                continue
            term = sp.diags(col) @ diffs[j]
            op = term if op is None else op + term
        if op is None:
            op = sp.csr_matrix((nr, domain.n_nodes))
        ops.append(op.tocsr())
    domain._op_cache[key] = (rows, ops)
    return rows, ops


class _Objective:
    """Scaled cell-quadrature energy for one (k, eps, side) level.

    Fields are scaled so the warm start has max f(Xu) near 1; the
    source coefficient is folded into a single scalar so the scaled
    minimizer maps back to the original one exactly.
    """

    def __init__(self, domain, base_full, f, k, eps, side, slope_scale):
        self.domain = domain
        self.f = f
        self.k = int(k)
        rows, ops = _cell_operators(domain)
        self.ops = ops
        self.opsT = [op.T.tocsr() for op in ops]
        self.free = domain.interior_flat
        self.cell = float(domain.h) ** domain.spec.dim
        alpha = 2.0 if f.kind == "squared_norm" else float(f.alpha)
        unit = np.zeros(domain.spec.horizontal_dim)
        unit[0] = max(float(slope_scale), 0.0)
        s = max(float(f.value(unit)), float(eps), 1e-12)
        self.scale = s ** (1.0 / alpha)
        self.base = base_full / self.scale
        self.base_exact = base_full
        if eps > 0:
            logc = (self.k - 1) * math.log(eps) + math.log(self.scale) \
                - self.k * math.log(s)
            self.src = math.exp(logc) if logc > -745.0 else 0.0
        else:
            self.src = 0.0
        self.sign = -1.0 if side == "lower" else 1.0

    def _stack_full(self, full):
        cols = [op @ full for op in self.ops]
        return np.stack(cols, axis=-1)

    def full_of(self, z):
        full = self.base.copy()
        full[self.free] = z
        return full

    def z0_of(self, warm_full):
        return warm_full[self.free] / self.scale

    def solution_of(self, z) -> np.ndarray:
        vals = self.full_of(z) * self.scale
        # Rescaling perturbs the pinned nodes by an ulp; reimpose the
        # originals so reported boundary values match the data bitwise.
        bf = self.domain.boundary_flat
        vals[bf] = self.base_exact[bf]
        vals[self.domain.classification == EXTERIOR] = np.nan
        return vals

    def value(self, z) -> float:
        grad = self._stack_full(self.full_of(z))
        fv = self.f.value(grad)
        e = _power_sum(fv, self.k)
        if not math.isfinite(e):
            return math.inf
        return self.cell * (e + self.sign * self.src * float(np.sum(z)))

    def value_grad(self, z):
        full = self.full_of(z)
        grad = self._stack_full(full)
        fv = self.f.value(grad)
        e = _power_sum(fv, self.k)
        if not math.isfinite(e):
            return math.inf, None
        fp = self.f.grad(grad)
        if self.k == 1:
            w = fp
        else:
            with np.errstate(divide="ignore"):
                logf = np.log(fv)
            pw = np.where(logf > -math.inf,
                          np.exp(np.minimum((self.k - 1) * logf, _EXP_MAX)),
                          0.0)
            w = self.k * pw[:, None] * fp
        g_full = np.zeros(self.domain.n_nodes)
        for i, opT in enumerate(self.opsT):
            g_full += opT @ w[:, i]
        g = g_full[self.free] + self.sign * self.src
        return self.cell * (e + self.sign * self.src * float(np.sum(z))), \
            self.cell * g

    def direction_state(self, z, d):
        """Per-row quadratics describing the energy along z + t*d.

        Each row contributes f(V + t W)^k with |V + t W|^2 quadratic in
        t, so the restricted energy is an explicit one-variable
        function; the line search exploits this instead of re-running
        matvecs per trial step.
        """
        full = self.full_of(z)
        V = self._stack_full(full)
        dfull = np.zeros(self.domain.n_nodes)
        dfull[self.free] = d
        W = self._stack_full(dfull)
        qa = np.sum(W * W, axis=1)
        qb = 2.0 * np.sum(V * W, axis=1)
        qc = np.sum(V * V, axis=1)
        lin0 = self.sign * self.src * float(np.sum(z))
        lin1 = self.sign * self.src * float(np.sum(d))
        alpha = 2.0 if self.f.kind == "squared_norm" else float(self.f.alpha)
        kappa = 0.5 * alpha * self.k
        return (qa, qb, qc, lin0, lin1, kappa)

    def line_eval(self, state, t: float):
        """(phi, phi', phi'') of the restricted energy at step t."""
        qa, qb, qc, lin0, lin1, kappa = state
        q = np.maximum((qa * t + qb) * t + qc, 0.0)
        qp = 2.0 * qa * t + qb
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            logq = np.log(q)
            p0 = np.where(q > 0, np.exp(kappa * logq), 0.0)
            p1 = np.where(q > 0, np.exp((kappa - 1.0) * logq), 0.0)
            if kappa == 1.0:
                p1 = np.ones_like(q)
            p2 = np.where(q > 0, np.exp((kappa - 2.0) * logq), 0.0)
        e0 = float(np.sum(p0))
        if not math.isfinite(e0):
            return math.inf, math.inf, math.inf
        e1 = float(np.sum(kappa * p1 * qp))
        e2 = float(np.sum(kappa * (kappa - 1.0) * p2 * qp * qp
                          + 2.0 * kappa * p1 * qa))
        phi = self.cell * (e0 + lin0 + t * lin1)
        dphi = self.cell * (e1 + lin1)
        return phi, dphi, self.cell * e2

    def energy_original_units(self, scaled_energy: float) -> float:
        # E = s^k * E_scaled; the source was folded exactly so there is
        # no constant offset.  Restored in log space against overflow.
        if scaled_energy == 0.0 or not math.isfinite(scaled_energy):
            return scaled_energy
        alpha = 2.0 if self.f.kind == "squared_norm" else float(self.f.alpha)
        m = math.log(abs(scaled_energy)) + self.k * alpha * math.log(self.scale)
        if m > _EXP_MAX:
            return math.copysign(math.inf, scaled_energy)
        return math.copysign(math.exp(m), scaled_energy)


def _line_minimize(obj: _Objective, state, slope: float, t_init: float,
                   max_steps: int):
    """Safeguarded Newton search for the minimum of the restricted energy.

    The restricted energy is convex in t, so Newton steps on its
    derivative bracketed by bisection converge fast; returns the best
    step found and its energy value.
    """
    t_lo, t_hi = 0.0, math.inf
    t = max(t_init, 1e-300)
    best_t, best_phi = 0.0, obj.line_eval(state, 0.0)[0]
    dphi0 = abs(slope)
    for _ in range(max_steps):
        phi, dphi, d2phi = obj.line_eval(state, t)
        if not math.isfinite(phi):
            t_hi = t
            t = 0.5 * (t_lo + t_hi)
            continue
        if phi < best_phi:
            best_phi, best_t = phi, t
        if dphi > 0:
            t_hi = t
        else:
            t_lo = t
        if abs(dphi) <= 1e-12 * max(dphi0, 1e-300):
            break
        if math.isfinite(d2phi) and d2phi > 0:
            t_new = t - dphi / d2phi
        else:
            t_new = math.nan
        if math.isfinite(t_new) and t_lo < t_new < t_hi:
            t = t_new
        elif math.isinf(t_hi):
            t = 2.0 * t
        else:
            t = 0.5 * (t_lo + t_hi)
        if math.isfinite(t_hi) and t_hi - t_lo <= 1e-14 * max(t_hi, 1e-300):
            break
    return best_t, best_phi


def _descend(obj: _Objective, z0: np.ndarray, config: SolverConfig):
    """Monotone first-order descent, conjugate directions, exact line step.

    Directions are gradients enriched with Polak-Ribiere momentum,
    reset to steepest descent whenever the combination stops pointing
    downhill.  The step along each direction comes from the closed-form
    restriction of the energy (see direction_state), which keeps every
    accepted step energy-decreasing and the per-level trace monotone.
    """
    z = np.array(z0, dtype=float)
    e, g = obj.value_grad(z)
    if g is None:
        raise ParameterError("initial iterate overflows the energy")
    trace = [e]
    cell = obj.cell
    d = -g
    t = 1.0 / max(1.0, float(np.max(np.abs(g))) / cell)
    it = 0
    converged = False
    msg = ""
    for it in range(1, config.max_iterations + 1):
        res = float(np.max(np.abs(g))) / cell
        if res <= config.gradient_tolerance:
            converged = True
            it -= 1
            break
        slope = float(g @ d)
        if slope >= 0.0:
            d = -g
            slope = -float(g @ g)
        state = obj.direction_state(z, d)
        tt, e_try = _line_minimize(obj, state, slope, t,
                                   config.max_backtracks)
        if tt <= 0.0 or not e_try < e + config.armijo_c * tt * slope:
            if np.any(d != -g):
                # retry once along steepest descent before giving up
                d = -g
                slope = -float(g @ g)
                state = obj.direction_state(z, d)
                tt, e_try = _line_minimize(obj, state, slope, t,
                                           config.max_backtracks)
            if tt <= 0.0 or not e_try < e:
                # the energy is convex and the step exact, so failure
                # to descend means the numerical floor was hit
                converged = True
                msg = "energy descent reached numerical floor"
                break
        g_old = g
        z = z + tt * d
        e, g = obj.value_grad(z)
        if g is None:
            z, e, g = z - tt * d, trace[-1], g_old
            msg = "step rejected at energy overflow"
            break
        trace.append(e)
        if len(trace) > 10 and trace[-11] - e <= 1e-15 * max(abs(e), 1e-300):
            converged = True
            msg = "energy descent reached numerical floor"
            break
        beta = max(0.0, float(g @ (g - g_old)) / max(float(g_old @ g_old),
                                                     1e-300))
        d = -g + beta * d
        t = tt
    res = float(np.max(np.abs(g))) / cell
    if not converged:
        converged = res <= config.gradient_tolerance
        if not converged and not msg:
            msg = "iteration budget exhausted"
    return z, trace, res, it, converged, msg


def _run_schedule(g: BoundaryData, f: Integrand, eps: float, side: str,
                  config: SolverConfig) -> SolveReport:
    dom = g.domain
    base = g.base_values()
    if config.initialization == "boundary":
        warm = g.extend_nearest().values.copy()
    else:
        warm = base.copy()
    warm[dom.classification == EXTERIOR] = 0.0
    warm = np.where(np.isnan(warm), 0.0, warm)
    slope = g.graph_lipschitz()
    trace = {}
    cross = []
    total_iters = 0
    residual = math.inf
    messages = []
    prev_vals = None
    stopped = False
    for k in config.schedule():
        obj = _Objective(dom, base, f, k, eps, side, slope)
        z, level_trace, residual, iters, ok, msg = _descend(
            obj, obj.z0_of(warm), config)
        total_iters += iters
        trace[k] = [obj.energy_original_units(e) for e in level_trace]
        if msg:
            messages.append("k=%d: %s" % (k, msg))
        warm = obj.full_of(z) * obj.scale
        vals = obj.solution_of(z)
        if prev_vals is not None:
            diff = float(np.max(np.abs(
                vals[dom.interior_flat] - prev_vals[dom.interior_flat])))
            cross.append((k, diff))
            if diff <= config.cross_tolerance:
                prev_vals = vals
                stopped = True
                break
        prev_vals = vals
        warm = np.where(np.isnan(vals), 0.0, vals)
    solution = ScalarField(dom, prev_vals)
    converged = stopped or (bool(cross) and cross[-1][1] <= config.cross_tolerance)
    if len(config.schedule()) == 1:
        converged = residual <= config.gradient_tolerance
    if not converged and not messages:
        messages.append("k schedule exhausted before cross-level tolerance")
    return SolveReport(
        solution=solution,
        k_schedule=tuple(trace.keys()),
        energy_trace=trace,
        residual=residual,
        iterations=total_iters,
        converged=converged,
        cross_trace=cross,
        message="; ".join(messages),
    )


def minimize_k(g: BoundaryData, f: Integrand, k: int, eps: float, side: str,
               config: SolverConfig | None = None,
               warm: ScalarField | None = None) -> SolveReport:
    """Single-level minimization of the discrete k-energy.

    Strictly convex integrands (squared_norm) give a unique minimizer;
    other integrands are handled best-effort.  Above k = 4 and without
    an explicit warm start, a short dyadic warm-up chain from k = 2
    precedes the requested level; high powers flatten the landscape too
    much for a cold start to be reliable.
    """
    config = config or SolverConfig()
    if k < 1:
        raise ParameterError("k must be at least 1, got %s" % (k,))
    if side not in _SIDES:
        raise ParameterError("side must be 'lower' or 'upper', got %r" % (side,))
    if eps < 0:
        raise ParameterError("eps must be nonnegative")
    dom = g.domain
    base = g.base_values()
    if warm is not None:
        require_same_lattice(dom, warm.domain)
        start = np.where(np.isnan(warm.values), 0.0, warm.values)
        warm_levels = []
    else:
        if config.initialization == "boundary":
            start = g.extend_nearest().values.copy()
        else:
            start = base.copy()
        start = np.where(np.isnan(start), 0.0, start)
        warm_levels = []
        kk = 2
        while kk < k and k > 4:
            warm_levels.append(kk)
            kk *= 2
    slope = g.graph_lipschitz()
    total = 0
    message = ""
    for kk in warm_levels:
        obj = _Objective(dom, base, f, kk, eps, side, slope)
        z, _, _, iters, _, _ = _descend(obj, obj.z0_of(start), config)
        start = np.where(np.isnan(obj.solution_of(z)), 0.0,
                         obj.solution_of(z))
        total += iters
    if warm_levels:
        message = "warm-up levels %s" % (tuple(warm_levels),)
    obj = _Objective(dom, base, f, k, eps, side, slope)
    z, level_trace, residual, iters, ok, msg = _descend(
        obj, obj.z0_of(start), config)
    total += iters
    solution = ScalarField(dom, obj.solution_of(z))
    if msg:
        message = (message + "; " + msg) if message else msg
    return SolveReport(
        solution=solution,
        k_schedule=(int(k),),
        energy_trace={int(k): [obj.energy_original_units(e)
                               for e in level_trace]},
        residual=residual,
        iterations=total,
        converged=ok,
        cross_trace=[],
        message=message,
    )


def infinity_solve(g: BoundaryData, f: Integrand,
                   config: SolverConfig | None = None) -> SolveReport:
    """k-doubling limit with eps = 0: the infinity-harmonic field."""
    config = config or SolverConfig()
    return _run_schedule(g, f, 0.0, "lower", config)


def aux_solve(g: BoundaryData, f: Integrand, eps: float, side: str,
              config: SolverConfig | None = None) -> SolveReport:
    """k-doubling limit with the eps source: auxiliary equation solves.

    side='lower' produces the subsolution branch u_eps, side='upper'
    the supersolution branch v_eps.
    """
    config = config or SolverConfig()
    if eps <= 0:
        raise ParameterError("aux_solve requires eps > 0, got %s" % (eps,))
    if side not in _SIDES:
        raise ParameterError("side must be 'lower' or 'upper', got %r" % (side,))
    return _run_schedule(g, f, float(eps), side, config)


def uniqueness_gap(u_eps: ScalarField, v_eps: ScalarField) -> float:
    """Sup-norm of u - v over interior nodes (the empirical beta(eps))."""
    require_same_lattice(u_eps.domain, v_eps.domain)
    idx = u_eps.domain.interior_flat
    return float(np.max(np.abs(u_eps.values[idx] - v_eps.values[idx])))


def strictify(v: ScalarField, delta: float, eps: float,
              alpha: float = 2.0) -> StrictifyResult:
    """Concave reparametrization g_delta(v) with a quantified margin mu.

    g_delta(t) = (1 + delta) t - delta t^2 / (4 C0) with C0 = 4 sup|v|.
    mu = min(delta eps / 2, delta alpha^2 eps^2 / (2 C0)).  The
    perturbation sup|g_delta(v) - v| is recorded post hoc; it stays
    within about 1.0625 * delta * sup|v|.
    """
    if delta <= 0:
        raise ParameterError("delta must be positive, got %s" % (delta,))
    if eps <= 0:
        raise ParameterError("eps must be positive, got %s" % (eps,))
    if alpha < 1:
        raise ParameterError("alpha must be at least 1, got %s" % (alpha,))
    sup = v.sup_norm()
    degenerate = sup == 0.0
    c0 = max(4.0 * sup, 1e-12)
    mu = min(delta * eps / 2.0, delta * alpha * alpha * eps * eps / (2.0 * c0))
    if degenerate:
        return StrictifyResult(field=v.copy(), mu=mu, c0=c0,
                               deviation=0.0, degenerate=True)
    vals = v.values.copy()
    mask = v.domain.classification != EXTERIOR
    t = vals[mask]
    vals[mask] = (1.0 + delta) * t - delta * t * t / (4.0 * c0)
    out = ScalarField(v.domain, vals)
    deviation = float(np.max(np.abs(vals[mask] - v.values[mask])))
    return StrictifyResult(field=out, mu=mu, c0=c0,
                           deviation=deviation, degenerate=False)
