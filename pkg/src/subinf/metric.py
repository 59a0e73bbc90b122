"""Horizontal move graphs and Carnot-Caratheodory distances on the lattice.

The graph connects lattice nodes by short horizontal motions: single-field
moves (flow of +-X_i for time h, cost h), simultaneous two-field diagonals
(flow of (+-X_i +- X_j)/sqrt(2) run for sqrt(2) h, cost sqrt(2) h) and
two-leg compositions (X_i for h then X_j for h, cost 2h).  The last two kinds
appear from depth 2 on; two-leg moves are what give the vertical drift on
heisenberg1.  Endpoints are snapped to the nearest lattice node while the
cost keeps the continuous control time, an O(h)-per-edge approximation that
keeps the graph finite.  Parallel edges keep the cheapest cost and opposite
orientations are averaged so the graph is symmetric.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .errors import ConnectivityError, ParameterError
from .grids import GridDomain, ScalarField, require_same_lattice


def _flow(spec, coords: np.ndarray, control: np.ndarray, tau: float) -> np.ndarray:
    """Exact endpoint of the flow of sum_i control[i] X_i for time tau."""
    x = np.array(coords, dtype=float)
    if spec.name == "euclidean":
        x += tau * control[None, :]
        return x
    if spec.name == "heisenberg1":
        c1, c2 = control
        drift = 2.0 * (x[:, 0] * c2 - x[:, 1] * c1)
        x[:, 0] += c1 * tau
        x[:, 1] += c2 * tau
        x[:, 2] += drift * tau
        return x
    # grushin: X1 = d/dx, X2 = x d/dy
    c1, c2 = control
    x[:, 1] += c2 * x[:, 0] * tau + 0.5 * c2 * c1 * tau * tau
    x[:, 0] += c1 * tau
    return x


def _move_controls(m: int, depth: int) -> list[tuple[str, tuple, float]]:
    """(kind, control data, cost-in-units-of-h) for each move template."""
    moves: list[tuple[str, tuple, float]] = []
    for i in range(m):
        for s in (1.0, -1.0):
            c = np.zeros(m)
            c[i] = s
            moves.append(("single", (c,), 1.0))
    if depth >= 2:
        for i in range(m):
            for j in range(i + 1, m):
                for si in (1.0, -1.0):
                    for sj in (1.0, -1.0):
                        c = np.zeros(m)
                        c[i], c[j] = si, sj
                        moves.append(("diagonal", (c,), np.sqrt(2.0)))
        for i in range(m):
            for j in range(m):
                if i == j:
                    continue
                for si in (1.0, -1.0):
                    for sj in (1.0, -1.0):
                        ci = np.zeros(m)
                        cj = np.zeros(m)
                        ci[i], cj[j] = si, sj
                        moves.append(("two_leg", (ci, cj), 2.0))
    return moves


@dataclass
class HorizontalGraph:
    """Symmetric weighted graph of snapped horizontal moves."""

    domain: GridDomain
    depth: int
    matrix: sp.csr_matrix
    move_kinds: tuple[str, ...] = field(default_factory=tuple)

    @property
    def n_edges(self) -> int:
        return self.matrix.nnz // 2

    def node_index(self, node) -> int:
        if isinstance(node, (int, np.integer)):
            flat = int(node)
            if not 0 <= flat < self.domain.n_nodes:
                raise ParameterError(f"node {flat} outside the lattice")
        elif isinstance(node, (tuple, list)) and len(node) == self.domain.spec.dim:
            flat = self.domain.flat_of_multi(node)
        else:
            flat = self.domain.nearest_node(np.asarray(node, dtype=float))
        if not self.domain.nonexterior_mask[flat]:
            raise ParameterError(f"node {self.domain.multi_of_flat(flat)} is exterior")
        return flat


def build_graph(domain: GridDomain, depth: int | None = None) -> HorizontalGraph:
    """Build the horizontal move graph over all non-exterior nodes.

    Parameters
    ----------
    domain : GridDomain
    depth : int, optional
        Move composition depth; defaults to the geometry step.

    Raises
    ------
    ConnectivityError
        If some non-exterior node cannot be reached, naming one such node.
    """
    if depth is None:
        depth = domain.spec.step
    if depth < 1:
        raise ParameterError(f"graph depth must be >= 1, got {depth}")
    spec = domain.spec
    h = domain.h
    nodes = domain.nonexterior_flat
    coords = domain.coords[nodes]
    dims_arr = np.asarray(domain.dims)
    srcs: list[np.ndarray] = []
    dsts: list[np.ndarray] = []
    costs: list[np.ndarray] = []
    kinds_used: set[str] = set()

    for kind, controls, cost_units in _move_controls(spec.horizontal_dim, depth):
        ends = coords
        for c in controls:
            ends = _flow(spec, ends, c, h)
        steps = (ends - domain.lower[None, :]) / h
        idx = np.ceil(steps - 0.5).astype(np.int64)
        inside = np.all((idx >= 0) & (idx < dims_arr[None, :]), axis=1)
        idx = np.clip(idx, 0, dims_arr[None, :] - 1)
        flat = (idx * domain.strides[None, :]).sum(axis=1)
        valid = inside & domain.nonexterior_mask[flat] & (flat != nodes)
        if not np.any(valid):
            continue
        kinds_used.add(kind)
        srcs.append(nodes[valid])
        dsts.append(flat[valid])
        costs.append(np.full(int(valid.sum()), cost_units * h))

    if not srcs:
        raise ConnectivityError(
            f"no usable moves at depth {depth} on {spec.id}; every endpoint snapped back"
        )
    s = np.concatenate(srcs)
    d = np.concatenate(dsts)
    c = np.concatenate(costs)

    # Cheapest cost among parallel directed edges.
    key = s * domain.n_nodes + d
    order = np.lexsort((c, key))
    key, s, d, c = key[order], s[order], d[order], c[order]
    first = np.ones(key.size, dtype=bool)
    first[1:] = key[1:] != key[:-1]
    s, d, c = s[first], d[first], c[first]

    # Orientation averaging: add the reversed copy and merge by mean.
    s2 = np.concatenate([s, d])
    d2 = np.concatenate([d, s])
    c2 = np.concatenate([c, c])
    key = s2 * domain.n_nodes + d2
    uniq, inv = np.unique(key, return_inverse=True)
    sums = np.bincount(inv, weights=c2)
    counts = np.bincount(inv)
    w = sums / counts
    us = (uniq // domain.n_nodes).astype(np.int64)
    ud = (uniq % domain.n_nodes).astype(np.int64)
    matrix = sp.coo_matrix((w, (us, ud)), shape=(domain.n_nodes, domain.n_nodes)).tocsr()

    graph = HorizontalGraph(domain, depth, matrix, tuple(sorted(kinds_used)))
    _check_connected(graph)
    return graph


def _check_connected(graph: HorizontalGraph) -> None:
    dom = graph.domain
    n_comp, labels = csgraph.connected_components(graph.matrix, directed=False)
    live = dom.nonexterior_flat
    ref = labels[live[0]]
    stranded = live[labels[live] != ref]
    if stranded.size:
        node = dom.multi_of_flat(int(stranded[0]))
        raise ConnectivityError(
            f"node {node} is unreachable in the depth-{graph.depth} graph on "
            f"{dom.spec.id}; increase the depth or refine the grid"
        )


def cc_distance(graph: HorizontalGraph, a, b, return_path: bool = False):
    """Shortest horizontal path cost between two lattice nodes."""
    ia, ib = graph.node_index(a), graph.node_index(b)
    dist, pred = csgraph.dijkstra(
        graph.matrix, directed=False, indices=ia, return_predecessors=True
    )
    d = float(dist[ib])
    if not np.isfinite(d):
        raise ConnectivityError(
            f"node {graph.domain.multi_of_flat(ib)} unreachable from "
            f"{graph.domain.multi_of_flat(ia)}"
        )
    if not return_path:
        return d
    path = [ib]
    while path[-1] != ia:
        path.append(int(pred[path[-1]]))
    return d, path[::-1]


def cc_distances_from(graph: HorizontalGraph, a) -> np.ndarray:
    """All-node distance vector from one source (inf where unreachable)."""
    ia = graph.node_index(a)
    return csgraph.dijkstra(graph.matrix, directed=False, indices=ia)


def cc_ball(graph: HorizontalGraph, center, radius: float) -> np.ndarray:
    """Flat indices of nodes within graph distance `radius` of the center."""
    if radius < 0:
        raise ParameterError(f"ball radius must be nonnegative, got {radius}")
    dist = cc_distances_from(graph, center)
    return np.flatnonzero(dist <= radius + 1e-12)


def cc_lipschitz(u: ScalarField, graph: HorizontalGraph, nodes=None) -> float:
    """Largest |u(a)-u(b)| / cost over graph edges (optionally within a node set)."""
    require_same_lattice(u, graph.domain)
    coo = graph.matrix.tocoo()
    sel = coo.row < coo.col
    rows, cols, w = coo.row[sel], coo.col[sel], coo.data[sel]
    if nodes is not None:
        keep = np.zeros(graph.domain.n_nodes, dtype=bool)
        keep[np.asarray(nodes, dtype=int)] = True
        inside = keep[rows] & keep[cols]
        rows, cols, w = rows[inside], cols[inside], w[inside]
    if rows.size == 0:
        return 0.0
    ratios = np.abs(u.values[rows] - u.values[cols]) / w
    return float(np.max(ratios))
