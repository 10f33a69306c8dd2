"""Conforming 2D triangulations, uniform and red-green-blue refinement.

Triangles are stored counterclockwise. Local side ``i`` is the side opposite
local vertex ``i``; the reference edge used by the red-green-blue closure is
always local side 2, i.e. the edge from local vertex 0 to local vertex 1.
"""

from functools import cached_property

import numpy as np
import scipy.sparse as sp

INTERIOR, DIRICHLET, NEUMANN = 0, 1, 2

_MAX_CLOSURE_SWEEPS = 10_000


class Triangulation:
    """Flat array-based triangulation with side topology.

    Parameters
    ----------
    vertices : (nv, 2) array
    triangles : (nt, 3) int array
        Clockwise rows are flipped by swapping the first two vertices, which
        keeps the reference edge.
    neumann : callable, optional
        Predicate on boundary side midpoints ``(m, 2) -> bool``. Boundary sides
        where it is true are Neumann sides; all other boundary sides are
        Dirichlet. Refined meshes inherit the predicate.
    parent : (nt,) int array, optional
        Index of the parent element in the mesh this one was refined from.
    """

    def __init__(self, vertices, triangles, neumann=None, parent=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        tri = np.array(triangles, dtype=np.int64)
        v = self.vertices[tri]
        signed = _signed_area(v)
        flip = signed < 0
        tri[flip, 0], tri[flip, 1] = tri[flip, 1], tri[flip, 0].copy()
        self.triangles = tri
        self.neumann = neumann
        self.parent = None if parent is None else np.asarray(parent, dtype=np.int64)
        self.area = np.abs(signed)
        if np.any(self.area <= 0):
            raise ValueError("degenerate triangle")
        self._build_topology()

    # -- topology -----------------------------------------------------------

    def _build_topology(self):
        tri = self.triangles
        nt = len(tri)
        # local side i = (v[i+1], v[i+2])
        loc = np.stack([tri[:, [1, 2]], tri[:, [2, 0]], tri[:, [0, 1]]], axis=1)
        pairs = np.sort(loc.reshape(-1, 2), axis=1)
        uniq, inv = np.unique(pairs, axis=0, return_inverse=True)
        inv = inv.ravel()
        mid = 0.5 * (self.vertices[uniq[:, 0]] + self.vertices[uniq[:, 1]])
        order = np.lexsort((mid[:, 1], mid[:, 0]))
        rank = np.empty_like(order)
        rank[order] = np.arange(len(order))
        self.sides = uniq[order]
        self.elem_sides = rank[inv].reshape(nt, 3)
        ns = len(self.sides)

        counts = np.bincount(self.elem_sides.ravel(), minlength=ns)
        if np.any(counts > 2):
            raise ValueError("non-manifold side (more than two triangles)")
        flat_elem = np.repeat(np.arange(nt), 3)
        flat_side = self.elem_sides.ravel()
        o = np.lexsort((flat_elem, flat_side))
        side_elems = -np.ones((ns, 2), dtype=np.int64)
        fs, fe = flat_side[o], flat_elem[o]
        first = np.ones(len(fs), dtype=bool)
        first[1:] = fs[1:] != fs[:-1]
        side_elems[fs[first], 0] = fe[first]
        side_elems[fs[~first], 1] = fe[~first]
        self.side_elems = side_elems

        self.x_S = 0.5 * (self.vertices[self.sides[:, 0]] + self.vertices[self.sides[:, 1]])
        self.h_S = np.linalg.norm(self.vertices[self.sides[:, 1]] - self.vertices[self.sides[:, 0]], axis=1)

        v = self.vertices[tri]
        self.x_T = v.mean(axis=1)
        edges = np.stack([v[:, 2] - v[:, 1], v[:, 0] - v[:, 2], v[:, 1] - v[:, 0]], axis=1)
        lengths = np.linalg.norm(edges, axis=2)
        self.h_T = lengths.max(axis=1)
        self.rho_T = 4.0 * self.area / lengths.sum(axis=1)  # inscribed-circle diameter
        # outward unit normals of the local sides (counterclockwise => rotate -90)
        self.elem_normals = np.stack([edges[..., 1], -edges[..., 0]], axis=-1) / lengths[..., None]
        self.elem_side_lengths = lengths

        # global normal: outward of side_elems[:, 0]; for interior sides this
        # points from the lower-index element to the higher-index one
        owner = self.side_elems[:, 0]
        local = np.argmax(self.elem_sides[owner] == np.arange(ns)[:, None], axis=1)
        self.n_S = self.elem_normals[owner, local]
        self.elem_sign = np.where(self.side_elems[self.elem_sides, 0] == np.arange(nt)[:, None], 1.0, -1.0)

        labels = np.zeros(ns, dtype=np.int8)
        bnd = self.side_elems[:, 1] < 0
        labels[bnd] = DIRICHLET
        if self.neumann is not None and np.any(bnd):
            is_n = np.asarray(self.neumann(self.x_S[bnd]), dtype=bool)
            labels[np.flatnonzero(bnd)[is_n]] = NEUMANN
        self.side_label = labels

    # -- sizes and sets -----------------------------------------------------

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_elements(self):
        return len(self.triangles)

    @property
    def n_sides(self):
        return len(self.sides)

    @property
    def n_interior_sides(self):
        return int(np.count_nonzero(self.side_label == INTERIOR))

    @property
    def domain_area(self):
        return float(self.area.sum())

    @property
    def mesh_size(self):
        """Average mesh size ``(|Omega| / card(T_h))^(1/2)``."""
        return float(np.sqrt(self.domain_area / self.n_elements))

    @property
    def chunkiness(self):
        return float(np.max(self.h_T / self.rho_T))

    @cached_property
    def dirichlet_sides(self):
        return np.flatnonzero(self.side_label == DIRICHLET)

    @cached_property
    def neumann_sides(self):
        return np.flatnonzero(self.side_label == NEUMANN)

    @cached_property
    def interior_sides(self):
        return np.flatnonzero(self.side_label == INTERIOR)

    @cached_property
    def dirichlet_vertices(self):
        return np.unique(self.sides[self.dirichlet_sides])

    @cached_property
    def vertex_elements(self):
        """Sparse incidence matrix of shape ``(nv, nt)``."""
        nt = self.n_elements
        rows = self.triangles.ravel()
        cols = np.repeat(np.arange(nt), 3)
        return sp.csr_matrix((np.ones(3 * nt), (rows, cols)), shape=(self.n_vertices, nt))

    @cached_property
    def vertex_sides(self):
        ns = self.n_sides
        rows = self.sides.ravel()
        cols = np.repeat(np.arange(ns), 2)
        return sp.csr_matrix((np.ones(2 * ns), (rows, cols)), shape=(self.n_vertices, ns))

    def min_angle(self):
        """Smallest interior angle over all elements, in radians."""
        v = self.vertices[self.triangles]
        angles = []
        for i in range(3):
            a = v[:, (i + 1) % 3] - v[:, i]
            b = v[:, (i + 2) % 3] - v[:, i]
            cosang = np.sum(a * b, axis=1) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            angles.append(np.arccos(np.clip(cosang, -1.0, 1.0)))
        return float(np.min(angles))

    # -- patches ------------------------------------------------------------

    def omega_T(self, T):
        """Elements touching element ``T`` (sharing at least a vertex), including ``T``."""
        verts = self.triangles[T]
        return np.unique(self.vertex_elements[verts].indices)

    def omega_S(self, S):
        e = self.side_elems[S]
        return e[e >= 0]

    def sides_of_element(self, T):
        return self.elem_sides[T]

    def sides_touching(self, T):
        """``S_h(T)``: all sides intersecting ``T``, i.e. sharing a vertex with it."""
        return np.unique(self.vertex_sides[self.triangles[T]].indices)

    def __repr__(self):
        return (f"Triangulation(n_vertices={self.n_vertices}, n_elements={self.n_elements}, "
                f"n_sides={self.n_sides})")


def _signed_area(v):
    return 0.5 * ((v[:, 1, 0] - v[:, 0, 0]) * (v[:, 2, 1] - v[:, 0, 1])
                  - (v[:, 2, 0] - v[:, 0, 0]) * (v[:, 1, 1] - v[:, 0, 1]))


def longest_edge_first(vertices, triangles):
    """Rotate every triangle so that its longest edge becomes the reference edge.

    Ties are broken towards the edge whose opposite vertex has the lowest index.
    """
    tri = np.asarray(triangles, dtype=np.int64)
    v = np.asarray(vertices)[tri]
    # length of the edge opposite local vertex i
    opp = np.stack([np.linalg.norm(v[:, (i + 2) % 3] - v[:, (i + 1) % 3], axis=1) for i in range(3)], axis=1)
    longest = opp.max(axis=1, keepdims=True)
    cand = np.isclose(opp, longest, rtol=1e-12, atol=0.0)
    key = np.where(cand, tri, np.iinfo(np.int64).max)
    k = np.argmin(key, axis=1)  # opposite vertex must become local vertex 2
    idx = (np.arange(3)[None, :] + (k[:, None] + 1)) % 3
    return np.take_along_axis(tri, idx, axis=1)


def _grid_triangles(index, cells):
    tris = []
    for i, j in cells:
        a, b, c, d = index[i, j], index[i + 1, j], index[i + 1, j + 1], index[i, j + 1]
        if (i + j) % 2 == 0:
            tris += [(a, b, c), (a, c, d)]
        else:
            tris += [(a, b, d), (b, c, d)]
    return tris


def build_square_mesh(n, neumann=None):
    """Triangulation of ``(-1, 1)^2`` with ``2 n^2`` right triangles.

    Cell diagonals alternate in a checkerboard pattern.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    xs = np.linspace(-1.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    vertices = np.column_stack([X.ravel(), Y.ravel()])
    index = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    tris = _grid_triangles(index, [(i, j) for j in range(n) for i in range(n)])
    return Triangulation(vertices, longest_edge_first(vertices, tris), neumann=neumann)


def build_lshape_mesh(neumann=None):
    """Initial mesh of ``(-1,1)^2 minus [0,1] x [-1,0]``: 96 elements, 65 vertices.

    An 8 x 8 grid of cells of width 1/4 with the 16 cells of the removed
    quadrant dropped, each remaining cell split along an alternating diagonal.
    """
    m = 8
    xs = np.linspace(-1.0, 1.0, m + 1)
    keep = np.ones((m + 1, m + 1), dtype=bool)
    keep[m // 2 + 1:, : m // 2] = False  # vertices with x > 0 and y < 0
    index = -np.ones((m + 1, m + 1), dtype=np.int64)
    pts = []
    for j in range(m + 1):
        for i in range(m + 1):
            if keep[i, j]:
                index[i, j] = len(pts)
                pts.append((xs[i], xs[j]))
    vertices = np.array(pts)
    cells = [(i, j) for j in range(m) for i in range(m) if not (i >= m // 2 and j < m // 2)]
    tris = _grid_triangles(index, cells)
    return Triangulation(vertices, longest_edge_first(vertices, tris), neumann=neumann)


def red_refine(mesh):
    """Uniform refinement: every triangle split into four by its edge midpoints."""
    nv = mesh.n_vertices
    verts = np.vstack([mesh.vertices, mesh.x_S])
    t = mesh.triangles
    m = nv + mesh.elem_sides  # m[:, 0] = m12, m[:, 1] = m20, m[:, 2] = m01
    kids = _red_children(t[:, 0], t[:, 1], t[:, 2], m[:, 0], m[:, 1], m[:, 2])
    parent = np.repeat(np.arange(mesh.n_elements), 4)
    return Triangulation(verts, kids.reshape(-1, 3), neumann=mesh.neumann, parent=parent)


def _red_children(z0, z1, z2, m12, m20, m01):
    return np.stack([
        np.column_stack([z0, m01, m20]),
        np.column_stack([m01, z1, m12]),
        np.column_stack([m20, m12, z2]),
        np.column_stack([m12, m20, m01]),
    ], axis=1)


def rgb_refine(mesh, marked):
    """Conforming red-green-blue refinement refining every marked element.

    Marked elements have all three sides marked. The closure then marks the
    reference edge of every element with at least one marked side, so each
    element ends up with none, its reference edge only (green), the reference
    edge and one more side (blue), or all sides (red).
    """
    marked = np.unique(np.asarray(marked, dtype=np.int64))
    if marked.size and (marked.min() < 0 or marked.max() >= mesh.n_elements):
        raise IndexError("marked element index out of range")
    if marked.size == 0:
        return mesh
    es = mesh.elem_sides
    side_marked = np.zeros(mesh.n_sides, dtype=bool)
    side_marked[es[marked].ravel()] = True
    for _ in range(_MAX_CLOSURE_SWEEPS):
        need = side_marked[es].any(axis=1) & ~side_marked[es[:, 2]]
        if not np.any(need):
            break
        side_marked[es[need, 2]] = True
    else:
        raise RuntimeError("red-green-blue closure did not terminate")

    nv = mesh.n_vertices
    new_index = -np.ones(mesh.n_sides, dtype=np.int64)
    ms = np.flatnonzero(side_marked)
    new_index[ms] = nv + np.arange(len(ms))
    verts = np.vstack([mesh.vertices, mesh.x_S[ms]])

    t = mesh.triangles
    flags = side_marked[es]
    m = new_index[es]
    z0, z1, z2 = t[:, 0], t[:, 1], t[:, 2]
    m12, m20, m01 = m[:, 0], m[:, 1], m[:, 2]
    kids, parents, order = [], [], []

    def add(sel, children):
        idx = np.flatnonzero(sel)
        if idx.size == 0:
            return
        for c, child in enumerate(children):
            kids.append(np.column_stack([a[idx] for a in child]))
            parents.append(idx)
            order.append(np.full(idx.size, c))

    untouched = ~flags.any(axis=1)
    red = flags.all(axis=1)
    green = flags[:, 2] & ~flags[:, 0] & ~flags[:, 1]
    blue_left = flags[:, 2] & flags[:, 1] & ~flags[:, 0]
    blue_right = flags[:, 2] & flags[:, 0] & ~flags[:, 1]

    add(untouched, [(z0, z1, z2)])
    add(green, [(z2, z0, m01), (z1, z2, m01)])
    add(blue_left, [(m01, z2, m20), (z0, m01, m20), (z1, z2, m01)])
    add(blue_right, [(z2, z0, m01), (m01, z1, m12), (z2, m01, m12)])
    add(red, [(z0, m01, m20), (m01, z1, m12), (m20, m12, z2), (m12, m20, m01)])

    kids = np.vstack(kids)
    parents = np.concatenate(parents)
    order = np.concatenate(order)
    o = np.lexsort((order, parents))
    return Triangulation(verts, kids[o], neumann=mesh.neumann, parent=parents[o])


def doerfler_mark(indicators, theta):
    """Minimal set with ``sum_M eta_T >= theta^2 * sum_T eta_T``.

    ``indicators`` are the squared local indicators. Greedy on the sorted
    values; ties go to the lower element index.
    """
    eta = np.asarray(indicators, dtype=float)
    if np.any(eta < 0):
        raise ValueError("indicators must be nonnegative")
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    total = eta.sum()
    if total <= 0:
        return np.array([], dtype=np.int64)
    order = np.argsort(-eta, kind="stable")
    csum = np.cumsum(eta[order])
    k = int(np.searchsorted(csum, theta ** 2 * total, side="left")) + 1
    return np.sort(order[:min(k, len(eta))])


def write_vtk(path, mesh, cell_data=None, title="crfem mesh"):
    """Legacy-VTK ASCII export with optional per-element scalar fields."""
    cell_data = cell_data or {}
    nv, nt = mesh.n_vertices, mesh.n_elements
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {nv} double"]
    lines += [f"{x:.17g} {y:.17g} 0" for x, y in mesh.vertices]
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {nt}")
    lines += ["5"] * nt
    if cell_data:
        lines.append(f"CELL_DATA {nt}")
        for name, values in cell_data.items():
            values = np.asarray(values, dtype=float)
            if values.shape != (nt,):
                raise ValueError(f"cell field {name!r} has shape {values.shape}, expected ({nt},)")
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [f"{val:.17g}" for val in values]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
