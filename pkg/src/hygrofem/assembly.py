"""P1 assembly of the per-step linear systems and discrete diagnostics.

Unknowns are interleaved by node: entry ``2*k + c`` holds component ``c``
(0 = temperature, 1 = moisture variable) at node ``k``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, NonfiniteCoefficient, NonMonotoneTime
from .materials import CoefficientSet, LinearParams, StateSample

# consistent P1 mass on a triangle, to be scaled by area
_MASS = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
# 2-point Gauss rule on a P1 edge, to be scaled by edge length
_EDGE_MASS = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0


class Field:
    """Nodal values of both unknowns, interleaved."""

    def __init__(self, values, n_nodes=None):
        values = np.array(values, dtype=float).ravel()
        if values.size % 2:
            raise DimensionMismatch("field length must be even (two unknowns per node)")
        if n_nodes is not None and values.size != 2 * n_nodes:
            raise DimensionMismatch(f"field has {values.size} entries, mesh needs {2 * n_nodes}")
        self.values = values

    @classmethod
    def from_components(cls, u1, u2):
        u1, u2 = np.broadcast_arrays(np.asarray(u1, float), np.asarray(u2, float))
        return cls(np.column_stack([u1.ravel(), u2.ravel()]).ravel())

    @classmethod
    def constant(cls, n_nodes, c1, c2):
        return cls.from_components(np.full(n_nodes, float(c1)), np.full(n_nodes, float(c2)))

    @property
    def n_nodes(self):
        return self.values.size // 2

    @property
    def nodal(self):
        """View with shape ``(n_nodes, 2)``."""
        return self.values.reshape(-1, 2)

    def component(self, c):
        return self.values[c::2]

    def copy(self):
        return Field(self.values.copy())

    def is_finite(self):
        return bool(np.all(np.isfinite(self.values)))


@dataclass
class SparseSystem:
    n: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    vals: np.ndarray
    rhs: np.ndarray

    @classmethod
    def from_scipy(cls, A, rhs):
        A = sp.csr_matrix(A)
        A.sum_duplicates()
        A.sort_indices()
        return cls(A.shape[0], A.indptr, A.indices, A.data, np.asarray(rhs, dtype=float))

    def to_scipy(self):
        return sp.csr_matrix((self.vals, self.col_idx, self.row_ptr), shape=(self.n, self.n))


class ClimateSeries:
    """Piecewise-linear time series of the two boundary reference values."""

    def __init__(self, times, values):
        times = np.asarray(times, dtype=float).ravel()
        values = np.asarray(values, dtype=float).reshape(len(times), 2)
        if len(times) == 0:
            raise ValueError("climate series needs at least one sample")
        if np.any(np.diff(times) <= 0):
            raise NonMonotoneTime("climate time samples must be strictly increasing")
        self.times, self.values = times, values

    @classmethod
    def constant(cls, s1, s2):
        return cls([0.0], [[s1, s2]])

    def __call__(self, t):
        """Reference values at time ``t``; held constant outside the samples."""
        if len(self.times) == 1:
            return self.values[0].copy()
        return np.array([np.interp(t, self.times, self.values[:, c]) for c in (0, 1)])


@dataclass
class SegmentDrive:
    """Newton exchange data on one exterior segment.

    ``sigma`` is a :class:`ClimateSeries` or a callable ``sigma(t, x, y)``
    returning an array of shape ``(..., 2)`` (spatially varying data, used by
    manufactured solutions). ``alpha=None`` means the layer material's
    default exchange coefficients.
    """

    sigma: object
    alpha: tuple | None = None

    def __post_init__(self):
        if self.alpha is not None:
            self.alpha = tuple(float(a) for a in self.alpha)
            if len(self.alpha) != 2 or min(self.alpha) < 0:
                raise ValueError("alpha must be two non-negative numbers")

    def values_at(self, t, xy):
        if isinstance(self.sigma, ClimateSeries):
            return np.broadcast_to(self.sigma(t), xy.shape[:-1] + (2,))
        return np.asarray(self.sigma(t, xy[..., 0], xy[..., 1]), dtype=float)


class BoundaryDrive:
    """Map from exterior segment index to :class:`SegmentDrive`.

    Segments without an entry are insulated (no exchange).
    """

    def __init__(self, segments=None):
        self.segments = dict(segments or {})

    def get(self, k):
        return self.segments.get(k)

    def sigma_at(self, k, t, xy):
        d = self.segments.get(k)
        return None if d is None else d.values_at(t, xy)


def _grads(mesh):
    """Areas and P1 basis gradients, shape ``(nt, 3, 2)``."""
    p = mesh.nodes[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    area = 0.5 * ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
    g = np.empty(p.shape)
    g[:, 0, 0] = y[:, 1] - y[:, 2]
    g[:, 1, 0] = y[:, 2] - y[:, 0]
    g[:, 2, 0] = y[:, 0] - y[:, 1]
    g[:, 0, 1] = x[:, 2] - x[:, 1]
    g[:, 1, 1] = x[:, 0] - x[:, 2]
    g[:, 2, 1] = x[:, 1] - x[:, 0]
    return area, g / (2.0 * area)[:, None, None]


def centroid_states(mesh, field: Field) -> StateSample:
    """Element states used for coefficient freezing (mean of vertex values)."""
    u = field.nodal[mesh.triangles]  # (nt, 3, 2)
    c = u.mean(axis=1)
    return StateSample(c[:, 0], c[:, 1])


def evaluate_coefficients(mesh, models, field: Field, clip=False) -> CoefficientSet:
    """Per-element coefficients, with ``models[layer]`` evaluated at centroid states."""
    s = centroid_states(mesh, field)
    nt = mesh.n_triangles
    B = np.empty((nt, 2))
    b = np.empty((nt, 2, 2))
    a = np.empty((nt, 2, 2))
    f = np.empty((nt, 2))
    for L in np.unique(mesh.tri_layer):
        idx = np.flatnonzero(mesh.tri_layer == L)
        c = models[L].evaluate(StateSample(s.theta[idx], s.m[idx]), clip=clip)
        B[idx], b[idx], a[idx], f[idx] = c.B, c.b, c.a, c.fsrc
    return CoefficientSet(B, b, a, f)


def _edge_geometry(mesh):
    e = mesh.exterior_edges
    p0, p1 = mesh.nodes[e[:, 0]], mesh.nodes[e[:, 1]]
    return np.hypot(*(p1 - p0).T), p0, p1


def assemble_step_system(
    mesh, coeffs: CoefficientSet, prev: Field, h_t, drive: BoundaryDrive, t_now,
    source=None, edge_alpha=None, edge_nu=None,
) -> SparseSystem:
    """Backward-Euler step system with element-frozen coefficients.

    ``h_t = inf`` drops the storage term and yields the steady problem.
    ``source(t, x, y)`` is an optional volumetric source of shape ``(..., 2)``
    added to the element sources; a sequence of such callables (or None)
    indexed by layer is accepted as well. ``edge_alpha`` gives default exchange
    coefficients per exterior edge (used where a segment drive has
    ``alpha=None``); ``edge_nu`` adds a homogeneous Robin term per edge.
    """
    nn, nt = mesh.n_nodes, mesh.n_triangles
    n = 2 * nn
    if prev.values.size != n:
        raise DimensionMismatch(f"previous field has {prev.values.size} entries, expected {n}")
    if coeffs.b.shape != (nt, 2, 2) or coeffs.a.shape != (nt, 2, 2):
        raise DimensionMismatch("need one coefficient set per element")
    for name in ("b", "a", "fsrc"):
        if not np.all(np.isfinite(getattr(coeffs, name))):
            raise NonfiniteCoefficient(f"non-finite coefficient '{name}'")
    if not h_t > 0:
        raise ValueError("time step must be positive")

    tri = mesh.triangles
    area, g = _grads(mesh)
    K = area[:, None, None] * np.einsum("tpd,tqd->tpq", g, g)  # (nt,3,3)
    Ml = area[:, None, None] * _MASS
    steady = np.isinf(h_t)
    M = coeffs.mass  # [eq j, unknown i]

    rows, cols, vals = [], [], []
    rhs = np.zeros(n)
    up = prev.nodal
    for j in range(2):
        for i in range(2):
            loc = coeffs.a[:, j, i, None, None] * K
            if not steady:
                loc = loc + (M[:, j, i] / h_t)[:, None, None] * Ml
                # storage of the previous level
                np.add.at(
                    rhs, 2 * tri + j,
                    (M[:, j, i] / h_t)[:, None] * np.einsum("tpq,tq->tp", Ml, up[tri, i]),
                )
            rows.append(np.repeat(2 * tri + j, 3, axis=1).ravel())
            cols.append(np.tile(2 * tri + i, (1, 3)).ravel())
            vals.append(loc.ravel())

    # volumetric sources
    fs = np.repeat(coeffs.fsrc[:, None, :] * (area / 3.0)[:, None, None], 3, axis=1)
    if source is not None:
        p = mesh.nodes[tri]
        mids = 0.5 * (p + np.roll(p, -1, axis=1))  # midpoint k between vertices k, k+1
        fm = np.zeros((nt, 3, 2))
        if callable(source):
            fm[:] = source(t_now, mids[..., 0], mids[..., 1])
        else:
            for L, src in enumerate(source):
                idx = np.flatnonzero(mesh.tri_layer == L)
                if src is not None and len(idx):
                    fm[idx] = src(t_now, mids[idx, :, 0], mids[idx, :, 1])
        # vertex p is adjacent to midpoints p (to p+1) and p-1 where phi_p = 1/2
        fs = fs + (area / 3.0)[:, None, None] * 0.5 * (fm + np.roll(fm, 1, axis=1))
    for c in range(2):
        np.add.at(rhs, 2 * tri + c, fs[..., c])

    # Newton boundary terms
    if len(mesh.exterior_edges):
        e = mesh.exterior_edges
        length, p0, p1 = _edge_geometry(mesh)
        ne = len(e)
        alpha = np.zeros((ne, 2))
        sig = np.zeros((ne, 2, 2))  # edge, endpoint, component
        for seg in np.unique(mesh.exterior_segment):
            idx = np.flatnonzero(mesh.exterior_segment == seg)
            d = drive.get(int(seg)) if drive is not None else None
            if d is None:
                continue
            if d.alpha is not None:
                alpha[idx] = d.alpha
            elif edge_alpha is not None:
                alpha[idx] = np.asarray(edge_alpha)[idx]
            xy = np.stack([p0[idx], p1[idx]], axis=1)
            sig[idx] = d.values_at(t_now, xy)
        robin = alpha + (np.zeros((ne, 2)) if edge_nu is None else np.asarray(edge_nu, float))
        Le = length[:, None, None] * _EDGE_MASS
        for c in range(2):
            dofs = 2 * e + c
            rows.append(np.repeat(dofs, 2, axis=1).ravel())
            cols.append(np.tile(dofs, (1, 2)).ravel())
            vals.append((robin[:, c, None, None] * Le).ravel())
            np.add.at(rhs, dofs, alpha[:, c, None] * np.einsum("epq,eq->ep", Le, sig[:, :, c]))
        if not np.all(np.isfinite(sig)):
            raise NonfiniteCoefficient("non-finite boundary reference values")

    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    return SparseSystem.from_scipy(A, rhs)


def field_gradients(mesh, field: Field):
    """Element gradients of both components, shape ``(nt, 2, 2)`` [comp, dim]."""
    _, g = _grads(mesh)
    u = field.nodal[mesh.triangles]  # (nt,3,2)
    return np.einsum("tpc,tpd->tcd", u, g)


def interface_flux_jump(mesh, field: Field, coeffs: CoefficientSet):
    """Edge-length-weighted L2 norm of the normal flux jump per interface segment.

    Returns an array of shape ``(n_interface_segments, 2)`` (one value per
    component); empty for single-layer domains.
    """
    nseg = len(mesh.domain.interface_segments)
    out = np.zeros((nseg, 2))
    if len(mesh.interface_edges) == 0:
        return out
    grad = field_gradients(mesh, field)
    flux = np.einsum("tji,tid->tjd", coeffs.a, grad)  # a^{ji} grad u^i
    e = mesh.interface_edges
    p0, p1 = mesh.nodes[e[:, 0]], mesh.nodes[e[:, 1]]
    length = np.hypot(*(p1 - p0).T)
    t = (p1 - p0) / length[:, None]
    nrm = np.column_stack([t[:, 1], -t[:, 0]])
    jump = np.zeros((len(e), 2))
    for side in range(2):
        tr = mesh.interface_tris[:, side]
        cen = mesh.nodes[mesh.triangles[tr]].mean(axis=1)
        # orient the normal outward from this triangle
        sgn = np.sign(np.einsum("ed,ed->e", p0 - cen, nrm))
        jump += np.einsum("ejd,ed->ej", flux[tr], sgn[:, None] * nrm)
    np.add.at(out, mesh.interface_segment, length[:, None] * jump ** 2)
    return np.sqrt(out)


def discrete_energy(mesh, field: Field, p) -> float:
    """Quadratic energy of the linear model summed over all elements.

    ``p`` is one :class:`LinearParams` or a sequence indexed by layer.
    """
    area, _ = _grads(mesh)
    grad = field_gradients(mesh, field)
    params = [p] if isinstance(p, LinearParams) else list(p)
    k = np.array([q.kappa for q in params])[mesh.tri_layer if len(params) > 1 else 0]
    k = np.broadcast_to(k, (mesh.n_triangles, 2, 2))
    g1, g2 = grad[:, 0], grad[:, 1]
    dens = (
        k[:, 1, 0] * k[:, 0, 0] * np.sum(g1 * g1, axis=1) / 2
        + k[:, 0, 1] * k[:, 1, 1] * np.sum(g2 * g2, axis=1) / 2
        + k[:, 0, 1] * k[:, 1, 0] * np.sum(g1 * g2, axis=1)
    )
    return float(np.sum(area * dens))


def weighted_totals(mesh, field: Field, coeffs: CoefficientSet):
    """Storage-weighted totals ``sum_i int mass^{ji} u^i`` for j = 1, 2."""
    area, _ = _grads(mesh)
    mean = field.nodal[mesh.triangles].mean(axis=1)  # (nt, 2)
    return np.einsum("t,tji,ti->j", area, coeffs.mass, mean)
