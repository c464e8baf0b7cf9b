"""Layered rectangular geometries and their structured triangulation.

A wall is modelled as a union of axis-aligned rectangles (layers). Shared
edges between two layers become interface segments, the rest of the layer
outlines become exterior segments. Coordinates are compared exactly, so
coordinates meant to coincide must be written identically in the input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CrossPoint, DisconnectedDomain, DomainError, OverlappingLayers

SIDES = ("south", "east", "north", "west")
OUTWARD_NORMALS = {
    "south": (0.0, -1.0),
    "east": (1.0, 0.0),
    "north": (0.0, 1.0),
    "west": (-1.0, 0.0),
}


@dataclass(frozen=True)
class LayerRect:
    x0: float
    y0: float
    x1: float
    y1: float
    material_id: str = "default"
    name: str = ""

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise DomainError(
                f"degenerate layer rectangle ({self.x0}, {self.y0})-({self.x1}, {self.y1})"
            )

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def contains(self, x, y) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def edge(self, side):
        """Return ``(axis_value, lo, hi, orientation)`` for one rectangle side."""
        if side == "south":
            return self.y0, self.x0, self.x1, "h"
        if side == "north":
            return self.y1, self.x0, self.x1, "h"
        if side == "west":
            return self.x0, self.y0, self.y1, "v"
        if side == "east":
            return self.x1, self.y0, self.y1, "v"
        raise ValueError(side)

    def corner_angle(self, x, y) -> float:
        """Interior angle of this rectangle seen from a point on its closure."""
        on_x = x in (self.x0, self.x1)
        on_y = y in (self.y0, self.y1)
        if on_x and on_y:
            return math.pi / 2
        if on_x or on_y:
            return math.pi
        return 2 * math.pi


@dataclass(frozen=True)
class InterfaceSegment:
    p0: tuple
    p1: tuple
    layers: tuple  # (lower index, higher index)

    @property
    def length(self):
        return math.hypot(self.p1[0] - self.p0[0], self.p1[1] - self.p0[1])


@dataclass(frozen=True)
class ExteriorSegment:
    p0: tuple
    p1: tuple
    layer: int
    side: str

    @property
    def length(self):
        return math.hypot(self.p1[0] - self.p0[0], self.p1[1] - self.p0[1])

    @property
    def normal(self):
        return OUTWARD_NORMALS[self.side]


@dataclass(frozen=True)
class LayeredDomain:
    layers: tuple
    interface_segments: tuple
    exterior_segments: tuple

    @property
    def area(self):
        return sum(r.area for r in self.layers)

    def layer_index(self, name):
        for i, r in enumerate(self.layers):
            if r.name == name:
                return i
        raise KeyError(name)

    def interface_points(self):
        """Points where an interface segment touches the exterior boundary."""
        pts = []
        for seg in self.interface_segments:
            for p in (seg.p0, seg.p1):
                if p not in pts and self.on_exterior(p):
                    pts.append(p)
        return pts

    def on_exterior(self, p):
        return any(_on_segment(p, s.p0, s.p1) for s in self.exterior_segments)

    def angles_at(self, p):
        """Layer indices touching ``p`` with their interior angles."""
        return [
            (i, r.corner_angle(*p)) for i, r in enumerate(self.layers) if r.contains(*p)
        ]


def _on_segment(p, a, b):
    if a[0] == b[0] == p[0]:
        return min(a[1], b[1]) <= p[1] <= max(a[1], b[1])
    if a[1] == b[1] == p[1]:
        return min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
    return False


def _interiors_overlap(a: LayerRect, b: LayerRect) -> bool:
    return max(a.x0, b.x0) < min(a.x1, b.x1) and max(a.y0, b.y0) < min(a.y1, b.y1)


def _shared_edges(layers):
    """Enumerate shared edge pieces as (i, side_i, j, side_j, value, lo, hi)."""
    shared = []
    opposite = {"east": "west", "west": "east", "north": "south", "south": "north"}
    for i, a in enumerate(layers):
        for j in range(i + 1, len(layers)):
            b = layers[j]
            for side in SIDES:
                va, lo_a, hi_a, _ = a.edge(side)
                vb, lo_b, hi_b, _ = b.edge(opposite[side])
                if va != vb:
                    continue
                lo, hi = max(lo_a, lo_b), min(hi_a, hi_b)
                if lo < hi:
                    shared.append((i, side, j, opposite[side], va, lo, hi))
    return shared


def _segment_points(side, value, lo, hi):
    if side in ("south", "north"):
        return (lo, value), (hi, value)
    return (value, lo), (value, hi)


def _derive(layers):
    shared = _shared_edges(layers)
    interfaces = []
    covered = {}  # (layer, side) -> list of (lo, hi)
    for i, side_i, j, side_j, value, lo, hi in shared:
        p0, p1 = _segment_points(side_i, value, lo, hi)
        interfaces.append(InterfaceSegment(p0, p1, (i, j)))
        covered.setdefault((i, side_i), []).append((lo, hi))
        covered.setdefault((j, side_j), []).append((lo, hi))

    exterior = []
    for i, r in enumerate(layers):
        for side in SIDES:
            value, lo, hi, _ = r.edge(side)
            pieces = [(lo, hi)]
            for c_lo, c_hi in sorted(covered.get((i, side), [])):
                nxt = []
                for p_lo, p_hi in pieces:
                    if c_hi <= p_lo or c_lo >= p_hi:
                        nxt.append((p_lo, p_hi))
                        continue
                    if p_lo < c_lo:
                        nxt.append((p_lo, c_lo))
                    if c_hi < p_hi:
                        nxt.append((c_hi, p_hi))
                pieces = nxt
            for p_lo, p_hi in pieces:
                p0, p1 = _segment_points(side, value, p_lo, p_hi)
                exterior.append(ExteriorSegment(p0, p1, i, side))
    return tuple(interfaces), tuple(exterior)


def _components(n, interfaces):
    parent = list(range(n))

    def find(k):
        while parent[k] != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    for seg in interfaces:
        a, b = (find(k) for k in seg.layers)
        parent[a] = b
    return len({find(k) for k in range(n)})


def _cross_points(interfaces):
    """Points lying on three or more interface segments."""
    candidates = []
    for seg in interfaces:
        for p in (seg.p0, seg.p1):
            if p not in candidates:
                candidates.append(p)
    return [
        p
        for p in candidates
        if sum(_on_segment(p, s.p0, s.p1) for s in interfaces) >= 3
    ]


def build_domain(layer_specs, validate=True) -> LayeredDomain:
    """Assemble a :class:`LayeredDomain` and derive its segments.

    With ``validate=False`` the structural checks are skipped so that
    :func:`admissibility_report` can describe a rejected layout.
    """
    layers = tuple(layer_specs)
    if not layers:
        raise DomainError("at least one layer is required")
    if validate:
        for i, a in enumerate(layers):
            for b in layers[i + 1:]:
                if _interiors_overlap(a, b):
                    raise OverlappingLayers(f"layers {a} and {b} overlap")
    interfaces, exterior = _derive(layers)
    if validate:
        if _components(len(layers), interfaces) > 1:
            raise DisconnectedDomain("layers do not form one edge-connected region")
        crosses = _cross_points(interfaces)
        if crosses:
            raise CrossPoint(f"interfaces meet at cross points {crosses}")
    return LayeredDomain(layers, interfaces, exterior)


@dataclass
class ConditionResult:
    condition: str
    passed: bool
    note: str = ""
    offending: list = field(default_factory=list)


def admissibility_report(domain) -> list:
    """Check the admissibility conditions (i)-(viii) for a rectangle union."""
    if not isinstance(domain, LayeredDomain):
        domain = build_domain(domain, validate=False)
    layers = domain.layers
    out = []

    overlaps = [
        (i, j)
        for i in range(len(layers))
        for j in range(i + 1, len(layers))
        if _interiors_overlap(layers[i], layers[j])
    ]
    n_comp = _components(len(layers), domain.interface_segments)
    note = "" if n_comp == 1 else f"{n_comp} edge-connected components"
    out.append(ConditionResult("(i)", not overlaps and n_comp == 1, note, overlaps))
    out.append(ConditionResult("(ii)", True, "pass by construction: polygonal boundary"))

    # (iii): exterior corners must have interior angle below pi.
    vertices = []
    for s in domain.exterior_segments:
        for p in (s.p0, s.p1):
            if p not in vertices:
                vertices.append(p)
    reentrant = []
    for p in vertices:
        total = sum(a for _, a in domain.angles_at(p))
        if total > math.pi and total < 2 * math.pi:
            reentrant.append((p, total))
    out.append(
        ConditionResult(
            "(iii)",
            not reentrant,
            "; ".join(f"corner {p} angle {t / math.pi:g}*pi" for p, t in reentrant),
            [p for p, _ in reentrant],
        )
    )

    straight = all(
        s.p0[0] == s.p1[0] or s.p0[1] == s.p1[1] for s in domain.interface_segments
    )
    out.append(ConditionResult("(iv)", straight, "axis-parallel straight interfaces"))

    crosses = _cross_points(domain.interface_segments)
    out.append(
        ConditionResult(
            "(v)",
            not crosses,
            "cross point of interfaces" if crosses else "",
            crosses,
        )
    )
    out.append(ConditionResult("(vi)", True, "pass by construction: straight rays at every interface end"))

    unequal, wide = [], []
    for p in domain.interface_points():
        angles = [a for _, a in domain.angles_at(p)]
        if len(set(angles)) > 1:
            unequal.append(p)
        if sum(angles) > math.pi:
            wide.append(p)
    out.append(ConditionResult("(vii)", not unequal, "", unequal))
    out.append(ConditionResult("(viii)", not wide, "", wide))
    return out


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming P1 triangulation of a :class:`LayeredDomain`.

    ``exterior_edges`` are oriented counter-clockwise around the adjacent
    triangle; ``interface_tris[k]`` holds the triangles on either side of
    ``interface_edges[k]`` in the order of ``interface_layers[k]``.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    tri_layer: np.ndarray
    exterior_edges: np.ndarray
    exterior_layer: np.ndarray
    exterior_segment: np.ndarray
    exterior_tri: np.ndarray
    interface_edges: np.ndarray
    interface_layers: np.ndarray
    interface_tris: np.ndarray
    interface_segment: np.ndarray
    h_mesh: float
    domain: LayeredDomain

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def triangle_areas(self):
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def lumped_weights(self):
        """Nodal quadrature weights (one third of each adjacent triangle area)."""
        w = np.zeros(self.n_nodes)
        np.add.at(w, self.triangles, np.repeat(self.triangle_areas()[:, None] / 3.0, 3, axis=1))
        return w

    def nearest_node(self, x, y):
        d = np.hypot(self.nodes[:, 0] - x, self.nodes[:, 1] - y)
        return int(np.argmin(d))


def _axis_lines(breaks, h):
    lines = [breaks[0]]
    for a, b in zip(breaks[:-1], breaks[1:]):
        n = max(1, math.ceil((b - a) / h - 1e-9))
        lines.extend(a + (b - a) * k / n for k in range(1, n))
        lines.append(b)
    return np.array(lines)


def triangulate(domain: LayeredDomain, h_target: float) -> Mesh:
    """Structured triangulation on globally merged coordinate lines.

    Every rectangle edge coordinate is kept as a grid line, so neighbouring
    layers share their interface nodes. Each grid cell is split along the
    lower-left to upper-right diagonal.
    """
    if not h_target > 0:
        raise ValueError("h_target must be positive")
    layers = domain.layers
    xb = sorted({v for r in layers for v in (r.x0, r.x1)})
    yb = sorted({v for r in layers for v in (r.y0, r.y1)})
    xs = _axis_lines(xb, h_target)
    ys = _axis_lines(yb, h_target)
    # snap to the exact break values so that rect membership stays exact
    xs[np.searchsorted(xs, xb)] = xb
    ys[np.searchsorted(ys, yb)] = yb
    nx, ny = len(xs) - 1, len(ys) - 1

    cell_layer = -np.ones((nx, ny), dtype=int)
    for li, r in enumerate(layers):
        i0, i1 = np.searchsorted(xs, [r.x0, r.x1])
        j0, j1 = np.searchsorted(ys, [r.y0, r.y1])
        cell_layer[i0:i1, j0:j1] = li

    node_id = -np.ones((nx + 1, ny + 1), dtype=int)
    nodes = []
    for j in range(ny + 1):
        for i in range(nx + 1):
            touching = [
                cell_layer[ci, cj]
                for ci in (i - 1, i)
                for cj in (j - 1, j)
                if 0 <= ci < nx and 0 <= cj < ny
            ]
            if any(c >= 0 for c in touching):
                node_id[i, j] = len(nodes)
                nodes.append((xs[i], ys[j]))
    nodes = np.array(nodes, dtype=float)

    tris, tri_layer = [], []
    tri_of_cell = {}
    for j in range(ny):
        for i in range(nx):
            li = cell_layer[i, j]
            if li < 0:
                continue
            a, b = node_id[i, j], node_id[i + 1, j]
            c, d = node_id[i + 1, j + 1], node_id[i, j + 1]
            tri_of_cell[i, j] = len(tris)
            tris.append((a, b, c))
            tris.append((a, c, d))
            tri_layer += [li, li]
    tris = np.array(tris, dtype=int)
    tri_layer = np.array(tri_layer, dtype=int)

    def cell(i, j):
        if 0 <= i < nx and 0 <= j < ny and cell_layer[i, j] >= 0:
            return int(cell_layer[i, j])
        return -1

    ext, ext_layer, ext_side, ext_tri = [], [], [], []
    itf, itf_layers, itf_tris = [], [], []

    # horizontal cell edges: between cell (i, j-1) below and (i, j) above
    for j in range(ny + 1):
        for i in range(nx):
            below, above = cell(i, j - 1), cell(i, j)
            n0, n1 = node_id[i, j], node_id[i + 1, j]
            if below < 0 and above < 0:
                continue
            if below < 0:  # south face of the cell above: bottom edge of its first triangle
                ext.append((n0, n1)); ext_layer.append(above); ext_side.append("south")
                ext_tri.append(tri_of_cell[i, j])
            elif above < 0:  # north face of the cell below: top edge of its second triangle
                ext.append((n1, n0)); ext_layer.append(below); ext_side.append("north")
                ext_tri.append(tri_of_cell[i, j - 1] + 1)
            elif below != above:
                pair = (below, above)
                t_pair = (tri_of_cell[i, j - 1] + 1, tri_of_cell[i, j])
                if below > above:
                    pair, t_pair = pair[::-1], t_pair[::-1]
                itf.append((n0, n1)); itf_layers.append(pair); itf_tris.append(t_pair)
    # vertical cell edges: between cell (i-1, j) left and (i, j) right
    for i in range(nx + 1):
        for j in range(ny):
            left, right = cell(i - 1, j), cell(i, j)
            n0, n1 = node_id[i, j], node_id[i, j + 1]
            if left < 0 and right < 0:
                continue
            if left < 0:  # west face of the right cell: second triangle
                ext.append((n1, n0)); ext_layer.append(right); ext_side.append("west")
                ext_tri.append(tri_of_cell[i, j] + 1)
            elif right < 0:  # east face of the left cell: first triangle
                ext.append((n0, n1)); ext_layer.append(left); ext_side.append("east")
                ext_tri.append(tri_of_cell[i - 1, j])
            elif left != right:
                pair = (left, right)
                t_pair = (tri_of_cell[i - 1, j], tri_of_cell[i, j] + 1)
                if left > right:
                    pair, t_pair = pair[::-1], t_pair[::-1]
                itf.append((n0, n1)); itf_layers.append(pair); itf_tris.append(t_pair)

    ext_seg = []
    for (n0, n1), li, side in zip(ext, ext_layer, ext_side):
        mid = tuple((nodes[n0] + nodes[n1]) / 2)
        ext_seg.append(_locate_exterior(domain, mid, li, side))
    itf_seg = []
    for (n0, n1), pair in zip(itf, itf_layers):
        mid = tuple((nodes[n0] + nodes[n1]) / 2)
        itf_seg.append(_locate_interface(domain, mid, pair))

    h_mesh = max(float(np.max(np.diff(xs))), float(np.max(np.diff(ys))))

    def frozen(a, dtype=int, shape=None):
        arr = np.array(a, dtype=dtype)
        if shape is not None:
            arr = arr.reshape(shape)
        arr.setflags(write=False)
        return arr

    nodes.setflags(write=False)
    tris.setflags(write=False)
    tri_layer.setflags(write=False)
    return Mesh(
        nodes=nodes,
        triangles=tris,
        tri_layer=tri_layer,
        exterior_edges=frozen(ext, shape=(-1, 2)),
        exterior_layer=frozen(ext_layer),
        exterior_segment=frozen(ext_seg),
        exterior_tri=frozen(ext_tri),
        interface_edges=frozen(itf, shape=(-1, 2)),
        interface_layers=frozen(itf_layers, shape=(-1, 2)),
        interface_tris=frozen(itf_tris, shape=(-1, 2)),
        interface_segment=frozen(itf_seg),
        h_mesh=h_mesh,
        domain=domain,
    )


def _locate_exterior(domain, mid, layer, side):
    for k, s in enumerate(domain.exterior_segments):
        if s.layer == layer and s.side == side and _on_segment(mid, s.p0, s.p1):
            return k
    raise DomainError(f"exterior edge at {mid} matches no segment")


def _locate_interface(domain, mid, pair):
    for k, s in enumerate(domain.interface_segments):
        if tuple(s.layers) == tuple(pair) and _on_segment(mid, s.p0, s.p1):
            return k
    raise DomainError(f"interface edge at {mid} matches no segment")
