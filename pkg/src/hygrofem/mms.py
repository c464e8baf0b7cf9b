"""Manufactured solutions for the linear transmission system.

Each case fixes a closed-form field per layer; sympy derives the volumetric
sources and Newton reference values that make it an exact solution.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import sympy as sy

from .assembly import BoundaryDrive, Field, SegmentDrive
from .domain import OUTWARD_NORMALS, LayerRect, build_domain, triangulate
from .materials import LinearParams
from .stepper import Problem, SimState, semi_implicit_step

X, Y, T = sy.symbols("x y t", real=True)


def _vec_fn(exprs):
    """Vectorised ``f(t, x, y) -> (..., 2)`` from two sympy expressions."""
    fns = [sy.lambdify((T, X, Y), e, "numpy") for e in exprs]

    def f(t, x, y):
        x = np.asarray(x, dtype=float)
        shape = np.broadcast(x, np.asarray(y)).shape
        return np.stack([np.broadcast_to(np.asarray(fn(t, x, y), dtype=float), shape) for fn in fns],
                        axis=-1)

    return f


@dataclass
class MmsCase:
    """Linear multi-layer problem with a known exact field.

    ``exact[k]`` holds the two sympy expressions of layer ``k`` in x, y, t.
    ``robin`` maps side names of the outer box to exchange coefficients;
    other exterior edges are insulated and the field must have zero normal
    flux there.
    """

    name: str
    layers: list
    params: list
    exact: list
    robin: dict = field(default_factory=dict)
    t_end: float = 1.0

    def sources(self):
        out = []
        for p, u in zip(self.params, self.exact):
            f = []
            for j in range(2):
                e = sum(p.beta[j, i] * sy.diff(u[i], T) for i in range(2))
                e -= sum(
                    p.kappa[j, i] * (sy.diff(u[i], X, 2) + sy.diff(u[i], Y, 2)) for i in range(2)
                )
                f.append(sy.simplify(e))
            out.append(f)
        return out

    def normal_flux(self, k, side):
        """Expressions ``sum_i kappa^{ji} grad u^i . n`` on a side of layer k."""
        nx, ny = OUTWARD_NORMALS[side]
        p, u = self.params[k], self.exact[k]
        return [
            sum(p.kappa[j, i] * (nx * sy.diff(u[i], X) + ny * sy.diff(u[i], Y)) for i in range(2))
            for j in range(2)
        ]

    def sigma(self, k, side):
        """Reference values ``u + flux/alpha`` for a Robin side of layer k."""
        alpha = self.robin[side]
        q = self.normal_flux(k, side)
        return [sy.simplify(self.exact[k][j] + q[j] / alpha[j]) for j in range(2)]

    def exact_fn(self):
        fns = [_vec_fn(u) for u in self.exact]
        layers = self.layers

        def u(t, x, y):
            x, y = np.asarray(x, float), np.asarray(y, float)
            out = np.full(x.shape + (2,), np.nan)
            for L, f in zip(layers, fns):
                inside = (x >= L.x0) & (x <= L.x1) & (y >= L.y0) & (y <= L.y1)
                sel = inside & np.isnan(out[..., 0])
                out[sel] = f(t, x[sel], y[sel])
            return out

        return u

    def _outer_side(self, mesh, seg):
        """Side name of an exterior segment if it lies on the outer bounding box."""
        s = mesh.domain.exterior_segments[seg]
        x0 = min(L.x0 for L in self.layers)
        x1 = max(L.x1 for L in self.layers)
        y0 = min(L.y0 for L in self.layers)
        y1 = max(L.y1 for L in self.layers)
        (ax, ay), (bx, by) = s.p0, s.p1
        for side, ok in (("west", ax == bx == x0), ("east", ax == bx == x1),
                         ("south", ay == by == y0), ("north", ay == by == y1)):
            if ok:
                return side
        return None

    def problem(self, h):
        dom = build_domain(self.layers)
        mesh = triangulate(dom, h)
        drive = {}
        for seg, s in enumerate(dom.exterior_segments):
            side = self._outer_side(mesh, seg)
            if side in self.robin:
                drive[seg] = SegmentDrive(_vec_fn(self.sigma(s.layer, side)), self.robin[side])
        src = [_vec_fn(f) for f in self.sources()]
        return Problem(mesh, list(self.params), BoundaryDrive(drive), source=src, clip=False,
                       solver_tol=1e-12)

    def transmission_residuals(self):
        """Symbolic jumps of the field and normal flux on vertical/horizontal shared edges.

        Returns a list of sympy expressions that must vanish identically.
        """
        res = []
        for a in range(len(self.layers)):
            for b in range(a + 1, len(self.layers)):
                La, Lb = self.layers[a], self.layers[b]
                if La.x1 == Lb.x0 or Lb.x1 == La.x0:
                    xs = La.x1 if La.x1 == Lb.x0 else La.x0
                    side = "east" if La.x1 == Lb.x0 else "west"
                    sub = {X: xs}
                elif La.y1 == Lb.y0 or Lb.y1 == La.y0:
                    ys = La.y1 if La.y1 == Lb.y0 else La.y0
                    side = "north" if La.y1 == Lb.y0 else "south"
                    sub = {Y: ys}
                else:
                    continue
                qa = self.normal_flux(a, side)
                qb = self.normal_flux(b, side)
                for j in range(2):
                    res.append(sy.simplify((self.exact[a][j] - self.exact[b][j]).subs(sub)))
                    res.append(sy.simplify((qa[j] - qb[j]).subs(sub)))
        return res


def nodal_l2_error(mesh, field: Field, exact) -> float:
    w = mesh.lumped_weights()
    diff = field.nodal - exact
    return float(math.sqrt(np.sum(w[:, None] * diff ** 2)))


def run_case(case: MmsCase, h, h_t) -> float:
    """Nodal L2 error at ``case.t_end`` for one (h, h_t) pair."""
    prob = case.problem(h)
    u = case.exact_fn()
    x, y = prob.mesh.nodes.T
    state = SimState(0.0, 0, Field(u(0.0, x, y).ravel()))
    n = int(round(case.t_end / h_t))
    for k in range(1, n + 1):
        state, _ = semi_implicit_step(state, prob, h_t)
        state.t = k * h_t
    return nodal_l2_error(prob.mesh, state.field, u(case.t_end, x, y))


@dataclass
class ConvergenceTable:
    case: str
    rows: list  # (h, h_t, error)
    spatial_orders: list
    temporal_orders: list

    def error(self, h, h_t):
        for a, b, e in self.rows:
            if a == h and b == h_t:
                return e
        raise KeyError((h, h_t))


def _orders(values, errs):
    out = []
    for k in range(1, len(values)):
        if errs[k] > 0 and errs[k - 1] > 0:
            out.append(math.log(errs[k - 1] / errs[k]) / math.log(values[k - 1] / values[k]))
        else:
            out.append(math.nan)
    return out


def mms_verify(case: MmsCase, h_list, ht_list, threads=1) -> ConvergenceTable:
    """Errors on the full (h, h_t) grid plus observed orders.

    Spatial orders use successive ``h`` at the smallest ``h_t``; temporal
    orders use successive ``h_t`` at the smallest ``h``.
    """
    h_list = sorted(h_list, reverse=True)
    ht_list = sorted(ht_list, reverse=True)
    jobs = [(h, ht) for h in h_list for ht in ht_list]
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            errs = list(ex.map(lambda j: run_case(case, *j), jobs))
    else:
        errs = [run_case(case, *j) for j in jobs]
    rows = [(h, ht, e) for (h, ht), e in zip(jobs, errs)]
    table = ConvergenceTable(case.name, rows, [], [])
    table.spatial_orders = _orders(h_list, [table.error(h, ht_list[-1]) for h in h_list])
    table.temporal_orders = _orders(ht_list, [table.error(h_list[-1], ht) for ht in ht_list])
    return table


# built-in cases ---------------------------------------------------------

_BETA = [[1.0, 0.2], [0.1, 1.0]]
_K1 = [[1.0, 0.1], [0.1, 0.5]]
_K2 = [[2.0, 0.1], [0.1, 0.5]]
_C = (1.0, 0.5)
_A = (1.0, 0.5)


def _two_layer():
    return [LayerRect(0.0, 0.0, 0.5, 1.0, name="left"), LayerRect(0.5, 0.0, 1.0, 1.0, name="right")]


def _layer2_amplitude():
    """Amplitude map that carries the flux of layer 1 into layer 2."""
    K = sy.Matrix(_K2).inv() * sy.Matrix(_K1)
    a = sy.Matrix([sy.nsimplify(v) for v in _A])
    return K * a, a


def spatial_case() -> MmsCase:
    """Two layers, cosine profile, linear in time (backward Euler is exact in t)."""
    Ka, a = _layer2_amplitude()
    c = [sy.nsimplify(v) for v in _C]
    half = sy.cos(sy.pi / 2)
    p1 = [a[j] * sy.cos(sy.pi * X) for j in range(2)]
    p2 = [a[j] * half + Ka[j] * (sy.cos(sy.pi * X) - half) for j in range(2)]
    time = sy.cos(sy.pi * Y) * (1 + T)
    exact = [[c[j] + p1[j] * time for j in range(2)], [c[j] + p2[j] * time for j in range(2)]]
    params = [LinearParams(_BETA, _K1), LinearParams(_BETA, _K2)]
    return MmsCase("spatial", _two_layer(), params, exact, {}, t_end=1.0)


def temporal_case() -> MmsCase:
    """Two layers, piecewise-linear profile decaying in time (P1 is exact in x)."""
    Ka, a = _layer2_amplitude()
    c = [sy.nsimplify(v) for v in _C]
    half = sy.Rational(1, 2)
    decay = sy.exp(-T)
    exact = [
        [c[j] + a[j] * X * decay for j in range(2)],
        [c[j] + (a[j] * half + Ka[j] * (X - half)) * decay for j in range(2)],
    ]
    params = [LinearParams(_BETA, _K1), LinearParams(_BETA, _K2)]
    robin = {"west": (1.0, 1.0), "east": (1.0, 1.0)}
    return MmsCase("temporal", _two_layer(), params, exact, robin, t_end=1.0)


def constant_case() -> MmsCase:
    params = [LinearParams(_BETA, _K1)]
    exact = [[sy.nsimplify(_C[0]), sy.nsimplify(_C[1])]]
    robin = {s: (2.0, 3.0) for s in ("west", "east", "south", "north")}
    return MmsCase("constant", [LayerRect(0.0, 0.0, 1.0, 1.0)], params, exact, robin, t_end=1.0)


def linear_case() -> MmsCase:
    params = [LinearParams(_BETA, _K1)]
    exact = [[sy.nsimplify(_C[j]) + sy.nsimplify(_A[j]) * X for j in range(2)]]
    robin = {"west": (1.0, 2.0), "east": (1.0, 2.0)}
    return MmsCase("linear", [LayerRect(0.0, 0.0, 1.0, 1.0)], params, exact, robin, t_end=1.0)


CASES = {
    "spatial": spatial_case,
    "temporal": temporal_case,
    "constant": constant_case,
    "linear": linear_case,
}
