"""Corner pencil analysis where an interface meets the exterior boundary.

For two sectors with frozen coefficient matrices the characteristic
determinant is

    D(lam) = D11 D22 - D12 D21,
    Djk    = e_l[j,k] sin(i lam w_l) cos(i lam (w_l1 - w_l))
             + e_l1[j,k] cos(i lam w_l) sin(i lam (w_l1 - w_l)).

Zeros with Im lam in (-1, 0) obstruct W^{2,2} regularity near the corner.
They are located with the argument principle on rectangles and refined by
multiplicity-aware Newton steps, finished in extended precision.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .errors import ContourThroughZero

SPLIT_FRACTION = 0.5 + 0.0371  # off-centre bisection keeps cuts away from Re = 0


@dataclass(frozen=True)
class PencilProblem:
    omega_l: float
    omega_l1: float
    eps_l: np.ndarray
    eps_l1: np.ndarray

    def __post_init__(self):
        el = np.array(self.eps_l, dtype=float).reshape(2, 2)
        el1 = np.array(self.eps_l1, dtype=float).reshape(2, 2)
        object.__setattr__(self, "eps_l", el)
        object.__setattr__(self, "eps_l1", el1)
        if not 0 < self.omega_l < self.omega_l1 <= 2 * math.pi + 1e-12:
            raise ValueError("need 0 < omega_l < omega_l1 <= 2 pi")
        for e in (el, el1):
            if np.any(e <= 0):
                raise ValueError("coefficient matrices must have positive entries")
            if not e[0, 0] * e[1, 1] > e[0, 1] * e[1, 0]:
                raise ValueError("coefficient matrices must satisfy e11 e22 > e12 e21")

    @property
    def scale(self):
        """Magnitude of the determinant away from its zeros (for the zero test)."""
        dets = [abs(np.linalg.det(e)) for e in (self.eps_l, self.eps_l1, self.eps_l + self.eps_l1)]
        return float(max(dets))

    @property
    def regime(self):
        """'theorem' for equal sector angles with total angle <= pi, else 'extrapolated'."""
        equal = math.isclose(self.omega_l, self.omega_l1 / 2, rel_tol=1e-12)
        return "theorem" if equal and self.omega_l1 <= math.pi + 1e-12 else "extrapolated"


@dataclass
class PencilRoot:
    lam: complex
    multiplicity_hint: int


@dataclass
class RegularityVerdict:
    regular: bool
    roots_in_strip: list = field(default_factory=list)
    regime: str = "extrapolated"


def _det(p: PencilProblem, lam, lib):
    w0 = p.omega_l
    dw = p.omega_l1 - p.omega_l
    # sin(i z) = i sinh z, cos(i z) = cosh z
    s0 = 1j * lib.sinh(lam * w0)
    c0 = lib.cosh(lam * w0)
    s1 = 1j * lib.sinh(lam * dw)
    c1 = lib.cosh(lam * dw)
    a, b = p.eps_l, p.eps_l1
    u, v = s0 * c1, c0 * s1

    def d(j, k):
        return float(a[j, k]) * u + float(b[j, k]) * v

    return d(0, 0) * d(1, 1) - d(0, 1) * d(1, 0)


def determinant(p: PencilProblem, lam) -> complex:
    return complex(_det(p, complex(lam), cmath))


def equal_angle_roots(omega_l, im_window=(-1.0, 0.0), open_window=True):
    """Members ``lam_k = -i k pi / (2 omega_l)`` of the equal-angle family in a window."""
    lo, hi = im_window
    step = math.pi / (2 * omega_l)
    out = []
    kmin = math.floor(-hi / step) - 1
    kmax = math.ceil(-lo / step) + 1
    for k in range(kmin, kmax + 1):
        im = -k * step
        inside = lo < im < hi if open_window else lo <= im <= hi
        if inside:
            out.append(complex(0.0, im))
    return sorted(out, key=lambda z: z.imag)


class _Counter:
    """Argument-principle winding numbers by adaptive phase tracking."""

    def __init__(self, f, tiny):
        self.f = f
        self.tiny = tiny

    def _value(self, z):
        v = self.f(z)
        if abs(v) < self.tiny or not cmath.isfinite(v):
            raise ContourThroughZero(f"|D| = {abs(v):.3e} on the contour at {z}")
        return v

    def segment(self, z0, z1, h_max):
        L = abs(z1 - z0)
        if L == 0:
            return 0.0
        d = (z1 - z0) / L
        s, f0 = 0.0, self._value(z0)
        h = min(h_max, L)
        slope = None
        total = 0.0
        while s < L:
            if slope is not None and slope > 0:
                h = min(h_max, max(0.25 * abs(f0) / slope, 1e-15 * L), 2 * h)
            h = min(h, L - s)
            while True:
                z = z0 + d * (s + h) if s + h < L else z1
                f1 = self._value(z)
                da = cmath.phase(f1 / f0)
                if abs(da) <= math.pi / 3:
                    break
                h *= 0.5
                if h < 1e-14 * max(L, 1.0):
                    raise ContourThroughZero(f"phase tracking stalled near {z0 + d * s}")
            slope = abs(f1 - f0) / h
            total += da
            s = s + h if s + h < L else L
            f0 = f1
        return total

    def winding(self, rect, h_max):
        x0, x1, y0, y1 = rect
        corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)]
        tot = sum(self.segment(corners[k], corners[(k + 1) % 4], h_max) for k in range(4))
        return tot / (2 * math.pi)

    def count(self, rect):
        x0, x1, y0, y1 = rect
        h = 0.25 * min(x1 - x0, y1 - y0, 1.0)
        prev = None
        for _ in range(8):
            w = self.winding(rect, h)
            n = round(w)
            if abs(w - n) < 0.05 and n == prev:
                return int(n)
            prev = n if abs(w - n) < 0.05 else None
            h *= 0.5
        raise ContourThroughZero(f"winding number did not stabilise on {rect}")


def _newton(f, z, m, tol=1e-13, maxit=60, h=1e-7):
    for _ in range(maxit):
        fz = f(z)
        df = (f(z + h) - f(z - h)) / (2 * h)
        if df == 0:
            return None
        step = m * fz / df
        z = z - step
        if abs(step) <= tol * max(1.0, abs(z)):
            return z
    return z


def _polish(p: PencilProblem, z, m, dps=40):
    """Multiplicity-aware Newton refinement in extended precision."""
    with mpmath.workdps(dps):
        f = lambda lam: _det(p, lam, mpmath)  # noqa: E731
        w = mpmath.mpc(z.real, z.imag)
        h = mpmath.mpf("1e-7")
        for _ in range(50):
            df = (f(w + h) - f(w - h)) / (2 * h)
            if df == 0:
                break
            step = m * f(w) / df
            w -= step
            if abs(step) < mpmath.mpf(10) ** (-(dps - 8)):
                break
        return complex(w)


def roots_in_strip(p: PencilProblem, re_window=(-12.0, 12.0), strip=(-1.0, 0.0),
                   inset=1e-6, min_size=1e-3) -> list:
    """Zeros of the determinant with Im in the open ``strip`` and Re in ``re_window``.

    Raises :class:`ContourThroughZero` when the determinant vanishes on a
    contour even after moving it.
    """
    f = lambda z: determinant(p, z)  # noqa: E731
    tiny = 1e-12 * p.scale
    counter = _Counter(f, tiny)
    found = []

    def isolate(rect, n, depth=0):
        x0, x1, y0, y1 = rect
        size = max(x1 - x0, y1 - y0)
        if n == 0:
            return
        if size < 0.5 or depth > 40:
            c = complex(0.5 * (x0 + x1), 0.5 * (y0 + y1))
            z = _newton(f, c, n)
            if z is not None and x0 <= z.real <= x1 and y0 <= z.imag <= y1:
                r = min(1e-3, 0.25 * size)
                box = (z.real - r, z.real + r, z.imag - r, z.imag + r)
                try:
                    k = counter.count(box)
                except ContourThroughZero:
                    k = -1
                if k == n:
                    found.append(PencilRoot(_polish(p, z, n), n))
                    return
            if size < min_size * 1e-3:
                # tiny rectangle that Newton cannot resolve: accept its centre
                found.append(PencilRoot(_polish(p, c, n), n))
                return
        for frac in (SPLIT_FRACTION, 0.5 - 0.0219, 0.5 + 0.1113):
            try:
                if x1 - x0 >= y1 - y0:
                    xm = x0 + frac * (x1 - x0)
                    parts = [(x0, xm, y0, y1), (xm, x1, y0, y1)]
                else:
                    ym = y0 + frac * (y1 - y0)
                    parts = [(x0, x1, y0, ym), (x0, x1, ym, y1)]
                counts = [counter.count(q) for q in parts]
                break
            except ContourThroughZero:
                continue
        else:
            raise ContourThroughZero(f"could not split rectangle {rect}")
        if sum(counts) != n:
            raise ContourThroughZero(f"inconsistent root counts {counts} vs {n} on {rect}")
        for q, k in zip(parts, counts):
            isolate(q, k, depth + 1)

    lo, hi = strip
    err = None
    for shrink in (inset, 10 * inset, 100 * inset):
        rect = (float(re_window[0]), float(re_window[1]), lo + shrink, hi - shrink)
        try:
            n = counter.count(rect)
            found.clear()
            isolate(rect, n)
            err = None
            break
        except ContourThroughZero as e:
            err = e
    if err is not None:
        raise err
    roots = [r for r in found if lo < r.lam.imag < hi]
    return sorted(roots, key=lambda r: (r.lam.imag, r.lam.real))


def regularity_verdict(p: PencilProblem, **kw) -> RegularityVerdict:
    roots = roots_in_strip(p, **kw)
    return RegularityVerdict(len(roots) == 0, roots, p.regime)


@dataclass
class CornerAnalysis:
    point: tuple
    layers: tuple
    problem: PencilProblem | None
    verdict: RegularityVerdict | None
    note: str = ""


def corner_problems(domain, eps_by_layer) -> list:
    """Pencil problems at every point where an interface meets the exterior boundary.

    ``eps_by_layer[k]`` is the frozen 2x2 conductivity matrix of layer ``k``.
    Points touched by more than two layers are reported without a problem.
    """
    out = []
    for pt in domain.interface_points():
        angles = dict(domain.angles_at(pt))
        layers = tuple(sorted(angles))
        if len(layers) != 2:
            out.append(CornerAnalysis(pt, layers, None, None,
                                      f"{len(layers)} layers meet here; two-sector pencil not applicable"))
            continue
        a, b = layers
        wa = angles[a]
        total = angles[a] + angles[b]
        try:
            prob = PencilProblem(wa, total, eps_by_layer[a], eps_by_layer[b])
        except ValueError as e:
            out.append(CornerAnalysis(pt, layers, None, None, str(e)))
            continue
        out.append(CornerAnalysis(pt, layers, prob, None))
    return out


def analyze_corners(domain, eps_by_layer, **kw) -> list:
    out = corner_problems(domain, eps_by_layer)
    for c in out:
        if c.problem is not None:
            c.verdict = regularity_verdict(c.problem, **kw)
    return out
