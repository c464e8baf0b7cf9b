"""Material coefficient models and structure-condition validators.

Every model maps a state sample ``(theta, m)`` to a :class:`CoefficientSet`
holding the storage functions ``B``, their Jacobian ``b``, the scalar
conductivities ``a`` and a volumetric source ``fsrc``.

Index conventions (0-based arrays, 1-based in the names):

* ``b[..., i, j] = dB^j / dz^i`` (row: unknown, column: balance equation)
* ``a[..., j, i] = a^{ji}``       (row: balance equation, column: unknown)

The storage term of balance equation ``j`` is therefore
``sum_i b[..., i, j] * du^i/dt``; :attr:`CoefficientSet.mass` returns that
matrix with the equation index first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import CurveError, OutOfDomain

THETA, MOIST = 0, 1


@dataclass(frozen=True)
class StateSample:
    """Temperature (K) and the moisture variable; fields may be arrays."""

    theta: object
    m: object


def state_grid(theta_range, m_range, n=11) -> StateSample:
    """Tensor grid of ``n x n`` state samples, flattened."""
    th, mm = np.meshgrid(np.linspace(*theta_range, n), np.linspace(*m_range, n), indexing="ij")
    return StateSample(th.ravel(), mm.ravel())


class MonotoneCurve:
    """Shape-preserving C1 piecewise-cubic interpolant of tabulated data."""

    def __init__(self, x, y, name=""):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or len(x) < 2:
            raise CurveError(f"{name or 'curve'}: need matching 1-D x/y with >= 2 points")
        if np.any(np.diff(x) <= 0):
            raise CurveError(f"{name or 'curve'}: x must be strictly increasing")
        if np.any(np.diff(y) < 0):
            raise CurveError(f"{name or 'curve'}: y must be non-decreasing")
        self.x, self.y, self.name = x, y, name
        self._p = PchipInterpolator(x, y, extrapolate=False)
        self._dp = self._p.derivative()

    @property
    def domain(self):
        return float(self.x[0]), float(self.x[-1])

    def _check(self, x, clip):
        x = np.asarray(x, dtype=float)
        lo, hi = self.domain
        if clip:
            return np.clip(x, lo, hi)
        if np.any(x < lo) or np.any(x > hi) or np.any(~np.isfinite(x)):
            raise OutOfDomain(f"{self.name or 'curve'}: argument outside [{lo}, {hi}]")
        return x

    def __call__(self, x, clip=False):
        return self._p(self._check(x, clip))

    def derivative(self, x, clip=False):
        # PCHIP slopes are non-negative for non-decreasing data; clamp rounding noise
        return np.maximum(self._dp(self._check(x, clip)), 0.0)


class Surface2:
    """Bilinear interpolation on a rectilinear grid over (m-axis, theta-axis)."""

    def __init__(self, m_axis, theta_axis, values, name=""):
        self.m_axis = np.asarray(m_axis, dtype=float)
        self.theta_axis = np.asarray(theta_axis, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.name = name
        if self.values.shape != (len(self.m_axis), len(self.theta_axis)):
            raise CurveError(f"{name or 'surface'}: value grid shape mismatch")
        for ax in (self.m_axis, self.theta_axis):
            if len(ax) < 2 or np.any(np.diff(ax) <= 0):
                raise CurveError(f"{name or 'surface'}: axes must be strictly increasing")
        if np.any(self.values <= 0):
            raise CurveError(f"{name or 'surface'}: values must be positive")

    def __call__(self, m, theta, clip=False):
        m = np.asarray(m, dtype=float)
        theta = np.asarray(theta, dtype=float)
        ma, ta = self.m_axis, self.theta_axis
        if clip:
            m = np.clip(m, ma[0], ma[-1])
            theta = np.clip(theta, ta[0], ta[-1])
        elif (
            np.any(m < ma[0]) or np.any(m > ma[-1])
            or np.any(theta < ta[0]) or np.any(theta > ta[-1])
        ):
            raise OutOfDomain(f"{self.name or 'surface'}: state outside tabulated range")
        i = np.clip(np.searchsorted(ma, m, side="right") - 1, 0, len(ma) - 2)
        k = np.clip(np.searchsorted(ta, theta, side="right") - 1, 0, len(ta) - 2)
        s = (m - ma[i]) / (ma[i + 1] - ma[i])
        t = (theta - ta[k]) / (ta[k + 1] - ta[k])
        v = self.values
        return (
            (1 - s) * (1 - t) * v[i, k]
            + s * (1 - t) * v[i + 1, k]
            + (1 - s) * t * v[i, k + 1]
            + s * t * v[i + 1, k + 1]
        )


@dataclass
class CoefficientSet:
    B: np.ndarray
    b: np.ndarray
    a: np.ndarray
    fsrc: np.ndarray

    @property
    def mass(self):
        """Storage matrix indexed ``[..., equation, unknown]``."""
        return np.swapaxes(self.b, -1, -2)

    def take(self, idx):
        return CoefficientSet(self.B[idx], self.b[idx], self.a[idx], self.fsrc[idx])


def _pack(B1, B2, b11, b12, b21, b22, a11, a12, a21, a22):
    shape = np.broadcast(B1, B2, b11, b12, b21, b22, a11, a12, a21, a22).shape

    def full(v):
        return np.broadcast_to(np.asarray(v, dtype=float), shape)

    B = np.stack([full(B1), full(B2)], axis=-1)
    b = np.stack(
        [np.stack([full(b11), full(b12)], -1), np.stack([full(b21), full(b22)], -1)], -2
    )
    a = np.stack(
        [np.stack([full(a11), full(a12)], -1), np.stack([full(a21), full(a22)], -1)], -2
    )
    return CoefficientSet(B, b, a, np.zeros(shape + (2,)))


@dataclass(frozen=True)
class KiesslParams:
    """Kiessl model: second unknown is the dimensionless moisture potential."""

    rho0: float
    c0: float
    rho_w: float
    c_w: float
    e: float
    L_v: float
    alpha1: float
    alpha2: float
    f: MonotoneCurve
    g: MonotoneCurve
    rho_ps: MonotoneCurve
    lam: Surface2
    D_w: Surface2
    D_phi: Surface2
    D_theta: Surface2

    def __post_init__(self):
        for name in ("rho0", "c0", "rho_w", "c_w", "L_v", "alpha1", "alpha2"):
            if not getattr(self, name) > 0:
                raise CurveError(f"Kiessl parameter {name} must be positive")
        if not 0 < self.e <= 1:
            raise CurveError("porosity e must lie in (0, 1]")
        if self.f(0.0) != 0 or self.g(0.0) != 0:
            raise CurveError("Kiessl curves require f(0) = g(0) = 0")
        if abs(float(self.g.derivative(0.0)) - 1.0) > 1e-6:
            raise CurveError("Kiessl curve g must satisfy g'(0) = 1")

    def state_bounds(self):
        lo = max(self.f.domain[0], self.g.domain[0])
        hi = min(self.f.domain[1], self.g.domain[1])
        return self.rho_ps.domain, (lo, hi)

    def newton_alpha(self):
        return (self.alpha1, self.alpha2)

    def evaluate(self, s, clip=False):
        return eval_kiessl(self, s, clip=clip)


@dataclass(frozen=True)
class KunzelParams:
    """Kuenzel model: second unknown is relative humidity."""

    rho0: float
    c0: float
    rho_w: float
    c_w: float
    L_v: float
    mu: float
    alpha1: float
    alpha2: float
    h_curve: MonotoneCurve
    p_s: MonotoneCurve
    delta: MonotoneCurve
    lam: Surface2
    D_phi_hat: Surface2

    def __post_init__(self):
        for name in ("rho0", "c0", "rho_w", "c_w", "L_v", "mu", "alpha1", "alpha2"):
            if not getattr(self, name) > 0:
                raise CurveError(f"Kuenzel parameter {name} must be positive")
        if self.h_curve(0.0) != 0:
            raise CurveError("Kuenzel storage function requires h(0) = 0")

    def state_bounds(self):
        th = (max(self.p_s.domain[0], self.delta.domain[0]),
              min(self.p_s.domain[1], self.delta.domain[1]))
        return th, (max(0.0, self.h_curve.domain[0]), min(1.0, self.h_curve.domain[1]))

    def newton_alpha(self):
        return (self.alpha1, self.alpha2)

    def evaluate(self, s, clip=False):
        return eval_kunzel(self, s, clip=clip)


@dataclass(frozen=True)
class LinearParams:
    """Constant coefficients of the linear transmission system.

    ``beta[j][i]`` and ``kappa[j][i]`` multiply unknown ``i`` in equation
    ``j``. ``nu`` is the Robin coefficient of a homogeneous Newton condition
    on this layer's exterior edges; ``alpha`` is the default exchange
    coefficient used when a boundary section does not give one.
    """

    beta: np.ndarray
    kappa: np.ndarray
    nu: tuple = (0.0, 0.0)
    alpha: tuple = (0.0, 0.0)

    def __post_init__(self):
        beta = np.array(self.beta, dtype=float).reshape(2, 2)
        kappa = np.array(self.kappa, dtype=float).reshape(2, 2)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "nu", tuple(float(v) for v in self.nu))
        object.__setattr__(self, "alpha", tuple(float(v) for v in self.alpha))
        if np.any(self.beta[[0, 1], [0, 1]] <= 0) or np.any(self.kappa[[0, 1], [0, 1]] <= 0):
            raise CurveError("diagonal beta and kappa entries must be positive")
        if np.any(self.beta < 0) or np.any(self.kappa < 0):
            raise CurveError("beta and kappa entries must be non-negative")
        if min(self.nu) < 0 or min(self.alpha) < 0:
            raise CurveError("nu and alpha must be non-negative")

    def state_bounds(self):
        return (-math.inf, math.inf), (-math.inf, math.inf)

    def newton_alpha(self):
        return self.alpha

    def evaluate(self, s, clip=False):
        return eval_linear(self, s)


def eval_kiessl(p: KiesslParams, s: StateSample, clip=False) -> CoefficientSet:
    theta = np.asarray(s.theta, dtype=float)
    phi = np.asarray(s.m, dtype=float)
    if clip:
        (tlo, thi), (mlo, mhi) = p.state_bounds()
        theta, phi = np.clip(theta, tlo, thi), np.clip(phi, mlo, mhi)
    f, fp = p.f(phi), p.f.derivative(phi)
    g, gp = p.g(phi), p.g.derivative(phi)
    r, rp = p.rho_ps(theta), p.rho_ps.derivative(theta)
    w = f
    lam = p.lam(w, theta, clip=clip)
    Dw = p.D_w(w, theta, clip=clip)
    Dphi = p.D_phi(w, theta, clip=clip)
    Dth = p.D_theta(w, theta, clip=clip)

    B1 = p.rho0 * p.c0 * theta + p.rho_w * p.c_w * g * theta + p.L_v * (e_f := p.e - f) * g * r
    B2 = p.rho_w * f + e_f * g * r
    vap = (-fp * g + e_f * gp) * r  # d/dPhi of (e - f) g rho_ps
    b11 = p.rho0 * p.c0 + p.rho_w * p.c_w * g + p.L_v * e_f * g * rp
    b21 = p.rho_w * p.c_w * gp * theta + p.L_v * vap
    b12 = e_f * g * rp
    b22 = p.rho_w * fp + vap
    a22 = Dw * fp + Dphi * gp
    return _pack(B1, B2, b11, b12, b21, b22, lam, p.L_v * a22, Dth, a22)


def eval_kunzel(p: KunzelParams, s: StateSample, clip=False) -> CoefficientSet:
    theta = np.asarray(s.theta, dtype=float)
    phi = np.asarray(s.m, dtype=float)
    if clip:
        (tlo, thi), (mlo, mhi) = p.state_bounds()
        theta, phi = np.clip(theta, tlo, thi), np.clip(phi, mlo, mhi)
    elif np.any(phi < 0) or np.any(phi > 1):
        raise OutOfDomain("relative humidity outside [0, 1]")
    h, hp = p.h_curve(phi), p.h_curve.derivative(phi)
    ps, psp = p.p_s(theta), p.p_s.derivative(theta)
    vap = p.delta(theta) / p.mu
    lam = p.lam(h, theta, clip=clip)
    Dhat = p.D_phi_hat(phi, theta, clip=clip)

    B1 = p.rho0 * p.c0 * theta + p.rho_w * p.c_w * h * theta
    B2 = p.rho_w * h
    b11 = p.rho0 * p.c0 + p.rho_w * p.c_w * h
    b21 = p.rho_w * p.c_w * theta * hp
    b22 = p.rho_w * hp
    a11 = lam + p.L_v * vap * phi * psp
    a12 = p.L_v * vap * ps
    a21 = vap * phi * psp
    a22 = Dhat + vap * ps
    return _pack(B1, B2, b11, 0.0, b21, b22, a11, a12, a21, a22)


def eval_linear(p: LinearParams, s: StateSample) -> CoefficientSet:
    theta = np.asarray(s.theta, dtype=float)
    m = np.asarray(s.m, dtype=float)
    shape = np.broadcast(theta, m).shape
    z = np.stack([np.broadcast_to(theta, shape), np.broadcast_to(m, shape)], axis=-1)
    B = z @ p.beta.T
    b = np.broadcast_to(p.beta.T, shape + (2, 2)).copy()
    a = np.broadcast_to(p.kappa, shape + (2, 2)).copy()
    return CoefficientSet(B, b, a, np.zeros(shape + (2,)))


class CrossScaledModel:
    """Wrap a model and multiply its cross conductivities a^12, a^21."""

    def __init__(self, base, factor):
        self.base, self.factor = base, float(factor)

    def state_bounds(self):
        return self.base.state_bounds()

    def newton_alpha(self):
        return self.base.newton_alpha()

    def evaluate(self, s, clip=False):
        c = self.base.evaluate(s, clip=clip)
        a = c.a.copy()
        a[..., 0, 1] *= self.factor
        a[..., 1, 0] *= self.factor
        return CoefficientSet(c.B, c.b, a, c.fsrc)


@dataclass
class ConditionCheck:
    passed: bool
    n_fail: int
    first_fail: StateSample | None = None
    lhs: float | None = None
    rhs: float | None = None


@dataclass
class StructureReport:
    n_samples: int
    checks: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(c.passed for c in self.checks.values())

    def lines(self):
        out = []
        for name, c in self.checks.items():
            s = "pass" if c.passed else f"FAIL ({c.n_fail}/{self.n_samples})"
            if c.first_fail is not None:
                s += f" first at theta={c.first_fail.theta:.6g}, m={c.first_fail.m:.6g}"
                s += f" lhs={c.lhs:.6g} rhs={c.rhs:.6g}"
            out.append(f"{name}: {s}")
        return out


def _check(ok, lhs, rhs, theta, m):
    ok = np.asarray(ok, dtype=bool).ravel()
    n_fail = int(np.count_nonzero(~ok))
    if n_fail == 0:
        return ConditionCheck(True, 0)
    k = int(np.flatnonzero(~ok)[0])
    return ConditionCheck(
        False, n_fail, StateSample(float(theta[k]), float(m[k])),
        float(np.ravel(lhs)[k]), float(np.ravel(rhs)[k]),
    )


def check_structure_conditions(model, sample_grid) -> StructureReport:
    """Evaluate (A1), positivity, ellipticity and the parabolicity inequality.

    ``sample_grid`` is a :class:`StateSample` with array fields or a list of
    scalar samples. Inequalities are strict: equality is reported as failure.
    """
    if isinstance(sample_grid, StateSample):
        theta = np.atleast_1d(np.asarray(sample_grid.theta, dtype=float))
        m = np.atleast_1d(np.asarray(sample_grid.m, dtype=float))
    else:
        samples = list(sample_grid)
        theta = np.array([s.theta for s in samples], dtype=float)
        m = np.array([s.m for s in samples], dtype=float)
    if theta.size == 0:
        raise ValueError("sample grid is empty")
    c = model.evaluate(StateSample(theta, m))
    b, a, M = c.b, c.a, c.mass
    report = StructureReport(theta.size)
    zero = np.zeros_like(theta)
    report.checks["A1 monotone storage"] = _check(
        (b[:, 0, 0] > 0) & (b[:, 1, 1] > 0), np.minimum(b[:, 0, 0], b[:, 1, 1]), zero, theta, m
    )
    amin = a.reshape(-1, 4).min(axis=1)
    report.checks["A2 positive conductivities"] = _check(amin > 0, amin, zero, theta, m)
    lhs8 = a[:, 0, 0] * a[:, 1, 1]
    rhs8 = a[:, 0, 1] * a[:, 1, 0]
    report.checks["ellipticity"] = _check(lhs8 > rhs8, lhs8, rhs8, theta, m)
    lhs7 = M[:, 0, 0] * M[:, 1, 1] * a[:, 0, 1] * a[:, 1, 0]
    rhs7 = ((M[:, 0, 1] * a[:, 1, 0] + M[:, 1, 0] * a[:, 0, 1]) / 2) ** 2
    report.checks["parabolicity"] = _check(lhs7 > rhs7, lhs7, rhs7, theta, m)
    return report


@dataclass
class LinearConditionReport:
    parabolicity: bool
    ellipticity: bool
    parabolicity_sides: tuple
    ellipticity_sides: tuple
    note: str = ""

    @property
    def passed(self):
        return self.parabolicity and self.ellipticity


def check_linear_conditions(p: LinearParams) -> LinearConditionReport:
    beta, k = p.beta, p.kappa
    l1 = beta[0, 0] * beta[1, 1] * k[0, 1] * k[1, 0]
    r1 = ((beta[0, 1] * k[1, 0] + beta[1, 0] * k[0, 1]) / 2) ** 2
    l2 = k[0, 0] * k[1, 1]
    r2 = k[0, 1] * k[1, 0]
    note = ""
    if l1 == r1 or l2 == r2:
        note = "equality counts as failure (strict inequality)"
    return LinearConditionReport(bool(l1 > r1), bool(l2 > r2), (l1, r1), (l2, r2), note)
