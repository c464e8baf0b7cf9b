"""Rothe time marching with semi-implicit or Picard treatment of the nonlinearity."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .assembly import (
    BoundaryDrive,
    Field,
    assemble_step_system,
    discrete_energy,
    evaluate_coefficients,
    weighted_totals,
)
from .errors import MaxPicardExceeded, NonContraction, NonfiniteState
from .linsolve import solve
from .materials import LinearParams

log = logging.getLogger(__name__)


@dataclass
class Problem:
    """Everything needed to advance a field: mesh, per-layer models, forcing.

    ``models[k]`` is the material model of layer ``k``; ``source(t, x, y)`` is
    an optional volumetric source of shape ``(..., 2)``.
    """

    mesh: object
    models: list
    drive: BoundaryDrive = field(default_factory=BoundaryDrive)
    source: object = None
    clip: bool = True
    solver_tol: float = 1e-10

    def __post_init__(self):
        ne = len(self.mesh.exterior_edges)
        self.edge_alpha = np.zeros((ne, 2))
        self.edge_nu = np.zeros((ne, 2))
        for k, L in enumerate(self.mesh.exterior_layer):
            model = self.models[L]
            self.edge_alpha[k] = model.newton_alpha()
            if isinstance(model, LinearParams):
                self.edge_nu[k] = model.nu

    @property
    def is_linear(self):
        return all(isinstance(m, LinearParams) for m in self.models)

    def coefficients(self, f: Field):
        return evaluate_coefficients(self.mesh, self.models, f, clip=self.clip)

    def system(self, coeffs, prev: Field, h_t, t_now):
        return assemble_step_system(
            self.mesh, coeffs, prev, h_t, self.drive, t_now,
            source=self.source, edge_alpha=self.edge_alpha, edge_nu=self.edge_nu,
        )


@dataclass
class SimState:
    t: float
    n: int
    field: Field


@dataclass
class StepReport:
    picard_iters: int = 0
    contraction_ratios: list = field(default_factory=list)
    linear_residual: float = 0.0
    linear_iters: int = 0
    energy: float | None = None
    mass: tuple = (math.nan, math.nan)
    final_delta: float = 0.0


def _diagnostics(problem: Problem, f: Field, report: StepReport):
    if problem.is_linear:
        c = problem.coefficients(f)
        report.energy = discrete_energy(problem.mesh, f, problem.models)
        report.mass = tuple(float(v) for v in weighted_totals(problem.mesh, f, c))


def _solve_step(problem, coeffs, prev, h_t, t_now, x0):
    sysm = problem.system(coeffs, prev, h_t, t_now)
    res = solve(sysm, sysm.rhs, tol=problem.solver_tol, x0=x0)
    if not np.all(np.isfinite(res.x)):
        raise NonfiniteState(f"non-finite field at t={t_now:g}")
    return res


def semi_implicit_step(state: SimState, problem: Problem, h_t) -> tuple[SimState, StepReport]:
    """One backward-Euler step with coefficients frozen at the previous field."""
    t_new = state.t + h_t
    res = _solve_step(problem, problem.coefficients(state.field), state.field, h_t, t_new,
                      state.field.values)
    new = Field(res.x)
    report = StepReport(1, [], res.residual, res.iterations)
    _diagnostics(problem, new, report)
    return SimState(t_new, state.n + 1, new), report


def picard_step(state: SimState, problem: Problem, h_t, eps_fp=1e-8, k_max=50):
    """One backward-Euler step resolved by fixed-point iteration on the coefficients.

    Iterates from the previous field until the max-norm update drops to
    ``eps_fp``. Raises :class:`NonContraction` when the update ratio stays
    at or above one for three consecutive iterations.
    """
    if not eps_fp > 0:
        raise ValueError("eps_fp must be positive")
    t_new = state.t + h_t
    u = state.field.values
    deltas, ratios = [], []
    streak = 0
    res = None
    for k in range(1, k_max + 1):
        res = _solve_step(problem, problem.coefficients(Field(u)), state.field, h_t, t_new, u)
        d = float(np.max(np.abs(res.x - u)))
        u = res.x
        deltas.append(d)
        if len(deltas) >= 2 and deltas[-2] > 0 and d > 0:
            r = d / deltas[-2]
            ratios.append(r)
            streak = streak + 1 if r >= 1 else 0
            if streak >= 3:
                raise NonContraction(
                    f"Picard update grew for 3 consecutive iterations at t={t_new:g}, "
                    f"h_t={h_t:g}; halve the time step", ratios)
        if k >= 2 and d <= eps_fp or (k == 1 and d == 0.0):
            break
        if k == 1 and problem.is_linear:
            # coefficients do not depend on the state: the first solve is final
            break
    else:
        raise MaxPicardExceeded(
            f"Picard did not converge in {k_max} iterations at t={t_new:g} "
            f"(last update {deltas[-1]:.3e})", ratios)
    new = Field(u)
    report = StepReport(len(deltas), ratios, res.residual, res.iterations,
                        final_delta=deltas[-1])
    _diagnostics(problem, new, report)
    return SimState(t_new, state.n + 1, new), report


def steady_state(problem: Problem, guess: Field, strategy="semi_implicit", eps_fp=1e-8,
                 k_max=50, t=0.0) -> tuple[Field, StepReport]:
    """Steady solution, obtained as a step with infinite time step."""
    s0 = SimState(t, 0, guess)
    if strategy == "picard":
        s1, rep = picard_step(s0, problem, math.inf, eps_fp, k_max)
    else:
        s1, rep = semi_implicit_step(s0, problem, math.inf)
    return s1.field, rep


def compatibility_warnings(problem: Problem, init: Field, t0=0.0, tol=1e-9):
    """Exterior nodes where the initial field differs from the boundary reference values.

    Returns a list of messages (one per driven segment with a mismatch); the
    run proceeds regardless.
    """
    mesh = problem.mesh
    out = []
    for seg, d in problem.drive.segments.items():
        idx = np.flatnonzero(mesh.exterior_segment == seg)
        if len(idx) == 0:
            continue
        nodes = np.unique(mesh.exterior_edges[idx])
        sig = d.values_at(t0, mesh.nodes[nodes])
        gap = np.max(np.abs(init.nodal[nodes] - sig), axis=0)
        scale = 1.0 + np.max(np.abs(sig), axis=0)
        if np.any(gap > tol * scale):
            out.append(
                f"segment {seg}: initial field differs from boundary reference "
                f"by {gap[0]:.3g} (comp 1), {gap[1]:.3g} (comp 2)")
    for msg in out:
        log.warning(msg)
    return out


@dataclass
class Trajectory:
    times: list
    snapshots: list  # (t, Field) at requested snapshot times
    probes: dict  # name -> array (n_steps+1, 2)
    reports: list
    warnings: list


def simulate(problem: Problem, init: Field, h_t, t_end, strategy="semi_implicit",
             eps_fp=1e-8, k_max=50, snapshot_times=(), probes=None, on_step=None) -> Trajectory:
    """Uniform stepping on ``[0, t_end]``.

    ``probes`` maps names to ``(x, y)`` points; the nearest node is sampled.
    ``on_step(state, report)`` is called after every step.
    """
    if strategy not in ("semi_implicit", "picard"):
        raise ValueError(f"unknown strategy {strategy!r}")
    if not h_t > 0:
        raise ValueError("time step must be positive")
    n_steps = int(round(t_end / h_t))
    if abs(n_steps * h_t - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError("t_end must be a multiple of h_t")
    warnings = compatibility_warnings(problem, init)
    probe_nodes = {k: problem.mesh.nearest_node(*xy) for k, xy in (probes or {}).items()}
    snap_steps = {int(round(t / h_t)) for t in snapshot_times}

    state = SimState(0.0, 0, init)
    times = [0.0]
    series = {k: [init.nodal[i].copy()] for k, i in probe_nodes.items()}
    snaps = [(0.0, init)] if 0 in snap_steps else []
    reports = []
    for n in range(1, n_steps + 1):
        if strategy == "picard":
            state, rep = picard_step(state, problem, h_t, eps_fp, k_max)
        else:
            state, rep = semi_implicit_step(state, problem, h_t)
        state.t = n * h_t  # avoid drift from repeated addition
        reports.append(rep)
        times.append(state.t)
        for k, i in probe_nodes.items():
            series[k].append(state.field.nodal[i].copy())
        if n in snap_steps:
            snaps.append((state.t, state.field))
        if on_step is not None:
            on_step(state, rep)
    return Trajectory(times, snaps, {k: np.array(v) for k, v in series.items()}, reports, warnings)
