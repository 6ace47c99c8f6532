r"""Crank-Nicolson evolution of the weighted heat semigroup.

The column H(s, . , w0) solves  du/ds = -Box u  from a discrete delta
(1/h^2 at the node nearest w0).  Time stepping is the trapezoidal rule

    (I + dt/2 A) u^{n+1} = (I - dt/2 A) u^n,

unconditionally contractive because A is Hermitian positive semidefinite,
second order in dt.  Each implicit solve runs preconditioned conjugate
gradients (Jacobi preconditioner, warm-started from the current state) to
a relative residual of 1e-10; the matrix is only applied, never factored,
so memory stays linear in the number of nodes.

Snapshot schedules are hit exactly: each gap between requested times is
subdivided into an integer number of steps no longer than the caller's dt
(optionally stretched late in time via ``rel_dt``, useful for log-spaced
schedules where a fixed dt would waste thousands of steps resolving the
tail).  The time integral of a column,

    G(z) = int_0^{S_max} H(s, z, w0) ds,

is accumulated by the trapezoid rule over a log-spaced schedule, with the
truncated tail estimated from the fitted exponential decay rate of the
last decade and compared against the near-diagonal size of G.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse.linalg as spla

from .box_operator import ComplexField, DiscreteBox, Grid2D, assemble_box
from .errors import (
    ScheduleTooShortError,
    ScheduleUnreachableError,
    SolverDivergedError,
    TailNotNegligibleError,
)
from .geometry import mu_fn
from .polynomial import PolynomialSpec, poly_id

__all__ = [
    "KernelColumn",
    "FundamentalSolutionField",
    "evolve",
    "kernel_column",
    "fundamental_solution",
    "free_heat_kernel",
    "ring_mean",
    "default_halfwidth",
]

#: Relative residual target for the inner conjugate-gradient solves.
CG_RTOL = 1e-10
CG_MAXITER = 600

#: Snapshot times must sit at least this many raw steps past zero.
BURN_IN_STEPS = 20


def free_heat_kernel(s: float, z, w: complex) -> np.ndarray:
    """Unweighted heat kernel (1/(pi s)) exp(-|z - w|^2 / s)."""
    z = np.asarray(z, dtype=complex)
    return np.exp(-np.abs(z - w) ** 2 / s) / (np.pi * s)


def default_halfwidth(w0: complex, s_max: float) -> float:
    """Grid half-width rule: source offset + 6 diffusion lengths + margin 2."""
    return abs(complex(w0)) + 6.0 * np.sqrt(s_max) + 2.0


def _validate_schedule(schedule: Sequence[float], dt: float) -> np.ndarray:
    sched = np.asarray(list(schedule), dtype=float)
    if sched.size == 0:
        raise ScheduleUnreachableError("empty snapshot schedule")
    if not np.all(np.isfinite(sched)) or sched[0] <= 0:
        raise ScheduleUnreachableError("schedule times must be finite and positive")
    if np.any(np.diff(sched) <= 0):
        raise ScheduleUnreachableError("schedule times must be strictly ascending")
    if dt <= 0:
        raise ScheduleUnreachableError(f"dt must be positive, got {dt}")
    gaps = np.diff(np.concatenate([[0.0], sched]))
    if dt > gaps.min() / 10 * (1 + 1e-12):
        raise ScheduleUnreachableError(
            f"dt = {dt:g} too coarse for the schedule: smallest gap "
            f"{gaps.min():g} needs dt <= gap/10"
        )
    return sched


def _step_through(box: DiscreteBox, u: np.ndarray, sched: np.ndarray,
                  dt: float, rel_dt: Optional[float],
                  stats: Dict[str, float]) -> Iterator[Tuple[float, np.ndarray]]:
    """Yield (s_i, u(s_i)) at every schedule point, stepping CN in between."""
    A = box.matrix
    m = A.shape[0]
    diag = box.diagonal
    prev_norm = np.inf

    t = 0.0
    for s_target in sched:
        gap = s_target - t
        start = t
        target_dt = dt if rel_dt is None else max(dt, rel_dt * max(start, dt))
        n_sub = max(1, int(np.ceil(gap / target_dt - 1e-12)))
        dt_sub = gap / n_sub

        half = 0.5 * dt_sub
        dinv = 1.0 / (1.0 + half * diag)
        op = spla.LinearOperator(
            (m, m), matvec=lambda x, _h=half: x + _h * (A @ x), dtype=complex)
        M = spla.LinearOperator(
            (m, m), matvec=lambda x, _d=dinv: _d * x, dtype=complex)

        for _ in range(n_sub):
            b = u - half * (A @ u)
            it = 0

            def _count(_xk):
                nonlocal it
                it += 1

            u_next, info = spla.cg(op, b, x0=u, rtol=CG_RTOL, atol=0.0,
                                   maxiter=CG_MAXITER, M=M, callback=_count)
            stats["cg_iters_max"] = max(stats.get("cg_iters_max", 0), it)
            stats["cg_iters_total"] = stats.get("cg_iters_total", 0) + it
            stats["steps"] = stats.get("steps", 0) + 1
            if info != 0:
                raise SolverDivergedError(
                    f"conjugate gradients failed at t = {t:g} "
                    f"(dt = {dt_sub:g}, info = {info})"
                )
            if not np.all(np.isfinite(u_next)):
                raise SolverDivergedError(f"non-finite state at t = {t:g}")
            u = u_next
            t += dt_sub
        t = float(s_target)  # kill accumulated float drift

        norm = float(np.linalg.norm(u))
        if norm > prev_norm * (1.0 + 1e-9):
            raise SolverDivergedError(
                f"L2 norm grew between snapshots ({prev_norm:g} -> {norm:g}); "
                f"the scheme must be contractive"
            )
        prev_norm = norm
        yield float(s_target), u


@dataclass
class KernelColumn:
    """Snapshots of one heat evolution, usually a kernel column H(s, ., w0).

    ``source`` is the snapped delta location (None when the evolution was
    started from a general field).  Snapshots are contractive in L2 and
    finite; both are enforced during stepping.
    """

    grid: Grid2D
    tau: float
    source: Optional[complex]
    times: np.ndarray
    snapshots: List[ComplexField]
    meta: Dict[str, object] = dc_field(default_factory=dict)

    def snapshot_at(self, s: float) -> ComplexField:
        i = int(np.argmin(np.abs(self.times - s)))
        if abs(self.times[i] - s) > 1e-9 * max(1.0, abs(s)):
            raise KeyError(f"no snapshot at s = {s}; have {self.times}")
        return self.snapshots[i]

    def value_at(self, s: float, z: complex) -> complex:
        snap = self.snapshot_at(s)
        iy, ix = self.grid.nearest_node(z)
        return complex(snap.values[iy, ix])

    def peak_series(self, extra_margin: int = 0) -> np.ndarray:
        return np.array([f.max_abs(extra_margin) for f in self.snapshots])

    def norms(self) -> np.ndarray:
        return np.array([f.l2_norm() for f in self.snapshots])


def evolve(box: DiscreteBox, u0, schedule: Sequence[float], dt: float,
           rel_dt: Optional[float] = None) -> KernelColumn:
    """Run Crank-Nicolson from an arbitrary initial field.

    ``dt`` must not exceed a tenth of the smallest schedule gap (counting
    the gap from 0 to the first snapshot), so every requested time is hit
    exactly by an integer number of steps.  ``rel_dt`` optionally lets the
    step grow to ``rel_dt * t`` late in the evolution.
    """
    sched = _validate_schedule(schedule, dt)
    if isinstance(u0, ComplexField):
        u = u0.values.astype(complex).ravel().copy()
    else:
        u = np.asarray(u0, dtype=complex).ravel().copy()
    if u.shape[0] != box.shape[0]:
        raise ValueError(f"initial field has {u.shape[0]} entries, "
                         f"operator expects {box.shape[0]}")
    if not np.all(np.isfinite(u)):
        raise ValueError("initial field contains non-finite values")

    stats: Dict[str, float] = {}
    n = box.grid.n
    snaps: List[ComplexField] = []
    for _, u_s in _step_through(box, u, sched, dt, rel_dt, stats):
        snaps.append(ComplexField(box.grid, u_s.reshape(n, n).copy()))
    meta = {"dt": dt, "rel_dt": rel_dt, "solver": dict(stats),
            "tau": box.tau, "poly": poly_id(box.poly),
            "grid": {"L": box.grid.L, "n": box.grid.n}}
    return KernelColumn(grid=box.grid, tau=box.tau, source=None,
                        times=sched, snapshots=snaps, meta=meta)


def kernel_column(p: PolynomialSpec, tau: float, grid: Grid2D, w0: complex,
                  schedule: Sequence[float], dt: float = 5e-4,
                  rel_dt: Optional[float] = None,
                  box: Optional[DiscreteBox] = None) -> KernelColumn:
    """Heat-kernel column from a discrete delta at the node nearest w0.

    The first snapshot must sit past the burn-in window of 20 raw steps
    (the discrete delta needs a few steps to mollify before pointwise
    values mean anything); earlier requests raise ScheduleUnreachableError.
    An already-assembled operator can be passed to skip re-assembly.
    """
    sched = _validate_schedule(schedule, dt)
    if sched[0] < BURN_IN_STEPS * dt * (1 - 1e-12):
        raise ScheduleUnreachableError(
            f"first snapshot {sched[0]:g} inside burn-in window "
            f"({BURN_IN_STEPS} * dt = {BURN_IN_STEPS * dt:g})"
        )
    iy, ix = grid.nearest_node(w0)
    if min(iy, ix) < 2 or max(iy, ix) > grid.n - 3:
        raise ValueError(f"source w0 = {w0} too close to the boundary")
    if box is None:
        box = assemble_box(p, tau, grid)
    u0 = np.zeros((grid.n, grid.n), dtype=complex)
    u0[iy, ix] = 1.0 / grid.h**2
    col = evolve(box, u0, sched, dt, rel_dt)
    src = grid.node_point(iy, ix)
    col.source = src
    col.meta["w0_requested"] = complex(w0)
    col.meta["w0_snapped"] = src
    return col


def ring_mean(f: ComplexField, center: complex, r: float,
              width: Optional[float] = None) -> float:
    """Mean of |f| over grid nodes in the annulus r +- width/2.

    Default width is one grid spacing; raises if the annulus captures no
    node or leaves the trusted interior.
    """
    h = f.grid.h
    width = h if width is None else width
    Z = f.grid.zmesh()
    d = np.abs(Z - center)
    mask = (np.abs(d - r) <= width / 2) & f.interior_mask()
    if not mask.any():
        raise ValueError(f"no interior grid node on ring r = {r:g}")
    return float(np.abs(f.values[mask]).mean())


@dataclass
class FundamentalSolutionField:
    """Time integral G of a kernel column with its truncation audit."""

    field: ComplexField
    source: complex
    s_max: float
    tail_estimate: float
    fitted_rate: float
    near_diag_value: float
    times: np.ndarray
    peak_series: np.ndarray
    meta: Dict[str, object] = dc_field(default_factory=dict)


def fundamental_solution(p: PolynomialSpec, tau: float, grid: Grid2D,
                         w0: complex, s_max: float,
                         s_min: Optional[float] = None, n_points: int = 64,
                         dt: Optional[float] = None, rel_dt: float = 0.02,
                         box: Optional[DiscreteBox] = None
                         ) -> FundamentalSolutionField:
    """Accumulate G = int_0^{s_max} H(s, ., w0) ds over a log-spaced schedule.

    For tau > 0 the horizon must satisfy s_max >= 10 mu(w0, 1/tau)^2 so the
    integrand has entered its exponential-decay regime; the truncated tail
    (estimated as last peak / fitted rate) must stay below 5% of the
    near-diagonal value of G, else TailNotNegligibleError.  tau = 0 runs
    are allowed in oracle mode and fail exactly that tail check, since the
    free kernel decays only algebraically.
    """
    if n_points < 60:
        raise ValueError(f"log schedule needs >= 60 points, got {n_points}")
    mu0 = None
    if tau > 0:
        mu0 = mu_fn(p, w0, 1.0 / tau)
        if s_max < 10.0 * mu0**2 * (1 - 1e-12):
            raise ScheduleTooShortError(
                f"s_max = {s_max:g} below 10 mu(w0, 1/tau)^2 = {10 * mu0**2:g}"
            )
    if s_min is None:
        s_min = max((3.0 * grid.h) ** 2 / 8.0, 1e-5 * s_max)
    sched = np.geomspace(s_min, s_max, n_points)
    min_gap = np.diff(np.concatenate([[0.0], sched])).min()
    if dt is None:
        dt = min(s_min / (2.0 * BURN_IN_STEPS), min_gap / 10.0)
    sched = _validate_schedule(sched, dt)

    if box is None:
        box = assemble_box(p, tau, grid)
    iy, ix = grid.nearest_node(w0)
    src = grid.node_point(iy, ix)
    u0 = np.zeros((grid.n, grid.n), dtype=complex)
    u0[iy, ix] = 1.0 / grid.h**2

    stats: Dict[str, float] = {}
    G = np.zeros((grid.n, grid.n), dtype=complex)
    peaks = []
    prev_s, prev_u = 0.0, None
    inner = slice(1, -1)
    for s, u in _step_through(box, u0.ravel(), sched, dt, rel_dt, stats):
        u2 = u.reshape(grid.n, grid.n)
        if prev_u is not None:
            G += 0.5 * (s - prev_s) * (u2 + prev_u)
        peaks.append(np.abs(u2[inner, inner]).max())
        prev_s, prev_u = s, u2.copy()
    peaks = np.asarray(peaks)

    # exponential tail fit over the last decade of the schedule
    tail_mask = sched >= s_max / 10.0
    if tail_mask.sum() < 5:
        raise ScheduleTooShortError("fewer than 5 schedule points in the last decade")
    slope = np.polyfit(sched[tail_mask], np.log(np.maximum(peaks[tail_mask], 1e-300)), 1)[0]
    rate = -float(slope)
    tail = float(peaks[-1] / rate) if rate > 1e-12 else np.inf

    Gf = ComplexField(grid, G)
    ref_r = (mu0 / 2.0) if mu0 is not None else 4.0 * grid.h
    near = ring_mean(Gf, src, max(ref_r, 2.0 * grid.h))
    meta = {"dt": dt, "rel_dt": rel_dt, "solver": dict(stats), "tau": tau,
            "poly": poly_id(p), "grid": {"L": grid.L, "n": grid.n},
            "s_min": s_min, "n_points": n_points, "mu0": mu0}
    if not np.isfinite(tail) or tail > 0.05 * near:
        raise TailNotNegligibleError(
            f"truncated tail estimate {tail:g} exceeds 5% of the "
            f"near-diagonal value {near:g} (fitted rate {rate:g})"
        )
    return FundamentalSolutionField(field=Gf, source=src, s_max=s_max,
                                    tail_estimate=tail, fitted_rate=rate,
                                    near_diag_value=near, times=sched,
                                    peak_series=peaks, meta=meta)
