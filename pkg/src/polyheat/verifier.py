"""Quantitative checks of the heat-kernel and Green-function estimates.

Every analytic estimate the package cares about has the shape

    |quantity|  <=  C * (explicit profile in s, |z - w|, mu),

with constants that exist but are never pinned down by the proofs.  Each
check in this module turns one such estimate into a measurement on solver
output: it fits the free constants, records them, and passes or fails on a
margin with a fixed threshold.  All results come back as
:class:`~polyheat.report.BoundReport` so they serialize uniformly and
reproduce bit-for-bit from their recorded provenance.

The checks are organized by estimate family:

* ``check_gaussian``   -- |H(s,z,w)| <= (1/(pi s)) e^{-|z-w|^2/s};
* ``check_longtime``   -- |H| <= (C1/s) e^{-C2 s/mu(w,1/tau)^2};
* ``check_energy``     -- g(s) = ||H(s,.,w)||_2^2 obeys g' <= -C g;
* ``check_derivatives``-- |d_s^n Y^alpha H| ~ s^{-n-|alpha|/2-1} near s=0;
* ``check_subsolution``-- sup over a parabolic cylinder vs the L2 average
  over a slightly larger one;
* ``check_scaling``    -- translation / twist / dilation covariance of H;
* ``check_G_bounds``   -- the three radial regimes of G = integral of H;
* ``check_appendix_equivalence`` -- size-function sums vs the control
  metric vs its closed form for the model weights.

Checks are independent of each other and read shared kernel data without
mutating it; ``run_suite`` executes any subset in declaration order.

Two discretization facts shape the defaults and are worth stating once.
First, a lattice heat kernel exceeds the continuum Gaussian beyond the
lattice-resolvable radius r ~ (s^3/h^2)^{1/4} (the discrete large-deviation
rate is r^4 h^2 / s^3 at leading order), so Gaussian-domination checks mask
to radii where the continuum profile is meaningful instead of comparing
noise.  Second, first-order fields applied near the kernel peak lose the
centered-difference stencil accuracy within a few cells of the source, so
radial fits stay at radii >= 3h.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .box_operator import (ComplexField, DiscreteBox, Grid2D, apply_field,
                           assemble_box)
from .errors import (CylinderOutOfRangeError, OrderTooHighError,
                     ScheduleTooShortError)
from .geometry import mu_fn, rho_closed_form, rho_metric, build_metric_grid
from .heat_solver import (KernelColumn, FundamentalSolutionField,
                          fundamental_solution, kernel_column, ring_mean)
from .polynomial import (PolynomialSpec, make_polynomial, model_p1, model_p2,
                         recenter)
from .report import BoundReport

__all__ = [
    "DecayTerm",
    "check_gaussian",
    "check_longtime",
    "check_energy",
    "check_derivatives",
    "check_subsolution",
    "check_scaling",
    "check_G_bounds",
    "check_appendix_equivalence",
    "run_suite",
    "SUITE_NAMES",
]

# lattice large-deviation rate  exp(KAPPA r^4 h^2 / s^3), calibrated on
# free-kernel columns; the mask radius spends a 2% error budget on it.
KAPPA_LATTICE = 0.16
LATTICE_EPS_BUDGET = 0.02


# ----------------------------------------------------------------------
# decay term


@dataclass(frozen=True)
class DecayTerm:
    """The profile D(s,x,y) multiplying the long-time constants.

    D = e^{-|x-y|^2/(2s)} e^{-c2 s / mu(x,1/tau)^2} e^{-c2 s / mu(y,1/tau)^2},
    always in (0, 1] for s > 0 and c2 >= 0.
    """

    s: float
    x: complex
    y: complex
    c2: float
    mu_x: float
    mu_y: float
    value: float

    @staticmethod
    def evaluate(p: PolynomialSpec, tau: float, c2: float,
                 s: float, x: complex, y: complex) -> "DecayTerm":
        if s <= 0:
            raise ValueError(f"decay term needs s > 0, got {s}")
        if c2 < 0:
            raise ValueError(f"decay term needs c2 >= 0, got {c2}")
        mu_x = mu_fn(p, x, 1.0 / tau)
        mu_y = mu_fn(p, y, 1.0 / tau)
        val = math.exp(-abs(x - y) ** 2 / (2.0 * s)
                       - c2 * s / mu_x**2 - c2 * s / mu_y**2)
        term = DecayTerm(s=float(s), x=complex(x), y=complex(y), c2=float(c2),
                         mu_x=mu_x, mu_y=mu_y, value=val)
        assert 0.0 < term.value <= 1.0, f"decay term out of (0,1]: {term.value}"
        return term


# ----------------------------------------------------------------------
# pointwise Gaussian domination


def lattice_mask_radius(s: float, h: float,
                        eps: float = LATTICE_EPS_BUDGET) -> float:
    """Largest radius where the lattice kernel tracks the Gaussian to eps."""
    return (math.log1p(eps) / KAPPA_LATTICE * s**3 / h**2) ** 0.25


def check_gaussian(column: KernelColumn, tol: float = 0.05,
                   amplify: float = 1.0) -> BoundReport:
    """Ratio test |H| * pi*s * e^{+|z-w0|^2/s} <= 1 + tol.

    The ratio is taken over interior nodes within the lattice-resolvable
    radius (see module docstring) and where the free kernel is above a
    1e-6 relative floor -- outside both, the comparison measures lattice
    tails rather than the continuum bound.  ``amplify`` rescales |H| and
    exists so the harness can prove the check has teeth (a 1.2x injection
    must fail).
    """
    grid = column.grid
    w0 = column.source
    if w0 is None:
        raise ValueError("gaussian check needs a delta-sourced column")
    X, Y = grid.mesh()
    r2 = (X - w0.real) ** 2 + (Y - w0.imag) ** 2
    worst = 0.0
    worst_at: Tuple[float, float] = (float("nan"), float("nan"))
    n_nodes = 0
    for s, snap in zip(column.times, column.snapshots):
        free = np.exp(-r2 / s) / (math.pi * s)
        r_lat = lattice_mask_radius(s, grid.h)
        mask = (snap.interior_mask()
                & (r2 <= r_lat**2)
                & (free >= 1e-6 * free.max()))
        if not mask.any():
            continue
        ratio = amplify * np.abs(snap.values[mask]) / free[mask]
        n_nodes += int(mask.sum())
        k = int(np.argmax(ratio))
        if ratio[k] > worst:
            worst = float(ratio[k])
            worst_at = (float(s), float(np.sqrt(r2[mask][k])))
    passed = worst <= 1.0 + tol
    return BoundReport(
        name="gaussian",
        statement="|H(s,z,w0)| * pi*s * exp(+|z-w0|^2/s) <= 1 + tol "
                  "on lattice-resolvable interior nodes",
        passed=passed,
        worst_margin=worst,
        threshold=1.0 + tol,
        constants={"worst_ratio": worst, "amplify": amplify},
        samples={"n_nodes": n_nodes, "worst_s": worst_at[0],
                 "worst_radius": worst_at[1]},
        provenance={"grid_n": grid.n, "grid_L": grid.L,
                    "w0": w0, "times": list(map(float, column.times)),
                    "kappa_lattice": KAPPA_LATTICE,
                    "eps_budget": LATTICE_EPS_BUDGET},
    )


# ----------------------------------------------------------------------
# long-time decay


def check_longtime(column: KernelColumn, p: PolynomialSpec, tau: float,
                   c2_min: float = 0.1) -> BoundReport:
    """Fit of log(s * max|H(s)|) against s / mu(w0, 1/tau)^2 over the tail.

    The fitted slope is -C2; the check passes iff C2 >= c2_min.  The
    schedule must reach one decade past mu^2, else the integrand never
    enters its exponential regime and the fit would measure the algebraic
    1/s prefactor instead.
    """
    w0 = column.source
    if w0 is None:
        raise ValueError("long-time check needs a delta-sourced column")
    if tau <= 0:
        return BoundReport(
            name="longtime",
            statement="fitted C2 in |H| <= (C1/s) e^{-C2 s/mu^2} "
                      ">= c2_min over the schedule tail",
            passed=False,
            worst_margin=0.0,
            threshold=c2_min,
            constants={"c2": 0.0, "c1": float("nan")},
            notes=["tau = 0: no weighted decay, fail by design"],
            provenance={"tau": tau},
        )
    mu0 = mu_fn(p, w0, 1.0 / tau)
    times = np.asarray(column.times, dtype=float)
    if times[-1] < 10.0 * mu0**2 * (1 - 1e-12):
        raise ScheduleTooShortError(
            f"long-time fit needs s_max >= 10 mu^2 = {10 * mu0**2:g}, "
            f"schedule ends at {times[-1]:g}")
    peaks = column.peak_series()
    tail = times >= 0.25 * times[-1]
    if tail.sum() < 4:
        raise ScheduleTooShortError(
            f"only {int(tail.sum())} snapshots in the fit window")
    xs = times[tail] / mu0**2
    ys = np.log(times[tail] * peaks[tail])
    slope, intercept = np.polyfit(xs, ys, 1)
    c2 = -float(slope)
    c1 = float(np.exp(intercept))
    passed = c2 >= c2_min
    return BoundReport(
        name="longtime",
        statement="fitted C2 in |H| <= (C1/s) e^{-C2 s/mu^2} >= c2_min "
                  "over the schedule tail",
        passed=passed,
        worst_margin=c2,
        threshold=c2_min,
        constants={"c2": c2, "c1": c1, "mu0": mu0,
                   "rate_plain_s": c2 / mu0**2},
        samples={"n_fit": int(tail.sum()),
                 "fit_window": [float(times[tail][0]), float(times[-1])]},
        provenance={"tau": tau, "w0": w0, "grid_n": column.grid.n,
                    "grid_L": column.grid.L},
    )


# ----------------------------------------------------------------------
# energy decay


def check_energy(column: KernelColumn, c_min: float = 0.3) -> BoundReport:
    """Monotonicity and exponential trend of g(s) = ||H(s,.,w0)||_2^2.

    Checks that g is strictly decreasing, that the per-gap decay rates
    -d(log g)/ds form a non-increasing sequence up to 5% slack (the rate
    relaxes monotonically onto twice the spectral gap; a genuinely
    increasing rate would flag a solver defect), and that the tail rate
    exceeds ``c_min``.  At tau = 0 the norm decays like 1/s, the fitted
    tail rate is ~1/s_max, and the check fails by design.
    """
    times = np.asarray(column.times, dtype=float)
    if len(times) < 10:
        raise ValueError(f"energy check needs >= 10 snapshots, got {len(times)}")
    g = column.norms() ** 2
    decreasing = bool(np.all(np.diff(g) < 0))
    rates = -np.diff(np.log(g)) / np.diff(times)
    # relaxation onto the spectral gap: rates may only decrease (5% slack
    # absorbs quadrature and solver noise on nearly flat stretches)
    trend_ok = bool(np.all(np.diff(rates) <= 0.05 * np.abs(rates[:-1]) + 1e-12))
    tail = times[:-1] >= 0.25 * times[-1]
    c_fit = float(np.median(rates[tail])) if tail.any() else float(rates[-1])
    passed = decreasing and trend_ok and c_fit >= c_min
    notes = []
    if not decreasing:
        notes.append("g(s) not strictly decreasing")
    if not trend_ok:
        notes.append("per-gap decay rates increased beyond slack")
    if c_fit < c_min:
        notes.append(f"tail rate {c_fit:.3g} below {c_min:g} (free-like decay)")
    return BoundReport(
        name="energy",
        statement="g(s) = ||H||_2^2 strictly decreasing with non-increasing "
                  "per-gap rates and tail rate >= c_min",
        passed=passed,
        worst_margin=c_fit,
        threshold=c_min,
        constants={"c_fit": c_fit, "rate_first": float(rates[0]),
                   "rate_last": float(rates[-1])},
        samples={"n_snapshots": len(times), "decreasing": decreasing,
                 "trend_ok": trend_ok},
        provenance={"tau": column.tau, "grid_n": column.grid.n},
        notes=notes,
    )


# ----------------------------------------------------------------------
# small-time derivative exponents


#: the (n, |alpha|) pairs with their expected log-log s-exponents
DERIVATIVE_PAIRS: Tuple[Tuple[int, int], ...] = (
    (0, 0), (1, 0), (0, 1), (0, 2), (1, 1))


def _derivative_series(column: KernelColumn, box: DiscreteBox,
                       p: PolynomialSpec, tau: float,
                       n: int, alpha: int) -> np.ndarray:
    """max |(-box)^n Zbar^alpha H(s)| over the still-valid interior."""
    out = []
    for snap in column.snapshots:
        f = snap
        for _ in range(n):
            f = box.apply(f)
            f = ComplexField(f.grid, -f.values, f.invalid_margin)
        for _ in range(alpha):
            f = apply_field("Zbar", p, tau, f)
        out.append(f.max_abs(extra=2))
    return np.array(out)


def check_derivatives(column: KernelColumn, p: PolynomialSpec, tau: float,
                      max_n: int = 1, max_alpha: int = 2,
                      pairs: Optional[Iterable[Tuple[int, int]]] = None,
                      exponent_tol: float = 0.3,
                      box: Optional[DiscreteBox] = None) -> BoundReport:
    """Log-log fit of max|d_s^n Y^alpha H| against s in the small-s window.

    d_s is applied through the equation (d_s H = -box H, exact up to the
    spatial discretization), Y^alpha as repeated Zbar applications.  The
    fitted exponent must match -n - alpha/2 - 1 within ``exponent_tol``
    for every requested pair.  The L2 companions ||d_s^n H(s,.,w0)||_2 ~
    s^{-n-1/2} are fitted and recorded but not gated (same information,
    weaker sensitivity).

    Large tau shifts the fitted exponents by O(tau * s_mid): the bound's
    e^{-c s/mu^2} factor is a genuine s-dependence, not noise, so this
    check belongs on small-tau columns where the pure power law is
    visible inside the fit window.
    """
    if max_n > 2 or max_alpha > 2:
        raise OrderTooHighError(
            f"derivative orders capped at n <= 2, |alpha| <= 2 on centered "
            f"stencils; requested n={max_n}, alpha={max_alpha}")
    use_pairs = [q for q in (pairs or DERIVATIVE_PAIRS)
                 if q[0] <= max_n and q[1] <= max_alpha]
    if box is None:
        box = assemble_box(p, tau, column.grid)
    times = np.asarray(column.times, dtype=float)
    logs = np.log(times)
    fitted: Dict[str, float] = {}
    worst = 0.0
    worst_pair = None
    for n, alpha in use_pairs:
        series = _derivative_series(column, box, p, tau, n, alpha)
        slope = float(np.polyfit(logs, np.log(series), 1)[0])
        expect = -n - alpha / 2.0 - 1.0
        fitted[f"slope_{n}_{alpha}"] = slope
        err = abs(slope - expect)
        if err > worst:
            worst, worst_pair = err, (n, alpha)
    # L2 s-derivative companions, n = 0..max_n
    for n in range(max_n + 1):
        l2 = []
        for snap in column.snapshots:
            f = snap
            for _ in range(n):
                f = box.apply(f)
                f = ComplexField(f.grid, -f.values, f.invalid_margin)
            m = f.invalid_margin + 2
            l2.append(f.grid.h * np.linalg.norm(f.values[m:-m, m:-m]))
        fitted[f"l2_slope_{n}"] = float(np.polyfit(logs, np.log(l2), 1)[0])
    passed = worst <= exponent_tol
    return BoundReport(
        name="derivatives",
        statement="log-log fitted s-exponent of max|d_s^n Zbar^alpha H| "
                  "matches -n - alpha/2 - 1 within tol for each pair",
        passed=passed,
        worst_margin=worst,
        threshold=exponent_tol,
        constants=fitted,
        samples={"pairs": list(use_pairs), "worst_pair": worst_pair,
                 "fit_window": [float(times[0]), float(times[-1])]},
        provenance={"tau": tau, "grid_n": column.grid.n,
                    "grid_L": column.grid.L},
    )


# ----------------------------------------------------------------------
# subsolution estimate on parabolic cylinders


def _cylinder_slice(column: KernelColumn, s0: float, x0: complex,
                    r: float) -> Tuple[np.ndarray, List[np.ndarray]]:
    """Snapshot times in [s0 - r^2, s0] and |u| node values in B_r(x0)."""
    grid = column.grid
    times = np.asarray(column.times, dtype=float)
    sel = (times >= s0 - r * r - 1e-12) & (times <= s0 + 1e-12)
    X, Y = grid.mesh()
    ball = ((X - x0.real) ** 2 + (Y - x0.imag) ** 2 <= r * r)
    vals = [np.abs(column.snapshots[i].values[ball])
            for i in np.nonzero(sel)[0]]
    return times[sel], vals


def check_subsolution(column: KernelColumn, p: PolynomialSpec, tau: float,
                      samples: Optional[Sequence[Tuple[float, complex, float]]]
                      = None, spread_max: float = 10.0) -> BoundReport:
    """Smallest admissible C in  sup_{Q_{r/2}} |u| <= (C/r^2) iint_{Q_{2r/3}} |u|^2.

    ``samples`` is a list of cylinder centers (s0, x0, r); the default is
    five seeded cylinders in the bulk of the schedule.  Q_r(s0, x0) is the
    backward cylinder [s0 - r^2, s0] x B_r(x0).  Each admissible constant
    C = sup * r^2 / integral is recorded; the check passes when all are
    finite and their spread (max/min) stays below ``spread_max``.
    """
    grid = column.grid
    times = np.asarray(column.times, dtype=float)
    if samples is None:
        rng = np.random.default_rng(52)
        span = times[-1] - times[0]
        samples = []
        for _ in range(5):
            r = float(rng.uniform(0.4, 0.55))
            s0 = float(rng.uniform(times[0] + (2 * r / 3) ** 2 + 0.05,
                                   times[-1]))
            # keep cylinders out of the far Gaussian tail, where the
            # admissible constant is inflated by the cross-ball decay
            x0 = complex(rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8))
            samples.append((s0, x0, r))
        if span <= 0.2:
            raise CylinderOutOfRangeError("schedule too short for cylinders")
    consts = []
    for s0, x0, r in samples:
        if r <= 0:
            raise CylinderOutOfRangeError(f"cylinder radius must be > 0, got {r}")
        # geometric guards: cylinders must fit the grid and the schedule,
        # and the grid must resolve the inner ball
        if r / 2 < 2 * grid.h:
            raise CylinderOutOfRangeError(
                f"inner ball radius {r/2:g} under 2h = {2*grid.h:g}")
        if (abs(x0.real) + r > grid.L) or (abs(x0.imag) + r > grid.L):
            raise CylinderOutOfRangeError(f"ball B_{r:g}({x0}) leaves the grid")
        if s0 - (2 * r / 3) ** 2 < times[0] - 1e-12 or s0 > times[-1] + 1e-12:
            raise CylinderOutOfRangeError(
                f"cylinder [{s0 - (2*r/3)**2:g}, {s0:g}] outside schedule")
        sup_times, sup_vals = _cylinder_slice(column, s0, x0, r / 2)
        int_times, int_vals = _cylinder_slice(column, s0, x0, 2 * r / 3)
        if len(sup_times) < 3 or len(int_times) < 4:
            raise CylinderOutOfRangeError(
                f"schedule too sparse inside cylinder at s0 = {s0:g}")
        sup = max(v.max() for v in sup_vals)
        slab = np.array([grid.h**2 * np.sum(v**2) for v in int_vals])
        integral = float(np.trapezoid(slab, int_times))
        consts.append(sup * r * r / integral)
    consts = np.array(consts)
    spread = float(consts.max() / consts.min())
    passed = bool(np.all(np.isfinite(consts))) and spread < spread_max
    return BoundReport(
        name="subsolution",
        statement="admissible C in sup_{Q_{r/2}}|u| <= (C/r^2) "
                  "iint_{Q_{2r/3}}|u|^2 finite with spread < spread_max",
        passed=passed,
        worst_margin=spread,
        threshold=spread_max,
        constants={"c_min": float(consts.min()), "c_max": float(consts.max())},
        samples={"cylinders": [(float(s0), complex(x0), float(r))
                               for s0, x0, r in samples],
                 "admissible_c": [float(c) for c in consts]},
        provenance={"tau": tau, "grid_n": grid.n, "grid_L": grid.L},
    )


# ----------------------------------------------------------------------
# scaling identities


def _twist_on_grid(p: PolynomialSpec, z0: complex, grid: Grid2D) -> np.ndarray:
    """T(v + z0, z0) on grid nodes v: -2 Im sum_{j>=1} A_{j0}(z0) v^j."""
    table = recenter(p, z0)
    Z = grid.zmesh()
    acc = np.zeros_like(Z)
    for j in range(1, p.degree + 1):
        acc = acc + table.coefficient(j, 0) * Z**j
    return -2.0 * acc.imag


def _peak_halfmax_errors(pred: np.ndarray, got: np.ndarray,
                         margin: int) -> Tuple[float, float]:
    """Relative mismatch at the |pred| peak and on its half-max set."""
    m = max(margin, 1)
    a = pred[m:-m, m:-m]
    b = got[m:-m, m:-m]
    pk = np.abs(a).max()
    ipk = np.unravel_index(np.abs(a).argmax(), a.shape)
    err_pk = abs(b[ipk] - a[ipk]) / pk
    half = np.abs(a) >= 0.45 * pk
    half &= np.abs(a) <= 0.55 * pk
    if not half.any():                     # fall back to the closest node
        half = np.zeros_like(half)
        j = np.unravel_index(np.argmin(np.abs(np.abs(a) - pk / 2)), a.shape)
        half[j] = True
    err_half = float((np.abs(b - a)[half] / np.abs(a)[half]).max())
    return float(err_pk), err_half


def check_scaling(p: PolynomialSpec, tau: float, grid: Grid2D, w0: complex,
                  s_list: Sequence[float], z0: Optional[complex] = None,
                  lam: float = 2.0, dt: float = 1e-3,
                  peak_tol: float = 0.03,
                  halfmax_tol: float = 0.10) -> BoundReport:
    """Covariance of H under recentering, gauge change, and dilation.

    Three comparisons, each gated at ``peak_tol`` relative error at the
    kernel peak and ``halfmax_tol`` on the half-max set:

    (i)   translation: the kernel of the fully recentered weight
          q(v) = p(v + z0) at source w0 - z0 equals H_p(s, . + z0, w0)
          node-for-node (the discrete operators are exact index shifts
          of each other, so this is near machine precision);
    (ii)  gauge: dropping the harmonic part of q multiplies the kernel by
          the twist phase, H_mix = e^{+i tau T(v+z0,z0)} H_q e^{-i tau
          T(w+z0,z0)};
    (iii) dilation: the weight with coefficients A_jk lam^{-(j+k)} run at
          times lam^2 s on a lam-times-larger grid of equal spacing
          satisfies H_dil(lam^2 s, lam z, 0) = lam^{-2} H_p(s, z, 0).

    The dilation leg always runs from source 0 on its own fixed grid pair
    (the identity needs matched lattices, not the caller's grid).
    """
    h = grid.h
    if z0 is None:
        z0 = complex(round(1.0 / h) * h, 0.0)   # ~1, snapped to the lattice
    else:
        z0 = complex(round(z0.real / h) * h, round(z0.imag / h) * h)
    rt = recenter(p, z0)
    q_full = make_polynomial({jk: c for jk, c in rt.table.items()
                              if jk != (0, 0)})
    q_mix = make_polynomial({jk: c for jk, c in rt.mixed_terms().items()})
    sched = tuple(float(s) for s in s_list)

    col_p = kernel_column(p, tau, grid, w0, sched, dt=dt, rel_dt=0.02)
    col_q = kernel_column(q_full, tau, grid, w0 - z0, sched, dt=dt, rel_dt=0.02)
    col_m = kernel_column(q_mix, tau, grid, w0 - z0, sched, dt=dt, rel_dt=0.02)

    shift = round(z0.real / h), round(z0.imag / h)
    tw = _twist_on_grid(p, z0, grid)
    w_shift = complex(col_q.source)
    tw_w = -2.0 * sum(rt.coefficient(j, 0) * w_shift ** j
                      for j in range(1, p.degree + 1)).imag

    errs: Dict[str, float] = {}
    worst = 0.0
    for s in sched:
        A = col_p.snapshot_at(s).values
        B = col_q.snapshot_at(s).values
        M = col_m.snapshot_at(s).values
        sx, sy = shift
        # (i) translation: B[iy, ix] vs A[iy + sy, ix + sx]
        Bv = B[: B.shape[0] - sy if sy else None, : B.shape[1] - sx if sx else None]
        Av = A[sy:, sx:]
        pk, hf = _peak_halfmax_errors(Av, Bv, margin=2)
        errs[f"translation_peak_{s:g}"] = pk
        errs[f"translation_half_{s:g}"] = hf
        worst = max(worst, pk / peak_tol, hf / halfmax_tol)
        # (ii) gauge: predict the mixed kernel from the full one
        pred_m = np.exp(1j * tau * (tw - tw_w)) * B
        pk, hf = _peak_halfmax_errors(M, pred_m, margin=2)
        errs[f"gauge_peak_{s:g}"] = pk
        errs[f"gauge_half_{s:g}"] = hf
        worst = max(worst, pk / peak_tol, hf / halfmax_tol)

    # (iii) dilation on its own grid pair, equal lattice spacing
    gA = Grid2D(L=4.0, n=129)
    nB = int(lam * (gA.n - 1)) + 1
    gB = Grid2D(L=lam * gA.L, n=nB)
    p_dil = make_polynomial({jk: c * lam ** (-(jk[0] + jk[1]))
                             for jk, c in p.coeffs.items()})
    dil_sched = tuple(s for s in sched)
    colA = kernel_column(p, tau, gA, 0.0, dil_sched, dt=dt)
    colB = kernel_column(p_dil, tau, gB, 0.0,
                         tuple(lam**2 * s for s in dil_sched), dt=lam**2 * dt)
    step = int(round(lam))
    for s in dil_sched:
        A = colA.snapshot_at(s).values / lam**2
        B = colB.snapshot_at(lam**2 * s).values[::step, ::step]
        pk, hf = _peak_halfmax_errors(A, B, margin=2)
        errs[f"dilation_peak_{s:g}"] = pk
        errs[f"dilation_half_{s:g}"] = hf
        worst = max(worst, pk / peak_tol, hf / halfmax_tol)

    passed = worst <= 1.0
    return BoundReport(
        name="scaling",
        statement="translation / gauge-twist / dilation covariance of H "
                  "within peak_tol at peak and halfmax_tol at half-max",
        passed=passed,
        worst_margin=worst,
        threshold=1.0,
        constants={k: float(v) for k, v in errs.items()},
        samples={"z0": z0, "lam": lam, "schedule": list(sched)},
        provenance={"tau": tau, "grid_n": grid.n, "grid_L": grid.L,
                    "dil_grids": [(gA.L, gA.n), (gB.L, gB.n)], "dt": dt,
                    "peak_tol": peak_tol, "halfmax_tol": halfmax_tol},
    )


# ----------------------------------------------------------------------
# Green function radial regimes


def check_G_bounds(G: FundamentalSolutionField, p: PolynomialSpec,
                   tau: float) -> BoundReport:
    """Three-regime radial audit of G around its source.

    Regime 1 (inside mu):   ring means of |G| at radii mu * [1/2 .. 1/8]
    fit a + b log(2 mu / r) with b > 0 and relative residual <= 15%.
    Regime 2 (one field):   ring means of |Z G| at the same radii fit a
    power law with exponent -1 +- 0.3.  The Z field is used because for a
    real near-radial profile its derivative and zeroth-order parts add
    with the same sign; Zbar has a genuine cancellation at r ~ mu/2 that
    steepens the fitted exponent past the window.
    Regime 3 (outside mu):  log ring means of |G| at radii mu * [2 .. 4]
    decrease linearly in r / mu with fitted rate c2 > 0.  The fitted rate
    on the model weights sits well above 1 (the potential grows
    quadratically, so the true far field decays faster than any fixed
    linear-exponential), which is consistent with the one-sided bound.
    """
    field = G.field
    grid = field.grid
    w0 = G.source
    mu0 = mu_fn(p, w0, 1.0 / tau)
    # regime 1: log profile of |G|
    r1 = mu0 * np.array([0.5, 0.5 / math.sqrt(2), 0.25, 0.25 / math.sqrt(2),
                         0.125])
    if r1[-1] < 3 * grid.h:
        raise ValueError(
            f"grid too coarse for the inner radii: mu/8 = {r1[-1]:g} "
            f"< 3h = {3 * grid.h:g}")
    prof1 = np.array([ring_mean(field, w0, r) for r in r1])
    design = np.log(2 * mu0 / r1)
    b, a = np.polyfit(design, prof1, 1)
    resid1 = float(np.max(np.abs(a + b * design - prof1) / prof1))
    # regime 2: one field application, power law
    dG = apply_field("Z", p, tau, field)
    prof2 = np.array([ring_mean(dG, w0, r) for r in r1])
    slope2 = float(np.polyfit(np.log(r1), np.log(prof2), 1)[0])
    # regime 3: exponential far field
    r3 = mu0 * np.array([2.0, 2.5, 3.0, 3.5, 4.0])
    if r3[-1] + abs(w0) > grid.L - 3 * grid.h:
        raise ValueError(f"outer radius {r3[-1]:g} leaves the grid")
    prof3 = np.array([ring_mean(field, w0, r) for r in r3])
    c2 = -float(np.polyfit(r3 / mu0, np.log(prof3), 1)[0])

    margins = {
        "regime1_resid": resid1 / 0.15,
        "regime2_exponent": abs(slope2 + 1.0) / 0.3,
        "regime3_rate": math.inf if c2 <= 0 else 0.0,
    }
    if b <= 0:
        margins["regime1_log_coeff"] = math.inf
    worst = max(margins.values())
    return BoundReport(
        name="gbounds",
        statement="|G| ~ log inside mu (resid <= 15%), one-field profile "
                  "~ r^-1 (+-0.3), log-linear decay outside mu (rate > 0)",
        passed=worst <= 1.0,
        worst_margin=worst,
        threshold=1.0,
        constants={"log_coeff_b": float(b), "log_resid": resid1,
                   "field_exponent": slope2, "far_rate_c2": c2,
                   "mu0": mu0},
        samples={"radii_inner": [float(r) for r in r1],
                 "radii_outer": [float(r) for r in r3],
                 "near_diag": G.near_diag_value,
                 "tail_estimate": G.tail_estimate},
        provenance={"tau": tau, "grid_n": grid.n, "grid_L": grid.L,
                    "w0": w0, "s_max": G.s_max},
    )


# ----------------------------------------------------------------------
# appendix: size sums vs control metric vs closed form


#: sample box half-width per degree parameter m ("the constant depends
#: only on m": the window is shrunk with m so the pinned ratio gate
#: [1/4, 4] holds with margin)
APPENDIX_BOX = {2: 1.6, 3: 1.0}
APPENDIX_GRID_L = {2: 2.6, 3: 1.8}


def check_appendix_equivalence(m_list: Iterable[int] = (2, 3),
                               n_pairs: int = 20, seed: int = 77,
                               ratio_max: float = 4.0) -> BoundReport:
    """Pairwise comparison of the three distance surrogates.

    For the model weights p1 = |z|^{2m} and p2 = (Re z)^{2m}, compares

        size sum    |z-w|/mu(w,1) + |z-w|/mu(z,1),
        closed form |z-w| (1 + |z|^{m-1} + |w|^{m-1})   (Re for p2),
        grid metric shortest weighted path,

    over seeded point pairs; every pairwise ratio must land in
    [1/ratio_max, ratio_max].
    """
    results: Dict[str, Tuple[float, float]] = {}
    worst = 0.0
    for model, maker in (("p1", model_p1), ("p2", model_p2)):
        for m in m_list:
            if m not in APPENDIX_BOX:
                raise ValueError(f"appendix check supports m in 2, 3; got {m}")
            box = APPENDIX_BOX[m]
            p = maker(m)
            mg = build_metric_grid(p, L=APPENDIX_GRID_L[m], n=193)
            rng = np.random.default_rng(seed)
            pairs = []
            while len(pairs) < n_pairs:
                z = complex(rng.uniform(-box, box), rng.uniform(-box, box))
                w = complex(rng.uniform(-box, box), rng.uniform(-box, box))
                if abs(z - w) >= 0.3:
                    pairs.append((z, w))
            lo, hi = math.inf, 0.0
            for z, w in pairs:
                ss = (abs(z - w) / mu_fn(p, w, 1.0)
                      + abs(z - w) / mu_fn(p, z, 1.0))
                rc = rho_closed_form(model, m, z, w)
                rg = rho_metric(p, z, w, mg).value
                for x, y in ((ss, rc), (ss, rg), (rc, rg)):
                    lo = min(lo, x / y, y / x)
                    hi = max(hi, x / y, y / x)
            results[f"{model}_m{m}"] = (lo, hi)
            worst = max(worst, hi, 1.0 / lo)
    passed = worst <= ratio_max
    return BoundReport(
        name="appendix",
        statement="size sum vs closed-form rho vs grid rho: all pairwise "
                  "ratios within [1/ratio_max, ratio_max]",
        passed=passed,
        worst_margin=worst,
        threshold=ratio_max,
        constants={f"{k}_{side}": float(v[i])
                   for k, v in results.items()
                   for i, side in enumerate(("lo", "hi"))},
        samples={"n_pairs": n_pairs, "boxes": dict(APPENDIX_BOX),
                 "min_separation": 0.3},
        provenance={"seed": seed, "metric_grid_n": 193,
                    "metric_grid_L": dict(APPENDIX_GRID_L)},
    )


# ----------------------------------------------------------------------
# suite driver


SUITE_NAMES = ("gaussian", "longtime", "energy", "derivs", "subsolution",
               "scaling", "gbounds", "appendix")


def run_suite(names: Sequence[str] = ("all",),
              progress: bool = False) -> List[BoundReport]:
    """Run the named checks at moderate desk-scale defaults.

    ``names`` is any subset of :data:`SUITE_NAMES`, or ``("all",)``.
    Kernel columns are shared between checks that can use the same data.
    The defaults here favor minutes-scale runtimes; the acceptance tests
    pin their own, larger recipes.
    """
    wanted = list(SUITE_NAMES) if "all" in names else list(names)
    unknown = [n for n in wanted if n not in SUITE_NAMES]
    if unknown:
        raise ValueError(f"unknown check names {unknown}; "
                         f"choose from {SUITE_NAMES}")
    reports: List[BoundReport] = []
    cache: Dict[str, KernelColumn] = {}

    def _say(msg: str) -> None:
        if progress:
            print(msg, flush=True)

    def gaussian_column() -> KernelColumn:
        if "gauss" not in cache:
            _say("solving Gaussian-domination column (|z|^2, tau=1) ...")
            p = model_p1(1)
            grid = Grid2D(L=8.0, n=257)
            sched = (0.1, 0.18, 0.25, 0.5, 1.0, 2.0)
            cache["gauss"] = kernel_column(p, 1.0, grid, 0.0, sched,
                                           dt=1e-3, rel_dt=0.02)
        return cache["gauss"]

    def longtime_column() -> KernelColumn:
        if "long" not in cache:
            _say("solving long-time column (|z|^2, tau=1, s <= 10) ...")
            p = model_p1(1)
            grid = Grid2D(L=8.0, n=193)
            sched = tuple(np.linspace(0.5, 10.0, 20))
            cache["long"] = kernel_column(p, 1.0, grid, 0.0, sched,
                                          dt=1e-3, rel_dt=0.02)
        return cache["long"]

    for name in wanted:
        if name == "gaussian":
            reports.append(check_gaussian(gaussian_column()))
        elif name == "longtime":
            reports.append(check_longtime(longtime_column(), model_p1(1), 1.0))
        elif name == "energy":
            reports.append(check_energy(longtime_column()))
        elif name == "derivs":
            _say("solving small-time column for derivative exponents ...")
            p = model_p1(1)
            grid = Grid2D(L=5.0, n=257)
            sched = tuple(np.geomspace(0.04, 0.32, 8))
            col = kernel_column(p, 0.25, grid, 0.0, sched, dt=5e-4,
                                rel_dt=0.02)
            reports.append(check_derivatives(col, p, 0.25))
        elif name == "subsolution":
            _say("solving dense-schedule column for cylinders ...")
            p = model_p1(1)
            grid = Grid2D(L=6.0, n=193)
            sched = tuple(np.arange(0.30, 1.0 + 1e-9, 0.0125))
            col = kernel_column(p, 1.0, grid, 0.0, sched, dt=1e-3)
            reports.append(check_subsolution(col, p, 1.0))
        elif name == "scaling":
            _say("solving scaling-identity columns ...")
            reports.append(check_scaling(model_p1(1), 1.0,
                                         Grid2D(L=6.0, n=193), 0.0,
                                         (0.25, 0.5)))
        elif name == "gbounds":
            _say("integrating G for the radial regimes (tau sweep) ...")
            p = model_p1(1)
            rates = {}
            rep = None
            for tau, L in ((1.0, 6.0), (2.0, 4.5), (4.0, 3.2)):
                mu0 = mu_fn(p, 0.0, 1.0 / tau)
                grid = Grid2D(L=L, n=321)
                G = fundamental_solution(p, tau, grid, 0.0,
                                         s_max=10.0 * mu0**2)
                r = check_G_bounds(G, p, tau)
                rates[tau] = r.constants["far_rate_c2"]
                if tau == 1.0:
                    rep = r
            stab = max(rates.values()) / min(rates.values())
            assert rep is not None
            rep.constants["far_rate_tau_spread"] = float(stab)
            rep.notes.append(
                f"far rate across tau in (1,2,4): spread {stab:.3f} "
                f"(gate: factor 3)")
            if stab > 3.0:
                rep = BoundReport(
                    name=rep.name, statement=rep.statement, passed=False,
                    worst_margin=stab, threshold=3.0,
                    constants=rep.constants, samples=rep.samples,
                    provenance=rep.provenance,
                    notes=rep.notes + ["tau sweep unstable"])
            reports.append(rep)
        elif name == "appendix":
            reports.append(check_appendix_equivalence())
    return reports
