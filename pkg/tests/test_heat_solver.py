"""Crank-Nicolson evolution against exact kernels and its own guards."""
import numpy as np
import pytest

from polyheat import (ComplexField, Grid2D, evolve, assemble_box,
                      free_heat_kernel, fundamental_solution, kernel_column,
                      model_p1, ring_mean)
from polyheat.errors import (ScheduleTooShortError, ScheduleUnreachableError,
                             TailNotNegligibleError)


def test_free_kernel_normalization():
    """(1/(pi s)) exp(-|z-w|^2/s) integrates to ~1 on a wide grid."""
    g = Grid2D(L=10.0, n=129)
    vals = free_heat_kernel(0.7, g.zmesh(), 0.3 + 0.1j)
    assert g.h ** 2 * vals.sum() == pytest.approx(1.0, abs=1e-8)
    assert free_heat_kernel(0.5, 0j, 0j) == pytest.approx(2.0 / np.pi)


def test_free_evolution_peak():
    """tau=0 solver peak matches 1/(pi s) within the frozen 2.5% at n=129."""
    col = kernel_column(model_p1(1), 0.0, Grid2D(L=8.0, n=129), 0j,
                        (0.5,), dt=2e-3)
    pk = col.snapshot_at(0.5).max_abs()
    exact = 1.0 / (np.pi * 0.5)
    assert abs(pk - exact) / exact <= 0.025, f"peak rel err {abs(pk-exact)/exact:.4f}"


def test_quadratic_weight_matches_exact_kernel(landau_column, mehler):
    """tau=1 column tracks the exact |z|^2 kernel on the |z| <= 2 disk.

    Frozen gates: 2.5% of peak at the earliest (hardest) time, tightening
    as the discrete delta mollifies; imaginary part stays at stencil noise
    (the exact column is real for this radial weight).
    """
    g = landau_column.grid
    Z = g.zmesh()
    disk = np.abs(Z) <= 2.0
    gates = {0.25: 0.025, 0.5: 0.015, 1.0: 0.01}
    for s, gate in gates.items():
        snap = landau_column.snapshot_at(s)
        ex = mehler(s, Z, 1.0)
        rel = np.abs(snap.values - ex)[disk].max() / ex.max()
        assert rel <= gate, f"s={s}: disk error {rel:.4f} > {gate}"
        assert np.abs(snap.values.imag).max() <= 1e-3 * ex.max(), \
            f"imag = {np.abs(snap.values.imag).max():.2e}"


def test_semigroup_peak_identity(landau_column):
    """H(2s, 0, 0) = h^2 sum_z |H(s, z, 0)|^2 to 5e-4 relative."""
    g = landau_column.grid
    for s in (0.25, 0.5):
        snap = landau_column.snapshot_at(s)
        lhs = g.h ** 2 * np.sum(np.abs(snap.values) ** 2)
        rhs = landau_column.value_at(2 * s, 0j).real
        assert abs(lhs - rhs) / rhs <= 5e-4, \
            f"s={s}: self-convolution {lhs:.6f} vs H(2s) {rhs:.6f}"


def test_column_norms_contract(landau_column):
    """L2 norms decrease strictly along the schedule."""
    norms = landau_column.norms()
    assert np.all(np.diff(norms) < 0), f"norms = {norms}"


def test_column_bookkeeping(landau_column):
    """Snapshot lookup, nearest-node values, and solver stats."""
    assert landau_column.source == 0j
    assert landau_column.meta["w0_snapped"] == 0j
    stats = landau_column.meta["solver"]
    assert stats["steps"] >= 60 and stats["cg_iters_max"] >= 1, f"stats = {stats}"
    snap = landau_column.snapshot_at(0.5)
    iy, ix = landau_column.grid.nearest_node(0.5 + 0.25j)
    assert landau_column.value_at(0.5, 0.5 + 0.25j) == snap.values[iy, ix]
    with pytest.raises(KeyError):
        landau_column.snapshot_at(0.33)


def test_schedule_guards():
    """Unreachable schedules are refused up front."""
    p, g = model_p1(1), Grid2D(L=6.0, n=65)
    with pytest.raises(ScheduleUnreachableError):
        kernel_column(p, 1.0, g, 0j, (0.5, 0.25), dt=1e-3)   # descending
    with pytest.raises(ScheduleUnreachableError):
        kernel_column(p, 1.0, g, 0j, (0.5,), dt=0.2)         # dt > gap/10
    with pytest.raises(ScheduleUnreachableError):
        kernel_column(p, 1.0, g, 0j, (0.01,), dt=1e-3)       # inside burn-in
    with pytest.raises(ScheduleUnreachableError):
        kernel_column(p, 1.0, g, 0j, (), dt=1e-3)            # empty


def test_source_near_boundary_rejected():
    """A delta on the wall cannot seed a kernel column."""
    with pytest.raises(ValueError):
        kernel_column(model_p1(1), 1.0, Grid2D(L=4.0, n=65), 3.99 + 0j, (0.5,),
                      dt=1e-3)


def test_evolve_general_field():
    """evolve accepts any smooth initial field and keeps contracting."""
    g = Grid2D(L=6.0, n=65)
    box = assemble_box(model_p1(1), 1.0, g)
    u0 = ComplexField(g, np.exp(-np.abs(g.zmesh() - 0.5) ** 2))
    col = evolve(box, u0, (0.25, 0.5), dt=2e-3)
    norms = col.norms()
    assert norms[1] < norms[0] < u0.l2_norm()
    with pytest.raises(ValueError):
        evolve(box, np.ones(5, dtype=complex), (0.25,), dt=2e-3)


def test_ring_mean_radial_field(landau_column):
    """ring_mean of |z| at radius 1 lands within half a cell of 1."""
    g = landau_column.grid
    f = ComplexField(g, np.abs(g.zmesh()).astype(complex))
    assert ring_mean(f, 0j, 1.0) == pytest.approx(1.0, abs=0.05)
    with pytest.raises(ValueError):
        ring_mean(f, 0j, 11.0)  # annulus outside the box


def test_fundamental_solution_tau4():
    """Integrated column at tau=4: frozen rate ~ 2 tau, negligible tail."""
    G = fundamental_solution(model_p1(1), 4.0, Grid2D(L=4.0, n=97), 0j,
                             s_max=3.0)
    assert G.fitted_rate == pytest.approx(8.0, abs=0.3), f"rate {G.fitted_rate}"
    assert G.tail_estimate <= 0.05 * G.near_diag_value
    assert G.near_diag_value == pytest.approx(0.2233, abs=0.01)
    assert G.source == 0j


def test_fundamental_solution_horizon_guard():
    """s_max below 10 mu(w0, 1/tau)^2 is refused."""
    with pytest.raises(ScheduleTooShortError):
        fundamental_solution(model_p1(1), 4.0, Grid2D(L=4.0, n=97), 0j,
                             s_max=2.0)


def test_fundamental_solution_tau0_tail_fails():
    """The free kernel has no exponential tail: the audit must trip."""
    with pytest.raises(TailNotNegligibleError):
        fundamental_solution(model_p1(1), 0.0, Grid2D(L=6.0, n=65), 0j,
                             s_max=3.0)
