"""Monte Carlo route: bridge sampling, the phase functional, estimates."""
import numpy as np
import pytest

from polyheat import mc_kernel, model_p1, phase, sample_bridge


def test_tau0_is_exact_free_factor():
    """At tau=0 every path weight is 1: estimate = free factor, stderr = 0."""
    r = mc_kernel(model_p1(1), 0.0, 0.5, 0j, 0.25, n_paths=1000, n_t=64, seed=3)
    exact = np.exp(-0.25 / 0.25) / (np.pi * 0.25)
    assert r.estimate == r.free_factor
    assert r.free_factor == pytest.approx(exact, rel=1e-14)
    assert r.stderr == 0.0


def test_matches_exact_quadratic_kernel(mehler):
    """4000-path estimate lands within 4 stderr of the exact |z|^2 kernel."""
    r = mc_kernel(model_p1(1), 1.0, 0.5, 0j, 0.25, n_paths=4000, n_t=128, seed=11)
    exact = mehler(0.25, 0.5, 1.0)
    assert r.stderr <= 2.5e-3, f"stderr {r.stderr:.2e}"
    assert abs(r.estimate - exact) <= 4 * r.stderr, \
        f"pull = {abs(r.estimate - exact) / r.stderr:.2f}"


def test_deterministic_and_dominated():
    """Same seed gives bit-identical results; modulus never beats the free factor."""
    a = mc_kernel(model_p1(2), 1.0, 0.3 + 0.2j, 0j, 0.5, n_paths=2000, n_t=64, seed=9)
    b = mc_kernel(model_p1(2), 1.0, 0.3 + 0.2j, 0j, 0.5, n_paths=2000, n_t=64, seed=9)
    assert a.estimate == b.estimate and a.stderr == b.stderr
    assert abs(a.estimate) <= a.free_factor * (1 + 1e-12)
    assert a.meta["re_phase_max"] <= 0.0, "some path had Re F > 0"
    assert a.meta["divergence_defect"] <= 1e-6


def test_stderr_scales_as_root_n():
    """log stderr vs log n_paths fits slope -1/2 (frozen -0.495 +- 0.06)."""
    ns = (2000, 8000, 32000)
    errs = [mc_kernel(model_p1(1), 1.0, 0.5, 0j, 0.25,
                      n_paths=n, n_t=128, seed=5).stderr for n in ns]
    slope = np.polyfit(np.log(ns), np.log(errs), 1)[0]
    assert -0.56 <= slope <= -0.44, f"slope {slope:.3f}, stderrs {errs}"


def test_time_refinement_is_converged():
    """Doubling n_t moves the estimate by less than 3 combined stderr."""
    a = mc_kernel(model_p1(1), 1.0, 0.5, 0j, 0.25, n_paths=20000, n_t=128, seed=7)
    b = mc_kernel(model_p1(1), 1.0, 0.5, 0j, 0.25, n_paths=20000, n_t=256, seed=7)
    tol = 3 * np.hypot(a.stderr, b.stderr)
    assert abs(a.estimate - b.estimate) <= tol, \
        f"|diff| = {abs(a.estimate - b.estimate):.2e} > {tol:.2e}"


def test_bridge_endpoints_and_marginal():
    """Bridges pin both endpoints; the midpoint has mean (x+y)/2, var T/4."""
    mids = np.empty((3000, 2))
    for i in range(3000):
        path = sample_bridge(0j, 1.0 + 0j, 1.0, 64, seed=i)
        assert np.allclose(path.nodes[0], [0.0, 0.0], atol=1e-12)
        assert np.allclose(path.nodes[-1], [1.0, 0.0], atol=1e-12)
        mids[i] = path.nodes[32]
    mean, var = mids.mean(axis=0), mids.var(axis=0)
    assert np.allclose(mean, [0.5, 0.0], atol=0.03), f"mid mean {mean}"
    assert np.allclose(var, [0.25, 0.25], atol=0.03), f"mid var {var}"


def test_loop_phase_electric_part_exact():
    """For |z|^2 the electric part is constant: Re F = -2 tau * duration exactly."""
    path = sample_bridge(0j, 0j, 0.5, 128, seed=3)
    F = phase(path, model_p1(1), 1.0)
    assert F.real == pytest.approx(-1.0, abs=1e-12), f"Re F = {F.real}"
    assert F.imag != 0.0  # the line integral of a loop is genuinely random


def test_input_forms_agree():
    """Complex, tuple, and bare-real endpoints give the same result."""
    a = mc_kernel(model_p1(1), 1.0, 0.5, 0.0, 0.25, n_paths=1000, n_t=64, seed=2)
    b = mc_kernel(model_p1(1), 1.0, (0.5, 0.0), (0.0, 0.0), 0.25,
                  n_paths=1000, n_t=64, seed=2)
    assert a.estimate == b.estimate


def test_guards():
    """Path count, time resolution, horizon, and tau sign are enforced."""
    p = model_p1(1)
    with pytest.raises(ValueError):
        mc_kernel(p, 1.0, 0.5, 0j, 0.25, n_paths=100)
    with pytest.raises(ValueError):
        mc_kernel(p, 1.0, 0.5, 0j, 0.25, n_t=32)
    with pytest.raises(ValueError):
        mc_kernel(p, 1.0, 0.5, 0j, -0.25)
    with pytest.raises(ValueError):
        mc_kernel(p, -1.0, 0.5, 0j, 0.25)
    with pytest.raises(ValueError):
        sample_bridge(0j, 1j, 0.0, 64, seed=1)
