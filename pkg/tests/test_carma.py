"""Polynomial helpers, matrix exponential, and state-space simulation."""
import warnings

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.linalg import expm

from slcarma import (CarmaModel, NumericalError, SubordinatorPath,
                     ValidationError, coefficients_from_roots, kernel,
                     matrix_exp, polynomial_roots, simulate_ensemble,
                     simulate_euler, simulate_exact, simulate_subordinator,
                     stability_check)
from slcarma.carma import EulerStabilityWarning
from conftest import GOLDEN_B, GOLDEN_ROOTS, make_golden_spec


def _sorted_roots(z):
    return sorted(np.asarray(z, dtype=complex), key=lambda w: (w.real, w.imag))


# ---------------------------------------------------------------------------
# polynomials

def test_coefficients_from_roots():
    np.testing.assert_allclose(coefficients_from_roots(GOLDEN_ROOTS),
                               [5.0, 9.0, 5.0], atol=1e-12)
    np.testing.assert_allclose(coefficients_from_roots([-1.0, -2.0]),
                               [3.0, 2.0], atol=1e-12)
    np.testing.assert_allclose(coefficients_from_roots([-0.7]), [0.7])
    with pytest.raises(ValidationError):
        coefficients_from_roots([complex(-2.0, 1.0), -1.0])


def test_polynomial_roots_golden():
    found = _sorted_roots(polynomial_roots([1.0, 5.0, 9.0, 5.0]))
    expected = _sorted_roots(GOLDEN_ROOTS)
    np.testing.assert_allclose(found, expected, atol=1e-9)


def test_polynomial_roots_random_round_trip():
    rng = np.random.default_rng(17)
    for _ in range(20):
        p = rng.integers(1, 6)
        # gaps of at least 0.3 keep the roots well conditioned
        reals = -(0.2 + np.cumsum(rng.uniform(0.3, 1.0, size=p)))
        coeffs = coefficients_from_roots(reals)
        found = np.sort_complex(polynomial_roots([1.0, *coeffs]))
        np.testing.assert_allclose(found, np.sort_complex(reals.astype(complex)),
                                   atol=1e-7)


def test_polynomial_roots_validation():
    with pytest.raises(ValidationError):
        polynomial_roots([2.0, 1.0])
    with pytest.raises(ValidationError):
        polynomial_roots([1.0, np.inf])


# ---------------------------------------------------------------------------
# model construction

def test_companion_layout(golden_model):
    m = golden_model
    assert (m.p, m.q) == (3, 2)
    np.testing.assert_array_equal(m.A[0], [0.0, 1.0, 0.0])
    np.testing.assert_array_equal(m.A[1], [0.0, 0.0, 1.0])
    np.testing.assert_array_equal(m.A[2], [-5.0, -9.0, -5.0])
    np.testing.assert_array_equal(m.e, [0.0, 0.0, 1.0])
    np.testing.assert_allclose(_sorted_roots(m.ar_roots),
                               _sorted_roots(GOLDEN_ROOTS), atol=1e-9)


def test_model_validation():
    with pytest.raises(ValidationError):
        CarmaModel(a=(5.0, 9.0, 5.0), b=(0.5, 2.0))
    with pytest.raises(ValidationError):
        CarmaModel(a=(5.0, 9.0, 5.0), b=(0.0, 0.0, 0.0))
    with pytest.raises(ValidationError):
        CarmaModel(a=(5.0, 9.0, 5.0), b=(0.5, 2.0, 2.0))
    lower_order = CarmaModel(a=(5.0, 9.0, 5.0), b=(0.4, 1.0, 0.0))
    assert lower_order.q == 1


def test_shared_ar_ma_root_rejected():
    # AR roots {-1, -2}, MA root -1
    with pytest.raises(ValidationError):
        CarmaModel(a=(3.0, 2.0), b=(1.0, 1.0))


def test_stability_report(golden_model):
    report = stability_check(golden_model)
    assert report.stable
    assert report.offending.size == 0
    shaky = CarmaModel(a=(0.5, -0.5), b=(2.0, 1.0))
    report = stability_check(shaky)
    assert not report.stable
    assert np.any(report.offending.real > 0)
    with pytest.raises(ValidationError):
        shaky.assert_stable()


def test_model_round_trips(golden_model):
    again = CarmaModel.from_roots(GOLDEN_ROOTS, b=GOLDEN_B)
    np.testing.assert_allclose(again.a, golden_model.a, atol=1e-12)
    doc = golden_model.to_dict()
    np.testing.assert_allclose(CarmaModel.from_dict(doc).a, golden_model.a)
    by_roots = CarmaModel.from_dict(
        {"roots": [[-1.0, 0.0], [-2.0, 1.0], [-2.0, -1.0]], "b": list(GOLDEN_B)})
    np.testing.assert_allclose(by_roots.a, golden_model.a, atol=1e-12)
    with pytest.raises(ValidationError):
        CarmaModel.from_dict({"a": [5.0, 9.0, 5.0], "roots": [[-1.0, 0.0]],
                              "b": list(GOLDEN_B)})


# ---------------------------------------------------------------------------
# matrix exponential and kernel

def test_matrix_exp_analytic_cases():
    np.testing.assert_allclose(matrix_exp(np.zeros((3, 3))), np.eye(3),
                               atol=1e-14)
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    np.testing.assert_allclose(matrix_exp(A, 3.0),
                               [[1.0, 3.0], [0.0, 1.0]], atol=1e-12)
    np.testing.assert_allclose(matrix_exp(np.array([[-2.0]]), 1.0),
                               [[np.exp(-2.0)]], rtol=1e-12)


def test_matrix_exp_against_scipy():
    rng = np.random.default_rng(3)
    for _ in range(10):
        A = rng.normal(size=(4, 4))
        t = rng.uniform(0.1, 2.0)
        np.testing.assert_allclose(matrix_exp(A, t), expm(A * t),
                                   rtol=1e-10, atol=1e-10)


def test_matrix_exp_overflow_guard():
    with pytest.raises(NumericalError):
        matrix_exp(np.array([[1e9, 0.0], [0.0, 1.0]]), 1.0)


def test_kernel_ou_and_negative_times():
    ou = CarmaModel(a=(1.7,), b=(1.0,))
    t = np.array([-1.0, 0.0, 0.5, 2.0])
    expected = np.where(t >= 0, np.exp(-1.7 * t), 0.0)
    np.testing.assert_allclose(kernel(ou, t), expected, atol=1e-12)
    assert kernel(ou, -3.0) == 0.0
    assert isinstance(kernel(ou, 1.0), float)


def test_kernel_golden_vs_expm(golden_model):
    t = np.linspace(0.1, 8.0, 40)
    direct = np.array([golden_model.b @ expm(golden_model.A * u) @ golden_model.e
                       for u in t])
    np.testing.assert_allclose(kernel(golden_model, t), direct, atol=1e-10)


# ---------------------------------------------------------------------------
# exact simulation

def test_exact_zero_path(golden_model):
    quiet = SubordinatorPath(event_times=[], jump_sizes=[], gamma=0.0,
                             horizon=10.0)
    traj = simulate_exact(golden_model, quiet, np.linspace(0.5, 9.5, 19))
    np.testing.assert_array_equal(traj.outputs, 0.0)
    np.testing.assert_array_equal(traj.states, 0.0)


def test_exact_single_jump_is_kernel(golden_model):
    path = SubordinatorPath(event_times=[2.0], jump_sizes=[1.5], gamma=0.0,
                            horizon=20.0)
    ts = np.linspace(0.5, 19.5, 30)
    traj = simulate_exact(golden_model, path, ts)
    np.testing.assert_allclose(traj.outputs,
                               1.5 * kernel(golden_model, ts - 2.0),
                               atol=1e-12)


def test_exact_superposition(golden_model):
    taus = np.array([1.7, 4.2, 9.05, 13.6, 18.25])
    js = np.array([2.0, -1.0, 0.5, 3.0, 1.25])
    path = SubordinatorPath(event_times=taus, jump_sizes=js, gamma=0.0,
                            horizon=24.0)
    ts = np.linspace(0.4, 23.8, 50)
    traj = simulate_exact(golden_model, path, ts)
    direct = np.array([np.sum(kernel(golden_model, t - taus) * js) for t in ts])
    np.testing.assert_allclose(traj.outputs, direct, atol=1e-10)
    np.testing.assert_allclose(traj.outputs, traj.states @ golden_model.b,
                               atol=1e-12)


def test_exact_drift_only(golden_model):
    path = SubordinatorPath(event_times=[], jump_sizes=[], gamma=0.7,
                            horizon=12.0)
    ts = np.array([0.8, 3.0, 7.5, 11.0])
    traj = simulate_exact(golden_model, path, ts)
    for t, y in zip(ts, traj.outputs):
        integral, _ = quad(lambda u: kernel(golden_model, u), 0.0, t,
                           epsabs=1e-12)
        assert y == pytest.approx(0.7 * integral, abs=1e-8)


def test_exact_burn_in(golden_model):
    spec = make_golden_spec(2)
    path = simulate_subordinator(spec, 5)
    ts = np.arange(1.0, 25.0)
    a = simulate_exact(golden_model, path, ts, burn_in_periods=10, spec=spec,
                       seed=99)
    b = simulate_exact(golden_model, path, ts, burn_in_periods=10, spec=spec,
                       seed=99)
    cold = simulate_exact(golden_model, path, ts)
    np.testing.assert_array_equal(a.outputs, b.outputs)
    assert not np.allclose(a.outputs, cold.outputs)
    with pytest.raises(ValidationError):
        simulate_exact(golden_model, path, ts, burn_in_periods=10)


def test_exact_sample_time_validation(golden_model):
    path = SubordinatorPath(event_times=[1.0], jump_sizes=[2.0], gamma=0.0,
                            horizon=10.0)
    for bad in ([-1.0], [11.0], [3.0, 2.0]):
        with pytest.raises(ValidationError):
            simulate_exact(golden_model, path, bad)


def test_exact_rejects_unstable_model():
    shaky = CarmaModel(a=(0.5, -0.5), b=(2.0, 1.0))
    path = SubordinatorPath(event_times=[1.0], jump_sizes=[2.0], gamma=0.0,
                            horizon=10.0)
    with pytest.raises(ValidationError):
        simulate_exact(shaky, path, [5.0])


# ---------------------------------------------------------------------------
# Euler scheme

def test_euler_approaches_exact(golden_model):
    spec = make_golden_spec(8)
    path = simulate_subordinator(spec, 42)
    ts = np.arange(1.0, 97.0)
    exact = simulate_exact(golden_model, path, ts)
    gap_coarse = np.max(np.abs(
        simulate_euler(golden_model, path, 0.1, ts).outputs - exact.outputs))
    gap_fine = np.max(np.abs(
        simulate_euler(golden_model, path, 0.025, ts).outputs - exact.outputs))
    assert gap_fine < 0.5
    assert gap_coarse / gap_fine > 2.0


def test_euler_grid_alignment(golden_model):
    path = SubordinatorPath(event_times=[1.0], jump_sizes=[2.0], gamma=0.0,
                            horizon=10.0)
    with pytest.raises(ValidationError):
        simulate_euler(golden_model, path, 0.3, [1.0])


def test_euler_stability_warning():
    stiff = CarmaModel(a=(30.0,), b=(1.0,))
    path = SubordinatorPath(event_times=[0.5], jump_sizes=[1.0], gamma=0.0,
                            horizon=2.0)
    with pytest.warns(EulerStabilityWarning):
        simulate_euler(stiff, path, 0.1, [1.0])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        simulate_euler(stiff, path, 0.01, [1.0])


# ---------------------------------------------------------------------------
# ensembles

def test_ensemble_shapes_and_determinism(golden_model):
    spec = make_golden_spec(2)
    ts = np.array([1.0, 5.0])
    ens = simulate_ensemble(golden_model, spec, ts, 64, burn_in_periods=2,
                            seed=9)
    assert ens.times.shape == (2,)
    assert ens.states.shape == (64, 2, 3)
    assert ens.outputs.shape == (64, 2)
    again = simulate_ensemble(golden_model, spec, ts, 64, burn_in_periods=2,
                              seed=9)
    np.testing.assert_array_equal(ens.outputs, again.outputs)
    with pytest.raises(ValidationError):
        simulate_ensemble(golden_model, spec, ts, 0, seed=1)


def test_ensemble_thread_count_is_invisible(golden_model, monkeypatch):
    spec = make_golden_spec(2)
    ts = np.array([1.0, 5.0])
    one = simulate_ensemble(golden_model, spec, ts, 64, burn_in_periods=2,
                            seed=9, threads=1)
    four = simulate_ensemble(golden_model, spec, ts, 64, burn_in_periods=2,
                             seed=9, threads=4)
    np.testing.assert_array_equal(one.outputs, four.outputs)
    np.testing.assert_array_equal(one.states, four.states)
    monkeypatch.setenv("SLCARMA_THREADS", "3")
    env = simulate_ensemble(golden_model, spec, ts, 64, burn_in_periods=2,
                            seed=9)
    np.testing.assert_array_equal(one.outputs, env.outputs)


def test_ensemble_mean_matches_closed_form(golden_model, golden_partition):
    from slcarma import output_mean
    spec = make_golden_spec(2)
    ens = simulate_ensemble(golden_model, spec, np.array([1.0, 5.0]), 2000,
                            burn_in_periods=12, seed=11)
    for j, s in enumerate((1.0, 5.0)):
        col = ens.outputs[:, j]
        mu = output_mean(golden_model, golden_partition, 0.0, 3.0, s)
        se = col.std(ddof=1) / np.sqrt(col.size)
        assert col.mean() == pytest.approx(mu, abs=4 * se)
