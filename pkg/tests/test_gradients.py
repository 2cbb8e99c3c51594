import math

import numpy as np
import pytest

from qextrap.circuits import GraphSpec, build_hea, build_qaoa, build_uccsd
from qextrap.gradients import (
    CountingEvaluator,
    GradientMethod,
    adjoint_gradient,
    finite_diff_gradient,
    make_optimizer,
    optimizer_step,
    param_shift_gradient,
    spsa_gradient,
)
from qextrap.sim import Observable, PauliTerm
from qextrap.tasks import CircuitLossEvaluator, circuit_shift_gradient, cut_observable


def z_obs(n: int, qubit: int = 0) -> Observable:
    return Observable(n, (PauliTerm(1.0, "".join("Z" if i == qubit else "I" for i in range(n))),))


def ry_cos_evaluator():
    """L(theta) = <Z> after RY(theta)|0> = cos(theta)."""
    from qextrap.circuits import GateOp, ParameterizedCircuit

    circ = ParameterizedCircuit(1, (), (GateOp("RY", (0,), param_index=0),), 1)
    return CircuitLossEvaluator(circ, z_obs(1))


class TestParameterShift:
    def test_cosine_slope_at_half_pi(self):
        grad = param_shift_gradient(ry_cos_evaluator(), np.array([math.pi / 2]))
        assert grad[0] == pytest.approx(-1.0, abs=1e-12)

    def test_extremum(self):
        grad = param_shift_gradient(ry_cos_evaluator(), np.array([0.0]))
        assert grad[0] == pytest.approx(0.0, abs=1e-12)

    def test_matches_finite_differences_on_random_circuits(self):
        rng = np.random.default_rng(3)
        obs = Observable(4, (PauliTerm(0.8, "ZZII"), PauliTerm(-0.5, "IXIY"),
                             PauliTerm(0.3, "ZIIZ")))
        for trial in range(20):
            circ = build_hea(4, 1)
            theta = rng.uniform(-np.pi, np.pi, circ.num_params)
            ev = CircuitLossEvaluator(circ, obs)
            shift = param_shift_gradient(ev, theta, circ.two_term_ok())
            fd = finite_diff_gradient(ev, theta, 1e-5)
            np.testing.assert_allclose(shift, fd, atol=1e-6)

    def test_exactly_two_calls_per_parameter(self):
        ev = CountingEvaluator(lambda t: float(np.sum(t ** 2)))
        theta = np.arange(5.0)
        param_shift_gradient(ev, theta)
        assert ev.calls == 10

    def test_fallback_uses_two_calls_too(self):
        ev = CountingEvaluator(lambda t: float(np.sum(np.sin(t))))
        theta = np.zeros(4)
        param_shift_gradient(ev, theta, np.array([True, False, True, False]))
        assert ev.calls == 8


class TestSpsa:
    def test_exact_on_linear_scalar(self):
        a = 2.75
        method = GradientMethod("spsa", spsa_c=0.3)
        for seed in range(5):
            grad = spsa_gradient(lambda t: a * t[0], np.array([1.2]), method,
                                 np.random.default_rng(seed))
            assert grad[0] == pytest.approx(a, abs=1e-12)

    def test_uninvolved_component_has_zero_mean(self):
        method = GradientMethod("spsa", spsa_c=0.2)
        estimates = [
            spsa_gradient(lambda t: t[0], np.array([0.7, -0.1]), method,
                          np.random.default_rng(seed))[1]
            for seed in range(1000)
        ]
        sigma = np.std(estimates) / math.sqrt(len(estimates))
        assert abs(np.mean(estimates)) <= 3 * sigma

    def test_mean_approaches_gradient_on_quadratic(self):
        h = np.array([[2.0, 0.3, 0.0], [0.3, 1.0, -0.2], [0.0, -0.2, 0.5]])
        theta = np.array([0.4, -0.9, 1.3])
        true_grad = h @ theta
        method = GradientMethod("spsa", spsa_c=0.01)
        loss = lambda t: 0.5 * float(t @ h @ t)
        grads = np.array([
            spsa_gradient(loss, theta, method, np.random.default_rng(seed))
            for seed in range(2000)
        ])
        np.testing.assert_allclose(grads.mean(axis=0), true_grad, rtol=0.05, atol=1e-3)

    def test_exactly_two_calls(self):
        ev = CountingEvaluator(lambda t: float(np.sum(t)))
        spsa_gradient(ev, np.zeros(7), GradientMethod("spsa"), np.random.default_rng(0))
        assert ev.calls == 2

    def test_deterministic_per_seed(self):
        method = GradientMethod("spsa", spsa_c=0.1)
        loss = lambda t: float(np.sum(np.sin(t)))
        a = spsa_gradient(loss, np.ones(4), method, np.random.default_rng(5))
        b = spsa_gradient(loss, np.ones(4), method, np.random.default_rng(5))
        np.testing.assert_array_equal(a, b)


class TestFiniteDifferences:
    def test_square(self):
        grad = finite_diff_gradient(lambda t: float(t[0] ** 2), np.array([3.0]), 1e-5)
        assert grad[0] == pytest.approx(6.0, abs=1e-6)

    def test_constant(self):
        grad = finite_diff_gradient(lambda t: 1.5, np.array([0.1, 0.2]), 1e-5)
        np.testing.assert_allclose(grad, 0.0)

    def test_call_count(self):
        ev = CountingEvaluator(lambda t: float(np.sum(t)))
        finite_diff_gradient(ev, np.zeros(6), 1e-4)
        assert ev.calls == 12

    def test_positive_step_required(self):
        with pytest.raises(ValueError):
            finite_diff_gradient(lambda t: 0.0, np.zeros(1), 0.0)


class TestAdjointGradient:
    def test_matches_shift_rule_on_excitation_ansatz(self):
        rng = np.random.default_rng(9)
        circ = build_uccsd(4, 2)
        obs = Observable(4, (PauliTerm(0.6, "ZZII"), PauliTerm(0.4, "XXYY")))
        theta = rng.uniform(-1, 1, circ.num_params)
        _, adj = adjoint_gradient(circ, theta, obs)
        fd = finite_diff_gradient(CircuitLossEvaluator(circ, obs), theta, 1e-6)
        np.testing.assert_allclose(adj, fd, atol=1e-8)

    def test_matches_on_shared_scaled_parameters(self):
        g = GraphSpec(4, ((0, 1), (1, 2), (2, 3), (0, 2)))
        circ = build_qaoa(g, 2)
        obs = cut_observable(g)
        theta = np.random.default_rng(4).uniform(0, 1.5, circ.num_params)
        value, adj = adjoint_gradient(circ, theta, obs)
        ev = CircuitLossEvaluator(circ, obs)
        assert value == pytest.approx(ev(theta), abs=1e-12)
        fd = finite_diff_gradient(ev, theta, 1e-6)
        np.testing.assert_allclose(adj, fd, atol=1e-8)

    def test_occurrence_shifts_match_finite_differences(self):
        g = GraphSpec(3, ((0, 1), (1, 2), (0, 2)))
        circ = build_qaoa(g, 1)
        obs = cut_observable(g)
        theta = np.array([0.8, 0.4])
        ev = CircuitLossEvaluator(circ, obs, sign=-1.0)
        grad, evals = circuit_shift_gradient(circ, theta, ev.loss_of_state)
        assert evals == 2 * (3 + 3)
        fd = finite_diff_gradient(ev, theta, 1e-6)
        np.testing.assert_allclose(grad, fd, atol=1e-8)


class TestOptimizers:
    def test_sgd_step(self):
        state = make_optimizer("sgd", 0.1, 1)
        theta, state = optimizer_step(state, np.array([1.0]), np.array([0.5]))
        assert theta[0] == pytest.approx(0.95)
        assert state.step_count == 1

    def test_adam_first_step_has_learning_rate_magnitude(self):
        state = make_optimizer("adam", 0.002, 3)
        grads = np.array([0.4, -2.0, 11.0])
        theta, state = optimizer_step(state, np.zeros(3), grads)
        np.testing.assert_allclose(np.abs(theta), 0.002, atol=1e-6)
        np.testing.assert_allclose(np.sign(theta), -np.sign(grads))

    def test_adagrad_first_step(self):
        state = make_optimizer("adagrad", 0.05, 1)
        theta, _ = optimizer_step(state, np.array([0.0]), np.array([2.0]))
        assert theta[0] == pytest.approx(-0.05 * 2.0 / math.sqrt(4.0 + 1e-8), abs=1e-9)
        assert theta[0] == pytest.approx(-0.05, abs=1e-6)

    def test_dimension_mismatch(self):
        state = make_optimizer("sgd", 0.1, 2)
        with pytest.raises(ValueError):
            optimizer_step(state, np.zeros(2), np.zeros(3))
        state = make_optimizer("adam", 0.1, 2)
        with pytest.raises(ValueError):
            optimizer_step(state, np.zeros(3), np.zeros(3))

    def test_sgd_descends_monotonically_on_convex_quadratic(self):
        h = np.diag([2.0, 0.7, 1.4])
        loss = lambda t: 0.5 * float(t @ h @ t)
        state = make_optimizer("sgd", 0.4, 3)  # below 2 / max eigenvalue = 1
        theta = np.array([1.0, -2.0, 0.5])
        losses = [loss(theta)]
        for _ in range(100):
            theta, state = optimizer_step(state, theta, h @ theta)
            losses.append(loss(theta))
        assert all(b < a for a, b in zip(losses, losses[1:]))

    def test_adam_accumulators_advance(self):
        state = make_optimizer("adam", 0.01, 2)
        theta = np.zeros(2)
        for i in range(3):
            theta, state = optimizer_step(state, theta, np.array([1.0, -1.0]))
        assert state.step_count == 3
        assert state.m is not None and np.all(state.m != 0)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            make_optimizer("rmsprop", 0.1, 2)

    def test_positive_learning_rate(self):
        with pytest.raises(ValueError):
            make_optimizer("sgd", 0.0, 2)


class TestGradientMethodValidation:
    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            GradientMethod("exact")

    def test_positive_constants(self):
        with pytest.raises(ValueError):
            GradientMethod("spsa", spsa_c=0.0)
        with pytest.raises(ValueError):
            GradientMethod("finite_diff", fd_h=-1.0)
