"""Gradient estimators over an abstract loss evaluator, plus SGD/Adam/Adagrad.

Estimator cost contract, enforced by tests with a counting wrapper:
parameter-shift and finite differences make exactly 2n evaluator calls for n
parameters, SPSA exactly 2. Parameters whose gates do not admit the exact
two-term +/- pi/2 rule (controlled rotations, excitation rotations, shared or
scaled angles) use central differences with FD_FALLBACK_H inside the
parameter-shift estimator, keeping the call count at 2 per parameter.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from .circuits import ParameterizedCircuit
from .sim import Observable, apply_matrix, apply_pauli_string, gate_generator, init_zero_state

FD_FALLBACK_H = 1e-4

GRADIENT_KINDS = ("exact_shift", "param_shift_sampled", "spsa", "finite_diff")


@dataclass(frozen=True)
class GradientMethod:
    kind: str = "exact_shift"
    spsa_c: float = 0.1
    fd_h: float = 1e-5

    def __post_init__(self) -> None:
        if self.kind not in GRADIENT_KINDS:
            raise ValueError(f"unknown gradient kind {self.kind!r}")
        if self.spsa_c <= 0.0:
            raise ValueError("spsa_c must be positive")
        if self.fd_h <= 0.0:
            raise ValueError("fd_h must be positive")


class LossEvaluator(Protocol):
    """Loss as a function of the parameter vector, with cost bookkeeping."""

    circuit_executions_per_eval: int
    shots_per_execution: int

    def __call__(self, theta: np.ndarray) -> float: ...


class CountingEvaluator:
    """Wraps an evaluator and tallies calls, executions, and shots."""

    def __init__(self, inner) -> None:
        self.inner = inner
        self.calls = 0
        self.circuit_executions_per_eval = getattr(inner, "circuit_executions_per_eval", 1)
        self.shots_per_execution = getattr(inner, "shots_per_execution", 0)

    def __call__(self, theta: np.ndarray) -> float:
        self.calls += 1
        return self.inner(theta)

    @property
    def executions(self) -> int:
        return self.calls * self.circuit_executions_per_eval

    @property
    def shots(self) -> int:
        return self.executions * self.shots_per_execution


def param_shift_gradient(
    evaluator: Callable[[np.ndarray], float],
    theta: np.ndarray,
    two_term_ok: np.ndarray | None = None,
    fd_h: float = FD_FALLBACK_H,
) -> np.ndarray:
    """Two-term rule g_j = [L(theta + pi/2 e_j) - L(theta - pi/2 e_j)] / 2,
    with a central-difference fallback for parameters flagged False in
    two_term_ok. Exactly 2n evaluator calls."""
    theta = np.asarray(theta, dtype=float)
    n = theta.size
    if two_term_ok is None:
        two_term_ok = np.ones(n, dtype=bool)
    grad = np.empty(n)
    for j in range(n):
        step = math.pi / 2 if two_term_ok[j] else fd_h
        shifted = theta.copy()
        shifted[j] = theta[j] + step
        plus = evaluator(shifted)
        shifted[j] = theta[j] - step
        minus = evaluator(shifted)
        grad[j] = (plus - minus) / 2.0 if two_term_ok[j] else (plus - minus) / (2.0 * step)
    return grad


def finite_diff_gradient(
    evaluator: Callable[[np.ndarray], float], theta: np.ndarray, h: float = 1e-5
) -> np.ndarray:
    """Central differences per component; 2n evaluator calls."""
    if h <= 0.0:
        raise ValueError("h must be positive")
    theta = np.asarray(theta, dtype=float)
    grad = np.empty(theta.size)
    for j in range(theta.size):
        shifted = theta.copy()
        shifted[j] = theta[j] + h
        plus = evaluator(shifted)
        shifted[j] = theta[j] - h
        minus = evaluator(shifted)
        grad[j] = (plus - minus) / (2.0 * h)
    return grad


def spsa_gradient(
    evaluator: Callable[[np.ndarray], float],
    theta: np.ndarray,
    method: GradientMethod,
    rng: int | np.random.Generator,
) -> np.ndarray:
    """Simultaneous-perturbation estimate from a single +/-1 direction:
    g_j = [L(theta + c delta) - L(theta - c delta)] / (2 c delta_j).
    Exactly 2 evaluator calls."""
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    theta = np.asarray(theta, dtype=float)
    c = method.spsa_c
    delta = rng.choice([-1.0, 1.0], size=theta.size)
    plus = evaluator(theta + c * delta)
    minus = evaluator(theta - c * delta)
    return (plus - minus) / (2.0 * c * delta)


# ---------------------------------------------------------------------------
# exact adjoint gradients
#
# Used as the "exact" gradient mode (the analytic, zero-shot path): one
# forward and one backward sweep yield the same values the shift rule gives
# on exact expectations, at O(gates) instead of O(n * gates) simulations.
# ---------------------------------------------------------------------------

def adjoint_gradient(
    circuit: ParameterizedCircuit,
    params: np.ndarray,
    obs: Observable,
    features: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """Exact (<obs>, d<obs>/dparams) for the noiseless circuit."""
    params = np.asarray(params, dtype=float)
    n = circuit.num_qubits
    ops = circuit.prelude + circuit.ops
    resolved = [(op, op.resolve_angle(params, features)) for op in ops]

    from .sim import gate_matrix  # local import to keep module init cheap

    psi = init_zero_state(n).amplitudes
    matrices = []
    for op, angle in resolved:
        mat = gate_matrix(op.kind, angle)
        matrices.append(mat)
        psi = apply_matrix(psi, mat, op.targets, n)

    lam = np.zeros_like(psi)
    for term in obs.terms:
        lam += term.coefficient * apply_pauli_string(psi, term.letters, n)
    value = float(np.vdot(psi, lam).real)

    grad = np.zeros(circuit.num_params)
    for (op, _), mat in zip(reversed(resolved), reversed(matrices)):
        if op.param_index is not None:
            gen = gate_generator(op.kind)
            g_psi = apply_matrix(psi, gen, op.targets, n)
            grad[op.param_index] += op.angle_scale * np.vdot(lam, g_psi).imag
        inv = mat.conj().T
        psi = apply_matrix(psi, inv, op.targets, n)
        lam = apply_matrix(lam, inv, op.targets, n)
    return value, grad


# ---------------------------------------------------------------------------
# circuit-aware parameter shift
#
# Shifts each parameterized gate occurrence individually, which stays exact
# when one parameter feeds several gates (QAOA layers) or enters with an
# angle scale; non-two-term kinds use the central-difference fallback on the
# occurrence angle. Cost: 2 state preparations per occurrence.
# ---------------------------------------------------------------------------

def occurrence_shift_gradient(
    circuit: ParameterizedCircuit,
    params: np.ndarray,
    loss_of_state: Callable[[np.ndarray], float],
    run_with_angle_offsets: Callable[[dict[int, float]], np.ndarray],
) -> np.ndarray:
    """Gradient of loss_of_state(run(...)) w.r.t. params via per-occurrence
    shifts. run_with_angle_offsets maps {op position: angle offset} to final
    amplitudes; positions index circuit.prelude + circuit.ops."""
    params = np.asarray(params, dtype=float)
    grad = np.zeros(circuit.num_params)
    ops = circuit.prelude + circuit.ops
    for pos, op in enumerate(ops):
        if op.param_index is None:
            continue
        if op.kind in ("CRX", "CRZ", "SingleExcitation", "DoubleExcitation"):
            step, denom = FD_FALLBACK_H, 2.0 * FD_FALLBACK_H
        else:
            step, denom = math.pi / 2.0, 2.0
        plus = loss_of_state(run_with_angle_offsets({pos: step}))
        minus = loss_of_state(run_with_angle_offsets({pos: -step}))
        grad[op.param_index] += op.angle_scale * (plus - minus) / denom
    return grad


# ---------------------------------------------------------------------------
# optimizers
# ---------------------------------------------------------------------------

OPTIMIZER_KINDS = ("sgd", "adam", "adagrad")

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_STABILITY_EPS = 1e-8


@dataclass
class OptimizerState:
    kind: str
    learning_rate: float
    step_count: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    accum: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.kind not in OPTIMIZER_KINDS:
            raise ValueError(f"unknown optimizer kind {self.kind!r}")
        if self.learning_rate <= 0.0:
            raise ValueError("learning rate must be positive")


def make_optimizer(kind: str, learning_rate: float, num_params: int) -> OptimizerState:
    state = OptimizerState(kind, learning_rate)
    if kind == "adam":
        state.m = np.zeros(num_params)
        state.v = np.zeros(num_params)
    elif kind == "adagrad":
        state.accum = np.zeros(num_params)
    return state


def optimizer_step(
    state: OptimizerState, theta: np.ndarray, grad: np.ndarray
) -> tuple[np.ndarray, OptimizerState]:
    """One update; returns the new parameters and the advanced state."""
    theta = np.asarray(theta, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if theta.shape != grad.shape:
        raise ValueError(f"shape mismatch: theta {theta.shape}, grad {grad.shape}")
    lr = state.learning_rate
    new = OptimizerState(state.kind, lr, state.step_count + 1)
    if state.kind == "sgd":
        return theta - lr * grad, new
    if state.kind == "adam":
        if state.m is None or state.m.shape != theta.shape:
            raise ValueError("adam state dimensions do not match parameters")
        t = new.step_count
        new.m = _ADAM_BETA1 * state.m + (1.0 - _ADAM_BETA1) * grad
        new.v = _ADAM_BETA2 * state.v + (1.0 - _ADAM_BETA2) * grad * grad
        m_hat = new.m / (1.0 - _ADAM_BETA1 ** t)
        v_hat = new.v / (1.0 - _ADAM_BETA2 ** t)
        return theta - lr * m_hat / (np.sqrt(v_hat) + _STABILITY_EPS), new
    if state.accum is None or state.accum.shape != theta.shape:
        raise ValueError("adagrad state dimensions do not match parameters")
    new.accum = state.accum + grad * grad
    return theta - lr * grad / np.sqrt(new.accum + _STABILITY_EPS), new
