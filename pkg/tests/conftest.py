import numpy as np
import pytest

from qextrap.circuits import GateOp

SINGLE_KINDS = ("H", "X", "RX", "RY", "RZ")
TWO_KINDS = ("CNOT", "CZ", "CRX", "CRZ", "RZZ", "SingleExcitation")
PARAM_KINDS = ("RX", "RY", "RZ", "CRX", "CRZ", "RZZ", "SingleExcitation", "DoubleExcitation")


def random_gate(rng: np.random.Generator, num_qubits: int) -> tuple[GateOp, float | None]:
    """One random gate with resolved fixed angle, valid on num_qubits."""
    kinds = list(SINGLE_KINDS)
    if num_qubits >= 2:
        kinds += list(TWO_KINDS)
    if num_qubits >= 4:
        kinds.append("DoubleExcitation")
    kind = kinds[rng.integers(len(kinds))]
    arity = {"H": 1, "X": 1, "RX": 1, "RY": 1, "RZ": 1, "DoubleExcitation": 4}.get(kind, 2)
    targets = tuple(rng.choice(num_qubits, size=arity, replace=False).tolist())
    if kind in PARAM_KINDS:
        return GateOp(kind, targets, fixed_angle=float(rng.uniform(-np.pi, np.pi))), None
    return GateOp(kind, targets), None


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
