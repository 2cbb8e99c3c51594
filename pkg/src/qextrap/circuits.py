"""Builders for the three workload circuit families.

QAOA cost/mixer stacks, a hardware-efficient layered ansatz with angle
encoding, and a particle-conserving excitation ansatz started from an
occupied-orbital reference bitstring.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sim import (
    GATE_ARITY,
    PARAMETERIZED_KINDS,
    TWO_TERM_KINDS,
    NoiseSpec,
    StateVector,
    as_rng,
    run_ops,
)


@dataclass(frozen=True)
class GateOp:
    """One gate slot: a kind, target qubits, and at most one angle binding.

    The angle comes from exactly one of `param_index` (trainable parameter
    vector, scaled by `angle_scale`), `feature_index` (input feature vector),
    or `fixed_angle`; non-parameterized kinds take none.
    """

    kind: str
    targets: tuple[int, ...]
    param_index: int | None = None
    fixed_angle: float | None = None
    feature_index: int | None = None
    angle_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in GATE_ARITY:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "targets", tuple(self.targets))
        if len(self.targets) != GATE_ARITY[self.kind]:
            raise ValueError(
                f"{self.kind} takes {GATE_ARITY[self.kind]} targets, got {self.targets}"
            )
        bindings = sum(
            x is not None for x in (self.param_index, self.fixed_angle, self.feature_index)
        )
        if self.kind in PARAMETERIZED_KINDS:
            # unbound is allowed for standalone application with an explicit
            # angle; circuits require exactly one binding
            if bindings > 1:
                raise ValueError(f"{self.kind} takes at most one angle binding")
        elif bindings:
            raise ValueError(f"{self.kind} takes no angle binding")

    @property
    def is_bound(self) -> bool:
        return (
            self.kind not in PARAMETERIZED_KINDS
            or self.param_index is not None
            or self.fixed_angle is not None
            or self.feature_index is not None
        )

    def resolve_angle(self, params: np.ndarray, features: np.ndarray | None) -> float | None:
        if self.param_index is not None:
            return self.angle_scale * float(params[self.param_index])
        if self.feature_index is not None:
            if features is None:
                raise ValueError("circuit has feature slots but no features were given")
            return float(features[self.feature_index])
        return self.fixed_angle


@dataclass(frozen=True)
class ParameterizedCircuit:
    """Fixed prelude plus trainable gate list over `num_params` slots."""

    num_qubits: int
    prelude: tuple[GateOp, ...]
    ops: tuple[GateOp, ...]
    num_params: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "prelude", tuple(self.prelude))
        object.__setattr__(self, "ops", tuple(self.ops))
        seen: set[int] = set()
        for op in self.prelude + self.ops:
            for q in op.targets:
                if not 0 <= q < self.num_qubits:
                    raise ValueError(f"target {q} out of range in {op}")
            if not op.is_bound:
                raise ValueError(f"unbound angle on {op.kind} in circuit")
            if op.param_index is not None:
                if not 0 <= op.param_index < self.num_params:
                    raise ValueError(f"param index {op.param_index} out of range")
                seen.add(op.param_index)
        if seen != set(range(self.num_params)):
            missing = sorted(set(range(self.num_params)) - seen)
            raise ValueError(f"parameter indices never referenced: {missing}")

    @property
    def num_features(self) -> int:
        idx = [op.feature_index for op in self.prelude + self.ops if op.feature_index is not None]
        return max(idx) + 1 if idx else 0

    def param_occurrences(self) -> list[list[GateOp]]:
        """Gate occurrences per parameter index, in circuit order."""
        occ: list[list[GateOp]] = [[] for _ in range(self.num_params)]
        for op in self.prelude + self.ops:
            if op.param_index is not None:
                occ[op.param_index].append(op)
        return occ

    def two_term_ok(self) -> np.ndarray:
        """Per-parameter flag: True when the exact +/- pi/2 shift rule applies
        to the parameter as a whole (single occurrence, unit scale, two-term
        gate kind)."""
        flags = np.zeros(self.num_params, dtype=bool)
        for j, ops in enumerate(self.param_occurrences()):
            flags[j] = (
                len(ops) == 1
                and ops[0].kind in TWO_TERM_KINDS
                and ops[0].angle_scale == 1.0
            )
        return flags


def run_circuit(
    circuit: ParameterizedCircuit,
    params: np.ndarray,
    features: np.ndarray | None = None,
    noise: NoiseSpec | None = None,
    rng: int | np.random.Generator | None = None,
) -> StateVector:
    """Simulate prelude then ops from |0...0>, binding parameter/feature slots."""
    params = np.asarray(params, dtype=float)
    if params.shape != (circuit.num_params,):
        raise ValueError(
            f"expected {circuit.num_params} parameters, got shape {params.shape}"
        )
    noisy = noise is not None and noise.enabled and noise.depolarizing_prob > 0.0
    if noisy:
        rng = as_rng(rng)
    resolved = [
        (op, op.resolve_angle(params, features)) for op in circuit.prelude + circuit.ops
    ]
    return StateVector(circuit.num_qubits, run_ops(circuit.num_qubits, resolved, noise, rng))


# ---------------------------------------------------------------------------
# graphs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GraphSpec:
    """Simple undirected graph; edges stored as sorted unique pairs."""

    num_nodes: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        normalized = []
        seen = set()
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            if not (0 <= u < self.num_nodes and 0 <= v < self.num_nodes):
                raise ValueError(f"edge ({u}, {v}) out of range")
            e = (min(u, v), max(u, v))
            if e in seen:
                raise ValueError(f"duplicate edge {e}")
            seen.add(e)
            normalized.append(e)
        object.__setattr__(self, "edges", tuple(normalized))


def parse_graph(text: str) -> GraphSpec:
    """Graph file: first line `<num_nodes>`, then one `u v` edge per line."""
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ValueError("empty graph file")
    try:
        num_nodes = int(lines[0])
    except ValueError as exc:
        raise ValueError(f"bad node count {lines[0]!r}") from exc
    edges = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"expected 'u v', got {ln!r}")
        edges.append((int(parts[0]), int(parts[1])))
    return GraphSpec(num_nodes, tuple(edges))


def load_graph(path) -> GraphSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_graph(fh.read())


# ---------------------------------------------------------------------------
# QAOA
# ---------------------------------------------------------------------------

def build_qaoa(graph: GraphSpec, depth: int) -> ParameterizedCircuit:
    """H on every qubit, then per layer i: RZZ(gamma_i) on every edge and
    RX(2 beta_i) on every qubit. Parameters interleaved [g1, b1, g2, b2, ...].
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if not graph.edges:
        raise ValueError("graph has no edges")
    prelude = [GateOp("H", (q,)) for q in range(graph.num_nodes)]
    ops: list[GateOp] = []
    for layer in range(depth):
        gamma, beta = 2 * layer, 2 * layer + 1
        for u, v in graph.edges:
            ops.append(GateOp("RZZ", (u, v), param_index=gamma))
        for q in range(graph.num_nodes):
            ops.append(GateOp("RX", (q,), param_index=beta, angle_scale=2.0))
    return ParameterizedCircuit(graph.num_nodes, tuple(prelude), tuple(ops), 2 * depth)


# ---------------------------------------------------------------------------
# hardware-efficient ansatz
# ---------------------------------------------------------------------------

def build_hea(num_qubits: int, layers: int) -> ParameterizedCircuit:
    """Per layer: RX and RZ on every qubit, then controlled-RX from every
    qubit to every other; one trailing RX/RZ rotation block after the final
    layer. num_params = layers * (2q + q(q-1)) + 2q."""
    if num_qubits < 2:
        raise ValueError("need at least 2 qubits")
    if layers < 1:
        raise ValueError("need at least 1 layer")
    ops: list[GateOp] = []
    counter = 0

    def rotation_block() -> None:
        nonlocal counter
        for q in range(num_qubits):
            ops.append(GateOp("RX", (q,), param_index=counter))
            counter += 1
        for q in range(num_qubits):
            ops.append(GateOp("RZ", (q,), param_index=counter))
            counter += 1

    for _ in range(layers):
        rotation_block()
        for control in range(num_qubits):
            for target in range(num_qubits):
                if target != control:
                    ops.append(GateOp("CRX", (control, target), param_index=counter))
                    counter += 1
    rotation_block()
    return ParameterizedCircuit(num_qubits, (), tuple(ops), counter)


# ---------------------------------------------------------------------------
# angle encoding
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EncodingSpec:
    features_per_qubit: int = 2
    gate_kind: str = "RZ"
    hadamard_prelude: bool = True

    def __post_init__(self) -> None:
        if self.features_per_qubit < 1:
            raise ValueError("features_per_qubit must be >= 1")
        if self.gate_kind != "RZ":
            raise ValueError("only RZ encoding is supported")


def build_encoder(num_qubits: int, spec: EncodingSpec) -> tuple[GateOp, ...]:
    """Feature-slot prelude: per qubit, an H before each RZ slot when
    hadamard_prelude is set, so every encoding angle acts on a non-eigenstate.

    Feature layout is qubit-major: qubit q consumes features
    [q * fpq, ..., (q + 1) * fpq - 1].
    """
    ops: list[GateOp] = []
    for q in range(num_qubits):
        for f in range(spec.features_per_qubit):
            if spec.hadamard_prelude:
                ops.append(GateOp("H", (q,)))
            ops.append(
                GateOp("RZ", (q,), feature_index=q * spec.features_per_qubit + f)
            )
    return tuple(ops)


# ---------------------------------------------------------------------------
# excitation ansatz
# ---------------------------------------------------------------------------

def excitation_indices(num_qubits: int, num_electrons: int) -> tuple[list[tuple[int, int]], list[tuple[int, int, int, int]]]:
    """Single and double excitations from the reference occupation.

    Occupied orbitals are 0..ne-1, virtual ne..nq-1. A single pairs occupied
    o with virtual v when their positions within their groups share parity
    (for even electron counts this is exactly the even-with-even /
    odd-with-odd spin pairing on absolute indices). Doubles take every
    occupied pair with every virtual pair.
    """
    if not 0 < num_electrons < num_qubits:
        raise ValueError("need 0 < num_electrons < num_qubits")
    occupied = list(range(num_electrons))
    virtual = list(range(num_electrons, num_qubits))
    singles = [
        (o, v)
        for o in occupied
        for v in virtual
        if o % 2 == (v - num_electrons) % 2
    ]
    doubles = [
        (o1, o2, v1, v2)
        for i, o1 in enumerate(occupied)
        for o2 in occupied[i + 1:]
        for j, v1 in enumerate(virtual)
        for v2 in virtual[j + 1:]
    ]
    return singles, doubles


def build_uccsd(num_qubits: int, num_electrons: int) -> ParameterizedCircuit:
    """Reference bitstring (first num_electrons qubits set) then one
    excitation rotation per single/double pair, one parameter per gate."""
    singles, doubles = excitation_indices(num_qubits, num_electrons)
    prelude = tuple(GateOp("X", (q,)) for q in range(num_electrons))
    ops: list[GateOp] = []
    counter = 0
    for o, v in singles:
        ops.append(GateOp("SingleExcitation", (o, v), param_index=counter))
        counter += 1
    for o1, o2, v1, v2 in doubles:
        ops.append(GateOp("DoubleExcitation", (o1, o2, v1, v2), param_index=counter))
        counter += 1
    return ParameterizedCircuit(num_qubits, prelude, tuple(ops), counter)
