"""Dense statevector simulation.

Gate application, exact and shot-sampled Pauli expectations, stochastic
Pauli-error gate noise, and a dense-diagonalization ground-energy oracle.

Conventions (fixed, tested):
  - qubit 0 is the most significant bit of the basis index,
  - amplitudes are complex128 throughout,
  - global phase is never normalized away; all contracts are
    phase-insensitive (expectations, probabilities).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DENSE_QUBIT_LIMIT = 12

_INV_SQRT2 = 1.0 / math.sqrt(2.0)

_H = np.array([[1, 1], [1, -1]], dtype=complex) * _INV_SQRT2
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_I2 = np.eye(2, dtype=complex)

_PAULI = {"I": _I2, "X": _X, "Y": _Y, "Z": _Z}

_CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
_CZ = np.diag([1, 1, 1, -1]).astype(complex)

# arity per gate kind; parameterized kinds take an angle
GATE_ARITY = {
    "H": 1, "X": 1,
    "RX": 1, "RY": 1, "RZ": 1,
    "CNOT": 2, "CZ": 2, "CRX": 2, "CRZ": 2, "RZZ": 2,
    "SingleExcitation": 2, "DoubleExcitation": 4,
}
PARAMETERIZED_KINDS = frozenset(
    {"RX", "RY", "RZ", "CRX", "CRZ", "RZZ", "SingleExcitation", "DoubleExcitation"}
)
# kinds whose single-occurrence parameters admit the exact two-term
# (+/- pi/2) shift rule; the rest fall back to central differences
TWO_TERM_KINDS = frozenset({"RX", "RY", "RZ", "RZZ"})


def as_rng(seed: int | np.random.Generator | None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass
class StateVector:
    """Complex amplitude array over the 2^num_qubits computational basis."""

    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (2 ** self.num_qubits,):
            raise ValueError(
                f"expected {2 ** self.num_qubits} amplitudes, "
                f"got shape {self.amplitudes.shape}"
            )

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def copy(self) -> "StateVector":
        return StateVector(self.num_qubits, self.amplitudes.copy())


@dataclass(frozen=True)
class PauliTerm:
    """One real-weighted Pauli string, e.g. -0.4804 * IIZZ."""

    coefficient: float
    letters: str

    def __post_init__(self) -> None:
        bad = set(self.letters) - set("IXYZ")
        if bad:
            raise ValueError(f"invalid Pauli letters {sorted(bad)} in {self.letters!r}")

    @property
    def num_qubits(self) -> int:
        return len(self.letters)

    def support(self) -> list[int]:
        return [q for q, p in enumerate(self.letters) if p != "I"]


@dataclass(frozen=True)
class Observable:
    """Real-weighted sum of Pauli strings on a fixed qubit count."""

    num_qubits: int
    terms: tuple[PauliTerm, ...]

    def __post_init__(self) -> None:
        if not self.terms:
            raise ValueError("observable needs at least one term")
        for t in self.terms:
            if t.num_qubits != self.num_qubits:
                raise ValueError(
                    f"term {t.letters!r} has {t.num_qubits} qubits, "
                    f"observable has {self.num_qubits}"
                )
        object.__setattr__(self, "terms", tuple(self.terms))


@dataclass(frozen=True)
class NoiseSpec:
    """Per-gate stochastic Pauli error: with probability depolarizing_prob a
    uniformly random X/Y/Z is applied to each target qubit after the gate."""

    depolarizing_prob: float = 0.0
    enabled: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.depolarizing_prob <= 1.0:
            raise ValueError("depolarizing_prob must lie in [0, 1]")


@dataclass(frozen=True)
class ShotConfig:
    """Expectation-estimation mode: exact statevector or m-shot sampling."""

    shots: int = 1000
    mode: str = "exact"  # exact | sampled

    def __post_init__(self) -> None:
        if self.mode not in ("exact", "sampled"):
            raise ValueError(f"unknown shot mode {self.mode!r}")
        if self.mode == "sampled" and self.shots < 1:
            raise ValueError("sampled mode requires shots >= 1")


# ---------------------------------------------------------------------------
# state preparation and gate application
# ---------------------------------------------------------------------------

def init_zero_state(num_qubits: int) -> StateVector:
    amps = np.zeros(2 ** num_qubits, dtype=complex)
    amps[0] = 1.0
    return StateVector(num_qubits, amps)


def init_basis_state(num_qubits: int, bitstring) -> StateVector:
    """Computational basis state |b_0 b_1 ... b_{q-1}>, qubit 0 leftmost."""
    bits = list(bitstring)
    if len(bits) != num_qubits:
        raise ValueError(f"bitstring length {len(bits)} != num_qubits {num_qubits}")
    index = 0
    for b in bits:
        if b not in (0, 1):
            raise ValueError(f"bitstring entries must be 0 or 1, got {b!r}")
        index = (index << 1) | b
    amps = np.zeros(2 ** num_qubits, dtype=complex)
    amps[index] = 1.0
    return StateVector(num_qubits, amps)


def gate_matrix(kind: str, theta: float | None = None) -> np.ndarray:
    """Dense unitary for a gate kind; theta required iff parameterized."""
    if kind in PARAMETERIZED_KINDS:
        if theta is None:
            raise ValueError(f"gate {kind} requires an angle")
        return _param_matrix(kind, float(theta))
    if theta is not None:
        raise ValueError(f"gate {kind} takes no angle")
    if kind == "H":
        return _H
    if kind == "X":
        return _X
    if kind == "CNOT":
        return _CNOT
    if kind == "CZ":
        return _CZ
    raise ValueError(f"unknown gate kind {kind!r}")


def _param_matrix(kind: str, theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if kind == "RY":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == "RZ":
        return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])
    if kind == "CRX":
        m = np.eye(4, dtype=complex)
        m[2:, 2:] = np.array([[c, -1j * s], [-1j * s, c]])
        return m
    if kind == "CRZ":
        return np.diag([1, 1, np.exp(-0.5j * theta), np.exp(0.5j * theta)])
    if kind == "RZZ":
        p, q = np.exp(-0.5j * theta), np.exp(0.5j * theta)
        return np.diag([p, q, q, p])
    if kind == "SingleExcitation":
        # rotation in span{|01>, |10>}, identity elsewhere
        m = np.eye(4, dtype=complex)
        m[1, 1], m[1, 2], m[2, 1], m[2, 2] = c, -s, s, c
        return m
    if kind == "DoubleExcitation":
        # rotation in span{|0011>, |1100>}, identity elsewhere
        m = np.eye(16, dtype=complex)
        a, b = 0b0011, 0b1100
        m[a, a], m[a, b], m[b, a], m[b, b] = c, -s, s, c
        return m
    raise ValueError(f"unknown parameterized gate kind {kind!r}")


def gate_generator(kind: str) -> np.ndarray:
    """Hermitian G with U(theta) = exp(-i theta G / 2) for a parameterized kind."""
    if kind == "RX":
        return _X
    if kind == "RY":
        return _Y
    if kind == "RZ":
        return _Z
    if kind == "RZZ":
        return np.diag([1, -1, -1, 1]).astype(complex)
    if kind == "CRX":
        m = np.zeros((4, 4), dtype=complex)
        m[2:, 2:] = _X
        return m
    if kind == "CRZ":
        m = np.zeros((4, 4), dtype=complex)
        m[2:, 2:] = _Z
        return m
    if kind == "SingleExcitation":
        m = np.zeros((4, 4), dtype=complex)
        m[1, 2], m[2, 1] = -1j, 1j
        return m
    if kind == "DoubleExcitation":
        m = np.zeros((16, 16), dtype=complex)
        a, b = 0b0011, 0b1100
        m[a, b], m[b, a] = -1j, 1j
        return m
    raise ValueError(f"gate kind {kind!r} has no angle generator")


def apply_matrix(amps: np.ndarray, matrix: np.ndarray, targets, num_qubits: int) -> np.ndarray:
    """Apply a 2^k x 2^k unitary to the target qubits of a state array.

    Accepts amplitudes of shape (2^q,) or (2^q, batch); the first target is
    the most significant axis of the gate matrix.
    """
    targets = list(targets)
    k = len(targets)
    batched = amps.ndim == 2
    batch = amps.shape[1] if batched else 1
    psi = amps.reshape([2] * num_qubits + ([batch] if batched else []))
    psi = np.moveaxis(psi, targets, range(k))
    tail = psi.shape[k:]
    psi = matrix @ psi.reshape(2 ** k, -1)
    psi = np.moveaxis(psi.reshape([2] * k + list(tail)), range(k), targets)
    return psi.reshape(amps.shape)


# ---------------------------------------------------------------------------
# dense-lifted fast path for small registers
#
# For <= FAST_DENSE_QUBITS the full 2^q x 2^q operator of every gate is
# cached with the angle factored out through the generator identity
# exp(-i t G / 2) = (I - G^2) + cos(t/2) G^2 - i sin(t/2) G, which holds for
# every parameterized kind here (generator eigenvalues within {0, +1, -1}).
# ---------------------------------------------------------------------------

FAST_DENSE_QUBITS = 6

_STATIC_LIFT: dict = {}
_PARAM_LIFT: dict = {}
_PAULI_LIFT: dict = {}


def _lift_dense(matrix: np.ndarray, targets: tuple[int, ...], num_qubits: int) -> np.ndarray:
    k = len(targets)
    full = np.kron(matrix, np.eye(2 ** (num_qubits - k), dtype=complex))
    order = list(targets) + [q for q in range(num_qubits) if q not in targets]
    perm = [order.index(q) for q in range(num_qubits)]
    tensor = full.reshape([2] * (2 * num_qubits))
    tensor = tensor.transpose(perm + [num_qubits + p for p in perm])
    return np.ascontiguousarray(tensor.reshape(2 ** num_qubits, 2 ** num_qubits))


def _dense_gate(kind: str, targets: tuple[int, ...], angle: float | None, num_qubits: int) -> np.ndarray:
    key = (kind, targets, num_qubits)
    if kind in PARAMETERIZED_KINDS:
        entry = _PARAM_LIFT.get(key)
        if entry is None:
            gen = gate_generator(kind)
            proj = _lift_dense(gen @ gen, targets, num_qubits)
            entry = (
                np.eye(2 ** num_qubits, dtype=complex) - proj,
                proj,
                _lift_dense(gen, targets, num_qubits),
            )
            _PARAM_LIFT[key] = entry
        rest, proj, gen_full = entry
        half = 0.5 * angle
        return rest + math.cos(half) * proj + (-1j * math.sin(half)) * gen_full
    mat = _STATIC_LIFT.get(key)
    if mat is None:
        mat = _lift_dense(gate_matrix(kind), targets, num_qubits)
        _STATIC_LIFT[key] = mat
    return mat


def _dense_pauli(letter: str, qubit: int, num_qubits: int) -> np.ndarray:
    key = (letter, qubit, num_qubits)
    mat = _PAULI_LIFT.get(key)
    if mat is None:
        mat = _lift_dense(_PAULI[letter], (qubit,), num_qubits)
        _PAULI_LIFT[key] = mat
    return mat


def run_ops(
    num_qubits: int,
    resolved_ops,
    noise: "NoiseSpec | None" = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Apply (op, angle) pairs to |0...0>, returning raw amplitudes.

    The hot path for repeated circuit evaluation; dispatches to the dense
    cached operators on small registers.
    """
    amps = np.zeros(2 ** num_qubits, dtype=complex)
    amps[0] = 1.0
    noisy = noise is not None and noise.enabled and noise.depolarizing_prob > 0.0
    prob = noise.depolarizing_prob if noisy else 0.0
    if num_qubits <= FAST_DENSE_QUBITS:
        for op, angle in resolved_ops:
            amps = _dense_gate(op.kind, op.targets, angle, num_qubits) @ amps
            if noisy:
                for q in op.targets:
                    if rng.random() < prob:
                        amps = _dense_pauli(("X", "Y", "Z")[rng.integers(3)], q, num_qubits) @ amps
        return amps
    for op, angle in resolved_ops:
        amps = apply_matrix(amps, gate_matrix(op.kind, angle), op.targets, num_qubits)
        if noisy:
            for q in op.targets:
                if rng.random() < prob:
                    pauli = ("X", "Y", "Z")[rng.integers(3)]
                    amps = apply_matrix(amps, _PAULI[pauli], [q], num_qubits)
    return amps


def apply_gate(state: StateVector, gate, theta: float | None = None) -> StateVector:
    """Apply one gate; `gate` is a circuits.GateOp or a bare kind string."""
    kind, targets = _gate_fields(gate)
    for q in targets:
        if not 0 <= q < state.num_qubits:
            raise ValueError(f"gate target {q} out of range for {state.num_qubits} qubits")
    if len(set(targets)) != len(targets):
        raise ValueError(f"repeated gate target in {targets}")
    mat = gate_matrix(kind, theta)
    return StateVector(
        state.num_qubits, apply_matrix(state.amplitudes, mat, targets, state.num_qubits)
    )


def apply_noisy_gate(
    state: StateVector,
    gate,
    theta: float | None,
    noise: NoiseSpec,
    rng: int | np.random.Generator,
) -> StateVector:
    """Ideal gate, then one stochastic Pauli-error trajectory on its targets."""
    rng = as_rng(rng)
    out = apply_gate(state, gate, theta)
    if not noise.enabled or noise.depolarizing_prob == 0.0:
        return out
    _, targets = _gate_fields(gate)
    amps = out.amplitudes
    for q in targets:
        if rng.random() < noise.depolarizing_prob:
            pauli = ("X", "Y", "Z")[rng.integers(3)]
            amps = apply_matrix(amps, _PAULI[pauli], [q], out.num_qubits)
    return StateVector(out.num_qubits, amps)


def _gate_fields(gate) -> tuple[str, tuple[int, ...]]:
    if isinstance(gate, str):
        raise TypeError("pass a GateOp with targets, not a bare kind string")
    return gate.kind, tuple(gate.targets)


# ---------------------------------------------------------------------------
# expectations
# ---------------------------------------------------------------------------

def _z_signs(letters: str) -> np.ndarray:
    """Diagonal of a Z/I Pauli string as +/-1 over basis indices."""
    q = len(letters)
    idx = np.arange(2 ** q)
    signs = np.ones(2 ** q, dtype=float)
    for pos, p in enumerate(letters):
        if p == "Z":
            bit = (idx >> (q - 1 - pos)) & 1
            signs *= 1.0 - 2.0 * bit
    return signs


def apply_pauli_string(amps: np.ndarray, letters: str, num_qubits: int) -> np.ndarray:
    out = amps
    for q, p in enumerate(letters):
        if p != "I":
            out = apply_matrix(out, _PAULI[p], [q], num_qubits)
    return out


_OBS_MATRIX_CACHE: dict = {}


def _cached_observable_matrix(obs: Observable) -> np.ndarray:
    mat = _OBS_MATRIX_CACHE.get(obs)
    if mat is None:
        mat = observable_matrix(obs)
        if len(_OBS_MATRIX_CACHE) > 128:
            _OBS_MATRIX_CACHE.clear()
        _OBS_MATRIX_CACHE[obs] = mat
    return mat


def expectation(state: StateVector, obs: Observable) -> float:
    """Exact sum_t coeff_t * <psi|P_t|psi>."""
    if obs.num_qubits != state.num_qubits:
        raise ValueError(
            f"observable on {obs.num_qubits} qubits, state on {state.num_qubits}"
        )
    if obs.num_qubits <= FAST_DENSE_QUBITS:
        mat = _cached_observable_matrix(obs)
        return float(np.vdot(state.amplitudes, mat @ state.amplitudes).real)
    total = 0.0
    for term in obs.terms:
        acted = apply_pauli_string(state.amplitudes, term.letters, state.num_qubits)
        total += term.coefficient * np.vdot(state.amplitudes, acted).real
    return float(total)


def measurement_passes(obs: Observable) -> int:
    """Sampling passes one estimate costs: one shared pass for all Z/I terms
    plus one basis-rotated pass per term containing X or Y."""
    has_zgroup = any(set(t.letters) <= {"I", "Z"} for t in obs.terms)
    xy = sum(1 for t in obs.terms if not set(t.letters) <= {"I", "Z"})
    return int(has_zgroup) + xy


def _basis_rotated(state: StateVector, letters: str) -> np.ndarray:
    """Rotate so the term's X/Y factors become Z measurements."""
    amps = state.amplitudes
    for q, p in enumerate(letters):
        if p == "X":
            amps = apply_matrix(amps, _H, [q], state.num_qubits)
        elif p == "Y":
            amps = apply_matrix(amps, gate_matrix("RZ", -math.pi / 2), [q], state.num_qubits)
            amps = apply_matrix(amps, _H, [q], state.num_qubits)
    return amps


def sample_counts(amps: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Draw per-basis-state measurement counts for `shots` repetitions."""
    probs = np.abs(amps) ** 2
    return rng.multinomial(shots, probs / probs.sum())


def sample_expectation(
    state: StateVector,
    obs: Observable,
    cfg: ShotConfig,
    seed: int | np.random.Generator,
) -> float:
    """Unbiased m-shot estimate of `expectation`, deterministic per seed.

    All Z/I terms share one sampling pass; each X/Y term gets its own
    basis-rotated pass. One pass = one circuit execution of cfg.shots shots.
    """
    if cfg.mode != "sampled":
        raise ValueError("sample_expectation requires mode='sampled'")
    if obs.num_qubits != state.num_qubits:
        raise ValueError("observable and state qubit counts differ")
    rng = as_rng(seed)
    z_terms = [t for t in obs.terms if set(t.letters) <= {"I", "Z"}]
    xy_terms = [t for t in obs.terms if not set(t.letters) <= {"I", "Z"}]
    total = 0.0
    if z_terms:
        counts = sample_counts(state.amplitudes, cfg.shots, rng)
        for term in z_terms:
            total += term.coefficient * float(_z_signs(term.letters) @ counts) / cfg.shots
    for term in xy_terms:
        amps = _basis_rotated(state, term.letters)
        counts = sample_counts(amps, cfg.shots, rng)
        measured = "".join("Z" if p != "I" else "I" for p in term.letters)
        total += term.coefficient * float(_z_signs(measured) @ counts) / cfg.shots
    return total


def estimate_expectation(
    state: StateVector,
    obs: Observable,
    cfg: ShotConfig | None,
    seed: int | np.random.Generator | None = None,
) -> float:
    """Dispatch to exact or sampled estimation based on cfg."""
    if cfg is None or cfg.mode == "exact":
        return expectation(state, obs)
    return sample_expectation(state, obs, cfg, as_rng(seed))


# ---------------------------------------------------------------------------
# dense diagonalization oracle
# ---------------------------------------------------------------------------

def observable_matrix(obs: Observable) -> np.ndarray:
    if obs.num_qubits > DENSE_QUBIT_LIMIT:
        raise ValueError(
            f"dense matrix limited to {DENSE_QUBIT_LIMIT} qubits, got {obs.num_qubits}"
        )
    dim = 2 ** obs.num_qubits
    out = np.zeros((dim, dim), dtype=complex)
    for term in obs.terms:
        m = np.array([[term.coefficient]], dtype=complex)
        for p in term.letters:
            m = np.kron(m, _PAULI[p])
        out += m
    return out


def exact_ground_energy(obs: Observable) -> float:
    """Minimum eigenvalue of the dense Hermitian matrix of the Pauli sum."""
    return float(np.linalg.eigvalsh(observable_matrix(obs))[0])


# ---------------------------------------------------------------------------
# Hamiltonian file format: one `<coefficient> <letters>` per line,
# '#' starts a comment, all letter strings share one length
# ---------------------------------------------------------------------------

def parse_hamiltonian(text: str) -> Observable:
    terms: list[PauliTerm] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected '<coefficient> <letters>', got {raw!r}")
        try:
            coeff = float(parts[0])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad coefficient {parts[0]!r}") from exc
        terms.append(PauliTerm(coeff, parts[1]))
    if not terms:
        raise ValueError("empty Hamiltonian file")
    lengths = {t.num_qubits for t in terms}
    if len(lengths) != 1:
        raise ValueError(f"inconsistent Pauli string lengths {sorted(lengths)}")
    return Observable(lengths.pop(), tuple(terms))


def load_hamiltonian(path) -> Observable:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_hamiltonian(fh.read())


def transverse_field_ising(num_qubits: int, coupling: float = 1.0, field_strength: float = 1.0) -> Observable:
    """Open-chain transverse-field Ising Hamiltonian -J sum ZZ - h sum X."""
    if num_qubits < 2:
        raise ValueError("chain needs at least 2 qubits")
    terms = []
    for q in range(num_qubits - 1):
        letters = "".join("Z" if i in (q, q + 1) else "I" for i in range(num_qubits))
        terms.append(PauliTerm(-coupling, letters))
    for q in range(num_qubits):
        letters = "".join("X" if i == q else "I" for i in range(num_qubits))
        terms.append(PauliTerm(-field_strength, letters))
    return Observable(num_qubits, tuple(terms))
