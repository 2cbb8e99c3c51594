"""The three benchmark tasks behind one loss-evaluator shape.

MaxCut on random graphs via layered cost/mixer circuits, ground-state energy
of an ingested Pauli-sum Hamiltonian, and a hybrid classifier (angle-encoded
features, trainable circuit, per-qubit Z readout, linear softmax head).
Each task packages loss/metric evaluation, gradient computation with
execution accounting, and a brute-force or diagonalization oracle.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .circuits import (
    EncodingSpec,
    GateOp,
    GraphSpec,
    ParameterizedCircuit,
    build_encoder,
    build_hea,
    build_qaoa,
    build_uccsd,
    run_circuit,
)
from .gradients import GradientMethod, adjoint_gradient, spsa_gradient
from .sim import (
    NoiseSpec,
    Observable,
    PauliTerm,
    ShotConfig,
    apply_matrix,
    as_rng,
    estimate_expectation,
    exact_ground_energy,
    gate_generator,
    gate_matrix,
    measurement_passes,
    sample_counts,
)

BRUTE_FORCE_NODE_LIMIT = 24

# four-term shift-rule coefficients for gates whose generator has
# eigenvalues {0, +1, -1} (controlled rotations, excitation rotations)
_FOUR_TERM_PLUS = (math.sqrt(2.0) + 1.0) / (4.0 * math.sqrt(2.0))
_FOUR_TERM_MINUS = (math.sqrt(2.0) - 1.0) / (4.0 * math.sqrt(2.0))


def shift_recipe(kind: str) -> tuple[tuple[float, float], ...]:
    """(angle offset, coefficient) pairs whose weighted loss differences give
    the exact derivative with respect to a single gate occurrence's angle."""
    if kind in ("RX", "RY", "RZ", "RZZ"):
        return ((math.pi / 2, 0.5), (-math.pi / 2, -0.5))
    return (
        (math.pi / 2, _FOUR_TERM_PLUS),
        (-math.pi / 2, -_FOUR_TERM_PLUS),
        (3 * math.pi / 2, -_FOUR_TERM_MINUS),
        (-3 * math.pi / 2, _FOUR_TERM_MINUS),
    )


def _run_with_offsets(
    circuit: ParameterizedCircuit,
    params: np.ndarray,
    offsets: dict[int, float],
    features: np.ndarray | None = None,
    noise: NoiseSpec | None = None,
    rng: np.random.Generator | None = None,
):
    """run_circuit with additive angle offsets at given op positions."""
    resolved = []
    for pos, op in enumerate(circuit.prelude + circuit.ops):
        angle = op.resolve_angle(params, features)
        if pos in offsets:
            angle = (angle or 0.0) + offsets[pos]
        resolved.append((op, angle))
    from .sim import StateVector, run_ops

    return StateVector(circuit.num_qubits, run_ops(circuit.num_qubits, resolved, noise, rng))


def circuit_shift_gradient(
    circuit: ParameterizedCircuit,
    params: np.ndarray,
    loss_of_state,
    features: np.ndarray | None = None,
    noise: NoiseSpec | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, int]:
    """Parameter-shift gradient with per-occurrence shifts, exact for shared
    and scaled parameters. Returns (gradient, circuit evaluations used)."""
    params = np.asarray(params, dtype=float)
    grad = np.zeros(circuit.num_params)
    evals = 0
    for pos, op in enumerate(circuit.prelude + circuit.ops):
        if op.param_index is None:
            continue
        acc = 0.0
        for offset, coeff in shift_recipe(op.kind):
            state = _run_with_offsets(circuit, params, {pos: offset}, features, noise, rng)
            acc += coeff * loss_of_state(state)
            evals += 1
        grad[op.param_index] += op.angle_scale * acc
    return grad, evals


# ---------------------------------------------------------------------------
# scalar circuit-loss evaluator (MaxCut and energy tasks)
# ---------------------------------------------------------------------------

class CircuitLossEvaluator:
    """loss(theta) = sign * <obs> on the circuit output state.

    Exact mode runs no measured executions; sampled mode charges one
    execution per measurement pass. Deterministic given the generator handed
    in at construction.
    """

    def __init__(
        self,
        circuit: ParameterizedCircuit,
        obs: Observable,
        sign: float = 1.0,
        shot_cfg: ShotConfig | None = None,
        noise: NoiseSpec | None = None,
        rng: int | np.random.Generator | None = None,
    ) -> None:
        self.circuit = circuit
        self.obs = obs
        self.sign = sign
        self.shot_cfg = shot_cfg
        self.noise = noise
        self.rng = as_rng(rng)
        sampled = shot_cfg is not None and shot_cfg.mode == "sampled"
        self.circuit_executions_per_eval = measurement_passes(obs) if sampled else 0
        self.shots_per_execution = shot_cfg.shots if sampled else 0

    def loss_of_state(self, state) -> float:
        return self.sign * estimate_expectation(state, self.obs, self.shot_cfg, self.rng)

    def __call__(self, theta: np.ndarray) -> float:
        state = run_circuit(self.circuit, theta, noise=self.noise, rng=self.rng)
        return self.loss_of_state(state)

    def gradient(self, theta: np.ndarray, method: GradientMethod) -> tuple[np.ndarray, int]:
        """Returns (gradient, measured circuit executions)."""
        theta = np.asarray(theta, dtype=float)
        per_eval = self.circuit_executions_per_eval
        if method.kind == "exact_shift":
            _, grad = adjoint_gradient(self.circuit, theta, self.obs)
            return self.sign * grad, 0
        if method.kind == "spsa":
            grad = spsa_gradient(self, theta, method, self.rng)
            return grad, 2 * per_eval
        if method.kind == "finite_diff":
            from .gradients import finite_diff_gradient

            grad = finite_diff_gradient(self, theta, method.fd_h)
            return grad, 2 * theta.size * per_eval
        grad, evals = circuit_shift_gradient(
            self.circuit, theta, self.loss_of_state, noise=self.noise, rng=self.rng
        )
        return grad, evals * per_eval


# ---------------------------------------------------------------------------
# graphs and MaxCut
# ---------------------------------------------------------------------------

def generate_erdos_renyi(n: int, edge_prob: float, seed: int | np.random.Generator) -> GraphSpec:
    """Each unordered pair joins independently with edge_prob; edgeless draws
    are regenerated, failing after 100 attempts."""
    if n < 2:
        raise ValueError("need at least 2 nodes")
    if not 0.0 <= edge_prob <= 1.0:
        raise ValueError("edge probability must lie in [0, 1]")
    rng = as_rng(seed)
    for _ in range(100):
        edges = tuple(
            (u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < edge_prob
        )
        if edges:
            return GraphSpec(n, edges)
    raise ValueError("could not draw a graph with at least one edge")


def cut_value(graph: GraphSpec, assignment) -> int:
    bits = list(assignment)
    return sum(1 for u, v in graph.edges if bits[u] != bits[v])


def brute_force_maxcut(graph: GraphSpec) -> int:
    """Maximum crossing-edge count over all bipartitions (node 0 side fixed)."""
    n = graph.num_nodes
    if n > BRUTE_FORCE_NODE_LIMIT:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_NODE_LIMIT} nodes")
    masks = np.arange(1 << (n - 1), dtype=np.int64)
    cuts = np.zeros(masks.size, dtype=np.int64)
    for u, v in graph.edges:
        bu = (masks >> (u - 1)) & 1 if u > 0 else np.zeros_like(masks)
        bv = (masks >> (v - 1)) & 1 if v > 0 else np.zeros_like(masks)
        cuts += bu ^ bv
    return int(cuts.max())


def cut_observable(graph: GraphSpec) -> Observable:
    """sum over edges of (1 - Z_u Z_v) / 2 as a Pauli sum."""
    n = graph.num_nodes
    terms = [PauliTerm(0.5 * len(graph.edges), "I" * n)]
    for u, v in graph.edges:
        letters = "".join("Z" if q in (u, v) else "I" for q in range(n))
        terms.append(PauliTerm(-0.5, letters))
    return Observable(n, tuple(terms))


@dataclass(frozen=True)
class MaxCutTask:
    graph: GraphSpec
    depth: int
    circuit: ParameterizedCircuit
    true_maxcut: int

    @property
    def observable(self) -> Observable:
        return cut_observable(self.graph)


def make_maxcut_task(graph: GraphSpec, depth: int) -> MaxCutTask:
    return MaxCutTask(graph, depth, build_qaoa(graph, depth), brute_force_maxcut(graph))


def cut_expectation(
    theta: np.ndarray,
    task: MaxCutTask,
    shot_cfg: ShotConfig | None = None,
    seed: int | np.random.Generator | None = None,
    noise: NoiseSpec | None = None,
) -> float:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (2 * task.depth,):
        raise ValueError(f"expected {2 * task.depth} parameters, got {theta.shape}")
    rng = as_rng(seed)
    state = run_circuit(task.circuit, theta, noise=noise, rng=rng)
    return estimate_expectation(state, task.observable, shot_cfg, rng)


def best_sampled_cut(
    theta: np.ndarray, task: MaxCutTask, shots: int, seed: int | np.random.Generator
) -> int:
    """Largest cut among `shots` bitstrings sampled from the output state."""
    rng = as_rng(seed)
    state = run_circuit(task.circuit, np.asarray(theta, dtype=float))
    probs = state.probabilities()
    samples = rng.choice(probs.size, size=shots, p=probs / probs.sum())
    n = task.graph.num_nodes
    best = 0
    for idx in np.unique(samples):
        bits = [(int(idx) >> (n - 1 - q)) & 1 for q in range(n)]
        best = max(best, cut_value(task.graph, bits))
    return best


# ---------------------------------------------------------------------------
# ground-state energy task
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VqeTask:
    hamiltonian: Observable
    ansatz: ParameterizedCircuit
    convergence_tol: float
    exact_energy: float


def make_vqe_task(
    hamiltonian: Observable,
    ansatz: str = "uccsd",
    num_electrons: int | None = None,
    layers: int = 1,
    convergence_tol: float = 1e-6,
) -> VqeTask:
    q = hamiltonian.num_qubits
    if ansatz == "uccsd":
        circuit = build_uccsd(q, num_electrons if num_electrons is not None else q // 2)
    elif ansatz == "hea":
        circuit = build_hea(q, layers)
    else:
        raise ValueError(f"unknown ansatz {ansatz!r}")
    return VqeTask(hamiltonian, circuit, convergence_tol, exact_ground_energy(hamiltonian))


def vqe_energy(
    theta: np.ndarray,
    task: VqeTask,
    shot_cfg: ShotConfig | None = None,
    seed: int | np.random.Generator | None = None,
    noise: NoiseSpec | None = None,
) -> float:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (task.ansatz.num_params,):
        raise ValueError(f"expected {task.ansatz.num_params} parameters, got {theta.shape}")
    rng = as_rng(seed)
    state = run_circuit(task.ansatz, theta, noise=noise, rng=rng)
    return estimate_expectation(state, task.hamiltonian, shot_cfg, rng)


def occupation_observable(num_qubits: int) -> Observable:
    """Total occupation sum_q (I - Z_q) / 2."""
    terms = [PauliTerm(0.5 * num_qubits, "I" * num_qubits)]
    for q in range(num_qubits):
        letters = "".join("Z" if i == q else "I" for i in range(num_qubits))
        terms.append(PauliTerm(-0.5, letters))
    return Observable(num_qubits, tuple(terms))


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    train_idx: np.ndarray
    test_idx: np.ndarray

    def __post_init__(self) -> None:
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("feature and label row counts differ")
        if np.intersect1d(self.train_idx, self.test_idx).size:
            raise ValueError("train/test splits overlap")

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1


def _split(n: int, seed: int, train_fraction: float = 0.7) -> tuple[np.ndarray, np.ndarray]:
    order = np.random.default_rng(np.random.SeedSequence([int(seed), 7])).permutation(n)
    cut = int(train_fraction * n)
    return order[:cut], order[cut:]


def synth_blobs(classes: int, dim: int, n: int, spread: float, seed: int) -> Dataset:
    """Gaussian class blobs around uniformly drawn centers, 70/30 split."""
    if classes < 2:
        raise ValueError("need at least 2 classes")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 11]))
    centers = rng.uniform(-1.5, 1.5, size=(classes, dim))
    labels = np.arange(n) % classes
    labels = rng.permutation(labels)
    features = centers[labels] + rng.normal(0.0, spread, size=(n, dim))
    train_idx, test_idx = _split(n, seed)
    return Dataset(features, labels.astype(int), train_idx, test_idx)


def load_dataset_csv(path, seed: int = 0) -> Dataset:
    """CSV with header f1,...,fd,label; deterministic 70/30 split per seed."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError("empty dataset file")
        header = [h.strip() for h in header]
        if header[-1] != "label" or header[:-1] != [f"f{i + 1}" for i in range(len(header) - 1)]:
            raise ValueError(f"expected header f1,...,fd,label, got {header}")
        dim = len(header) - 1
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != dim + 1:
                raise ValueError(f"row {lineno}: expected {dim + 1} fields, got {len(row)}")
            try:
                rows.append([float(x) for x in row[:-1]])
                label = int(row[-1])
            except ValueError as exc:
                raise ValueError(f"row {lineno}: malformed value") from exc
            if label < 0:
                raise ValueError(f"row {lineno}: label {label} out of range")
            labels.append(label)
    if not rows:
        raise ValueError("dataset has no rows")
    features = np.asarray(rows, dtype=float)
    labels_arr = np.asarray(labels, dtype=int)
    train_idx, test_idx = _split(features.shape[0], seed)
    return Dataset(features, labels_arr, train_idx, test_idx)


# ---------------------------------------------------------------------------
# hybrid classifier task
# ---------------------------------------------------------------------------

@dataclass
class QnnTask:
    dataset: Dataset
    encoder: EncodingSpec
    pqc: ParameterizedCircuit          # encoder prelude + trainable ops
    num_classes: int
    batch_size: int = 32
    quantum_params: np.ndarray | None = None
    head_weights: np.ndarray | None = None  # (num_qubits, num_classes)
    head_bias: np.ndarray | None = None

    def __post_init__(self) -> None:
        expected = self.pqc.num_qubits * self.encoder.features_per_qubit
        if self.dataset.dim != expected:
            raise ValueError(
                f"dataset dimension {self.dataset.dim} != qubits x features/qubit = {expected}"
            )
        if self.dataset.num_classes > self.num_classes:
            raise ValueError("labels exceed configured class count")

    @property
    def num_qubits(self) -> int:
        return self.pqc.num_qubits

    @property
    def num_quantum_params(self) -> int:
        return self.pqc.num_params

    @property
    def num_weights(self) -> int:
        return self.num_quantum_params + self.num_qubits * self.num_classes + self.num_classes

    def flat_weights(self) -> np.ndarray:
        return np.concatenate(
            [self.quantum_params, self.head_weights.ravel(), self.head_bias]
        )

    def set_flat_weights(self, theta: np.ndarray) -> None:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.num_weights,):
            raise ValueError(f"expected {self.num_weights} weights, got {theta.shape}")
        nq = self.num_quantum_params
        nw = self.num_qubits * self.num_classes
        self.quantum_params = theta[:nq].copy()
        self.head_weights = theta[nq:nq + nw].reshape(self.num_qubits, self.num_classes).copy()
        self.head_bias = theta[nq + nw:].copy()


def make_qnn_task(
    dataset: Dataset,
    num_qubits: int,
    layers: int = 1,
    num_classes: int | None = None,
    encoding: EncodingSpec | None = None,
    batch_size: int = 32,
) -> QnnTask:
    encoding = encoding or EncodingSpec()
    hea = build_hea(num_qubits, layers)
    circuit = ParameterizedCircuit(
        num_qubits, build_encoder(num_qubits, encoding), hea.ops, hea.num_params
    )
    classes = num_classes if num_classes is not None else dataset.num_classes
    return QnnTask(dataset, encoding, circuit, classes, batch_size)


def init_qnn_weights(task: QnnTask, rng: int | np.random.Generator) -> np.ndarray:
    """Quantum angles uniform(-pi/2, pi/2), head uniform(-0.5, 0.5), zero bias."""
    rng = as_rng(rng)
    quantum = rng.uniform(-math.pi / 2, math.pi / 2, size=task.num_quantum_params)
    head = rng.uniform(-0.5, 0.5, size=task.num_qubits * task.num_classes)
    return np.concatenate([quantum, head, np.zeros(task.num_classes)])


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def _z_sign_table(num_qubits: int) -> np.ndarray:
    """(num_qubits, 2^q) table of Z eigenvalues per basis index."""
    idx = np.arange(2 ** num_qubits)
    return np.stack(
        [1.0 - 2.0 * ((idx >> (num_qubits - 1 - q)) & 1) for q in range(num_qubits)]
    )


def _encode_batch(task: QnnTask, features: np.ndarray) -> np.ndarray:
    """Batched encoder: returns amplitudes of shape (2^q, batch)."""
    q = task.num_qubits
    batch = features.shape[0]
    amps = np.zeros((2 ** q, batch), dtype=complex)
    amps[0, :] = 1.0
    idx = np.arange(2 ** q)
    for op in task.pqc.prelude:
        if op.kind == "H":
            amps = apply_matrix(amps, gate_matrix("H"), op.targets, q)
        elif op.kind == "RZ" and op.feature_index is not None:
            target = op.targets[0]
            signs = 1.0 - 2.0 * ((idx >> (q - 1 - target)) & 1)
            angles = features[:, op.feature_index]
            amps = amps * np.exp(-0.5j * np.outer(signs, angles))
        else:
            angle = op.resolve_angle(np.empty(0), None)
            amps = apply_matrix(amps, gate_matrix(op.kind, angle), op.targets, q)
    return amps


def _run_pqc_batch(task: QnnTask, encoded: np.ndarray, quantum: np.ndarray) -> np.ndarray:
    amps = encoded
    for op in task.pqc.ops:
        angle = op.resolve_angle(quantum, None)
        amps = apply_matrix(amps, gate_matrix(op.kind, angle), op.targets, task.num_qubits)
    return amps


def _z_values_batch(amps: np.ndarray, num_qubits: int) -> np.ndarray:
    probs = np.abs(amps) ** 2
    return _z_sign_table(num_qubits) @ probs


def _adjoint_z_jacobian_batch(
    task: QnnTask, encoded: np.ndarray, quantum: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Exact per-qubit Z expectations and their Jacobian for a batch.

    Returns zvals (q, batch) and jacobian (q, num_quantum_params, batch).
    """
    q = task.num_qubits
    batch = encoded.shape[1]
    ops = task.pqc.ops
    psi = encoded
    mats = []
    for op in ops:
        mat = gate_matrix(op.kind, op.resolve_angle(quantum, None))
        mats.append(mat)
        psi = apply_matrix(psi, mat, op.targets, q)
    signs = _z_sign_table(q)
    zvals = signs @ (np.abs(psi) ** 2)
    # lam[j] = Z_j |psi>, flattened over observables for batched gate applies
    lam = (signs[:, :, None] * psi[None, :, :]).reshape(q * 1, 2 ** q, batch)
    lam = np.ascontiguousarray(np.moveaxis(lam, 0, 2)).reshape(2 ** q, batch * q)
    jac = np.zeros((q, task.num_quantum_params, batch))
    for op, mat in zip(reversed(ops), reversed(mats)):
        if op.param_index is not None:
            gen = gate_generator(op.kind)
            g_psi = apply_matrix(psi, gen, op.targets, q)
            lam_view = lam.reshape(2 ** q, batch, q)
            inner = np.einsum("ibj,ib->jb", lam_view.conj(), g_psi)
            jac[:, op.param_index, :] += op.angle_scale * inner.imag
        inv = mat.conj().T
        psi = apply_matrix(psi, inv, op.targets, q)
        lam = apply_matrix(lam, inv, op.targets, q)
    return zvals, jac


def _z_values_single(
    task: QnnTask,
    features: np.ndarray,
    quantum: np.ndarray,
    shot_cfg: ShotConfig | None,
    noise: NoiseSpec | None,
    rng: np.random.Generator,
    angle_offsets: dict[int, float] | None = None,
) -> np.ndarray:
    """Per-qubit Z expectations for one sample; one sampling pass when sampled."""
    state = _run_with_offsets(
        task.pqc, quantum, angle_offsets or {}, features=features, noise=noise, rng=rng
    )
    signs = _z_sign_table(task.num_qubits)
    if shot_cfg is None or shot_cfg.mode == "exact":
        return signs @ state.probabilities()
    counts = sample_counts(state.amplitudes, shot_cfg.shots, rng)
    return (signs @ counts) / shot_cfg.shots


def qnn_forward(
    features: np.ndarray,
    task: QnnTask,
    shot_cfg: ShotConfig | None = None,
    seed: int | np.random.Generator | None = None,
    noise: NoiseSpec | None = None,
) -> np.ndarray:
    """Encode -> circuit -> per-qubit <Z> -> linear head -> softmax."""
    features = np.asarray(features, dtype=float)
    if features.shape != (task.dataset.dim,):
        raise ValueError(f"expected {task.dataset.dim} features, got {features.shape}")
    z = _z_values_single(task, features, task.quantum_params, shot_cfg, noise, as_rng(seed))
    logits = task.head_weights.T @ z + task.head_bias
    return softmax(logits)


def qnn_test_metrics(task: QnnTask) -> tuple[float, float]:
    """Exact held-out (cross-entropy, accuracy) at the current weights."""
    X = task.dataset.features[task.dataset.test_idx]
    y = task.dataset.labels[task.dataset.test_idx]
    encoded = _encode_batch(task, X)
    amps = _run_pqc_batch(task, encoded, task.quantum_params)
    z = _z_values_batch(amps, task.num_qubits)
    logits = task.head_weights.T @ z + task.head_bias[:, None]
    probs = softmax(logits, axis=0)
    picked = np.clip(probs[y, np.arange(y.size)], 1e-12, None)
    loss = float(-np.log(picked).mean())
    accuracy = float((probs.argmax(axis=0) == y).mean())
    return loss, accuracy


def _head_grads_from_z(
    task: QnnTask, z: np.ndarray, y: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Loss, dL/dz, dL/dW, dL/db for a batch given per-sample z columns."""
    batch = y.size
    logits = task.head_weights.T @ z + task.head_bias[:, None]
    probs = softmax(logits, axis=0)
    picked = np.clip(probs[y, np.arange(batch)], 1e-12, None)
    loss = float(-np.log(picked).mean())
    dlogits = probs.copy()
    dlogits[y, np.arange(batch)] -= 1.0
    dlogits /= batch
    grad_w = z @ dlogits.T                  # (q, classes)
    grad_b = dlogits.sum(axis=1)
    dz = task.head_weights @ dlogits        # (q, batch)
    return loss, dz, grad_w, grad_b


def qnn_loss_and_grad(
    batch: tuple[np.ndarray, np.ndarray],
    task: QnnTask,
    grad_method: GradientMethod,
    shot_cfg: ShotConfig | None = None,
    seed: int | np.random.Generator | None = None,
    noise: NoiseSpec | None = None,
) -> tuple[float, np.ndarray, tuple[np.ndarray, np.ndarray], int]:
    """Batch-mean cross-entropy with analytic head gradients and chain-rule
    quantum gradients dL/dtheta = sum_j (dL/d<Z_j>) (d<Z_j>/dtheta).

    Returns (loss, quantum grads, (head weight grads, bias grads), measured
    circuit executions).
    """
    X, y = batch
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.size == 0:
        raise ValueError("empty batch")
    rng = as_rng(seed)
    quantum = task.quantum_params
    sampled = shot_cfg is not None and shot_cfg.mode == "sampled"
    noisy = noise is not None and noise.enabled

    if grad_method.kind == "exact_shift" and not sampled and not noisy:
        encoded = _encode_batch(task, X)
        zvals, jac = _adjoint_z_jacobian_batch(task, encoded, quantum)
        loss, dz, grad_w, grad_b = _head_grads_from_z(task, zvals, y)
        qgrad = np.einsum("jb,jkb->k", dz, jac)
        return loss, qgrad, (grad_w, grad_b), 0

    batch_n = y.size
    executions = 0
    z0 = np.empty((task.num_qubits, batch_n))
    for b in range(batch_n):
        z0[:, b] = _z_values_single(task, X[b], quantum, shot_cfg, noise, rng)
    executions += batch_n if sampled else 0
    loss, dz, grad_w, grad_b = _head_grads_from_z(task, z0, y)

    qgrad = np.zeros(task.num_quantum_params)
    if grad_method.kind == "spsa":
        c = grad_method.spsa_c
        for b in range(batch_n):
            delta = rng.choice([-1.0, 1.0], size=task.num_quantum_params)
            z_plus = _z_values_single(task, X[b], quantum + c * delta, shot_cfg, noise, rng)
            z_minus = _z_values_single(task, X[b], quantum - c * delta, shot_cfg, noise, rng)
            jac_dir = (z_plus - z_minus) / (2.0 * c)     # dz/d(direction)
            qgrad += (dz[:, b] @ jac_dir) / delta
            executions += 2 if sampled else 0
        return loss, qgrad, (grad_w, grad_b), executions

    if grad_method.kind in ("param_shift_sampled", "exact_shift"):
        ops = task.pqc.prelude + task.pqc.ops
        for b in range(batch_n):
            for pos, op in enumerate(ops):
                if op.param_index is None:
                    continue
                acc = np.zeros(task.num_qubits)
                for offset, coeff in shift_recipe(op.kind):
                    z_off = _z_values_single(
                        task, X[b], quantum, shot_cfg, noise, rng, {pos: offset}
                    )
                    acc += coeff * z_off
                    executions += 1 if sampled else 0
                qgrad[op.param_index] += op.angle_scale * (dz[:, b] @ acc)
        return loss, qgrad, (grad_w, grad_b), executions

    if grad_method.kind == "finite_diff":
        h = grad_method.fd_h
        for b in range(batch_n):
            for k in range(task.num_quantum_params):
                shifted = quantum.copy()
                shifted[k] += h
                z_plus = _z_values_single(task, X[b], shifted, shot_cfg, noise, rng)
                shifted[k] -= 2 * h
                z_minus = _z_values_single(task, X[b], shifted, shot_cfg, noise, rng)
                qgrad[k] += dz[:, b] @ ((z_plus - z_minus) / (2.0 * h))
                executions += 2 if sampled else 0
        return loss, qgrad, (grad_w, grad_b), executions

    raise ValueError(f"unknown gradient kind {grad_method.kind!r}")


def qnn_training_batches(dataset: Dataset, batch_size: int, seed: int) -> list[np.ndarray]:
    """Fixed batch partition of the training split, shuffled once per seed."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 13]))
    order = dataset.train_idx[rng.permutation(dataset.train_idx.size)]
    return [order[i:i + batch_size] for i in range(0, order.size, batch_size)]
