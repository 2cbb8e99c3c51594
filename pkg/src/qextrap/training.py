"""Training loop with prediction dispatch, plus comparison metrics.

Window discipline (tested): between consecutive predictions there are exactly
p-1 optimizer epochs whose output weight vectors fill the fit window; the
weight in force immediately after a prediction never enters any window, and
neither do the initial weights. A prediction replaces the optimizer step on
every p-th epoch once the window is full, charging zero executions and zero
shots. With fewer than p epochs a run is plain optimizer training.

Cost counters: cumulative_executions counts measured circuit executions (one
sampling pass of m shots each); exact-mode evaluation is analytic and charges
nothing. The coarse lower bound mirrors iterations x m (x training samples
for the classifier), excluding gradient executions.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .circuits import load_graph
from .gradients import GradientMethod, make_optimizer, optimizer_step
from .predictor import PredictorConfig, predict_weights
from .sim import NoiseSpec, ShotConfig, load_hamiltonian
from .tasks import (
    CircuitLossEvaluator,
    MaxCutTask,
    QnnTask,
    VqeTask,
    generate_erdos_renyi,
    init_qnn_weights,
    load_dataset_csv,
    make_maxcut_task,
    make_qnn_task,
    make_vqe_task,
    qnn_loss_and_grad,
    qnn_test_metrics,
    qnn_training_batches,
    synth_blobs,
)

TASKS = ("qaoa", "vqe", "qnn")
METHODS = ("vanilla", "nap", "adap")

# seed-stream labels; every run derives independent generators from
# (seed, label) so that methods sharing a seed share initial weights and data
_STREAM_INIT = 0
_STREAM_GRAPH = 1
_STREAM_DATA = 2
_STREAM_TRAIN = 3


@dataclass(frozen=True)
class QaoaParams:
    nodes: int = 4
    edge_prob: float = 0.6
    depth: int = 1
    graph_file: str | None = None


@dataclass(frozen=True)
class VqeParams:
    hamiltonian_file: str = ""
    ansatz: str = "uccsd"
    num_electrons: int | None = None
    layers: int = 1
    convergence_tol: float = 1e-6


@dataclass(frozen=True)
class QnnParams:
    classes: int = 4
    dim: int = 8
    samples: int = 1000
    spread: float = 0.25
    qubits: int = 4
    layers: int = 1
    features_per_qubit: int = 2
    batch_size: int = 32
    csv_file: str | None = None
    predict_scope: str = "all"  # all | quantum


@dataclass(frozen=True)
class RunConfig:
    task: str
    method: str = "vanilla"
    epochs: int = 100
    seed: int = 0
    optimizer: str = "sgd"
    learning_rate: float = 0.1
    grad: GradientMethod = field(default_factory=GradientMethod)
    predictor: PredictorConfig = field(default_factory=PredictorConfig)
    shots: ShotConfig = field(default_factory=ShotConfig)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    predict_enabled: bool = True
    qaoa: QaoaParams | None = None
    vqe: VqeParams | None = None
    qnn: QnnParams | None = None

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")

    def task_params(self):
        return {"qaoa": self.qaoa, "vqe": self.vqe, "qnn": self.qnn}[self.task]


@dataclass(frozen=True)
class RunRecord:
    epoch: int
    loss: float
    metric: float
    was_prediction: bool
    cumulative_executions: int
    cumulative_shots: int


def _stream(seed: int, label: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(label)]))


# ---------------------------------------------------------------------------
# core epoch loop
# ---------------------------------------------------------------------------

def run_epochs(
    theta0: np.ndarray,
    epochs: int,
    method: str,
    predictor_cfg: PredictorConfig,
    step_fn,
    record_fn,
    stop_fn=None,
    predict_enabled: bool = True,
    predict_mask: np.ndarray | None = None,
) -> tuple[list[RunRecord], np.ndarray]:
    """Drive epochs 1..E with the prediction schedule.

    step_fn(epoch, theta) -> (theta', executions, shots) performs one
    optimizer epoch; record_fn(epoch, theta, was_prediction, cum_exec,
    cum_shots) -> RunRecord evaluates bookkeeping metrics; stop_fn(records)
    may end the run early. predict_mask limits predictions to a weight slice
    (untouched weights keep their current values at prediction epochs).
    """
    theta = np.asarray(theta0, dtype=float).copy()
    p = predictor_cfg.p
    window: list[np.ndarray] = []
    records: list[RunRecord] = []
    cum_exec = 0
    cum_shots = 0
    for epoch in range(1, epochs + 1):
        predicting = (
            method != "vanilla"
            and predict_enabled
            and epoch % p == 0
            and len(window) == p - 1
        )
        if predicting:
            predicted = predict_weights(np.asarray(window), epoch, predictor_cfg)
            theta = predicted if predict_mask is None else np.where(predict_mask, predicted, theta)
            window.clear()
        else:
            theta, executions, shots = step_fn(epoch, theta)
            cum_exec += executions
            cum_shots += shots
            window.append(theta.copy())
            if len(window) > p - 1:
                window.pop(0)
        records.append(record_fn(epoch, theta, predicting, cum_exec, cum_shots))
        if stop_fn is not None and stop_fn(records):
            break
    return records, theta


# ---------------------------------------------------------------------------
# task runtimes
# ---------------------------------------------------------------------------

def build_qaoa_task(cfg: RunConfig) -> MaxCutTask:
    params = cfg.qaoa or QaoaParams()
    if params.graph_file:
        graph = load_graph(params.graph_file)
    else:
        graph = generate_erdos_renyi(params.nodes, params.edge_prob, _stream(cfg.seed, _STREAM_GRAPH))
    return make_maxcut_task(graph, params.depth)


def build_vqe_task(cfg: RunConfig) -> VqeTask:
    params = cfg.vqe
    if params is None or not params.hamiltonian_file:
        raise ValueError("vqe task needs a Hamiltonian file")
    hamiltonian = load_hamiltonian(params.hamiltonian_file)
    return make_vqe_task(
        hamiltonian, params.ansatz, params.num_electrons, params.layers, params.convergence_tol
    )


def build_qnn_task(cfg: RunConfig) -> QnnTask:
    params = cfg.qnn or QnnParams()
    if params.csv_file:
        dataset = load_dataset_csv(params.csv_file, seed=cfg.seed)
    else:
        dataset = synth_blobs(params.classes, params.dim, params.samples, params.spread, cfg.seed)
    from .circuits import EncodingSpec

    return make_qnn_task(
        dataset,
        params.qubits,
        params.layers,
        params.classes if not params.csv_file else dataset.num_classes,
        EncodingSpec(features_per_qubit=params.features_per_qubit),
        params.batch_size,
    )


def _sampled(cfg: RunConfig) -> bool:
    return cfg.shots.mode == "sampled"


def _shots_per_execution(cfg: RunConfig) -> int:
    return cfg.shots.shots if _sampled(cfg) else 0


def _circuit_runtime(cfg: RunConfig, circuit, obs, sign: float, metric_fn):
    """step/record closures shared by the MaxCut and energy tasks."""
    shot_cfg = cfg.shots if _sampled(cfg) else None
    noise = cfg.noise if cfg.noise.enabled else None
    evaluator = CircuitLossEvaluator(
        circuit, obs, sign=sign, shot_cfg=shot_cfg, noise=noise, rng=_stream(cfg.seed, _STREAM_TRAIN)
    )
    exact_eval = CircuitLossEvaluator(circuit, obs, sign=sign)
    opt_state = make_optimizer(cfg.optimizer, cfg.learning_rate, circuit.num_params)
    per_shot = _shots_per_execution(cfg)

    def step_fn(epoch: int, theta: np.ndarray):
        nonlocal opt_state
        grad, executions = evaluator.gradient(theta, cfg.grad)
        theta_new, opt_state = optimizer_step(opt_state, theta, grad)
        return theta_new, executions, executions * per_shot

    def record_fn(epoch, theta, was_prediction, cum_exec, cum_shots):
        loss = exact_eval(theta)
        return RunRecord(epoch, loss, metric_fn(theta, loss), was_prediction, cum_exec, cum_shots)

    return step_fn, record_fn


def _qnn_runtime(cfg: RunConfig, task: QnnTask, theta0: np.ndarray):
    shot_cfg = cfg.shots if _sampled(cfg) else None
    noise = cfg.noise if cfg.noise.enabled else None
    rng = _stream(cfg.seed, _STREAM_TRAIN)
    batches = qnn_training_batches(task.dataset, task.batch_size, cfg.seed)
    opt_state = make_optimizer(cfg.optimizer, cfg.learning_rate, theta0.size)
    per_shot = _shots_per_execution(cfg)
    scope = (cfg.qnn or QnnParams()).predict_scope
    nq = task.num_quantum_params

    def step_fn(epoch: int, theta: np.ndarray):
        nonlocal opt_state
        task.set_flat_weights(theta)
        executions = 0
        for batch_idx in batches:
            X = task.dataset.features[batch_idx]
            y = task.dataset.labels[batch_idx]
            _, qgrad, (grad_w, grad_b), execs = qnn_loss_and_grad(
                (X, y), task, cfg.grad, shot_cfg, rng, noise
            )
            executions += execs
            grad = np.concatenate([qgrad, grad_w.ravel(), grad_b])
            theta, opt_state = optimizer_step(opt_state, task.flat_weights(), grad)
            task.set_flat_weights(theta)
        return task.flat_weights(), executions, executions * per_shot

    def record_fn(epoch, theta, was_prediction, cum_exec, cum_shots):
        task.set_flat_weights(theta)
        loss, accuracy = qnn_test_metrics(task)
        return RunRecord(epoch, loss, accuracy, was_prediction, cum_exec, cum_shots)

    return step_fn, record_fn, scope, nq


def initial_weights(cfg: RunConfig, task) -> np.ndarray:
    rng = _stream(cfg.seed, _STREAM_INIT)
    if cfg.task == "qaoa":
        return rng.uniform(0.0, np.pi / 2, size=task.circuit.num_params)
    if cfg.task == "vqe":
        return np.zeros(task.ansatz.num_params)
    return init_qnn_weights(task, rng)


def build_task(cfg: RunConfig):
    if cfg.task == "qaoa":
        return build_qaoa_task(cfg)
    if cfg.task == "vqe":
        return build_vqe_task(cfg)
    return build_qnn_task(cfg)


def train(cfg: RunConfig, task=None) -> list[RunRecord]:
    """Run one configured training and return its per-epoch records."""
    records, _ = train_with_weights(cfg, task)
    return records


def train_with_weights(cfg: RunConfig, task=None) -> tuple[list[RunRecord], np.ndarray]:
    """As train(), additionally returning the final weight vector."""
    if task is None:
        task = build_task(cfg)
    theta0 = initial_weights(cfg, task)
    stop_fn = None
    predict_mask = None
    if cfg.task == "qaoa":
        metric = lambda theta, loss: -loss / task.true_maxcut
        step_fn, record_fn = _circuit_runtime(
            cfg, task.circuit, task.observable, -1.0, metric
        )
    elif cfg.task == "vqe":
        metric = lambda theta, loss: loss
        step_fn, record_fn = _circuit_runtime(
            cfg, task.ansatz, task.hamiltonian, 1.0, metric
        )
        tol = task.convergence_tol

        def stop_fn(records: list[RunRecord]) -> bool:
            return len(records) >= 2 and abs(records[-1].loss - records[-2].loss) < tol

    else:
        step_fn, record_fn, scope, nq = _qnn_runtime(cfg, task, theta0)
        if scope == "quantum":
            predict_mask = np.zeros(theta0.size, dtype=bool)
            predict_mask[:nq] = True
    return run_epochs(
        theta0,
        cfg.epochs,
        cfg.method,
        cfg.predictor,
        step_fn,
        record_fn,
        stop_fn=stop_fn,
        predict_enabled=cfg.predict_enabled,
        predict_mask=predict_mask,
    )


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def speedup(
    vanilla: list[RunRecord],
    dypp: list[RunRecord],
    better_is_lower: bool = True,
    key: str = "loss",
) -> float:
    """Best-epoch ratio e_v / e_p; 0.0 when the compared run never reaches
    the vanilla run's best value."""
    if not vanilla or not dypp:
        raise ValueError("speedup needs non-empty record streams")
    v_values = np.array([getattr(r, key) for r in vanilla], dtype=float)
    d_values = np.array([getattr(r, key) for r in dypp], dtype=float)
    if not better_is_lower:
        v_values, d_values = -v_values, -d_values
    best = v_values.min()
    e_v = vanilla[int(v_values.argmin())].epoch
    reached = np.nonzero(d_values <= best)[0]
    if reached.size == 0:
        return 0.0
    e_p = dypp[int(reached[0])].epoch
    return e_v / e_p


def convergence_rate(
    records: list[RunRecord],
    window: tuple[int, int] | None = None,
    key: str = "loss",
) -> float:
    """|slope| of the least-squares line through (epoch, value) pairs inside
    the inclusive epoch window."""
    if window is not None:
        start, end = window
        chosen = [r for r in records if start <= r.epoch <= end]
    else:
        chosen = list(records)
    if len(chosen) < 2:
        raise ValueError("convergence window needs at least 2 records")
    x = np.array([r.epoch for r in chosen], dtype=float)
    y = np.array([getattr(r, key) for r in chosen], dtype=float)
    slope = np.polyfit(x, y, 1)[0]
    return float(abs(slope))


def _qnn_train_size(cfg: RunConfig) -> int:
    params = cfg.qnn or QnnParams()
    if params.csv_file:
        return int(load_dataset_csv(params.csv_file).train_idx.size)
    return int(0.7 * params.samples)


def shot_accounting(records: list[RunRecord], cfg: RunConfig) -> tuple[int, int]:
    """(detailed, lower_bound): the detailed counter is the final cumulative
    shot total (every measured execution, gradients included); the lower
    bound is optimizer-epochs x m, times the training-set size for the
    classifier, with prediction epochs charging nothing."""
    detailed = records[-1].cumulative_shots if records else 0
    optimizer_epochs = sum(1 for r in records if not r.was_prediction)
    m = cfg.shots.shots
    if cfg.task == "qnn":
        return detailed, optimizer_epochs * _qnn_train_size(cfg) * m
    return detailed, optimizer_epochs * m


# ---------------------------------------------------------------------------
# multi-seed comparison
# ---------------------------------------------------------------------------

@dataclass
class ComparisonSummary:
    task: str
    methods: tuple[str, ...]
    seeds: tuple[int, ...]
    records: dict
    speedups: dict
    convergence_rates: dict
    shot_totals: dict
    errors: dict
    base_config: RunConfig

    def median_speedup(self, method: str) -> float:
        values = [v for v in self.speedups.get(method, {}).values() if v is not None]
        return float(np.median(values)) if values else float("nan")

    def shot_savings(self, method: str) -> float:
        ratios = []
        for seed in self.seeds:
            v = self.shot_totals.get(("vanilla", seed))
            d = self.shot_totals.get((method, seed))
            if v and d and d[1] > 0:
                ratios.append(v[1] / d[1])
        return float(np.median(ratios)) if ratios else float("nan")

    def to_payload(self) -> dict:
        per_method = {}
        for method in self.methods:
            cr = [v for v in self.convergence_rates.get(method, {}).values() if v is not None]
            per_method[method] = {
                "speedups": {str(s): self.speedups.get(method, {}).get(s) for s in self.seeds},
                "median_speedup": None if method == "vanilla" else self.median_speedup(method),
                "mean_convergence_rate": float(np.mean(cr)) if cr else None,
                "shot_totals": {
                    str(s): self.shot_totals.get((method, s)) for s in self.seeds
                },
                "shot_savings_vs_vanilla": None if method == "vanilla" else self.shot_savings(method),
            }
        return {
            "task": self.task,
            "methods": list(self.methods),
            "seeds": list(self.seeds),
            "per_method": per_method,
            "errors": {f"{m}/{s}": e for (m, s), e in self.errors.items()},
            "config": config_payload(self.base_config),
        }


def compare(cfg: RunConfig, methods, seeds) -> ComparisonSummary:
    """Run every method on every seed with shared initial weights per seed."""
    methods = tuple(methods)
    seeds = tuple(int(s) for s in seeds)
    if len(set(methods)) != len(methods):
        raise ValueError("duplicate methods in comparison")
    if not seeds:
        raise ValueError("need at least one seed")
    records: dict = {}
    errors: dict = {}
    shot_totals: dict = {}
    speedups: dict = {m: {} for m in methods}
    rates: dict = {m: {} for m in methods}
    cr_window = (1, 25) if cfg.task == "qaoa" else None
    for seed in seeds:
        for method in methods:
            run_cfg = replace(
                cfg,
                method=method,
                seed=seed,
                predictor=replace(cfg.predictor, method=method if method != "vanilla" else cfg.predictor.method),
            )
            try:
                recs = train(run_cfg)
            except Exception as exc:  # noqa: BLE001 - per-run failures are recorded
                errors[(method, seed)] = f"{type(exc).__name__}: {exc}"
                continue
            records[(method, seed)] = recs
            shot_totals[(method, seed)] = shot_accounting(recs, run_cfg)
            try:
                rates[method][seed] = convergence_rate(recs, cr_window)
            except ValueError:
                rates[method][seed] = None
    for seed in seeds:
        base = records.get(("vanilla", seed))
        for method in methods:
            recs = records.get((method, seed))
            if base is None or recs is None:
                speedups[method][seed] = None
            else:
                speedups[method][seed] = speedup(base, recs)
    return ComparisonSummary(
        cfg.task, methods, seeds, records, speedups, rates, shot_totals, errors, cfg
    )


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------

CSV_HEADER = ("epoch", "loss", "metric", "was_prediction", "cum_executions", "cum_shots")


def write_records_csv(path, records: list[RunRecord]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow(
                [r.epoch, repr(r.loss), repr(r.metric), int(r.was_prediction),
                 r.cumulative_executions, r.cumulative_shots]
            )


def read_records_csv(path) -> list[RunRecord]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header}")
        return [
            RunRecord(int(e), float(l), float(m), bool(int(w)), int(ce), int(cs))
            for e, l, m, w, ce, cs in reader
        ]


def config_payload(cfg: RunConfig) -> dict:
    payload = asdict(cfg)
    payload["conventions"] = {
        "qaoa_param_ordering": "interleaved [gamma_1, beta_1, ..., gamma_p, beta_p]",
        "qubit_ordering": "qubit 0 is the most significant basis-index bit",
        "nap_epoch_index": "absolute 1-based epoch; first prediction at i = p",
        "prediction_cycle": "prediction replaces the optimizer step on every p-th epoch",
        "qnn_epoch": "one full pass over the training split in fixed batches",
        "qnn_loss_column": "held-out cross-entropy (exact evaluation)",
    }
    return payload


def write_summary_json(path, payload: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
