"""Accelerated variational-quantum-algorithm training.

Statevector simulation, circuit builders, gradient estimators, and a
training harness that interleaves optimizer steps with quadratic
extrapolation of per-parameter weight trajectories.
"""
from importlib import resources

from .circuits import (
    EncodingSpec,
    GateOp,
    GraphSpec,
    ParameterizedCircuit,
    build_encoder,
    build_hea,
    build_qaoa,
    build_uccsd,
    load_graph,
    run_circuit,
)
from .gradients import (
    GradientMethod,
    OptimizerState,
    adjoint_gradient,
    finite_diff_gradient,
    make_optimizer,
    optimizer_step,
    param_shift_gradient,
    spsa_gradient,
)
from .predictor import (
    FitCoefficients,
    PredictorConfig,
    WeightWindow,
    adap_distance,
    fit_quadratic,
    nap_distance,
    predict_weights,
)
from .sim import (
    NoiseSpec,
    Observable,
    PauliTerm,
    ShotConfig,
    StateVector,
    apply_gate,
    apply_noisy_gate,
    exact_ground_energy,
    expectation,
    init_basis_state,
    load_hamiltonian,
    sample_expectation,
    transverse_field_ising,
)
from .tasks import (
    Dataset,
    MaxCutTask,
    QnnTask,
    VqeTask,
    brute_force_maxcut,
    cut_expectation,
    generate_erdos_renyi,
    load_dataset_csv,
    make_maxcut_task,
    make_qnn_task,
    make_vqe_task,
    qnn_forward,
    qnn_loss_and_grad,
    synth_blobs,
    vqe_energy,
)
from .training import (
    ComparisonSummary,
    QaoaParams,
    QnnParams,
    RunConfig,
    RunRecord,
    VqeParams,
    compare,
    convergence_rate,
    shot_accounting,
    speedup,
    train,
)

__version__ = "0.1.0"


def bundled_hamiltonian_path(name: str) -> str:
    """Filesystem path of a bundled Hamiltonian file, e.g. 'h2' or 'tfim4'."""
    ref = resources.files("qextrap").joinpath(f"data/{name}.txt")
    return str(ref)
