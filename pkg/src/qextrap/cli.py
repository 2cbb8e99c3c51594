"""Command-line entry point: task runners, method comparison, and oracles."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .circuits import load_graph
from .gradients import GradientMethod
from .predictor import PredictorConfig
from .sim import NoiseSpec, ShotConfig, exact_ground_energy, load_hamiltonian
from .tasks import best_sampled_cut, brute_force_maxcut
from .training import (
    METHODS,
    QaoaParams,
    QnnParams,
    RunConfig,
    VqeParams,
    build_task,
    compare,
    config_payload,
    shot_accounting,
    train_with_weights,
    write_records_csv,
    write_summary_json,
)

# per-task defaults; --noisy raises p by one and switches on m-shot sampling
TASK_DEFAULTS = {
    "qaoa": {"optimizer": "adagrad", "lr": 0.05, "epochs": 100, "p": 4, "d0": 3.0, "k": 0.01},
    "vqe": {"optimizer": "sgd", "lr": 0.1, "epochs": 500, "p": 4, "d0": 5.0, "k": 0.01},
    "qnn": {"optimizer": "adam", "lr": 0.002, "epochs": 200, "p": 5, "d0": 3.0, "k": 1e-4},
}
NOISY_GRAD_DEFAULT = {"qaoa": "param-shift", "vqe": "param-shift", "qnn": "spsa"}
GRAD_KINDS = {
    "exact": "exact_shift",
    "param-shift": "param_shift_sampled",
    "spsa": "spsa",
    "finite-diff": "finite_diff",
}


def _add_shared_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", choices=METHODS, default="vanilla")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--optimizer", choices=("sgd", "adam", "adagrad"), default=None)
    p.add_argument("--lr", type=float, default=None, help="learning rate")
    p.add_argument("--grad", choices=sorted(GRAD_KINDS), default=None)
    p.add_argument("--shots", type=int, default=1000)
    p.add_argument("--sampled", action="store_true", help="m-shot expectation estimates")
    p.add_argument("--noisy", action="store_true",
                   help="stochastic gate noise + sampling; raises p by 1")
    p.add_argument("--noise-prob", type=float, default=0.01)
    p.add_argument("--p", type=int, default=None, help="prediction interval")
    p.add_argument("--d0", type=float, default=None, help="initial prediction distance")
    p.add_argument("--k", type=float, default=None, help="adaptive-distance constant")
    p.add_argument("--n-max", type=float, default=12.0)
    p.add_argument("--r", type=float, default=0.95, help="distance decay rate")
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--spsa-c", type=float, default=0.1)
    p.add_argument("--fd-h", type=float, default=1e-5)
    p.add_argument("--no-predict", action="store_true",
                   help="keep the method but disable predictions (regression aid)")
    p.add_argument("--out", default="runs", help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv",
                   help="json additionally embeds records into the run JSON")


def _add_task_flags(p: argparse.ArgumentParser, tasks: tuple[str, ...]) -> None:
    if "qaoa" in tasks:
        p.add_argument("--nodes", type=int, default=4)
        p.add_argument("--edge-prob", type=float, default=0.6)
        p.add_argument("--depth", type=int, default=1)
        p.add_argument("--graph", default=None, help="graph file instead of a random graph")
    if "vqe" in tasks:
        p.add_argument("--hamiltonian", default=None, help="Pauli-sum Hamiltonian file")
        p.add_argument("--ansatz", choices=("uccsd", "hea"), default="uccsd")
        p.add_argument("--electrons", type=int, default=None)
        p.add_argument("--tol", type=float, default=1e-6)
    if "vqe" in tasks or "qnn" in tasks:
        p.add_argument("--layers", type=int, default=1)
    if "qnn" in tasks:
        p.add_argument("--synthetic", choices=("blobs",), default="blobs")
        p.add_argument("--csv", default=None, help="dataset CSV (header f1,...,fd,label)")
        p.add_argument("--classes", type=int, default=4)
        p.add_argument("--dim", type=int, default=8)
        p.add_argument("--samples", type=int, default=1000)
        p.add_argument("--spread", type=float, default=0.25)
        p.add_argument("--qubits", type=int, default=4)
        p.add_argument("--features-per-qubit", type=int, default=2)
        p.add_argument("--batch-size", type=int, default=32)
        p.add_argument("--predict-scope", choices=("all", "quantum"), default="all")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qextrap")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train one task with one method")
    run_sub = run.add_subparsers(dest="task", required=True)
    for task in ("qaoa", "vqe", "qnn"):
        sp = run_sub.add_parser(task)
        _add_shared_flags(sp)
        _add_task_flags(sp, (task,))

    cmp_parser = sub.add_parser("compare", help="run several methods over seeds")
    cmp_parser.add_argument("--task", choices=("qaoa", "vqe", "qnn"), required=True)
    cmp_parser.add_argument("--methods", default="vanilla,nap,adap")
    cmp_parser.add_argument("--seeds", type=int, default=1, help="number of seeds")
    cmp_parser.add_argument("--base-seed", type=int, default=0)
    _add_shared_flags(cmp_parser)
    _add_task_flags(cmp_parser, ("qaoa", "vqe", "qnn"))

    oracle = sub.add_parser("oracle", help="brute-force MaxCut / exact ground energy")
    oracle.add_argument("kind", choices=("maxcut", "eig"))
    oracle.add_argument("input", help="graph or Hamiltonian file")
    return parser


def _require_file(parser: argparse.ArgumentParser, path: str | None, what: str) -> None:
    if path is not None and not Path(path).is_file():
        parser.error(f"{what} file not found: {path}")


def resolve_run_config(task: str, args, parser: argparse.ArgumentParser) -> RunConfig:
    defaults = TASK_DEFAULTS[task]
    sampled = args.sampled or args.noisy
    lr = args.lr if args.lr is not None else defaults["lr"]
    p = args.p if args.p is not None else defaults["p"] + (1 if args.noisy else 0)
    grad_name = args.grad
    if grad_name is None:
        grad_name = NOISY_GRAD_DEFAULT[task] if sampled else "exact"
    if grad_name == "exact" and sampled:
        parser.error("--grad exact needs exact mode; drop --sampled/--noisy or pick another estimator")
    predictor = PredictorConfig(
        p=p,
        d0_init=args.d0 if args.d0 is not None else defaults["d0"],
        r=args.r,
        k=args.k if args.k is not None else defaults["k"],
        n_max=args.n_max,
        epsilon=args.eps,
        alpha=lr,
        method=args.method,
    )
    task_kwargs: dict = {"qaoa": None, "vqe": None, "qnn": None}
    if task == "qaoa":
        _require_file(parser, args.graph, "graph")
        task_kwargs["qaoa"] = QaoaParams(args.nodes, args.edge_prob, args.depth, args.graph)
    elif task == "vqe":
        if args.hamiltonian is None:
            parser.error("vqe requires --hamiltonian FILE")
        _require_file(parser, args.hamiltonian, "Hamiltonian")
        task_kwargs["vqe"] = VqeParams(
            args.hamiltonian, args.ansatz, args.electrons, args.layers, args.tol
        )
    else:
        _require_file(parser, args.csv, "dataset")
        task_kwargs["qnn"] = QnnParams(
            args.classes, args.dim, args.samples, args.spread, args.qubits,
            args.layers, args.features_per_qubit, args.batch_size, args.csv,
            args.predict_scope,
        )
    return RunConfig(
        task=task,
        method=args.method,
        epochs=args.epochs if args.epochs is not None else defaults["epochs"],
        seed=args.seed,
        optimizer=args.optimizer if args.optimizer is not None else defaults["optimizer"],
        learning_rate=lr,
        grad=GradientMethod(GRAD_KINDS[grad_name], spsa_c=args.spsa_c, fd_h=args.fd_h),
        predictor=predictor,
        shots=ShotConfig(shots=args.shots, mode="sampled" if sampled else "exact"),
        noise=NoiseSpec(depolarizing_prob=args.noise_prob if args.noisy else 0.0,
                        enabled=args.noisy),
        predict_enabled=not args.no_predict,
        **task_kwargs,
    )


def _run_stem(cfg: RunConfig) -> str:
    return f"{cfg.task}_{cfg.method}_seed{cfg.seed}"


def _run_payload(cfg: RunConfig, task, records, final_theta) -> dict:
    detailed, lower_bound = shot_accounting(records, cfg)
    final = records[-1]
    payload = {
        "config": config_payload(cfg),
        "epochs_run": len(records),
        "final": {"epoch": final.epoch, "loss": final.loss, "metric": final.metric},
        "shots": {"detailed": detailed, "paper_lower_bound": lower_bound},
    }
    if cfg.task == "qaoa":
        payload["true_maxcut"] = task.true_maxcut
        payload["num_params"] = task.circuit.num_params
        if cfg.shots.mode == "sampled":
            # auxiliary view: the largest cut actually observed in m samples
            payload["best_sampled_cut"] = best_sampled_cut(
                final_theta, task, cfg.shots.shots, cfg.seed
            )
    elif cfg.task == "vqe":
        payload["exact_ground_energy"] = task.exact_energy
        payload["num_params"] = task.ansatz.num_params
        payload["converged"] = (
            len(records) >= 2
            and abs(records[-1].loss - records[-2].loss) < task.convergence_tol
        )
    else:
        payload["num_params"] = {
            "quantum": task.num_quantum_params,
            "head": task.num_qubits * task.num_classes + task.num_classes,
            "total": task.num_weights,
        }
    return payload


def cmd_run(args, parser: argparse.ArgumentParser) -> int:
    cfg = resolve_run_config(args.task, args, parser)
    task = build_task(cfg)
    records, final_theta = train_with_weights(cfg, task)
    out = Path(args.out)
    stem = _run_stem(cfg)
    write_records_csv(out / f"{stem}.csv", records)
    payload = _run_payload(cfg, task, records, final_theta)
    if args.format == "json":
        payload["records"] = [
            [r.epoch, r.loss, r.metric, int(r.was_prediction),
             r.cumulative_executions, r.cumulative_shots]
            for r in records
        ]
    write_summary_json(out / f"{stem}.json", payload)
    print(f"wrote {out / (stem + '.csv')} and {out / (stem + '.json')}")
    return 0


def cmd_compare(args, parser: argparse.ArgumentParser) -> int:
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    if len(methods) < 2:
        parser.error("compare needs at least 2 methods")
    if len(set(methods)) != len(methods):
        parser.error(f"duplicate methods in {args.methods!r}")
    for m in methods:
        if m not in METHODS:
            parser.error(f"unknown method {m!r}")
    if args.seeds < 1:
        parser.error("--seeds must be >= 1")
    cfg = resolve_run_config(args.task, args, parser)
    seeds = range(args.base_seed, args.base_seed + args.seeds)
    summary = compare(cfg, methods, seeds)
    out = Path(args.out)
    for (method, seed), records in summary.records.items():
        write_records_csv(out / f"{cfg.task}_{method}_seed{seed}.csv", records)
    write_summary_json(out / f"compare_{cfg.task}.json", summary.to_payload())
    print(f"wrote {len(summary.records)} record CSVs and {out / ('compare_' + cfg.task + '.json')}")
    return 0


def cmd_oracle(args) -> int:
    try:
        if args.kind == "maxcut":
            value = brute_force_maxcut(load_graph(args.input))
            print(value)
        else:
            value = exact_ground_energy(load_hamiltonian(args.input))
            print(repr(value))
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "oracle":
        return cmd_oracle(args)
    try:
        if args.command == "run":
            return cmd_run(args, parser)
        return cmd_compare(args, parser)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
