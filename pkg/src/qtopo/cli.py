"""Command-line entry point: ``qtopo solve | oracle | estimate``.

Exit statuses: 0 success, 2 bad input (parse error, dimension mismatch),
3 pipeline failure, 4 oracle cap exceeded.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from .ansatz import StatePrep
from .io import ProblemParseError, load_problem, load_run_config
from .model import AssembledSystem, ModelError, assemble, bitstring
from .operators import Estimators
from .oracle import BRUTE_FORCE_CAP, CapExceeded, brute_force
from .vqa import AdamConfig, PipelineError, RunConfig, RunResult, StageResult, run_pipeline

EXIT_OK, EXIT_INPUT, EXIT_PIPELINE, EXIT_CAP = 0, 2, 3, 4


class InputError(ValueError):
    pass


def default_layers(sys_: AssembledSystem) -> tuple[int, int]:
    """(layers_psi, layers_phi): shallow for 4-qubit problems, deeper beyond."""
    return (2, 1) if sys_.m + sys_.n <= 4 else (6, 2)


def build_config(args, sys_: AssembledSystem) -> RunConfig:
    file_kw = load_run_config(args.config) if getattr(args, "config", None) else {}
    cli_kw = {
        "mode": args.mode, "shots": args.shots, "seed": args.seed,
        "iterations": getattr(args, "iters", None), "learning_rate": getattr(args, "lr", None),
        "layers_psi": args.layers_psi, "layers_phi": args.layers_phi,
        "out": getattr(args, "out", None),
    }
    kw = {**file_kw, **{k: v for k, v in cli_kw.items() if v is not None}}
    lp, lf = default_layers(sys_)
    adam_fields = ("learning_rate", "beta1", "beta2", "eps_hat", "iterations")
    try:
        adam = AdamConfig(**{k: kw[k] for k in adam_fields if k in kw})
        return RunConfig(mode=kw.get("mode", "exact"), shots=kw.get("shots", 32000),
                         seed=kw.get("seed", 0), adam=adam,
                         layers_psi=kw.get("layers_psi", lp), layers_phi=kw.get("layers_phi", lf),
                         emit=kw.get("out", "qtopo_out"))
    except ValueError as exc:
        raise InputError(f"invalid run configuration: {exc}") from exc


# -- solve ---------------------------------------------------------------------

def _num(v):
    return None if v is None else float(v)


def _stage_summary(stage: StageResult | None) -> dict | None:
    if stage is None:
        return None
    return {
        "best_value": _num(stage.best_value),
        "best_iteration": stage.best_iteration,
        "best_params": None if stage.best_params is None else [float(v) for v in stage.best_params],
        "final_value": _num(stage.history[-1]) if stage.history else None,
        "iterations_recorded": len(stage.history),
        "reference": _num(stage.reference),
        "r_star": _num(stage.r_star),
    }


def results_document(result: RunResult, config: RunConfig, sys_: AssembledSystem,
                     status: str = "ok", failure: dict | None = None) -> dict:
    doc = {
        "status": status,
        "problem": {"m": sys_.m, "n": sys_.n, "free_nodes": sys_.num_free},
        "config": {
            "mode": config.mode, "shots": config.shots if config.mode == "sampled" else None,
            "seed": config.seed, "layers_psi": config.layers_psi, "layers_phi": config.layers_phi,
            "learning_rate": config.adam.learning_rate, "beta1": config.adam.beta1,
            "beta2": config.adam.beta2, "eps_hat": config.adam.eps_hat,
            "iterations": config.adam.iterations,
        },
        "selected": result.selected,
        "selected_probability": _num(result.selected_probability),
        "distribution": None if result.distribution is None else
        {bitstring(x, sys_.m): float(p) for x, p in enumerate(result.distribution)},
        "stage1": _stage_summary(result.stage1),
        "stage2": _stage_summary(result.stage2),
        "references": None,
        "diagnostics": {k: (float(v) if isinstance(v, (float, np.floating)) else v)
                        for k, v in result.diagnostics.items()},
    }
    if result.oracle is not None:
        doc["references"] = {
            "F_u_star": _num(result.fu_star),
            "F_s_star": _num(result.fs_star),
            "oracle_best": result.oracle.best,
            "oracle_u_target": float(result.oracle.u_target[result.oracle.argmin]),
            "oracle_r": float(result.oracle.r),
        }
    if failure:
        doc["failure"] = failure
    return doc


def write_history(path: Path, stage: StageResult | None) -> None:
    stage = stage or StageResult()
    errors = stage.errors()
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "objective"] + (["abs_error"] if errors is not None else []) + ["grad_norm"])
        for t, (value, gnorm) in enumerate(zip(stage.history, stage.grad_norms)):
            row = [t, repr(value)] + ([repr(errors[t])] if errors is not None else []) + [repr(gnorm)]
            w.writerow(row)


def write_outputs(out: Path, doc: dict, result: RunResult) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.json").write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    write_history(out / "stage1_history.csv", result.stage1)
    write_history(out / "stage2_history.csv", result.stage2)


def cmd_solve(args) -> int:
    gs = load_problem(args.problem)
    sys_ = assemble(gs)
    config = build_config(args, sys_)
    out = Path(config.emit)

    def progress(stage, t, value):
        if not args.quiet and (t % 100 == 0 or t == config.adam.iterations):
            print(f"[{stage}] iteration {t:5d}  objective {value:+.6f}", file=sys.stderr)

    try:
        result = run_pipeline(sys_, config, progress)
    except PipelineError as exc:
        failure = {"stage": exc.stage, "message": str(exc)}
        write_outputs(out, results_document(exc.partial, config, sys_, "failed", failure), exc.partial)
        print(f"error: pipeline failed in {exc.stage}: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    write_outputs(out, results_document(result, config, sys_), result)

    print(f"selected structure: {result.selected} (probability {result.selected_probability:.6f})")
    print(f"stage 1 best F_u: {result.stage1.best_value:.6f} at iteration {result.stage1.best_iteration}")
    print(f"stage 2 best F_s: {result.stage2.best_value:.6f} at iteration {result.stage2.best_iteration}")
    print(f"r*: {result.stage1.r_star:.6f}")
    if result.oracle is not None:
        print(f"oracle optimum: {result.oracle.best}  F_u* = {result.fu_star:.6f}  F_s* = {result.fs_star:.6f}")
    print(f"wrote {out}/results.json, stage1_history.csv, stage2_history.csv")
    return EXIT_OK


# -- oracle ----------------------------------------------------------------------

def cmd_oracle(args) -> int:
    sys_ = assemble(load_problem(args.problem))
    table = brute_force(sys_, cap=args.cap)
    width = max(sys_.m, len("structure"))
    print(f"{'structure':<{width}}  {'U_target':>12}  {'L':>14}")
    for x in table.ranked():
        mark = "  *" if x == table.argmin else ""
        print(f"{bitstring(x, sys_.m):<{width}}  {table.u_target[x]:12.6f}  {table.objective[x]:14.6f}{mark}")
    return EXIT_OK


# -- estimate --------------------------------------------------------------------

def load_parameters(path: str, prep: StatePrep) -> tuple[np.ndarray, np.ndarray]:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"{path}: cannot read parameter file: {exc.strerror}") from exc
    except yaml.YAMLError as exc:
        raise InputError(f"{path}: {exc}") from exc
    if isinstance(data, dict):
        unknown = set(data) - {"theta", "eta"}
        if unknown or "theta" not in data:
            raise InputError(f"{path}: expected keys theta and optional eta, got {sorted(data)}")
        theta, eta = data["theta"], data.get("eta")
    else:
        theta, eta = data, None
    try:
        theta = np.asarray(theta, dtype=float)
        eta = np.zeros(prep.num_eta) if eta is None else np.asarray(eta, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{path}: parameters must be numbers: {exc}") from exc
    if theta.shape != (prep.num_theta,):
        raise InputError(f"{path}: theta has shape {theta.shape}, ansatz needs ({prep.num_theta},)")
    if eta.shape != (prep.num_eta,):
        raise InputError(f"{path}: eta has shape {eta.shape}, ansatz needs ({prep.num_eta},)")
    return theta, eta


def cmd_estimate(args) -> int:
    sys_ = assemble(load_problem(args.problem))
    config = build_config(args, sys_)
    prep = StatePrep(sys_, config.layers_psi, config.layers_phi)
    theta, eta = load_parameters(args.params, prep)
    est = Estimators(sys_, prep)
    psi = prep.psi_state(theta)
    shots, seed = config.shots, config.seed

    a = est.expect_A_sampled_state(psi, shots, (seed, 5, 0))
    bb = est.expect_bb_inversion_state(psi, shots, (seed, 5, 1))
    fs = est.expect_rhoO_sampled_state(psi, eta, shots, (seed, 5, 2))
    rows = [
        ("<A>", est.expect_A_exact(psi), a),
        ("|<b|psi>|^2", est.expect_bb_exact(psi), bb),
        ("F_s", est.expect_rhoO_exact(theta, eta), fs),
    ]
    print(f"shots per circuit: {shots}  seed: {seed}")
    print(f"{'quantity':<12}  {'exact':>12}  {'sampled':>12}  {'stderr':>10}")
    for name, exact, e in rows:
        print(f"{name:<12}  {exact:12.6f}  {e.value:12.6f}  {e.stderr:10.6f}")

    P = prep.structure_probabilities(eta)
    g = est.target_weights(psi)
    P_hat = est.sample_structures(eta, shots, (seed, 5, 2))
    g_hat = est.sample_target_weights(psi, shots, (seed, 5, 2))
    print()
    print("F_s factors per structure (P = structure probability, g = target weight)")
    print(f"{'structure':<9}  {'P exact':>10}  {'P sampled':>10}  {'P se':>8}  "
          f"{'g exact':>10}  {'g sampled':>10}  {'g se':>8}")
    for x in range(1 << sys_.m):
        p_se = np.sqrt(P_hat[x] * (1 - P_hat[x]) / shots)
        g_se = np.sqrt(g_hat[x] * (1 - g_hat[x]) / shots)
        print(f"{bitstring(x, sys_.m):<9}  {P[x]:10.6f}  {P_hat[x]:10.6f}  {p_se:8.6f}  "
              f"{g[x]:10.6f}  {g_hat[x]:10.6f}  {g_se:8.6f}")
    return EXIT_OK


# -- entry point -----------------------------------------------------------------

def _add_run_flags(p: argparse.ArgumentParser, optimizer: bool) -> None:
    p.add_argument("problem", help="problem file (YAML) or a packaged instance name: tri3, five_edge")
    p.add_argument("--config", help="YAML run-config file; command-line flags take precedence")
    p.add_argument("--mode", choices=("exact", "sampled"))
    p.add_argument("--shots", type=int, help="shots per circuit in sampled mode (default 32000)")
    p.add_argument("--seed", type=int)
    p.add_argument("--layers-psi", type=int, dest="layers_psi")
    p.add_argument("--layers-phi", type=int, dest="layers_phi")
    if optimizer:
        p.add_argument("--iters", type=int, help="ADAM iterations per stage (default 1000)")
        p.add_argument("--lr", type=float, help="ADAM learning rate (default 0.1)")
        p.add_argument("--out", help="output directory (default qtopo_out)")
        p.add_argument("--quiet", action="store_true", help="suppress progress lines")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qtopo",
                                     description="Variational two-material topology optimisation")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_flags(sub.add_parser("solve", help="run both optimisation stages"), optimizer=True)
    p = sub.add_parser("oracle", help="enumerate every structure classically")
    p.add_argument("problem")
    p.add_argument("--cap", type=int, default=BRUTE_FORCE_CAP, help="largest m to enumerate")
    p = sub.add_parser("estimate", help="compare exact and shot-based estimators at given parameters")
    _add_run_flags(p, optimizer=False)
    p.add_argument("params", help="YAML/JSON file with theta and optional eta")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    handlers = {"solve": cmd_solve, "oracle": cmd_oracle, "estimate": cmd_estimate}
    try:
        return handlers[args.command](args)
    except (ProblemParseError, ModelError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP


if __name__ == "__main__":
    sys.exit(main())
