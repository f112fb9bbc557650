"""Command-line front end.

Subcommands::

    solmap solve-diff --problem P.json --mode reverse --tangent T.json --out O.json
    solmap svm-sensitivity --n 20 --d 2 --seed 0 --lambda 0.05 --out svm.csv
    solmap ridge-sensitivity --n 20 --alpha 0.5 --seed 0 --out ridge.csv
    solmap hyperparam-descent --alpha0 0.1 --out descent.csv
    solmap projection-layer --mode relu --batch 8 --size 4 --out relu.json

Exit codes: 0 success, 2 unreadable or malformed input, 3 solver failure.
CSV files start with ``#``-prefixed metadata lines, then a header row.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import applications as apps
from . import io
from .api import (
    DiffEngine,
    ForwardConstraintFunction,
    ForwardObjectiveFunction,
    ForwardVariablePrimal,
    ReverseConstraintFunction,
    ReverseObjectiveFunction,
    ReverseVariablePrimal,
)
from .model import ModelError
from .solvers import SolverError, SolverSettings

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_SOLVER = 3


class CommandError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "%.17g" % (v + 0.0)  # folds -0.0 into 0
    return str(v)


def write_csv(path, metadata: dict, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        for key, val in metadata.items():
            fh.write(f"# {key}: {_fmt(val)}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def read_csv(path) -> tuple[dict, list[dict]]:
    """Inverse of :func:`write_csv`; values stay strings."""
    meta, lines = {}, []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition(": ")
                meta[key] = val
            else:
                lines.append(line)
    return meta, list(csv.DictReader(lines))


def _settings(args) -> SolverSettings:
    return SolverSettings(tol=getattr(args, "tol", 1e-9))


def _lists(a) -> list:
    return np.asarray(a, dtype=float).tolist()


# ---------------------------------------------------------------------------
# solve-diff


def solve_diff(model, mode: str, tangent: dict, solver: str = "auto",
               settings: SolverSettings | None = None) -> dict:
    """Solve ``model`` and run one differentiation pass; returns the output document."""
    engine = DiffEngine(model, solver=solver, settings=settings)
    status = engine.optimize()
    if not status.optimal:
        raise SolverError(status)
    out = {"status": status.tag.value}
    if mode == "forward":
        obj, cons = io.forward_tangent_from_dict(tangent, model)
        if obj is not None:
            engine.set_input_tangent(ForwardObjectiveFunction(), obj)
        for cid, fn in cons.items():
            engine.set_input_tangent(ForwardConstraintFunction(cid), fn)
        engine.forward_differentiate()
        out["variable_tangents"] = {
            name: engine.get_output_tangent(ForwardVariablePrimal(k))
            for k, name in enumerate(model.var_names)
        }
    else:
        for var, val in io.reverse_seeds_from_dict(tangent, model).items():
            engine.set_input_tangent(ReverseVariablePrimal(var), val)
        engine.reverse_differentiate()
        out["objective_gradient"] = io.function_to_dict(
            engine.get_output_tangent(ReverseObjectiveFunction()))
        out["constraint_gradients"] = {
            cid: io.function_to_dict(engine.get_output_tangent(ReverseConstraintFunction(cid)))
            for cid in model.constraint_ids
        }
    out["approximate"] = engine.approximate
    return out


def cmd_solve_diff(args) -> int:
    try:
        model = io.read_problem(args.problem)
        tangent = io.read_json(args.tangent) if args.tangent else {}
    except OSError as exc:
        raise CommandError(f"cannot read input: {exc}", EXIT_PARSE) from exc
    try:
        out = solve_diff(model, args.mode, tangent, args.solver, _settings(args))
    except (io.FileFormatError, ModelError) as exc:
        raise CommandError(str(exc), EXIT_PARSE) from exc
    out["metadata"] = {"problem": str(args.problem), "mode": args.mode,
                       "solver": args.solver, "tol": args.tol}
    io.write_json(args.out, out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# tutorials


def cmd_svm_sensitivity(args) -> int:
    if args.instance == "square":
        X, y = apps.svm_square_instance()
    else:
        if args.n < 4 or args.d < 1:
            raise CommandError("need --n >= 4 and --d >= 1", EXIT_PARSE)
        X, y = apps.svm_dataset(args.n, args.d, args.seed)
    if args.problem_out:
        io.write_problem(args.problem_out, apps.svm_model(X, y, args.lam))
    res = apps.svm_sensitivity(X, y, args.lam, _settings(args))
    meta = {"command": "svm-sensitivity", "instance": args.instance, "n": len(y),
            "d": X.shape[1], "seed": args.seed, "lambda": args.lam,
            "w": " ".join(_fmt(v) for v in res.w), "b": res.b}
    header = [f"x{j}" for j in range(X.shape[1])] + ["y", "dual", "support", "sensitivity"]
    rows = ([*X[i], y[i], res.duals[i], int(res.support[i]), res.sensitivity[i]] for i in range(len(y)))
    write_csv(args.out, meta, header, rows)
    return EXIT_OK


def cmd_ridge_sensitivity(args) -> int:
    if args.n < 2:
        raise CommandError("need --n >= 2", EXIT_PARSE)
    x, y = apps.ridge_dataset(args.n, args.seed)
    if args.problem_out:
        io.write_problem(args.problem_out, apps.ridge_model(x, y, args.alpha))
    res = apps.ridge_sensitivity(x, y, args.alpha, _settings(args))
    meta = {"command": "ridge-sensitivity", "n": args.n, "seed": args.seed,
            "alpha": args.alpha, "w": res.w, "b": res.b}
    rows = ([i, x[i], y[i], res.dw_dx[i], res.dw_dy[i]] for i in range(args.n))
    write_csv(args.out, meta, ["i", "x", "y", "dw_dx", "dw_dy"], rows)
    return EXIT_OK


def cmd_hyperparam_descent(args) -> int:
    if args.alpha0 <= 0:
        raise CommandError("--alpha0 must be positive", EXIT_PARSE)
    data = apps.regression_dataset(args.seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        history = apps.hyperparameter_descent(data, args.alpha0, args.step, args.max_iters,
                                              args.grad_tol, _settings(args))
    last = history[-1]
    meta = {"command": "hyperparam-descent", "seed": args.seed, "alpha0": args.alpha0,
            "step": args.step, "max_iters": args.max_iters, "grad_tol": args.grad_tol,
            "converged": abs(last.grad) <= args.grad_tol}
    rows = ([h.iteration, h.alpha, h.grad, h.loss, h.note] for h in history)
    write_csv(args.out, meta, ["iter", "alpha", "dalpha", "test_loss", "note"], rows)
    return EXIT_OK


MAX_POLYTOPE_DRAWS = 10


def _draw_polytope(rng, size: int):
    for _ in range(MAX_POLYTOPE_DRAWS):
        W = rng.standard_normal((3, size))
        b = rng.uniform(0.2, 1.0, 3) * np.linalg.norm(W, axis=1)
        if apps.polytope_feasible(W, b):
            return W, b
    raise CommandError(f"no feasible polytope in {MAX_POLYTOPE_DRAWS} draws", EXIT_SOLVER)


def cmd_projection_layer(args) -> int:
    if args.batch < 1 or args.size < 1:
        raise CommandError("need --batch >= 1 and --size >= 1", EXIT_PARSE)
    rng = np.random.default_rng(args.seed)
    Y = rng.standard_normal((args.batch, args.size))
    dl_dx = rng.standard_normal((args.batch, args.size))
    out = {"metadata": {"command": "projection-layer", "mode": args.mode, "batch": args.batch,
                        "size": args.size, "seed": args.seed}}
    if args.mode == "relu":
        res = apps.relu_layer(Y, dl_dx, _settings(args))
    else:
        W, b = _draw_polytope(rng, args.size)
        res = apps.polytope_layer(Y, W, b, dl_dx, _settings(args))
        out.update(W=_lists(W), b=_lists(b), dl_dw=_lists(res.dl_dw), dl_db=_lists(res.dl_db))
    out.update(y=_lists(Y), x=_lists(res.x), dl_dx=_lists(dl_dx), dl_dy=_lists(res.dl_dy),
               approximate=res.approximate)
    io.write_json(args.out, out)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="solmap", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--tol", type=float, default=1e-9, help="solver tolerance")
        return p

    p = common(sub.add_parser("solve-diff", help="solve a problem file and differentiate it"))
    p.add_argument("--problem", required=True, type=Path)
    p.add_argument("--mode", required=True, choices=("forward", "reverse"))
    p.add_argument("--tangent", type=Path, help="tangent or seed file (omit for zeros)")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--solver", choices=("auto", "ipm", "admm"), default="auto")
    p.set_defaults(func=cmd_solve_diff)

    p = common(sub.add_parser("svm-sensitivity", help="per-point SVM hyperplane sensitivity"))
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambda", dest="lam", type=float, default=0.05)
    p.add_argument("--instance", choices=("random", "square"), default="random")
    p.add_argument("--problem-out", type=Path, help="also write the model as a problem file")
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_svm_sensitivity)

    p = common(sub.add_parser("ridge-sensitivity", help="univariate ridge data sensitivities"))
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--problem-out", type=Path, help="also write the model as a problem file")
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_ridge_sensitivity)

    p = common(sub.add_parser("hyperparam-descent", help="tune the ridge penalty by gradient descent"))
    p.add_argument("--alpha0", type=float, default=0.1)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--step", type=float, default=10.0)
    p.add_argument("--grad-tol", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_hyperparam_descent)

    p = common(sub.add_parser("projection-layer", help="pullbacks through projection layers"))
    p.add_argument("--mode", choices=("relu", "polytope"), default="relu")
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--size", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_projection_layer)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"solmap {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except (io.FileFormatError, ModelError, json.JSONDecodeError) as exc:
        print(f"solmap {args.command}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except SolverError as exc:
        print(f"solmap {args.command}: solver failed ({exc})", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
