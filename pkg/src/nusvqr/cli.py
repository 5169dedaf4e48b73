"""Command-line interface.

Subcommands: ``generate``, ``fit``, ``predict``, ``gridsearch`` and
``experiment``. Exit status is 0 on success, 2 for bad input (flags, files,
data) and 3 when the QP solver does not reach its tolerance.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import experiments as ex
from .datasets import DataFormatError, Dataset, Standardizer, read_csv, write_csv
from .kernel import KernelFamily, KernelSpec
from .qp import DEFAULT_MAX_ITER, DEFAULT_TOL, QpNonConvergenceError
from .svqr import FitConfig, ModelKind, fit, load_model, predict, save_model, with_metadata
from .synth import SynthSpec, generate, true_quantile

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SOLVER = 3

SERVO_ENV = "NUSVQR_SERVO"
DEFAULT_SERVO_PATH = "data/servo.data"


class InputError(ValueError):
    pass


def float_list(text: str) -> list:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def int_list(text: str) -> list:
    return [int(v) for v in float_list(text)]


def exponent_list(text: str) -> list:
    """``"-15:15:3"`` (inclusive range) or ``"-15,-9,0"``."""
    if ":" in text:
        try:
            parts = [int(p) for p in text.split(":")]
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad exponent range {text!r}")
        if len(parts) not in (2, 3) or (len(parts) == 3 and parts[2] <= 0):
            raise argparse.ArgumentTypeError(f"bad exponent range {text!r}")
        step = parts[2] if len(parts) == 3 else 1
        return list(range(parts[0], parts[1] + 1, step))
    return int_list(text)


def _single(values, name):
    if values is None:
        return None
    if len(values) != 1:
        raise InputError(f"--{name} takes a single value here")
    return values[0]


def _solver_flags(p):
    p.add_argument("--tol", type=float, default=DEFAULT_TOL, help="KKT tolerance")
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER, dest="max_iter")


def _model_flags(p):
    p.add_argument("--model", choices=[m.value for m in ModelKind], default="nu")
    p.add_argument("--tau", type=float_list, default=[0.5])
    p.add_argument("--c", type=float, default=1.0, help="C (the nu model's box is C*tau/l)")
    p.add_argument("--nu", type=float_list, default=[0.5])
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--q", type=float, default=1.0, help="RBF width in exp(-|x-y|^2/q)")
    p.add_argument("--kernel", choices=[k.value for k in KernelFamily], default="rbf")
    p.add_argument("--normalize", action="store_true",
                   help="standardize features with training-set mean and std")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nusvqr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write an AD1/AD2 sample as CSV")
    g.add_argument("--dataset", choices=["AD1", "AD2"], default="AD1")
    g.add_argument("--l", type=int, default=200)
    g.add_argument("--sigma", type=float, default=0.2)
    g.add_argument("--a", type=float, default=-0.1)
    g.add_argument("--b", type=float, default=0.1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--stream", type=int, default=0, help="0 for training data, 1 for test data")
    g.add_argument("--tau", type=float, default=None, help="also write the true quantile q_tau")
    g.add_argument("--out", default=".")
    g.add_argument("--name", default="data.csv")

    f = sub.add_parser("fit", help="fit a model to a CSV file with a 'y' column")
    f.add_argument("data")
    _model_flags(f)
    _solver_flags(f)
    f.add_argument("--out", default=".")
    f.add_argument("--name", default="model.json")

    p = sub.add_parser("predict", help="predict with a saved model")
    p.add_argument("model")
    p.add_argument("data")
    p.add_argument("--out", default=".")
    p.add_argument("--name", default="predictions.csv")

    s = sub.add_parser("gridsearch", help="k-fold grid search over q, C and nu or eps")
    s.add_argument("data")
    _model_flags(s)
    _solver_flags(s)
    s.add_argument("--grid-exponents", type=exponent_list, default=list(ex.DEFAULT_GRID_EXPONENTS),
                   dest="grid_exponents", help="powers of two for q and C, e.g. --grid-exponents=-15:15:3")
    s.add_argument("--nu-grid", type=float_list, default=[0.2, 0.5, 0.8], dest="nu_grid")
    s.add_argument("--eps-grid", type=float_list, default=[0.0, 0.05, 0.1], dest="eps_grid")
    s.add_argument("--folds", type=int, default=5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", default="gridsearch")

    e = sub.add_parser("experiment", help="run one of the five experiment sweeps")
    e.add_argument("id", type=int, choices=[1, 2, 3, 4, 5])
    e.add_argument("--tau", type=float_list, default=None)
    e.add_argument("--nu", type=float_list, default=None)
    e.add_argument("--eps", type=float, default=None)
    e.add_argument("--c", type=float, default=None)
    e.add_argument("--c-nu", type=float, default=None, dest="c_nu",
                   help="experiment 4: C of the nu model (default l times --c)")
    e.add_argument("--q", type=float, default=None)
    e.add_argument("--sigma", type=float_list, default=None)
    e.add_argument("--l", type=int_list, default=None)
    e.add_argument("--trials", type=int, default=None)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--jobs", type=int, default=1)
    e.add_argument("--normalize", action="store_true")
    e.add_argument("--servo-path", default=None, dest="servo_path",
                   help=f"UCI servo.data (default ${SERVO_ENV} or {DEFAULT_SERVO_PATH})")
    _solver_flags(e)
    e.add_argument("--out", default=None)
    return parser


# commands ------------------------------------------------------------------

def _config(args) -> FitConfig:
    return FitConfig(model=args.model, tau=_single(args.tau, "tau"), C=args.c,
                     nu=_single(args.nu, "nu"), eps=args.eps,
                     kernel=KernelSpec(args.kernel, args.q), tol=args.tol,
                     max_iter=args.max_iter)


def _load_training(path, normalize):
    data, names, _ = read_csv(path)
    scaler = None
    if normalize:
        scaler = Standardizer.fit(data.X)
        data = Dataset(scaler.transform(data.X), data.y)
    return data, names, scaler


def cmd_generate(args) -> int:
    spec = SynthSpec(dataset=args.dataset, l=args.l, sigma=args.sigma, a=args.a, b=args.b,
                     seed=args.seed)
    d = generate(spec, stream=args.stream)
    header, cols = ["x", "y"], [d.X[:, 0], d.y]
    if args.tau is not None:
        header.append("q_tau")
        cols.append(true_quantile(spec, args.tau, d.X[:, 0]))
    path = Path(args.out) / args.name
    write_csv(path, header, cols)
    print(path)
    return EXIT_OK


def cmd_fit(args) -> int:
    cfg = _config(args)
    data, names, scaler = _load_training(args.data, args.normalize)
    model = fit(data, cfg)
    model = with_metadata(model, feature_names=names,
                          preprocessing=scaler.to_dict() if scaler else {"type": "none"})
    path = Path(args.out) / args.name
    path.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, path)
    print(json.dumps({"model": str(path), "bias": model.bias, "eps_width": model.eps_width,
                      "n_sv": int(len(model.sv_indices)),
                      "recovery_degenerate": model.diagnostics["recovery_degenerate"]}))
    return EXIT_OK


def predict_features(model, X, names=None) -> np.ndarray:
    expected = model.metadata.get("feature_names")
    if names is not None and expected is not None and list(names) != list(expected):
        raise InputError(f"feature columns {list(names)} do not match the model's {expected}")
    pre = model.metadata.get("preprocessing", {"type": "none"})
    if pre.get("type") == "standardize":
        X = Standardizer.from_dict(pre).transform(X)
    return predict(model, X)


def cmd_predict(args) -> int:
    try:
        model = load_model(args.model)
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise InputError(f"{args.model}: not a readable model file ({exc})") from None
    X, names, _ = read_csv(args.data, require_target=False)
    if isinstance(X, Dataset):
        X = X.X
    pred = predict_features(model, X, names)
    path = Path(args.out) / args.name
    write_csv(path, ["y_hat"], [pred])
    print(path)
    return EXIT_OK


def cmd_gridsearch(args) -> int:
    base = _config(args)
    data, names, scaler = _load_training(args.data, args.normalize)
    params = {"nu": args.nu_grid, "eps": args.eps_grid}.get(base.model.value, [0.0])
    grid = ex.GridSpec.from_exponents(args.grid_exponents, params)
    best, report = ex.gridsearch(data, base, grid, folds=args.folds, seed=args.seed,
                                 jobs=args.jobs)
    report.metadata["preprocessing"] = scaler.to_dict() if scaler else {"type": "none"}
    ex.write_report(report, args.out, timestamp=_now())
    model = with_metadata(fit(data, best), feature_names=names,
                          preprocessing=report.metadata["preprocessing"])
    save_model(model, Path(args.out) / "best_model.json")
    print(json.dumps({"best": best.to_dict(), "cv_loss": report.metadata["best_cv_loss"]}))
    return EXIT_OK


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def experiment_kwargs(args) -> dict:
    """Translate experiment flags into keyword overrides for ``experiments.experimentN``."""
    kw = {"seed": args.seed, "tol": args.tol, "max_iter": args.max_iter, "jobs": args.jobs}
    n = args.id
    if args.trials is not None and n != 4:
        kw["trials"] = args.trials
    if args.q is not None:
        kw["q"] = args.q
    if n in (1, 2, 3, 5):
        if args.tau is not None:
            kw["taus"] = tuple(args.tau)
        if args.c is not None:
            kw["C"] = args.c
    if n in (1, 5) and args.nu is not None:
        kw["nus"] = tuple(args.nu)
    if n in (2, 3, 4) and args.nu is not None:
        kw["nu"] = _single(args.nu, "nu")
    if n == 1:
        if args.l is not None:
            kw["l"] = _single(args.l, "l")
        if args.sigma is not None:
            kw["sigma"] = _single(args.sigma, "sigma")
    if n == 2:
        if args.l is not None:
            kw["sizes"] = tuple(args.l)
        if args.sigma is not None:
            kw["sigma"] = _single(args.sigma, "sigma")
    if n == 3:
        if args.l is not None:
            kw["l"] = _single(args.l, "l")
        if args.sigma is not None:
            kw["sigmas"] = tuple(args.sigma)
    if n == 4:
        if args.tau is not None:
            kw["tau"] = _single(args.tau, "tau")
        if args.l is not None:
            kw["l"] = _single(args.l, "l")
        if args.eps is not None:
            kw["eps"] = args.eps
        if args.c is not None:
            kw["C_eps"] = args.c
        if args.c_nu is not None:
            kw["C_nu"] = args.c_nu
    if n == 5:
        kw["normalize"] = args.normalize
        kw["servo_path"] = (args.servo_path or os.environ.get(SERVO_ENV)
                            or DEFAULT_SERVO_PATH)
    return kw


EXPERIMENTS = {1: ex.experiment1, 2: ex.experiment2, 3: ex.experiment3, 4: ex.experiment4,
               5: ex.experiment5}


def cmd_experiment(args) -> int:
    report = EXPERIMENTS[args.id](**experiment_kwargs(args))
    out = args.out or f"results/experiment{args.id}"
    ex.write_report(report, out, timestamp=_now())
    ex.print_summary(report)
    print(f"wrote {out}")
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "fit": cmd_fit, "predict": cmd_predict,
            "gridsearch": cmd_gridsearch, "experiment": cmd_experiment}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except QpNonConvergenceError as exc:
        print(f"error: solver did not converge: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (DataFormatError, InputError, ValueError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
