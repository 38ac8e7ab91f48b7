"""Command-line front end: ``gradix run|sweep|verify|oracle``."""

import argparse
import csv
import json
import os
import sys
import time
from importlib import resources

import numpy as np

from .errors import GradixError, TrainingAbort, UsageError
from .metrics import report, test_set
from .network import Architecture, evaluate_batch, save_params
from .rte import get_case, oracle_integrate_characteristic
from .training import EnsembleConfig, LossConfig, OptimizerConfig, ensemble_train, train_forward, train_inverse

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_ABORT = 0, 1, 2, 3
DESK_COUNTS = {"N_int": 2048, "N_sb": 512, "N_tb": 512, "N_d": 2048}
COUNT_KEYS = ("N_int", "N_sb", "N_tb", "N_d")


def _fmt(v):
    return "%.17g" % v


# configuration -------------------------------------------------------------------

def bundled_configs():
    return sorted(p.name for p in resources.files("gradix.configs").iterdir() if p.name.endswith(".json"))


def _resolve(path):
    if os.path.exists(path):
        return path
    name = path if path.endswith(".json") else path + ".json"
    candidate = resources.files("gradix.configs").joinpath(os.path.basename(name))
    if candidate.is_file():
        return str(candidate)
    raise UsageError(f"config {path!r} not found (bundled: {', '.join(bundled_configs())})")


def load_config(path):
    try:
        with open(_resolve(path)) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path!r} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict) or "case" not in cfg:
        raise UsageError("config must be a JSON object with a 'case' entry")
    return cfg


class RunSetup:
    """Everything a run needs, validated from a config dictionary."""

    def __init__(self, cfg, desk=False, seed=None):
        known = {"name", "case", "physics", "counts", "architecture", "loss", "optimizer", "ensemble",
                 "seed", "strategy", "notes"}
        unknown = set(cfg) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        self.name = cfg.get("name", cfg["case"])
        self.case = get_case(cfg["case"], **cfg.get("physics", {}))
        counts = {k: int(cfg.get("counts", {}).get(k, 0)) for k in COUNT_KEYS}
        extra = set(cfg.get("counts", {})) - set(COUNT_KEYS)
        if extra:
            raise UsageError(f"unknown count keys: {sorted(extra)}")
        if desk:
            counts = {k: (DESK_COUNTS[k] if v else 0) for k, v in counts.items()}
        self.counts = counts
        arch = cfg.get("architecture", {})
        try:
            self.arch = Architecture.mlp(len(self.case.coords), int(arch.get("hidden_layers", 4)),
                                         int(arch.get("width", 20)))
            loss = cfg.get("loss", {})
            self.loss_cfg = LossConfig(lam=float(loss.get("lambda", 1.0)),
                                       lam_reg=float(loss.get("lambda_reg", 0.0)), q=int(loss.get("q", 2)))
            opt = OptimizerConfig.from_dict(cfg.get("optimizer"))
        except TypeError as exc:
            raise UsageError(f"bad optimizer or architecture settings: {exc}") from None
        self.opt_cfg = opt.halved() if desk else opt
        ens = cfg.get("ensemble")
        self.ensemble = None
        if ens is not None:
            try:
                self.ensemble = EnsembleConfig(hidden_layers=ens["hidden_layers"], widths=ens["widths"],
                                               lams=ens["lambdas"], n_theta=int(ens.get("n_theta", 1)))
            except KeyError as exc:
                raise UsageError(f"ensemble config lacks {exc}") from None
        self.seed = int(cfg.get("seed", 0) if seed is None else seed)
        self.strategy = cfg.get("strategy", "sobol")
        self.desk = desk
        self.raw = cfg


# outputs -----------------------------------------------------------------------

def write_field(path, case, params, test):
    exact = case.exact_values(test.points) if case.exact is not None else np.full(len(test), np.nan)
    pred, _ = evaluate_batch(params, test.points)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*case.coords, "I_exact", "I_pred", "abs_err"])
        for p, e, q in zip(test.points, exact, pred):
            w.writerow([*(_fmt(v) for v in p), _fmt(e), _fmt(q), _fmt(abs(q - e))])


def write_loss(path, history):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "loss"])
        for i, v in enumerate(history):
            w.writerow([i, _fmt(v)])


def write_run(out, setup, result):
    os.makedirs(out, exist_ok=True)
    test = test_set(setup.case)
    rep = report(result, setup.case, test)
    doc = {
        "config": setup.name,
        "desk": setup.desk,
        "physics": setup.case.params,
        "report": rep.to_dict(),
        "train": result.to_dict(),
    }
    with open(os.path.join(out, "run.json"), "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_field(os.path.join(out, "field.csv"), setup.case, result.params, test)
    write_loss(os.path.join(out, "loss.csv"), result.history)
    save_params(os.path.join(out, "model.params.json"), result.params)
    return rep


# commands ----------------------------------------------------------------------

def _train(setup):
    trainer = train_inverse if setup.case.inverse else train_forward
    return trainer(setup.case, setup.counts, setup.arch, setup.loss_cfg, setup.opt_cfg, setup.seed, setup.strategy)


def cmd_run(args):
    setup = RunSetup(load_config(_need_config(args)), desk=args.desk, seed=args.seed)
    result = _train(setup)
    rep = write_run(args.out, setup, result)
    print(rep.table_row())
    print(f"L2 abs {rep.E_G['abs']:.3e}  rel {rep.E_G['rel']:.3e}  -> {args.out}")
    return EXIT_OK


def cmd_sweep(args):
    setup = RunSetup(load_config(_need_config(args)), desk=args.desk, seed=args.seed)
    if setup.ensemble is None:
        raise UsageError("sweep needs an 'ensemble' section in the config")
    ens = ensemble_train(setup.case, setup.counts, setup.ensemble, setup.loss_cfg, setup.opt_cfg,
                         setup.seed, setup.strategy)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "leaderboard.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rank", "hidden_layers", "width", "lambda", "seed", "final_loss", "status"])
        for rank, row in enumerate(ens.leaderboard, 1):
            w.writerow([rank, row["layers"], row["width"], _fmt(row["lambda"]), row["seed"],
                        _fmt(row["final_loss"]), row["status"]])
    best = ens.best
    setup.arch = best.params.arch
    setup.loss_cfg = best.loss_cfg
    rep = write_run(args.out, setup, best)
    print(f"{len(ens.leaderboard)} runs; best: {rep.table_row()}")
    return EXIT_OK


def cmd_verify(args):
    from .verify import run_checks

    start = time.perf_counter()
    results = run_checks()
    width = max(len(r[0]) for r in results)
    for name, ok, detail, secs in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {detail}  ({secs:.2f}s)")
    failed = [r[0] for r in results if not r[1]]
    total = time.perf_counter() - start
    if failed:
        print(f"{len(failed)} check(s) failed: {', '.join(failed)}  [{total:.1f}s]")
        return EXIT_VERIFY
    print(f"all {len(results)} checks passed  [{total:.1f}s]")
    return EXIT_OK


def _read_points(path, ncols):
    try:
        with open(path) as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    except OSError as exc:
        raise UsageError(f"cannot read points file: {exc}") from None
    if rows and any(not _is_number(c) for c in rows[0]):
        rows = rows[1:]
    if not rows:
        raise UsageError(f"points file {path!r} is empty")
    try:
        P = np.array([[float(c) for c in r] for r in rows])
    except ValueError:
        raise UsageError("points file must hold numeric rows") from None
    if P.ndim != 2 or P.shape[1] != ncols:
        raise UsageError(f"points need {ncols} columns")
    return P


def _is_number(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def cmd_oracle(args):
    if args.config:
        cfg = load_config(args.config)
        name, physics = cfg["case"], dict(cfg.get("physics", {}))
    elif args.case:
        name, physics = args.case, {}
    else:
        raise UsageError("oracle needs --case or --config")
    if args.ke is not None:
        physics["ke"] = args.ke
    case = get_case(name, **physics)
    if case.direction is None:
        raise UsageError(f"case {name!r} has no fixed direction")
    if case.exact is None:
        raise UsageError(f"case {name!r} has no closed form to compare with")
    if args.points:
        P = _read_points(args.points, len(case.coords))
    else:
        P = test_set(case, 20 if case.dim == 1 else 5).points
    exact = case.exact_values(P)
    ref = oracle_integrate_characteristic(case, P, args.steps)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "oracle.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*case.coords, "I_exact", "I_oracle", "abs_diff"])
        for p, e, o in zip(P, exact, ref):
            w.writerow([*(_fmt(v) for v in p), _fmt(e), _fmt(o), _fmt(abs(e - o))])
    print(f"{case.name} k_e={case.ke:g}: {len(P)} points, max |exact - oracle| = "
          f"{float(np.max(np.abs(exact - ref))):.3e} -> {path}")
    return EXIT_OK


def _need_config(args):
    if not args.config:
        raise UsageError(f"{args.command} needs --config (bundled: {', '.join(bundled_configs())})")
    return args.config


def build_parser():
    parser = argparse.ArgumentParser(prog="gradix", description="PINN solver for graded-index radiative transfer.")
    parser.add_argument("command", choices=["run", "sweep", "verify", "oracle"])
    parser.add_argument("--config", help="JSON config path or bundled config name")
    parser.add_argument("--desk", action="store_true", help="reduced scale: fewer points, half the iterations")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", default="out", help="output directory (default: out)")
    parser.add_argument("--case", help="oracle: catalog case name")
    parser.add_argument("--ke", type=float, help="oracle: extinction coefficient")
    parser.add_argument("--points", help="oracle: CSV of evaluation points")
    parser.add_argument("--steps", type=int, default=4000, help="oracle: RK4 steps (default 4000)")
    return parser


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "verify": cmd_verify, "oracle": cmd_oracle}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except TrainingAbort as exc:
        print(f"gradix: training aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except (UsageError, GradixError, OSError) as exc:
        print(f"gradix: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
