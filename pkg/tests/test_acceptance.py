"""End-to-end acceptance gates, one printed PASS/FAIL line per criterion.

Cases train at desk scale from the bundled configs. Every error gate is ten
times the reference value for that row. Whether a reference value is an
absolute or a relative L2 error is not stated, so a row passes when the
smaller of the two is within the gate and the line says which one was used.

The verdicts are collected into an "acceptance criteria" section at the end of
the pytest report.
"""

import json
import sys
import time
from dataclasses import dataclass, replace

import numpy as np
import pytest

from gradix import cli, metrics
from gradix.network import evaluate_batch
from gradix.training import EnsembleConfig, LossConfig, OptimizerConfig, ensemble_train
from gradix.verify import check_bounds_duplicate, check_bounds_monotone, run_checks


@dataclass
class Recipe:
    """How an acceptance row is trained, on top of the bundled desk config."""

    config: str
    gate: float
    rel_gate: float = None
    layers: int = None
    width: int = None
    lam: float = None
    adam: int = None
    lbfgs: int = None
    n_theta: int = 1
    tv_gate: float = None
    time_gate: float = None


def train(recipe):
    setup = cli.RunSetup(cli.load_config(recipe.config), desk=True)
    layers = recipe.layers or len(setup.arch.widths) - 2
    width = recipe.width or setup.arch.widths[1]
    lam = setup.loss_cfg.lam if recipe.lam is None else recipe.lam
    opt = setup.opt_cfg
    if recipe.adam or recipe.lbfgs:
        opt = OptimizerConfig(replace(opt.adam, max_iters=recipe.adam or opt.adam.max_iters),
                              replace(opt.lbfgs, max_iters=recipe.lbfgs or opt.lbfgs.max_iters))
    ens = EnsembleConfig(hidden_layers=(layers,), widths=(width,), lams=(lam,), n_theta=recipe.n_theta)
    start = time.perf_counter()
    out = ensemble_train(setup.case, setup.counts, ens, LossConfig(lam=lam), opt, setup.seed, setup.strategy,
                         threads=1)
    wall = time.perf_counter() - start
    return setup.case, out.best, wall


def evaluate(recipe):
    case, res, wall = train(recipe)
    test = metrics.test_set(case)
    abs_err, rel_err = metrics.generalization_error(res.params, case, test)
    used, err = ("abs", abs_err) if abs_err <= rel_err else ("rel", rel_err)
    ok = err <= recipe.gate
    parts = [f"{case.name} k_e={case.ke:g}: L2 {used} {err:.2e} <= {recipe.gate:.1e}"
             f" (abs {abs_err:.2e}, rel {rel_err:.2e})"]
    if recipe.rel_gate is not None:
        ok &= rel_err <= recipe.rel_gate
        parts.append(f"rel {rel_err:.2e} <= {recipe.rel_gate:.1e}")
    if recipe.tv_gate is not None:
        pred, _ = evaluate_batch(res.params, test.points)
        tv = float(np.sum(np.abs(np.diff(pred - case.exact_values(test.points)))))
        ok &= tv < recipe.tv_gate
        parts.append(f"TV(err) {tv:.3f} < {recipe.tv_gate:g}")
    if recipe.time_gate is not None:
        ok &= res.seconds <= recipe.time_gate
        parts.append(f"{res.seconds:.0f}s <= {recipe.time_gate:g}s")
    else:
        parts.append(f"{wall:.0f}s")
    if recipe.n_theta > 1:
        parts.append(f"best of {recipe.n_theta} seeds by loss (seed {res.seed})")
    return bool(ok), "; ".join(parts)


def announce(log, criterion, rows):
    ok = all(r[0] for r in rows)
    lines = [f"{'PASS' if ok else 'FAIL'} criterion {criterion}"]
    lines += [f"    {'ok  ' if r[0] else 'MISS'} {r[1]}" for r in rows]
    log.extend(lines)
    text = "\n".join(lines)
    print(text)
    return ok, text


# criterion recipes --------------------------------------------------------------

GAUSSIAN_1D = [
    Recipe("table2_case1", 10 * 4.24e-5, time_gate=120),
    Recipe("table2_case2", 10 * 3.77e-5, time_gate=120),
    Recipe("table2_case3", 10 * 4.09e-5, time_gate=120),
]
SLAB = [
    Recipe("table3_case1", 10 * 1.0e-4, tv_gate=0.05),
    Recipe("table3_case2", 10 * 4.0e-4, tv_gate=0.05),
    Recipe("table3_case3", 10 * 5.0e-4, tv_gate=0.05),
    Recipe("table3_case4", 10 * 9.0e-4, tv_gate=0.05),
]
SQUARE = [
    Recipe("table4_case1", 10 * 5.6e-4, layers=4, width=28, lam=10.0, lbfgs=4000, n_theta=3),
    Recipe("table4_case2", 10 * 4.8e-4, layers=4, width=28, lam=10.0, lbfgs=4000, n_theta=3),
    Recipe("table4_case3", 10 * 5.9e-4, layers=4, width=28, lam=10.0, lbfgs=4000, n_theta=3),
]
GAUSSIAN_2D = [
    Recipe("table7_case1", 10 * 0.04),
    Recipe("table7_case2", 10 * 0.05, rel_gate=2.5e-2, lam=1.0),
]
DIAGONAL = [
    Recipe("table6_case1", 10 * 2e-4),
    Recipe("table6_case2", 10 * 1.2e-3),
    Recipe("table6_case3", 10 * 3e-3),
]
INVERSE = [
    Recipe("table8_case1", 10 * 8e-4),
    Recipe("table8_case2", 10 * 5e-4, rel_gate=3e-2),
]


def check_recipes(log, criterion, recipes):
    ok, text = announce(log, criterion, [evaluate(r) for r in recipes])
    assert ok, text


def test_criterion_1_gaussian_1d(acceptance_log):
    check_recipes(acceptance_log, 1, GAUSSIAN_1D)


def test_criterion_2_slab_discontinuous(acceptance_log):
    check_recipes(acceptance_log, 2, SLAB)


def test_criterion_3_square_diagonal(acceptance_log):
    check_recipes(acceptance_log, 3, SQUARE)


def test_criterion_4_gaussian_2d(acceptance_log):
    check_recipes(acceptance_log, 4, GAUSSIAN_2D)


def test_criterion_5_diagonal_gaussian(acceptance_log):
    check_recipes(acceptance_log, 5, DIAGONAL)


def test_criterion_6_inverse(acceptance_log):
    check_recipes(acceptance_log, 6, INVERSE)


def test_criterion_7_property_suite(acceptance_log):
    start = time.perf_counter()
    results = run_checks()
    total = time.perf_counter() - start
    rows = [(passed, f"{name}: {detail}") for name, passed, detail, _ in results]
    rows.append((total < 60, f"full suite {total:.1f}s < 60s"))
    ok, text = announce(acceptance_log, 7, rows)
    assert ok, text


def test_criterion_8_bounds(acceptance_log):
    dup_ok, dup = check_bounds_duplicate()
    mono_ok, mono = check_bounds_monotone()
    ok, text = announce(acceptance_log, 8, [(dup_ok, "duplicate: " + dup), (mono_ok, "monotone: " + mono)])
    assert ok, text


def test_criterion_9_determinism(acceptance_log, tmp_path):
    docs = []
    for name in ("a", "b"):
        out = tmp_path / name
        code = cli.main(["run", "--config", "table6_case1", "--desk", "--out", str(out)])
        assert code == 0
        doc = json.loads((out / "run.json").read_text())
        doc["report"].pop("seconds")
        doc["train"].pop("seconds")
        docs.append((doc, (out / "field.csv").read_bytes()))
    same_report = docs[0][0] == docs[1][0]
    same_field = docs[0][1] == docs[1][1]
    ok, text = announce(acceptance_log, 9, [
        (same_report, "table6_case1 --desk twice: run.json equal apart from wall-clock"),
        (same_field, "field.csv byte-identical"),
    ])
    assert ok, text


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
