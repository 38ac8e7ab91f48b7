import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradix import autodiff as ad
from gradix import rte
from gradix.errors import NonFiniteError, TrainingAbort, UsageError
from gradix.rte.case import with_source
from gradix.network import Architecture, TapedParams, flatten, init, unflatten, zeros
from gradix.sampling import Family, build_training_set
from gradix.training import (
    AdamConfig,
    EnsembleConfig,
    LbfgsConfig,
    LossConfig,
    OptimizerConfig,
    PinnLoss,
    adam_minimize,
    ensemble_train,
    input_scaling,
    lbfgs_minimize,
    loss_forward,
    loss_inverse,
    train_forward,
    train_inverse,
)
from gradix.training.drivers import params_checksum

QUICK = OptimizerConfig(AdamConfig(max_iters=30), LbfgsConfig(max_iters=30))


def quadratic(A, b):
    def f(x):
        return 0.5 * x @ A @ x - b @ x, A @ x - b

    return f


def rosenbrock(x):
    a, b = x
    f = (1 - a) ** 2 + 100 * (b - a * a) ** 2
    g = np.array([-2 * (1 - a) - 400 * a * (b - a * a), 200 * (b - a * a)])
    return f, g


def spd(rng, n):
    M = rng.normal(size=(n, n))
    return M @ M.T + n * np.eye(n)


# configuration validation -------------------------------------------------------

def test_loss_config_validation():
    with pytest.raises(UsageError):
        LossConfig(lam=0.0)
    with pytest.raises(UsageError):
        LossConfig(lam_reg=0.1)
    with pytest.raises(UsageError):
        LossConfig(q=3)


def test_optimizer_config_validation():
    with pytest.raises(UsageError):
        AdamConfig(beta1=1.0)
    with pytest.raises(UsageError):
        LbfgsConfig(memory=0)
    with pytest.raises(UsageError):
        LbfgsConfig(c1=0.9, c2=0.1)
    with pytest.raises(UsageError):
        EnsembleConfig(widths=())
    with pytest.raises(UsageError):
        EnsembleConfig(n_theta=0)


def test_halved_budgets():
    cfg = OptimizerConfig().halved()
    assert cfg.adam.max_iters == 250 and cfg.lbfgs.max_iters == 1000


# optimizers -------------------------------------------------------------------

def test_adam_scalar_convex():
    res = adam_minimize(lambda t: ((t[0] - 3) ** 2, np.array([2 * (t[0] - 3)])), np.zeros(1),
                        AdamConfig(lr=0.01, max_iters=2000))
    assert abs(res.theta[0] - 3) < 1e-4


def test_adam_monotone_windows_on_quadratics():
    rng = np.random.default_rng(0)
    for _ in range(10):
        A = spd(rng, 5)
        f = quadratic(A, rng.normal(size=5))
        hist = adam_minimize(f, rng.normal(size=5), AdamConfig(lr=0.01, max_iters=1000)).history
        # lower at the end of each 100-iteration window, up to round-off
        assert all(hist[i + 100] <= hist[i] + 1e-14 for i in range(0, len(hist) - 100, 100))


def test_adam_flat_start_stops_immediately():
    res = adam_minimize(lambda t: (1.0, np.zeros_like(t)), np.ones(3))
    assert res.iterations == 0 and res.message == "gradient tolerance"


def test_lbfgs_rosenbrock():
    res = lbfgs_minimize(rosenbrock, np.array([-1.2, 1.0]), LbfgsConfig(max_iters=200))
    assert res.loss < 1e-8
    assert res.iterations <= 200


def test_lbfgs_spd_quadratic():
    rng = np.random.default_rng(1)
    A, b = spd(rng, 10), rng.normal(size=10)
    res = lbfgs_minimize(quadratic(A, b), np.zeros(10), LbfgsConfig(grad_tol=1e-10, max_iters=30))
    assert np.linalg.norm(A @ res.theta - b) < 1e-10
    assert res.iterations <= 30


def test_lbfgs_optimal_start():
    A = np.eye(3)
    res = lbfgs_minimize(quadratic(A, np.zeros(3)), np.zeros(3))
    assert res.iterations == 0 and res.message == "gradient tolerance"


def test_optimizers_leave_inputs_alone():
    x0 = np.array([-1.2, 1.0])
    keep = x0.copy()
    lbfgs_minimize(rosenbrock, x0, LbfgsConfig(max_iters=20))
    adam_minimize(rosenbrock, x0, AdamConfig(max_iters=20))
    assert np.array_equal(x0, keep)


def test_optimizers_deterministic():
    a = lbfgs_minimize(rosenbrock, np.array([-1.2, 1.0]), LbfgsConfig(max_iters=50))
    b = lbfgs_minimize(rosenbrock, np.array([-1.2, 1.0]), LbfgsConfig(max_iters=50))
    assert np.array_equal(a.theta, b.theta) and a.history == b.history


def test_nonfinite_loss_aborts_with_snapshot():
    calls = []

    def f(x):
        calls.append(1)
        if len(calls) > 3:
            return float("nan"), np.zeros_like(x)
        return float(x @ x), 2 * x

    with pytest.raises(TrainingAbort) as info:
        adam_minimize(f, np.ones(2), AdamConfig(max_iters=10))
    assert info.value.snapshot["loss"] <= 2.0


def test_lbfgs_returns_best_seen():
    res = lbfgs_minimize(rosenbrock, np.array([-1.2, 1.0]), LbfgsConfig(max_iters=15))
    assert res.loss == min(res.history)


# losses -----------------------------------------------------------------------

def slab_sets(ke=1.0, n_int=8, n_sb=4):
    case = rte.case_slab_discontinuous(ke=ke)
    return case, build_training_set(case, {"N_int": n_int, "N_sb": n_sb})


def test_zero_net_slab_boundary_term():
    case, sets = slab_sets()
    # the boundary term alone: |R_sb| = 1 at each inflow point
    only_sb = type(sets)(Family.empty(1), sets.spatial_boundary, Family.empty(1), Family.empty(1), sets.coords)
    value = loss_forward(zeros(Architecture((1, 3, 1))), only_sb, case).value
    assert value == pytest.approx(sets.spatial_boundary.weights.sum())


def test_exact_interpolant_leaves_regularization_only():
    case = rte.case_2d_gaussian_inverse(ke=1.0)
    sets = build_training_set(case, {"N_int": 16, "N_d": 8})
    tape = ad.Tape()
    value = loss_inverse(case.exact, sets, case, LossConfig(), tape=tape)
    assert abs(ad.value_of(value)) < 1e-8


def test_loss_linear_in_lambda():
    case, sets = slab_sets(n_int=16)
    params = init(Architecture((1, 5, 1)), 0)
    one = loss_forward(params, sets, case, LossConfig(lam=1.0)).value
    ten = loss_forward(params, sets, case, LossConfig(lam=10.0)).value
    R = PinnLoss(case, sets, params.arch).residuals(flatten(params))["int"]
    interior = float(np.sum(sets.interior.weights * R ** 2))
    assert ten - one == pytest.approx(9 * interior, rel=1e-12)


def test_inverse_data_term():
    case = rte.case_2d_gaussian_inverse(ke=1.0)
    sets = build_training_set(case, {"N_int": 0, "N_d": 12})
    sets.data.targets = np.ones(12)
    net = zeros(Architecture((2, 3, 1)))
    assert loss_inverse(net, sets, case).value == pytest.approx(sets.data.weights.sum())
    sets.data.weights = 2 * sets.data.weights
    assert loss_inverse(net, sets, case).value == pytest.approx(sets.data.weights.sum())


def test_family_checks():
    case, sets = slab_sets()
    net = zeros(Architecture((1, 3, 1)))
    with pytest.raises(UsageError):
        loss_inverse(net, sets, case)
    inv = rte.case_2d_gaussian_inverse(ke=1.0)
    inv_sets = build_training_set(inv, {"N_int": 8, "N_d": 8})
    with pytest.raises(UsageError):
        loss_forward(zeros(Architecture((2, 3, 1))), inv_sets, inv)
    with pytest.raises(UsageError):
        train_forward(inv, {"N_int": 8, "N_d": 8}, Architecture((2, 3, 1)), opt_cfg=QUICK)
    with pytest.raises(UsageError):
        train_inverse(case, {"N_int": 8, "N_sb": 4}, Architecture((1, 3, 1)), opt_cfg=QUICK)


def test_nonfinite_residual_names_point():
    case, sets = slab_sets()
    sets.spatial_boundary.targets = np.array([np.nan] * len(sets.spatial_boundary))
    with pytest.raises(NonFiniteError) as info:
        loss_forward(zeros(Architecture((1, 3, 1))), sets, case)
    assert info.value.point is not None


def test_tape_gradient_matches_fd():
    case, sets = slab_sets(ke=2.0, n_int=8, n_sb=2)
    params = init(Architecture((1, 4, 1)), 5)
    theta = flatten(params)
    tape = ad.Tape()
    tp = TapedParams(params, tape)
    grad = np.array(ad.reverse_gradient(loss_forward(tp, sets, case), tp.leaves))
    fd = np.empty_like(theta)
    for i in range(len(theta)):
        up, dn = theta.copy(), theta.copy()
        up[i] += 1e-5
        dn[i] -= 1e-5
        fd[i] = (loss_forward(unflatten(params.arch, up), sets, case).value
                 - loss_forward(unflatten(params.arch, dn), sets, case).value) / 2e-5
    assert np.allclose(grad, fd, rtol=1e-4, atol=1e-10)


@pytest.mark.parametrize("name", ["slab-discontinuous", "2d-gaussian", "2d-gaussian-inverse",
                                  "manufactured-graded-radial"])
def test_batched_loss_matches_tape(name):
    case = rte.get_case(name)
    inverse = case.inverse
    counts = {"N_int": 6, "N_d": 5} if inverse else {"N_int": 6, "N_sb": 4}
    sets = build_training_set(case, counts)
    arch = Architecture.mlp(len(case.coords), 2, 5)
    params = init(arch, 2)
    cfg = LossConfig(lam=3.0, lam_reg=0.01)
    batched = PinnLoss(case, sets, arch, cfg, inverse=inverse)
    loss, grad = batched(flatten(params))
    tape = ad.Tape()
    tp = TapedParams(params, tape)
    value = (loss_inverse if inverse else loss_forward)(tp, sets, case, cfg)
    assert loss == pytest.approx(value.value, rel=1e-12)
    assert np.allclose(grad, ad.reverse_gradient(value, tp.leaves), rtol=1e-9, atol=1e-12)


def test_input_scaling_is_transparent():
    case = rte.case_slab_discontinuous(ke=1.0)
    sets = build_training_set(case, {"N_int": 16, "N_sb": 2})
    arch = Architecture((1, 6, 6, 1))
    plain = PinnLoss(case, sets, arch, LossConfig(lam_reg=0.001))
    scaled = PinnLoss(case, sets, arch, LossConfig(lam_reg=0.001), scale=input_scaling(case))
    params = init(arch, 1)
    theta_s = scaled.from_physical(params)
    assert np.allclose(flatten(scaled.to_physical(theta_s)), flatten(params), atol=1e-15)
    la, ga = plain(flatten(params))
    lb, gb = scaled(theta_s)
    assert la == pytest.approx(lb, rel=1e-12)
    # gradient with respect to scaled parameters, by finite differences
    fd = np.empty_like(theta_s)
    for i in range(len(theta_s)):
        e = np.zeros_like(theta_s)
        e[i] = 1e-6
        fd[i] = (scaled(theta_s + e)[0] - scaled(theta_s - e)[0]) / 2e-6
    assert np.allclose(gb, fd, rtol=1e-5, atol=1e-8)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_loss_permutation_invariant(seed):
    case = rte.case_2d_gaussian(ke=1.0)
    sets = build_training_set(case, {"N_int": 24, "N_sb": 12})
    params = init(Architecture((2, 5, 1)), 0)
    before, _ = PinnLoss(case, sets, params.arch)(flatten(params))
    rng = np.random.default_rng(seed)
    for fam in (sets.interior, sets.spatial_boundary):
        order = rng.permutation(len(fam))
        fam.points, fam.weights, fam.targets = fam.points[order], fam.weights[order], \
            (None if fam.targets is None else fam.targets[order])
    after, _ = PinnLoss(case, sets, params.arch)(flatten(params))
    assert after == pytest.approx(before, rel=1e-12)


# drivers ----------------------------------------------------------------------

def small_run(seed=0):
    case = rte.case_1d_gaussian(ke=1.0, alpha=0.2)
    return case, train_forward(case, {"N_int": 64, "N_sb": 1}, Architecture((1, 6, 6, 1)), LossConfig(),
                               QUICK, seed=seed)


def test_train_forward_improves_and_reports():
    case, res = small_run()
    assert res.final_loss < res.history[0]
    assert res.counts == {"N_int": 64, "N_sb": 1, "N_tb": 0, "N_d": 0}
    assert set(res.iterations) == {"adam", "lbfgs", "evaluations"}
    doc = res.to_dict()
    assert doc["history"] == [float(v) for v in res.history[::10]]


def test_final_loss_matches_reevaluation():
    case, res = small_run()
    sets = build_training_set(case, res.counts)
    value = loss_forward(res.params, sets, case, res.loss_cfg).value
    assert res.final_loss == pytest.approx(value, rel=1e-10, abs=1e-10)


def test_training_deterministic():
    _, a = small_run(3)
    _, b = small_run(3)
    _, c = small_run(4)
    assert params_checksum(a.params) == params_checksum(b.params)
    assert a.history == b.history and a.errors == b.errors
    assert params_checksum(a.params) != params_checksum(c.params)


def test_ensemble_single_config_matches_train_forward():
    case, res = small_run(7)
    ens = ensemble_train(case, {"N_int": 64, "N_sb": 1}, EnsembleConfig((2,), (6,), (1.0,), 1), opt_cfg=QUICK,
                         seed=7, threads=1)
    assert params_checksum(ens.best.params) == params_checksum(res.params)
    assert len(ens.leaderboard) == 1


def test_ensemble_selects_lowest_loss():
    case = rte.case_1d_gaussian(ke=1.0, alpha=0.2)
    cfg = EnsembleConfig((1, 2), (4,), (0.1, 1.0), 2)
    ens = ensemble_train(case, {"N_int": 32, "N_sb": 1}, cfg, opt_cfg=QUICK, seed=0, threads=2)
    losses = [r["final_loss"] for r in ens.leaderboard]
    assert len(losses) == len(cfg) == 8
    assert losses == sorted(losses)
    assert ens.best.final_loss == min(losses)
    assert {r["seed"] for r in ens.leaderboard} == {0, 1}
    again = ensemble_train(case, {"N_int": 32, "N_sb": 1}, cfg, opt_cfg=QUICK, seed=0, threads=1)
    assert [r["final_loss"] for r in again.leaderboard] == losses


def test_default_grid_cardinality():
    assert len(EnsembleConfig((4, 8), (20, 24), (0.1, 1, 10), 4)) == 48


def test_ensemble_all_failures_raise():
    case = rte.case_slab_discontinuous(ke=1.0)
    poisoned = with_source(case, lambda P: np.full(len(P), np.nan))
    with pytest.raises(TrainingAbort):
        ensemble_train(poisoned, {"N_int": 8, "N_sb": 1}, EnsembleConfig((1,), (3,), (1.0,), 2), opt_cfg=QUICK,
                       threads=1)


def test_inverse_dense_data_interpolates():
    case = rte.make_inverse(rte.case_2d_gaussian(ke=1.0, alpha=0.3), ((0.0, 1.0), (0.0, 1.0)))
    res = train_inverse(case, {"N_int": 256, "N_d": 256}, Architecture((2, 12, 12, 1)), LossConfig(),
                        OptimizerConfig(AdamConfig(max_iters=200), LbfgsConfig(max_iters=300)))
    sets = build_training_set(case, {"N_int": 256, "N_d": 256})
    from gradix.network import evaluate_batch

    pred, _ = evaluate_batch(res.params, sets.data.points)
    assert np.sqrt(np.mean((pred - sets.data.targets) ** 2)) < 1e-2
