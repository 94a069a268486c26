import numpy as np
import pytest

from forgecast import ridge
from forgecast.core import Dataset, DimensionError, SplitSpec, ages_of, make_split
from forgecast.forgetting import ForgettingParams, MechanismKind, weight_jacobian, weight_vector


@pytest.fixture
def mean_dataset():
    # two training rows with x = 1 and one validation row
    return Dataset(features=[[1.0], [1.0], [1.0]], labels=[2.0, 4.0, 0.0])


@pytest.fixture
def mean_split():
    return SplitSpec(train_end=2, valid_end=3, test_end=3)


def test_lower_objective_examples(mean_dataset, mean_split):
    cfg = ridge.SolverConfig()
    assert ridge.lower_objective(mean_dataset, mean_split, [1.0, 1.0], [0.0], cfg) == pytest.approx(20.0)
    assert ridge.lower_objective(mean_dataset, mean_split, [0.0, 0.0], [7.0], cfg) == 0.0
    assert ridge.lower_objective(mean_dataset, mean_split, [1.0, 3.0], [3.5], cfg) == pytest.approx(3.0)


def test_lower_objective_dimension_mismatch(mean_dataset, mean_split):
    with pytest.raises(DimensionError):
        ridge.lower_objective(mean_dataset, mean_split, [1.0, 1.0], [0.0, 1.0], ridge.SolverConfig())
    with pytest.raises(DimensionError):
        ridge.lower_objective(mean_dataset, mean_split, [1.0], [0.0], ridge.SolverConfig())


def test_solve_weighted_mean(mean_dataset, mean_split):
    cfg = ridge.SolverConfig()
    assert ridge.solve(mean_dataset, mean_split, [1.0, 1.0], cfg).theta[0] == pytest.approx(3.0)
    assert ridge.solve(mean_dataset, mean_split, [1.0, 3.0], cfg).theta[0] == pytest.approx(3.5)


def test_solve_residuals(mean_dataset, mean_split):
    solution = ridge.solve(mean_dataset, mean_split, [1.0, 1.0], ridge.SolverConfig())
    np.testing.assert_allclose(solution.residuals, [-1.0, 1.0])


def test_solve_shrinks_under_huge_penalty(toy_dataset, toy_split):
    solution = ridge.solve(toy_dataset, toy_split, np.ones(40), ridge.SolverConfig(1e12))
    assert np.linalg.norm(solution.theta) < 1e-6


def test_solve_matches_lstsq(toy_dataset, toy_split):
    weights = np.linspace(0.1, 1.0, 40)
    solution = ridge.solve(toy_dataset, toy_split, weights, ridge.SolverConfig())
    X, y = toy_dataset.train(toy_split)
    root = np.sqrt(weights)
    expected, *_ = np.linalg.lstsq(X * root[:, None], y * root, rcond=None)
    np.testing.assert_allclose(solution.theta, expected, rtol=1e-10)


def test_solution_minimises_lower_objective(toy_dataset, toy_split):
    weights = np.linspace(0.1, 1.0, 40)
    cfg = ridge.SolverConfig(1e-4)
    theta = ridge.solve(toy_dataset, toy_split, weights, cfg).theta
    best = ridge.lower_objective(toy_dataset, toy_split, weights, theta, cfg)
    rng = np.random.default_rng(0)
    for _ in range(100):
        delta = rng.normal(size=theta.shape)
        delta *= 1e-3 / np.linalg.norm(delta)
        assert ridge.lower_objective(toy_dataset, toy_split, weights, theta + delta, cfg) >= best


def test_solve_invariant_to_joint_rescaling(toy_dataset, toy_split):
    weights = np.linspace(0.1, 1.0, 40)
    base = ridge.solve(toy_dataset, toy_split, weights, ridge.SolverConfig(1e-3))
    scaled = ridge.solve(toy_dataset, toy_split, 7.5 * weights, ridge.SolverConfig(7.5e-3))
    np.testing.assert_allclose(scaled.theta, base.theta, rtol=1e-10)


def test_solve_singular_names_rank_defect():
    X = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0], [1.0, 1.0]])
    dataset = Dataset(features=X, labels=[1.0, 2.0, 3.0, 0.0])
    split = SplitSpec(train_end=3, valid_end=4, test_end=4)
    with pytest.raises(ridge.SingularMatrixError) as e:
        ridge.solve(dataset, split, np.ones(3), ridge.SolverConfig())
    assert 'rank defect 1' in str(e.value)


def test_penalty_fixes_singularity():
    X = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0], [1.0, 1.0]])
    dataset = Dataset(features=X, labels=[1.0, 2.0, 3.0, 0.0])
    split = SplitSpec(train_end=3, valid_end=4, test_end=4)
    solution = ridge.solve(dataset, split, np.ones(3), ridge.SolverConfig(1e-3))
    assert np.all(np.isfinite(solution.theta))


def test_all_zero_weights_rejected(mean_dataset, mean_split):
    with pytest.raises(ridge.DegenerateWeightsError):
        ridge.solve(mean_dataset, mean_split, [0.0, 0.0], ridge.SolverConfig(1e-3))


def test_negative_penalty_rejected():
    with pytest.raises(ValueError):
        ridge.SolverConfig(-1.0)


def test_implicit_jacobian_zero_cases(toy_dataset, toy_split):
    cfg = ridge.SolverConfig()
    solution = ridge.solve(toy_dataset, toy_split, np.ones(40), cfg)
    jac = ridge.implicit_jacobian(solution, toy_dataset, toy_split, np.zeros((40, 3)), cfg)
    assert jac.shape == (2, 3)
    assert np.all(jac == 0)

    X = np.random.default_rng(3).normal(size=(30, 2))
    exact = Dataset(features=X, labels=X @ np.array([1.0, -2.0]))
    split = make_split(30, 20, 5, 5)
    solution = ridge.solve(exact, split, np.ones(20), cfg)
    jac = ridge.implicit_jacobian(solution, exact, split, np.ones((20, 1)), cfg)
    np.testing.assert_allclose(jac, 0.0, atol=1e-10)


def test_identity_hessian_mode(toy_dataset, toy_split):
    eta = ForgettingParams(MechanismKind.EXPONENTIAL, [0.05])
    ages = ages_of(toy_split)
    cfg = ridge.SolverConfig(hessian_mode='identity')
    solution = ridge.solve(toy_dataset, toy_split, weight_vector(eta, ages), cfg)
    wjac = weight_jacobian(eta, ages)
    X, _ = toy_dataset.train(toy_split)
    expected = 2.0 * X.T @ (wjac * solution.residuals[:, None])
    np.testing.assert_allclose(ridge.implicit_jacobian(solution, toy_dataset, toy_split, wjac, cfg), expected)


def test_validation_loss_subsets(toy_dataset, toy_split):
    solution = ridge.solve(toy_dataset, toy_split, np.ones(40), ridge.SolverConfig())
    full = ridge.validation_loss(solution, toy_dataset, toy_split)
    parts = ridge.validation_loss(solution, toy_dataset, toy_split, range(0, 7)) + \
        ridge.validation_loss(solution, toy_dataset, toy_split, range(7, 15))
    assert parts == pytest.approx(full)
    with pytest.raises(ValueError):
        ridge.validation_loss(solution, toy_dataset, toy_split, [15])


def test_gradient_vanishes_on_perfect_validation_fit():
    X = np.random.default_rng(5).normal(size=(30, 2))
    dataset = Dataset(features=X, labels=X @ np.array([0.3, 0.7]))
    split = SplitSpec(20, 30, 30)
    eta = ForgettingParams(MechanismKind.EXPONENTIAL, [0.1])
    grad, loss = ridge.upper_gradient(eta, dataset, split, None, ridge.SolverConfig())
    np.testing.assert_allclose(grad, 0.0, atol=1e-12)
    assert loss == pytest.approx(0.0, abs=1e-20)


def test_gradient_vanishes_where_weights_are_flat(toy_dataset, toy_split):
    # a single training row has age 0, where alpha does not move with eta
    split = SplitSpec(train_end=1, valid_end=16, test_end=16)
    dataset = Dataset(features=toy_dataset.features[:16, :1], labels=toy_dataset.labels[:16])
    eta = ForgettingParams(MechanismKind.EXPONENTIAL, [0.4])
    grad, loss = ridge.upper_gradient(eta, dataset, split, None, ridge.SolverConfig())
    assert grad[0] == 0.0
    assert loss > 0


def _fd_gradient(eta, dataset, split, cfg):
    ages = ages_of(split)
    phi_scale = np.abs(eta.kind.features(ages)).max(axis=0)
    grad = np.empty(eta.kind.dim)
    for i in range(eta.kind.dim):
        h = 1e-3 / phi_scale[i]
        step = np.zeros(eta.kind.dim)
        step[i] = h

        def loss(e):
            solution = ridge.solve(dataset, split, weight_vector(ForgettingParams(eta.kind, e), ages), cfg)
            return ridge.validation_loss(solution, dataset, split)
        grad[i] = (loss(eta.eta + step) - loss(eta.eta - step)) / (2 * h)
    return grad


def _random_instance(rng):
    d = int(rng.integers(1, 4))
    train_end = int(rng.integers(20, 51))
    valid = int(rng.integers(5, 16))
    X = rng.normal(size=(train_end + valid, d))
    drift = np.linspace(1.0, -1.0, train_end + valid)[:, None]
    y = np.sum(X * drift * rng.normal(size=d), axis=1) + 0.1 * rng.normal(size=train_end + valid)
    return Dataset(features=X, labels=y), SplitSpec(train_end, train_end + valid, train_end + valid)


@pytest.mark.parametrize('kind', [MechanismKind.EXPONENTIAL, MechanismKind.MIXED_DECAY])
@pytest.mark.parametrize('penalty', [0.0, 1e-4])
def test_upper_gradient_matches_finite_differences(kind, penalty):
    rng = np.random.default_rng(100 + kind.dim * 10 + int(penalty > 0))
    cfg = ridge.SolverConfig(penalty)
    # scale keeps the oldest weights well away from underflow
    scale = np.array([0.2]) if kind is MechanismKind.EXPONENTIAL else np.array([0.05, 1e-3, 0.5])
    for _ in range(13):
        dataset, split = _random_instance(rng)
        eta = ForgettingParams(kind, scale * rng.uniform(0.05, 1.0, size=kind.dim))
        grad, _ = ridge.upper_gradient(eta, dataset, split, None, cfg)
        fd = _fd_gradient(eta, dataset, split, cfg)
        assert np.max(np.abs(grad - fd)) <= 1e-5 * (np.linalg.norm(fd) + 1e-10)


def test_upper_gradient_on_drifting_series(drifting_dataset):
    split = SplitSpec(35, 50, 50)
    eta = ForgettingParams(MechanismKind.EXPONENTIAL, [0.2])
    cfg = ridge.SolverConfig()
    grad, _ = ridge.upper_gradient(eta, drifting_dataset, split, None, cfg)
    fd = _fd_gradient(eta, drifting_dataset, split, cfg)
    assert abs(grad[0] - fd[0]) <= 1e-5 * abs(fd[0]) + 1e-9


def test_batch_gradients_sum_to_full_gradient(toy_dataset, toy_split):
    eta = ForgettingParams(MechanismKind.MIXED_DECAY, [0.01, 1e-4, 0.2])
    cfg = ridge.SolverConfig(1e-4)
    full, full_loss = ridge.upper_gradient(eta, toy_dataset, toy_split, None, cfg)
    g1, l1 = ridge.upper_gradient(eta, toy_dataset, toy_split, range(0, 8), cfg)
    g2, l2 = ridge.upper_gradient(eta, toy_dataset, toy_split, range(8, 15), cfg)
    np.testing.assert_allclose(g1 + g2, full, rtol=1e-10)
    assert l1 + l2 == pytest.approx(full_loss)
