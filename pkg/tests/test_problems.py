import numpy as np
import pytest

from subspace_ucb.problems import (
    MORE_WILD_SUITE,
    SCALABLE_SUITE,
    DimensionError,
    OracleAccessError,
    check_gradient_fd,
    check_lipschitz,
    embed_low_effective_dim,
    haar_orthogonal,
    make_problem,
    resolve_problem,
    sphere,
)


@pytest.mark.parametrize("name", SCALABLE_SUITE)
def test_scalable_gradients_match_finite_differences(name):
    prob = make_problem(name, 12)
    x = prob.initial_point + 0.1 * np.random.default_rng(1).standard_normal(12)
    g, fd = check_gradient_fd(prob, x)
    assert np.allclose(g, fd, rtol=1e-5, atol=1e-5 * max(1.0, np.abs(g).max()))


@pytest.mark.parametrize("name,dim", MORE_WILD_SUITE)
def test_small_suite_gradients_match_finite_differences(name, dim):
    prob = make_problem(name, dim)
    x = prob.initial_point + 0.05 * np.random.default_rng(2).standard_normal(dim)
    g, fd = check_gradient_fd(prob, x)
    assert np.allclose(g, fd, rtol=1e-5, atol=1e-5 * max(1.0, np.abs(g).max()))


def test_counters_charge_per_call_and_column():
    prob = sphere(4)
    prob.evaluate(np.zeros(4))
    prob.sketched_gradient(np.ones(4), np.eye(4)[:, :3])
    assert prob.eval_count == 1
    assert prob.dirderiv_count == 3


def test_sketched_gradient_is_s_transpose_grad():
    prob = make_problem("rosenbrock", 4)
    x = np.array([0.3, -0.2, 1.1, 0.7])
    S = np.random.default_rng(0).standard_normal((4, 2))
    assert np.allclose(prob.sketched_gradient(x, S), S.T @ prob.gradient(x))


def test_gradient_locked_inside_solver_run():
    prob = sphere(3)
    with prob.solver_run():
        with pytest.raises(OracleAccessError):
            prob.gradient(np.ones(3))
        with prob.diagnostic_access():
            assert np.allclose(prob.gradient(np.ones(3)), np.ones(3))
    assert np.allclose(prob.gradient(np.ones(3)), np.ones(3))


def test_dimension_mismatch_rejected():
    prob = sphere(3)
    with pytest.raises(DimensionError):
        prob.evaluate(np.ones(4))
    with pytest.raises(DimensionError):
        make_problem("beale", 3)


def test_value_log_records_only_when_asked():
    prob = sphere(2)
    prob.evaluate(np.ones(2))
    assert prob.value_log == []
    with prob.solver_run(record_values=True):
        prob.evaluate(np.zeros(2))
    assert prob.value_log == [0.0]


def test_haar_orthogonal_is_orthogonal():
    Q = haar_orthogonal(30, np.random.default_rng(0))
    assert np.abs(Q.T @ Q - np.eye(30)).max() < 1e-12


def test_embedding_preserves_value_and_flat_directions():
    base = make_problem("beale")
    emb = embed_low_effective_dim(base, 20, seed=3)
    assert emb.evaluate(emb.initial_point) == pytest.approx(base.evaluate(base.initial_point))
    # rows of the rotation beyond the first d are directions of no change
    flat = emb.rotation[base.dim:].T
    g = emb.gradient(emb.initial_point + 0.1)
    assert np.abs(flat.T @ g).max() < 1e-12


def test_resolve_problem_selectors():
    assert resolve_problem("sphere:7").dim == 7
    emb = resolve_problem("beale@D=30,seed=4")
    assert emb.dim == 30 and emb.seed == 4
    with pytest.raises(ValueError):
        resolve_problem("not a selector!")


def test_lipschitz_bound_holds_for_quadratics():
    rep = check_lipschitz(make_problem("ill_quadratic", 10), np.random.default_rng(0))
    assert rep.violations == 0
    assert rep.max_ratio <= rep.bound * (1 + 1e-12)
