import numpy as np
import pytest

from detequiv.master import (
    ConvergenceError,
    ReducibleProfileError,
    admissibility_scan,
    component_bounds,
    gradient_q,
    solve_master,
    solve_regularized,
)
from detequiv.profile import build_profile, normalize

from oracles import block_pattern_q, scalar_regularized


@pytest.fixture(scope="module")
def const20():
    return normalize(build_profile("constant", n=20))


@pytest.fixture(scope="module")
def block9():
    return normalize(build_profile("block", k=3, m=3))


def test_regularized_constant_matches_scalar_root(const20):
    sol = solve_regularized(const20, 1.0, 0.1)
    r_star = scalar_regularized(1.0, 0.1)
    assert r_star == pytest.approx(0.4, abs=1e-14)
    assert np.max(np.abs(sol.r - r_star)) < 1e-11
    assert np.max(np.abs(sol.rtilde - r_star)) < 1e-11
    assert sol.residual <= 1e-12
    assert sol.trace_gap < 1e-10


def test_regularized_doubly_stochastic():
    # a circulant pattern has constant row and column sums
    n = 12
    sig = np.zeros((n, n))
    for i in range(n):
        for d in (0, 1, 5):
            sig[i, (i + d) % n] = 2.0
    v = normalize(build_profile("dense", matrix=sig))
    rowsum = v.v.sum(axis=1)[0]
    assert np.allclose(v.v.sum(axis=0), rowsum) and np.allclose(v.v.sum(axis=1), rowsum)
    sol = solve_regularized(v, 0.5, 0.01)
    # V 1 = rowsum 1 reduces the system to the scalar one with V replaced by its row sum
    r = sol.r[0]
    assert np.ptp(sol.r) < 1e-11 and np.ptp(sol.rtilde) < 1e-11
    psi = 0.01 + rowsum * r
    assert r == pytest.approx(psi / (0.25 + psi * psi), abs=1e-12)


def test_large_s_bound(const20):
    sol = solve_regularized(const20, 2.0, 0.5, check_bounds=True)
    cap = min(0.5 / (4 - 1), 1 / 0.5)
    assert cap == pytest.approx(1 / 6)
    assert sol.r.max() <= cap and sol.rtilde.max() <= cap
    assert sol.r.max() <= 1 / np.sqrt(4 - 1)


def test_component_bounds_hold_on_random_profile():
    rng = np.random.default_rng(11)
    v = normalize(build_profile("dense", matrix=rng.uniform(0, 2, (15, 15))))
    for s, t in [(0.3, 0.5), (1.0, 0.01), (2.5, 0.2)]:
        sol = solve_regularized(v, s, t, check_bounds=True)
        assert component_bounds(v, s, t, sol.r, sol.rtilde) == []


def test_regularized_rejects_bad_input(const20):
    with pytest.raises(ValueError):
        solve_regularized(const20, 1.0, 0.0)
    with pytest.raises(ValueError):
        solve_regularized(const20, 1.0, 0.1, init=(np.ones(3), np.ones(3)))


def test_regularized_nonconvergence_carries_iterate(const20):
    with pytest.raises(ConvergenceError) as err:
        solve_regularized(const20, 0.5, 1e-6, max_iter=3)
    assert err.value.last.shape == (40,)
    assert err.value.iterations == 3


def test_master_constant(const20):
    sol = solve_master(const20, 0.6)
    assert not sol.trivial and sol.converged
    assert np.max(np.abs(sol.q - 0.8)) < 1e-10
    assert np.max(np.abs(sol.qtilde - 0.8)) < 1e-10
    assert abs(sol.q.sum() - sol.qtilde.sum()) < 1e-10


def test_master_trivial_branch(const20):
    sol = solve_master(const20, 1.2)
    assert sol.trivial
    assert not sol.q.any() and not sol.qtilde.any()


def test_master_block_pattern(block9):
    s = 0.5
    sol = solve_master(block9, s)
    q, qc = block_pattern_q(3, s)
    # rows 1..m carry one value and the remaining rows the other
    assert np.allclose(sol.q[:3], sol.q[0]) and np.allclose(sol.q[3:], sol.q[3])
    assert sol.q[0] == pytest.approx(q, abs=1e-10)
    assert sol.q[3] == pytest.approx(qc, abs=1e-10)
    assert np.allclose(sol.q, sol.qtilde, atol=1e-10)


def test_master_reducible_rejected():
    J = np.ones((2, 2))
    Z = np.zeros((2, 2))
    v = normalize(build_profile("dense", matrix=np.block([[J, Z], [Z, J]])))
    with pytest.raises(ReducibleProfileError):
        solve_master(v, 0.3)


def test_master_rejects_nonpositive_s(const20):
    with pytest.raises(ValueError):
        solve_master(const20, 0.0)


def test_gradient_constant(const20):
    g = gradient_q(const20, solve_master(const20, 0.6))
    assert np.max(np.abs(g.dq + 0.75)) < 1e-9
    assert np.max(np.abs(g.dqtilde + 0.75)) < 1e-9


def test_gradient_grows_toward_edge(const20):
    mags = [abs(gradient_q(const20, solve_master(const20, s)).dq[0]) for s in (0.9, 0.95, 0.99)]
    assert mags[0] < mags[1] < mags[2]
    for s, m in zip((0.9, 0.95, 0.99), mags):
        assert m == pytest.approx(s / np.sqrt(1 - s * s), rel=1e-8)


def test_gradient_requires_nontrivial(const20):
    with pytest.raises(ValueError):
        gradient_q(const20, solve_master(const20, 1.5))


def test_admissibility_bounded_entries():
    rng = np.random.default_rng(5)
    v = normalize(build_profile("dense", matrix=rng.uniform(0.5, 1.0, (20, 20))))
    for s in (0.1, 0.5, 1.5):
        assert admissibility_scan(v, s, (1, 0.1, 0.01, 0.001)) <= 2.0


def test_admissibility_symmetric():
    rng = np.random.default_rng(6)
    a = rng.uniform(0, 1, (20, 20))
    v = normalize(build_profile("dense", matrix=(a + a.T) / 2))
    assert v.symmetric
    assert admissibility_scan(v, 0.25) <= 2.0


def test_admissibility_constant(const20):
    assert admissibility_scan(const20, 1.0, (1, 0.1, 0.01, 0.001)) <= 1.0


def test_admissibility_rejects_bad_grid(const20):
    with pytest.raises(ValueError):
        admissibility_scan(const20, 1.0, (2.0,))
