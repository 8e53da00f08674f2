import numpy as np
import pytest

from detequiv.equivalent import radial_measure
from detequiv.montecarlo import (
    LAWS,
    compare,
    eigenvalues,
    empirical_radial_cdf,
    empirical_stieltjes,
    get_law,
    row_generator,
    sample_matrix,
    sample_spectrum,
    singular_values,
)
from detequiv.montecarlo.kernels import jacobi_svd, qr_eigenvalues
from detequiv.profile import build_profile, normalize
from detequiv.schwinger import second_moment, solve_sd

from oracles import (
    charpoly_faddeev_leverrier,
    durand_kerner,
    match_multisets,
    singular_values_oracle,
)


@pytest.mark.parametrize("tag", sorted(LAWS))
def test_law_moments(tag):
    law = get_law(tag)
    N = 10 ** 6
    x = law.draw(row_generator(123, 0, law.index), N)
    assert x.dtype == np.complex128
    assert law.is_complex == bool(np.any(x.imag != 0))
    # 5 sigma bands for the mean and the second absolute moment
    assert abs(x.mean()) < 5 / np.sqrt(N)
    m2 = np.mean(np.abs(x) ** 2)
    assert abs(m2 - 1) <= 5 * np.sqrt(max(law.fourth_moment - 1, 0) / N) + 1e-12
    assert np.mean(np.abs(x) ** 4) == pytest.approx(law.fourth_moment, rel=0.02)


def test_unknown_law():
    with pytest.raises(ValueError):
        get_law("cauchy")


def test_reproducible_and_seed_sensitive():
    p = build_profile("constant", n=40)
    a = sample_matrix(p, "complex-gaussian", 7)
    b = sample_matrix(p, "complex-gaussian", 7)
    c = sample_matrix(p, "complex-gaussian", 8)
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, c)
    # rows are independent streams: a larger matrix shares nothing forced with a smaller one
    assert np.array_equal(sample_spectrum(p, seed=7).singular_values,
                          sample_spectrum(p, seed=7).singular_values)


def test_zero_and_block_profiles():
    Y = sample_matrix(build_profile("constant", n=6, c=0.0), "real-gaussian", 1)
    assert not Y.any()
    p = build_profile("block", k=3, m=4)
    Y = sample_matrix(p, "complex-gaussian", 2)
    assert np.array_equal(Y == 0, p.sigma == 0)


def test_frobenius_scale_constant_500():
    Y = sample_matrix(build_profile("constant", n=500), "real-gaussian", 2024)
    assert 0.9 <= np.vdot(Y, Y).real / 500 <= 1.1


def test_svd_trivial_cases():
    assert np.allclose(singular_values(np.eye(5)), 1.0, atol=1e-15)
    assert np.allclose(singular_values(np.diag([3.0, -4.0])), [3.0, 4.0], atol=1e-15)


def test_svd_against_oracle_with_shift():
    rng = np.random.default_rng(9)
    for _ in range(10):
        Y = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        z = complex(rng.standard_normal(), rng.standard_normal())
        assert np.max(np.abs(singular_values(Y, z) - singular_values_oracle(Y, z))) < 1e-10


def test_svd_factors_orthogonal_and_reconstruct():
    rng = np.random.default_rng(10)
    A = rng.standard_normal((30, 30)) + 1j * rng.standard_normal((30, 30))
    U, s, Vh = jacobi_svd(A, compute_uv=True)
    scale = s.max()
    assert np.all(np.diff(s) <= 0)
    assert np.max(np.abs(U.conj().T @ U - np.eye(30))) < 1e-10
    assert np.max(np.abs(Vh @ Vh.conj().T - np.eye(30))) < 1e-10
    assert np.max(np.abs((U * s) @ Vh - A)) < 1e-10 * scale


def test_svd_rejects_nonfinite():
    A = np.eye(3)
    A[0, 1] = np.nan
    with pytest.raises(ValueError):
        singular_values(A)


def test_eigen_trivial_cases():
    ev = np.sort_complex(eigenvalues(np.array([[0.0, 1.0], [1.0, 0.0]])))
    assert np.allclose(ev, [-1, 1], atol=1e-14)
    rng = np.random.default_rng(12)
    T = np.triu(rng.standard_normal((8, 8)))
    assert match_multisets(eigenvalues(T), np.diag(T)) < 1e-12


def test_eigen_against_polynomial_oracle():
    rng = np.random.default_rng(13)
    for _ in range(10):
        A = rng.standard_normal((6, 6))
        roots = durand_kerner(charpoly_faddeev_leverrier(A))
        assert match_multisets(qr_eigenvalues(A), roots) < 1e-6


def test_eigen_cap():
    with pytest.raises(ValueError):
        eigenvalues(np.eye(4), cap=3)


def test_sample_identities():
    p = build_profile("separable", d=np.linspace(0.5, 1.5, 60), dtilde=np.ones(60))
    for seed in range(3):
        sp = sample_spectrum(p, "complex-gaussian", seed, z=0.3 + 0.1j)
        Y = sample_matrix(p, "complex-gaussian", seed)
        G = Y - (0.3 + 0.1j) * np.eye(60)
        fro = np.vdot(G, G).real
        assert np.sum(sp.singular_values ** 2) == pytest.approx(fro, rel=1e-12)
        ev = sp.eigenvalues
        assert abs(ev.sum() - np.trace(Y)) <= 1e-8 * 60 * np.abs(Y).max()
        s0 = singular_values(Y)
        assert np.sum(np.abs(ev) ** 2) <= np.sum(s0 ** 2) * (1 + 1e-12)


def test_second_moment_over_seeds():
    p = build_profile("block", k=3, m=20)
    v = normalize(p)
    z = 0.4
    vals = [np.mean(sample_spectrum(p, "complex-gaussian", seed, z=z, with_eigenvalues=False)
                    .singular_values ** 2) for seed in range(20)]
    mean = np.mean(vals)
    se = np.std(vals, ddof=1) / np.sqrt(len(vals))
    assert abs(mean - second_moment(v, z)) <= 3 * se


def test_empirical_radial_cdf_point_mass():
    assert np.all(empirical_radial_cdf([0j], [0.0, 0.5, 2.0]) == 1.0)


def test_empirical_stieltjes_two_point():
    assert empirical_stieltjes([1.0, 1.0], 1j) == pytest.approx(0.5j)
    assert empirical_stieltjes([1.0], 1j) == pytest.approx(0.5 / (1 - 1j) + 0.5 / (-1 - 1j))


def test_compare_identical_and_mismatch():
    m = radial_measure(normalize(build_profile("constant", n=10)), n_points=20)
    rep = compare(m, m)
    assert rep.sup_distance == 0.0
    other = radial_measure(normalize(build_profile("constant", n=10)), n_points=21)
    with pytest.raises(ValueError):
        compare(m, other)
    sd = solve_sd(normalize(build_profile("constant", n=4)), 0.0, 1j)
    assert compare(sd, [1.0, 1.0]).sup_distance == pytest.approx(abs(0.5j - sd.g))


def test_compare_circular_sample_n200():
    p = build_profile("constant", n=200)
    sp = sample_spectrum(p, "complex-gaussian", 5)
    m = radial_measure(normalize(p), n_points=64)
    rep = compare(m, sp.eigenvalues, exact_cdf=lambda s: np.minimum(np.asarray(s) ** 2, 1.0))
    assert rep.ks < 0.1
    assert rep.samples == 200
