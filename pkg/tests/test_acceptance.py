"""Acceptance criteria, each at its stated tolerance.

Every test records a single PASS/FAIL line (see conftest.py) before asserting.
"""

import time

import numpy as np
import pytest

from detequiv import closedform as cf
from detequiv.equivalent import radial_density, radial_measure, sinkhorn_limit
from detequiv.master import (
    _picard,
    admissibility_scan,
    component_bounds,
    gradient_q,
    solve_master,
    solve_regularized,
)
from detequiv.montecarlo import compare, eigenvalues, sample_matrix, singular_values
from detequiv.montecarlo.kernels import jacobi_svd, qr_eigenvalues
from detequiv.profile import build_profile, normalize
from detequiv.schwinger import solve_sd, wegner_profile

from oracles import (
    charpoly_faddeev_leverrier,
    durand_kerner,
    match_multisets,
    singular_values_oracle,
)

SHIPPED_SEED = 0


def sombrero_profile(n):
    half = n // 2
    d = np.concatenate([np.full(half, 2.0), np.full(n - half, 1.0)])
    return build_profile("separable", d=d, dtilde=np.ones(n))


def builtin_profiles():
    return {
        "constant": build_profile("constant", n=200),
        "block": build_profile("block", k=3, n=300),
        "sombrero": sombrero_profile(400),
        "band A": build_profile({"kind": "sampled_band_A", "n": 400}),
        "band B": build_profile({"kind": "sampled_band_B", "n": 400}),
    }


def test_criterion_01_circular_law(criterion):
    details, ok = [], True
    for n in (50, 200):
        t0 = time.perf_counter()
        m = radial_measure(normalize(build_profile("constant", n=n)))
        dt = time.perf_counter() - t0
        f_err = float(np.max(np.abs(m.F - m.s_grid ** 2)))
        inner = (m.s_grid > 0.05) & (m.s_grid < 0.95)
        p_err = float(np.max(np.abs(m.phi[inner] - 1 / np.pi)))
        ok &= f_err <= 1e-6 and p_err <= 1e-4 and dt <= 10
        details.append(f"n={n} |F-s^2|={f_err:.1e} |phi-1/pi|={p_err:.1e} {dt:.1f}s")
    assert criterion(1, "circular law", ok, "; ".join(details))


def test_criterion_02_block_model(criterion):
    m = radial_measure(normalize(build_profile("block", k=3, n=300)))
    law = cf.block(3)
    rstar = law.support_radius
    inner = (m.s_grid > 0.02) & (m.s_grid < rstar - 0.02)
    f_err = float(np.max(np.abs(m.F[inner] - cf.closed_F(law, m.s_grid[inner]))))
    a_err = abs(m.atom0 - 1 / 3)
    ok = f_err <= 1e-4 and a_err <= 5e-3
    assert criterion(2, "block model", ok, f"|F-closed|={f_err:.1e} atom0={m.atom0:.6f}")


def test_criterion_03_sombrero(criterion):
    v = normalize(sombrero_profile(400))
    m = radial_measure(v)
    law = cf.sombrero(2, 1)
    inner = (m.s_grid > 0.05) & (m.s_grid < np.sqrt(1.5) - 0.05)
    p_err = float(np.max(np.abs(m.phi[inner] - cf.closed_phi(law, m.s_grid[inner]))))
    phi0 = sinkhorn_limit(v).phi0
    z_err = abs(phi0 - 0.75 / np.pi)
    ok = p_err <= 1e-3 and z_err <= 1e-6
    assert criterion(3, "sombrero", ok, f"|phi-closed|={p_err:.1e} |phi0-0.75/pi|={z_err:.1e}")


def test_criterion_04_trace_identities(criterion):
    profs = {k: normalize(p) for k, p in builtin_profiles().items()}
    worst_q = 0.0
    for v in profs.values():
        rs = np.sqrt(v.rho)
        for frac in (0.2, 0.5, 0.8):
            sol = solve_master(v, frac * rs)
            worst_q = max(worst_q, abs(sol.q.sum() - sol.qtilde.sum()))
    rng = np.random.default_rng(404)
    names = list(profs)
    worst_r = worst_p = 0.0
    for k in range(20):
        v = profs[names[k % len(names)]]
        s = float(rng.uniform(0.05, 1.5))
        t = float(10 ** rng.uniform(-3, 0))
        eta = complex(rng.uniform(-1, 1), 10 ** rng.uniform(-2, 0))
        worst_r = max(worst_r, solve_regularized(v, s, t).trace_gap)
        worst_p = max(worst_p, solve_sd(v, s, eta).trace_gap)
    ok = max(worst_q, worst_r, worst_p) <= 1e-10
    assert criterion(4, "trace identities", ok,
                     f"master {worst_q:.1e}, regularized {worst_r:.1e}, Schwinger-Dyson {worst_p:.1e}")


def test_criterion_05_gradient_vs_finite_differences(criterion):
    h = 1e-5
    worst, where = 0.0, ""
    for name, p in builtin_profiles().items():
        v = normalize(p)
        rs = np.sqrt(v.rho)
        for frac in (0.2, 0.4, 0.6):
            s = frac * rs
            g = gradient_q(v, solve_master(v, s))
            up, dn = solve_master(v, s + h), solve_master(v, s - h)
            fd = (up.stacked - dn.stacked) / (2 * h)
            err = float(np.max(np.abs(np.concatenate([g.dq, g.dqtilde]) - fd)))
            if err > worst:
                worst, where = err, f"{name} at {frac} sqrt(rho)"
    assert criterion(5, "gradient cross-check", worst <= 1e-5, f"worst {worst:.1e} ({where}), h={h:g}")


def test_criterion_06_admissibility_bounds(criterion):
    rng = np.random.default_rng(606)
    grid = (1.0, 0.1, 0.01, 1e-3, 1e-4)
    worst_a = worst_b = 0.0
    for _ in range(10):
        v = normalize(build_profile("dense", matrix=rng.uniform(0.5, 1.0, (40, 40))))
        worst_a = max(worst_a, admissibility_scan(v, float(rng.uniform(0.05, 1.5)), grid))
    for _ in range(10):
        a = rng.uniform(0.0, 1.5, (40, 40))
        v = normalize(build_profile("dense", matrix=(a + a.T) / 2))
        worst_b = max(worst_b, admissibility_scan(v, 0.25, grid))
    ok = worst_a <= 2.0 and worst_b <= 2.0
    assert criterion(6, "admissibility bounds", ok,
                     f"sigma in [0.5,1]: max {worst_a:.4f} <= 2; symmetric at s=0.25: max {worst_b:.4f} <= 2")


def test_criterion_07_schwinger_dyson_consistency(criterion):
    rng = np.random.default_rng(707)
    v = normalize(build_profile("dense", matrix=rng.uniform(0.0, 2.0, (30, 30))))
    worst = 0.0
    for _ in range(10):
        z = float(rng.uniform(0.05, 1.5))
        t = float(10 ** rng.uniform(-2, 0))
        sd = solve_sd(v, z, 1j * t)
        reg = solve_regularized(v, z, t)
        err = max(np.max(np.abs(sd.p.imag - reg.r)), np.max(np.abs(sd.ptilde.imag - reg.rtilde)),
                  np.max(np.abs(sd.p.real)), np.max(np.abs(sd.ptilde.real)))
        worst = max(worst, float(err))
    g = solve_sd(normalize(build_profile("constant", n=50)), 0.0, 1j).g
    g_err = abs(g - 1j * (np.sqrt(5) - 1) / 2)
    ok = worst <= 1e-10 and g_err <= 1e-10
    assert criterion(7, "Schwinger-Dyson consistency", ok, f"|Im p - r| {worst:.1e}; |g(i)-target| {g_err:.1e}")


def test_criterion_08_component_bounds(criterion):
    rng = np.random.default_rng(808)
    profiles = [normalize(build_profile("dense", matrix=rng.uniform(lo, 2.0, (25, 25))))
                for lo in (0.0, 0.0, 0.3, 1.0)]
    profiles.append(normalize(build_profile("block", k=3, n=30)))
    solves = violations = 0
    for v in profiles:
        for s in (0.1, 0.5, 1.0, 2.5):
            for t in (1.0, 0.1, 0.01, 1e-3):
                # check_bounds also asserts the exact bounds on every accepted iterate
                try:
                    sol = solve_regularized(v, s, t, check_bounds=True)
                except AssertionError:
                    violations += 1
                    continue
                solves += 1
                violations += len(component_bounds(v, s, t, sol.r, sol.rtilde))
    assert criterion(8, "component bounds", violations == 0,
                     f"{solves} solves with per-iterate checks, {violations} violations")


def test_criterion_09_monte_carlo(criterion):
    n = 500
    t0 = time.perf_counter()
    p = build_profile("constant", n=n)
    Y = sample_matrix(p, "complex-gaussian", SHIPPED_SEED)
    ev = eigenvalues(Y)
    m = radial_measure(normalize(p), n_points=64)
    ks = compare(m, ev, exact_cdf=lambda s: np.minimum(np.asarray(s) ** 2, 1.0)).ks
    sv = singular_values(Y)
    rep = compare(solve_sd(normalize(p), 0.0, 1j), sv)
    t_circ = time.perf_counter() - t0
    t0 = time.perf_counter()
    B = sample_matrix(build_profile("block", k=3, n=300), "complex-gaussian", SHIPPED_SEED)
    evb = eigenvalues(B)
    atom = float(np.mean(np.abs(evb) <= 1e-8 * np.abs(B).max()))
    t_block = time.perf_counter() - t0
    ok = ks <= 0.06 and rep.sup_distance <= 0.05 and atom >= 1 - 2 / 3 - 0.01 and max(t_circ, t_block) <= 60
    assert criterion(9, "Monte Carlo agreement", ok,
                     f"seed {SHIPPED_SEED}: KS={ks:.4f}, |dg|={rep.sup_distance:.1e} ({t_circ:.1f}s); "
                     f"block zero fraction={atom:.4f} ({t_block:.1f}s)")


def test_criterion_10_wegner_linearity(criterion):
    v = normalize(build_profile("block", k=3, n=60))
    out = wegner_profile(v, 0.3, [0.1, 0.05, 0.025])
    ratios = np.array([b / x for x, b in out])
    spread = float(ratios.max() / ratios.min() - 1)
    assert criterion(10, "Wegner linearity", spread < 0.2,
                     f"ratios {', '.join(f'{r:.4f}' for r in ratios)}; spread {spread:.1%}")


def test_criterion_11_blowup_asymptotics(criterion):
    n = 1000
    x = np.arange(1, n + 1) / n
    v = normalize(build_profile("separable", d=x, dtilde=x))
    s = 0.02
    phi = radial_density(v, solve_master(v, s))
    ratio = phi * 4 * s
    assert criterion(11, "blow-up asymptotics", abs(ratio - 1) <= 0.15, f"phi(0.02)*4s = {ratio:.4f}")


def test_criterion_12_oracle_kernels(criterion):
    rng = np.random.default_rng(1212)
    worst_s = 0.0
    for _ in range(100):
        A = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        worst_s = max(worst_s, float(np.max(np.abs(np.sort(jacobi_svd(A)) - singular_values_oracle(A)))))
    worst_e = 0.0
    for _ in range(100):
        A = rng.standard_normal((6, 6))
        worst_e = max(worst_e, match_multisets(qr_eigenvalues(A), durand_kerner(charpoly_faddeev_leverrier(A))))
    ok = worst_s <= 1e-10 and worst_e <= 1e-6
    assert criterion(12, "oracle kernels", ok, f"SVD {worst_s:.1e}; eigenvalues {worst_e:.1e}")
