"""Fixed-point solvers for the regularized and limiting (t = 0) master equations.

Notation: for a stacked vector r = (r, rt) of length 2n,

    psit = t + V^T r,    psi = t + V rt,    Psi = 1 / (s^2 + psi * psit),
    I(r, t) = (psit * Psi, psi * Psi).

The regularized solution is the unique positive fixed point of I(., t); the
master solution q(s) is its t -> 0 limit, nonzero exactly when s^2 < rho(V).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import qr_multiply, solve_triangular

from .profile import NormalizedProfile

__all__ = [
    "ConvergenceError",
    "ReducibleProfileError",
    "BoundViolation",
    "RegularizedSolution",
    "MasterSolution",
    "MasterGradient",
    "ContinuationSchedule",
    "solve_regularized",
    "solve_master",
    "gradient_q",
    "admissibility_scan",
    "component_bounds",
    "EDGE_TOL",
    "TRIVIAL_QMAX",
]

TOL = 1e-12
MAX_ITER = 100_000
EDGE_TOL = 1e-3        # relative width of the edge regime |s^2 - rho| < EDGE_TOL * rho
TRIVIAL_QMAX = 1e-7    # ||q||_inf below this is reported as the trivial branch
ERR_TOL = 1e-10        # target for the estimated distance to the fixed point at t = 0
STALL_WINDOW = 200     # iterations without a new best residual before damping kicks in
OSC_RUN = 20           # consecutive sign-alternating steps before damping kicks in
BOUND_SLACK = 1e-8     # relative slack for the component bounds on converged solutions


class ConvergenceError(RuntimeError):
    """Fixed-point iteration did not reach tolerance; carries the last iterate."""

    def __init__(self, msg: str, last: np.ndarray, residual: float, iterations: int):
        super().__init__(msg)
        self.last = last
        self.residual = residual
        self.iterations = iterations


class ReducibleProfileError(ValueError):
    """The master equations are solved blockwise; decompose the profile first."""


class BoundViolation(AssertionError):
    pass


@dataclass(frozen=True)
class RegularizedSolution:
    s: float
    t: float
    r: np.ndarray
    rtilde: np.ndarray
    iterations: int
    residual: float
    trace_gap: float

    def to_dict(self) -> dict:
        return {
            "s": self.s, "t": self.t, "r": self.r.tolist(), "rtilde": self.rtilde.tolist(),
            "residual": self.residual, "trace_gap": self.trace_gap, "iterations": self.iterations,
        }


@dataclass(frozen=True)
class MasterSolution:
    s: float
    q: np.ndarray
    qtilde: np.ndarray
    trivial: bool
    residual: float
    t_final: float
    converged: bool = True
    iterations: int = 0

    @property
    def stacked(self) -> np.ndarray:
        return np.concatenate([self.q, self.qtilde])

    def to_dict(self) -> dict:
        return {
            "s": self.s, "q": self.q.tolist(), "qtilde": self.qtilde.tolist(),
            "trivial": self.trivial, "residual": self.residual, "t_final": self.t_final,
            "converged": self.converged, "iterations": self.iterations,
            "trace_gap": float(abs(self.q.sum() - self.qtilde.sum())),
        }


@dataclass(frozen=True)
class MasterGradient:
    s: float
    dq: np.ndarray
    dqtilde: np.ndarray


@dataclass(frozen=True)
class ContinuationSchedule:
    """Decreasing t schedule for warm-started regularized solves.

    Each stage is a regularized solve at t, warm-started from the previous
    stage.  Continuation stops at t_min, when consecutive stages differ by
    less than q_change, or when a stage exhausts stage_budget iterations (the
    scaling mode of the t = 0 system makes small-t stages arbitrarily slow);
    the balanced t = 0 iteration then takes over.
    """

    t0: float = 1.0
    factor: float = 0.5
    t_min: float = 1e-9
    q_change: float = 1e-8
    stage_tol: float = 1e-10
    stage_budget: int = 400


# ---------------------------------------------------------------------------
# core iteration

def _image(V: np.ndarray, VT: np.ndarray, s2: float, t: float, r: np.ndarray, n: int):
    psit = t + VT @ r[:n]
    psi = t + V @ r[n:]
    Psi = 1.0 / (s2 + psi * psit)
    return np.concatenate([psit * Psi, psi * Psi]), psi, psit


def _iterate_bounds(new: np.ndarray, psi: np.ndarray, psit: np.ndarray, s2: float, t: float, n: int) -> None:
    """Exact per-iterate bounds: the image of any nonnegative vector obeys them."""
    a, b = new[:n], new[n:]
    up_a = np.minimum(psit / s2, 1.0 / psi)
    up_b = np.minimum(psi / s2, 1.0 / psit)
    eps = 4 * np.finfo(float).eps
    bad = (
        np.any(a > up_a * (1 + eps)) or np.any(a < 0.5 * up_a * (1 - eps))
        or np.any(b > up_b * (1 + eps)) or np.any(b < 0.5 * up_b * (1 - eps))
        or (t > 0 and (np.any(a > (1 + eps) / t) or np.any(b > (1 + eps) / t)))
        or np.any(a * b > (1 + eps) / s2)
    )
    if bad:
        raise BoundViolation("component bounds violated at an accepted iterate")


def component_bounds(v: NormalizedProfile, s: float, t: float, r: np.ndarray, rtilde: np.ndarray,
                     slack: float = BOUND_SLACK) -> list[str]:
    """Names of the component bounds violated by a (near) fixed point; empty if none."""
    V = v.v
    s2 = s * s
    psit = t + V.T @ r
    psi = t + V @ rtilde
    up_a = np.minimum(psit / s2, 1.0 / psi)
    up_b = np.minimum(psi / s2, 1.0 / psit)
    hi, lo = 1 + slack, 1 - slack
    out = []
    if np.any(r <= 0) or np.any(rtilde <= 0):
        out.append("positivity")
    if t > 0 and (np.any(r > hi / t) or np.any(rtilde > hi / t)):
        out.append("r <= 1/t")
    if np.any(r * rtilde > hi / s2):
        out.append("r*rtilde <= 1/s^2")
    if np.any(r > up_a * hi) or np.any(rtilde > up_b * hi):
        out.append("upper min-bound")
    if np.any(r < 0.5 * up_a * lo) or np.any(rtilde < 0.5 * up_b * lo):
        out.append("lower min-bound")
    smax2 = v.sigma_max ** 2
    if s2 > smax2 and t > 0:
        cap = min(t / (s2 - smax2), 1.0 / t)
        if np.any(r > cap * hi) or np.any(rtilde > cap * hi):
            out.append("large-s bound")
    return out


def _picard(V, VT, s2, t, r, tol, max_iter, omega=1.0, balance=False, err_tol=None,
            check=False, auto_damp=True):
    """Damped Picard iteration r <- (1 - omega) r + omega I(r, t).

    With ``balance`` (t = 0 only) every image is rescaled along the exact
    symmetry (c q, qt / c) so that sum q = sum qt.  With ``err_tol`` the
    iteration additionally requires res * lam / (1 - lam) <= err_tol, where
    lam estimates the contraction rate from the residual history.

    Returns (r, iterations, residual, converged).
    """
    n = V.shape[0]
    eps = np.finfo(float).eps
    hist: list[float] = []
    best = np.inf
    best_at = 0
    res = np.inf
    step = None
    flips = 0
    for k in range(1, max_iter + 1):
        new, psi, psit = _image(V, VT, s2, t, r, n)
        if check:
            _iterate_bounds(new, psi, psit, s2, t, n)
        if balance:
            sa, sb = new[:n].sum(), new[n:].sum()
            if sa > 0 and sb > 0:
                c = np.sqrt(sb / sa)
                new[:n] *= c
                new[n:] /= c
        delta = new - r
        res = float(np.max(np.abs(delta)))
        if not np.isfinite(res):
            return r, k, res, False
        if auto_damp and omega == 1.0:
            # a dominant negative Jacobian eigenvalue shows up as alternating steps
            if step is not None:
                flips = flips + 1 if float(delta @ step) < 0 else 0
            step = delta
            if flips >= OSC_RUN or k - best_at > STALL_WINDOW:
                omega = 0.5
        r = new if omega == 1.0 else r + omega * delta
        hist.append(res)
        if res < best:
            best, best_at = res, k
        if res <= tol:
            if err_tol is None:
                return r, k, res, True
            scale = float(np.max(np.abs(r)))
            if res <= 64 * eps * max(scale, 1.0):
                return r, k, res, True
            if len(hist) > 10 and hist[-11] > 0:
                lam = (res / hist[-11]) ** 0.1
                if lam < 1 and res * lam / (1 - lam) <= err_tol:
                    return r, k, res, True
        if len(hist) > 64:
            del hist[:32]
    return r, max_iter, res, False


def trace_target(r: np.ndarray, tol: float) -> float:
    """Attainable bound on |sum r - sum rt|: tol, or rounding level of the sums."""
    return max(tol, 16 * np.finfo(float).eps * float(np.abs(r).sum()))


def _polish(V, s2, t, r, target, max_iter, omega=1.0):
    """Continue the Picard iteration in extended precision.

    For small t the map contracts slowly along the near-symmetry (c r, rt / c),
    so in double precision its fixed point is only determined to about
    eps / (1 - lam) in that direction, which the trace identity exposes.
    Returns (r, iterations, reached) with reached meaning |sum r - sum rt| <= target.
    """
    ld = np.longdouble
    if np.finfo(ld).eps >= np.finfo(float).eps:
        return r, 0, False
    n = V.shape[0]
    Vl = V.astype(ld)
    VTl = np.ascontiguousarray(Vl.T)
    x = r.astype(ld)
    s2l, tl = ld(s2), ld(t)
    for k in range(1, max_iter + 1):
        psit = tl + VTl @ x[:n]
        psi = tl + Vl @ x[n:]
        Psi = 1 / (s2l + psi * psit)
        new = np.concatenate([psit * Psi, psi * Psi])
        x = new if omega == 1.0 else x + ld(omega) * (new - x)
        if abs(x[:n].sum() - x[n:].sum()) <= target:
            return x.astype(float), k, True
    return x.astype(float), max_iter, False


# ---------------------------------------------------------------------------
# public solvers

def solve_regularized(
    v: NormalizedProfile,
    s: float,
    t: float,
    init: Optional[tuple[np.ndarray, np.ndarray]] = None,
    tol: float = TOL,
    max_iter: int = MAX_ITER,
    omega: float = 1.0,
    check_bounds: bool = False,
) -> RegularizedSolution:
    """Positive solution (r, rt) of the regularized master equations at (s, t)."""
    if not (s > 0 and t > 0 and tol > 0):
        raise ValueError("s, t and tol must be positive")
    if not 0 < omega <= 1:
        raise ValueError("omega must lie in (0, 1]")
    n = v.n
    if init is None:
        r0 = np.ones(2 * n)
    else:
        r0 = np.concatenate([np.asarray(init[0], float), np.asarray(init[1], float)])
        if r0.shape != (2 * n,) or np.any(r0 < 0):
            raise ValueError("init must be a pair of nonnegative length-n vectors")
    V = v.v
    # stop on the estimated distance to the fixed point, not only on the step size
    r, it, res, ok = _picard(V, V.T, s * s, t, r0, tol, max_iter, omega=omega, err_tol=tol,
                             check=check_bounds)
    if not ok:
        raise ConvergenceError(
            f"regularized iteration stalled at residual {res:.3e} after {it} iterations", r, res, it)
    target = trace_target(r, tol)
    if abs(r[:n].sum() - r[n:].sum()) > target:
        om = 0.5 if v.period > 1 else omega
        r, extra, reached = _polish(V, s * s, t, r, target / 2, max_iter, om)
        it += extra
        new, _, _ = _image(V, V.T, s * s, t, r, n)
        res = float(np.max(np.abs(new - r)))
        if not reached or abs(r[:n].sum() - r[n:].sum()) > target or res > tol:
            raise ConvergenceError(
                f"regularized iteration did not reach the trace identity after {it} iterations", r, res, it)
    a, b = r[:n].copy(), r[n:].copy()
    sol = RegularizedSolution(float(s), float(t), a, b, it, res, float(abs(a.sum() - b.sum())))
    if check_bounds:
        bad = component_bounds(v, s, t, a, b)
        if bad:
            raise BoundViolation(", ".join(bad))
    return sol


def _trivial(n: int, s: float, t_final: float = 0.0, it: int = 0) -> MasterSolution:
    z = np.zeros(n)
    return MasterSolution(float(s), z, z.copy(), True, 0.0, t_final, True, it)


def solve_master(
    v: NormalizedProfile,
    s: float,
    schedule: ContinuationSchedule = ContinuationSchedule(),
    init: Optional[np.ndarray] = None,
    tol: float = TOL,
    max_iter: int = MAX_ITER,
) -> MasterSolution:
    """Solution q(s) of the master equations.

    ``init`` (stacked (q, qt) of a nearby s) skips the continuation stages.
    """
    if not s > 0:
        raise ValueError("s must be positive")
    if not v.irreducible:
        raise ReducibleProfileError(
            "variance profile is reducible; split it with decompose_irreducible first")
    n = v.n
    rho = v.rho
    s2 = s * s
    if s2 >= rho:
        return _trivial(n, s)
    edge = abs(s2 - rho) < EDGE_TOL * rho
    V = v.v
    VT = V.T
    total = 0
    t_final = 0.0
    if init is not None:
        r = np.asarray(init, dtype=float).copy()
        if r.shape != (2 * n,) or not np.any(r > 0):
            r = np.ones(2 * n)
            init = None
    if init is None:
        r = np.ones(2 * n)
        t = schedule.t0
        prev = None
        while t >= schedule.t_min:
            r, it, res, ok = _picard(V, VT, s2, t, r, schedule.stage_tol, schedule.stage_budget)
            total += it
            t_final = t
            if not ok:
                break
            if prev is not None and np.max(np.abs(r - prev)) < schedule.q_change:
                break
            prev = r
            t *= schedule.factor
    # a periodic V has Jacobian eigenvalues near -1 close to the edge; damp from the start
    omega = 0.5 if v.period > 1 else 1.0
    r, it, res, ok = _picard(V, VT, s2, 0.0, r, tol, max_iter, omega=omega, balance=True,
                             err_tol=None if edge else ERR_TOL)
    total += it
    if np.max(r) < TRIVIAL_QMAX:
        return _trivial(n, s, t_final, total)
    if not ok:
        if edge:
            return MasterSolution(float(s), r[:n].copy(), r[n:].copy(), False, res, t_final, False, total)
        raise ConvergenceError(
            f"master iteration at s={s:.6g} stalled at residual {res:.3e}", r, res, total)
    return MasterSolution(float(s), r[:n].copy(), r[n:].copy(), False, res, t_final, True, total)


def gradient_q(v: NormalizedProfile, sol: MasterSolution) -> MasterGradient:
    """Derivative of q(s) from the linearized master equations.

    Differentiating q = I(q, 0) together with the balance row gives the tall
    system A(s) dq = 2 s b(s); it is solved in the least-squares sense through
    a QR factorization of A(s).
    """
    if sol.trivial:
        raise ValueError("gradient is defined only on the nontrivial branch")
    n = v.n
    s = sol.s
    V = v.v
    q, qt = sol.q, sol.qtilde
    phi = V @ qt
    phit = V.T @ q
    P2 = 1.0 / (s * s + phi * phit) ** 2
    M = np.block([
        [(s * s * P2)[:, None] * V.T, -(P2 * phit ** 2)[:, None] * V],
        [-(P2 * phi ** 2)[:, None] * V.T, (s * s * P2)[:, None] * V],
    ])
    A = np.empty((2 * n + 1, 2 * n))
    A[:2 * n] = -M
    A[np.arange(2 * n), np.arange(2 * n)] += 1.0
    A[2 * n, :n] = 1.0
    A[2 * n, n:] = -1.0
    b = -np.concatenate([P2 * phit, P2 * phi, [0.0]])
    # Householder QR with Q^T b accumulated on the fly
    qtb, R = qr_multiply(A, b[None, :], mode="right")
    diag = np.abs(np.diag(R))
    if diag.min() <= 1e-13 * diag.max():
        raise np.linalg.LinAlgError("linearized master system is rank deficient")
    x = solve_triangular(R, qtb.ravel(), lower=False)
    x *= 2.0 * s
    return MasterGradient(float(s), x[:n], x[n:])


def admissibility_scan(v: NormalizedProfile, s: float,
                       t_grid: Sequence[float] = (1.0, 0.1, 0.01, 1e-3, 1e-4),
                       tol: float = TOL, max_iter: int = 10 * MAX_ITER) -> float:
    """Largest mean of r(s, t) over the t grid.

    Solves the grid in decreasing t with warm starts.  When every sigma_ij is
    positive the mean must stay below 1/sigma_min, and for symmetric profiles
    below 1/(2s); a violation raises BoundViolation.
    """
    if not s > 0:
        raise ValueError("s must be positive")
    ts = sorted((float(t) for t in t_grid), reverse=True)
    if not ts or any(not 0 < t <= 1 for t in ts):
        raise ValueError("t grid must be nonempty and inside (0, 1]")
    init = None
    worst = 0.0
    slack = 1 + 1e-9
    smin = v.sigma_min
    for t in ts:
        sol = solve_regularized(v, s, t, init=init, tol=tol, max_iter=max_iter)
        init = (sol.r, sol.rtilde)
        m = float(sol.r.mean())
        worst = max(worst, m)
        if smin > 0 and m > slack / smin:
            raise BoundViolation(f"mean r = {m:.6g} exceeds 1/sigma_min = {1 / smin:.6g}")
        if v.symmetric and m > slack / (2 * s):
            raise BoundViolation(f"mean r = {m:.6g} exceeds 1/(2s) = {1 / (2 * s):.6g}")
    return worst
