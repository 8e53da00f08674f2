"""Schwinger-Dyson fixed point for the Hermitized model at complex spectral parameter.

For |z| = s and eta in the upper half plane, the pair (p, pt) solves

    p  = (V^T p + eta) * U,    pt = (V pt + eta) * U,
    U  = 1 / (s^2 - (V pt + eta) * (V^T p + eta)),

and g(eta) = mean(p) is the Stieltjes transform of the deterministic
symmetrized singular-value law of Y - z.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .profile import NormalizedProfile

__all__ = ["SDSolution", "SDConvergenceError", "solve_sd", "second_moment", "wegner_profile"]

TOL = 1e-13
MAX_ITER = 200_000
STALL_WINDOW = 200
WEGNER_FLOOR = 1e-6


class SDConvergenceError(RuntimeError):
    def __init__(self, msg: str, residual: float, iterations: int):
        super().__init__(msg)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class SDSolution:
    z_abs: float
    eta: complex
    p: np.ndarray
    ptilde: np.ndarray
    g: complex
    iterations: int
    residual: float

    @property
    def trace_gap(self) -> float:
        return float(abs(self.p.sum() - self.ptilde.sum()))

    def to_dict(self, components: bool = False) -> dict:
        out = {
            "z_abs": self.z_abs,
            "eta": [self.eta.real, self.eta.imag],
            "g": [self.g.real, self.g.imag],
            "residual": self.residual,
            "iterations": self.iterations,
            "trace_gap": self.trace_gap,
        }
        if components:
            out["p"] = [[c.real, c.imag] for c in self.p]
            out["ptilde"] = [[c.real, c.imag] for c in self.ptilde]
        return out


def solve_sd(v: NormalizedProfile, z_abs: float, eta: complex, tol: float = TOL,
             max_iter: int = MAX_ITER) -> SDSolution:
    """Picard iteration from i*1, damped by 1/2 once the residual stalls."""
    eta = complex(eta)
    if not eta.imag > 0:
        raise ValueError("eta must have positive imaginary part")
    if z_abs < 0:
        raise ValueError("z_abs must be nonnegative")
    V = v.v
    VT = V.T
    n = v.n
    s2 = float(z_abs) ** 2
    p = np.full(n, 1j)
    pt = np.full(n, 1j)
    eps = np.finfo(float).eps
    omega = 1.0
    best, best_at = np.inf, 0
    res = np.inf
    for k in range(1, max_iter + 1):
        a = VT @ p + eta
        b = V @ pt + eta
        U = 1.0 / (s2 - a * b)
        new_p = a * U
        new_pt = b * U
        res = float(max(np.max(np.abs(new_p - p)), np.max(np.abs(new_pt - pt))))
        if not np.isfinite(res):
            break
        if omega == 1.0:
            p, pt = new_p, new_pt
        else:
            p = p + omega * (new_p - p)
            pt = pt + omega * (new_pt - pt)
        if res < best:
            best, best_at = res, k
        elif omega == 1.0 and k - best_at > STALL_WINDOW:
            omega = 0.5
            best_at = k
        if res <= tol:
            break
    else:
        raise SDConvergenceError(
            f"Schwinger-Dyson iteration stalled at residual {res:.3e} after {max_iter} iterations",
            res, max_iter)
    target = max(tol, 16 * eps * float(np.abs(p).sum() + np.abs(pt).sum()))
    if abs(p.sum() - pt.sum()) > target:
        p, pt, extra, reached = _polish(V, s2, eta, p, pt, target / 2, max_iter, omega)
        k += extra
        a = VT @ p + eta
        b = V @ pt + eta
        U = 1.0 / (s2 - a * b)
        res = float(max(np.max(np.abs(a * U - p)), np.max(np.abs(b * U - pt))))
        if not reached or abs(p.sum() - pt.sum()) > target or res > tol:
            raise SDConvergenceError(
                f"Schwinger-Dyson iteration did not reach the trace identity after {k} iterations", res, k)
    return SDSolution(float(z_abs), eta, p, pt, complex(p.mean()), k, res)


def _polish(V, s2, eta, p, pt, target, max_iter, omega=1.0):
    """Continue the iteration in extended precision until |sum p - sum pt| <= target.

    Small Im(eta) leaves a slowly contracting direction whose double-precision
    fixed point is off by about eps / (1 - lam); extended precision removes it.
    """
    ld = np.longdouble
    if np.finfo(ld).eps >= np.finfo(float).eps:
        return p, pt, 0, False
    Vl = V.astype(ld)
    VTl = np.ascontiguousarray(Vl.T)

    def mul(M, x):
        return M @ x.real + 1j * (M @ x.imag)

    x = p.astype(np.clongdouble)
    y = pt.astype(np.clongdouble)
    e = np.clongdouble(eta)
    s2l = ld(s2)
    for k in range(1, max_iter + 1):
        a = mul(VTl, x) + e
        b = mul(Vl, y) + e
        U = 1 / (s2l - a * b)
        if omega == 1.0:
            x, y = a * U, b * U
        else:
            x = x + ld(omega) * (a * U - x)
            y = y + ld(omega) * (b * U - y)
        if abs(x.sum() - y.sum()) <= target:
            return x.astype(complex), y.astype(complex), k, True
    return x.astype(complex), y.astype(complex), max_iter, False


def second_moment(v: NormalizedProfile, z_abs: float) -> float:
    """Second moment of the symmetrized singular-value law: |z|^2 + mean((V 1)_i)."""
    return float(z_abs) ** 2 + float(v.v.sum()) / v.n


def wegner_profile(v: NormalizedProfile, z_abs: float, x_grid: Sequence[float]):
    """Upper bounds 2x Im g(ix) on the mass of (-x, x), one pair (x, bound) per grid point."""
    if not z_abs > 0:
        raise ValueError("z_abs must be positive")
    out = []
    for x in x_grid:
        x = float(x)
        if x < WEGNER_FLOOR:
            raise ValueError(f"x={x:g} is below the floor {WEGNER_FLOOR:g}")
        sol = solve_sd(v, z_abs, 1j * x)
        out.append((x, 2.0 * x * sol.g.imag))
    return out
