"""Radial CDF, density and atom at zero of the deterministic equivalent."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .master import (
    MasterSolution,
    gradient_q,
    solve_master,
)
from .profile import NormalizedProfile, Profile, decompose_irreducible, normalize

__all__ = [
    "RadialMeasure",
    "SinkhornLimit",
    "chebyshev_grid",
    "radial_cdf",
    "radial_density",
    "radial_measure",
    "sinkhorn_limit",
    "compose_reducible",
    "point_mass",
    "measure_for_profile",
    "extrapolate_atom",
]

GRID_POINTS = 256
CHUNK = 32                      # grid points per warm-started chain
ATOM_FRACTIONS = (1e-2, 5e-3, 2.5e-3)
SINKHORN_TOL = 1e-12
SINKHORN_MAX_ITER = 100_000


@dataclass(frozen=True)
class RadialMeasure:
    """Radially symmetric measure sampled on a grid of radii.

    ``phi`` is the density from the derivative of q(s); ``phi_fd`` the finite
    difference of F on the grid.  ``atom_exponent`` is c in the small-s fit
    F(s) = atom0 + b s^c (nan when the fit is degenerate).
    """

    s_grid: np.ndarray
    F: np.ndarray
    phi: np.ndarray
    atom0: float
    rho_sqrt: float
    phi_fd: Optional[np.ndarray] = None
    atom_exponent: float = float("nan")
    converged: bool = True

    def cdf(self, s) -> np.ndarray:
        """F at arbitrary radii by linear interpolation (atom0 at 0, 1 past the support)."""
        s = np.asarray(s, dtype=float)
        xs, fs = self.s_grid, self.F
        if xs[0] > 0:
            xs = np.concatenate([[0.0], xs])
            fs = np.concatenate([[self.atom0], fs])
        return np.where(s >= self.rho_sqrt, 1.0, np.interp(s, xs, fs, left=self.atom0, right=1.0))

    def density(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return np.where(s > self.rho_sqrt, 0.0, np.interp(s, self.s_grid, self.phi))

    def to_dict(self) -> dict:
        return {
            "atom0": self.atom0,
            "atom_exponent": self.atom_exponent if np.isfinite(self.atom_exponent) else None,
            "rho_sqrt": self.rho_sqrt,
            "points": int(self.s_grid.size),
            "converged": self.converged,
        }


@dataclass(frozen=True)
class SinkhornLimit:
    f: np.ndarray
    ftilde: np.ndarray
    phi0: float
    iterations: int = 0
    residual: float = 0.0


def chebyshev_grid(rho_sqrt: float, n_points: int = GRID_POINTS) -> np.ndarray:
    """Chebyshev-spaced radii on (0, rho_sqrt], clustered at both ends."""
    j = np.arange(1, n_points + 1)
    out = rho_sqrt * 0.5 * (1.0 - np.cos(np.pi * j / n_points))
    out[-1] = rho_sqrt
    return out


def radial_cdf(v: NormalizedProfile, sol: MasterSolution) -> float:
    if sol.trivial:
        return 1.0
    return float(1.0 - sol.q @ (v.v @ sol.qtilde) / v.n)


def radial_density(v: NormalizedProfile, sol: MasterSolution) -> float:
    """Density at |z| = s from the derivative of <q, V qt>."""
    if sol.trivial:
        return 0.0
    g = gradient_q(v, sol)
    V = v.v
    d = g.dq @ (V @ sol.qtilde) + sol.q @ (V @ g.dqtilde)
    return float(-d / (2.0 * np.pi * v.n * sol.s))


def _fd_density(s: np.ndarray, F: np.ndarray) -> np.ndarray:
    if s.size < 3:
        return np.zeros_like(F)
    dF = np.gradient(F, s, edge_order=2)
    out = np.full_like(F, np.nan)
    pos = s > 0
    out[pos] = np.maximum(dF[pos], 0.0) / (2.0 * np.pi * s[pos])
    return out


def extrapolate_atom(radii: Sequence[float], values: Sequence[float]) -> tuple[float, float]:
    """Fit F(s) = a + b s^c through three points with ratio-2 spacing; return (a, c)."""
    s1, s2, s3 = radii
    f1, f2, f3 = values
    d12, d23 = f1 - f2, f2 - f3
    if d12 <= 0 or d23 <= 0:
        return float(min(max(f3, 0.0), 1.0)), float("nan")
    ratio = d12 / d23
    c = float(np.log(ratio) / np.log(s2 / s3))
    if not c > 0:
        return float(min(max(f3, 0.0), 1.0)), float("nan")
    bsc = d23 / ((s2 / s3) ** c - 1.0)
    a = f3 - bsc
    return float(min(max(a, 0.0), f3)), c


def _predict(prev: list[MasterSolution], s: float) -> Optional[np.ndarray]:
    """Starting point for radius s from the last solutions of a chain.

    Each q_i^2 is extrapolated linearly in s^2, which is exact for the constant
    profile and follows the square-root vanishing of q at the spectral edge.
    """
    live = [p for p in prev[-2:] if not p.trivial]
    if not live:
        return None
    if len(live) == 1:
        return live[0].stacked
    a, b = live
    x0, x1 = a.s ** 2, b.s ** 2
    y0, y1 = a.stacked ** 2, b.stacked ** 2
    y = y1 + (y1 - y0) * (s * s - x1) / (x1 - x0)
    guess = np.sqrt(np.maximum(y, 0.0))
    if not np.all(guess > 0):
        return b.stacked
    return guess


def _solve_chain(v: NormalizedProfile, radii: np.ndarray):
    """Solve along increasing radii, each point started from an extrapolated guess."""
    out: list[MasterSolution] = []
    for s in radii:
        out.append(solve_master(v, float(s), init=_predict(out, float(s))))
    return out


def _measure_chunk(v: NormalizedProfile, radii: np.ndarray):
    F, phi, ok = [], [], True
    for sol in _solve_chain(v, radii):
        F.append(radial_cdf(v, sol))
        phi.append(max(radial_density(v, sol), 0.0) if not sol.trivial else 0.0)
        ok = ok and sol.converged
    return F, phi, ok


def radial_measure(
    v: NormalizedProfile,
    s_grid: Optional[Sequence[float]] = None,
    n_points: int = GRID_POINTS,
    threads: int = 1,
) -> RadialMeasure:
    """F, density and atom at zero of the deterministic equivalent of an irreducible V.

    Grid points are processed in fixed chunks of CHUNK consecutive radii, each
    a warm-started chain from a cold start, so results do not depend on the
    number of worker threads.
    """
    rs = float(np.sqrt(v.rho))
    if v.rho == 0.0:
        return point_mass()
    if s_grid is None:
        grid = chebyshev_grid(rs, n_points)
    else:
        grid = np.asarray(s_grid, dtype=float)
        if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0) or grid[0] <= 0:
            raise ValueError("grid must be strictly increasing and positive")
        if grid[-1] < rs * (1 - 1e-12):
            raise ValueError(f"grid ends at {grid[-1]:.6g}, before the support radius {rs:.6g}")
    chunks = [grid[i:i + CHUNK] for i in range(0, grid.size, CHUNK)]
    atom_radii = np.array(ATOM_FRACTIONS)[::-1] * rs  # increasing
    jobs = chunks + [atom_radii]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda c: _measure_chunk(v, c), jobs))
    else:
        results = [_measure_chunk(v, c) for c in jobs]
    F = np.concatenate([np.asarray(r[0]) for r in results[:-1]])
    phi = np.concatenate([np.asarray(r[1]) for r in results[:-1]])
    ok = all(r[2] for r in results)
    F = np.clip(F, 0.0, 1.0)
    fa = results[-1][0][::-1]  # back to decreasing radii
    atom0, expo = extrapolate_atom(atom_radii[::-1], fa)
    return RadialMeasure(grid, F, phi, atom0, rs, _fd_density(grid, F), expo, ok)


def point_mass() -> RadialMeasure:
    """Dirac mass at the origin (the law of a zero block)."""
    one = np.ones(1)
    return RadialMeasure(np.zeros(1), one, np.zeros(1), 1.0, 0.0, np.zeros(1), float("nan"), True)


def sinkhorn_limit(v: NormalizedProfile, tol: float = SINKHORN_TOL,
                   max_iter: int = SINKHORN_MAX_ITER) -> SinkhornLimit:
    """Balanced scaling pair at s = 0 and the density there.

    Solves f_i (V ft)_i = 1, ft_i (V^T f)_i = 1 with sum f = sum ft by
    alternating scaling; the density at the origin is sum(f * ft) / (n pi).
    """
    V = v.v
    if np.any(V <= 0):
        raise ValueError("scaling limit needs a strictly positive variance profile")
    n = v.n
    f = np.ones(n)
    ft = np.ones(n)
    res = np.inf
    for k in range(1, max_iter + 1):
        f_new = 1.0 / (V @ ft)
        ft_new = 1.0 / (V.T @ f_new)
        c = np.sqrt(ft_new.sum() / f_new.sum())
        f_new *= c
        ft_new /= c
        res = max(np.max(np.abs(f_new - f)), np.max(np.abs(ft_new - ft)))
        f, ft = f_new, ft_new
        if res <= tol:
            return SinkhornLimit(f, ft, float(f @ ft / (n * np.pi)), k, float(res))
    raise RuntimeError(f"scaling iteration stalled at {res:.3e}")


def compose_reducible(blocks: Sequence[tuple[RadialMeasure, float]]) -> RadialMeasure:
    """Mixture of radial measures on the union of their grids."""
    if not blocks:
        raise ValueError("no blocks to compose")
    weights = np.array([w for _, w in blocks], dtype=float)
    if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be positive and sum to 1")
    if len(blocks) == 1:
        return blocks[0][0]
    grid = np.unique(np.concatenate([m.s_grid for m, _ in blocks]))
    rs = max(m.rho_sqrt for m, _ in blocks)
    F = sum(w * m.cdf(grid) for m, w in blocks)
    phi = sum(w * m.density(grid) for m, w in blocks)
    atom = float(sum(w * m.atom0 for m, w in blocks))
    ok = all(m.converged for m, _ in blocks)
    return RadialMeasure(grid, np.clip(F, 0.0, 1.0), phi, atom, rs, _fd_density(grid, F),
                         float("nan"), ok)


def measure_for_profile(p: Profile, s_grid=None, n_points: int = GRID_POINTS,
                        threads: int = 1) -> RadialMeasure:
    """Radial measure of any profile, splitting it into irreducible blocks when needed."""
    parts = []
    for sub, w in decompose_irreducible(p):
        v = normalize(sub)
        if v.rho == 0.0:
            parts.append((point_mass(), w))
        else:
            grid = s_grid if len(parts) == 0 and w == 1.0 else None
            parts.append((radial_measure(v, grid, n_points, threads), w))
    return compose_reducible(parts)
