"""Empirical spectra and their comparison with deterministic equivalents."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from ..equivalent import RadialMeasure
from ..profile import Profile
from ..schwinger import SDSolution
from .kernels import jacobi_svd, qr_eigenvalues
from .sampling import EntryLaw, get_law, sample_matrix

__all__ = [
    "SpectrumSample",
    "ComparisonReport",
    "EIGEN_CAP",
    "SVD_CAP",
    "singular_values",
    "eigenvalues",
    "sample_spectrum",
    "empirical_radial_cdf",
    "empirical_stieltjes",
    "compare",
]

EIGEN_CAP = 1000
SVD_CAP = 4000
ZERO_TOL = 1e-8   # eigenvalue moduli below ZERO_TOL * max modulus count as exact zeros


@dataclass(frozen=True)
class SpectrumSample:
    seed: int
    n: int
    z: complex
    singular_values: np.ndarray
    eigenvalues: Optional[np.ndarray]
    law: EntryLaw


@dataclass(frozen=True)
class ComparisonReport:
    kind: str
    sup_distance: float
    ks: float
    residuals: list = field(default_factory=list)
    samples: int = 0

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "sup_distance": self.sup_distance,
            "ks": self.ks,
            "samples": self.samples,
            "residuals": self.residuals,
        }


def singular_values(Y: np.ndarray, z: complex = 0.0) -> np.ndarray:
    """Singular values of Y - z, ascending."""
    Y = np.asarray(Y)
    if Y.shape[0] > SVD_CAP:
        raise ValueError(f"n={Y.shape[0]} exceeds the singular-value cap {SVD_CAP}")
    G = np.array(Y, dtype=np.complex128)
    G[np.diag_indices_from(G)] -= z
    return np.sort(jacobi_svd(G))


def eigenvalues(Y: np.ndarray, cap: int = EIGEN_CAP) -> np.ndarray:
    if Y.shape[0] > cap:
        raise ValueError(f"n={Y.shape[0]} exceeds the eigenvalue cap {cap}")
    return qr_eigenvalues(Y)


def sample_spectrum(p: Profile, law="complex-gaussian", seed: int = 0, z: complex = 0.0,
                    with_eigenvalues: bool = True) -> SpectrumSample:
    law = get_law(law)
    Y = sample_matrix(p, law, seed)
    sv = singular_values(Y, z)
    ev = eigenvalues(Y) if with_eigenvalues else None
    return SpectrumSample(int(seed), p.n, complex(z), sv, ev, law)


def empirical_radial_cdf(eigs: Sequence[complex], s_grid: Sequence[float]) -> np.ndarray:
    """Fraction of eigenvalues with modulus <= s, for each s."""
    mod = np.sort(np.abs(np.asarray(eigs)))
    if mod.size == 0:
        raise ValueError("empty spectrum")
    return np.searchsorted(mod, np.asarray(s_grid, dtype=float), side="right") / mod.size


def empirical_stieltjes(svals: Sequence[float], eta: complex) -> complex:
    """Stieltjes transform of the symmetrized singular-value measure at eta."""
    s = np.asarray(svals, dtype=float)
    if s.size == 0:
        raise ValueError("empty spectrum")
    eta = complex(eta)
    return complex(np.sum(1.0 / (s - eta) + 1.0 / (-s - eta)) / (2 * s.size))


def _ks_modulus(moduli: np.ndarray, cdf) -> float:
    """Kolmogorov-Smirnov distance; the reference may carry an atom at 0."""
    x = np.sort(moduli)
    m = x.size
    F = np.asarray(cdf(x), dtype=float)
    F_left = np.where(x > 0, F, 0.0)
    upper = np.searchsorted(x, x, side="right") / m   # ECDF at x (ties included)
    lower = np.searchsorted(x, x, side="left") / m    # ECDF just below x
    return float(max(np.max(np.abs(upper - F)), np.max(np.abs(F_left - lower))))


def compare(reference: Union[RadialMeasure, SDSolution], observed, exact_cdf=None) -> ComparisonReport:
    """Distances between a deterministic equivalent and observed statistics.

    * RadialMeasure vs eigenvalues: Kolmogorov-Smirnov distance of the moduli
      and sup-norm over the measure's grid (``exact_cdf`` replaces the
      interpolated CDF when given).
    * RadialMeasure vs RadialMeasure: grids must coincide; sup-norm of F.
    * SDSolution vs singular values: |g - g_empirical| at the solution's eta.
    """
    if isinstance(reference, SDSolution):
        g_emp = empirical_stieltjes(observed, reference.eta)
        d = abs(g_emp - reference.g)
        res = [{"eta": [reference.eta.real, reference.eta.imag],
                "g": [reference.g.real, reference.g.imag],
                "g_empirical": [g_emp.real, g_emp.imag]}]
        return ComparisonReport("stieltjes", float(d), float("nan"), res, int(np.size(observed)))
    if not isinstance(reference, RadialMeasure):
        raise TypeError("reference must be a RadialMeasure or an SDSolution")
    cdf = exact_cdf if exact_cdf is not None else reference.cdf
    if isinstance(observed, RadialMeasure):
        if observed.s_grid.shape != reference.s_grid.shape or not np.array_equal(observed.s_grid, reference.s_grid):
            raise ValueError("grid mismatch")
        diff = observed.F - np.asarray(cdf(reference.s_grid))
        res = [[float(s), float(a), float(b)] for s, a, b in zip(reference.s_grid, reference.F, observed.F)]
        sup = float(np.max(np.abs(diff)))
        return ComparisonReport("radial-measure", sup, sup, res, 0)
    eigs = np.asarray(observed)
    if eigs.size == 0:
        raise ValueError("empty spectrum")
    mod = np.abs(eigs)
    # eigenvalues of an exactly singular Y come out at rounding level, not at 0
    mod = np.where(mod <= ZERO_TOL * mod.max(), 0.0, mod)
    grid = reference.s_grid
    emp = empirical_radial_cdf(mod, grid)
    ref = np.asarray(cdf(grid), dtype=float)
    res = [[float(s), float(a), float(b)] for s, a, b in zip(grid, ref, emp)]
    return ComparisonReport("radial-ecdf", float(np.max(np.abs(emp - ref))),
                            _ks_modulus(mod, cdf), res, int(eigs.size))
