"""Reproducible sampling of Y = (1/sqrt n) A o X.

Randomness comes from numpy's Philox-4x64 counter-based generator.  Row i of
X is drawn from its own stream: key = (seed, law index) and the counter's
most significant word set to i, so rows never overlap and any row can be
regenerated independently.  Gaussian variates use numpy's ziggurat sampler.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..profile import Profile

__all__ = ["EntryLaw", "LAWS", "get_law", "row_generator", "sample_entries", "sample_matrix"]

MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class EntryLaw:
    """Standardized entry distribution (mean 0, E|X|^2 = 1)."""

    tag: str
    is_complex: bool
    fourth_moment: float  # E|X|^4, recorded for reference
    index: int

    def draw(self, gen: np.random.Generator, size: int) -> np.ndarray:
        if self.tag == "real-gaussian":
            return gen.standard_normal(size).astype(np.complex128)
        if self.tag == "rademacher":
            return (2.0 * gen.integers(0, 2, size) - 1.0).astype(np.complex128)
        if self.tag == "complex-gaussian":
            z = gen.standard_normal(2 * size)
            return (z[:size] + 1j * z[size:]) / np.sqrt(2.0)
        if self.tag == "complex-bernoulli-phase":
            e = 2.0 * gen.integers(0, 2, 2 * size) - 1.0
            return (e[:size] + 1j * e[size:]) / np.sqrt(2.0)
        raise ValueError(f"unknown law {self.tag!r}")


LAWS = {
    law.tag: law
    for law in (
        EntryLaw("real-gaussian", False, 3.0, 0),
        EntryLaw("rademacher", False, 1.0, 1),
        EntryLaw("complex-gaussian", True, 2.0, 2),
        EntryLaw("complex-bernoulli-phase", True, 1.0, 3),
    )
}


def get_law(law) -> EntryLaw:
    if isinstance(law, EntryLaw):
        return law
    try:
        return LAWS[law]
    except KeyError:
        raise ValueError(f"unknown entry law {law!r}; choose from {sorted(LAWS)}") from None


def row_generator(seed: int, row: int, law_index: int = 0) -> np.random.Generator:
    bitgen = np.random.Philox(key=[int(seed) & MASK64, law_index], counter=[0, 0, 0, int(row)])
    return np.random.Generator(bitgen)


def sample_entries(n: int, law, seed: int) -> np.ndarray:
    """The n x n matrix X of standardized entries."""
    law = get_law(law)
    X = np.empty((n, n), dtype=np.complex128)
    for i in range(n):
        X[i] = law.draw(row_generator(seed, i, law.index), n)
    return X


def sample_matrix(p: Profile, law="complex-gaussian", seed: int = 0, X: Optional[np.ndarray] = None) -> np.ndarray:
    """Y_ij = sigma_ij X_ij / sqrt(n)."""
    if X is None:
        X = sample_entries(p.n, law, seed)
    return p.sigma * X / np.sqrt(p.n)
