"""Deterministic equivalents for non-Hermitian random matrices with a variance profile."""

__version__ = "1.0.0"

from .profile import (  # noqa: F401
    GraphReport,
    NormalizedProfile,
    Profile,
    ProfileError,
    analyze_graph,
    build_profile,
    decompose_irreducible,
    load_profile,
    normalize,
)
