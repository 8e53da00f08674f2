"""Standard deviation profiles: construction, normalization and graph analysis."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Optional, Union

import numpy as np

from .graph import Verdict, digraph_period, expansion_verdict, strongly_connected_components

__all__ = [
    "Profile",
    "NormalizedProfile",
    "GraphReport",
    "ProfileError",
    "build_profile",
    "normalize",
    "analyze_graph",
    "decompose_irreducible",
    "load_profile",
    "BAND_MODELS",
]

KINDS = ("dense", "constant", "separable", "sampled", "block", "band")

# Models A and B: (half-width as an exact fraction, weight tag)
BAND_MODELS = {
    "A": (Fraction(1, 20), "one"),
    "B": (Fraction(1, 10), "x+2y"),
}

# structural certificate constant for band profiles: delta, kappa <= width * BAND_CERT_C
BAND_CERT_C = 0.1


class ProfileError(ValueError):
    """Invalid profile description."""


def _band_weight(tag: str, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    if tag == "one":
        return np.ones(np.broadcast(x, y).shape)
    if tag == "x+2y":
        return (x + 2.0 * y) ** 2
    raise ProfileError(f"unknown band weight {tag!r}")


@dataclass(frozen=True, eq=False)
class Profile:
    """An n x n matrix of standard deviations, stored as generator parameters.

    The dense matrix ``sigma`` is materialized on first access.
    """

    n: int
    kind: str
    params: dict = field(default_factory=dict)

    @cached_property
    def sigma(self) -> np.ndarray:
        n, p = self.n, self.params
        if self.kind == "dense":
            out = np.array(p["matrix"], dtype=np.float64)
        elif self.kind == "constant":
            out = np.full((n, n), float(p["c"]))
        elif self.kind == "separable":
            d = np.asarray(p["d"], dtype=np.float64)
            dt = np.asarray(p["dtilde"], dtype=np.float64)
            out = np.sqrt(np.outer(d, dt))
        elif self.kind == "sampled":
            x = np.arange(1, n + 1) / n
            out = np.sqrt(np.asarray(p["sigma2"](x[:, None], x[None, :]), dtype=np.float64))
            out = np.broadcast_to(out, (n, n)).copy()
        elif self.kind == "block":
            M = np.asarray(p["M"], dtype=np.float64)
            out = np.kron(M, np.ones((p["m"], p["m"])))
        elif self.kind == "band":
            width = Fraction(p["width"])
            i = np.arange(1, n + 1)
            gap = np.abs(i[:, None] - i[None, :])
            inside = gap * width.denominator <= width.numerator * n
            x = i / n
            out = np.where(inside, np.sqrt(_band_weight(p["weight"], x[:, None], x[None, :])), 0.0)
        else:  # pragma: no cover - guarded by build_profile
            raise ProfileError(f"unknown kind {self.kind!r}")
        out = np.ascontiguousarray(out, dtype=np.float64)
        out.setflags(write=False)
        return out

    def describe(self) -> dict:
        """JSON-friendly description (callables replaced by their names)."""
        out: dict[str, Any] = {"kind": self.kind, "n": self.n}
        for k, val in self.params.items():
            if callable(val):
                out[k] = getattr(val, "__name__", "callable")
            elif isinstance(val, np.ndarray):
                out[k] = val.tolist()
            elif isinstance(val, Fraction):
                out[k] = str(val)
            else:
                out[k] = val
        return out


@dataclass(frozen=True, eq=False)
class NormalizedProfile:
    """V = sigma**2 / n with its Perron root."""

    n: int
    v: np.ndarray
    rho: float
    rho_converged: bool
    perron: Optional[np.ndarray] = None

    @cached_property
    def irreducible(self) -> bool:
        return len(strongly_connected_components(self.v > 0)) == 1

    @cached_property
    def period(self) -> int:
        """Period of the support digraph (1 when reducible or aperiodic)."""
        if not self.irreducible:
            return 1
        return digraph_period(self.v > 0)

    @cached_property
    def sigma_max(self) -> float:
        return float(np.sqrt(self.n * self.v.max()))

    @cached_property
    def sigma_min(self) -> float:
        return float(np.sqrt(self.n * self.v.min()))

    @cached_property
    def symmetric(self) -> bool:
        return bool(np.array_equal(self.v, self.v.T))


@dataclass(frozen=True)
class GraphReport:
    irreducible: bool
    scc_blocks: tuple[tuple[int, ...], ...]
    min_out_frac: float
    min_in_frac: float
    robust_verdict: Verdict
    broad_verdict: Verdict

    def to_dict(self) -> dict:
        return {
            "irreducible": self.irreducible,
            "scc_blocks": [list(b) for b in self.scc_blocks],
            "min_out_frac": self.min_out_frac,
            "min_in_frac": self.min_in_frac,
            "robust_verdict": self.robust_verdict.to_dict(),
            "broad_verdict": self.broad_verdict.to_dict(),
        }


# ---------------------------------------------------------------------------
# construction

def _check_n(n) -> int:
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n <= 0:
        raise ProfileError(f"n must be a positive integer, got {n!r}")
    return int(n)


def _nonneg_array(values, name: str, shape=None) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if shape is not None and arr.shape != shape:
        raise ProfileError(f"{name} has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise ProfileError(f"{name} has non-finite entries")
    if np.any(arr < 0):
        raise ProfileError(f"{name} has negative entries")
    return arr


def block_singular(k: int) -> np.ndarray:
    """k x k pattern with ones on the first block row and column, off the diagonal."""
    M = np.zeros((k, k))
    M[0, 1:] = 1.0
    M[1:, 0] = 1.0
    return M


def build_profile(spec: Union[dict, str], n: Optional[int] = None, **kwargs) -> Profile:
    """Build a Profile from a description.

    ``spec`` is either a dict (the JSON schema) or a kind name with parameters
    passed as keyword arguments.  Recognized kinds: dense, constant, separable,
    sampled, block, band, and the aliases sampled_band_A / sampled_band_B.
    """
    if isinstance(spec, str):
        spec = {"kind": spec, **kwargs}
        if n is not None:
            spec["n"] = n
    else:
        spec = dict(spec)
        spec.update(kwargs)
        if n is not None:
            spec["n"] = n
    kind = spec.pop("kind", None)

    if kind in ("sampled_band_A", "sampled_band_B", "band_A", "band_B"):
        width, weight = BAND_MODELS[kind[-1]]
        spec.setdefault("width", width)
        spec.setdefault("weight", weight)
        kind = "band"

    if kind == "dense":
        if "matrix" not in spec:
            raise ProfileError("dense profile needs 'matrix'")
        mat = np.asarray(spec.pop("matrix"), dtype=np.float64)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] == 0:
            raise ProfileError(f"dense matrix must be square and nonempty, got shape {mat.shape}")
        m = mat.shape[0]
        if spec.setdefault("n", m) != m:
            raise ProfileError(f"n={spec['n']} does not match matrix size {m}")
        mat = _nonneg_array(mat, "matrix")
        params = {"matrix": mat}
    elif kind == "constant":
        c = float(spec.pop("c", 1.0))
        _nonneg_array(c, "c")
        params = {"c": c}
    elif kind == "separable":
        d = _nonneg_array(spec.pop("d"), "d")
        dt = _nonneg_array(spec.pop("dtilde"), "dtilde")
        if d.ndim != 1 or d.shape != dt.shape:
            raise ProfileError("d and dtilde must be vectors of equal length")
        if spec.setdefault("n", d.size) != d.size:
            raise ProfileError(f"n={spec['n']} does not match len(d)={d.size}")
        params = {"d": d, "dtilde": dt}
    elif kind == "sampled":
        fn = spec.pop("sigma2")
        if not callable(fn):
            raise ProfileError("sampled profile needs a callable 'sigma2(x, y)'")
        params = {"sigma2": fn}
    elif kind == "block":
        if "M" in spec:
            M = _nonneg_array(spec.pop("M"), "M")
            if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
                raise ProfileError("M must be a nonempty square matrix")
        elif "k" in spec:
            k = int(spec.pop("k"))
            if k < 2:
                raise ProfileError("block pattern needs k >= 2")
            M = block_singular(k)
        else:
            raise ProfileError("block profile needs 'M' or 'k'")
        k = M.shape[0]
        if "m" in spec:
            m = int(spec.pop("m"))
            if m <= 0:
                raise ProfileError("block size m must be positive")
            if spec.setdefault("n", k * m) != k * m:
                raise ProfileError(f"n={spec['n']} is not k*m={k * m}")
        else:
            nn = _check_n(spec.get("n", 0))
            if nn % k:
                raise ProfileError(f"n={nn} is not divisible by k={k}")
            m = nn // k
        spec.pop("k", None)
        params = {"M": M, "m": m}
    elif kind == "band":
        width = Fraction(spec.pop("width")).limit_denominator(10**9)
        if width < 0:
            raise ProfileError("band width must be nonnegative")
        weight = spec.pop("weight", "one")
        if weight not in ("one", "x+2y"):
            raise ProfileError(f"unknown band weight {weight!r}")
        params = {"width": width, "weight": weight}
    else:
        raise ProfileError(f"unknown profile kind {kind!r}")

    nn = _check_n(spec.pop("n", None))
    if spec:
        raise ProfileError(f"unknown keys for kind {kind!r}: {sorted(spec)}")
    prof = Profile(nn, kind, params)
    if kind == "sampled":
        _nonneg_array(prof.sigma, "sampled sigma")
    return prof


def load_profile(source: Union[str, Path], n: Optional[int] = None) -> Profile:
    """Load a profile from a kind name, inline JSON, a JSON file or a CSV file."""
    text = str(source)
    path = Path(text)
    if text.lstrip().startswith("{"):
        return build_profile(json.loads(text), n=n)
    if path.suffix.lower() == ".csv" and path.exists():
        with path.open(newline="") as fh:
            rows = [[float(x) for x in row] for row in csv.reader(fh) if row]
        return build_profile({"kind": "dense", "matrix": rows}, n=n)
    if path.suffix.lower() == ".json" and path.exists():
        return build_profile(json.loads(path.read_text()), n=n)
    return build_profile({"kind": text}, n=n)


# ---------------------------------------------------------------------------
# normalization

def perron_root(v: np.ndarray, rtol: float = 1e-12, max_iter: Optional[int] = None,
                irreducible: Optional[bool] = None):
    """Power iteration from the all-ones vector; returns (rho, x, converged).

    Each step averages the normalized image with the current vector, which
    maps an eigenvalue -rho (periodic V, e.g. bipartite block patterns) to 0
    while keeping the Perron vector fixed.  For irreducible V the stopping
    rule is the Collatz-Wielandt bracket; otherwise the relative change of the
    Rayleigh quotient.
    """
    n = v.shape[0]
    if max_iter is None:
        max_iter = 10 * n + 1000
    if not np.any(v):
        return 0.0, np.ones(n) / np.sqrt(n), True
    if irreducible is None:
        irreducible = len(strongly_connected_components(v > 0)) == 1
    x = np.ones(n) / np.sqrt(n)
    rho = 0.0
    for _ in range(max_iter):
        y = v @ x
        new = float(x @ y)  # Rayleigh quotient (x has unit norm)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0, x, True
        if irreducible:
            # Collatz-Wielandt bracket: min(Vx/x) <= rho <= max(Vx/x)
            ratio = y / x
            if ratio.max() - ratio.min() <= rtol * new:
                return new, x, True
        elif abs(new - rho) <= rtol * abs(new):
            return new, x, True
        # averaging with the current vector damps the -rho eigenvalue of periodic V
        y = 0.5 * (x + y / ny)
        y /= np.linalg.norm(y)
        rho, x = new, y
    return rho, x, False


def normalize(p: Profile) -> NormalizedProfile:
    sigma = p.sigma
    v = sigma * sigma / p.n
    v.setflags(write=False)
    irreducible = len(strongly_connected_components(v > 0)) == 1
    rho, x, ok = perron_root(v, irreducible=irreducible)
    out = NormalizedProfile(p.n, v, rho, ok, x)
    out.__dict__["irreducible"] = irreducible  # seed the cached property
    return out


# ---------------------------------------------------------------------------
# graph analysis

def _certificate(p: Profile, adj: np.ndarray, sigma0: float, delta: float, kappa: float) -> Optional[str]:
    if adj.all():
        if p.kind == "constant":
            return "constant profile: complete thresholded digraph"
        return "sigma_min >= sigma0: complete thresholded digraph"
    if p.kind == "band":
        width = float(p.params["width"])
        n = p.n
        corner = max(n // 100, 0)
        i = np.arange(1, n + 1)
        inside = np.abs(i[:, None] - i[None, :]) * Fraction(p.params["width"]).denominator \
            <= Fraction(p.params["width"]).numerator * n
        missing = inside & ~adj
        rows, cols = np.nonzero(missing)
        confined = rows.size == 0 or (rows.max() < corner and cols.max() < corner)
        if confined and max(delta, kappa) <= BAND_CERT_C * width and n >= 100:
            return "band profile: thresholded band intact outside an n/100 corner"
    return None


def analyze_graph(
    p: Profile,
    sigma0: float,
    delta: float,
    kappa: float,
    budget: int = 2 ** 12,
    seed: int = 0,
) -> GraphReport:
    """SCC structure, degree fractions and robust irreducibility verdicts for A(sigma0)."""
    if not sigma0 > 0:
        raise ProfileError("sigma0 must be positive")
    if not (0 < delta < 1 and 0 < kappa < 1):
        raise ProfileError("delta and kappa must lie in (0, 1)")
    sigma = p.sigma
    n = p.n
    adj = sigma >= sigma0
    blocks = strongly_connected_components(adj)
    irreducible = len(blocks) == 1
    if n == 1:
        irreducible = bool(adj[0, 0])
    cert = _certificate(p, adj, sigma0, delta, kappa)
    robust = expansion_verdict(adj, delta, kappa, broad=False, budget=budget, certificate=cert, seed=seed)
    broad = expansion_verdict(adj, delta, kappa, broad=True, budget=budget, certificate=cert, seed=seed)
    return GraphReport(
        irreducible=irreducible,
        scc_blocks=tuple(tuple(b) for b in blocks),
        min_out_frac=float(adj.sum(axis=1).min() / n),
        min_in_frac=float(adj.sum(axis=0).min() / n),
        robust_verdict=robust,
        broad_verdict=broad,
    )


def decompose_irreducible(p: Profile) -> list[tuple[Profile, float]]:
    """Diagonal irreducible blocks of V (support digraph), rescaled by sqrt(n_k/n).

    With this rescaling the block's own 1/n_k normalization reproduces the
    global V restricted to the block.
    """
    sigma = p.sigma
    blocks = strongly_connected_components(sigma * sigma / p.n > 0)
    if len(blocks) == 1:
        return [(p, 1.0)]
    out = []
    for b in blocks:
        idx = np.asarray(b)
        nk = idx.size
        scale = np.sqrt(nk / p.n)
        sub = sigma[np.ix_(idx, idx)] * scale
        out.append((build_profile({"kind": "dense", "matrix": sub}), nk / p.n))
    return out
