"""Reference laws with explicit radial CDF and density.

Separable profiles sigma_ij^2 = d_i dt_j are handled through the products
c_i = d_i dt_i with weights w_i (1/n for an explicit vector): the radial CDF
is F = 1 - u with u the root of sum_i w_i c_i / (s^2 + c_i u) = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.optimize import brentq

__all__ = [
    "ClosedFormLaw",
    "circular",
    "separable",
    "separable_sampled",
    "sombrero",
    "block",
    "blowup",
    "separable_u",
    "closed_F",
    "closed_phi",
    "blowup_asymptote",
]

U_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class ClosedFormLaw:
    family: str
    support_radius: float
    params: dict = field(default_factory=dict)


def circular() -> ClosedFormLaw:
    return ClosedFormLaw("circular", 1.0)


def _weighted(c: np.ndarray, w: np.ndarray, family: str, extra: dict) -> ClosedFormLaw:
    c = np.asarray(c, dtype=float)
    w = np.asarray(w, dtype=float)
    if np.any(c < 0) or np.any(w < 0):
        raise ValueError("separable factors must be nonnegative")
    rho = float(w @ c)
    return ClosedFormLaw(family, float(np.sqrt(rho)), {"c": c, "w": w, **extra})


def separable(d, dtilde) -> ClosedFormLaw:
    d = np.asarray(d, dtype=float)
    dt = np.asarray(dtilde, dtype=float)
    if d.shape != dt.shape or d.ndim != 1:
        raise ValueError("d and dtilde must be vectors of equal length")
    return _weighted(d * dt, np.full(d.size, 1.0 / d.size), "separable", {"d": d, "dtilde": dt})


def separable_sampled(d: Callable, dtilde: Callable, n: int) -> ClosedFormLaw:
    """Separable law with d_i = d(i/n), dt_i = dtilde(i/n), i = 1..n."""
    x = np.arange(1, n + 1) / n
    return separable(d(x), dtilde(x))


def sombrero(a: float, b: float, alpha: float = 0.5, beta: float = 0.5) -> ClosedFormLaw:
    """Two-level separable law: a fraction alpha of rows with d = a, beta with d = b, dt = 1."""
    if not (a > 0 and b > 0 and alpha >= 0 and beta >= 0) or abs(alpha + beta - 1) > 1e-12:
        raise ValueError("sombrero needs a, b > 0 and alpha + beta = 1")
    law = _weighted(np.array([a, b]), np.array([alpha, beta]), "sombrero",
                    {"a": float(a), "b": float(b), "alpha": float(alpha), "beta": float(beta)})
    return law


def block(k: int) -> ClosedFormLaw:
    if k < 2:
        raise ValueError("block law needs k >= 2")
    return ClosedFormLaw("block", float((k - 1) ** 0.25 / np.sqrt(k)), {"k": int(k)})


def blowup(a: float) -> ClosedFormLaw:
    """Large-n separable law with d(x) = dt(x) = x**a on [0, 1]."""
    if not a > 0:
        raise ValueError("blow-up exponent must be positive")
    return ClosedFormLaw("blowup", float(np.sqrt(1.0 / (2 * a + 1))), {"a": float(a)})


# ---------------------------------------------------------------------------

def _weighted_u(c: np.ndarray, w: np.ndarray, s: float) -> float:
    s2 = s * s
    rho = float(w @ c)
    if s2 >= rho:
        return 0.0
    if s == 0.0:
        return 1.0

    def f(u):
        return float(w @ (c / (s2 + c * u))) - 1.0

    def df(u):
        return -float(w @ (c * c / (s2 + c * u) ** 2))

    lo, hi = 0.0, 1.0
    # f is decreasing, f(0) > 0 and f(1) < 0; bisect to a small bracket, then Newton
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    u = 0.5 * (lo + hi)
    for _ in range(50):
        step = f(u) / df(u)
        nu = u - step
        if not lo <= nu <= hi:
            nu = 0.5 * (lo + hi)
        fn = f(nu)
        if fn > 0:
            lo = nu
        else:
            hi = nu
        if abs(nu - u) <= U_TOL * max(nu, 1e-300) or hi - lo <= U_TOL:
            return nu
        u = nu
    return u


def _blowup_u(a: float, s: float) -> float:
    """Root of int_0^1 x^{2a} / (s^2 + x^{2a} u) dx = 1."""
    rho = 1.0 / (2 * a + 1)
    s2 = s * s
    if s2 >= rho:
        return 0.0
    if s == 0.0:
        return 1.0

    def f(u):
        val, _ = integrate.quad(lambda x: x ** (2 * a) / (s2 + x ** (2 * a) * u), 0, 1,
                                epsabs=1e-14, epsrel=1e-13, limit=200)
        return val - 1.0

    return float(brentq(f, 0.0, 1.0, xtol=U_TOL, rtol=4 * np.finfo(float).eps))


def separable_u(law: ClosedFormLaw, s: float) -> float:
    """Scalar u(s) in [0, 1] for separable-type laws (0 past the support radius)."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    if s >= law.support_radius:
        return 0.0
    if law.family == "circular":
        return 1.0 - s * s
    if law.family in ("separable", "sombrero"):
        if law.family == "sombrero":
            return _sombrero_u(law, s)
        return _weighted_u(law.params["c"], law.params["w"], float(s))
    if law.family == "blowup":
        return _blowup_u(law.params["a"], float(s))
    raise ValueError(f"u(s) is not defined for the {law.family} family")


def _sombrero_disc(law: ClosedFormLaw, s: float) -> tuple[float, float]:
    a, b, al, be = (law.params[k] for k in ("a", "b", "alpha", "beta"))
    s2 = s * s
    lin = a * b * (2 * (al * a + be * b) - (a + b))
    root = np.sqrt(s2 * s2 * (a - b) ** 2 + 2 * s2 * lin + a * a * b * b)
    return lin, root


def _sombrero_u(law: ClosedFormLaw, s: float) -> float:
    a, b = law.params["a"], law.params["b"]
    _, root = _sombrero_disc(law, s)
    return float((-(s * s * (a + b) - a * b) + root) / (2 * a * b))


def _scalar_F(law: ClosedFormLaw, s: float) -> float:
    if s >= law.support_radius:
        return 1.0
    if law.family == "block":
        k = law.params["k"]
        return float(np.sqrt((k - 2) ** 2 + 4 * k * k * s ** 4) / k)
    return 1.0 - separable_u(law, s)


def _scalar_phi(law: ClosedFormLaw, s: float) -> float:
    if s >= law.support_radius:
        return 0.0
    fam = law.family
    if fam == "circular":
        return 1.0 / np.pi
    if fam == "block":
        k = law.params["k"]
        return float(4 * k / np.pi * s * s / np.sqrt((k - 2) ** 2 + 4 * k * k * s ** 4))
    if fam == "sombrero":
        a, b = law.params["a"], law.params["b"]
        lin, root = _sombrero_disc(law, s)
        return float(((a + b) - (s * s * (a - b) ** 2 + lin) / root) / (2 * np.pi * a * b))
    if fam == "separable":
        c, w = law.params["c"], law.params["w"]
        u = separable_u(law, s)
        den = (s * s + c * u) ** 2
        return float((w @ (c / den)) / (w @ (c * c / den)) / np.pi)
    if fam == "blowup":
        if s == 0.0:
            raise ValueError("the blow-up family has no pointwise density at 0; use blowup_asymptote")
        a = law.params["a"]
        u = separable_u(law, s)
        s2 = s * s
        opts = dict(epsabs=1e-14, epsrel=1e-12, limit=400, points=[min(s, 0.5)])
        num, _ = integrate.quad(lambda x: x ** (2 * a) / (s2 + x ** (2 * a) * u) ** 2, 0, 1, **opts)
        den, _ = integrate.quad(lambda x: x ** (4 * a) / (s2 + x ** (2 * a) * u) ** 2, 0, 1, **opts)
        return float(num / den / np.pi)
    raise ValueError(f"unknown family {fam!r}")


def closed_F(law: ClosedFormLaw, s):
    """Radial CDF; scalar in, scalar out, arrays elementwise."""
    if np.ndim(s) == 0:
        if s < 0:
            raise ValueError("s must be nonnegative")
        if law.family == "circular":
            return float(min(s * s, 1.0))
        return _scalar_F(law, float(s))
    return np.array([closed_F(law, float(x)) for x in np.ravel(s)]).reshape(np.shape(s))


def closed_phi(law: ClosedFormLaw, s):
    """Radial density (per unit area); scalar in, scalar out, arrays elementwise."""
    if np.ndim(s) == 0:
        if s < 0:
            raise ValueError("s must be nonnegative")
        return _scalar_phi(law, float(s))
    return np.array([closed_phi(law, float(x)) for x in np.ravel(s)]).reshape(np.shape(s))


def blowup_asymptote(law: ClosedFormLaw, s: float) -> float:
    """Leading small-s behaviour of the density for d(x) = x**a."""
    if law.family != "blowup":
        raise ValueError("asymptotes are defined for the blow-up family only")
    if not 0 < s <= 0.1:
        raise ValueError("asymptote is only meaningful for s in (0, 0.1]")
    a = law.params["a"]
    if a == 1.0:
        return 1.0 / (4.0 * s)
    if a == 0.5:
        return -2.0 * np.log(s) / np.pi
    if 0 < a < 0.5:
        return 1.0 / (np.pi * (1.0 - 2.0 * a))
    raise ValueError(f"no known asymptote for exponent {a}")
