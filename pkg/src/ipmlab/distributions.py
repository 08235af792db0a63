"""Valuation distributions and the lambda-regularity machinery.

Each family exposes cdf/pdf/quantile (numpy-vectorized) plus a claimed
regularity parameter ``lambda_claimed`` in [0, 1].  lambda = 0 is the
monotone-hazard-rate class, lambda = 1 the Myerson-regular class; the
generalized virtual margin  m_lambda(v) = lambda*v - (1-F(v))/f(v)  must be
non-decreasing for membership.  (The defining condition is stated with the
sign that makes lambda=0 coincide with MHR.)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .errors import (
    DomainError,
    NonMonotone,
    OutOfRange,
    OutOfSupport,
    ParseError,
    QuadratureFailure,
    TailDegenerate,
)

# Quantile levels used to trim degenerate tails on evaluation grids.
TAIL_TRIM_Q = 1e-6
# Infinite supports are truncated at this quantile for quadrature.
TRUNCATION_Q = 1e-8


@dataclass(frozen=True)
class Support:
    lo: float
    hi: float  # may be +inf

    def contains(self, v: float) -> bool:
        return self.lo <= v <= self.hi

    def interior(self, v: float) -> bool:
        return self.lo < v < self.hi


class Distribution:
    """Base class: subclasses fill in cdf/pdf/quantile and metadata."""

    name: str = "abstract"
    support: Support
    lambda_claimed: float

    def cdf(self, v):
        raise NotImplementedError

    def pdf(self, v):
        raise NotImplementedError

    def quantile(self, u):
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    @property
    def descriptor(self) -> str:
        raise NotImplementedError

    def truncation_point(self) -> float:
        """Upper quadrature limit; the exact endpoint for bounded supports."""
        if math.isfinite(self.support.hi):
            return self.support.hi
        return float(self.quantile(1.0 - TRUNCATION_Q))

    def truncated_tail_mass(self) -> float:
        """Probability mass discarded beyond :meth:`truncation_point`."""
        if math.isfinite(self.support.hi):
            return 0.0
        return TRUNCATION_Q

    def __repr__(self):  # pragma: no cover - debugging aid
        return f"<{type(self).__name__} {self.descriptor}>"


class Exponential(Distribution):
    """Exponential(rate); MHR (lambda = 0), constant hazard."""

    def __init__(self, rate: float):
        if rate <= 0:
            raise ParseError(f"exponential rate must be positive, got {rate}")
        self.rate = float(rate)
        self.support = Support(0.0, math.inf)
        self.lambda_claimed = 0.0
        self.name = "exponential"

    def cdf(self, v):
        return -np.expm1(-self.rate * np.asarray(v, dtype=float))

    def pdf(self, v):
        return self.rate * np.exp(-self.rate * np.asarray(v, dtype=float))

    def quantile(self, u):
        return -np.log1p(-np.asarray(u, dtype=float)) / self.rate

    def mean(self) -> float:
        return 1.0 / self.rate

    @property
    def descriptor(self) -> str:
        return f"exp:{_fmt(self.rate)}"


class Uniform(Distribution):
    """Uniform on [a, b]; MHR (hazard 1/(b - v) is increasing)."""

    def __init__(self, a: float, b: float):
        if not b > a:
            raise ParseError(f"uniform needs a < b, got [{a}, {b}]")
        self.a, self.b = float(a), float(b)
        self.support = Support(self.a, self.b)
        self.lambda_claimed = 0.0
        self.name = "uniform"

    def cdf(self, v):
        return np.clip((np.asarray(v, dtype=float) - self.a) / (self.b - self.a), 0.0, 1.0)

    def pdf(self, v):
        v = np.asarray(v, dtype=float)
        inside = (v >= self.a) & (v <= self.b)
        return np.where(inside, 1.0 / (self.b - self.a), 0.0)

    def quantile(self, u):
        return self.a + (self.b - self.a) * np.asarray(u, dtype=float)

    def mean(self) -> float:
        return 0.5 * (self.a + self.b)

    @property
    def descriptor(self) -> str:
        return f"uniform:{_fmt(self.a)}:{_fmt(self.b)}"


class Weibull(Distribution):
    """Weibull(scale, shape); MHR when shape >= 1."""

    def __init__(self, scale: float, shape: float):
        if scale <= 0 or shape <= 0:
            raise ParseError(f"weibull needs positive scale/shape, got {scale}, {shape}")
        self.scale, self.shape = float(scale), float(shape)
        self.support = Support(0.0, math.inf)
        self.lambda_claimed = 0.0 if shape >= 1.0 else 1.0
        self.name = "weibull"

    def cdf(self, v):
        z = np.asarray(v, dtype=float) / self.scale
        return -np.expm1(-np.power(z, self.shape))

    def pdf(self, v):
        z = np.asarray(v, dtype=float) / self.scale
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (self.shape / self.scale) * np.power(z, self.shape - 1.0) * np.exp(-np.power(z, self.shape))
        return np.where(np.asarray(v, dtype=float) > 0, out, 0.0)

    def quantile(self, u):
        return self.scale * np.power(-np.log1p(-np.asarray(u, dtype=float)), 1.0 / self.shape)

    def mean(self) -> float:
        return self.scale * special.gamma(1.0 + 1.0 / self.shape)

    @property
    def descriptor(self) -> str:
        return f"weibull:{_fmt(self.scale)}:{_fmt(self.shape)}"


class Pareto(Distribution):
    """Pareto(shape, scale); heavy-tailed, lambda-regular at lambda = 1/shape."""

    def __init__(self, shape: float, scale: float):
        if shape <= 1 or scale <= 0:
            raise ParseError(f"pareto needs shape > 1 and scale > 0, got {shape}, {scale}")
        self.shape, self.scale = float(shape), float(scale)
        self.support = Support(self.scale, math.inf)
        self.lambda_claimed = 1.0 / self.shape
        self.name = "pareto"

    def cdf(self, v):
        v = np.asarray(v, dtype=float)
        with np.errstate(divide="ignore"):
            out = 1.0 - np.power(self.scale / v, self.shape)
        return np.where(v >= self.scale, out, 0.0)

    def pdf(self, v):
        v = np.asarray(v, dtype=float)
        with np.errstate(divide="ignore"):
            out = self.shape * np.power(self.scale, self.shape) / np.power(v, self.shape + 1.0)
        return np.where(v >= self.scale, out, 0.0)

    def quantile(self, u):
        return self.scale * np.power(1.0 - np.asarray(u, dtype=float), -1.0 / self.shape)

    def mean(self) -> float:
        return self.shape * self.scale / (self.shape - 1.0)

    @property
    def descriptor(self) -> str:
        return f"pareto:{_fmt(self.shape)}:{_fmt(self.scale)}"


class TruncatedEqualRevenue(Distribution):
    """F(x) = (n/(n-1)) (1 - 1/x) on [1, n).

    A near-equal-revenue family: every item price in (1, n) yields per-buyer
    revenue (n-p)/(n-1) <= 1, while the mean is (n/(n-1)) ln n.  Regular
    (lambda = 1) but not MHR.
    """

    def __init__(self, n: int):
        if n < 2:
            raise ParseError(f"truncated-equal-revenue needs n >= 2, got {n}")
        self.n = int(n)
        self.support = Support(1.0, float(n))
        self.lambda_claimed = 1.0
        self.name = "ter"

    def cdf(self, v):
        v = np.asarray(v, dtype=float)
        c = self.n / (self.n - 1.0)
        out = np.clip(c * (1.0 - 1.0 / np.maximum(v, 1.0)), 0.0, 1.0)
        return np.where(v >= 1.0, out, 0.0)

    def pdf(self, v):
        v = np.asarray(v, dtype=float)
        c = self.n / (self.n - 1.0)
        inside = (v >= 1.0) & (v < self.n)
        with np.errstate(divide="ignore"):
            out = c / (v * v)
        return np.where(inside, out, 0.0)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        return 1.0 / (1.0 - u * (self.n - 1.0) / self.n)

    def mean(self) -> float:
        return self.n / (self.n - 1.0) * math.log(self.n)

    @property
    def descriptor(self) -> str:
        return f"ter:{self.n}"


def _fmt(x: float) -> str:
    return f"{x:g}"


def parse_distribution(descriptor: str) -> Distribution:
    """Parse a textual family descriptor, e.g. ``exp:1.0`` or ``pareto:2:1``."""
    parts = descriptor.strip().split(":")
    kind, args = parts[0].lower(), parts[1:]
    try:
        if kind in ("exp", "exponential"):
            (rate,) = args
            return Exponential(float(rate))
        if kind == "uniform":
            a, b = args
            return Uniform(float(a), float(b))
        if kind == "weibull":
            scale, shape = args
            return Weibull(float(scale), float(shape))
        if kind == "pareto":
            shape, scale = args
            return Pareto(float(shape), float(scale))
        if kind == "ter":
            (n,) = args
            return TruncatedEqualRevenue(int(n))
    except (ValueError, TypeError) as exc:
        raise ParseError(f"bad distribution descriptor {descriptor!r}: {exc}") from exc
    raise ParseError(f"unknown distribution family {kind!r} in {descriptor!r}")


def builtin_families() -> list[Distribution]:
    """The lab's stock instances, spanning lambda = 0, 0 < lambda < 1, lambda = 1."""
    return [
        Exponential(1.0),
        Uniform(0.0, 1.0),
        Weibull(1.0, 2.0),
        Pareto(2.0, 1.0),
        TruncatedEqualRevenue(100),
    ]


# ---------------------------------------------------------------------------
# Hazard / virtual value machinery


def hazard(d: Distribution, v: float) -> float:
    """Hazard rate f(v) / (1 - F(v)) at an interior point."""
    if not d.support.interior(v):
        raise OutOfSupport(f"{v} not in the interior of {d.descriptor} support")
    surv = 1.0 - float(d.cdf(v))
    if surv <= 0.0:
        raise TailDegenerate(f"survival underflowed at v={v} for {d.descriptor}")
    return float(d.pdf(v)) / surv


def virtual_value(d: Distribution, v):
    """Myerson virtual value  v - (1-F(v))/f(v).  Vectorized over v."""
    arr = np.asarray(v, dtype=float)
    scalar = arr.ndim == 0
    if scalar and not d.support.interior(float(arr)):
        raise OutOfSupport(f"{v} not in the interior of {d.descriptor} support")
    out = arr - (1.0 - d.cdf(arr)) / d.pdf(arr)
    return float(out) if scalar else out


def inverse_virtual_value(d: Distribution, c: float, rtol: float = 1e-9) -> float:
    """Solve virtual_value(d, v) = c by bisection.

    Requires a lambda-regular family (so the virtual value is nondecreasing).
    The monopoly reserve price is ``inverse_virtual_value(d, 0)``.
    """
    from scipy.optimize import brentq

    lo = float(d.quantile(1e-12)) if d.support.lo == 0.0 else d.support.lo
    lo = max(lo, float(d.quantile(1e-12)))
    hi = min(d.truncation_point(), float(d.quantile(1.0 - 1e-13)))
    phi_lo = virtual_value(d, lo) if d.support.interior(lo) else _phi_right_limit(d)
    if c < phi_lo - rtol * max(1.0, abs(c)):
        raise OutOfRange(f"target {c} below the virtual-value range of {d.descriptor}")
    if c <= phi_lo:
        return lo
    phi_hi = virtual_value(d, hi)
    # Expand toward the tail if the truncated endpoint does not bracket yet.
    for _ in range(64):
        if phi_hi >= c:
            break
        hi = hi * 2.0 if math.isinf(d.support.hi) else hi
        if not math.isinf(d.support.hi):
            raise OutOfRange(f"target {c} above the virtual-value range of {d.descriptor}")
        phi_hi = virtual_value(d, hi)
    else:
        raise OutOfRange(f"target {c} above the virtual-value range of {d.descriptor}")
    if phi_hi < phi_lo:
        raise NonMonotone(f"virtual value of {d.descriptor} decreases across the bracket")
    root = brentq(lambda v: virtual_value(d, v) - c, lo, hi, xtol=1e-14, rtol=8.9e-16)
    if abs(virtual_value(d, root) - c) > rtol * max(1.0, abs(c)):
        raise NonMonotone(f"bisection failed to pin virtual value at {c} for {d.descriptor}")
    return float(root)


def _phi_right_limit(d: Distribution) -> float:
    v = float(d.quantile(1e-10))
    return virtual_value(d, v) if d.support.interior(v) else virtual_value(d, float(d.quantile(1e-6)))


# ---------------------------------------------------------------------------
# lambda-regularity certificate


@dataclass
class RegularityCertificate:
    lam: float
    grid: np.ndarray = field(repr=False)
    min_slope: float = 0.0
    passed: bool = False
    truncated_tail_mass: float = 0.0


def generalized_virtual_margin(d: Distribution, lam: float, v):
    """m_lambda(v) = lambda*v - (1-F(v))/f(v); nondecreasing iff lambda-regular."""
    v = np.asarray(v, dtype=float)
    return lam * v - (1.0 - d.cdf(v)) / d.pdf(v)


def check_lambda_regularity(d: Distribution, lam: float, grid_size: int = 400) -> RegularityCertificate:
    """Grid test of lambda-regularity on a quantile-spaced grid.

    Tails are trimmed at quantiles 1e-6 and 1-1e-6; the pass tolerance is
    -1e-7 * scale so finite-difference noise never masks a linear-in-v
    violation (e.g. Pareto(2) tested at lambda < 1/2).
    """
    if grid_size < 8:
        raise ValueError("grid_size must be at least 8")
    us = np.linspace(TAIL_TRIM_Q, 1.0 - TAIL_TRIM_Q, grid_size)
    grid = np.asarray(d.quantile(us), dtype=float)
    margin = generalized_virtual_margin(d, lam, grid)
    diffs = np.diff(margin)
    # Scale against the components of the margin, not the margin itself:
    # the margin can cancel to ~0 (Pareto at its exact lambda) while the
    # rounding noise tracks lam*v and (1-F)/f individually.
    components = np.abs(lam * grid) + np.abs(margin - lam * grid)
    scale = max(1.0, float(np.max(components)))
    min_slope = float(np.min(diffs))
    tol = 1e-7 * scale
    return RegularityCertificate(
        lam=lam,
        grid=grid,
        min_slope=min_slope,
        passed=min_slope >= -tol,
        truncated_tail_mass=d.truncated_tail_mass(),
    )


# ---------------------------------------------------------------------------
# The g / Gamma / H apparatus


def g_lambda(lam: float, x):
    """g_lam(x) = ((1-x)^-lam - 1)/lam, with the log limit at lam = 0.

    Convexity of g_lam(F(x)^n) certifies that the max of n i.i.d. draws stays
    in the same regularity class.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    if np.any(x >= 1.0) or np.any(x < 0.0):
        raise DomainError("g_lambda requires 0 <= x < 1")
    if lam == 0.0:
        out = -np.log1p(-x)
    else:
        out = np.expm1(-lam * np.log1p(-x)) / lam
    return float(out) if scalar else out


def gamma_lambda(lam: float, u):
    """Gamma_lam(u) = (1 + lam*u)^(-1/lam); exp(-u) at lam = 0."""
    u = np.asarray(u, dtype=float)
    if lam == 0.0:
        return np.exp(-u)
    return np.power(1.0 + lam * u, -1.0 / lam)


def generalized_hazard(d: Distribution, lam: float, v):
    """r_lam(v) = h(v) / (1-F(v))^lam; nondecreasing iff lambda-regular."""
    v = np.asarray(v, dtype=float)
    surv = 1.0 - d.cdf(v)
    return d.pdf(v) / np.power(surv, 1.0 + lam)


def gamma_h_representation(d: Distribution, lam: float, v: float) -> tuple[float, float]:
    """Cumulative generalized hazard H_lam(v) plus the reconstruction error.

    H_lam(v) = int_{v_lo}^{v} r_lam, and for a lambda-regular family
    Gamma_lam(H_lam(v)) must reproduce the survival function 1 - F(v).
    """
    if not d.support.interior(v) and v != d.support.lo:
        raise OutOfSupport(f"{v} not inside {d.descriptor} support")
    if v == d.support.lo:
        return 0.0, 0.0
    val, err = integrate.quad(lambda z: float(generalized_hazard(d, lam, z)), d.support.lo, v, limit=200)
    if not math.isfinite(val) or err > 1e-8 * max(1.0, abs(val)):
        raise QuadratureFailure(f"H integral did not converge for {d.descriptor} at v={v}")
    recon = float(gamma_lambda(lam, val))
    return float(val), abs(recon - (1.0 - float(d.cdf(v))))


def c_of_lambda(lam: float) -> float:
    """Tail constant (1-lam)^(1/lam); 1/e at lam=0, 0 at lam=1.

    Governs the bound P[v >= E[v]] >= c(lambda) for lambda-regular draws.
    """
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"lambda must lie in [0,1], got {lam}")
    if lam == 0.0:
        return 1.0 / math.e
    if lam == 1.0:
        return 0.0
    return (1.0 - lam) ** (1.0 / lam)
