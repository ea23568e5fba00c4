"""Noise coefficients and their Lipschitz mollifications.

A coefficient is one of a small set of continuous, linearly growing
families (several deliberately non-Lipschitz), plus a tabulated escape
hatch.  Level-n mollification convolves the clamped coefficient with a
centered Gaussian of variance 1/n:

    smoothed(u) = E[ clamp(raw(u + xi), -n, n) ],   xi ~ N(0, 1/n),

which is globally Lipschitz for every fixed n and converges pointwise to
the raw coefficient.  The expectation is computed by Gauss-Hermite
quadrature.
"""

import functools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

FAMILIES = ("linear", "power", "sqrt_pos", "stepstone", "constant", "tabulated")


@functools.lru_cache(maxsize=8)
def _gauss_hermite(q):
    # probabilist normalization: E[g(Z)] ~= weights @ g(nodes), Z standard normal
    nodes, weights = np.polynomial.hermite.hermgauss(q)
    return nodes * math.sqrt(2.0), weights / math.sqrt(math.pi)


@functools.lru_cache(maxsize=4)
def _gauss_legendre(q):
    return np.polynomial.legendre.leggauss(q)


@dataclass(frozen=True)
class CoefficientSpec:
    """A coefficient family plus its mollification level (n=0 means raw)."""

    family: str
    n: int = 0
    a: float = 0.0
    b: float = 1.0
    beta: float = 0.5
    c: float = 1.0
    table_u: tuple = None
    table_v: tuple = None
    quad_nodes: int = 64

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown coefficient family {self.family!r}")
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 0):
            raise ConfigurationError(f"mollification level must be an int >= 0, got {self.n}")
        if self.family == "power" and not 0.0 < self.beta <= 1.0:
            raise ConfigurationError(f"power exponent must lie in (0, 1], got {self.beta}")
        if self.family == "tabulated":
            if self.table_u is None or self.table_v is None:
                raise ConfigurationError("tabulated family needs table_u and table_v")
            u = np.asarray(self.table_u, dtype=float)
            v = np.asarray(self.table_v, dtype=float)
            if u.size != v.size or u.size < 2 or np.any(np.diff(u) <= 0):
                raise ConfigurationError("tabulated nodes must be increasing, len >= 2")
        if self.quad_nodes < 2:
            raise ConfigurationError("quad_nodes must be >= 2")

    # -- constructors ----------------------------------------------------

    @classmethod
    def linear(cls, a, b, n=0):
        return cls(family="linear", n=n, a=a, b=b)

    @classmethod
    def power(cls, beta, n=0):
        return cls(family="power", n=n, beta=beta)

    @classmethod
    def sqrt_pos(cls, n=0):
        return cls(family="sqrt_pos", n=n)

    @classmethod
    def stepstone(cls, n=0):
        return cls(family="stepstone", n=n)

    @classmethod
    def constant(cls, c, n=0):
        return cls(family="constant", n=n, c=c)

    @classmethod
    def tabulated(cls, table_u, table_v, n=0):
        return cls(
            family="tabulated",
            n=n,
            table_u=tuple(float(x) for x in table_u),
            table_v=tuple(float(x) for x in table_v),
        )

    def with_level(self, n):
        return (
            self
            if n == self.n
            else CoefficientSpec(
                family=self.family,
                n=n,
                a=self.a,
                b=self.b,
                beta=self.beta,
                c=self.c,
                table_u=self.table_u,
                table_v=self.table_v,
                quad_nodes=self.quad_nodes,
            )
        )

    # -- evaluation ------------------------------------------------------

    def raw(self, u):
        """The unmollified coefficient, total on the reals."""
        u = np.asarray(u, dtype=float)
        if self.family == "linear":
            out = self.a + self.b * u
        elif self.family == "power":
            out = np.abs(u) ** self.beta
        elif self.family == "sqrt_pos":
            out = np.sqrt(np.maximum(u, 0.0))
        elif self.family == "stepstone":
            out = np.sqrt(np.maximum(np.minimum(u, 1.0), 0.0) * np.maximum(1.0 - u, 0.0))
        elif self.family == "constant":
            out = np.full_like(u, self.c)
        else:  # tabulated, constant extension outside the table
            out = np.interp(u, self.table_u, self.table_v)
        return out if out.ndim else float(out)

    def eval(self, u):
        """Mollified value at level n (raw value when n = 0)."""
        if self.n == 0:
            return self.raw(u)
        u = np.asarray(u, dtype=float)
        nodes, weights = _gauss_hermite(self.quad_nodes)
        sigma = 1.0 / math.sqrt(self.n)
        vals = self.raw(u[..., None] + sigma * nodes)
        out = np.clip(vals, -float(self.n), float(self.n)) @ weights
        return out if out.ndim else float(out)

    def __call__(self, u):
        return self.eval(u)

    def growth_constant(self):
        """Analytic C with |raw(u)| <= C * (1 + |u|) for every u."""
        if self.family == "linear":
            return max(abs(self.a), abs(self.b))
        if self.family in ("power", "sqrt_pos"):
            return 1.0
        if self.family == "stepstone":
            return 0.5
        if self.family == "constant":
            return abs(self.c)
        return float(np.max(np.abs(self.table_v)))

    def kink_points(self):
        """Locations where raw() is not differentiable."""
        if self.family in ("power", "sqrt_pos"):
            return (0.0,)
        if self.family == "stepstone":
            return (0.0, 1.0)
        if self.family == "tabulated":
            return tuple(self.table_u)
        return ()

    def _clamp_crossings(self):
        """Arguments where |raw| crosses the clamp level n."""
        n = float(self.n)
        if self.family == "linear" and self.b != 0.0:
            return ((-n - self.a) / self.b, (n - self.a) / self.b)
        if self.family == "power":
            r = n ** (1.0 / self.beta)
            return (-r, r)
        if self.family == "sqrt_pos":
            return (n * n,)
        if self.family == "tabulated":
            out = []
            us = np.asarray(self.table_u)
            vs = np.asarray(self.table_v)
            for lvl in (-n, n):
                for i in range(us.size - 1):
                    dv = vs[i + 1] - vs[i]
                    if dv != 0.0:
                        t = (lvl - vs[i]) / dv
                        if 0.0 <= t <= 1.0:
                            out.append(us[i] + t * (us[i + 1] - us[i]))
            return tuple(out)
        return ()  # stepstone is bounded by 1/2, constant never crosses


_GL_WINDOW = 12.0  # Gaussian mass outside +-12 sigma is ~5e-32
_GL_PANELS = 8


def _eval_smooth(spec, u):
    """Mollified value by Gauss-Legendre split at every integrand kink.

    Same integral as eval(); spectrally accurate and smooth in u, so it is
    the right backend for slope scans.  Slower than the Gauss-Hermite rule
    the solver uses.
    """
    if spec.n == 0:
        return spec.raw(u)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    sigma = 1.0 / math.sqrt(spec.n)
    breaks = sorted(set(spec.kink_points()) | set(spec._clamp_crossings()))
    zb = np.clip((np.asarray(breaks) - u[:, None]) / sigma, -_GL_WINDOW, _GL_WINDOW)
    edges = np.concatenate(
        [np.full((u.size, 1), -_GL_WINDOW), zb, np.full((u.size, 1), _GL_WINDOW)],
        axis=1,
    )
    nodes, weights = _gauss_legendre(32)
    total = np.zeros(u.size)
    for i in range(edges.shape[1] - 1):
        a, b = edges[:, i], edges[:, i + 1]
        for j in range(_GL_PANELS):
            pa = a + (b - a) * (j / _GL_PANELS)
            pb = a + (b - a) * ((j + 1) / _GL_PANELS)
            mid, half = 0.5 * (pa + pb), 0.5 * (pb - pa)
            z = mid[:, None] + half[:, None] * nodes
            vals = np.clip(spec.raw(u[:, None] + sigma * z), -float(spec.n), float(spec.n))
            dens = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
            total += (vals * dens) @ weights * half
    return total


def lipschitz_estimate(spec, lo, hi, samples=2001):
    """Max finite-difference slope over a dense scan of [lo, hi].

    Finite for every n >= 1; for n = 0 with a non-Lipschitz family the scan
    value grows without bound as the sampling refines (flagged by the
    caller, never an error).
    """
    if not hi > lo:
        raise ConfigurationError(f"empty range [{lo}, {hi}]")
    u = np.linspace(lo, hi, samples)
    # the split-rule evaluator is smooth in u, so the scan converges under
    # refinement instead of amplifying fixed-node quadrature wiggle
    v = _eval_smooth(spec, u) if spec.n >= 1 else spec.raw(u)
    return float(np.max(np.abs(np.diff(v) / np.diff(u))))


def linear_growth_constants(spec, lo=-10.0, hi=10.0, samples=2001):
    """Fit (eps_n, C) with |eval(u)| <= eps_n + C(1+|u|) on the probe range.

    C is the analytic growth constant of the raw family; eps_n is the
    smallest scan surplus of the mollified values over that envelope, so it
    shrinks toward 0 as n grows.
    """
    u = np.linspace(lo, hi, samples)
    v = np.abs(spec.eval(u))
    c = spec.growth_constant()
    eps_n = float(max(0.0, np.max(v - c * (1.0 + np.abs(u)))))
    return eps_n, c


def mollifier_test_points(count=21, lo=-2.0, hi=2.0, keepout=0.4, kinks=(0.0, 1.0)):
    """Canonical probe points on [lo, hi] for mollifier convergence checks.

    Placed with equal arc length along the interval minus keepout-radius
    neighborhoods of the built-in families' kink locations: exactly at a
    kink, Gaussian smoothing of a sqrt-type coefficient converges like
    n^(-1/4), far too slowly for any fixed-n accuracy target.
    """
    segments = []
    cursor = lo
    for k in sorted(kinks):
        if k - keepout > cursor:
            segments.append((cursor, min(k - keepout, hi)))
        cursor = max(cursor, k + keepout)
    if cursor < hi:
        segments.append((cursor, hi))
    lengths = np.array([b - a for a, b in segments])
    total = lengths.sum()
    arcs = np.linspace(0.0, total, count)
    pts = np.empty(count)
    starts = np.concatenate([[0.0], np.cumsum(lengths)])
    for i, s in enumerate(arcs):
        j = min(np.searchsorted(starts, s, side="right") - 1, len(segments) - 1)
        pts[i] = segments[j][0] + (s - starts[j])
    return pts
