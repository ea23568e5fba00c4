"""Monte Carlo estimation of the moment and modulus functionals.

Everything here is a grid proxy: "sup over t" means the max over stored
step times (a lower bound for the continuous-time supremum), and spatial
shifts use zero extension beyond [0, L], consistent with the Dirichlet
data.  Replica simulations stream through reductions one path at a time;
aggregation uses numpy's pairwise summation so the result is independent
of worker count.
"""

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError, ExplosionError
from .heat_kernel import kernel_lp_integral
from .parallel import parallel_map
from .solver import default_test_function, pair_with_test_function, solve_path


def lp_norm_p(values, p, dx):
    """Trapezoid quadrature of ∫ |v|^p dx for interior-node values.

    Boundary nodes are implied zeros, so the trapezoid rule reduces to
    dx * sum(|v|^p) over the last axis.  Returns the p-th power of the norm.
    """
    if p < 1:
        raise DomainError(f"p must be >= 1, got {p}")
    values = np.asarray(values, dtype=float)
    return np.sum(np.abs(values) ** p, axis=-1) * dx


def _trapezoid_abs_pow(full_values, p, dx):
    v = np.abs(np.asarray(full_values, dtype=float)) ** p
    return dx * (v.sum() - 0.5 * (v[0] + v[-1]))


@dataclass(frozen=True)
class MomentEstimate:
    estimate: float
    stderr: float
    used: int
    explosions: int


@dataclass(frozen=True)
class ModulusPoint:
    offset: float  # delta (temporal) or shift (spatial)
    estimate: float
    stderr: float


@dataclass(frozen=True)
class ModulusResult:
    points: tuple
    explosions: int


def _mean_stderr(values):
    values = np.asarray(values, dtype=float)
    n = values.size
    mean = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, stderr


# -- uniform p-th moment -------------------------------------------------


def _sup_moment_one(replica_id, grid, ic, coeff, noise, p, master_seed):
    try:
        path = solve_path(grid, ic, coeff, noise, master_seed, replica_id)
    except ExplosionError:
        return math.nan
    return float(np.max(lp_norm_p(path.u, p, grid.dx)))


def estimate_sup_moment(
    grid,
    ic,
    coeff,
    noise,
    p,
    replicas,
    master_seed,
    workers=1,
    require_complete=False,
    replica_offset=0,
):
    """Mean over replicas of max-over-time ||u_t||_p^p, with standard error.

    Exploded replicas are dropped and counted unless require_complete is
    set, in which case the first explosion propagates.
    """
    worker = functools.partial(
        _sup_moment_one,
        grid=grid,
        ic=ic,
        coeff=coeff,
        noise=noise,
        p=p,
        master_seed=master_seed,
    )
    vals = np.asarray(
        parallel_map(worker, range(replica_offset, replica_offset + replicas), workers)
    )
    exploded = int(np.isnan(vals).sum())
    if exploded and require_complete:
        raise ExplosionError(step=-1)
    vals = vals[~np.isnan(vals)]
    if vals.size == 0:
        return MomentEstimate(math.nan, math.nan, 0, exploded)
    mean, stderr = _mean_stderr(vals)
    return MomentEstimate(mean, stderr, int(vals.size), exploded)


# -- temporal modulus ----------------------------------------------------


def _delta_steps(deltas, grid):
    steps = []
    for d in deltas:
        if d < 0 or d > grid.T:
            raise ConfigurationError(f"delta {d} outside [0, T={grid.T}]")
        k = int(round(d / grid.dt))
        if abs(k * grid.dt - d) > 1e-9 * max(grid.dt, d):
            raise ConfigurationError(f"delta {d} is not a multiple of dt={grid.dt}")
        steps.append(k)
    return steps


def _temporal_modulus_one(replica_id, grid, ic, coeff, noise, p, steps, master_seed):
    try:
        path = solve_path(grid, ic, coeff, noise, master_seed, replica_id)
    except ExplosionError:
        return None
    u = path.u
    out = np.empty(len(steps))
    for i, d in enumerate(steps):
        if d == 0:
            out[i] = 0.0
            continue
        jmax = grid.nt - d  # pairs (t_j, t_j + h dt) with j <= nt - d, h <= d
        best = 0.0
        for h in range(1, d + 1):
            diffs = u[h : h + jmax + 1] - u[: jmax + 1]
            best = max(best, float(np.max(lp_norm_p(diffs, p, grid.dx))))
        out[i] = best
    return out


def temporal_modulus(
    grid, ic, coeff, noise, p, deltas, replicas, master_seed, workers=1
):
    """Per-delta estimates of E[sup_{t<=T-δ} sup_{h<=δ} ||u_{t+h} - u_t||_p^p]."""
    steps = _delta_steps(deltas, grid)
    worker = functools.partial(
        _temporal_modulus_one,
        grid=grid,
        ic=ic,
        coeff=coeff,
        noise=noise,
        p=p,
        steps=steps,
        master_seed=master_seed,
    )
    rows = parallel_map(worker, range(replicas), workers)
    exploded = sum(1 for r in rows if r is None)
    kept = np.asarray([r for r in rows if r is not None])
    points = []
    for i, d in enumerate(deltas):
        mean, stderr = _mean_stderr(kept[:, i]) if kept.size else (math.nan, math.nan)
        points.append(ModulusPoint(float(d), mean, stderr))
    return ModulusResult(points=tuple(points), explosions=exploded)


# -- spatial modulus -----------------------------------------------------


def spatial_modulus(path, p, shifts):
    """||u(T, . + s) - u(T, .)||_p^p per shift, zero-extended outside [0, L]."""
    grid = path.grid
    full = np.zeros(grid.nx + 2)
    full[1:-1] = path.u[-1]
    out = []
    for s in shifts:
        if s < 0:
            raise ConfigurationError(f"shift must be >= 0, got {s}")
        k = int(round(s / grid.dx))
        if abs(k * grid.dx - s) > 1e-9 * max(grid.dx, s):
            raise ConfigurationError(f"shift {s} is not a multiple of dx={grid.dx}")
        shifted = np.zeros_like(full)
        if k <= grid.nx + 1:
            shifted[: full.size - k] = full[k:]
        out.append(float(_trapezoid_abs_pow(shifted - full, p, grid.dx)))
    return out


def _spatial_modulus_one(replica_id, grid, ic, coeff, noise, p, shifts, master_seed):
    try:
        path = solve_path(grid, ic, coeff, noise, master_seed, replica_id)
    except ExplosionError:
        return None
    return np.asarray(spatial_modulus(path, p, shifts))


def estimate_spatial_modulus(
    grid, ic, coeff, noise, p, shifts, replicas, master_seed, workers=1
):
    """Replica average of the final-time spatial modulus at each shift."""
    worker = functools.partial(
        _spatial_modulus_one,
        grid=grid,
        ic=ic,
        coeff=coeff,
        noise=noise,
        p=p,
        shifts=list(shifts),
        master_seed=master_seed,
    )
    rows = parallel_map(worker, range(replicas), workers)
    exploded = sum(1 for r in rows if r is None)
    kept = np.asarray([r for r in rows if r is not None])
    points = []
    for i, s in enumerate(shifts):
        mean, stderr = _mean_stderr(kept[:, i]) if kept.size else (math.nan, math.nan)
        points.append(ModulusPoint(float(s), mean, stderr))
    return ModulusResult(points=tuple(points), explosions=exploded)


# -- weak-convergence proxy ----------------------------------------------


def _pairing_one(replica_id, grid, ic, coeff, noise, psi, master_seed):
    try:
        path = solve_path(grid, ic, coeff, noise, master_seed, replica_id)
    except ExplosionError:
        return math.nan
    return float(pair_with_test_function(path, psi)[-1])


def pairing_samples(
    grid, ic, coeff, noise, replicas, master_seed, psi=None, replica_offset=0, workers=1
):
    """Samples of <u_T, psi> across replicas (NaN marks exploded paths)."""
    if psi is None:
        psi = default_test_function(grid)
    worker = functools.partial(
        _pairing_one,
        grid=grid,
        ic=ic,
        coeff=coeff,
        noise=noise,
        psi=psi,
        master_seed=master_seed,
    )
    return np.asarray(
        parallel_map(worker, range(replica_offset, replica_offset + replicas), workers)
    )


def ks_distance(samples_a, samples_b):
    """Two-sample Kolmogorov-Smirnov statistic, in [0, 1]."""
    a = np.sort(np.asarray(samples_a, dtype=float))
    b = np.sort(np.asarray(samples_b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise DomainError("ks_distance needs nonempty samples")
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


def bootstrap_ks_ci(samples_a, samples_b, stream, n_boot=200, level=0.90):
    """Percentile bootstrap confidence interval for the KS distance."""
    a = np.asarray(samples_a, dtype=float)
    b = np.asarray(samples_b, dtype=float)
    stats = np.empty(n_boot)
    for i in range(n_boot):
        ra = a[stream.integers(0, a.size, a.size)]
        rb = b[stream.integers(0, b.size, b.size)]
        stats[i] = ks_distance(ra, rb)
    tail = 0.5 * (1.0 - level)
    lo, hi = np.quantile(stats, [tail, 1.0 - tail])
    return float(lo), float(hi)


# -- closed-form windows and kernel fits ----------------------------------


def beta_window(p):
    """Admissible factorization exponents ((p-1)/p, (3-p)/(2p)); None when empty.

    The window closes exactly at p = 5/3, which is why the function-valued
    regime needs p below that threshold.
    """
    if p <= 1:
        raise DomainError(f"p must exceed 1, got {p}")
    lo = (p - 1.0) / p
    hi = (3.0 - p) / (2.0 * p)
    if not lo < hi:
        return None
    return lo, hi


def kernel_decay_fit(cfg, p, times, x=None):
    """Log-log slope of ∫|G_t|^p dy against t, with rms fit residual."""
    times = np.asarray(times, dtype=float)
    if times.size < 3:
        raise ConfigurationError("decay fit needs at least 3 times")
    if x is None:
        x = 0.5 * cfg.L
    vals = np.array([kernel_lp_integral(cfg, t, x, p) for t in times])
    logt = np.log(times)
    logv = np.log(vals)
    slope, intercept = np.polyfit(logt, logv, 1)
    resid = logv - (slope * logt + intercept)
    return float(slope), float(np.sqrt(np.mean(resid**2)))


# -- aggregate report ----------------------------------------------------


@dataclass
class MomentReport:
    """Everything the moment experiments measure, with uncertainties."""

    p: float
    n_levels: tuple
    replicas: int
    sup_moment: list = field(default_factory=list)  # (n, estimate, stderr)
    temporal_moduli: list = field(default_factory=list)  # (delta, estimate, stderr)
    spatial_moduli: list = field(default_factory=list)  # (shift, estimate, stderr)
    ks_chain: list = field(default_factory=list)  # (n_lo, n_hi, ks, ci_lo, ci_hi)
    explosions: int = 0

    def violations(self):
        """Invariant breaches: non-finite entries or a temporal modulus that
        rises by more than 2 combined standard errors as delta shrinks."""
        out = []
        for name, rows in (
            ("sup_moment", self.sup_moment),
            ("temporal_moduli", self.temporal_moduli),
            ("spatial_moduli", self.spatial_moduli),
        ):
            for row in rows:
                if not all(math.isfinite(v) for v in row[1:]):
                    out.append(f"{name} entry {row} not finite")
                elif row[1] < 0:
                    out.append(f"{name} entry {row} negative")
        ordered = sorted(self.temporal_moduli, key=lambda r: r[0], reverse=True)
        for (d1, e1, s1), (d2, e2, s2) in zip(ordered, ordered[1:]):
            slack = 2.0 * math.hypot(s1, s2)
            if e2 > e1 + slack:
                out.append(
                    f"temporal modulus rose from {e1:.6g} (delta={d1:.6g}) to "
                    f"{e2:.6g} (delta={d2:.6g}) beyond 2 stderr"
                )
        return out
