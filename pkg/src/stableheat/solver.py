"""Semi-implicit time stepping for the jump-driven heat equation.

One step solves

    (I - (dt/2) D2) u_next = u + coeff(u) * increments / dx

where D2 is the centered second-difference matrix with Dirichlet closure.
Diffusion is implicit (unconditionally stable), the noise term explicit and
evaluated at the previous state, realizing the predictable left-limit
integrand.  The 1/dx factor converts a cell-measure increment into the
white-noise density scaling, so squared increments scale like dt/dx.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from .errors import ConfigurationError, ExplosionError
from .stable_noise import replica_stream, sample_increment_field

_STATE_CAP = 1e150


@dataclass(frozen=True)
class GridSpec:
    """Uniform space-time grid: nx interior nodes on (0, L), nt steps to T."""

    L: float
    nx: int
    T: float
    nt: int

    def __post_init__(self):
        if not self.L > 0:
            raise ConfigurationError(f"L must be positive, got {self.L}")
        if not self.T > 0:
            raise ConfigurationError(f"T must be positive, got {self.T}")
        if self.nx < 3:
            raise ConfigurationError(f"nx must be >= 3, got {self.nx}")
        if self.nt < 1:
            raise ConfigurationError(f"nt must be >= 1, got {self.nt}")

    @property
    def dx(self):
        return self.L / (self.nx + 1)

    @property
    def dt(self):
        return self.T / self.nt

    def interior_x(self):
        return self.dx * np.arange(1, self.nx + 1)

    def full_x(self):
        return self.dx * np.arange(self.nx + 2)


@dataclass(frozen=True)
class InitialCondition:
    family: str
    k: int = 1
    center: float = 0.5
    width: float = 0.1
    values: tuple = None

    def __post_init__(self):
        if self.family not in ("zero", "sine", "bump", "tabulated"):
            raise ConfigurationError(f"unknown initial condition {self.family!r}")
        if self.family == "tabulated" and self.values is None:
            raise ConfigurationError("tabulated initial condition needs values")

    @classmethod
    def zero(cls):
        return cls(family="zero")

    @classmethod
    def sine(cls, k=1):
        return cls(family="sine", k=k)

    @classmethod
    def bump(cls, center, width):
        return cls(family="bump", center=center, width=width)

    @classmethod
    def tabulated(cls, values):
        return cls(family="tabulated", values=tuple(float(v) for v in values))

    def sample(self, grid):
        """Interior-node samples; boundary values are pinned to zero anyway."""
        x = grid.interior_x()
        if self.family == "zero":
            return np.zeros(grid.nx)
        if self.family == "sine":
            return np.sin(self.k * np.pi * x / grid.L)
        if self.family == "bump":
            return np.exp(-0.5 * ((x - self.center) / self.width) ** 2)
        vals = np.asarray(self.values, dtype=float)
        if vals.size != grid.nx:
            raise ConfigurationError(
                f"tabulated initial condition has {vals.size} values, grid has {grid.nx}"
            )
        return vals.copy()


@dataclass(frozen=True)
class PathSample:
    """One trajectory on the grid, interior nodes only (boundary = 0)."""

    u: np.ndarray  # shape (nt + 1, nx)
    grid: GridSpec
    replica_id: int
    master_seed: int


def _operator_factor(grid):
    # banded Cholesky of I - (dt/2) D2; strictly diagonally dominant
    r = grid.dt / (2.0 * grid.dx**2)
    ab = np.zeros((2, grid.nx))
    ab[0, 1:] = -r
    ab[1, :] = 1.0 + 2.0 * r
    return cholesky_banded(ab, lower=False)


def _advance(state, noise_row, coeff, grid, factor):
    rhs = state + coeff.eval(state) * noise_row / grid.dx
    return cho_solve_banded((factor, False), rhs)


def step(state, noise_row, coeff, grid):
    """One semi-implicit step; state and noise_row hold nx entries."""
    state = np.asarray(state, dtype=float)
    noise_row = np.asarray(noise_row, dtype=float)
    assert state.shape == noise_row.shape == (grid.nx,)
    return _advance(state, noise_row, coeff, grid, _operator_factor(grid))


def solve_path(grid, ic, coeff, noise, master_seed, replica_id=0):
    """Full trajectory from one sampled increment field.

    Deterministic in (master_seed, replica_id); raises ExplosionError with
    the first bad step index if the state leaves the representable range
    (possible for raw non-Lipschitz coefficients at n = 0).
    """
    stream = replica_stream(master_seed, replica_id)
    field = sample_increment_field(noise, grid, stream)
    factor = _operator_factor(grid)
    u = np.empty((grid.nt + 1, grid.nx))
    u[0] = ic.sample(grid)
    for j in range(grid.nt):
        nxt = _advance(u[j], field.values[j], coeff, grid, factor)
        if not np.all(np.isfinite(nxt)) or np.max(np.abs(nxt)) > _STATE_CAP:
            raise ExplosionError(step=j + 1, replica_id=replica_id)
        u[j + 1] = nxt
    return PathSample(u=u, grid=grid, replica_id=replica_id, master_seed=master_seed)


def pair_with_test_function(path, psi):
    """Trapezoid pairing <u_t, psi> at every stored time.

    ``psi`` is sampled on the full grid (nx + 2 nodes) and must vanish at
    both boundary nodes.
    """
    psi = np.asarray(psi, dtype=float)
    grid = path.grid
    if psi.size != grid.nx + 2:
        raise ConfigurationError(
            f"test function has {psi.size} nodes, expected {grid.nx + 2}"
        )
    scale = max(1.0, float(np.max(np.abs(psi))))
    if abs(psi[0]) > 1e-12 * scale or abs(psi[-1]) > 1e-12 * scale:
        raise ConfigurationError("test function must vanish at both boundaries")
    return path.u @ psi[1:-1] * grid.dx


def default_test_function(grid):
    """sin^2(pi x / L) on the full grid: vanishes with its derivative at both walls."""
    psi = np.sin(np.pi * grid.full_x() / grid.L) ** 2
    psi[0] = psi[-1] = 0.0
    return psi
