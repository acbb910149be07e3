"""Samplers for non-intersecting Brownian bridges and Dyson Brownian motion.

Conventions: path index 0 is the top path (largest position); positions are
stored as an ``n x (steps + 1)`` array with ``positions[j, s] = x_{j+1}(t_s)``.
Each path has Brownian variance rate ``sigma``; the default for ensembles of
``n`` paths is ``sigma = 1/n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
import scipy.linalg

from .truncnorm import truncnorm_ppf


class _Unbounded:
    """Tag for a missing lower or upper boundary (f = -inf or g = +inf)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNBOUNDED"

    def __reduce__(self):
        return (_Unbounded, ())


UNBOUNDED = _Unbounded()
Boundary = Union[_Unbounded, np.ndarray]


# rounding slack for ordering checks of coupled chains
COUPLING_TOL = 1e-12


class InvariantViolation(RuntimeError):
    pass


class StepSizeError(RuntimeError):
    """Raised when the Euler scheme re-sorts too often."""


class InfeasibleBoundary(ValueError):
    pass


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TimeGrid:
    t_start: float
    t_end: float
    steps: int

    def __post_init__(self):
        if not (np.isfinite(self.t_start) and np.isfinite(self.t_end)):
            raise ValueError("grid endpoints must be finite")
        if not self.t_start < self.t_end:
            raise ValueError("t_start must be < t_end")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError("steps must be a positive integer")
        object.__setattr__(self, "steps", int(self.steps))

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.steps + 1)

    def index(self, t: float) -> int:
        s = (t - self.t_start) / self.dt
        k = int(round(s))
        if abs(s - k) > 1e-9 or not 0 <= k <= self.steps:
            raise ValueError(f"time {t} is not on the grid")
        return k


@dataclass(frozen=True)
class BoundaryData:
    """Starting data u, ending data v, lower boundary f and upper boundary g.

    u and v are weakly decreasing; f and g are either ``UNBOUNDED`` or arrays
    of values on the time grid.
    """

    u: np.ndarray
    v: np.ndarray
    f: Boundary = UNBOUNDED
    g: Boundary = UNBOUNDED
    sigma: float | None = None

    def __post_init__(self):
        u = _frozen(np.atleast_1d(self.u))
        v = _frozen(np.atleast_1d(self.v))
        if u.shape != v.shape or u.ndim != 1 or u.size == 0:
            raise ValueError("u and v must be non-empty 1-d arrays of equal length")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise ValueError("u and v must be finite")
        if np.any(np.diff(u) > 0) or np.any(np.diff(v) > 0):
            raise ValueError("u and v must be weakly decreasing")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        for name in ("f", "g"):
            val = getattr(self, name)
            if val is None:
                raise ValueError(f"use UNBOUNDED rather than None for {name}")
            if not isinstance(val, _Unbounded):
                arr = _frozen(val)
                if not np.all(np.isfinite(arr)):
                    raise ValueError(f"{name} must be finite; use UNBOUNDED for infinite boundaries")
                object.__setattr__(self, name, arr)
        sigma = 1.0 / u.size if self.sigma is None else float(self.sigma)
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "sigma", sigma)

    @property
    def n(self) -> int:
        return self.u.size

    def lower(self, grid: TimeGrid) -> np.ndarray:
        return self._values(self.f, grid, -np.inf)

    def upper(self, grid: TimeGrid) -> np.ndarray:
        return self._values(self.g, grid, np.inf)

    @staticmethod
    def _values(b, grid, fill):
        if isinstance(b, _Unbounded):
            return np.full(grid.steps + 1, fill)
        if b.shape != (grid.steps + 1,):
            raise ValueError("boundary array does not match the time grid")
        return np.asarray(b)

    def validate(self, grid: TimeGrid) -> None:
        f, g = self.lower(grid), self.upper(grid)
        if np.any(~(f < g)):
            raise InfeasibleBoundary("need f < g at every grid time")
        if not (f[0] <= self.u[-1] and self.u[0] <= g[0]):
            raise InfeasibleBoundary("starting data outside [f, g]")
        if not (f[-1] <= self.v[-1] and self.v[0] <= g[-1]):
            raise InfeasibleBoundary("ending data outside [f, g]")


@dataclass(frozen=True)
class PathEnsemble:
    boundary: BoundaryData
    grid: TimeGrid
    positions: np.ndarray = field(repr=False)

    def __post_init__(self):
        pos = _frozen(self.positions)
        if pos.shape != (self.boundary.n, self.grid.steps + 1):
            raise ValueError("positions must have shape n x (steps+1)")
        object.__setattr__(self, "positions", pos)

    @property
    def n(self) -> int:
        return self.boundary.n

    def check(self) -> None:
        """Raise InvariantViolation unless ordering, boundary and endpoint constraints hold."""
        x = self.positions
        if not (np.allclose(x[:, 0], self.boundary.u, atol=1e-12, rtol=0)
                and np.allclose(x[:, -1], self.boundary.v, atol=1e-12, rtol=0)):
            raise InvariantViolation("endpoints differ from boundary data")
        inner = x[:, 1:-1]
        if inner.size == 0:
            return
        if np.any(inner[:-1] <= inner[1:]):
            raise InvariantViolation("paths are not strictly ordered")
        f = self.boundary.lower(self.grid)[1:-1]
        g = self.boundary.upper(self.grid)[1:-1]
        if np.any(inner[-1] <= f) or np.any(inner[0] >= g):
            raise InvariantViolation("paths leave the region between f and g")


@dataclass(frozen=True)
class DbmState:
    lam: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        lam = _frozen(np.atleast_1d(self.lam))
        if not np.all(np.isfinite(lam)):
            raise ValueError("entries must be finite")
        if np.any(np.diff(lam) > 0):
            raise ValueError("state must be weakly decreasing")
        if self.time < 0:
            raise ValueError("time must be nonnegative")
        object.__setattr__(self, "lam", lam)


# ---------------------------------------------------------------- bridges

def sample_bridge(u: float, v: float, grid: TimeGrid, sigma: float, rng) -> np.ndarray:
    """One Brownian bridge from u to v with variance rate sigma, on the grid."""
    if not (np.isfinite(u) and np.isfinite(v)):
        raise ValueError("endpoints must be finite")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    times = grid.times
    frac = (times - grid.t_start) / (grid.t_end - grid.t_start)
    steps = np.sqrt(sigma * grid.dt) * rng.standard_normal(grid.steps)
    w = np.concatenate([[0.0], np.cumsum(steps)])
    path = u + frac * (v - u) + w - frac * w[-1]
    path[0], path[-1] = u, v
    return path


def gue(n: int, rng) -> np.ndarray:
    """Hermitian matrix with diagonal variance 1 and off-diagonal real/imag variance 1/2."""
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (a + a.conj().T)


def _eig_desc(m: np.ndarray) -> np.ndarray:
    w = scipy.linalg.eigvalsh(m, overwrite_a=True, check_finite=False)
    return w[::-1].copy()


def dbm_matrix(initial: DbmState, t: float, rng, sigma: float | None = None) -> DbmState:
    """Eigenvalues of diag(lambda) + Hermitian Brownian motion at time t.

    Diagonal entries have variance sigma*t, off-diagonal real and imaginary
    parts sigma*t/2 each (sigma defaults to 1/n).
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    n = initial.lam.size
    sigma = 1.0 / n if sigma is None else sigma
    if t == 0:
        return DbmState(initial.lam, initial.time)
    m = np.sqrt(sigma * t) * gue(n, rng)
    m[np.diag_indices(n)] += initial.lam
    try:
        lam = _eig_desc(m)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"eigendecomposition failed: {exc}") from exc
    return DbmState(lam, initial.time + t)


def dbm_drift(lam: np.ndarray, sigma: float | None = None) -> np.ndarray:
    n = lam.size
    sigma = 1.0 / n if sigma is None else sigma
    diff = lam[:, None] - lam[None, :]
    np.fill_diagonal(diff, np.inf)
    return sigma * np.sum(1.0 / diff, axis=1)


def dbm_euler(initial: DbmState, t: float, substeps: int, rng,
              max_violation_rate: float = 1e-3, sigma: float | None = None,
              return_stats: bool = False):
    """Euler-Maruyama for Dyson Brownian motion with re-sorting on crossings.

    Coincident starting entries are first separated by an exact matrix step
    of length t/substeps, after which substeps-1 Euler steps follow.
    """
    if t <= 0 or substeps < 1:
        raise ValueError("need t > 0 and substeps >= 1")
    n = initial.lam.size
    sigma = 1.0 / n if sigma is None else sigma
    dt = t / substeps
    lam = np.array(initial.lam, dtype=float)
    start = 0
    if n > 1 and np.any(np.diff(lam) == 0):
        lam = np.array(dbm_matrix(DbmState(lam), dt, rng, sigma).lam)
        start = 1
    violations = 0
    noise = np.sqrt(sigma * dt)
    for _ in range(start, substeps):
        lam = lam + dbm_drift(lam, sigma) * dt + noise * rng.standard_normal(n)
        if n > 1 and np.any(np.diff(lam) >= 0):
            violations += 1
            lam = np.sort(lam)[::-1].copy()
            if np.any(np.diff(lam) == 0):
                raise StepSizeError("step size too coarse: exact collision")
    rate = violations / substeps
    if rate > max_violation_rate:
        raise StepSizeError(
            f"step size too coarse: ordering repaired in {violations} of {substeps} steps")
    state = DbmState(lam, initial.time + t)
    if return_stats:
        return state, {"violations": violations, "rate": rate}
    return state


# ---------------------------------------------------------------- watermelon

def _interp(grid: TimeGrid, u: float, v: float) -> np.ndarray:
    frac = (grid.times - grid.t_start) / (grid.t_end - grid.t_start)
    return u + frac * (v - u)


def sample_watermelon_gue(n: int, grid: TimeGrid, u: float, v: float, rng,
                          sigma: float | None = None) -> PathEnsemble:
    """Exact watermelon ensemble (all paths from u at t_start to v at t_end).

    Trajectories come from a Hermitian matrix Brownian bridge built by
    recursive midpoint refinement; its eigenvalue process is the ensemble.
    """
    if n < 1:
        raise ValueError("n must be positive")
    sigma = 1.0 / n if sigma is None else sigma
    times = grid.times
    pos = np.empty((n, grid.steps + 1))
    base = _interp(grid, u, v)
    pos[:, 0] = u
    pos[:, -1] = v
    zero = np.zeros((n, n), dtype=complex)

    def fill(lo, hi, m_lo, m_hi):
        if hi - lo <= 1:
            return
        mid = (lo + hi) // 2
        tl, tm, th = times[lo], times[mid], times[hi]
        w = (th - tm) / (th - tl)
        var = sigma * (tm - tl) * (th - tm) / (th - tl)
        m_mid = w * m_lo + (1.0 - w) * m_hi + np.sqrt(var) * gue(n, rng)
        pos[:, mid] = _eig_desc(m_mid.copy()) + base[mid]
        fill(lo, mid, m_lo, m_mid)
        fill(mid, hi, m_mid, m_hi)

    fill(0, grid.steps, zero, zero)
    bd = BoundaryData(np.full(n, float(u)), np.full(n, float(v)), sigma=sigma)
    return PathEnsemble(bd, grid, pos)


def sample_watermelon_marginal(n: int, t: float, rng, a: float = 0.0, b: float = 1.0,
                               u: float = 0.0, v: float = 0.0,
                               sigma: float | None = None) -> np.ndarray:
    """Single-time marginal of the watermelon: scaled GUE eigenvalues plus the interpolant."""
    if not a < t < b:
        shift = u if t <= a else v
        return np.full(n, float(shift))
    sigma = 1.0 / n if sigma is None else sigma
    var = sigma * (b - t) * (t - a) / (b - a)
    lin = u + (t - a) / (b - a) * (v - u)
    return _eig_desc(np.sqrt(var) * gue(n, rng)) + lin


# ---------------------------------------------------------------- Glauber

def initial_configuration(boundary: BoundaryData, grid: TimeGrid) -> np.ndarray:
    """Feasible deterministic start: linear interpolation squeezed inside (f, g)."""
    boundary.validate(grid)
    n = boundary.n
    times = grid.times
    a, b = grid.t_start, grid.t_end
    frac = (times - a) / (b - a)
    x = boundary.u[:, None] + frac[None, :] * (boundary.v - boundary.u)[:, None]
    f, g = boundary.lower(grid), boundary.upper(grid)
    ladder = (n + 1 - 2 * np.arange(1, n + 1)) / max(n, 1)
    for s in range(1, grid.steps):
        col = x[:, s].copy()
        lo, hi = f[s], g[s]
        if n > 1 and np.any(np.diff(col) >= 0):
            # break ties with a spread of one bridge standard deviation
            spread = np.sqrt(boundary.sigma * (times[s] - a) * (b - times[s]) / (b - a))
            col = col + spread * ladder
            if np.any(np.diff(col) >= 0):
                col = np.sort(col)[::-1] + 1e-9 * ladder
        inside = col[-1] > lo and col[0] < hi
        if not inside:
            if np.isfinite(lo) and np.isfinite(hi):
                width = hi - lo
                lo_t, hi_t = lo + width / (n + 1), hi - width / (n + 1)
                if n == 1:
                    col = np.array([0.5 * (lo + hi)])
                else:
                    span = col[0] - col[-1]
                    rel = (col - col[-1]) / span
                    col = lo_t + rel * (hi_t - lo_t)
            elif np.isfinite(lo):
                col = col + (lo - col[-1]) + 1.0 / n
            else:
                col = col - (col[0] - hi) - 1.0 / n
        x[:, s] = col
    if not (np.all(x[:, 1:-1][-1] > f[1:-1]) and np.all(x[:, 1:-1][0] < g[1:-1])):
        raise InfeasibleBoundary("could not construct a feasible starting configuration")
    return x


def heat_bath_update(x: np.ndarray, s: int, j: int, f: np.ndarray, g: np.ndarray,
                     sd: float, unif: np.ndarray) -> None:
    """In-place heat-bath update of site (time s, path j) for a batch of chains.

    ``x`` has shape (R, n, steps+1); ``unif`` has shape (R,).
    """
    n = x.shape[1]
    mean = 0.5 * (x[:, j, s - 1] + x[:, j, s + 1])
    hi = x[:, j - 1, s] if j > 0 else np.full(x.shape[0], g[s])
    lo = x[:, j + 1, s] if j < n - 1 else np.full(x.shape[0], f[s])
    if j > 0:
        hi = np.minimum(hi, g[s])
    if j < n - 1:
        lo = np.maximum(lo, f[s])
    if np.any(lo > hi):
        raise InvariantViolation("empty feasible interval at a Glauber site")
    x[:, j, s] = truncnorm_ppf(unif, mean, sd, lo, hi)


def sweep_sites(n: int, steps: int, order: str = "deterministic", rng=None):
    """Sites (time index, path index) in the order of one sweep.

    The deterministic order visits time a+1 for a = 0..steps-2 and, within a
    time, paths top to bottom.
    """
    sites = [(a + 1, b) for a in range(steps - 1) for b in range(n)]
    if order == "deterministic":
        return sites
    if order == "random":
        perm = rng.permutation(len(sites))
        return [sites[k] for k in perm]
    raise ValueError(f"unknown sweep order {order!r}")


class GlauberChain:
    """Batch of R independent heat-bath chains sharing boundary data."""

    def __init__(self, boundary: BoundaryData, grid: TimeGrid, replicas: int = 1,
                 start: np.ndarray | None = None):
        if grid.steps < 2:
            raise ValueError("need at least one interior time")
        self.boundary = boundary
        self.grid = grid
        self.f = boundary.lower(grid)
        self.g = boundary.upper(grid)
        self.sd = np.sqrt(boundary.sigma * grid.dt / 2.0)
        x0 = initial_configuration(boundary, grid) if start is None else np.asarray(start, float)
        if x0.ndim == 2:
            x0 = np.broadcast_to(x0, (replicas,) + x0.shape)
        self.x = np.array(x0, dtype=float)
        self.updates = 0

    @property
    def replicas(self) -> int:
        return self.x.shape[0]

    def step(self, site, rng) -> None:
        s, j = site
        heat_bath_update(self.x, s, j, self.f, self.g, self.sd, rng.random(self.replicas))
        self.updates += 1

    def sweep(self, rng, order: str = "deterministic") -> None:
        for site in sweep_sites(self.boundary.n, self.grid.steps, order, rng):
            self.step(site, rng)

    def run(self, sweeps: int, rng, order: str = "deterministic") -> None:
        for _ in range(sweeps):
            self.sweep(rng, order)

    def ensemble(self, r: int = 0) -> PathEnsemble:
        return PathEnsemble(self.boundary, self.grid, self.x[r])


def default_burn_in(n: int, steps: int) -> int:
    return 50 * n * (steps - 1)


def glauber_step(ensemble: PathEnsemble, site, rng) -> PathEnsemble:
    """One heat-bath update at site = (time index, path index); returns a new ensemble."""
    s, j = site
    if not 1 <= s <= ensemble.grid.steps - 1 or not 0 <= j < ensemble.n:
        raise ValueError("site must be an interior grid point")
    x = np.array(ensemble.positions)[None]
    bd = ensemble.boundary
    sd = np.sqrt(bd.sigma * ensemble.grid.dt / 2.0)
    heat_bath_update(x, s, j, bd.lower(ensemble.grid), bd.upper(ensemble.grid), sd,
                     rng.random(1))
    return PathEnsemble(bd, ensemble.grid, x[0])


def sample_constrained_ensemble(boundary: BoundaryData, grid: TimeGrid, sweeps: int | None,
                                rng, order: str = "deterministic",
                                replicas: int | None = None):
    """Run heat-bath sweeps from the deterministic start.

    Returns a PathEnsemble, or an (R, n, steps+1) array when ``replicas`` is given.
    """
    sweeps = default_burn_in(boundary.n, grid.steps) if sweeps is None else sweeps
    chain = GlauberChain(boundary, grid, replicas or 1)
    chain.run(sweeps, rng, order)
    if replicas is None:
        return chain.ensemble(0)
    return chain.x


class CoupledGlauber:
    """Two chains driven by shared uniforms, for monotone couplings."""

    def __init__(self, lower: GlauberChain, upper: GlauberChain):
        if lower.x.shape != upper.x.shape:
            raise ValueError("chains must have equal shapes")
        if lower.grid != upper.grid or lower.sd != upper.sd:
            raise ValueError("chains must share the grid and variance")
        self.lower, self.upper = lower, upper

    def step(self, site, rng) -> None:
        s, j = site
        unif = rng.random(self.lower.replicas)
        heat_bath_update(self.lower.x, s, j, self.lower.f, self.lower.g, self.lower.sd, unif)
        heat_bath_update(self.upper.x, s, j, self.upper.f, self.upper.g, self.upper.sd, unif)
        if np.any(self.upper.x[:, j, s] < self.lower.x[:, j, s] - COUPLING_TOL):
            raise InvariantViolation("monotone coupling broken")

    def sweep(self, rng, order: str = "deterministic") -> None:
        for site in sweep_sites(self.lower.boundary.n, self.lower.grid.steps, order, rng):
            self.step(site, rng)


def coupled_glauber_step(x: PathEnsemble, x_tilde: PathEnsemble, site, rng):
    """Shared-uniform heat-bath update of (x, x_tilde); requires x <= x_tilde."""
    if np.any(x.positions > x_tilde.positions + COUPLING_TOL):
        raise InvariantViolation("coupled pair must satisfy x <= x_tilde")
    s, j = site
    unif = rng.random(1)
    out = []
    for e in (x, x_tilde):
        arr = np.array(e.positions)[None]
        sd = np.sqrt(e.boundary.sigma * e.grid.dt / 2.0)
        heat_bath_update(arr, s, j, e.boundary.lower(e.grid), e.boundary.upper(e.grid), sd, unif)
        out.append(PathEnsemble(e.boundary, e.grid, arr[0]))
    if out[1].positions[j, s] < out[0].positions[j, s] - COUPLING_TOL:
        raise InvariantViolation("monotone coupling broken")
    return out[0], out[1]


# ---------------------------------------------------------------- observables and maps

def height_function(ensemble: PathEnsemble, t: float, x) -> np.ndarray | int:
    """Number of paths strictly above x at grid time t."""
    s = ensemble.grid.index(t)
    col = ensemble.positions[:, s]
    xs = np.asarray(x, dtype=float)
    counts = np.sum(col[:, None] > xs.reshape(-1)[None, :], axis=0)
    return int(counts[0]) if xs.ndim == 0 else counts.reshape(xs.shape)


def height_counts(positions: np.ndarray, x) -> np.ndarray:
    """Height function of a single-time configuration at the levels x."""
    pos = np.sort(np.asarray(positions, float))
    return pos.size - np.searchsorted(pos, np.asarray(x, float), side="right")


def affine_map(ensemble: PathEnsemble, alpha: float, beta: float) -> PathEnsemble:
    """x_j(t) -> x_j(t) + (t - t_start) beta + alpha, with boundary data moved alike."""
    grid, bd = ensemble.grid, ensemble.boundary
    shift = (grid.times - grid.t_start) * beta + alpha
    def move(b):
        return b if isinstance(b, _Unbounded) else np.asarray(b) + shift
    new_bd = BoundaryData(bd.u + alpha, bd.v + (grid.t_end - grid.t_start) * beta + alpha,
                          move(bd.f), move(bd.g), bd.sigma)
    return PathEnsemble(new_bd, grid, ensemble.positions + shift[None, :])


def diffusive_rescale(ensemble: PathEnsemble, sigma: float) -> PathEnsemble:
    """x_j(t) -> sigma^{1/2} x_j(t / sigma) on the sigma-dilated time grid."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    grid, bd = ensemble.grid, ensemble.boundary
    c = np.sqrt(sigma)
    new_grid = TimeGrid(sigma * grid.t_start, sigma * grid.t_end, grid.steps)
    def scale(b):
        return b if isinstance(b, _Unbounded) else c * np.asarray(b)
    new_bd = BoundaryData(c * bd.u, c * bd.v, scale(bd.f), scale(bd.g), bd.sigma)
    return PathEnsemble(new_bd, new_grid, c * ensemble.positions)
