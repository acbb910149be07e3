"""Sine-kernel reference statistics and empirical correlation estimates."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from .sampling import PathEnsemble

# ---------------------------------------------------------------- sine process


def sine_kernel(x, y):
    """sin(pi (x - y)) / (pi (x - y)), equal to 1 on the diagonal."""
    return np.sinc(np.asarray(x, float) - np.asarray(y, float))


def sine_correlation(points) -> np.ndarray | float:
    """det[K_sin(x_i, x_j)]; points has shape (..., k)."""
    pts = np.asarray(points, float)
    if pts.ndim == 0:
        pts = pts[None]
    K = sine_kernel(pts[..., :, None], pts[..., None, :])
    out = np.linalg.det(K)
    return float(out) if np.ndim(out) == 0 else out


def sine_window_kernel(length: float = 8.0, nodes: int = 512):
    """Eigenpairs of the sine kernel restricted to [-length/2, length/2], midpoint rule.

    Returns (cell centres, cell width, eigenvalues, eigenvectors in l2).
    """
    h = length / nodes
    x = -length / 2 + h * (np.arange(nodes) + 0.5)
    lam, vec = np.linalg.eigh(sine_kernel(x[:, None], x[None, :]) * h)
    return x, h, np.clip(lam, 0.0, 1.0), vec


def sample_sine_process(rng: np.random.Generator, length: float = 8.0, nodes: int = 512,
                        _cache: dict = {}) -> np.ndarray:
    """Points of the sine process on a window, decreasing order.

    Eigenvectors of the restricted kernel are kept independently with
    probability equal to their eigenvalue; the resulting projection process is
    sampled exactly on the grid cells, then each point is placed uniformly in
    its cell.
    """
    key = (length, nodes)
    if key not in _cache:
        _cache[key] = sine_window_kernel(length, nodes)
    x, h, lam, vec = _cache[key]
    V = vec[:, rng.random(lam.size) < lam]
    picked = []
    while V.shape[1] > 0:
        prob = np.sum(V * V, axis=1)
        prob /= prob.sum()
        i = int(rng.choice(prob.size, p=prob))
        picked.append(i)
        # eliminate direction with nonzero entry at i, then re-orthonormalize
        col = int(np.argmax(np.abs(V[i])))
        v = V[:, col]
        V = np.delete(V, col, axis=1)
        if V.shape[1] == 0:
            break
        V = V - np.outer(v, V[i] / v[i])
        V, _ = np.linalg.qr(V)
    pts = x[picked] + h * (rng.random(len(picked)) - 0.5)
    return np.sort(pts)[::-1]


def sample_poisson_process(rng: np.random.Generator, length: float = 8.0, intensity: float = 1.0) -> np.ndarray:
    count = rng.poisson(intensity * length)
    return np.sort(rng.uniform(-length / 2, length / 2, count))[::-1]


# ---------------------------------------------------------------- test functions

@dataclass(frozen=True)
class TestFunction:
    """Product test function F(a) = prod_i phi(a_i - centre_i)."""

    name: str
    profile: object = field(repr=False)
    radius: float = 1.0
    centres: tuple = (0.0,)

    @property
    def k(self) -> int:
        return len(self.centres)

    def __call__(self, a) -> np.ndarray:
        a = np.asarray(a, float)
        out = np.ones(a.shape[:-1])
        for i, c in enumerate(self.centres):
            out = out * self.profile(a[..., i] - c)
        return out

    def with_order(self, k: int, spacing: float = 0.0) -> "TestFunction":
        centres = tuple(spacing * (i - (k - 1) / 2) for i in range(k))
        return TestFunction(self.name, self.profile, self.radius, centres)

    __test__ = False  # not a pytest class


def gaussian_bump(scale: float = 1.0) -> TestFunction:
    """Gaussian profile truncated at 8 standard deviations."""
    r = 8.0 * scale

    def phi(x):
        x = np.asarray(x, float)
        return np.where(np.abs(x) < r, np.exp(-0.5 * (x / scale) ** 2), 0.0)
    return TestFunction("gaussian", phi, r)


def cosine_bump(radius: float = 1.5) -> TestFunction:
    def phi(x):
        x = np.asarray(x, float)
        return np.where(np.abs(x) < radius, 0.25 * (1 + np.cos(np.pi * x / radius)) ** 2, 0.0)
    return TestFunction("cosine", phi, radius)


def compact_bump(radius: float = 1.5) -> TestFunction:
    def phi(x):
        x = np.asarray(x, float) / radius
        inside = np.abs(x) < 1
        with np.errstate(divide="ignore", over="ignore"):
            val = np.exp(1.0 - 1.0 / np.where(inside, 1.0 - x * x, 1.0))
        return np.where(inside, val, 0.0)
    return TestFunction("compact", phi, radius)


DEFAULT_TEST_FUNCTIONS = {"gaussian": gaussian_bump, "cosine": cosine_bump, "compact": compact_bump}


def sine_integral(F: TestFunction, nodes: int = 801) -> float:
    """int F(a) det K_sin(a) da by tensor trapezoid quadrature (k <= 3)."""
    k = F.k
    if k > 3:
        raise ValueError("quadrature oracle supports k <= 3")
    axes = [np.linspace(c - F.radius, c + F.radius, nodes if k < 3 else 121) for c in F.centres]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack(mesh, axis=-1)
    vals = F(pts)
    if k > 1:
        vals = vals * sine_correlation(pts)
    for ax in reversed(axes):
        vals = np.trapezoid(vals, ax, axis=-1)
    return float(vals)


def poisson_integral(F: TestFunction, intensity: float = 1.0, nodes: int = 801) -> float:
    """int F(a) da times intensity^k: correlation functions of a Poisson process."""
    total = 1.0
    for c in F.centres:
        ax = np.linspace(c - F.radius, c + F.radius, nodes)
        total *= np.trapezoid(F.profile(ax - c), ax)
    return float(total * intensity ** F.k)


# ---------------------------------------------------------------- rescaling

@dataclass(frozen=True)
class RescaledSample:
    z: np.ndarray
    theta: float
    t0: float
    y0: float


def rescale_points(x, centre: float, theta: float, n: int, t0: float = 0.0, y0: float = 0.0) -> RescaledSample:
    z = theta * n * (np.asarray(x, float) - centre)
    return RescaledSample(z, float(theta), t0, y0)


def rescale_bulk(ensemble: PathEnsemble, t0: float, y0: float, shape, margin: float = 0.05,
                 theta_min: float = 1e-3, window: float = 0.5) -> RescaledSample:
    """z_j = theta n (x_j(t0) - G(t0, y0)) with theta the local density -1/G_y(t0, y0).

    ``shape`` is a ShapeGrid or a callable G(t, y).  Only the central ``window``
    fraction of indices around y0 n is kept.
    """
    n = ensemble.boundary.n
    if callable(shape):
        G = shape
        h = 1e-4
    else:
        tr, yr = shape.t_range, shape.y_range
        if not (tr[0] + margin <= t0 <= tr[1] - margin and yr[0] + margin <= y0 <= yr[1] - margin):
            raise ValueError("(t0, y0) is too close to the edge of the shape rectangle")
        G = shape.interpolate
        h = shape.hy
    gy = (G(t0, y0 + h) - G(t0, y0 - h)) / (2 * h)
    theta = -1.0 / float(gy) if gy < 0 else 0.0
    if not theta >= theta_min or not np.isfinite(theta):
        raise ValueError("density vanishes at (t0, y0): frozen region")
    x = ensemble.positions[:, ensemble.grid.index(t0)]
    centre = float(G(t0, y0))
    j0 = y0 * n
    j = np.arange(1, n + 1)
    keep = np.abs(j - j0) <= 0.5 * window * n
    return rescale_points(x[keep], centre, theta, n, t0, y0)


# ---------------------------------------------------------------- estimators

@dataclass(frozen=True)
class CorrelationEstimate:
    k: int
    function: str
    value: float
    stderr: float
    replicas: int
    per_replica: np.ndarray = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {"k": self.k, "F_id": self.function, "value": self.value,
                "stderr": self.stderr, "replicas": self.replicas}


def _u_statistic(z: np.ndarray, k: int, F: TestFunction) -> float:
    """sum over ordered k-tuples of distinct points of F."""
    reach = F.radius + max(abs(c) for c in F.centres)
    pts = z[np.abs(z) <= reach]
    if pts.size < k:
        return 0.0
    if k == 1:
        return float(np.sum(F(pts[:, None])))
    if k == 2:
        a, b = np.meshgrid(pts, pts, indexing="ij")
        vals = F(np.stack([a, b], axis=-1))
        return float(np.sum(vals) - np.trace(vals))
    tuples = np.array(list(permutations(pts, k)))
    return float(np.sum(F(tuples)))


def empirical_correlation(samples, k: int, F: TestFunction, bootstrap: int = 400,
                          rng: np.random.Generator | None = None) -> CorrelationEstimate:
    """Average over replicas of sum_{distinct i_1..i_k} F(z_{i_1}, ..., z_{i_k}).

    Its expectation is int F p^(k) with p^(k) the k-point correlation function.
    The standard error is a bootstrap over replicas.
    """
    if F.k != k:
        F = F.with_order(k)
    zs = [s.z if isinstance(s, RescaledSample) else np.asarray(s, float) for s in samples]
    if not zs:
        raise ValueError("no samples")
    # samples with fewer than k points contribute 0; dropping them would bias the mean
    if max(z.size for z in zs) < k:
        raise ValueError(f"k = {k} exceeds the number of points in every sample")
    vals = np.array([_u_statistic(z, k, F) for z in zs])
    if vals.size < 2:
        stderr = float("nan")
    else:
        rng = rng or np.random.default_rng(0)
        idx = rng.integers(0, vals.size, size=(bootstrap, vals.size))
        stderr = float(np.std(vals[idx].mean(axis=1), ddof=1))
    return CorrelationEstimate(k, F.name, float(vals.mean()), stderr, vals.size, vals)


# ---------------------------------------------------------------- gaps

@dataclass(frozen=True)
class GapHistogram:
    edges: np.ndarray
    mass: np.ndarray
    gaps: np.ndarray = field(repr=False)


def gap_histogram(samples, bins=None, window: float | None = None) -> GapHistogram:
    """Normalized histogram of consecutive gaps of each sample inside |z| <= window."""
    gaps = []
    for s in samples:
        z = np.sort(s.z if isinstance(s, RescaledSample) else np.asarray(s, float))
        if z.size < 2:
            raise ValueError("each sample needs at least two points")
        if window is not None:
            z = z[np.abs(z) <= window]
        gaps.append(np.diff(z))
    g = np.concatenate(gaps) if gaps else np.empty(0)
    if bins is None:
        bins = np.linspace(0.0, 4.0, 41)
    counts, edges = np.histogram(g, bins=bins)
    total = max(g.size, 1)
    return GapHistogram(edges, counts / total, g)
