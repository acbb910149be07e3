"""Densities with prescribed real parts of Stieltjes-transform derivatives at 0.

Starting from a piecewise-linear probability density that is linear on a
window around 0, step functions are added away from 0 so that
Re d^k/dz^k m(0) hits prescribed targets r_0..r_m while the density near 0,
its total mass and the imaginary parts of the derivatives are unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np

from .freeconv import GriddedMeasure

COND_LIMIT = 1e12


class DensityMatchError(RuntimeError):
    pass


@dataclass(frozen=True)
class PerturbedDensity:
    """A piecewise-linear base density plus constant steps on intervals."""

    base: GriddedMeasure
    steps: tuple = ()  # (lo, hi, height) triples

    @property
    def mass(self) -> float:
        return self.base.mass + sum(h * (b - a) for a, b, h in self.steps)

    def density(self, x):
        x = np.asarray(x, float)
        out = self.base.density(x)
        for a, b, h in self.steps:
            out = out + h * ((x >= a) & (x < b))
        return out

    def stieltjes(self, z):
        z = np.asarray(z, complex)
        out = self.base.stieltjes(z)
        for a, b, h in self.steps:
            out = out + h * np.log((b - z) / (a - z))
        return out

    def breakpoints(self) -> np.ndarray:
        pts = [self.base.nodes]
        for a, b, _ in self.steps:
            pts.append(np.array([a, b]))
        return np.unique(np.concatenate(pts))


def linear_window(measure: GriddedMeasure, rtol: float = 1e-12) -> tuple[float, float, float]:
    """Largest delta with the density affine on [-delta, delta]; returns (delta, alpha, beta).

    alpha + beta x is the density on the window.
    """
    x = measure.nodes
    v = measure.values
    h = measure.dx
    k = int(np.floor(-measure.x_min / h))
    if not 0 <= k < v.size - 1:
        raise ValueError("0 must lie inside the density grid")
    beta = (v[k + 1] - v[k]) / h
    alpha = v[k] - beta * x[k]
    scale = max(np.max(np.abs(v)), 1e-300)
    ok = np.abs(v - (alpha + beta * x)) <= rtol * scale
    lo, hi = k, k + 1
    while lo - 1 >= 0 and ok[lo - 1]:
        lo -= 1
    while hi + 1 < v.size and ok[hi + 1]:
        hi += 1
    delta = min(-x[lo], x[hi])
    if lo == 0 and hi == v.size - 1:
        delta = min(-x[0], x[-1])
    if delta <= 0:
        raise ValueError("density is not affine on any window around 0")
    return float(delta), float(alpha), float(beta)


def _inverse_power_integral(x0, x1, p):
    # int_{x0}^{x1} x^{-p} dx on an interval not containing 0
    if p == 1:
        return np.log(np.abs(x1) / np.abs(x0))
    return (x1 ** (1 - p) - x0 ** (1 - p)) / (1 - p)


def step_derivatives(lo: float, hi: float, height: float, m: int) -> np.ndarray:
    """Re d^k m(0), k = 0..m, of the measure height * 1[lo, hi] (0 outside [lo, hi])."""
    out = np.empty(m + 1)
    out[0] = height * np.log(abs(hi) / abs(lo))
    for k in range(1, m + 1):
        out[k] = height * factorial(k - 1) * (lo ** -k - hi ** -k)
    return out


def real_stieltjes_derivatives(density, m: int) -> np.ndarray:
    """Re d^k/dz^k m(0) for k = 0..m, in closed form.

    Accepts a GriddedMeasure affine near 0 or a PerturbedDensity whose steps
    avoid a neighbourhood of 0.  Near 0 the transform of alpha + beta x on
    [-delta, delta] is (alpha + beta z)(log((delta - z)/(delta + z)) + i pi)
    + 2 beta delta; the rest is k! int rho(x) x^{-k-1} dx cell by cell.
    """
    if isinstance(density, PerturbedDensity):
        out = real_stieltjes_derivatives(density.base, m)
        for a, b, h in density.steps:
            out = out + step_derivatives(a, b, h, m)
        return out
    delta, alpha, beta = linear_window(density)
    out = np.zeros(m + 1)
    # near part: L(z) = -2 sum_{odd j} (z/delta)^j / j
    dL = np.zeros(m + 1)
    for j in range(1, m + 1, 2):
        dL[j] = -2.0 * factorial(j - 1) / delta ** j
    for k in range(m + 1):
        out[k] = alpha * dL[k] + (k * beta * dL[k - 1] if k >= 1 else 0.0)
    out[0] += 2.0 * beta * delta
    # far part, exact on each linear piece clipped to |x| >= delta
    x = density.nodes
    v = density.values
    for i in range(v.size - 1):
        x0, x1 = x[i], x[i + 1]
        if v[i] == 0 and v[i + 1] == 0:
            continue
        s = (v[i + 1] - v[i]) / (x1 - x0)
        c0 = v[i] - s * x0  # density = c0 + s x on this cell
        for lo, hi in ((x0, min(x1, -delta)), (max(x0, delta), x1)):
            if hi <= lo:
                continue
            for k in range(m + 1):
                val = c0 * _inverse_power_integral(lo, hi, k + 1)
                if s != 0:
                    val += s * _inverse_power_integral(lo, hi, k)  if k >= 1 else s * (hi - lo)
                out[k] += factorial(k) * val
    return out


def contour_stieltjes_derivatives(density, m: int, radius: float, points: int = 128,
                                  affine=None) -> np.ndarray:
    """d^k/dz^k m(0) for k = 0..m by a Cauchy integral on |z| = radius.

    The boundary value of m from the upper half-plane continues analytically
    across the real segment where the density is affine (alpha + beta x):
    below the axis it equals m(z) + 2 pi i (alpha + beta z).  The radius must
    stay inside that segment.
    """
    base = density.base if isinstance(density, PerturbedDensity) else density
    if affine is None:
        _, alpha, beta = linear_window(base)
    else:
        alpha, beta = affine
    theta = 2.0 * np.pi * (np.arange(points) + 0.5) / points
    z = radius * np.exp(1j * theta)
    upper = z.imag > 0
    vals = np.empty(points, complex)
    vals[upper] = density.stieltjes(z[upper])
    zl = np.conj(z[~upper])
    # m(conj z) = conj m(z) for the measure itself
    vals[~upper] = np.conj(density.stieltjes(zl)) + 2j * np.pi * (alpha + beta * z[~upper])
    out = np.empty(m + 1, complex)
    for k in range(m + 1):
        out[k] = factorial(k) * np.mean(vals * np.exp(-1j * k * theta)) / radius ** k
    return out


@dataclass(frozen=True)
class DensityMatchSpec:
    base: GriddedMeasure
    r: np.ndarray
    eps: float
    B: float
    varpi: float
    a: float
    b: float
    y: float
    y_l: np.ndarray
    c: np.ndarray
    theta: float
    prestep: tuple = ()
    condition: float = 1.0
    attempts: int = 1
    density: PerturbedDensity = field(default=None, repr=False)

    @property
    def untouched_radius(self) -> float:
        """The perturbation vanishes on (-R, R) for this R."""
        edges = [abs(lo) for lo, hi, _ in self.prestep] + [abs(hi) for lo, hi, _ in self.prestep]
        edges.append(self.a * (self.y + self.y_l.min()))
        return float(min(edges))


def _prestep(theta: float, eps: float, d: float, variant: str):
    if theta == 0:
        return ()
    q = 4.0 * abs(theta) / eps
    h = eps / 4.0
    if variant == "balanced":
        root = np.sqrt(-np.expm1(-q))
        lo, hi = d * (1.0 - root), d * (1.0 + root)
        # mass neutral: equal widths; shift of Re m(0) is (eps/4) log(d^2/(lo hi)) = theta
        pos = ((lo, d, h), (d, hi, -h))
    elif variant == "literal":
        pos = ((d, d * np.exp(2.0 * q), h), (d * np.exp(-q), d, -h))
    else:
        raise ValueError(f"unknown prestep variant {variant!r}")
    if theta > 0:
        return pos
    return tuple((-b, -a, hh) for a, b, hh in pos)


def _bump_matrix(y_l, y, b, m):
    cols = y_l + y
    W = np.empty((m + 2, m + 2))
    W[0] = np.log((cols + b) / cols)
    W[1] = 1.0
    for K in range(1, m + 1):
        W[K + 1] = factorial(K - 1) * (cols ** -K - (cols + b) ** -K)
    return W


def _bumps_small(c, y_l, y, b, eps, mode):
    m = c.size - 2
    if mode == "uniform":
        return np.max(np.abs(c)) <= eps / (4.0 * m + 8.0)
    lo, hi = y_l + y, y_l + y + b
    probe = np.concatenate([lo, hi, 0.5 * (lo + hi)])
    stack = [np.sum(np.abs(c) * ((lo <= x) & (x < hi))) for x in probe]
    return max(stack) <= eps / 4.0


def construct_matching_density(rho: GriddedMeasure, r, eps: float, B: float, varpi: float,
                               rng: np.random.Generator | None = None, prestep: str = "balanced",
                               d: float | None = None, b: float = 2.5, y: float = 0.5,
                               height_cap: str = "stacked", max_attempts: int = 20) -> DensityMatchSpec:
    """Perturb rho by steps so that Re d^k m(0) = r_k for k = 0..len(r)-1.

    rho must be a probability density supported in [-varpi, varpi], with
    eps <= rho <= B there and affine near 0.  Bumps c_l 1[a(y_l + y), a(y_l + y + b)]
    solve W c = (0, 0, a (r_1 - d_1), a^2 (r_2 - d_2), ...), with a shrunk until
    the bumps are small: ``height_cap="uniform"`` asks |c_l| <= eps / (4m + 8)
    for every l, ``"stacked"`` asks that the bumps covering any point sum to at
    most eps/4 in absolute value.  Either keeps the result in [eps/2, B + eps/2].

    A nonzero offset theta = r_0 - Re m(0) is first removed by two steps of
    height -+eps/4 placed at distance about d from 0.
    """
    r = np.asarray(r, float)
    m = r.size - 1
    if m < 0:
        raise ValueError("need at least one target")
    if abs(rho.mass - 1.0) > 1e-10:
        raise ValueError("base density must have mass one")
    rng = rng or np.random.default_rng(0)
    delta, _, _ = linear_window(rho)

    base_d = real_stieltjes_derivatives(rho, m)
    theta = float(r[0] - base_d[0])
    if d is None:
        q = 4.0 * abs(theta) / eps
        if prestep == "literal":
            d = 0.9 * varpi * np.exp(-2.0 * q)
        else:
            d = 0.9 * varpi / (1.0 + np.sqrt(-np.expm1(-q)))
    steps = _prestep(theta, eps, d, prestep)
    shifted = PerturbedDensity(rho, steps)
    dvec = real_stieltjes_derivatives(shifted, m)

    p = np.zeros(m + 2)
    p[2:] = r[1:] - dvec[1:]
    y_l = np.geomspace(1.0, 8.0, m + 2)
    for attempt in range(1, max_attempts + 1):
        W = _bump_matrix(y_l, y, b, m)
        cond = np.linalg.cond(W)
        if np.isfinite(cond) and cond <= COND_LIMIT:
            break
        y_l = np.geomspace(1.0, 8.0, m + 2) * rng.uniform(0.9, 1.1, m + 2)
    else:
        raise DensityMatchError("bump system stays ill-conditioned")

    if height_cap not in ("stacked", "uniform"):
        raise ValueError(f"unknown height cap {height_cap!r}")
    a = varpi / (y_l.max() + y + b)
    c = np.zeros(m + 2)
    if np.any(p != 0):
        for _ in range(400):
            powers = np.concatenate([[a, a], a ** np.arange(1, m + 1)])
            c = np.linalg.solve(W, powers * p)
            if _bumps_small(c, y_l, y, b, eps, height_cap):
                break
            a *= 0.9
        else:
            raise DensityMatchError("could not shrink bumps below the height cap")
    bumps = tuple((a * (yl + y), a * (yl + y + b), cl) for yl, cl in zip(y_l, c) if cl != 0)
    dens = PerturbedDensity(rho, steps + bumps)
    return DensityMatchSpec(rho, r, eps, B, varpi, a, b, y, y_l, c, theta, steps,
                            float(cond), attempt, dens)


def check_bounds(match: DensityMatchSpec, samples: int = 20001) -> tuple[float, float]:
    """(min, max) of the perturbed density on [-varpi, varpi], including breakpoints."""
    dens = match.density
    x = np.linspace(-match.varpi, match.varpi, samples)
    bp = dens.breakpoints()
    bp = bp[(bp > -match.varpi) & (bp < match.varpi)]
    pts = np.concatenate([x, bp, bp - 1e-12, bp + 1e-12])
    vals = dens.density(pts)
    return float(vals.min()), float(vals.max())
