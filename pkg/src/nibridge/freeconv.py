"""Stieltjes transforms, free convolution with the semicircle law, Hilbert
transforms and classical locations.

Densities are piecewise linear between uniform nodes; all transforms of such
densities are evaluated by exact product integration, so the only
discretization error is the piecewise-linear interpolation of the density.
Atoms are kept as atoms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CHUNK = 256


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------- semicircle closed forms

def rho_sc(x, t: float = 1.0):
    """Semicircle density of variance t: sqrt(4t - x^2) / (2 pi t)."""
    x = np.asarray(x, float)
    return np.sqrt(np.clip(4.0 * t - x * x, 0.0, None)) / (2.0 * np.pi * t)


def semicircle_tail(xi):
    """Mass of the unit semicircle law on [xi, 2]."""
    xi = np.clip(np.asarray(xi, float), -2.0, 2.0)
    return (np.pi - 0.5 * xi * np.sqrt(4.0 - xi * xi) - 2.0 * np.arcsin(0.5 * xi)) / (2.0 * np.pi)


def semicircle_classical_location(y):
    """gamma_sc(y): the point with semicircle mass y to its right (0 < y < 1)."""
    y = np.asarray(y, float)
    if np.any((y <= 0) | (y >= 1)):
        raise ValueError("y must lie in (0, 1)")
    lo = np.full(y.shape, -2.0)
    hi = np.full(y.shape, 2.0)
    for _ in range(70):
        mid = 0.5 * (lo + hi)
        above = semicircle_tail(mid) > y
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    out = 0.5 * (lo + hi)
    return float(out) if out.ndim == 0 else out


def stieltjes_semicircle(z, t: float = 1.0):
    """Closed-form Stieltjes transform of the semicircle law of variance t."""
    z = np.asarray(z, complex)
    r = np.sqrt(z - 2.0 * np.sqrt(t)) * np.sqrt(z + 2.0 * np.sqrt(t))
    return (-z + r) / (2.0 * t)


# ---------------------------------------------------------------- measures

@dataclass(frozen=True)
class GriddedMeasure:
    """A finite measure given either by atoms or by a piecewise-linear density.

    Density form: node values ``values`` at ``x_min + k*dx``; the density is
    linear between nodes and zero outside the node range.
    """

    atoms_x: np.ndarray | None = None
    atoms_w: np.ndarray | None = None
    x_min: float = 0.0
    dx: float = 0.0
    values: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if (self.atoms_x is None) == (self.values is None):
            raise ValueError("give exactly one of atoms or density values")
        if self.atoms_x is not None:
            ax, aw = _frozen(np.atleast_1d(self.atoms_x)), _frozen(np.atleast_1d(self.atoms_w))
            if ax.shape != aw.shape or ax.size == 0:
                raise ValueError("atom locations and weights must match")
            if np.any(aw < 0) or not np.all(np.isfinite(ax)):
                raise ValueError("atom weights must be nonnegative and locations finite")
            object.__setattr__(self, "atoms_x", ax)
            object.__setattr__(self, "atoms_w", aw)
        else:
            vals = _frozen(self.values)
            if vals.ndim != 1 or vals.size < 2:
                raise ValueError("density needs at least two nodes")
            if np.any(vals < 0) or not np.all(np.isfinite(vals)):
                raise ValueError("density values must be finite and nonnegative")
            if not self.dx > 0:
                raise ValueError("dx must be positive")
            object.__setattr__(self, "values", vals)
        if not self.mass > 0:
            raise ValueError("measure must have positive mass")

    # constructors
    @classmethod
    def from_atoms(cls, locations, weights=None) -> "GriddedMeasure":
        locations = np.atleast_1d(np.asarray(locations, float))
        if weights is None:
            weights = np.full(locations.size, 1.0 / locations.size)
        return cls(atoms_x=locations, atoms_w=weights)

    @classmethod
    def from_density(cls, x_min: float, dx: float, values) -> "GriddedMeasure":
        return cls(x_min=float(x_min), dx=float(dx), values=values)

    @classmethod
    def from_function(cls, func, lo: float, hi: float, nodes: int) -> "GriddedMeasure":
        x = np.linspace(lo, hi, nodes)
        return cls(x_min=lo, dx=(hi - lo) / (nodes - 1), values=func(x))

    @classmethod
    def semicircle(cls, t: float = 1.0, nodes: int = 2049, mass: float = 1.0) -> "GriddedMeasure":
        r = 2.0 * np.sqrt(t)
        x = np.linspace(-r, r, nodes)
        return cls(x_min=-r, dx=2 * r / (nodes - 1), values=mass * rho_sc(x, t))

    # basic properties
    @property
    def is_atomic(self) -> bool:
        return self.atoms_x is not None

    @property
    def nodes(self) -> np.ndarray:
        if self.is_atomic:
            raise AttributeError("atomic measures have no nodes")
        return self.x_min + self.dx * np.arange(self.values.size)

    @property
    def mass(self) -> float:
        if self.atoms_x is not None:
            return float(np.sum(self.atoms_w))
        v = self.values
        return float(self.dx * (np.sum(v) - 0.5 * (v[0] + v[-1])))

    @property
    def support(self) -> tuple[float, float]:
        if self.is_atomic:
            keep = self.atoms_w > 0
            return float(self.atoms_x[keep].min()), float(self.atoms_x[keep].max())
        nz = np.nonzero(self.values > 0)[0]
        lo = max(nz[0] - 1, 0)
        hi = min(nz[-1] + 1, self.values.size - 1)
        return float(self.x_min + lo * self.dx), float(self.x_min + hi * self.dx)

    def scaled(self, c: float) -> "GriddedMeasure":
        """The measure multiplied by c > 0."""
        if self.is_atomic:
            return GriddedMeasure(atoms_x=self.atoms_x, atoms_w=c * self.atoms_w)
        return GriddedMeasure(x_min=self.x_min, dx=self.dx, values=c * self.values)

    def dilated(self, c: float) -> "GriddedMeasure":
        """Image under x -> c x (c > 0)."""
        if self.is_atomic:
            return GriddedMeasure(atoms_x=c * self.atoms_x, atoms_w=self.atoms_w)
        return GriddedMeasure(x_min=c * self.x_min, dx=c * self.dx, values=self.values / c)

    def density(self, x):
        if self.is_atomic:
            raise ValueError("atomic measures have no density")
        x = np.asarray(x, float)
        return np.interp(x, self.nodes, self.values, left=0.0, right=0.0)

    def _span(self):
        """Nodes and values over the smallest node range carrying the mass."""
        v = self.values
        nz = np.nonzero(v > 0)[0]
        i0, i1 = max(nz[0] - 1, 0), min(nz[-1] + 1, v.size - 1)
        return self.x_min + self.dx * np.arange(i0, i1 + 1), v[i0:i1 + 1]

    def _cells(self):
        """Nonzero cells: left node, value, slope."""
        v = self.values
        keep = (v[:-1] > 0) | (v[1:] > 0)
        idx = np.nonzero(keep)[0]
        x0 = self.x_min + self.dx * idx
        return x0, v[idx], (v[idx + 1] - v[idx]) / self.dx

    # transforms
    def stieltjes(self, z, derivative: bool = False):
        """m(z) = int mu(dx)/(x - z) (and m'(z) if requested) for Im z > 0.

        Real z are accepted only away from the support, where m is real analytic.
        """
        z = np.asarray(z, complex)
        shape = z.shape
        zf = z.reshape(-1)
        m = np.empty(zf.size, complex)
        dm = np.empty(zf.size, complex) if derivative else None
        if self.is_atomic:
            for k in range(0, zf.size, CHUNK):
                d = self.atoms_x[None, :] - zf[k:k + CHUNK, None]
                m[k:k + CHUNK] = np.sum(self.atoms_w / d, axis=1)
                if derivative:
                    dm[k:k + CHUNK] = np.sum(self.atoms_w / d ** 2, axis=1)
        else:
            xn, vn = self._span()
            sl = np.diff(vn) / self.dx
            total = np.sum(sl) * self.dx
            for k in range(0, zf.size, CHUNK):
                a = xn[None, :] - zf[k:k + CHUNK, None]
                lg = np.log(a)
                dl = np.diff(lg, axis=1)
                fz = vn[None, :-1] - sl[None, :] * a[:, :-1]
                m[k:k + CHUNK] = np.sum(fz * dl, axis=1) + total
                if derivative:
                    inv = 1.0 / a
                    dm[k:k + CHUNK] = np.sum(fz * -np.diff(inv, axis=1) + sl[None, :] * dl, axis=1)
        m = m.reshape(shape)
        if derivative:
            return m, dm.reshape(shape)
        return m

    def log_potential(self, z):
        """int log(x - z) mu(dx), principal branch, for z in the closed upper half-plane."""
        z = np.asarray(z, complex)
        shape = z.shape
        zf = z.reshape(-1)
        out = np.empty(zf.size, complex)
        if self.is_atomic:
            for k in range(0, zf.size, CHUNK):
                d = self.atoms_x[None, :] - zf[k:k + CHUNK, None]
                d = np.where(d.imag == 0, d - 0j, d)
                out[k:k + CHUNK] = np.sum(self.atoms_w * _log_lower(d), axis=1)
        else:
            x0, v0, s0 = self._cells()
            h = self.dx
            for k in range(0, zf.size, CHUNK):
                zc = zf[k:k + CHUNK, None]
                w0 = x0[None, :] - zc
                w1 = w0 + h
                l0, l1 = _log_lower(w0), _log_lower(w1)
                fz = v0[None, :] - s0[None, :] * w0
                p1 = _xlogx(w1, l1) - w1 - (_xlogx(w0, l0) - w0)
                p2 = 0.5 * (_x2logx(w1, l1) - _x2logx(w0, l0)) - 0.25 * (w1 * w1 - w0 * w0)
                out[k:k + CHUNK] = np.sum(fz * p1 + s0[None, :] * p2, axis=1)
        return out.reshape(shape)

    def tail(self, x):
        """mu([x, infinity))."""
        x = np.asarray(x, float)
        if self.is_atomic:
            return np.sum(self.atoms_w[None, :] * (self.atoms_x[None, :] >= x.reshape(-1, 1)),
                          axis=1).reshape(x.shape)
        nodes = self.nodes
        v = self.values
        cell = 0.5 * self.dx * (v[:-1] + v[1:])
        right = np.concatenate([np.cumsum(cell[::-1])[::-1], [0.0]])
        k = np.clip(np.floor((x - self.x_min) / self.dx).astype(int), 0, v.size - 2)
        s = np.clip(x - nodes[k], 0.0, self.dx)
        slope = (v[k + 1] - v[k]) / self.dx
        part = v[k] * (self.dx - s) + 0.5 * slope * (self.dx ** 2 - s ** 2)
        out = right[k + 1] + part
        out = np.where(x < self.x_min, right[0], out)
        return np.where(x > nodes[-1], 0.0, out)


def _log_lower(w):
    # principal log with the negative real axis approached from below
    w = np.asarray(w, complex)
    return np.log(np.abs(w)) + 1j * np.where((w.imag == 0) & (w.real < 0), -np.pi, np.angle(w))


def _xlogx(w, lw):
    return np.where(w == 0, 0.0, w * lw)


def _x2logx(w, lw):
    return np.where(w == 0, 0.0, w * w * lw)


def stieltjes(measure: GriddedMeasure, z):
    """Stieltjes transform; z must lie in the open upper half-plane."""
    z = np.asarray(z, complex)
    if np.any(z.imag <= 0):
        raise ValueError("z must satisfy Im z > 0")
    return measure.stieltjes(z)


def density_from_stieltjes(measure: GriddedMeasure, x, eta: float):
    """pi^{-1} Im m(x + i eta)."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    return np.imag(measure.stieltjes(np.asarray(x, float) + 1j * eta)) / np.pi


def hilbert_transform(measure: GriddedMeasure, x=None):
    """H rho(x) = pi^{-1} PV int rho(w)/(w - x) dw for a piecewise-linear density.

    Evaluated exactly cell by cell; at a node the two log singularities of the
    neighbouring cells cancel pairwise and are dropped.  Defaults to the nodes.
    """
    if measure.is_atomic:
        raise ValueError("Hilbert transform needs a density")
    nodes = measure.nodes
    v = measure.values
    xs = nodes if x is None else np.asarray(x, float)
    slope = np.diff(v) / measure.dx
    out = np.empty(xs.size)
    for k in range(0, xs.size, CHUNK):
        xc = xs.reshape(-1)[k:k + CHUNK, None]
        d = nodes[None, :] - xc
        ad = np.abs(d)
        logs = np.where(ad == 0, 0.0, np.log(np.where(ad == 0, 1.0, ad)))
        fx = v[None, :-1] + slope[None, :] * (xc - nodes[None, :-1])
        out[k:k + CHUNK] = np.sum(fx * np.diff(logs, axis=1), axis=1) + np.sum(slope) * measure.dx
    return (out / np.pi).reshape(xs.shape)


# ---------------------------------------------------------------- free convolution

class FreeConvolutionError(RuntimeError):
    pass


@dataclass(frozen=True)
class FreeConvolutionResult:
    t: float
    density: GriddedMeasure
    z: np.ndarray = field(repr=False)
    cdf: np.ndarray = field(repr=False)
    flagged: np.ndarray = field(repr=False)
    source_mass: float = 1.0

    @property
    def x(self) -> np.ndarray:
        return self.density.nodes

    @property
    def mass(self) -> float:
        """Mass carried across the output window, from the exact distribution function."""
        return float(self.cdf[-1] - self.cdf[0])

    def boundary_residual(self, source: GriddedMeasure) -> np.ndarray:
        """|t * int mu(dx)/|z - x|^2 - 1| at boundary points with Im z > 0."""
        z = self.z[self.z.imag > 0]
        im = np.imag(source.stieltjes(z))
        return np.abs(self.t * im / z.imag - 1.0)


def _im_over_y(measure, xp, y):
    m, dm = measure.stieltjes(xp + 1j * y, derivative=True)
    return m, dm


def boundary_height(measure: GriddedMeasure, xp: np.ndarray, t: float,
                    tol: float = 1e-12, max_iter: int = 100) -> np.ndarray:
    """For each real x', the y >= 0 with x' + iy on the boundary of Lambda_t.

    Solves int mu(dx)/((x - x')^2 + y^2) = 1/t for y, or returns 0 when the
    integral at y = 0 is already at most 1/t.
    """
    xp = np.asarray(xp, float)
    A = measure.mass
    ymax = np.sqrt(t * A)
    ymin = 1e-13 * ymax
    y = np.zeros(xp.shape)
    # which abscissae carry a positive boundary height
    if measure.is_atomic:
        d2 = (measure.atoms_x[None, :] - xp[:, None]) ** 2
        with np.errstate(divide="ignore"):
            i0 = np.sum(measure.atoms_w[None, :] / d2, axis=1)
    else:
        inside = measure.density(xp) > 0
        lo, hi = measure.support
        on_grid = (xp >= lo) & (xp <= hi)
        i0 = np.full(xp.shape, np.inf)
        out = ~inside
        if np.any(out):
            _, dm = measure.stieltjes(xp[out] + 1e-300j, derivative=True)
            i0[out] = np.real(dm)
            # points at nodes with zero density between positive cells are interior
            i0[out & on_grid & ~np.isfinite(i0)] = np.inf
    active = i0 > 1.0 / t
    if not np.any(active):
        return y
    xa = xp[active]
    slo = np.full(xa.shape, np.log(ymin))
    shi = np.full(xa.shape, np.log(ymax))
    s = np.log(0.5 * ymax) * np.ones(xa.shape)
    target = -np.log(t)
    done = np.zeros(xa.shape, bool)
    for _ in range(max_iter):
        idx = np.nonzero(~done)[0]
        if idx.size == 0:
            break
        yy = np.exp(s[idx])
        m, dm = measure.stieltjes(xa[idx] + 1j * yy, derivative=True)
        integ = np.imag(m) / yy
        h = np.log(integ) - target
        # d integ / dy = (Re m' y - Im m) / y^2
        dh = (np.real(dm) * yy - np.imag(m)) / (yy * integ)
        pos = h > 0
        slo[idx] = np.where(pos, s[idx], slo[idx])
        shi[idx] = np.where(pos, shi[idx], s[idx])
        with np.errstate(divide="ignore", invalid="ignore"):
            step = -h / dh
        new = s[idx] + step
        # test convergence first: a vanishing step may sit on the bracket edge
        conv = np.isfinite(new) & ((np.abs(h) < tol) | (np.abs(step) < tol))
        conv |= shi[idx] - slo[idx] < tol
        bad = ~np.isfinite(new) | (new < slo[idx]) | (new > shi[idx])
        new = np.where(bad, 0.5 * (slo[idx] + shi[idx]), new)
        s[idx] = np.where(conv & np.isfinite(s[idx] + step), s[idx] + np.where(bad, 0.0, step), new)
        done[idx[conv]] = True
    y[active] = np.exp(s)
    return y


def _newton_boundary(measure, t, x, z0, iters=60, tol=1e-13):
    z = z0.astype(complex)
    scale = max(1.0, float(np.max(np.abs(x))))
    ok = np.zeros(x.shape, bool)
    for _ in range(iters):
        idx = np.nonzero(~ok)[0]
        if idx.size == 0:
            break
        zi = z[idx]
        m, dm = measure.stieltjes(zi, derivative=True)
        res = zi - t * m - x[idx]
        der = 1.0 - t * dm
        step = res / der
        lam = np.ones(idx.size)
        for _ in range(20):
            trial = zi - lam[:, None][:, 0] * step
            trial = np.where(trial.imag < 0, trial.real + 1j * 0.5 * zi.imag, trial)
            mt = measure.stieltjes(trial)
            rt = trial - t * mt - x[idx]
            worse = ~(np.abs(rt) <= np.abs(res)) & (lam > 1e-6)
            if not np.any(worse):
                break
            lam = np.where(worse, 0.5 * lam, lam)
        z[idx] = trial
        ok[idx] = (np.abs(rt) < tol * scale) | (np.abs(trial - zi) < tol * scale)
    return z


def free_convolve_semicircle(measure: GriddedMeasure, t: float, x_min: float | None = None,
                             x_max: float | None = None, nodes: int = 2048,
                             scan: int | None = None, tol: float = 1e-10,
                             max_flag_fraction: float = 1e-3) -> FreeConvolutionResult:
    """Density of measure boxplus semicircle(variance t) on a uniform output grid.

    For each output abscissa x a point z(x) on the boundary of
    Lambda_t = {Im(z - t m0(z)) > 0} with z - t m0(z) = x is found; the
    density there is Im z / (pi t) = pi^{-1} Im m0(z).
    """
    if not t > 0:
        raise ValueError("t must be positive")
    A = measure.mass
    lo, hi = measure.support
    r = np.sqrt(t * A)
    if x_min is None:
        x_min = lo - 2.0 * r - 0.05 * (hi - lo + 4 * r)
    if x_max is None:
        x_max = hi + 2.0 * r + 0.05 * (hi - lo + 4 * r)
    x = np.linspace(x_min, x_max, nodes)

    # parametric pass over the boundary curve
    scan = scan or 512
    xp = np.linspace(lo - 1.05 * r, hi + 1.05 * r, scan)
    if measure.is_atomic:
        xp = np.unique(np.concatenate([xp, measure.atoms_x + 1e-9 * r, measure.atoms_x - 1e-9 * r]))
    yp = boundary_height(measure, xp, t)
    mp = measure.stieltjes(xp + 1j * np.maximum(yp, 0.0) + 1e-300j)
    xs = xp - t * np.real(mp)
    order = np.argsort(xs)
    xs, xp_s, yp_s = xs[order], xp[order], yp[order]

    # initial guesses: interpolate the curve, beyond it solve on the real axis
    z0 = np.interp(x, xs, xp_s) + 1j * np.interp(x, xs, yp_s)
    left, right = x < xs[0], x > xs[-1]
    if np.any(left):
        z0[left] = x[left] + (xp_s[0] - xs[0])
    if np.any(right):
        z0[right] = x[right] + (xp_s[-1] - xs[-1])
    z = _newton_boundary(measure, t, x, z0)

    flagged = _check_boundary(measure, t, x, z, tol)
    if np.any(flagged):
        z[flagged] = _bisect_boundary(measure, t, x[flagged], xp_s, xs)
        flagged = _check_boundary(measure, t, x, z, tol)
    if flagged.mean() > max_flag_fraction:
        raise FreeConvolutionError(
            f"boundary solve failed at {int(flagged.sum())} of {x.size} abscissae")

    rho = np.maximum(z.imag, 0.0) / (np.pi * t)
    m0 = measure.stieltjes(z + 1e-300j)
    psi = -measure.log_potential(z) - 0.5 * t * m0 * m0
    cdf = np.imag(psi) / np.pi
    dens = GriddedMeasure(x_min=x[0], dx=x[1] - x[0], values=rho)
    return FreeConvolutionResult(t, dens, _frozen_c(z), _frozen(cdf), flagged, A)


def _frozen_c(z):
    z = np.array(z, complex)
    z.setflags(write=False)
    return z


def _check_boundary(measure, t, x, z, tol):
    m = measure.stieltjes(z + 1e-300j)
    res = np.abs(z - t * m - x)
    scale = max(1.0, float(np.max(np.abs(x))))
    bad = ~np.isfinite(res) | (res > 1e3 * tol * scale) | (z.imag < 0)
    real = (z.imag == 0) & ~bad
    if np.any(real):
        # a real solution is admissible only where int mu/(x-x')^2 <= 1/t
        if measure.is_atomic:
            i0 = np.sum(measure.atoms_w / (measure.atoms_x[None, :] - z[real].real[:, None]) ** 2, axis=1)
        else:
            inside = measure.density(z[real].real) > 0
            _, dm = measure.stieltjes(z[real] + 1e-300j, derivative=True)
            i0 = np.where(inside, np.inf, np.real(dm))
        bad[np.nonzero(real)[0][i0 > (1 + 1e-8) / t]] = True
    return bad


def _bisect_boundary(measure, t, x, xp_s, xs, iters=80):
    # bracketed solve of x' - t Re m0(x' + i y(x')) = x along the monotone curve
    k = np.clip(np.searchsorted(xs, x), 1, xs.size - 1)
    a = xp_s[k - 1].copy()
    b = xp_s[k].copy()
    a = np.where(x < xs[0], x - 10 * abs(xs[0] - xp_s[0]) - 1, a)
    b = np.where(x > xs[-1], x + 10 * abs(xs[-1] - xp_s[-1]) + 1, b)
    for _ in range(iters):
        c = 0.5 * (a + b)
        y = boundary_height(measure, c, t)
        xc = c - t * np.real(measure.stieltjes(c + 1j * y + 1e-300j))
        below = xc < x
        a = np.where(below, c, a)
        b = np.where(below, b, c)
    c = 0.5 * (a + b)
    return c + 1j * boundary_height(measure, c, t)


def free_stieltjes(measure: GriddedMeasure, t: float, w, iters: int = 100):
    """Stieltjes transform of measure boxplus semicircle(t) at w in the upper half-plane.

    Solves z - t m0(z) = w for z in Lambda_t and returns m0(z).
    """
    w = np.asarray(w, complex)
    if np.any(w.imag <= 0):
        raise ValueError("w must satisfy Im w > 0")
    shape = w.shape
    wf = w.reshape(-1)
    # start high above the support, then continue down to the targets
    z = wf + 1j * (np.sqrt(t * measure.mass) * 2 + 1.0)
    for _ in range(iters):
        m, dm = measure.stieltjes(z, derivative=True)
        res = z - t * m - wf
        step = res / (1.0 - t * dm)
        lam = np.ones(z.size)
        for _ in range(30):
            trial = z - lam * step
            bad = trial.imag <= 0
            if np.any(bad):
                lam = np.where(bad, 0.5 * lam, lam)
                continue
            rt = trial - t * measure.stieltjes(trial) - wf
            worse = (np.abs(rt) > np.abs(res)) & (lam > 1e-8)
            if not np.any(worse):
                break
            lam = np.where(worse, 0.5 * lam, lam)
        z = trial
        if np.all(np.abs(rt) < 1e-14 * np.maximum(1.0, np.abs(wf))):
            break
    return measure.stieltjes(z).reshape(shape)


def bridge_limiting_measure(nu0: GriddedMeasure, t: float, s: float, **kwargs):
    """nu_s = nu0 boxplus semicircle(s) for s in [0, t]; s = 0 returns nu0."""
    if not 0 <= s <= t:
        raise ValueError("need 0 <= s <= t")
    if s == 0:
        return nu0
    return free_convolve_semicircle(nu0, s, **kwargs).density


# ---------------------------------------------------------------- classical locations

def classical_locations(measure, n: int) -> np.ndarray:
    """gamma_j = sup{g : mu([g, inf)) >= (2j - 1)/(2n)}, j = 1..n (decreasing).

    The measure is normalized to total mass one first.
    """
    if isinstance(measure, FreeConvolutionResult):
        measure = measure.density
    levels = (2.0 * np.arange(1, n + 1) - 1.0) / (2.0 * n)
    if measure.is_atomic:
        order = np.argsort(measure.atoms_x)[::-1]
        ax = measure.atoms_x[order]
        cum = np.cumsum(measure.atoms_w[order]) / measure.mass
        k = np.searchsorted(cum, levels - 1e-15, side="left")
        return ax[np.minimum(k, ax.size - 1)]
    v = measure.values
    h = measure.dx
    cell = 0.5 * h * (v[:-1] + v[1:])
    total = cell.sum()
    right = np.concatenate([np.cumsum(cell[::-1])[::-1], [0.0]]) / total
    vn = v / total
    out = np.empty(n)
    for i, y in enumerate(levels):
        k = int(np.nonzero(right >= y)[0][-1])
        k = min(k, v.size - 2)
        # solve vn_k (h - s) + (dv / 2h)(h^2 - s^2) = y - right[k+1] for s in [0, h]
        need = y - right[k + 1]
        a0, dv = vn[k], vn[k + 1] - vn[k]
        qa = -dv / (2 * h)
        qb = -a0
        qc = a0 * h + 0.5 * dv * h - need
        if abs(qa) < 1e-300:
            s = qc / a0 if a0 > 0 else 0.0
        else:
            disc = max(qb * qb - 4 * qa * qc, 0.0)
            r1 = (-qb - np.copysign(np.sqrt(disc), qb)) / (2 * qa)
            r2 = qc / (qa * r1) if r1 != 0 else r1
            cand = [r for r in (r1, r2) if -1e-9 * h <= r <= h * (1 + 1e-9)]
            s = max(cand) if cand else 0.0
        out[i] = measure.x_min + k * h + min(max(s, 0.0), h)
    return out
