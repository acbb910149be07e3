"""Limit-shape PDEs for the height function H(t, x) and its inverse G(t, y).

    H:  (H_x)^2 H_tt - 2 H_t H_x H_tx + ((H_t)^2 + pi^2 (H_x)^4) H_xx = 0
    G:  G_tt + pi^2 (G_y)^{-4} G_yy = 0

Grids are uniform tensor grids, first axis time.  The Dirichlet solver is a
damped Newton method on the 5-point discretization of the G equation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .freeconv import rho_sc, semicircle_classical_location, semicircle_tail

log = logging.getLogger(__name__)

PI2 = np.pi ** 2


# ---------------------------------------------------------------- coefficients

@dataclass(frozen=True)
class CoefficientSet:
    b_tt: float
    b_tx: float
    b_xx: float
    d_tt: float
    d_ty: float
    d_yy: float

    def b_matrix(self) -> np.ndarray:
        return np.array([[self.b_tt, self.b_tx], [self.b_tx, self.b_xx]])

    def d_matrix(self) -> np.ndarray:
        return np.array([[self.d_tt, self.d_ty], [self.d_ty, self.d_yy]])


def coefficients(u: float, v: float) -> CoefficientSet:
    """Coefficients of both equations at the gradient slot (u, v)."""
    if v == 0:
        raise ValueError("v = 0 makes the G-equation coefficient singular")
    return CoefficientSet(v * v, -u * v, u * u + PI2 * v ** 4, 1.0, 0.0, PI2 / v ** 4)


# ---------------------------------------------------------------- grids

@dataclass(frozen=True)
class ShapeGrid:
    """Values G[i, j] = G(t_i, y_j) on a uniform grid of a rectangle."""

    t_range: tuple[float, float]
    y_range: tuple[float, float]
    values: np.ndarray = field(repr=False)
    eps: float = 0.0
    residual_norm: float = float("nan")

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or min(v.shape) < 3:
            raise ValueError("need at least a 3 x 3 grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(*self.t_range, self.values.shape[0])

    @property
    def y(self) -> np.ndarray:
        return np.linspace(*self.y_range, self.values.shape[1])

    @property
    def ht(self) -> float:
        return (self.t_range[1] - self.t_range[0]) / (self.values.shape[0] - 1)

    @property
    def hy(self) -> float:
        return (self.y_range[1] - self.y_range[0]) / (self.values.shape[1] - 1)

    def slope(self) -> np.ndarray:
        """Central-difference d/dy at interior y nodes, all t."""
        return (self.values[:, 2:] - self.values[:, :-2]) / (2 * self.hy)

    def admissible(self, eps: float | None = None) -> bool:
        eps = self.eps if eps is None else eps
        s = self.slope()[1:-1]
        return bool(np.all((s <= -eps) & (s >= -1.0 / eps)))

    def interpolate(self, t, y):
        """Bilinear interpolation."""
        from scipy.interpolate import RegularGridInterpolator
        f = RegularGridInterpolator((self.t, self.y), self.values)
        t, y = np.broadcast_arrays(np.asarray(t, float), np.asarray(y, float))
        return f(np.stack([t.ravel(), y.ravel()], axis=-1)).reshape(t.shape)


@dataclass(frozen=True)
class HeightGrid:
    """Values H[i, j] = H(t_i, x_j) on a uniform grid."""

    t_range: tuple[float, float]
    x_range: tuple[float, float]
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or min(v.shape) < 3:
            raise ValueError("need at least a 3 x 3 grid")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(*self.t_range, self.values.shape[0])

    @property
    def x(self) -> np.ndarray:
        return np.linspace(*self.x_range, self.values.shape[1])

    @property
    def ht(self) -> float:
        return (self.t_range[1] - self.t_range[0]) / (self.values.shape[0] - 1)

    @property
    def hx(self) -> float:
        return (self.x_range[1] - self.x_range[0]) / (self.values.shape[1] - 1)


@dataclass(frozen=True)
class ResidualGrid:
    """Interior residual values; flagged nodes broke admissibility."""

    values: np.ndarray
    flagged: np.ndarray

    @property
    def sup(self) -> float:
        ok = ~self.flagged
        return float(np.max(np.abs(self.values[ok]))) if np.any(ok) else float("nan")


def shape_grid_from_function(func, t_range, y_range, shape, eps: float = 0.0) -> ShapeGrid:
    t = np.linspace(*t_range, shape[0])
    y = np.linspace(*y_range, shape[1])
    return ShapeGrid(tuple(t_range), tuple(y_range), func(t[:, None], y[None, :]), eps)


def height_grid_from_function(func, t_range, x_range, shape) -> HeightGrid:
    t = np.linspace(*t_range, shape[0])
    x = np.linspace(*x_range, shape[1])
    return HeightGrid(tuple(t_range), tuple(x_range), func(t[:, None], x[None, :]))


# ---------------------------------------------------------------- residuals

def _g_residual(G, ht, hy):
    gtt = (G[2:, 1:-1] - 2 * G[1:-1, 1:-1] + G[:-2, 1:-1]) / ht ** 2
    gyy = (G[1:-1, 2:] - 2 * G[1:-1, 1:-1] + G[1:-1, :-2]) / hy ** 2
    p = (G[1:-1, 2:] - G[1:-1, :-2]) / (2 * hy)
    with np.errstate(divide="ignore", invalid="ignore"):
        return gtt + PI2 * gyy / p ** 4, p, gyy


def residual_G(grid: ShapeGrid, eps: float | None = None) -> ResidualGrid:
    """G_tt + pi^2 (G_y)^{-4} G_yy at interior nodes by central differences."""
    eps = grid.eps if eps is None else eps
    res, p, _ = _g_residual(grid.values, grid.ht, grid.hy)
    if eps > 0:
        flagged = (p > -eps) | (p < -1.0 / eps)
    else:
        flagged = p >= 0
    return ResidualGrid(res, flagged | ~np.isfinite(res))


def residual_H(grid: HeightGrid) -> ResidualGrid:
    """sum b_ij(grad H) d_i d_j H at interior nodes by central differences."""
    H, ht, hx = grid.values, grid.ht, grid.hx
    hxx = (H[1:-1, 2:] - 2 * H[1:-1, 1:-1] + H[1:-1, :-2]) / hx ** 2
    htt = (H[2:, 1:-1] - 2 * H[1:-1, 1:-1] + H[:-2, 1:-1]) / ht ** 2
    htx = (H[2:, 2:] - H[2:, :-2] - H[:-2, 2:] + H[:-2, :-2]) / (4 * ht * hx)
    u = (H[2:, 1:-1] - H[:-2, 1:-1]) / (2 * ht)
    v = (H[1:-1, 2:] - H[1:-1, :-2]) / (2 * hx)
    res = v * v * htt - 2 * u * v * htx + (u * u + PI2 * v ** 4) * hxx
    return ResidualGrid(res, v >= 0)


# ---------------------------------------------------------------- Dirichlet solver

class SolverError(RuntimeError):
    def __init__(self, message, residual=float("nan"), grid=None):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual
        self.grid = grid


class BoundaryError(ValueError):
    pass


def _edge(data, points):
    if callable(data):
        return np.asarray(data(points), float) * np.ones(points.shape)
    arr = np.asarray(data, float)
    if arr.shape != points.shape:
        raise BoundaryError(f"edge data has {arr.size} values, grid needs {points.size}")
    return arr


def transfinite(west, east, south, north) -> np.ndarray:
    """Coons patch: bilinear blend of the four edges (arrays) on [0,1]^2."""
    nt, ny = south.size, west.size
    s = np.linspace(0, 1, nt)[:, None]
    r = np.linspace(0, 1, ny)[None, :]
    G = ((1 - s) * west[None, :] + s * east[None, :]
         + (1 - r) * south[:, None] + r * north[:, None])
    G -= ((1 - s) * (1 - r) * south[0] + (1 - s) * r * north[0]
          + s * (1 - r) * south[-1] + s * r * north[-1])
    return G


def _jacobian(G, ht, hy):
    nt, ny = G.shape
    mt, my = nt - 2, ny - 2
    res, p, gyy = _g_residual(G, ht, hy)
    k = np.arange(mt * my).reshape(mt, my)
    cy = PI2 / (p ** 4 * hy ** 2)
    dp = -4.0 * PI2 * gyy / p ** 5 / (2 * hy)  # d/dG_{j+1} of pi^2 gyy p^-4 via p
    rows, cols, vals = [k.ravel()], [k.ravel()], [(-2.0 / ht ** 2 - 2 * cy).ravel()]
    # time neighbours
    rows.append(k[1:].ravel()); cols.append(k[:-1].ravel()); vals.append(np.full(k[1:].size, 1.0 / ht ** 2))
    rows.append(k[:-1].ravel()); cols.append(k[1:].ravel()); vals.append(np.full(k[1:].size, 1.0 / ht ** 2))
    # y neighbours
    up = cy + dp
    dn = cy - dp
    rows.append(k[:, :-1].ravel()); cols.append(k[:, 1:].ravel()); vals.append(up[:, :-1].ravel())
    rows.append(k[:, 1:].ravel()); cols.append(k[:, :-1].ravel()); vals.append(dn[:, 1:].ravel())
    J = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(mt * my, mt * my))
    return res, J


def _in_band(G, hy, eps):
    p = (G[:, 2:] - G[:, :-2]) / (2 * hy)
    p = p[1:-1]
    lo = 0.5 * eps if eps > 0 else 0.0
    hi = 2.0 / eps if eps > 0 else np.inf
    return bool(np.all((p <= -lo) & (p >= -hi)))


def _gauss_seidel(G, ht, hy, sweeps, omega=0.7):
    nt, ny = G.shape
    for _ in range(sweeps):
        for i in range(1, nt - 1):
            # red-black in y keeps the row update vectorized
            for parity in (1, 2):
                j = np.arange(parity, ny - 1, 2)
                p = (G[i, j + 1] - G[i, j - 1]) / (2 * hy)
                cy = PI2 / (p ** 4 * hy ** 2)
                new = ((G[i + 1, j] + G[i - 1, j]) / ht ** 2 + cy * (G[i, j + 1] + G[i, j - 1])) \
                    / (2.0 / ht ** 2 + 2 * cy)
                G[i, j] = (1 - omega) * G[i, j] + omega * new
    return G


def solve_G_dirichlet(west, east, south, north, t_range, y_range, shape, eps: float = 0.05,
                      tol: float = 1e-8, max_iters: int = 60, initial=None,
                      corner_tol: float = 1e-8) -> ShapeGrid:
    """Solve G_tt + pi^2 G_y^-4 G_yy = 0 with Dirichlet data.

    west/east give G(t_min, y) and G(t_max, y); south/north give G(t, y_min)
    and G(t, y_max).  Each is a callable or an array of grid values.
    """
    nt, ny = shape
    t = np.linspace(*t_range, nt)
    y = np.linspace(*y_range, ny)
    W, E = _edge(west, y), _edge(east, y)
    S, N = _edge(south, t), _edge(north, t)
    scale = max(1.0, np.max(np.abs(np.concatenate([W, E, S, N]))))
    corners = [(W[0], S[0]), (W[-1], N[0]), (E[0], S[-1]), (E[-1], N[-1])]
    for a, b in corners:
        if abs(a - b) > corner_tol * scale:
            raise BoundaryError(f"corner data disagree: {a} vs {b}")
    ht = (t_range[1] - t_range[0]) / (nt - 1)
    hy = (y_range[1] - y_range[0]) / (ny - 1)

    G = transfinite(W, E, S, N) if initial is None else np.array(initial, float)
    G[0], G[-1], G[:, 0], G[:, -1] = W, E, S, N
    if not _in_band(G, hy, eps):
        raise BoundaryError("initial guess leaves the admissibility band")

    res, _, _ = _g_residual(G, ht, hy)
    norm = np.max(np.abs(res))
    stalls = 0
    for it in range(max_iters):
        if norm <= tol:
            break
        res, J = _jacobian(G, ht, hy)
        try:
            step = spsolve(J.tocsc(), -res.ravel()).reshape(res.shape)
            ok = np.all(np.isfinite(step))
        except (RuntimeError, ValueError):
            ok = False
        accepted = False
        if ok:
            lam = 1.0
            for _ in range(30):
                trial = G.copy()
                trial[1:-1, 1:-1] += lam * step
                if _in_band(trial, hy, eps):
                    tres, _, _ = _g_residual(trial, ht, hy)
                    tnorm = np.max(np.abs(tres))
                    if np.isfinite(tnorm) and (tnorm < norm or np.linalg.norm(tres) < np.linalg.norm(res)):
                        accepted = True
                        break
                lam *= 0.5
        if accepted:
            G, norm = trial, tnorm
            stalls = 0
        else:
            stalls += 1
            log.debug("newton step rejected at iteration %d; Gauss-Seidel fallback", it)
            G = _gauss_seidel(G, ht, hy, 20)
            res, _, _ = _g_residual(G, ht, hy)
            norm = np.max(np.abs(res))
            if stalls > 5:
                break
    if not norm <= tol:
        raise SolverError("Dirichlet solve did not converge", norm,
                          ShapeGrid(tuple(t_range), tuple(y_range), G, eps, norm))
    return ShapeGrid(tuple(t_range), tuple(y_range), G, eps, float(norm))


# ---------------------------------------------------------------- shape <-> height

def height_from_shape(grid: ShapeGrid, nx: int | None = None, x_range=None) -> HeightGrid:
    """H(t, x) = sup{y : G(t, y) >= x}, clamped to the y-range of the grid."""
    G = grid.values
    if np.any(np.diff(G, axis=1) > 0):
        raise ValueError("shape grid must be decreasing in y")
    nx = nx or G.shape[1]
    if x_range is None:
        x_range = (float(G.min()), float(G.max()))
    x = np.linspace(*x_range, nx)
    y = grid.y
    H = np.empty((G.shape[0], nx))
    for i in range(G.shape[0]):
        # G[i] is decreasing; interpolate y as a function of x on the reversed arrays
        H[i] = np.interp(x, G[i, ::-1], y[::-1], left=y[-1], right=y[0])
    return HeightGrid(grid.t_range, tuple(x_range), H)


def shape_from_height(grid: HeightGrid, eps: float = 0.0, ny: int | None = None,
                      y_range=None) -> ShapeGrid:
    """G(t, y) = sup{x : H(t, x) >= y}."""
    H = grid.values
    if np.any(np.diff(H, axis=1) > 1e-12 * max(1.0, np.abs(H).max())):
        raise ValueError("height grid must be weakly decreasing in x")
    ny = ny or H.shape[1]
    if y_range is None:
        y_range = (float(np.max(H[:, -1])), float(np.min(H[:, 0])))
    y = np.linspace(*y_range, ny)
    x = grid.x
    G = np.empty((H.shape[0], ny))
    for i in range(H.shape[0]):
        row = H[i]
        last = np.searchsorted(-row, -y, side="right") - 1
        last = np.clip(last, 0, row.size - 1)
        nxt = np.minimum(last + 1, row.size - 1)
        drop = row[last] - row[nxt]
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(drop > 0, (row[last] - y) / drop, 0.0)
        G[i] = x[last] + np.clip(frac, 0.0, 1.0) * grid.hx
    return ShapeGrid(grid.t_range, tuple(y_range), G, eps)


# ---------------------------------------------------------------- complex slope

@dataclass(frozen=True)
class ComplexSlopeGrid:
    t: np.ndarray
    x: np.ndarray
    f: np.ndarray = field(repr=False)
    mask: np.ndarray = field(repr=False)


def complex_slope(height: HeightGrid, threshold: float | None = None) -> ComplexSlopeGrid:
    """f = u + i pi rho with rho = -H_x and u = H_t / rho on interior nodes."""
    H = height.values
    rho = -(H[1:-1, 2:] - H[1:-1, :-2]) / (2 * height.hx)
    ht_ = (H[2:, 1:-1] - H[:-2, 1:-1]) / (2 * height.ht)
    if threshold is None:
        mass = float(H.max() - H.min())
        threshold = 1e-3 * mass / (height.x_range[1] - height.x_range[0])
    mask = rho > threshold
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(mask, ht_ / rho, 0.0)
    f = np.where(mask, u + 1j * np.pi * rho, 0.0)
    if not np.any(mask):
        raise ValueError("no liquid nodes above the density threshold")
    return ComplexSlopeGrid(height.t[1:-1], height.x[1:-1], f, mask)


def burgers_residual(slope: ComplexSlopeGrid) -> ResidualGrid:
    """f_t + f f_x by central differences where the whole stencil is liquid."""
    f, m = slope.f, slope.mask
    ht = slope.t[1] - slope.t[0]
    hx = slope.x[1] - slope.x[0]
    ft = (f[2:, 1:-1] - f[:-2, 1:-1]) / (2 * ht)
    fx = (f[1:-1, 2:] - f[1:-1, :-2]) / (2 * hx)
    res = ft + f[1:-1, 1:-1] * fx
    ok = m[1:-1, 1:-1] & m[2:, 1:-1] & m[:-2, 1:-1] & m[1:-1, 2:] & m[1:-1, :-2]
    return ResidualGrid(np.abs(res), ~ok)


# ---------------------------------------------------------------- comparison

@dataclass(frozen=True)
class MaximumPrincipleReport:
    boundary_sup: float
    interior_sup: float
    boundary_dominated: bool
    interior_violations: int
    bound_holds: bool


def maximum_principle_check(F1: ShapeGrid, F2: ShapeGrid, tol: float = 1e-8) -> MaximumPrincipleReport:
    if F1.values.shape != F2.values.shape or F1.t_range != F2.t_range or F1.y_range != F2.y_range:
        raise ValueError("grids must share a rectangle and resolution")
    d = F2.values - F1.values
    edge = np.concatenate([d[0], d[-1], d[:, 0], d[:, -1]])
    inner = d[1:-1, 1:-1]
    bsup = float(np.max(np.abs(edge)))
    isup = float(np.max(np.abs(inner)))
    dominated = bool(np.all(edge >= -tol))
    violations = int(np.sum(inner < -tol)) if dominated else 0
    return MaximumPrincipleReport(bsup, isup, dominated, violations, isup <= bsup + tol)


# ---------------------------------------------------------------- closed forms

def _bridge_variance(t, a, b, A):
    return A * (b - t) * (t - a) / (b - a)


def watermelon_G(t, y, a: float = 0.0, b: float = 1.0, u: float = 0.0, v: float = 0.0, A: float = 1.0):
    """Inverted height function of a watermelon from (a, u) to (b, v) with mass A."""
    t = np.asarray(t, float)
    lin = (b - t) / (b - a) * u + (t - a) / (b - a) * v
    return np.sqrt(_bridge_variance(t, a, b, A)) * semicircle_classical_location(np.asarray(y, float) / A) + lin


def watermelon_H(t, x, a: float = 0.0, b: float = 1.0, u: float = 0.0, v: float = 0.0, A: float = 1.0):
    t = np.asarray(t, float)
    lin = (b - t) / (b - a) * u + (t - a) / (b - a) * v
    s = np.sqrt(_bridge_variance(t, a, b, A))
    return A * semicircle_tail((np.asarray(x, float) - lin) / s)


def watermelon_density(t, x, a: float = 0.0, b: float = 1.0, u: float = 0.0, v: float = 0.0, A: float = 1.0):
    t = np.asarray(t, float)
    lin = (b - t) / (b - a) * u + (t - a) / (b - a) * v
    return A * rho_sc(np.asarray(x, float) - lin, _bridge_variance(t, a, b, A))


def semicircle_kappa(a: float, b: float, d: float, A: float = 1.0) -> float:
    """Extension length for which a watermelon passes through A * semicircle(d) at a and b."""
    return d / A + (a - b) / 2.0 + np.sqrt(((b - a) / 2.0) ** 2 + (d / A) ** 2)


def semicircle_shape_variance(t, a, b, d, A=1.0):
    k = semicircle_kappa(a, b, d, A)
    return d + A * (b - np.asarray(t, float)) * (np.asarray(t, float) - a) / (b - a + 2 * k)


def semicircle_shape_G(t, y, a: float, b: float, d: float, A: float = 1.0):
    """Inverted height function for boundary data A * semicircle(d) at both ends."""
    q = semicircle_shape_variance(t, a, b, d, A)
    return np.sqrt(q) * semicircle_classical_location(np.asarray(y, float) / A)


def semicircle_shape_density(t, x, a: float, b: float, d: float, A: float = 1.0):
    return A * rho_sc(x, semicircle_shape_variance(t, a, b, d, A))


# ---------------------------------------------------------------- invariances

def scale_shape(grid: ShapeGrid, alpha: float, beta: float) -> ShapeGrid:
    """G~(t, y) = (alpha beta)^{-1/2} G(alpha t, beta y) on the preimage rectangle."""
    return ShapeGrid((grid.t_range[0] / alpha, grid.t_range[1] / alpha),
                     (grid.y_range[0] / beta, grid.y_range[1] / beta),
                     grid.values / np.sqrt(alpha * beta), grid.eps)


def shear_shape(grid: ShapeGrid, alpha: float) -> ShapeGrid:
    """G^(t, y) = G(t, y) + alpha t."""
    return replace(grid, values=grid.values + alpha * grid.t[:, None])


def scale_height(grid: HeightGrid, alpha: float, beta: float) -> HeightGrid:
    """H~(t, x) = alpha beta^{-2} H(alpha t, beta x)."""
    return HeightGrid((grid.t_range[0] / alpha, grid.t_range[1] / alpha),
                      (grid.x_range[0] / beta, grid.x_range[1] / beta),
                      alpha / beta ** 2 * grid.values)


def shear_height(grid: HeightGrid, alpha: float) -> "HeightGrid":
    """H^(t, x) = H(t, x - alpha t), resampled on the same x-grid."""
    x = grid.x
    out = np.empty_like(grid.values)
    for i, ti in enumerate(grid.t):
        out[i] = np.interp(x - alpha * ti, x, grid.values[i])
    return HeightGrid(grid.t_range, grid.x_range, out)
