"""Local profiles (jets) of solutions to the height-function equation.

A jet of order m stores, for k = 1..m, the vector
q^(k) = (d_x^k F, d_t d_x^{k-1} F, ..., d_t^k F) at a point.  Differentiating
the equation sum b_ij(grad F) d_i d_j F = 0 gives the relations
v_{i,j}(q^(1), ..., q^(i+j+2)) = 0, evaluated here with exact polynomial
arithmetic on the Taylor polynomial of F.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

PI2 = np.pi ** 2


def _mul(a: np.ndarray, b: np.ndarray, deg: int) -> np.ndarray:
    """Product of bivariate polynomials (coef[i, j] of t^i x^j) truncated to total degree deg."""
    out = np.zeros((deg + 1, deg + 1))
    ia, ja = np.nonzero(a)
    ib, jb = np.nonzero(b)
    for i, j in zip(ia, ja):
        for k, l in zip(ib, jb):
            if i + j + k + l <= deg:
                out[i + k, j + l] += a[i, j] * b[k, l]
    return out


def _dt(a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a)
    out[:-1] = a[1:] * np.arange(1, a.shape[0])[:, None]
    return out


def _dx(a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a)
    out[:, :-1] = a[:, 1:] * np.arange(1, a.shape[1])[None, :]
    return out


@dataclass(frozen=True)
class JetProfile:
    """q[k-1][j] = d_t^j d_x^(k-j) F at the base point, k = 1..m."""

    q: tuple

    def __post_init__(self):
        qs = tuple(np.array(v, dtype=float) for v in self.q)
        for k, v in enumerate(qs, start=1):
            if v.shape != (k + 1,):
                raise ValueError(f"q^({k}) must have {k + 1} entries")
        object.__setattr__(self, "q", qs)

    @property
    def m(self) -> int:
        return len(self.q)

    @property
    def admissible(self) -> bool:
        return bool(self.q[0][0] < 0)

    def entry(self, k: int, j: int) -> float:
        return float(self.q[k - 1][j])

    def pairs(self) -> list[tuple[float, float]]:
        return [(float(v[0]), float(v[1])) for v in self.q]

    def taylor(self, deg: int | None = None) -> np.ndarray:
        """Coefficients of sum q_j^(k) t^j x^(k-j) / (j! (k-j)!)."""
        deg = self.m if deg is None else deg
        c = np.zeros((deg + 1, deg + 1))
        for k, v in enumerate(self.q, start=1):
            if k > deg:
                break
            for j in range(k + 1):
                c[j, k - j] = v[j] / (factorial(j) * factorial(k - j))
        return c

    @classmethod
    def from_derivatives(cls, deriv, m: int) -> "JetProfile":
        """deriv(i, j) returns d_t^i d_x^j F at the base point."""
        return cls(tuple(np.array([deriv(j, k - j) for j in range(k + 1)]) for k in range(1, m + 1)))


def equation_polynomial(Q: JetProfile, deg: int) -> np.ndarray:
    """Taylor coefficients (to total degree deg) of the equation applied to the jet polynomial."""
    F = Q.taylor(deg + 2)
    Ft, Fx = _dt(F), _dx(F)
    Ftt, Ftx, Fxx = _dt(Ft), _dx(Ft), _dx(Fx)
    Fx2 = _mul(Fx, Fx, deg)
    Ft2 = _mul(Ft, Ft, deg)
    btt = Fx2
    btx = -_mul(Ft, Fx, deg)
    bxx = Ft2 + PI2 * _mul(Fx2, Fx2, deg)
    return _mul(btt, Ftt, deg) + 2.0 * _mul(btx, Ftx, deg) + _mul(bxx, Fxx, deg)


def jet_v(i: int, j: int, Q: JetProfile) -> float:
    """d_t^i d_x^j of the equation at the base point, from a jet of order >= i + j + 2."""
    if Q.m < i + j + 2:
        raise ValueError(f"jet order {Q.m} is below {i + j + 2}")
    E = equation_polynomial(JetProfile(Q.q[: i + j + 2]), i + j)
    return float(factorial(i) * factorial(j) * E[i, j])


def consistent_extension(pairs, eps: float = 0.0) -> JetProfile:
    """The unique consistent jet whose first two entries of q^(k) are the given pairs.

    Entries q_{i+2}^(i+j+2) are fixed in increasing order of (i + j + 2, i + 2)
    by solving v_{i,j} = 0, which is linear in that entry with coefficient
    b_tt = (q_0^(1))^2.
    """
    pairs = [tuple(map(float, p)) for p in pairs]
    if not pairs:
        raise ValueError("need at least q^(1)")
    if not pairs[0][0] < -eps or not pairs[0][0] < 0:
        raise ValueError("q_0^(1) must be negative (admissible jet)")
    m = len(pairs)
    q = [np.array(pairs[0])]
    btt = pairs[0][0] ** 2
    for K in range(2, m + 1):
        v = np.zeros(K + 1)
        v[:2] = pairs[K - 1]
        q.append(v)
        for top in range(2, K + 1):
            i, j = top - 2, K - top
            q[K - 1][top] = 0.0
            rest = jet_v(i, j, JetProfile(tuple(q)))
            q[K - 1][top] = -rest / btt
    return JetProfile(tuple(q))
