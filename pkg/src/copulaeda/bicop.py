"""Bivariate copulas: product, normal, Student-t, Clayton, Gumbel and the
90-degree rotations of Clayton and Gumbel.

Every family exposes the distribution function, density, both conditional
distribution functions and their inverses. ``h(x, v)`` is the conditional
distribution of the first argument given the second, ``dC(x, v)/dv``;
``h_first(u, v)`` conditions on the first argument, ``dC(u, v)/du``.

Fitting is by Kendall tau inversion, with the Student-t degrees of freedom
estimated by profile maximum likelihood. Family selection tests
independence first and then minimises the Cramer-von Mises distance to the
empirical copula.
"""
from __future__ import annotations

import enum
import functools
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from numba import njit
from scipy import special

from .numerics import (brent_root_vec, kendall_tau, max_ranks, student_t_logpdf,
                       student_t_quantile)

__all__ = [
    "ALL_FAMILIES",
    "BivCopula",
    "Family",
    "GofResult",
    "SampleTooSmallError",
    "cvm_statistic",
    "empirical_copula",
    "fit_by_tau",
    "fit_t_df",
    "independence_test",
    "pseudo_observations",
    "select_copula",
]

RHO_MAX = 0.999
THETA_MAX = 50.0
THETA_EPS = 1e-6
NU_BOUNDS = (1.0, 30.0)
# Gumbel h-inverse bracket in t = log(-log x): x from 1 - 1e-15 down to 1e-300
GUMBEL_T_BRACKET = (-34.5, 6.5)


class Family(enum.IntEnum):
    """Copula families; the integer order is the tie-break order in selection."""

    PRODUCT = 0
    NORMAL = 1
    STUDENT_T = 2
    CLAYTON = 3
    ROT_CLAYTON = 4
    GUMBEL = 5
    ROT_GUMBEL = 6


ALL_FAMILIES = frozenset(Family)

_N_PARAMS = {Family.PRODUCT: 0, Family.STUDENT_T: 2}
_BASE = {Family.ROT_CLAYTON: Family.CLAYTON, Family.ROT_GUMBEL: Family.GUMBEL}


class SampleTooSmallError(ValueError):
    """The independence test needs at least ten observations."""


@dataclass(frozen=True)
class BivCopula:
    """A bivariate copula family with its parameters.

    Parameters
    ----------
    family : Family
    rho : float, optional
        Correlation for the normal and Student-t families, in (-1, 1).
    nu : float, optional
        Student-t degrees of freedom, in [1, 30].
    theta : float, optional
        Archimedean parameter: Clayton > 0, rotated Clayton < 0,
        Gumbel >= 1, rotated Gumbel < -1. Rotated families store the
        negative parameter and evaluate the base family at ``-theta``.
    """

    family: Family
    rho: float | None = None
    nu: float | None = None
    theta: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        fam = self.family
        if fam in (Family.NORMAL, Family.STUDENT_T):
            if self.rho is None or not -1.0 < self.rho < 1.0:
                raise ValueError(f"{fam.name} needs rho in (-1, 1), got {self.rho}")
        if fam == Family.STUDENT_T:
            if self.nu is None or not NU_BOUNDS[0] <= self.nu <= NU_BOUNDS[1]:
                raise ValueError(f"STUDENT_T needs nu in [1, 30], got {self.nu}")
        ok = {
            Family.CLAYTON: lambda t: t > 0,
            Family.ROT_CLAYTON: lambda t: t < 0,
            Family.GUMBEL: lambda t: t >= 1,
            Family.ROT_GUMBEL: lambda t: t < -1,
        }.get(fam)
        if ok is not None and (self.theta is None or not np.isfinite(self.theta)
                               or not ok(self.theta)):
            raise ValueError(f"{fam.name} parameter out of range: theta={self.theta}")

    # -- bookkeeping -------------------------------------------------------
    @property
    def n_params(self) -> int:
        """Number of free parameters."""
        return _N_PARAMS.get(self.family, 1)

    @property
    def is_rotated(self) -> bool:
        return self.family in _BASE

    def _base(self) -> "BivCopula":
        return BivCopula(_BASE[self.family], theta=-self.theta)

    def kendall_tau(self) -> float:
        """Theoretical Kendall tau of the copula."""
        fam = self.family
        if fam == Family.PRODUCT:
            return 0.0
        if fam in (Family.NORMAL, Family.STUDENT_T):
            return 2.0 / np.pi * np.arcsin(self.rho)
        if fam == Family.CLAYTON:
            return self.theta / (self.theta + 2.0)
        if fam == Family.GUMBEL:
            return 1.0 - 1.0 / self.theta
        return -self._base().kendall_tau()

    # -- evaluation --------------------------------------------------------
    def cdf(self, u, v):
        """Copula distribution function ``C(u, v)`` on the closed unit square."""
        u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        inner = (u > 0) & (u < 1) & (v > 0) & (v < 1)
        out = np.where(u <= 0, 0.0, np.where(v <= 0, 0.0, np.where(u >= 1, v, u)))
        out = np.where((u < 1) & (v >= 1), u, out)
        if inner.any():
            ui, vi = u[inner], v[inner]
            out = np.array(out, dtype=float)
            out[inner] = self._cdf(ui, vi)
        return out[()] if out.ndim == 0 else out

    def _cdf(self, u, v):
        fam = self.family
        if fam == Family.PRODUCT:
            return u * v
        if fam == Family.NORMAL:
            x, y = special.ndtri(u), special.ndtri(v)
            return _elliptical_cdf(u, v, x, y, self.rho, special.owens_t)
        if fam == Family.STUDENT_T:
            nu = self.nu
            x, y = student_t_quantile(u, nu), student_t_quantile(v, nu)
            return _elliptical_cdf(u, v, x, y, self.rho,
                                   lambda h, a: _owen_t_student(h, a, nu))
        if fam == Family.CLAYTON:
            return np.exp(-_clayton_log_sum(u, v, self.theta) / self.theta)
        if fam == Family.GUMBEL:
            return np.exp(-np.exp(_gumbel_log_a(u, v, self.theta)))
        return u - self._base()._cdf(u, 1.0 - v)

    def pdf(self, u, v):
        """Copula density on the open unit square."""
        return np.exp(self.logpdf(u, v))

    def logpdf(self, u, v):
        """Log copula density."""
        u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        fam = self.family
        if fam == Family.PRODUCT:
            return np.zeros(u.shape)[()]
        if fam == Family.NORMAL:
            r = self.rho
            x, y = special.ndtri(u), special.ndtri(v)
            s2 = 1.0 - r * r
            return -0.5 * np.log(s2) - (r * r * (x * x + y * y) - 2.0 * r * x * y) / (2.0 * s2)
        if fam == Family.STUDENT_T:
            x, y = student_t_quantile(u, self.nu), student_t_quantile(v, self.nu)
            return _t_logpdf_scores(x, y, self.rho, self.nu)
        if fam == Family.CLAYTON:
            t = self.theta
            return (np.log1p(t) - (1.0 + t) * (np.log(u) + np.log(v))
                    - (2.0 + 1.0 / t) * _clayton_log_sum(u, v, t))
        if fam == Family.GUMBEL:
            t = self.theta
            lx, ly = np.log(-np.log(u)), np.log(-np.log(v))
            la = _gumbel_log_a(u, v, t)
            a = np.exp(la)
            return (-a - np.log(u) - np.log(v) + (t - 1.0) * (lx + ly)
                    + (1.0 - 2.0 * t) * la + np.log(a + t - 1.0))
        return self._base().logpdf(u, 1.0 - v)

    def h(self, x, v):
        """Conditional distribution of the first argument given the second."""
        x, v = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(v, dtype=float))
        fam = self.family
        if fam == Family.PRODUCT:
            return x.copy()[()]
        if fam == Family.NORMAL:
            r = self.rho
            return special.ndtr((special.ndtri(x) - r * special.ndtri(v)) / np.sqrt(1.0 - r * r))
        if fam == Family.STUDENT_T:
            nu, r = self.nu, self.rho
            qx, qy = student_t_quantile(x, nu), student_t_quantile(v, nu)
            scale = np.sqrt((nu + qy * qy) * (1.0 - r * r) / (nu + 1.0))
            return special.stdtr(nu + 1.0, (qx - r * qy) / scale)
        if fam == Family.CLAYTON:
            t = self.theta
            return np.exp(-(t + 1.0) * np.log(v) - (1.0 + 1.0 / t) * _clayton_log_sum(x, v, t))
        if fam == Family.GUMBEL:
            return _gumbel_h(x, v, self.theta)
        return self._base().h(x, 1.0 - v)

    def h_inv(self, w, v):
        """Inverse of :meth:`h` in its first argument: solves ``h(x, v) = w``."""
        w, v = np.broadcast_arrays(np.asarray(w, dtype=float), np.asarray(v, dtype=float))
        fam = self.family
        if fam == Family.PRODUCT:
            return w.copy()[()]
        if fam == Family.NORMAL:
            r = self.rho
            return special.ndtr(special.ndtri(w) * np.sqrt(1.0 - r * r) + r * special.ndtri(v))
        if fam == Family.STUDENT_T:
            nu, r = self.nu, self.rho
            qy = student_t_quantile(v, nu)
            scale = np.sqrt((nu + qy * qy) * (1.0 - r * r) / (nu + 1.0))
            return special.stdtr(nu, student_t_quantile(w, nu + 1.0) * scale + r * qy)
        if fam == Family.CLAYTON:
            return _clayton_h_inv(w, v, self.theta)
        if fam == Family.GUMBEL:
            return _gumbel_h_inv(w, v, self.theta)
        return self._base().h_inv(w, 1.0 - v)

    def h_first(self, u, v):
        """Conditional distribution of the second argument given the first, ``dC/du``."""
        if self.is_rotated:
            u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
            return 1.0 - self._base().h(1.0 - v, u)
        return self.h(v, u)

    def h_first_inv(self, w, u):
        """Inverse of :meth:`h_first` in ``v``: solves ``h_first(u, v) = w``."""
        if self.is_rotated:
            w, u = np.broadcast_arrays(np.asarray(w, dtype=float), np.asarray(u, dtype=float))
            return 1.0 - self._base().h_inv(1.0 - w, u)
        return self.h_inv(w, u)

    def simulate(self, n: int, rng=None) -> np.ndarray:
        """Draw ``n`` pairs by conditional inversion; returns an ``(n, 2)`` array."""
        rng = np.random.default_rng(rng)
        v = rng.random(n)
        w = rng.random(n)
        # keep away from exact 0, which rng.random can return
        tiny = np.finfo(float).tiny
        v = np.clip(v, tiny, None)
        w = np.clip(w, tiny, None)
        return np.column_stack([self.h_inv(w, v), v])


# -- family kernels ----------------------------------------------------------
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def _owen_t_student(h, a, nu):
    """Student-t analogue of Owen's T function.

    ``(1/2pi) * int_0^{atan a} (1 + h^2 / (nu cos^2 t))^(-nu/2) dt``, the
    probability that a spherical bivariate t vector lies in the wedge
    ``{X > h, 0 < Y < a X}``. Integrated by Gauss-Legendre in
    ``s = log(pi/2 - t)``, which resolves the sharp drop near ``t = pi/2``
    when ``|h|`` is small and ``|a|`` large.
    """
    h, a = np.broadcast_arrays(np.asarray(h, dtype=float), np.asarray(a, dtype=float))
    h2 = (h * h).ravel()
    sgn = np.sign(a).ravel()
    aa = np.abs(a).ravel()
    with np.errstate(divide="ignore"):
        phi_lo = np.maximum(np.arctan(1.0 / aa), 1e-18)
    s0 = np.log(phi_lo)
    s1 = np.log(0.5 * np.pi)
    span = s1 - s0
    panels = max(1, int(np.ceil(np.max(span, initial=0.0) / 2.0)))
    out = np.zeros(h2.size)
    width = span / panels
    for p in range(panels):
        mid = s0 + (p + 0.5) * width
        s = mid[:, None] + 0.5 * width[:, None] * _GL_X[None, :]
        phi = np.exp(s)
        sin2 = np.sin(phi) ** 2
        g = np.exp(-0.5 * nu * np.log1p(h2[:, None] / (nu * sin2)))
        out += 0.5 * width * ((g * phi) @ _GL_W)
    return (sgn * out / (2.0 * np.pi)).reshape(a.shape)


def _elliptical_cdf(u, v, x, y, rho, owen):
    """Owen's decomposition of an elliptical orthant probability.

    ``x``, ``y`` are the margin quantiles of ``u``, ``v``; ``owen`` is the
    wedge probability function matching the radial law.
    """
    s = np.sqrt(1.0 - rho * rho)
    with np.errstate(divide="ignore", invalid="ignore"):
        ax = (y - rho * x) / (x * s)
        ay = (x - rho * y) / (y * s)
    xz, yz = x == 0, y == 0
    ax = np.where(xz | yz, 0.0, ax)
    ay = np.where(xz | yz, 0.0, ay)
    prod = x * y
    beta = np.where((prod > 0) | ((prod == 0) & (x + y >= 0)), 0.0, 0.5)
    general = 0.5 * (u + v) - owen(x, ax) - owen(y, ay) - beta
    corner = -rho / s
    along_x = 0.5 * v - owen(y, np.full_like(y, corner))
    along_y = 0.5 * u - owen(x, np.full_like(x, corner))
    origin = 0.25 + np.arcsin(rho) / (2.0 * np.pi)
    return np.where(xz & yz, origin, np.where(xz, along_x, np.where(yz, along_y, general)))


def _t_logpdf_scores(x, y, rho, nu):
    """Student-t copula log density at t-scores ``x``, ``y``."""
    s2 = 1.0 - rho * rho
    q = (x * x + y * y - 2.0 * rho * x * y) / (nu * s2)
    const = (special.gammaln(0.5 * (nu + 2.0)) + special.gammaln(0.5 * nu)
             - 2.0 * special.gammaln(0.5 * (nu + 1.0)) - 0.5 * np.log(s2))
    return (const - 0.5 * (nu + 2.0) * np.log1p(q)
            + 0.5 * (nu + 1.0) * (np.log1p(x * x / nu) + np.log1p(y * y / nu)))


def _clayton_log_sum(u, v, theta):
    """``log(u^-theta + v^-theta - 1)`` without overflow or cancellation."""
    a = -theta * np.log(u)
    b = -theta * np.log(v)
    m = np.maximum(a, b)
    with np.errstate(over="ignore", invalid="ignore"):
        small = np.log1p(np.expm1(np.minimum(a, 50.0)) + np.expm1(np.minimum(b, 50.0)))
        large = m + np.log(np.exp(a - m) + np.exp(b - m) - np.exp(-m))
    return np.where(m < 50.0, small, large)


def _log_expm1(c):
    with np.errstate(divide="ignore"):
        return np.where(c > 30.0, c + np.log1p(-np.exp(-np.minimum(c, 700.0))),
                        np.log(np.expm1(np.minimum(c, 30.0))))


def _clayton_h_inv(w, v, theta):
    b = -theta * np.log(v)
    c = -(theta / (theta + 1.0)) * np.log(w)
    log_term = np.logaddexp(0.0, b + _log_expm1(c))
    return np.exp(-log_term / theta)


def _gumbel_log_a(u, v, theta):
    """``log((x^theta + y^theta)^(1/theta))`` with ``x = -log u``, ``y = -log v``."""
    lx = np.log(-np.log(u))
    ly = np.log(-np.log(v))
    return np.logaddexp(theta * lx, theta * ly) / theta


def _gumbel_h(x, v, theta):
    la = _gumbel_log_a(x, v, theta)
    ly = np.log(-np.log(v))
    return np.exp(-np.exp(la) - np.log(v) + (theta - 1.0) * (ly - la))


def _gumbel_h_inv(w, v, theta, tol=1e-12):
    """Invert the Gumbel h-function by Brent's method on ``t = log(-log x)``.

    In ``t`` an absolute tolerance keeps the relative accuracy of both
    ``x`` and ``1 - x``, which matters in the tails. Targets outside the
    bracket's attainable range return the nearer end.
    """
    w, v = np.broadcast_arrays(w, v)
    shape = w.shape
    w = w.ravel()
    v = v.ravel()
    t_near_one, t_near_zero = GUMBEL_T_BRACKET
    f_one = _gumbel_h(np.full(w.size, np.exp(-np.exp(t_near_one))), v, theta) - w
    f_zero = _gumbel_h(np.full(w.size, np.exp(-np.exp(t_near_zero))), v, theta) - w
    t = np.where(f_zero >= 0, t_near_zero, t_near_one)
    inside = (f_zero < 0) & (f_one > 0)
    if inside.any():
        wi, vi = w[inside], v[inside]

        def f(s, idx):
            return _gumbel_h(np.exp(-np.exp(s)), vi[idx], theta) - wi[idx]

        t[inside] = brent_root_vec(f, np.full(wi.size, t_near_one),
                                   np.full(wi.size, t_near_zero), xtol=tol, maxiter=200)
    return np.exp(-np.exp(t)).reshape(shape)


# -- rank statistics ---------------------------------------------------------
def pseudo_observations(x) -> np.ndarray:
    """Ranks rescaled by ``1/(N+1)``; ties share the largest rank of their group."""
    x = np.asarray(x, dtype=float)
    return max_ranks(x) / (x.size + 1.0)


@njit(cache=True)
def _dominance_counts(r, s):
    """For each i, the number of j with ``r[j] <= r[i]`` and ``s[j] <= s[i]``.

    ``r`` and ``s`` are ranks in 1..N (ties carry the group maximum).
    """
    n = r.size
    order = np.argsort(r, kind="mergesort")
    tree = np.zeros(n + 1, np.int64)
    out = np.empty(n, np.int64)
    i = 0
    while i < n:
        j = i
        while j < n and r[order[j]] == r[order[i]]:
            j += 1
        for k in range(i, j):
            pos = s[order[k]]
            while pos <= n:
                tree[pos] += 1
                pos += pos & (-pos)
        for k in range(i, j):
            pos = s[order[k]]
            total = 0
            while pos > 0:
                total += tree[pos]
                pos -= pos & (-pos)
            out[order[k]] = total
        i = j
    return out


def _as_pairs(u, v):
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if u.size != v.size:
        raise ValueError("u and v must have equal length")
    if u.size == 0:
        raise ValueError("sample is empty")
    return u, v


def empirical_copula(u_sample, v_sample, u, v):
    """Empirical copula of a sample evaluated at arbitrary points.

    The sample is first mapped to rank pseudo-observations.
    """
    us, vs = _as_pairs(u_sample, v_sample)
    U, V = pseudo_observations(us), pseudo_observations(vs)
    u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    flat_u, flat_v = u.ravel(), v.ravel()
    out = np.empty(flat_u.size)
    step = max(1, (1 << 20) // U.size)
    for s in range(0, flat_u.size, step):
        hit = (U[None, :] <= flat_u[s:s + step, None]) & (V[None, :] <= flat_v[s:s + step, None])
        out[s:s + step] = hit.mean(axis=1)
    return out.reshape(u.shape)[()]


@dataclass(frozen=True)
class GofResult:
    """Cramer-von Mises statistic of a fitted copula."""

    statistic: float
    copula: object


def _rank_view(u, v):
    n = u.size
    r, s = max_ranks(u), max_ranks(v)
    return r, s, r / (n + 1.0), s / (n + 1.0)


def _cvm_from_ranks(r, s, U, V, copula) -> float:
    emp = _dominance_counts(r, s) / r.size
    return float(np.sum((emp - copula.cdf(U, V)) ** 2))


def cvm_statistic(u, v, copula) -> GofResult:
    """Cramer-von Mises distance between the empirical copula and ``copula``.

    ``S_N = sum_i (C_E(U_i, V_i) - C(U_i, V_i))^2`` at the rank
    pseudo-observations. ``copula`` is anything with a ``cdf(u, v)`` method.
    """
    u, v = _as_pairs(u, v)
    r, s, U, V = _rank_view(u, v)
    return GofResult(_cvm_from_ranks(r, s, U, V, copula), copula)


_PRODUCT = BivCopula(Family.PRODUCT)


@functools.lru_cache(maxsize=256)
def _independence_null(n: int, n_perm: int, seed: int) -> np.ndarray:
    """Sorted permutation null of the independence statistic at sample size ``n``.

    Under independence the statistic depends on the data only through the
    pairing of ranks, so the null distribution is a function of ``n`` alone.
    """
    rng = np.random.default_rng(seed)
    r = np.arange(1, n + 1, dtype=np.int64)
    U = r / (n + 1.0)
    stats = np.empty(n_perm)
    for k in range(n_perm):
        s = rng.permutation(r)
        stats[k] = np.sum((_dominance_counts(r, s) / n - U * (s / (n + 1.0))) ** 2)
    stats.sort()
    stats.setflags(write=False)
    return stats


def independence_test(u, v, seed: int = 0, n_perm: int = 99) -> float:
    """Permutation p-value for independence based on the CvM distance to the product copula.

    ``p = (1 + #{null >= observed}) / (n_perm + 1)``.

    Raises
    ------
    SampleTooSmallError
        If fewer than ten observations are given.
    """
    u, v = _as_pairs(u, v)
    if u.size < 10:
        raise SampleTooSmallError("independence test needs at least 10 observations")
    r, s, U, V = _rank_view(u, v)
    return _independence_p(r, s, U, V, seed, n_perm)


def _independence_p(r, s, U, V, seed, n_perm):
    observed = _cvm_from_ranks(r, s, U, V, _PRODUCT)
    null = _independence_null(r.size, n_perm, seed)
    # small slack so that ties with the observed value count as exceedances
    exceed = null.size - np.searchsorted(null, observed * (1.0 - 1e-12), side="left")
    return (1.0 + exceed) / (n_perm + 1.0)


# -- fitting -----------------------------------------------------------------
def fit_by_tau(family: Family, tau: float, nu: float | None = None) -> BivCopula:
    """Fit a one-parameter family (or the correlation of the t) by tau inversion.

    Parameters
    ----------
    family : Family
    tau : float
        Kendall tau in [-1, 1].
    nu : float, optional
        Degrees of freedom for the Student-t family (default 30).

    Raises
    ------
    ValueError
        If the sign of ``tau`` is incompatible with the family.
    """
    family = Family(family)
    tau = float(np.clip(tau, -1.0, 1.0))
    if family == Family.PRODUCT:
        return _PRODUCT
    if family in (Family.NORMAL, Family.STUDENT_T):
        rho = float(np.clip(np.sin(0.5 * np.pi * tau), -RHO_MAX, RHO_MAX))
        if family == Family.NORMAL:
            return BivCopula(family, rho=rho)
        return BivCopula(family, rho=rho, nu=NU_BOUNDS[1] if nu is None else nu)
    if family in _BASE:
        if tau > 0:
            raise ValueError(f"{family.name} needs tau <= 0, got {tau}")
        base = fit_by_tau(_BASE[family], -tau)
        return BivCopula(family, theta=-base.theta)
    if tau < 0:
        raise ValueError(f"{family.name} needs tau >= 0, got {tau}")
    with np.errstate(divide="ignore"):
        if family == Family.CLAYTON:
            theta = np.clip(2.0 * tau / (1.0 - tau), THETA_EPS, THETA_MAX)
        else:
            theta = np.clip(1.0 / (1.0 - tau), 1.0 + THETA_EPS, THETA_MAX)
    return BivCopula(family, theta=float(theta))


def _grid_scores(n, quantile):
    """Scores ``quantile(k / (n + 1))`` for ranks k = 1..n, using antisymmetry."""
    half = n // 2
    q = quantile(np.arange(1, half + 1) / (n + 1.0))
    table = np.zeros(n)
    table[:half] = q
    table[n - half:] = -q[::-1]
    return table


def _t_profile(r, s, rho):
    """Log-likelihood of the t copula in ``nu`` at fixed ``rho`` for rank data."""
    n = r.size

    def loglik(nu):
        table = _grid_scores(n, lambda p: student_t_quantile(p, nu))
        return float(np.sum(_t_logpdf_scores(table[r - 1], table[s - 1], rho, nu)))
    return loglik


def fit_t_df(u, v, rho: float, tol: float = 1e-3) -> float:
    """Degrees of freedom of a t copula by golden-section likelihood search on [1, 30].

    The likelihood is evaluated at the rank pseudo-observations of the
    sample with the correlation held fixed. The interval end points are
    also evaluated so that a likelihood increasing towards a bound returns
    the bound itself.
    """
    u, v = _as_pairs(u, v)
    if not -1.0 < rho < 1.0:
        raise ValueError("rho must lie in (-1, 1)")
    return _golden_max(_t_profile(max_ranks(u), max_ranks(v), rho), *NU_BOUNDS, tol)


def _golden_max(fn, a, b, tol):
    inv_phi = (np.sqrt(5.0) - 1.0) / 2.0
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = fn(c), fn(d)
    best = [(fc, c), (fd, d)]
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = fn(c)
            best.append((fc, c))
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = fn(d)
            best.append((fd, d))
    lo, hi = NU_BOUNDS
    best.extend([(fn(lo), lo), (fn(hi), hi)])
    return float(max(best, key=lambda t: t[0])[1])


def _compatible(family: Family, tau: float) -> bool:
    if family in (Family.NORMAL, Family.STUDENT_T):
        return True
    if family in (Family.CLAYTON, Family.GUMBEL):
        return tau > 0
    if family in _BASE:
        return tau < 0
    return False


def select_copula(u, v, candidates: Iterable[Family] = ALL_FAMILIES, seed: int = 0,
                  level: float = 0.1, n_perm: int = 99) -> BivCopula:
    """Choose and fit a pair copula for a bivariate sample.

    Independence is retained (product copula) unless the permutation test
    rejects it at ``level``. Otherwise every candidate compatible with the
    sign of Kendall's tau is fitted by tau inversion (plus the degrees of
    freedom for the Student-t) and the one with the smallest Cramer-von
    Mises statistic wins; ties go to the earlier family in :class:`Family`
    order. Samples with fewer than ten points are treated as independent.
    """
    u, v = _as_pairs(u, v)
    n = u.size
    if n < 10:
        return _PRODUCT
    r, s, U, V = _rank_view(u, v)
    if _independence_p(r, s, U, V, seed, n_perm) >= level:
        return _PRODUCT
    tau = kendall_tau(U, V)
    emp = _dominance_counts(r, s) / n
    best, best_stat = _PRODUCT, np.inf
    for family in sorted(Family(f) for f in candidates):
        if not _compatible(family, tau):
            continue
        cop = fit_by_tau(family, tau)
        if family == Family.STUDENT_T:
            nu = _golden_max(_t_profile(r, s, cop.rho), *NU_BOUNDS, 1e-3)
            cop = BivCopula(family, rho=cop.rho, nu=nu)
            table = _grid_scores(n, lambda p: student_t_quantile(p, nu))
            fitted = _elliptical_cdf(U, V, table[r - 1], table[s - 1], cop.rho,
                                     lambda h, a: _owen_t_student(h, a, nu))
        elif family == Family.NORMAL:
            table = _grid_scores(n, special.ndtri)
            fitted = _elliptical_cdf(U, V, table[r - 1], table[s - 1], cop.rho,
                                     special.owens_t)
        else:
            fitted = cop.cdf(U, V)
        stat = float(np.sum((emp - fitted) ** 2))
        if stat < best_stat:
            best, best_stat = cop, stat
    return best
