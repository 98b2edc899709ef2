"""Special functions, root finding and rank statistics.

The normal and Student-t distribution functions are thin wrappers over
``scipy.special``. The Student-t quantile sits on the t-copula fitting hot
path and is a compiled Hill approximation with Taylor refinement, several
times faster than ``scipy.special.stdtrit``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numba import njit
from scipy import special

__all__ = [
    "ConvergenceError",
    "Interval",
    "brent_root",
    "brent_root_vec",
    "kendall_tau",
    "kendall_tau_matrix",
    "max_ranks",
    "std_normal_cdf",
    "std_normal_pdf",
    "std_normal_quantile",
    "student_t_cdf",
    "student_t_logpdf",
    "student_t_quantile",
]


class ConvergenceError(RuntimeError):
    """An iterative solver exhausted its iteration budget."""


@dataclass(frozen=True)
class Interval:
    """Closed interval ``[lo, hi]`` with ``lo < hi``."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"interval requires lo < hi, got [{self.lo}, {self.hi}]")


def _check_probability(p):
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0.0) & (p < 1.0))):
        raise ValueError("probabilities must lie strictly inside (0, 1)")
    return p


def _check_dof(nu):
    if np.any(~(np.asarray(nu, dtype=float) > 0.0)):
        raise ValueError("degrees of freedom must be positive")


def std_normal_cdf(x):
    """Standard normal distribution function."""
    return special.ndtr(x)


def std_normal_pdf(x):
    """Standard normal density."""
    x = np.asarray(x, dtype=float)
    # x * x overflowing to inf correctly gives density 0
    with np.errstate(over="ignore"):
        return np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)


def std_normal_quantile(p):
    """Inverse of the standard normal distribution function.

    Raises
    ------
    ValueError
        If any ``p`` lies outside the open unit interval.
    """
    return special.ndtri(_check_probability(p))


def student_t_cdf(x, nu):
    """Student-t distribution function with ``nu`` degrees of freedom."""
    _check_dof(nu)
    return special.stdtr(nu, x)


def student_t_logpdf(x, nu):
    """Log density of the Student-t distribution."""
    x = np.asarray(x, dtype=float)
    return (special.gammaln(0.5 * (nu + 1.0)) - special.gammaln(0.5 * nu)
            - 0.5 * np.log(nu * np.pi) - 0.5 * (nu + 1.0) * np.log1p(x * x / nu))


def student_t_quantile(p, nu):
    """Inverse of the Student-t distribution function.

    Parameters
    ----------
    p : array_like
        Probabilities in (0, 1).
    nu : float
        Degrees of freedom, positive.

    Returns
    -------
    ndarray or float
        Quantiles with ``student_t_cdf(q, nu) == p`` to about 1e-14.

    Notes
    -----
    Starts from Hill's (1970) approximation and applies second-order
    Taylor corrections on the upper tail probability until the relative
    step drops below 1e-14. The tail probability comes from a continued
    fraction for the regularized incomplete beta function.
    """
    p = _check_probability(p)
    _check_dof(nu)
    shape = p.shape
    q = _t_quantile_kernel(np.ascontiguousarray(p.ravel()), float(nu))
    return q.reshape(shape)[()]


@njit(cache=True)
def _betacf(a, b, x):
    # modified Lentz evaluation of the incomplete beta continued fraction
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 400):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h


@njit(cache=True)
def _betainc_pair(a, b, x, y):
    """Regularized incomplete beta ``I_x(a, b)`` with ``y = 1 - x`` given exactly."""
    if x <= 0.0:
        return 0.0
    if y <= 0.0:
        return 1.0
    lbeta = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
    front = math.exp(lbeta + a * math.log(x) + b * math.log(y))
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, y) / b


@njit(cache=True)
def _t_upper(t, nu):
    """Upper tail probability of Student-t at ``t >= 0``."""
    t2 = t * t
    return 0.5 * _betainc_pair(0.5 * nu, 0.5, nu / (nu + t2), t2 / (nu + t2))


@njit(cache=True)
def _t_quantile_kernel(p, nu):
    n = p.size
    out = np.empty(n)
    a = 1.0 / (nu - 0.5)
    b = 48.0 / (a * a)
    c0 = ((20700.0 * a / b - 98.0) * a - 16.0) * a + 96.36
    d = ((94.5 / (b + c0) - 3.0) / b + 1.0) * math.sqrt(a * math.pi / 2.0) * nu
    log_norm = (math.lgamma(0.5 * (nu + 1.0)) - math.lgamma(0.5 * nu)
                - 0.5 * math.log(nu * math.pi))
    for i in range(n):
        pi = p[i]
        neg = pi < 0.5
        P = 2.0 * (pi if neg else 1.0 - pi)
        if P >= 1.0:
            out[i] = 0.0
            continue
        if abs(nu - 1.0) < 1e-12:
            q = 1.0 / math.tan(0.5 * math.pi * P)
        elif abs(nu - 2.0) < 1e-12:
            q = math.sqrt(2.0 / (P * (2.0 - P)) - 2.0)
        else:
            y = (d * P) ** (2.0 / nu)
            if (nu < 2.1 and P > 0.5) or y > 0.05 + a:
                x = _ndtri_approx(0.5 * P)
                yy = x * x
                c = c0
                if nu < 5.0:
                    c += 0.3 * (nu - 4.5) * (x + 0.6)
                c = (((0.05 * d * x - 5.0) * x - 7.0) * x - 2.0) * x + b + c
                yn = (((((0.4 * yy + 6.3) * yy + 36.0) * yy + 94.5) / c - yy - 3.0) / b + 1.0) * x
                q = math.sqrt(nu * math.expm1(a * yn * yn))
            else:
                yt = ((1.0 / (((nu + 6.0) / (nu * y) - 0.089 * d - 0.822) * (nu + 2.0) * 3.0)
                       + 0.5 / (nu + 4.0)) * y - 1.0) * (nu + 1.0) / (nu + 2.0) + 1.0 / y
                q = math.sqrt(nu * yt)
        half = 0.5 * P
        for _ in range(10):
            dens = math.exp(log_norm - 0.5 * (nu + 1.0) * math.log1p(q * q / nu))
            if not dens > 0.0:
                break
            step = (_t_upper(q, nu) - half) / dens
            if not math.isfinite(step):
                break
            q += step * (1.0 + step * q * (nu + 1.0) / (2.0 * (q * q + nu)))
            if abs(step) <= 1e-14 * abs(q):
                break
        out[i] = -q if neg else q
    return out


@njit(cache=True)
def _ndtri_approx(p):
    """Acklam's rational approximation to the normal quantile (rel. error 1e-9)."""
    if p < 0.02425:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((-7.784894002430293e-03 * q - 3.223964580411365e-01) * q
                   - 2.400758277161838e+00) * q - 2.549732539343734e+00) * q
                 + 4.374664141464968e+00) * q + 2.938163982698783e+00) / (
            (((7.784695709041462e-03 * q + 3.224671290700398e-01) * q
              + 2.445134137142996e+00) * q + 3.754408661907416e+00) * q + 1.0)
    if p > 1.0 - 0.02425:
        return -_ndtri_approx(1.0 - p)
    q = p - 0.5
    r = q * q
    return (((((-3.969683028665376e+01 * r + 2.209460984245205e+02) * r
               - 2.759285104469687e+02) * r + 1.383577518672690e+02) * r
             - 3.066479806614716e+01) * r + 2.506628277459239e+00) * q / (
        ((((-5.447609879822406e+01 * r + 1.615858368580409e+02) * r
           - 1.556989798598866e+02) * r + 6.680131188771972e+01) * r
         - 1.328068155288572e+01) * r + 1.0)


def brent_root_vec(f, lo, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps, maxiter=200):
    """Elementwise Brent root finder over arrays of brackets.

    Parameters
    ----------
    f : callable
        ``f(x, idx)`` returns the function values at ``x`` for the problems
        with indices ``idx`` (an integer array into the bracket arrays).
    lo, hi : ndarray
        Bracket end points; ``f`` must not have the same strict sign at both.
    xtol, rtol : float
        Absolute and relative tolerance on the root location.
    maxiter : int
        Iteration cap.

    Returns
    -------
    ndarray
        Roots, one per bracket.

    Raises
    ------
    ValueError
        If some bracket shows no sign change.
    ConvergenceError
        If some problem is still open after ``maxiter`` iterations.
    """
    xpre = np.array(lo, dtype=float, copy=True).ravel()
    xcur = np.array(hi, dtype=float, copy=True).ravel()
    n = xpre.size
    all_idx = np.arange(n)
    fpre = np.asarray(f(xpre, all_idx), dtype=float)
    fcur = np.asarray(f(xcur, all_idx), dtype=float)
    if np.any(fpre * fcur > 0):
        raise ValueError("no sign change over the bracket")
    root = np.where(fpre == 0, xpre, xcur)
    active = (fpre != 0) & (fcur != 0)

    xblk = np.zeros(n)
    fblk = np.zeros(n)
    spre = np.zeros(n)
    scur = np.zeros(n)
    for _ in range(maxiter):
        if not active.any():
            return root
        a = np.flatnonzero(active)
        xp, xc, fp, fc = xpre[a], xcur[a], fpre[a], fcur[a]
        xb, fb, sp, sc = xblk[a], fblk[a], spre[a], scur[a]

        flip = (fp != 0) & (fc != 0) & (np.signbit(fp) != np.signbit(fc))
        xb = np.where(flip, xp, xb)
        fb = np.where(flip, fp, fb)
        sp = np.where(flip, xc - xp, sp)
        sc = np.where(flip, xc - xp, sc)

        swap = np.abs(fb) < np.abs(fc)
        xp = np.where(swap, xc, xp)
        xc, xb = np.where(swap, xb, xc), np.where(swap, xp, xb)
        fp = np.where(swap, fc, fp)
        fc, fb = np.where(swap, fb, fc), np.where(swap, fp, fb)

        delta = 0.5 * (xtol + rtol * np.abs(xc))
        sbis = 0.5 * (xb - xc)
        done = (fc == 0) | (np.abs(sbis) < delta)

        with np.errstate(divide="ignore", invalid="ignore"):
            secant = -fc * (xc - xp) / (fc - fp)
            dpre = (fp - fc) / (xp - xc)
            dblk = (fb - fc) / (xb - xc)
            iqi = -fc * (fb * dblk - fp * dpre) / (dblk * dpre * (fb - fp))
        stry = np.where(xp == xb, secant, iqi)
        interp = (np.abs(sp) > delta) & (np.abs(fc) < np.abs(fp))
        good = interp & np.isfinite(stry) & (
            2 * np.abs(stry) < np.minimum(np.abs(sp), 3 * np.abs(sbis) - delta))
        sp = np.where(good, sc, sbis)
        sc = np.where(good, stry, sbis)

        xp, fp = xc, fc
        xn = np.where(np.abs(sc) > delta, xc + sc, xc + np.where(sbis > 0, delta, -delta))

        root[a[done]] = xc[done]
        active[a[done]] = False
        keep = ~done
        a = a[keep]
        xpre[a], fpre[a] = xp[keep], fp[keep]
        xcur[a] = xn[keep]
        xblk[a], fblk[a] = xb[keep], fb[keep]
        spre[a], scur[a] = sp[keep], sc[keep]
        if a.size:
            fcur[a] = f(xcur[a], a)
    if active.any():
        raise ConvergenceError(f"Brent iteration did not converge in {maxiter} steps")
    return root


def brent_root(f: Callable[[float], float], bracket: Interval, tol: float = 1e-12) -> float:
    """Root of a scalar function on a sign-changing bracket (Brent's method).

    Raises
    ------
    ValueError
        If ``f(lo)`` and ``f(hi)`` have the same strict sign.
    """
    def fv(x, idx):
        return np.array([f(float(x[0]))])

    return float(brent_root_vec(fv, np.array([bracket.lo]), np.array([bracket.hi]),
                                xtol=tol)[0])


@njit(cache=True)
def _count_inversions(y):
    """Sort ``y`` in place and return the number of strict inversions."""
    n = y.size
    buf = np.empty_like(y)
    swaps = 0
    width = 1
    while width < n:
        start = 0
        while start < n - width:
            mid = start + width
            end = min(start + 2 * width, n)
            i, j, k = start, mid, start
            while i < mid and j < end:
                if y[j] < y[i]:
                    buf[k] = y[j]
                    swaps += mid - i
                    j += 1
                else:
                    buf[k] = y[i]
                    i += 1
                k += 1
            while i < mid:
                buf[k] = y[i]
                i += 1
                k += 1
            while j < end:
                buf[k] = y[j]
                j += 1
                k += 1
            for t in range(start, end):
                y[t] = buf[t]
            start += 2 * width
        width *= 2
    return swaps


@njit(cache=True)
def _tie_pairs(v):
    """Number of tied pairs in a sorted array."""
    total = 0
    i = 0
    n = v.size
    while i < n:
        j = i + 1
        while j < n and v[j] == v[i]:
            j += 1
        t = j - i
        total += t * (t - 1) // 2
        i = j
    return total


@njit(cache=True)
def _tau_numerator(x, y):
    # lexicographic order by (x, y) through two stable sorts
    o1 = np.argsort(y, kind="mergesort")
    o2 = np.argsort(x[o1], kind="mergesort")
    order = o1[o2]
    xs = x[order]
    ys = y[order].copy()
    n = x.size
    x_ties = _tie_pairs(xs)
    joint_ties = 0
    i = 0
    while i < n:
        j = i + 1
        while j < n and xs[j] == xs[i]:
            j += 1
        joint_ties += _tie_pairs(ys[i:j])
        i = j
    swaps = _count_inversions(ys)
    y_ties = _tie_pairs(ys)
    n0 = n * (n - 1) // 2
    return n0 - x_ties - y_ties + joint_ties - 2 * swaps


def kendall_tau(xs, ys) -> float:
    """Kendall's tau-a: (concordant - discordant) / (N(N-1)/2).

    Pairs tied in either coordinate count as neither concordant nor
    discordant. Runs in O(N log N) via inversion counting.

    Raises
    ------
    ValueError
        On length mismatch or fewer than two observations.
    """
    x = np.ascontiguousarray(xs, dtype=float)
    y = np.ascontiguousarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("kendall_tau needs two 1-d sequences of equal length")
    n = x.size
    if n < 2:
        raise ValueError("kendall_tau needs at least two observations")
    return _tau_numerator(x, y) / (n * (n - 1) / 2)


def kendall_tau_matrix(data) -> np.ndarray:
    """Matrix of pairwise Kendall tau-a between the columns of ``data``."""
    data = np.asarray(data, dtype=float)
    n = data.shape[1]
    tau = np.eye(n)
    cols = [np.ascontiguousarray(data[:, j]) for j in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            tau[i, j] = tau[j, i] = kendall_tau(cols[i], cols[j])
    return tau


@njit(cache=True)
def _max_ranks(x):
    n = x.size
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(n, np.int64)
    i = 0
    while i < n:
        j = i + 1
        while j < n and x[order[j]] == x[order[i]]:
            j += 1
        for k in range(i, j):
            ranks[order[k]] = j
        i = j
    return ranks


def max_ranks(x) -> np.ndarray:
    """Ranks 1..N with tied values all receiving the largest rank of their group."""
    return _max_ranks(np.ascontiguousarray(x, dtype=float))
