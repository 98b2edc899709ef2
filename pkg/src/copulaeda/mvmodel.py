"""Search models without a vine: the independence model and the Gaussian copula.

Both combine fitted univariate margins with a dependence structure. The
Gaussian copula correlation is estimated by inverting Kendall's tau
pairwise and repaired to be positive definite when needed.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special

from .margins import DegenerateSampleError, fit_margin
from .numerics import kendall_tau_matrix

__all__ = [
    "GaussianCopulaModel",
    "IndependenceModel",
    "U_CLIP",
    "estimate_correlation",
    "fit",
    "normal_scores_correlation",
    "pd_correction",
    "sample",
]

RHO_MAX = 0.999
PD_EPS = 1e-6
# Uniforms are kept this far from 0 and 1 before margin inversion.
U_CLIP = 1e-12


@dataclass(frozen=True, eq=False)
class IndependenceModel:
    """Product copula over independently fitted margins."""

    margins: tuple

    def __post_init__(self):
        if len(self.margins) < 1:
            raise ValueError("a model needs at least one margin")
        object.__setattr__(self, "margins", tuple(self.margins))

    @property
    def dimension(self) -> int:
        return len(self.margins)


@dataclass(frozen=True, eq=False)
class GaussianCopulaModel:
    """Gaussian copula with correlation ``corr`` over fitted margins."""

    margins: tuple
    corr: np.ndarray
    chol: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "margins", tuple(self.margins))
        n = len(self.margins)
        if self.corr.shape != (n, n) or self.chol.shape != (n, n):
            raise ValueError("correlation shape does not match the margins")

    @property
    def dimension(self) -> int:
        return len(self.margins)


def _check_data(data) -> np.ndarray:
    x = np.asarray(data, dtype=float)
    if x.ndim != 2:
        raise ValueError("data must be a two-dimensional array")
    if x.shape[0] < 1:
        raise ValueError("data has no rows")
    return x


def estimate_correlation(data) -> np.ndarray:
    """Correlation matrix ``sin(pi/2 * tau_ij)`` from pairwise Kendall tau.

    Off-diagonal entries are clamped to ``[-0.999, 0.999]`` and the result
    is repaired by :func:`pd_correction`.

    Raises
    ------
    DegenerateSampleError
        If a column is constant.
    """
    x = _check_data(data)
    if x.shape[0] < 3:
        raise ValueError("correlation estimation needs at least three rows")
    if np.any(np.ptp(x, axis=0) == 0.0):
        raise DegenerateSampleError("a column has zero spread")
    r = np.sin(0.5 * np.pi * kendall_tau_matrix(x))
    r = np.clip(r, -RHO_MAX, RHO_MAX)
    np.fill_diagonal(r, 1.0)
    return pd_correction(r)


def normal_scores_correlation(scores) -> np.ndarray:
    """Pearson correlation of normal scores, clamped and repaired like
    :func:`estimate_correlation`.

    Parameters
    ----------
    scores : array_like, shape (N, n)
        ``Phi^{-1}(F_i(x_i))`` for each column.
    """
    z = _check_data(scores)
    if z.shape[0] < 3:
        raise ValueError("correlation estimation needs at least three rows")
    if np.any(np.ptp(z, axis=0) == 0.0):
        raise DegenerateSampleError("a column has zero spread")
    r = np.clip(np.corrcoef(z, rowvar=False), -RHO_MAX, RHO_MAX)
    np.fill_diagonal(r, 1.0)
    return pd_correction(r)


def _min_eig(m) -> float:
    return float(np.linalg.eigvalsh(m)[0])


def pd_correction(r, eps: float = PD_EPS) -> np.ndarray:
    """Repair a symmetric unit-diagonal matrix to be positive definite.

    Eigenvalues below ``eps`` are raised to a floor and the matrix is
    rescaled back to unit diagonal. The rescaling can pull the smallest
    eigenvalue under ``eps`` again, so the floor is doubled until the
    result satisfies ``min eig >= eps``. Matrices that already satisfy it
    are returned unchanged, which makes the repair idempotent.
    """
    r = np.array(r, dtype=float)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValueError("matrix must be square")
    r = 0.5 * (r + r.T)
    if _min_eig(r) >= eps:
        return r
    w, v = np.linalg.eigh(r)
    floor = eps
    for _ in range(200):
        m = (v * np.maximum(w, floor)) @ v.T
        d = 1.0 / np.sqrt(np.diag(m))
        m = m * d[:, None] * d[None, :]
        m = 0.5 * (m + m.T)
        np.fill_diagonal(m, 1.0)
        if _min_eig(m) >= eps:
            return m
        floor *= 2.0
    raise ArithmeticError("positive-definite repair failed")


def _cholesky(r) -> tuple[np.ndarray, np.ndarray]:
    eps = PD_EPS
    for _ in range(8):
        try:
            return r, np.linalg.cholesky(r)
        except np.linalg.LinAlgError:
            eps *= 10.0
            r = pd_correction(r, eps)
    raise ArithmeticError("Cholesky factorisation failed after repair")


def fit(kind: str, selected, margin_kind: str = "normal", correlation: str = "kendall"):
    """Fit an ``'independence'`` or ``'gaussian'`` search model.

    Parameters
    ----------
    kind : {'independence', 'gaussian'}
        Dependence structure.
    selected : array_like, shape (N, n)
        Selected population, one individual per row.
    margin_kind : {'normal', 'kernel'}
        Margin family for every variable.
    correlation : {'kendall', 'pearson'}
        Gaussian-copula correlation estimator: Kendall tau inversion, or
        the Pearson correlation of the normal scores ``Phi^{-1}(F_i(x_i))``.

    Raises
    ------
    DegenerateSampleError
        If a column is constant.
    """
    x = _check_data(selected)
    margins = [fit_margin(margin_kind, x[:, i]) for i in range(x.shape[1])]
    if kind == "independence":
        return IndependenceModel(tuple(margins))
    if kind != "gaussian":
        raise ValueError(f"unknown model kind {kind!r}")
    if correlation not in ("kendall", "pearson"):
        raise ValueError(f"unknown correlation estimator {correlation!r}")
    n = x.shape[1]
    if n == 1:
        one = np.ones((1, 1))
        return GaussianCopulaModel(tuple(margins), one, one.copy())
    if correlation == "pearson":
        u = np.column_stack([m.cdf(x[:, i]) for i, m in enumerate(margins)])
        r = normal_scores_correlation(special.ndtri(np.clip(u, U_CLIP, 1.0 - U_CLIP)))
    else:
        # Kendall tau is invariant under the strictly increasing margin CDFs,
        # so it is computed on the raw columns, where saturation cannot
        # create ties.
        r = estimate_correlation(x)
    corr, chol = _cholesky(r)
    return GaussianCopulaModel(tuple(margins), corr, chol)


def _apply_margins(margins: Sequence, u: np.ndarray) -> np.ndarray:
    u = np.clip(u, U_CLIP, 1.0 - U_CLIP)
    return np.column_stack([m.quantile(u[:, i]) for i, m in enumerate(margins)])


def sample(model, count: int, rng=None) -> np.ndarray:
    """Draw ``count`` individuals from a fitted model.

    Parameters
    ----------
    model : IndependenceModel or GaussianCopulaModel
    count : int
        Number of rows, at least one.
    rng : int, numpy.random.Generator or None
        Seed or generator.

    Returns
    -------
    ndarray, shape (count, n)
    """
    if count < 1:
        raise ValueError("count must be positive")
    rng = np.random.default_rng(rng)
    n = model.dimension
    if isinstance(model, IndependenceModel):
        u = rng.random((count, n))
    elif isinstance(model, GaussianCopulaModel):
        u = special.ndtr(rng.standard_normal((count, n)) @ model.chol.T)
    else:
        raise TypeError(f"unsupported model {type(model).__name__}")
    return _apply_margins(model.margins, u)
