"""Canonical (C) and drawable (D) vines: structure selection, sequential
pair-copula fitting with optional information-criterion truncation, density
evaluation and sampling.

Variables are addressed by zero-based column index. A structure's ``order``
lists columns by vine position. For a C-vine, position ``j`` is the root of
tree ``j``. For a D-vine, the order is the path of the first tree.

Pair copulas are stored per tree. In a C-vine, edge ``i`` of tree ``j``
joins root ``j`` with position ``j + 1 + i``. Its copula takes the
conditional value of the non-root variable first and the root's second. In
a D-vine, edge ``i`` of tree ``j`` joins positions ``i`` and ``i + j + 1``
given the positions between them. Its copula takes the left variable first.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Union

import numpy as np

from .bicop import ALL_FAMILIES, BivCopula, Family, select_copula
from .margins import fit_margin
from .numerics import kendall_tau_matrix

__all__ = [
    "FitConfig",
    "VineKind",
    "VineModel",
    "VineStructure",
    "cheapest_insertion_path",
    "fit",
    "information_criterion",
    "log_density",
    "sample",
    "sample_uniform",
    "select_structure",
]

# Conditional arguments are clamped into [EPS, 1 - EPS] before any copula call.
EPS = 1e-12
_PRODUCT = BivCopula(Family.PRODUCT)


class VineKind(str, enum.Enum):
    C = "C"
    D = "D"


@dataclass(frozen=True)
class VineStructure:
    """Vine kind and variable order (a permutation of ``range(n)``)."""

    kind: VineKind
    order: tuple

    def __post_init__(self):
        object.__setattr__(self, "kind", VineKind(self.kind))
        order = tuple(int(i) for i in self.order)
        if sorted(order) != list(range(len(order))):
            raise ValueError(f"order is not a permutation: {order}")
        object.__setattr__(self, "order", order)

    @property
    def dimension(self) -> int:
        return len(self.order)


@dataclass(frozen=True)
class FitConfig:
    """Vine fitting options.

    Parameters
    ----------
    truncation : int, 'aic', 'bic' or None
        A fixed number of fitted trees, information-criterion truncation,
        or ``None`` for the full vine.
    structure : {'greedy', 'random'}
        Greedy selection from Kendall tau weights, or a random order.
    candidates : iterable of Family
        Pair-copula families to choose from.
    independence_level : float
        Significance level of the pair independence test.
    seed : int
        Seed of the independence test permutations.
    """

    truncation: Union[int, str, None] = None
    structure: str = "greedy"
    candidates: tuple = ALL_FAMILIES
    independence_level: float = 0.1
    seed: int = 0

    def __post_init__(self):
        t = self.truncation
        if isinstance(t, str):
            if t.lower() not in ("aic", "bic"):
                raise ValueError(f"unknown truncation mode {t!r}")
            object.__setattr__(self, "truncation", t.lower())
        elif t is not None and (isinstance(t, bool) or int(t) != t or t < 1):
            raise ValueError(f"fixed truncation must be a positive integer, got {t!r}")
        if self.structure not in ("greedy", "random"):
            raise ValueError(f"unknown structure mode {self.structure!r}")
        cands = tuple(sorted({Family(f) for f in self.candidates}))
        if not cands:
            raise ValueError("candidate family set is empty")
        object.__setattr__(self, "candidates", cands)
        if not 0.0 < self.independence_level < 1.0:
            raise ValueError("independence_level must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class VineModel:
    """A fitted vine: structure, pair copulas per tree, truncation level, margins.

    ``pair_copulas[j]`` holds the ``n - 1 - j`` copulas of tree ``j``. Trees
    at index ``truncation_level`` and deeper contain only product copulas.
    """

    structure: VineStructure
    pair_copulas: tuple
    truncation_level: int
    margins: tuple = field(default=())

    def __post_init__(self):
        n = self.structure.dimension
        trees = tuple(tuple(t) for t in self.pair_copulas)
        if len(trees) != n - 1 or any(len(t) != n - 1 - j for j, t in enumerate(trees)):
            raise ValueError("pair-copula array does not match the dimension")
        if not 0 <= self.truncation_level <= max(n - 1, 0):
            raise ValueError("truncation level out of range")
        for t in trees[self.truncation_level:]:
            if any(c.family != Family.PRODUCT for c in t):
                raise ValueError("trees beyond the truncation level must be product")
        object.__setattr__(self, "pair_copulas", trees)
        margins = tuple(self.margins)
        if margins and len(margins) != n:
            raise ValueError("one margin per variable is required")
        object.__setattr__(self, "margins", margins)

    @property
    def kind(self) -> VineKind:
        return self.structure.kind

    @property
    def dimension(self) -> int:
        return self.structure.dimension

    def n_params(self, up_to_tree: int | None = None) -> int:
        """Free copula parameters in trees ``0 .. up_to_tree - 1``."""
        trees = self.pair_copulas[:up_to_tree]
        return sum(c.n_params for t in trees for c in t)


def _clamp(u):
    return np.clip(u, EPS, 1.0 - EPS)


# -- structure ---------------------------------------------------------------
def cheapest_insertion_path(weights) -> list[int]:
    """Heavy Hamiltonian path by cheapest insertion with a dummy node.

    A dummy node joined to every vertex with weight zero turns the path
    problem into a tour. Starting from the heaviest edge, the (node,
    position) pair that loses the least weight is inserted repeatedly;
    ties go to the lowest node and the earliest position. The finished
    tour is cut open at the dummy.
    """
    w = np.abs(np.asarray(weights, dtype=float))
    n = w.shape[0]
    if n == 1:
        return [0]
    cost = np.zeros((n + 1, n + 1))
    cost[:n, :n] = -w
    upper = np.triu_indices(n, 1)
    k = int(np.argmax(w[upper]))
    tour = [int(upper[0][k]), int(upper[1][k])]
    remaining = [i for i in range(n + 1) if i not in tour]
    while remaining:
        best = None
        for node in remaining:
            for pos in range(len(tour)):
                a, b = tour[pos], tour[(pos + 1) % len(tour)]
                delta = cost[a, node] + cost[node, b] - cost[a, b]
                if best is None or delta < best[0] - 1e-15:
                    best = (delta, node, pos)
        _, node, pos = best
        tour.insert(pos + 1, node)
        remaining.remove(node)
    cut = tour.index(n)
    return tour[cut + 1:] + tour[:cut]


def select_structure(kind, data, mode: str = "greedy", seed=None) -> VineStructure:
    """Choose a vine structure from data.

    Greedy C-vines put the variable with the largest sum of absolute
    Kendall tau first (lowest index on ties), followed by the rest in
    decreasing order of the same sum. Greedy D-vines follow the cheapest
    insertion path on absolute tau. Random mode draws a uniform
    permutation from ``seed``.
    """
    kind = VineKind(kind)
    x = np.asarray(data, dtype=float)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ValueError("data needs at least two columns")
    n = x.shape[1]
    if mode == "random":
        return VineStructure(kind, tuple(np.random.default_rng(seed).permutation(n)))
    if mode != "greedy":
        raise ValueError(f"unknown structure mode {mode!r}")
    if x.shape[0] < 3:
        raise ValueError("greedy structure selection needs at least three rows")
    w = np.abs(kendall_tau_matrix(x))
    if kind == VineKind.C:
        sums = w.sum(axis=1) - 1.0
        return VineStructure(kind, tuple(np.argsort(-sums, kind="stable")))
    return VineStructure(kind, tuple(cheapest_insertion_path(w)))


# -- fitting -----------------------------------------------------------------
def _penalty(mode: str, n_obs: int) -> float:
    return 2.0 if mode == "aic" else float(np.log(n_obs))


class _CState:
    """Conditional values ``F(x_k | x_0 .. x_{j-1})`` for positions ``k >= j``."""

    def __init__(self, u):
        self.v = u

    def edges(self):
        v = self.v
        return [(v[:, k], v[:, 0]) for k in range(1, v.shape[1])]

    def reorder(self, first: int):
        cols = list(range(self.v.shape[1]))
        cols.insert(0, cols.pop(first))
        self.v = self.v[:, cols]

    def advance(self, cops):
        v = self.v
        self.v = np.column_stack([_clamp(c.h(v[:, k + 1], v[:, 0]))
                                  for k, c in enumerate(cops)])


class _DState:
    """Left and right conditional values of every edge of the current tree."""

    def __init__(self, u):
        self.left = u[:, :-1]
        self.right = u[:, 1:]

    def edges(self):
        return [(self.left[:, i], self.right[:, i]) for i in range(self.left.shape[1])]

    def advance(self, cops):
        L, R = self.left, self.right
        m = L.shape[1] - 1
        self.left = np.column_stack([_clamp(cops[i].h(L[:, i], R[:, i])) for i in range(m)])
        self.right = np.column_stack([_clamp(cops[i + 1].h_first(L[:, i + 1], R[:, i + 1]))
                                      for i in range(m)])


def _root_position(v) -> int:
    w = np.abs(kendall_tau_matrix(v))
    return int(np.argmax(w.sum(axis=1)))


def fit(data, kind, config: FitConfig = FitConfig(), margin_kind: str = "normal",
        structure_seed=None) -> VineModel:
    """Fit margins and a C- or D-vine to ``data``.

    Margins are fitted per column and the data mapped through their
    distribution functions. Trees are fitted one at a time. Each edge gets
    the copula chosen by :func:`copulaeda.bicop.select_copula`, and the
    observations for the next tree come from the h-functions. With greedy
    C-vines the root of every tree is re-chosen on the current conditional
    values.

    Truncation stops after a fixed number of trees or, in ``'aic'`` and
    ``'bic'`` mode, keeps tree ``j + 1`` only if the cumulative criterion
    through it is strictly smaller than through tree ``j``.

    Parameters
    ----------
    data : array_like, shape (N, n)
        At least ten rows and two columns.
    kind : VineKind or {'C', 'D'}
    config : FitConfig
    margin_kind : {'normal', 'kernel'}
    structure_seed : int or Generator, optional
        Source of the random order when ``config.structure == 'random'``.

    Raises
    ------
    DegenerateSampleError
        If a column is constant.
    """
    kind = VineKind(kind)
    x = np.asarray(data, dtype=float)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ValueError("vine data needs at least two columns")
    n_obs, n = x.shape
    if n_obs < 10:
        raise ValueError("vine fitting needs at least ten rows")
    trunc = config.truncation
    if isinstance(trunc, int) and trunc > n - 1:
        raise ValueError(f"fixed truncation {trunc} exceeds {n - 1} trees")
    margins = [fit_margin(margin_kind, x[:, i]) for i in range(n)]
    u = _clamp(np.column_stack([m.cdf(x[:, i]) for i, m in enumerate(margins)]))

    greedy = config.structure == "greedy"
    if greedy:
        order = list(select_structure(kind, u, "greedy").order)
    else:
        order = list(select_structure(kind, u, "random", structure_seed).order)
    u = u[:, order]
    state = _CState(u) if kind == VineKind.C else _DState(u)

    max_trees = n - 1 if trunc is None or isinstance(trunc, str) else int(trunc)
    penalty = _penalty(trunc, n_obs) if isinstance(trunc, str) else None
    trees: list[tuple] = []
    ic_prev = None
    for j in range(max_trees):
        if j > 0:
            state.advance(trees[-1])
        if kind == VineKind.C and greedy and 0 < j < n - 2:
            first = _root_position(state.v)
            if first:
                state.reorder(first)
                order.insert(j, order.pop(j + first))
                # earlier trees index their edges by position, so move the
                # edge of the new root along with it
                for t in range(j):
                    edges = list(trees[t])
                    edges.insert(j - t - 1, edges.pop(j - t - 1 + first))
                    trees[t] = tuple(edges)
        cops, loglik = [], 0.0
        for a, b in state.edges():
            c = select_copula(a, b, config.candidates, seed=config.seed,
                              level=config.independence_level)
            cops.append(c)
            if c.family != Family.PRODUCT:
                loglik += float(np.sum(c.logpdf(a, b)))
        if penalty is not None:
            k = sum(c.n_params for c in cops)
            ic = (0.0 if ic_prev is None else ic_prev) - 2.0 * loglik + penalty * k
            if ic_prev is not None and not ic < ic_prev:
                break
            ic_prev = ic
        trees.append(tuple(cops))
    level = len(trees)
    for j in range(level, n - 1):
        trees.append((_PRODUCT,) * (n - 1 - j))
    return VineModel(VineStructure(kind, tuple(order)), tuple(trees), level, tuple(margins))


# -- evaluation --------------------------------------------------------------
def _pair_log_terms(model: VineModel, u, up_to_tree: int | None = None) -> np.ndarray:
    """Per-point log pair-copula density summed within each tree.

    ``u`` holds distribution-function values in vine position order. The
    result has shape ``(trees, N)``.
    """
    n = model.dimension
    trees = model.pair_copulas
    depth = min(model.truncation_level if up_to_tree is None else up_to_tree, n - 1)
    out = np.zeros((n - 1, u.shape[0]))
    if depth == 0:
        return out
    state = _CState(u) if model.kind == VineKind.C else _DState(u)
    for j in range(depth):
        if j > 0:
            state.advance(trees[j - 1])
        for c, (a, b) in zip(trees[j], state.edges()):
            if c.family != Family.PRODUCT:
                out[j] += c.logpdf(a, b)
    return out


def _to_positions(model: VineModel, x) -> np.ndarray:
    if not model.margins:
        raise ValueError("model has no margins")
    cols = [model.margins[k].cdf(x[:, k]) for k in model.structure.order]
    return _clamp(np.column_stack(cols))


def log_density(model: VineModel, x):
    """Joint log density at one point (shape ``(n,)``) or many (shape ``(M, n)``).

    Margin distribution values are clamped into ``[1e-12, 1 - 1e-12]``.

    Raises
    ------
    FloatingPointError
        If the result is not finite.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != model.dimension:
        raise ValueError("point dimension does not match the model")
    marg = sum(m.logpdf(x[:, k]) for k, m in enumerate(model.margins))
    total = marg + _pair_log_terms(model, _to_positions(model, x)).sum(axis=0)
    if not np.all(np.isfinite(total)):
        raise FloatingPointError("log density is not finite")
    return float(total[0]) if single else total


def information_criterion(model: VineModel, data, mode: str, up_to_tree: int) -> float:
    """AIC or BIC of the pair copulas in trees ``1 .. up_to_tree``.

    ``AIC = -2 l + 2 k`` and ``BIC = -2 l + k ln N``. ``l`` is the copula
    log-likelihood of ``data`` and ``k`` the number of free copula
    parameters in those trees. Margins are excluded.
    """
    mode = mode.lower()
    if mode not in ("aic", "bic"):
        raise ValueError(f"unknown criterion {mode!r}")
    n = model.dimension
    if not 1 <= up_to_tree <= n - 1:
        raise ValueError(f"up_to_tree must lie in 1..{n - 1}")
    x = np.atleast_2d(np.asarray(data, dtype=float))
    terms = _pair_log_terms(model, _to_positions(model, x), up_to_tree)
    loglik = float(terms.sum())
    return -2.0 * loglik + _penalty(mode, x.shape[0]) * model.n_params(up_to_tree)


# -- sampling ----------------------------------------------------------------
def _sample_c(model: VineModel, w) -> np.ndarray:
    n = model.dimension
    trees, depth = model.pair_copulas, model.truncation_level
    u = np.empty_like(w)
    u[:, 0] = w[:, 0]
    for k in range(1, n):
        v = w[:, k]
        for j in range(min(k, depth) - 1, -1, -1):
            c = trees[j][k - j - 1]
            if c.family != Family.PRODUCT:
                v = _clamp(c.h_inv(v, w[:, j]))
        u[:, k] = v
    return u


def _sample_d(model: VineModel, w) -> np.ndarray:
    n = model.dimension
    trees, depth = model.pair_copulas, model.truncation_level
    u = np.empty_like(w)
    u[:, 0] = w[:, 0]
    # left[j] holds F(x_{k-1-j} | x_{k-j} .. x_{k-1}) for the previous position
    left = [w[:, 0]]
    for k in range(1, n):
        top = min(k, depth)
        r = w[:, k]
        right = [None] * top
        for j in range(top - 1, -1, -1):
            c = trees[j][k - j - 1]
            if c.family != Family.PRODUCT:
                r = _clamp(c.h_first_inv(r, left[j]))
            right[j] = r
        u[:, k] = r
        if k == n - 1:
            break
        new_left = [r]
        for j in range(min(top, depth - 1)):
            c = trees[j][k - j - 1]
            new_left.append(left[j] if c.family == Family.PRODUCT
                            else _clamp(c.h(left[j], right[j])))
        left = new_left
    return u


def sample_uniform(model: VineModel, count: int, rng=None) -> np.ndarray:
    """Draw copula samples (uniform margins), columns in variable order."""
    if count < 1:
        raise ValueError("count must be positive")
    rng = np.random.default_rng(rng)
    w = _clamp(rng.random((count, model.dimension)))
    return _positions_to_columns(model, _sample_from_w(model, w))


def _sample_from_w(model: VineModel, w) -> np.ndarray:
    if model.dimension == 1:
        return w.copy()
    return _sample_c(model, w) if model.kind == VineKind.C else _sample_d(model, w)


def _positions_to_columns(model: VineModel, u) -> np.ndarray:
    out = np.empty_like(u)
    out[:, list(model.structure.order)] = u
    return out


def sample(model: VineModel, count: int, rng=None) -> np.ndarray:
    """Draw ``count`` points from the fitted joint distribution.

    Independent uniforms are pushed through the inverse conditional
    distributions of the vine and then through the margin quantiles.
    """
    u = sample_uniform(model, count, rng)
    return np.column_stack([m.quantile(u[:, k]) for k, m in enumerate(model.margins)])
