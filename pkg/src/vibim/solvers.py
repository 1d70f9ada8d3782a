"""Group LASSO / SCAD / MCP regularization paths by group coordinate descent.

Each group block is centred and orthonormalized (``Z_g' Z_g / n = I``) so
that a block update is a closed-form thresholding of the block gradient.
The penalized problem solved on that scale is::

    (1 / 2n) * ||y_c - Z theta||^2 + sum_g P(||theta_g||; lambda * sqrt(|I_g|))

with ``P`` the LASSO, SCAD(a) or MCP(gamma) penalty. Coefficients are mapped
back to the original column scale after solving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numba
import numpy as np
from scipy import sparse

from .encoding import GroupedDesign
from .regression import criteria, fit_ols

__all__ = [
    "Penalty",
    "PenaltySpec",
    "SolverPath",
    "PathStep",
    "Selection",
    "StandardizedDesign",
    "AllConstantDesign",
    "standardize",
    "lambda_grid",
    "fit_path",
    "select_by_cv",
    "select_by_bic",
    "model_of_size",
    "penalized_objective",
]


class AllConstantDesign(ValueError):
    """Every column of the design has zero variance."""


class Penalty(str, Enum):
    LASSO = "lasso"
    SCAD = "scad"
    MCP = "mcp"


_PENALTY_CODE = {Penalty.LASSO: 0, Penalty.SCAD: 1, Penalty.MCP: 2}


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty family and path settings.

    ``shape`` is SCAD's ``a`` (default 3.7) or MCP's ``gamma`` (default 3).
    ``lambda_grid=None`` asks :func:`fit_path` to build the default grid of
    ``n_lambda`` log-spaced values.
    """

    family: Penalty = Penalty.LASSO
    shape: float | None = None
    lambda_grid: tuple | None = None
    n_lambda: int = 100
    lambda_min_ratio: float | None = None
    standardize: bool = True
    tol: float = 1e-7
    max_sweeps: int = 10_000
    max_active_columns: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", Penalty(self.family))
        if self.shape is None:
            default = {Penalty.LASSO: 0.0, Penalty.SCAD: 3.7, Penalty.MCP: 3.0}[self.family]
            object.__setattr__(self, "shape", default)
        if self.family is Penalty.SCAD and not self.shape > 2:
            raise ValueError("SCAD requires a > 2")
        if self.family is Penalty.MCP and not self.shape > 1:
            raise ValueError("MCP requires gamma > 1")
        if self.lambda_grid is not None:
            grid = tuple(float(v) for v in self.lambda_grid)
            if not grid or any(v < 0 for v in grid) or any(a <= b for a, b in zip(grid, grid[1:])):
                raise ValueError("lambda_grid must be strictly descending and non-negative")
            object.__setattr__(self, "lambda_grid", grid)
        if self.n_lambda < 1:
            raise ValueError("n_lambda must be >= 1")

    @classmethod
    def lasso(cls, **kw) -> "PenaltySpec":
        return cls(Penalty.LASSO, **kw)

    @classmethod
    def scad(cls, a: float = 3.7, **kw) -> "PenaltySpec":
        return cls(Penalty.SCAD, shape=a, **kw)

    @classmethod
    def mcp(cls, gamma: float = 3.0, **kw) -> "PenaltySpec":
        return cls(Penalty.MCP, shape=gamma, **kw)


DEFAULT_SPECS = (PenaltySpec.lasso(), PenaltySpec.scad(), PenaltySpec.mcp())


@dataclass(frozen=True, eq=False)
class StandardizedDesign:
    """Centred, group-orthonormalized copy of a design.

    ``ZT`` is stored transposed (one contiguous row per internal column).
    Group ``g`` occupies rows ``start[g]:start[g] + size[g]`` of ``ZT``
    (``size[g] == 0`` for groups made only of constant columns). ``back`` is
    the sparse block-diagonal map ``beta = back @ theta`` to the original
    scale and ``owner[j]`` the group of internal column ``j``.
    """

    ZT: np.ndarray
    start: np.ndarray
    size: np.ndarray
    multiplier: np.ndarray
    transforms: tuple
    column_means: np.ndarray
    back: sparse.csr_matrix
    owner: np.ndarray
    design: GroupedDesign

    @property
    def n(self) -> int:
        return self.ZT.shape[1]

    def to_original(self, thetas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Map rows of internal coefficients to ``(betas, offsets)``; intercept = ybar - offset."""
        thetas = np.atleast_2d(thetas)
        betas = np.asarray((self.back @ thetas.T).T)
        return betas, betas @ self.column_means

    def group_norms(self, thetas: np.ndarray) -> np.ndarray:
        thetas = np.atleast_2d(thetas)
        out = np.zeros((thetas.shape[0], self.design.n_groups))
        for k in range(thetas.shape[0]):
            out[k] = np.sqrt(np.bincount(self.owner, thetas[k] ** 2, minlength=out.shape[1]))
        return out


def standardize(design: GroupedDesign, rank_tol: float = 1e-10) -> StandardizedDesign:
    """Centre every group block and rotate it to orthonormal columns.

    Constant columns are dropped; a group whose centred block is rank
    deficient keeps only its non-null directions.
    """
    X = design.matrix
    n = X.shape[0]
    means = X.mean(axis=0)
    blocks, transforms = [], []
    start = np.zeros(design.n_groups, dtype=np.int64)
    size = np.zeros(design.n_groups, dtype=np.int64)
    mult = np.ones(design.n_groups)
    pos = 0
    for g, cols in enumerate(design.groups):
        cols = np.asarray(cols)[~design.constant[cols]]
        start[g] = pos
        mult[g] = math.sqrt(max(len(cols), 1))
        if cols.size == 0:
            transforms.append(None)
            continue
        Xc = (X[:, cols] - means[cols]) / math.sqrt(n)
        if cols.size == 1:
            s = float(np.sqrt(Xc[:, 0] @ Xc[:, 0]))
            if s <= 0:
                transforms.append(None)
                continue
            Z = Xc / s
            M = np.array([[1.0 / s]])
        else:
            U, d, Vt = np.linalg.svd(Xc, full_matrices=False)
            keep = d > rank_tol * max(d[0], 1e-300)
            if not keep.any():
                transforms.append(None)
                continue
            Z = U[:, keep]
            M = Vt[keep].T / d[keep]
        blocks.append(Z.T * math.sqrt(n))
        transforms.append((cols, M))
        size[g] = Z.shape[1]
        pos += Z.shape[1]
    if pos == 0:
        raise AllConstantDesign("all design columns are constant")
    ZT = np.ascontiguousarray(np.vstack(blocks))
    rows, cols_, vals = [], [], []
    owner = np.empty(pos, dtype=np.int64)
    for g, T in enumerate(transforms):
        if T is None:
            continue
        cols, M = T
        s = start[g]
        owner[s : s + size[g]] = g
        rr, cc = np.meshgrid(cols, np.arange(s, s + size[g]), indexing="ij")
        rows.append(rr.ravel())
        cols_.append(cc.ravel())
        vals.append(M.ravel())
    back = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols_))),
        shape=(design.n_columns, pos),
    )
    return StandardizedDesign(ZT, start, size, mult, tuple(transforms), means, back, owner, design)


_ANDERSON = 5  # sweeps combined per extrapolation


@numba.njit(cache=True)
def _block_score(ZT, r, s, k, n):
    acc = 0.0
    for j in range(s, s + k):
        d = 0.0
        for i in range(n):
            d += ZT[j, i] * r[i]
        d /= n
        acc += d * d
    return math.sqrt(acc)


@numba.njit(cache=True)
def _lambda_max(ZT, r, start, size, mult):
    n = r.shape[0]
    best = 0.0
    for g in range(start.shape[0]):
        if size[g] == 0:
            continue
        v = _block_score(ZT, r, start[g], size[g], n) / mult[g]
        if v > best:
            best = v
    return best


@numba.njit(cache=True)
def _shrink(znorm, lam, m, code, shape):
    """Block-norm after thresholding; ``lam * m`` is the group's lambda."""
    if znorm / m <= lam:
        return 0.0
    lg = lam * m
    if code == 0:
        return max(znorm - lg, 0.0)
    if code == 2:
        if znorm <= shape * lg:
            return max(znorm - lg, 0.0) / (1.0 - 1.0 / shape)
        return znorm
    if znorm <= 2.0 * lg:
        return max(znorm - lg, 0.0)
    if znorm <= shape * lg:
        return max(znorm - shape * lg / (shape - 1.0), 0.0) / (1.0 - 1.0 / (shape - 1.0))
    return znorm


@numba.njit(cache=True)
def _penalty_value(t, lg, code, shape):
    if code == 0:
        return lg * t
    if code == 2:
        if t <= shape * lg:
            return lg * t - t * t / (2.0 * shape)
        return 0.5 * shape * lg * lg
    if t <= lg:
        return lg * t
    if t <= shape * lg:
        return (2.0 * shape * lg * t - t * t - lg * lg) / (2.0 * (shape - 1.0))
    return 0.5 * lg * lg * (shape + 1.0)


@numba.njit(cache=True)
def _objective(r, theta, start, size, mult, lam, code, shape):
    n = r.shape[0]
    val = 0.5 * (r @ r) / n
    for g in range(start.shape[0]):
        k = size[g]
        if k == 0:
            continue
        t = 0.0
        for j in range(start[g], start[g] + k):
            t += theta[j] * theta[j]
        t = math.sqrt(t)
        if t > 0.0:
            val += _penalty_value(t, lam * mult[g], code, shape)
    return val


@numba.njit(cache=True)
def _update_group(ZT, r, theta, g, start, size, mult, lam, code, shape, z):
    """Exact block minimization for group ``g``; returns max |change|."""
    n = r.shape[0]
    s = start[g]
    k = size[g]
    zn = 0.0
    for a in range(k):
        d = 0.0
        for i in range(n):
            d += ZT[s + a, i] * r[i]
        z[a] = d / n + theta[s + a]
        zn += z[a] * z[a]
    zn = math.sqrt(zn)
    t = _shrink(zn, lam, mult[g], code, shape)
    fac = t / zn if zn > 0.0 else 0.0
    change = 0.0
    for a in range(k):
        new = fac * z[a]
        delta = new - theta[s + a]
        if delta != 0.0:
            for i in range(n):
                r[i] -= delta * ZT[s + a, i]
            theta[s + a] = new
            if abs(delta) > change:
                change = abs(delta)
    return change


@numba.njit(cache=True)
def _extrapolate(ZT, yc, r, theta, widx, hist, start, size, mult, lam, code, shape):
    """Anderson step over the stored sweeps; kept only if the objective drops."""
    K = hist.shape[0] - 1
    m = widx.shape[0]
    U = hist[1:] - hist[:-1]
    C = U @ U.T
    tr = 0.0
    for i in range(K):
        tr += C[i, i]
    if tr <= 0.0:
        return
    for i in range(K):
        C[i, i] += 1e-10 * tr
    c = np.linalg.solve(C, np.ones(K))
    c /= c.sum()
    extr = np.zeros(m)
    for i in range(K):
        extr += c[i] * hist[i + 1]
    r_new = yc.copy()
    for a in range(m):
        v = extr[a]
        if v != 0.0:
            row = ZT[widx[a]]
            for i in range(r_new.shape[0]):
                r_new[i] -= v * row[i]
    old = theta[widx].copy()
    before = _objective(r, theta, start, size, mult, lam, code, shape)
    theta[widx] = extr
    after = _objective(r_new, theta, start, size, mult, lam, code, shape)
    if after < before:
        r[:] = r_new
    else:
        theta[widx] = old


@numba.njit(cache=True)
def _solve_path(ZT, yc, start, size, mult, lambdas, code, shape, tol, max_sweeps,
                max_cols, trace):
    P, n = ZT.shape
    G = start.shape[0]
    L = lambdas.shape[0]
    theta = np.zeros(P)
    r = yc.copy()
    thetas = np.zeros((L, P))
    iters = np.zeros(L, dtype=np.int64)
    conv = np.zeros(L, dtype=np.bool_)
    working = np.zeros(G, dtype=np.bool_)
    z = np.zeros(max(1, np.max(size)))
    objs = np.zeros(L * 256 if trace else 1)
    obj_step = np.zeros(L * 256 if trace else 1, dtype=np.int64)
    n_obj = 0
    done = L
    for l in range(L):
        lam = lambdas[l]
        sweeps = 0
        ok = False
        while sweeps < max_sweeps:
            # cycle the working set to convergence
            inner_ok = False
            m = 0
            for g in range(G):
                if working[g]:
                    m += size[g]
            widx = np.empty(m, dtype=np.int64)
            m = 0
            for g in range(G):
                if working[g]:
                    for j in range(start[g], start[g] + size[g]):
                        widx[m] = j
                        m += 1
            hist = np.empty((_ANDERSON + 1, m))
            nh = 0
            while sweeps < max_sweeps:
                sweeps += 1
                chg = 0.0
                for g in range(G):
                    if working[g] and size[g] > 0:
                        c = _update_group(ZT, r, theta, g, start, size, mult, lam, code, shape, z)
                        if c > chg:
                            chg = c
                if trace and n_obj < objs.shape[0]:
                    objs[n_obj] = _objective(r, theta, start, size, mult, lam, code, shape)
                    obj_step[n_obj] = l
                    n_obj += 1
                big = 0.0
                for j in range(P):
                    if abs(theta[j]) > big:
                        big = abs(theta[j])
                if chg < tol * (1.0 + big):
                    inner_ok = True
                    break
                if m > 0:
                    hist[nh] = theta[widx]
                    nh += 1
                    if nh == _ANDERSON + 1:
                        nh = 0
                        _extrapolate(ZT, yc, r, theta, widx, hist, start, size, mult,
                                     lam, code, shape)
            # scan the remaining groups; any that move join the working set
            sweeps += 1
            moved = False
            for g in range(G):
                if working[g] or size[g] == 0:
                    continue
                if _block_score(ZT, r, start[g], size[g], n) / mult[g] > lam:
                    c = _update_group(ZT, r, theta, g, start, size, mult, lam, code, shape, z)
                    working[g] = True
                    if c > 0.0:
                        moved = True
            if trace and n_obj < objs.shape[0]:
                objs[n_obj] = _objective(r, theta, start, size, mult, lam, code, shape)
                obj_step[n_obj] = l
                n_obj += 1
            if not moved:
                ok = inner_ok
                break
        thetas[l] = theta
        iters[l] = sweeps
        conv[l] = ok
        ncols = 0
        for g in range(G):
            nz = False
            for j in range(start[g], start[g] + size[g]):
                if theta[j] != 0.0:
                    nz = True
                    break
            if nz:
                ncols += size[g]
            else:
                working[g] = False
        if ncols >= max_cols:
            done = l + 1
            break
    return thetas[:done], iters[:done], conv[:done], objs[:n_obj], obj_step[:n_obj]


@dataclass(frozen=True)
class PathStep:
    lam: float
    beta: np.ndarray
    intercept: float
    active_groups: frozenset
    converged: bool
    iterations: int


@dataclass(frozen=True, eq=False)
class SolverPath:
    """Fitted path; row ``k`` of every array belongs to ``lambdas[k]``.

    ``group_norms`` holds the block norms on the standardized scale. The path
    may be shorter than the requested grid if it stopped at saturation.
    """

    spec: PenaltySpec
    lambdas: np.ndarray
    betas: np.ndarray
    intercepts: np.ndarray
    group_norms: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray
    grid: np.ndarray
    objective_trace: np.ndarray = field(default=None)
    trace_step: np.ndarray = field(default=None)

    def __len__(self) -> int:
        return self.lambdas.shape[0]

    def active(self, k: int) -> frozenset:
        return frozenset(int(g) for g in np.flatnonzero(self.group_norms[k] > 0))

    @property
    def active_sets(self) -> list:
        return [self.active(k) for k in range(len(self))]

    @property
    def steps(self) -> list:
        return [
            PathStep(float(self.lambdas[k]), self.betas[k], float(self.intercepts[k]),
                     self.active(k), bool(self.converged[k]), int(self.iterations[k]))
            for k in range(len(self))
        ]

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Predictions for every step, shape ``(len(self), X.shape[0])``."""
        return self.intercepts[:, None] + self.betas @ X.T


def _min_ratio(n: int, p_star: int) -> float:
    return 1e-4 if n > p_star else 0.05


def lambda_grid(design: GroupedDesign, response, n_lambda: int = 100,
                min_ratio: float | None = None, _std: StandardizedDesign | None = None) -> np.ndarray:
    """Descending log-spaced grid from ``lambda_max`` down to ``min_ratio * lambda_max``.

    ``lambda_max`` is the smallest value at which every group is zero.
    """
    std = _std if _std is not None else standardize(design)
    y = np.asarray(response, dtype=float)
    yc = y - y.mean()
    lmax = _lambda_max(std.ZT, yc, std.start, std.size, std.multiplier)
    if not lmax > 0:
        raise ValueError("response is constant; lambda_max is zero")
    if n_lambda == 1:
        return np.array([lmax])
    ratio = _min_ratio(design.n, design.n_columns) if min_ratio is None else min_ratio
    grid = np.exp(np.linspace(math.log(lmax), math.log(lmax * ratio), n_lambda))
    grid[0], grid[-1] = lmax, lmax * ratio
    return grid


def fit_path(design: GroupedDesign, response, spec: PenaltySpec = PenaltySpec(),
             trace: bool = False) -> SolverPath:
    """Warm-started path over ``spec``'s lambda grid.

    Stops early (keeping the step that crossed) once the active groups span
    ``spec.max_active_columns`` internal columns, ``n`` by default. With
    ``trace=True`` the penalized objective after each sweep is recorded.
    """
    y = np.asarray(response, dtype=float)
    if y.shape[0] != design.n:
        raise ValueError("response length does not match design rows")
    std = standardize(design)
    if spec.lambda_grid is not None:
        grid = np.asarray(spec.lambda_grid, dtype=float)
    else:
        grid = lambda_grid(design, y, spec.n_lambda, spec.lambda_min_ratio, _std=std)
    ybar = y.mean()
    yc = y - ybar
    max_cols = spec.max_active_columns if spec.max_active_columns is not None else design.n
    thetas, iters, conv, objs, obj_step = _solve_path(
        std.ZT, yc, std.start, std.size, std.multiplier, grid,
        _PENALTY_CODE[spec.family], float(spec.shape), spec.tol, spec.max_sweeps,
        int(max_cols), trace,
    )
    L = thetas.shape[0]
    betas, offsets = std.to_original(thetas)
    intercepts = ybar - offsets
    norms = std.group_norms(thetas)
    return SolverPath(spec, grid[:L].copy(), betas, intercepts, norms, conv, iters, grid,
                      objs if trace else None, obj_step if trace else None)


def penalized_objective(design: GroupedDesign, response, beta: np.ndarray, lam: float,
                        spec: PenaltySpec) -> float:
    """Penalized objective of original-scale ``beta``, evaluated on the standardized scale."""
    std = standardize(design)
    y = np.asarray(response, dtype=float)
    yc = y - y.mean()
    Xc = design.matrix - std.column_means
    r = yc - Xc @ beta
    theta = np.zeros(std.ZT.shape[0])
    for g, T in enumerate(std.transforms):
        if T is None:
            continue
        cols, _ = T
        s, k = std.start[g], std.size[g]
        # Z_g theta_g = Xc_g beta_g and Z_g has orthonormal columns (scaled by sqrt n)
        theta[s : s + k] = std.ZT[s : s + k] @ (Xc[:, cols] @ beta[cols]) / design.n
    return float(_objective(r, theta, std.start, std.size, std.multiplier, lam,
                            _PENALTY_CODE[spec.family], float(spec.shape)))


@dataclass(frozen=True)
class Selection:
    """Group set picked from a path, with the step it came from."""

    groups: frozenset
    index: int
    lam: float
    score: float


def select_by_cv(design: GroupedDesign, response, spec: PenaltySpec = PenaltySpec(),
                 folds: int = 10, rng=None) -> Selection:
    """Active set at the lambda minimizing mean out-of-fold squared error."""
    y = np.asarray(response, dtype=float)
    n = design.n
    if not 2 <= folds <= n:
        raise ValueError("need 2 <= folds <= n")
    rng = np.random.default_rng(rng)
    full = fit_path(design, y, spec)
    grid = full.grid
    fixed = PenaltySpec(spec.family, spec.shape, tuple(grid), spec.n_lambda,
                        spec.lambda_min_ratio, spec.standardize, spec.tol,
                        spec.max_sweeps, spec.max_active_columns)
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[rng.permutation(n)] = np.arange(n) % folds
    sq_err = np.full((n, len(grid)), np.nan)
    for f in range(folds):
        test = np.flatnonzero(fold_of == f)
        train = np.flatnonzero(fold_of != f)
        sub = design.take_rows(train)
        try:
            path = fit_path(sub, y[train], fixed)
        except (AllConstantDesign, ValueError):
            continue
        pred = path.predict(design.matrix[test])
        sq_err[test, : len(path)] = (pred - y[test]).T ** 2
    cv = sq_err.mean(axis=0)[: len(full)]
    if not np.isfinite(cv).any():
        k = 0
    else:
        k = int(np.nanargmin(np.where(np.isfinite(cv), cv, np.nan)))
    return Selection(full.active(k), k, float(full.lambdas[k]), float(cv[k]))


def select_by_bic(design: GroupedDesign, response, spec: PenaltySpec = PenaltySpec(),
                  path: SolverPath | None = None) -> Selection:
    """Path step whose OLS refit on the active set has the smallest BIC."""
    y = np.asarray(response, dtype=float)
    path = fit_path(design, y, spec) if path is None else path
    best = None
    seen = {}
    for k in range(len(path)):
        groups = path.active(k)
        if groups not in seen:
            cols = design.columns_of(groups)
            if cols.size >= design.n - 1:
                seen[groups] = math.inf
            else:
                fit = fit_ols(design, cols, y)
                seen[groups] = criteria(fit, cols.size, design.n_columns).bic
        if best is None or seen[groups] < best[0]:
            best = (seen[groups], k)
    score, k = best
    return Selection(path.active(k), k, float(path.lambdas[k]), float(score))


def model_of_size(path: SolverPath, size: int) -> frozenset | None:
    """Group set of exactly ``size`` groups taken from the path.

    The first step with exactly ``size`` active groups is used. Otherwise the
    first step with more groups is truncated to its ``size`` largest
    standardized block norms. Returns ``None`` if the path never gets that big.
    """
    counts = (path.group_norms > 0).sum(axis=1)
    exact = np.flatnonzero(counts == size)
    if exact.size:
        return path.active(int(exact[0]))
    over = np.flatnonzero(counts > size)
    if not over.size:
        return None
    norms = path.group_norms[int(over[0])]
    order = np.lexsort((np.arange(norms.size), -norms))
    return frozenset(int(g) for g in order[:size])
