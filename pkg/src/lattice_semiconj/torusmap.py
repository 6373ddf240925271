"""Continuous self-maps of the torus ``T^n = R^n / Z^n`` given as linear part plus displacement.

A :class:`TorusMap` is stored through one of its lifts,
``F(x) = A x + delta(x mod 1)``, where ``A`` is a unimodular integer matrix
and ``delta`` is a periodic :class:`GridFunction`. Orbits of words are always
evaluated by iterating these lifts pointwise; resampled compositions
(:func:`compose`, :func:`word_map`) exist for diagnostics only.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .errors import InvertDivergedError, SampleNotFiniteError
from .spectral import IntMatrix
from .words import Word, format_word, parse_word

INVERT_TOL = 1e-12
INVERT_MAX_ITER = 200


class GridFunction:
    """A continuous map ``T^d -> R^m`` sampled on the uniform grid ``k / res``.

    ``data`` has shape ``(*res, m)``; axis 0 varies slowest. Evaluation is
    periodic multilinear interpolation and reproduces the samples exactly at
    grid points.
    """

    def __init__(self, data: np.ndarray):
        data = np.array(data, dtype=float)
        if data.ndim < 2:
            raise ValueError("data must have shape (*res, m)")
        if any(r < 2 for r in data.shape[:-1]):
            raise ValueError(f"every axis needs at least 2 samples, got res={data.shape[:-1]}")
        if not np.all(np.isfinite(data)):
            raise SampleNotFiniteError("grid data contains non-finite samples")
        data.setflags(write=False)
        self.data = data

    @classmethod
    def zeros(cls, res: Sequence[int], m: int) -> "GridFunction":
        return cls(np.zeros((*res, m)))

    @property
    def res(self) -> tuple[int, ...]:
        return tuple(self.data.shape[:-1])

    @property
    def d(self) -> int:
        return self.data.ndim - 1

    @property
    def m(self) -> int:
        return self.data.shape[-1]

    def points(self) -> np.ndarray:
        return grid_points(self.res)

    def values(self) -> np.ndarray:
        """Samples flattened to shape ``(prod(res), m)`` in grid-point order."""
        return self.data.reshape(-1, self.m)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return grid_eval(self, x)

    def sup_norm(self) -> float:
        return float(np.linalg.norm(self.values(), axis=1).max())

    def __repr__(self):
        return f"GridFunction(d={self.d}, m={self.m}, res={self.res})"


def grid_points(res: Sequence[int]) -> np.ndarray:
    """Grid points ``k / res`` as an array of shape ``(prod(res), d)``, axis 0 slowest."""
    idx = np.indices(tuple(res)).reshape(len(res), -1).T
    return idx / np.asarray(res, dtype=float)


def _cell_coords(res: tuple[int, ...], x: np.ndarray):
    r = np.asarray(res, dtype=float)
    frac = x - np.floor(x)
    u = frac * r
    snap = np.rint(u)
    near = np.abs(u - snap) <= 8 * np.finfo(float).eps * r
    u = np.where(near, snap, u)
    i0 = np.floor(u)
    t = u - i0
    i0 = i0.astype(np.int64) % np.asarray(res)
    return i0, t


def _strides(res: tuple[int, ...]) -> np.ndarray:
    return np.array([int(np.prod(res[k + 1:])) for k in range(len(res))], dtype=np.int64)


def _interp(g: GridFunction, X: np.ndarray, with_jac: bool = False):
    res = g.res
    d = g.d
    i0, t = _cell_coords(res, X)
    strides = _strides(res)
    rr = np.asarray(res)
    # per-axis flat offsets of the lower and upper cell faces
    lo = [i0[:, k] * strides[k] for k in range(d)]
    hi = [((i0[:, k] + 1) % rr[k]) * strides[k] for k in range(d)]
    wl = [1.0 - t[:, k] for k in range(d)]
    wh = [t[:, k] for k in range(d)]
    flat = g.values()
    jac = np.zeros((X.shape[0], g.m, d)) if with_jac else None
    corners = {}
    for corner in itertools.product((0, 1), repeat=d):
        vals = flat[sum(hi[k] if corner[k] else lo[k] for k in range(d))]
        corners[corner] = vals
        if with_jac:
            ws = [wh[k] if corner[k] else wl[k] for k in range(d)]
            for j in range(d):
                dw = np.full(X.shape[0], rr[j] if corner[j] else -rr[j], dtype=float)
                for k in range(d):
                    if k != j:
                        dw = dw * ws[k]
                jac[:, :, j] += dw[:, None] * vals
    # nested lerps a + t (b - a): exact on constants and at grid points
    for k in reversed(range(d)):
        tk = t[:, k, None]
        corners = {c[:k]: corners[c[:k] + (0,)] + tk * (corners[c[:k] + (1,)] - corners[c[:k] + (0,)])
                   for c in corners if c[k] == 0}
    out = corners[()]
    return out, jac


def grid_eval(g: GridFunction, x: np.ndarray) -> np.ndarray:
    """Periodic multilinear interpolation of ``g`` at ``x`` (shape ``(d,)`` or ``(P, d)``)."""
    x = np.asarray(x, dtype=float)
    out, _ = _interp(g, np.atleast_2d(x))
    return out[0] if x.ndim == 1 else out


def grid_jacobian(g: GridFunction, x: np.ndarray) -> np.ndarray:
    """Derivative of the multilinear interpolant at ``x``; shape ``(P, m, d)``.

    On cell faces the one-sided derivative from the cell containing ``x`` is used.
    """
    return _interp(g, np.atleast_2d(np.asarray(x, dtype=float)), with_jac=True)[1]


def grid_sample(fn: Callable[[np.ndarray], np.ndarray], res: Sequence[int]) -> GridFunction:
    """Sample a vectorized ``fn: (P, d) -> (P, m)`` on the grid of resolution ``res``."""
    res = tuple(int(r) for r in res)
    if any(r < 2 for r in res):
        raise ValueError(f"every axis needs at least 2 samples, got res={res}")
    pts = grid_points(res)
    vals = np.asarray(fn(pts), dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    bad = ~np.all(np.isfinite(vals), axis=1)
    if bad.any():
        p = pts[np.argmax(bad)]
        raise SampleNotFiniteError(f"non-finite sample at grid point {p.tolist()}", point=p)
    return GridFunction(vals.reshape(*res, vals.shape[1]))


def lipschitz_bound(g: GridFunction) -> float:
    """Lipschitz constant (Euclidean norms) of the multilinear interpolant.

    Inside a cell each Jacobian column is a convex combination of the forward
    differences along that axis, and the Jacobian is affine in each cell
    coordinate separately, so its largest operator norm is attained at a cell
    corner. Evaluating all corners gives the exact constant.
    """
    res = g.res
    d = g.d
    r = np.asarray(res, dtype=float)
    diffs = [(np.roll(g.data, -1, axis=i) - g.data) * r[i] for i in range(d)]
    best = 0.0
    for corner in itertools.product((0, 1), repeat=d):
        cols = []
        for i in range(d):
            shift = tuple(-corner[k] if k != i else 0 for k in range(d))
            cols.append(np.roll(diffs[i], shift, axis=tuple(range(d))).reshape(-1, g.m))
        J = np.stack(cols, axis=2)
        if g.m == 1 or d == 1:
            nrm = np.linalg.norm(J.reshape(J.shape[0], -1), axis=1)
        else:
            nrm = np.linalg.norm(J, ord=2, axis=(1, 2))
        best = max(best, float(nrm.max()))
    return best


def interpolation_error_estimate(g: GridFunction) -> float:
    """Second-difference estimate of the multilinear interpolation error of ``g``.

    Linear interpolation of a C^2 function on a step ``h`` errs by at most
    ``h^2 / 8 * sup|f''|``; ``h^2 f''`` is estimated by the periodic second
    difference along each axis and the axes are summed.
    """
    total = 0.0
    for i in range(g.d):
        dd = np.roll(g.data, -1, axis=i) - 2 * g.data + np.roll(g.data, 1, axis=i)
        total += float(np.linalg.norm(dd.reshape(-1, g.m), axis=1).max()) / 8.0
    return total


@dataclass(frozen=True, eq=False)
class TorusMap:
    """Lift ``F(x) = A x + delta(x mod 1)``; ``delta=None`` means the linear map."""

    A: IntMatrix
    delta: GridFunction | None = None

    def __post_init__(self):
        if self.delta is not None and (self.delta.d != self.A.n or self.delta.m != self.A.n):
            raise ValueError(
                f"displacement must map T^{self.A.n} -> R^{self.A.n}, got {self.delta!r}"
            )

    @property
    def n(self) -> int:
        return self.A.n

    @cached_property
    def matrix(self) -> np.ndarray:
        return self.A.to_array()

    @cached_property
    def matrix_inv(self) -> np.ndarray:
        return self.A.inverse().to_array()

    @property
    def is_linear(self) -> bool:
        return self.delta is None

    def displacement(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.delta is None:
            return np.zeros_like(x)
        return grid_eval(self.delta, x)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return lift_eval(self, x)

    @cached_property
    def homeo(self) -> "HomeoReport":
        return homeo_condition(self)


def lift_eval(T: TorusMap, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x @ T.matrix.T + T.displacement(x)


def identity_map(n: int) -> TorusMap:
    return TorusMap(IntMatrix.identity(n))


@dataclass
class HomeoReport:
    lip_delta: float
    norm_a_inv: float
    sufficient: bool

    @property
    def contraction(self) -> float:
        return self.lip_delta * self.norm_a_inv


def homeo_condition(T: TorusMap) -> HomeoReport:
    """Sufficient test that ``T`` is a homeomorphism: ``Lip(delta) ||A^-1|| < 1``."""
    lip = 0.0 if T.delta is None else lipschitz_bound(T.delta)
    ninv = float(np.linalg.norm(T.matrix_inv, 2))
    return HomeoReport(lip, ninv, lip * ninv < 1.0)


def invert_point(
    T: TorusMap,
    y: np.ndarray,
    tol: float = INVERT_TOL,
    max_iter: int = INVERT_MAX_ITER,
) -> np.ndarray:
    """Solve ``F(x) = y`` on lifts.

    Uses the fixed-point iteration ``x <- A^-1 (y - delta(x))`` started at
    ``A^-1 y`` when the homeomorphism test certifies it is a contraction;
    otherwise a damped Newton iteration with the interpolant's Jacobian.
    Returns the first iterate with ``||F(x) - y|| <= tol`` for every point.
    """
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    Y = np.atleast_2d(y)
    Ainv = T.matrix_inv
    x = Y @ Ainv.T
    if T.delta is None:
        return x[0] if single else x
    if T.homeo.sufficient:
        x = _invert_fixed_point(T, Y, x, tol, max_iter)
    else:
        x = _invert_newton(T, Y, x, tol, max_iter)
    return x[0] if single else x


def _residual(T: TorusMap, x: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return lift_eval(T, x) - Y


def _invert_fixed_point(T, Y, x, tol, max_iter):
    Ainv = T.matrix_inv
    active = np.arange(Y.shape[0])
    for _ in range(max_iter + 1):
        r = np.linalg.norm(_residual(T, x[active], Y[active]), axis=1)
        active = active[r > tol]
        if active.size == 0:
            return x
        x[active] = (Y[active] - T.displacement(x[active])) @ Ainv.T
    raise InvertDivergedError(
        f"fixed-point inversion: {active.size} points above tol {tol:g} after {max_iter} iterations"
    )


def _invert_newton(T, Y, x, tol, max_iter):
    A = T.matrix
    active = np.arange(Y.shape[0])
    val, jac = _interp(T.delta, x, with_jac=True)
    r = x @ A.T + val - Y
    rn = np.linalg.norm(r, axis=1)
    for _ in range(max_iter + 1):
        keep = rn > tol
        active, r, rn, jac = active[keep], r[keep], rn[keep], jac[keep]
        if active.size == 0:
            return x
        step = np.linalg.solve(A[None, :, :] + jac, r[:, :, None])[:, :, 0]
        xa = x[active]
        lam = np.ones(active.size)
        trial = xa - step
        val, jac = _interp(T.delta, trial, with_jac=True)
        tr = trial @ A.T + val - Y[active]
        tn = np.linalg.norm(tr, axis=1)
        # backtracking: halve the step where it does not reduce the residual
        for _ in range(30):
            worse = tn >= rn
            if not worse.any():
                break
            lam = np.where(worse, lam / 2, lam)
            sub = np.nonzero(worse)[0]
            trial[sub] = xa[sub] - lam[sub, None] * step[sub]
            v2, j2 = _interp(T.delta, trial[sub], with_jac=True)
            tr[sub] = trial[sub] @ A.T + v2 - Y[active[sub]]
            tn[sub] = np.linalg.norm(tr[sub], axis=1)
            jac[sub] = j2
        x[active] = trial
        r, rn = tr, tn
    raise InvertDivergedError(
        f"Newton inversion: {active.size} points above tol {tol:g} after {max_iter} iterations"
    )


def compose(T1: TorusMap, T2: TorusMap, res: Sequence[int]) -> TorusMap:
    """``T1 o T2`` resampled on ``res``; exact at grid points."""
    if T1.n != T2.n:
        raise ValueError("dimension mismatch")
    A = T1.A @ T2.A
    if T1.is_linear and T2.is_linear:
        return TorusMap(A)

    def disp(x):
        return T2.displacement(x) @ T1.matrix.T + T1.displacement(lift_eval(T2, x))

    return TorusMap(A, grid_sample(disp, res))


def inverse_map(T: TorusMap, res: Sequence[int], tol: float = INVERT_TOL) -> TorusMap:
    """``T^-1`` resampled on ``res`` via :func:`invert_point`."""
    Ainv = T.A.inverse()
    if T.is_linear:
        return TorusMap(Ainv)
    Ai = Ainv.to_array()
    return TorusMap(Ainv, grid_sample(lambda y: invert_point(T, y, tol) - y @ Ai.T, res))


@dataclass(eq=False)
class ActionSpec:
    """Named generators of an action on ``T^n``; ``relations`` are for diagnostics only."""

    n: int
    names: list[str]
    generators: list[TorusMap]
    relations: list[Word] = field(default_factory=list)
    inverse_tol: float = INVERT_TOL

    def __post_init__(self):
        if len(self.names) != len(self.generators):
            raise ValueError("names and generators differ in length")
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"duplicate generator names {self.names}")
        for nm, g in zip(self.names, self.generators):
            if g.n != self.n:
                raise ValueError(f"generator {nm} has dimension {g.n}, expected {self.n}")

    @property
    def matrices(self) -> list[IntMatrix]:
        return [g.A for g in self.generators]

    def word(self, text: str) -> Word:
        return parse_word(text, self.names)

    def format_word(self, word: Word) -> str:
        return format_word(word, self.names)

    def generator(self, name: str) -> TorusMap:
        return self.generators[self.names.index(name)]


def letter_lift(spec: ActionSpec, letter: tuple[int, int], x: np.ndarray) -> np.ndarray:
    g, e = letter
    T = spec.generators[g]
    return lift_eval(T, x) if e > 0 else invert_point(T, x, spec.inverse_tol)


def word_lift(spec: ActionSpec, word: Word, x: np.ndarray) -> np.ndarray:
    """Lift of the word map at ``x``: letters applied right to left, pointwise."""
    x = np.asarray(x, dtype=float)
    for letter in reversed(word):
        x = letter_lift(spec, letter, x)
    return x


def word_map(spec: ActionSpec, word: Word, res: Sequence[int]) -> TorusMap:
    """Resampled map of ``word`` (left-to-right composition of generator maps)."""
    out = identity_map(spec.n)
    for g, e in word:
        T = spec.generators[g] if e > 0 else inverse_map(spec.generators[g], res, spec.inverse_tol)
        out = compose(out, T, res)
    return out
