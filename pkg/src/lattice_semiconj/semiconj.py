"""Solving for the correction ``phi2`` with ``psi = id + phi2`` equivariant.

For a generator lift ``F(x) = A x + alpha(x)`` the equivariance
``psi o F = A o psi`` is the functional equation

    phi2(x) = A^-1 phi2(F(x)) + A^-1 alpha(x).

Iterating it along the orbit of a word ``w`` and projecting onto the
expanding part ``E(w)`` gives the convergent series

    proj_E phi2(m) = sum_{i >= 1} A_w^-i proj_E alpha(w, F_w^{i-1}(m)),

which is truncated with a certified tail bound. Projections from several
words are combined by least squares.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BudgetExceededError, InsufficientSpanError
from .spectral import (
    DEFAULT_TOL_UNIT,
    RANK_DROP_TOL,
    Splitting,
    enumerate_word_matrices,
    first_hyperbolic_word,
    restricted_inverse_norms,
    restricted_inverse_powers,
    splitting,
    word_matrix,
)
from .torusmap import (
    ActionSpec,
    GridFunction,
    grid_eval,
    grid_points,
    interpolation_error_estimate,
    invert_point,
)
from .words import Word, inverse_word

DEFAULT_TOL_TAIL = 1e-8
DEFAULT_MAX_N = 200
DEFAULT_WORD_LEN = 4
# safety factor applied to the interpolation part of the error budget
BUDGET_HEADROOM = 10.0


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("SEMICONJ_THREADS", "1")))
    except ValueError:
        return 1


def map_points(fn, pts: np.ndarray, chunk: int = 16384) -> np.ndarray:
    """Apply a pointwise-vectorized ``fn`` over chunks of ``pts``; output order is fixed."""
    threads = _threads()
    if threads == 1 or pts.shape[0] <= chunk:
        return fn(pts)
    pieces = [pts[i:i + chunk] for i in range(0, pts.shape[0], chunk)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return np.concatenate(list(pool.map(fn, pieces)), axis=0)


class PsiLift:
    """The lift ``x -> x + phi2(x mod 1)`` of the semiconjugacy."""

    def __init__(self, phi2: GridFunction):
        self.phi2 = phi2

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x + grid_eval(self.phi2, x)


@dataclass(eq=False)
class CocycleField:
    word: Word
    values: GridFunction


def word_cocycle_eval(spec: ActionSpec, word: Word, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(alpha(w, x), F_w(x))`` on lifts for points ``x`` of shape ``(P, n)``.

    Built by ``alpha(g w', m) = alpha(g, w' m) + A_g alpha(w', m)`` with
    ``alpha(g^-1, y) = -A_g^-1 alpha(g, g^-1 y)``.
    """
    pos = np.array(x, dtype=float, copy=True)
    acc = np.zeros_like(pos)
    for g, e in reversed(word):
        T = spec.generators[g]
        if e > 0:
            a = T.displacement(pos)
            new = pos @ T.matrix.T + a
            acc = a + acc @ T.matrix.T
        else:
            new = invert_point(T, pos, spec.inverse_tol)
            a = new - pos @ T.matrix_inv.T
            acc = a + acc @ T.matrix_inv.T
        pos = new
    return acc, pos


def _as_res(res, n: int) -> tuple[int, ...]:
    return (int(res),) * n if np.isscalar(res) else tuple(int(r) for r in res)


def generator_cocycle(spec: ActionSpec, g: str | int, res=None) -> CocycleField:
    """``alpha(g, .)``; with ``f = id`` this is the generator's displacement."""
    i = spec.names.index(g) if isinstance(g, str) else int(g)
    T = spec.generators[i]
    if T.delta is not None:
        return CocycleField(((i, 1),), T.delta)
    return CocycleField(((i, 1),), GridFunction.zeros(_as_res(res or 2, spec.n), spec.n))


def word_cocycle(spec: ActionSpec, word: Word, res) -> CocycleField:
    if not word:
        raise ValueError("word must be nonempty")
    res = _as_res(res, spec.n)
    pts = grid_points(res)
    vals = map_points(lambda p: word_cocycle_eval(spec, word, p)[0], pts)
    return CocycleField(tuple(word), GridFunction(vals.reshape(*res, spec.n)))


def cocycle_sup_bound(spec: ActionSpec, word: Word) -> float:
    """Upper bound for ``sup_m ||alpha(w, m)||``.

    Interpolated values are convex combinations of samples, so the largest
    sample norm bounds a generator displacement; the recursion then adds
    ``||A_prefix|| sup||alpha(letter)||`` per letter.
    """
    mats = spec.matrices
    total = 0.0
    for j, (g, e) in enumerate(word):
        T = spec.generators[g]
        if T.delta is None:
            continue
        s = T.delta.sup_norm()
        if e < 0:
            s = np.linalg.norm(T.matrix_inv, 2) * (s + spec.inverse_tol)
        pref = word_matrix(mats, word[:j]).to_array()
        total += float(np.linalg.norm(pref, 2)) * s
    return total


@dataclass(eq=False)
class PartialSolution:
    word: Word
    splitting: Splitting
    values: GridFunction  # E-coordinates, m = dim E
    N_used: int
    tail_bound: float
    alpha_sup: float


def series_solve_on_E(
    spec: ActionSpec,
    word: Word,
    S: Splitting,
    tol_tail: float = DEFAULT_TOL_TAIL,
    max_N: int = DEFAULT_MAX_N,
    res=256,
) -> PartialSolution:
    """Truncated series for the E(w)-component of ``phi2`` at every grid point."""
    if S.dim_e == 0:
        raise ValueError("splitting has trivial expanding part")
    res = _as_res(res, spec.n)
    K = S.coords_e()
    alpha_sup = cocycle_sup_bound(spec, word) * float(np.linalg.norm(K, 2))
    pts = grid_points(res)
    if alpha_sup == 0.0:
        N, tail = 1, 0.0
    else:
        norms = restricted_inverse_norms(S, max_N)
        N = None
        for cand in range(1, max_N + 1):
            tail = norms.tail_after(cand) * alpha_sup
            if tail <= tol_tail:
                N = cand
                break
        if N is None:
            raise BudgetExceededError(
                f"tail bound {tail:.3e} > tol_tail {tol_tail:.1e} after max_N={max_N} terms "
                f"for word {spec.format_word(word)}",
                achieved_bound=tail,
            )
    powers = restricted_inverse_powers(S, N)

    def partial_sum(m: np.ndarray) -> np.ndarray:
        acc = np.zeros((m.shape[0], S.dim_e))
        y = m
        for i in range(N):
            a, img = word_cocycle_eval(spec, word, y)
            acc = acc + (a @ K.T) @ powers[i].T
            y = img - np.floor(img)
        return acc

    vals = map_points(partial_sum, pts)
    return PartialSolution(
        tuple(word), S, GridFunction(vals.reshape(*res, S.dim_e)), N, tail, alpha_sup
    )


@dataclass
class Assembly:
    phi2: GridFunction
    assembly_residual: float
    pinv_norm: float


def stacked_projectors(splittings: Sequence[Splitting]) -> np.ndarray:
    return np.vstack([S.coords_e() for S in splittings])


def _rank(M: np.ndarray) -> int:
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int((s > RANK_DROP_TOL * max(1.0, s[0])).sum())


def assemble(partials: Sequence[PartialSolution]) -> Assembly:
    """Least-squares reconstruction of ``phi2`` from its projections."""
    if not partials:
        raise InsufficientSpanError("no partial solutions")
    n = partials[0].splitting.n
    M = stacked_projectors([p.splitting for p in partials])
    if _rank(M) < n:
        raise InsufficientSpanError(
            f"stacked projectors have rank {_rank(M)} < {n}; add words (see the certificate)"
        )
    res = partials[0].values.res
    rhs = np.hstack([p.values.values() for p in partials])
    pinv = np.linalg.pinv(M)
    X = rhs @ pinv.T
    resid = np.linalg.norm(X @ M.T - rhs, axis=1).max()
    return Assembly(GridFunction(X.reshape(*res, n)), float(resid), float(np.linalg.norm(pinv, 2)))


def auto_words(
    spec: ActionSpec, max_word_len: int = DEFAULT_WORD_LEN, tol_unit: float = DEFAULT_TOL_UNIT
) -> list[Word]:
    """Solve words: ``{w, w^-1}`` for the first hyperbolic word, else greedy by assembly rank."""
    mats = spec.matrices
    w = first_hyperbolic_word(mats, max_word_len, tol_unit)
    if w is not None:
        return [w, inverse_word(w)]
    chosen, rows = [], np.zeros((0, spec.n))
    for w, m in enumerate_word_matrices(mats, max_word_len):
        S = splitting(m, tol_unit)
        if S.dim_e == 0:
            continue
        cand = np.vstack([rows, S.coords_e()])
        if _rank(cand) > _rank(rows):
            chosen.append(w)
            rows = cand
            if _rank(rows) == spec.n:
                return chosen
    raise InsufficientSpanError(
        f"words up to length {max_word_len} reach assembly rank {_rank(rows)} < {spec.n}"
    )


@dataclass
class Budget:
    """Error budget for the equivariance check of one generator."""

    tail: float
    interpolation: float
    inversion: float

    @property
    def total(self) -> float:
        return self.tail + self.interpolation + self.inversion


def error_budget(spec: ActionSpec, phi2: GridFunction, tail: float, max_word_len: int,
                 A: np.ndarray) -> Budget:
    """``tail + headroom * interpolation + inversion_tol * word length``.

    The interpolation part covers reading ``phi2`` between grid points,
    ``(1 + ||A||)`` times the error of ``phi2`` itself which is driven by the
    interpolated generator displacements, amplified by the Lipschitz
    constant of ``id + phi2``.
    """
    nA = float(np.linalg.norm(A, 2))
    interp_phi = interpolation_error_estimate(phi2)
    interp_delta = max(
        (interpolation_error_estimate(g.delta) for g in spec.generators if g.delta is not None),
        default=0.0,
    )
    interp = BUDGET_HEADROOM * (interp_phi * (1.0 + nA) + (1.0 + nA) * interp_delta)
    inversion = spec.inverse_tol * max(1, max_word_len) * (1.0 + nA)
    return Budget(tail * (1.0 + nA), interp, inversion)


@dataclass(eq=False)
class SemiconjugacyResult:
    phi2: GridFunction
    psi_lift: PsiLift
    solve_words: list[Word]
    partials: list[PartialSolution]
    assembly_residual: float
    tail_bound: float
    budgets: dict[str, Budget]
    word_budgets: list[Budget]
    residuals: "object"  # verify.ResidualReport
    verdict: str
    names: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.verdict == "OK"

    @property
    def truncation_N(self) -> list[int]:
        return [p.N_used for p in self.partials]

    @property
    def certified_tail_bounds(self) -> list[float]:
        return [p.tail_bound for p in self.partials]


def solve_full(
    spec: ActionSpec,
    words: Sequence[Word] | None = None,
    res=256,
    tol_tail: float = DEFAULT_TOL_TAIL,
    max_N: int = DEFAULT_MAX_N,
    max_word_len: int = DEFAULT_WORD_LEN,
    tol_unit: float = DEFAULT_TOL_UNIT,
) -> SemiconjugacyResult:
    """Solve for ``phi2`` and check equivariance for every generator.

    The verdict is ``OK`` when every generator's equivariance residual is
    within its budget and ``NO_SEMICONJUGACY`` otherwise. The series
    converges for each word regardless; only the cross-generator check can
    reveal that no equivariant map exists.
    """
    from .verify import equivariance_residual

    res = _as_res(res, spec.n)
    if words is None:
        words = auto_words(spec, max_word_len, tol_unit)
    words = [tuple(w) for w in words]
    partials = []
    for w in words:
        S = splitting(word_matrix(spec.matrices, w), tol_unit)
        if S.dim_e == 0:
            raise InsufficientSpanError(f"word {spec.format_word(w)} has no expanding directions")
        partials.append(series_solve_on_E(spec, w, S, tol_tail, max_N, res))
    asm = assemble(partials)
    tail = asm.pinv_norm * float(np.sqrt(sum(p.tail_bound**2 for p in partials)))
    longest = max(len(w) for w in words)
    budgets = {
        nm: error_budget(spec, asm.phi2, tail, longest, g.matrix)
        for nm, g in zip(spec.names, spec.generators)
    }
    word_budgets = [
        error_budget(spec, asm.phi2, tail, longest, word_matrix(spec.matrices, w).to_array())
        for w in words
    ]
    psi = PsiLift(asm.phi2)
    report = equivariance_residual(spec, psi, grid_points(res), {k: b.total for k, b in budgets.items()})
    verdict = "OK" if report.all_pass else "NO_SEMICONJUGACY"
    return SemiconjugacyResult(
        asm.phi2, psi, words, partials, asm.assembly_residual, tail, budgets, word_budgets, report, verdict,
        list(spec.names),
    )
