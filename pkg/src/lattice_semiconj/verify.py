"""Checks that do not rely on how a candidate map was produced."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import NotConstantError, NotIntegerError
from .spectral import EXACT_LIMIT, IntMatrix, word_matrix
from .errors import WordOverflowError
from .torusmap import ActionSpec, GridFunction, grid_eval, grid_points, lift_eval
from .words import Word

TAU_SEED = 0x5EED
H1_INT_TOL = 1e-6


def torus_distance(v: np.ndarray) -> np.ndarray:
    """Euclidean norm of ``v`` reduced to its nearest integer translate (rows)."""
    v = np.atleast_2d(v)
    return np.linalg.norm(v - np.rint(v), axis=1)


@dataclass
class GeneratorResidual:
    generator: str
    sup_residual: float
    argmax: np.ndarray
    budget: float

    @property
    def passed(self) -> bool:
        return self.sup_residual <= self.budget


@dataclass
class ResidualReport:
    rows: list[GeneratorResidual]

    @property
    def all_pass(self) -> bool:
        return all(r.passed for r in self.rows)

    @property
    def max_residual(self) -> float:
        return max(r.sup_residual for r in self.rows)

    def __getitem__(self, name: str) -> GeneratorResidual:
        return next(r for r in self.rows if r.generator == name)

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("generator,sup_residual,budget,pass\n")
        for r in self.rows:
            out.write(f"{r.generator},{r.sup_residual:.6e},{r.budget:.6e},{str(r.passed).lower()}\n")
        return out.getvalue()


def equivariance_residual(
    spec: ActionSpec,
    psi_lift: Callable[[np.ndarray], np.ndarray],
    sample: np.ndarray,
    budgets: Mapping[str, float] | float = 0.0,
) -> ResidualReport:
    """``sup_x d_T(psi(F_g x), A_g psi(x))`` for every generator ``g``."""
    x = np.atleast_2d(np.asarray(sample, dtype=float))
    px = psi_lift(x)
    rows = []
    for nm, T in zip(spec.names, spec.generators):
        v = psi_lift(lift_eval(T, x)) - px @ T.matrix.T
        d = torus_distance(v)
        k = int(np.argmax(d))
        b = budgets if np.isscalar(budgets) else budgets[nm]
        rows.append(GeneratorResidual(nm, float(d[k]), x[k].copy(), float(b)))
    return ResidualReport(rows)


def cocycle_identity_residual(
    spec: ActionSpec, pairs: Sequence[tuple[Word, Word]], res
) -> dict[tuple[Word, Word], float]:
    """Defect of ``alpha(w1 w2, m) = alpha(w1, w2 m) + A_w1 alpha(w2, m)`` on the grid.

    The left side is evaluated pointwise along the concatenated word; on the
    right ``alpha(w1, .)`` is read from its sampled grid at the off-grid
    points ``w2 m``, so sampling and inversion errors show up.
    """
    from .semiconj import word_cocycle, word_cocycle_eval

    res = (int(res),) * spec.n if np.isscalar(res) else tuple(res)
    m = grid_points(res)
    out = {}
    for w1, w2 in pairs:
        lhs = word_cocycle_eval(spec, tuple(w1) + tuple(w2), m)[0] if (w1 or w2) else np.zeros_like(m)
        if w2:
            a2, img = word_cocycle_eval(spec, w2, m)
        else:
            a2, img = np.zeros_like(m), m
        if w1:
            a1 = grid_eval(word_cocycle(spec, w1, res).values, img)
        else:
            a1 = np.zeros_like(m)
        A1 = word_matrix(spec.matrices, w1).to_array()
        rhs = a1 + a2 @ A1.T
        out[(tuple(w1), tuple(w2))] = float(np.linalg.norm(lhs - rhs, axis=1).max())
    return out


def functional_equation_residual(
    spec: ActionSpec, phi2: GridFunction, word: Word, points: np.ndarray | None = None
) -> np.ndarray:
    """Per-point ``||phi2(m) - A^-1 phi2(F_w m) - A^-1 alpha(w, m)||``."""
    from .semiconj import word_cocycle_eval

    m = phi2.points() if points is None else np.atleast_2d(points)
    a, img = word_cocycle_eval(spec, word, m)
    Ainv = word_matrix(spec.matrices, word).inverse().to_array()
    r = grid_eval(phi2, m) - (grid_eval(phi2, img) + a) @ Ainv.T
    return np.linalg.norm(r, axis=1)


def induced_h1(psi_lift: Callable[[np.ndarray], np.ndarray], probes: np.ndarray) -> np.ndarray:
    """Matrix of the map on ``H_1(T^n) = Z^n`` induced by a lift ``Psi``."""
    x = np.atleast_2d(np.asarray(probes, dtype=float))
    n = x.shape[1]
    px = psi_lift(x)
    cols = np.stack([psi_lift(x + np.eye(n)[i]) - px for i in range(n)], axis=2)  # (P, n, n)
    rounded = np.rint(cols)
    off = np.abs(cols - rounded).max()
    if off > H1_INT_TOL:
        raise NotIntegerError(f"translation differences are {off:.2e} away from integers")
    if np.any(rounded != rounded[0]):
        raise NotConstantError("translation differences vary across probe points")
    return rounded[0].astype(np.int64)


def tau_sample_points(res: Sequence[int], seed: int = TAU_SEED, n_random: int = 100) -> np.ndarray:
    """A 10x coarser subgrid plus uniformly random points."""
    coarse = tuple(max(2, int(r) // 10) for r in res)
    rng = np.random.default_rng(seed)
    return np.vstack([grid_points(coarse), rng.random((n_random, len(res)))])


@dataclass
class OrbitGrowth:
    max_norm: float
    by_length: list[float]
    classification: str  # "bounded-so-far" | "growing"

    @property
    def growing(self) -> bool:
        return self.classification == "growing"


def orbit_growth(v: Sequence[int], generators: Sequence[IntMatrix], max_len: int) -> OrbitGrowth:
    """Largest ``||A_w v||`` over words of length ``<= max_len`` (exact integers).

    ``by_length[l]`` is the maximum over words of length at most ``l``. The
    orbit is classified ``growing`` when this maximum strictly increases over
    each of the last two lengths.
    """
    v = tuple(int(c) for c in v)
    mats = list(generators) + [g.inverse() for g in generators]
    seen = {v}
    frontier = {v}
    best = float(np.linalg.norm(v))
    by_length = [best]
    for _ in range(max_len):
        nxt = set()
        for u in frontier:
            for A in mats:
                w = A.apply(u)
                if any(abs(c) > EXACT_LIMIT for c in w):
                    raise WordOverflowError("orbit vector entries exceed 2^53")
                if w not in seen:
                    seen.add(w)
                    nxt.add(w)
        frontier = nxt
        if nxt:
            best = max(best, max(float(np.linalg.norm(w)) for w in nxt))
        by_length.append(best)
    growing = len(by_length) >= 3 and by_length[-1] > by_length[-2] > by_length[-3]
    return OrbitGrowth(best, by_length, "growing" if growing else "bounded-so-far")


@dataclass
class TauTable:
    words: list[Word]
    tau: dict[Word, tuple[int, ...]]
    constancy_defect: float
    cocycle_defect: float
    orbit: dict[Word, OrbitGrowth] = field(default_factory=dict)

    @property
    def all_zero(self) -> bool:
        return all(not any(t) for t in self.tau.values())

    def dump(self, names: Sequence[str]) -> str:
        from .words import format_word

        lines = [f"constancy_defect {self.constancy_defect:.3e}",
                 f"cocycle_defect {self.cocycle_defect:.3e}"]
        for w in self.words:
            line = f"tau[{format_word(w, names)}] = {list(self.tau[w])}"
            if w in self.orbit:
                o = self.orbit[w]
                line += f"  orbit max {o.max_norm:.3g} ({o.classification})"
            lines.append(line)
        return "\n".join(lines) + "\n"


def tau_analysis(
    spec: ActionSpec,
    F_lift: Callable[[np.ndarray], np.ndarray],
    words: Sequence[Word],
    sample: np.ndarray,
    orbit_len: int = 8,
) -> TauTable:
    """``tau_w(z) = F(w z) - A_w F(z)`` for a lift ``F`` of a claimed equivariant map.

    ``w z`` is taken on lifts (no reduction mod 1), so for ``F = id + phi2``
    a genuinely equivariant map gives ``tau = 0``. For each nonzero ``tau_w``
    the orbit of ``tau_w`` under the linear parts is enumerated; an
    equivariant ``F`` forces it to be bounded, hence zero.
    """
    from .torusmap import word_lift

    z = np.atleast_2d(np.asarray(sample, dtype=float))
    Fz = F_lift(z)

    def raw(w: Word) -> np.ndarray:
        A = word_matrix(spec.matrices, w).to_array()
        return F_lift(word_lift(spec, w, z)) - Fz @ A.T

    words = [tuple(w) for w in words]
    tau, constancy = {}, 0.0
    for w in words:
        t = raw(w)
        tw = np.rint(t[0])
        constancy = max(constancy, float(np.linalg.norm(t - tw, axis=1).max()))
        tau[w] = tuple(int(c) for c in tw)
    cocycle = 0.0
    for w1 in words:
        for w2 in words:
            t12 = np.rint(raw(w1 + w2)[0])
            A1 = np.array(word_matrix(spec.matrices, w1).entries, dtype=float)
            d = t12 - np.asarray(tau[w1]) - A1 @ np.asarray(tau[w2])
            cocycle = max(cocycle, float(np.linalg.norm(d)))
    orbit = {w: orbit_growth(tau[w], spec.matrices, orbit_len) for w in words if any(tau[w])}
    return TauTable(words, tau, constancy, cocycle, orbit)


def image_coverage(psi_lift: Callable[[np.ndarray], np.ndarray], points: np.ndarray,
                   cells: int = 16) -> float:
    """Fraction of the ``cells^n`` boxes of ``T^n`` hit by ``psi(points) mod 1`` (informational)."""
    y = psi_lift(np.atleast_2d(points))
    y = y - np.floor(y)
    idx = np.minimum((y * cells).astype(np.int64), cells - 1)
    n = y.shape[1]
    flat = idx @ (cells ** np.arange(n)[::-1])
    return float(np.unique(flat).size / cells**n)
