"""Canned actions with known answers.

* :func:`standard_action` - linear actions (Sanov subgroup of SL(2,Z), elementary
  generators of SL(n,Z)).
* :func:`conjugated_action` - every generator conjugated by the same
  ``h = id + eta``; the equivariant map back to the linear action is ``h``.
* :func:`sanov_twist` - only the first Sanov generator conjugated. The Sanov
  group is free, so this is still an action, but no equivariant map to the
  linear model exists.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConjugatorNotCertifiedError, InvertDivergedError
from .spectral import IntMatrix
from .torusmap import (
    INVERT_MAX_ITER,
    INVERT_TOL,
    ActionSpec,
    GridFunction,
    TorusMap,
    grid_sample,
)

DEFAULT_AMPLITUDE = 0.05


@dataclass(frozen=True)
class BumpTerm:
    component: int
    amplitude: float
    freq: tuple[int, ...]
    phase: float = 0.0


@dataclass(frozen=True)
class BumpSpec:
    """``eta_c(x) = sum over terms of component c of amp * sin(2 pi <freq, x> + phase)``."""

    n: int
    terms: tuple[BumpTerm, ...] = field(default_factory=tuple)

    def __post_init__(self):
        for t in self.terms:
            if len(t.freq) != self.n:
                raise ValueError(f"frequency {t.freq} does not have length {self.n}")
            if any(int(f) != f for f in t.freq):
                raise ValueError(f"frequencies must be integers, got {t.freq}")
            if not 0 <= t.component < self.n:
                raise ValueError(f"component {t.component} out of range")

    @classmethod
    def default(cls, n: int = 2, amplitude: float = DEFAULT_AMPLITUDE) -> "BumpSpec":
        """``eta_i(x) = amplitude * sin(2 pi x_{i+1})`` (indices cyclic)."""
        terms = []
        for i in range(n):
            f = [0] * n
            f[(i + 1) % n] = 1
            terms.append(BumpTerm(i, amplitude, tuple(f)))
        return cls(n, tuple(terms))

    @property
    def is_zero(self) -> bool:
        return all(t.amplitude == 0 for t in self.terms)

    def lipschitz_bound(self) -> float:
        return 2 * np.pi * sum(abs(t.amplitude) * float(np.linalg.norm(t.freq)) for t in self.terms)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        X = np.atleast_2d(x)
        out = np.zeros((X.shape[0], self.n))
        for t in self.terms:
            out[:, t.component] += t.amplitude * np.sin(
                2 * np.pi * (X @ np.asarray(t.freq, dtype=float)) + t.phase
            )
        return out[0] if x.ndim == 1 else out

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(x, dtype=float))
        jac = np.zeros((X.shape[0], self.n, self.n))
        for t in self.terms:
            f = np.asarray(t.freq, dtype=float)
            c = t.amplitude * 2 * np.pi * np.cos(2 * np.pi * (X @ f) + t.phase)
            jac[:, t.component, :] += c[:, None] * f[None, :]
        return jac


def bump_field(spec: BumpSpec, n: int, res: Sequence[int] | int) -> GridFunction:
    if spec.n != n:
        raise ValueError(f"bump is for n={spec.n}, asked for n={n}")
    res = (res,) * n if isinstance(res, int) else tuple(res)
    return grid_sample(spec, res)


def sanov_matrices() -> list[IntMatrix]:
    return [IntMatrix(((1, 2), (0, 1))), IntMatrix(((1, 0), (2, 1)))]


def elementary_matrices(n: int) -> tuple[list[str], list[IntMatrix]]:
    names, mats = [], []
    for i, j in itertools.permutations(range(n), 2):
        e = [[int(r == c) for c in range(n)] for r in range(n)]
        e[i][j] = 1
        names.append(f"e{i + 1}{j + 1}")
        mats.append(IntMatrix(e))
    return names, mats


PRESETS = ("sl2_sanov", "sln_elementary")


def standard_action(n: int = 2, preset: str = "sl2_sanov") -> ActionSpec:
    if n < 2:
        raise ValueError("n must be >= 2")
    if preset == "sl2_sanov":
        if n != 2:
            raise ValueError("sl2_sanov is defined for n = 2 only")
        return ActionSpec(2, ["a", "b"], [TorusMap(A) for A in sanov_matrices()])
    if preset == "sln_elementary":
        names, mats = elementary_matrices(n)
        rel = []
        # commuting elementary pairs E_ij, E_kl with j != k and i != l
        pairs = list(itertools.permutations(range(n), 2))
        for (p, (i, j)), (q, (k, l)) in itertools.combinations(enumerate(pairs), 2):
            if j != k and i != l:
                rel.append(((p, 1), (q, 1), (p, -1), (q, -1)))
        return ActionSpec(n, names, [TorusMap(A) for A in mats], rel)
    raise ValueError(f"unknown preset {preset!r}; choose from {PRESETS}")


def invert_conjugator(eta: BumpSpec, y: np.ndarray, tol: float = INVERT_TOL,
                      max_iter: int = INVERT_MAX_ITER) -> np.ndarray:
    """Solve ``x + eta(x) = y`` by the fixed-point iteration ``x <- y - eta(x)``."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    x = y.copy()
    for _ in range(max_iter):
        r = x + eta(x) - y
        if np.linalg.norm(r, axis=1).max() <= tol:
            return x
        x = y - eta(x)
    raise InvertDivergedError(f"conjugator inversion did not reach tol {tol:g}")


def _conjugated_generator(A: IntMatrix, eta: BumpSpec, res: tuple[int, ...]) -> TorusMap:
    a = A.to_array()

    def disp(x):
        hx = x + eta(x)
        return invert_conjugator(eta, hx @ a.T) - x @ a.T

    return TorusMap(A, grid_sample(disp, res))


def _check_conjugator(eta: BumpSpec, res: tuple[int, ...]) -> None:
    lip = eta.lipschitz_bound()
    if not lip < 1.0:
        raise ConjugatorNotCertifiedError(
            f"Lip(eta) <= {lip:.3f} is not < 1; h = id + eta is not certified invertible"
        )


@dataclass(eq=False)
class ConjugationOracle:
    spec: ActionSpec
    ground_truth_h: TorusMap
    ground_truth_phi2: GridFunction
    eta: BumpSpec


def conjugated_action(base: ActionSpec, eta: BumpSpec, res: Sequence[int] | int) -> ConjugationOracle:
    """Conjugate every generator of a linear action by ``h = id + eta``.

    Generators become ``h^-1 o A o h``, so ``h o F = A o h`` holds exactly in the
    continuum and the correction is ``eta`` itself. ``h^-1`` is evaluated on the
    analytic ``eta`` so the sampled displacements are exact at grid points.
    """
    if any(not g.is_linear for g in base.generators):
        raise ValueError("base action must be linear")
    res = (res,) * base.n if isinstance(res, int) else tuple(res)
    h = TorusMap(IntMatrix.identity(base.n), bump_field(eta, base.n, res))
    phi2 = h.delta
    if eta.is_zero:
        return ConjugationOracle(base, h, phi2, eta)
    _check_conjugator(eta, res)
    gens = [_conjugated_generator(g.A, eta, res) for g in base.generators]
    spec = ActionSpec(base.n, list(base.names), gens, list(base.relations))
    return ConjugationOracle(spec, h, phi2, eta)


def sanov_twist(eta: BumpSpec, res: Sequence[int] | int) -> ActionSpec:
    """Sanov action with only generator ``a`` conjugated by ``id + eta``."""
    base = standard_action(2, "sl2_sanov")
    if eta.is_zero:
        return base
    res = (res,) * 2 if isinstance(res, int) else tuple(res)
    _check_conjugator(eta, res)
    a = _conjugated_generator(base.generators[0].A, eta, res)
    return ActionSpec(2, list(base.names), [a, base.generators[1]])
