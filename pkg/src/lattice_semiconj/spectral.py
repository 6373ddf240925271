"""Integer matrices, expanding/non-expanding splittings and hyperbolicity certificates.

The splitting of ``R^n`` used throughout is ``E + F`` where ``E`` is the sum of
the generalized eigenspaces with eigenvalue modulus ``> 1 + tol_unit`` and ``F``
collects everything else (the neutral band around the unit circle is assigned
to ``F`` on purpose: counting a unit-modulus eigenvalue as expanding would make
the correction series non-summable).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import linalg

from .errors import (
    NotUnimodularError,
    SpectralError,
    TailNotSummableError,
    WordOverflowError,
)
from .words import Word, format_word, reduced_words

DEFAULT_TOL_UNIT = 1e-9
RANK_DROP_TOL = 1e-10
# entries beyond this are no longer exactly representable as float64
EXACT_LIMIT = 2**53


def _bareiss_det(rows: list[list[int]]) -> int:
    a = [list(r) for r in rows]
    n = len(a)
    sign, prev = 1, 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for i in range(k + 1, n):
                if a[i][k] != 0:
                    a[k], a[i] = a[i], a[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


@dataclass(frozen=True)
class IntMatrix:
    """Exact unimodular integer matrix (the linear part of a generator)."""

    entries: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(int(v) for v in r) for r in self.entries)
        n = len(rows)
        if n < 2 or any(len(r) != n for r in rows):
            raise ValueError(f"need a square matrix of size >= 2, got {rows}")
        object.__setattr__(self, "entries", rows)
        d = _bareiss_det([list(r) for r in rows])
        if d not in (1, -1):
            raise NotUnimodularError(f"det = {d} is not +-1 for matrix {self.format()}")

    @classmethod
    def parse(cls, text: str) -> "IntMatrix":
        """Parse ``"2,1;1,1"`` (rows separated by ``;``)."""
        rows = [r for r in text.replace("\n", ";").split(";") if r.strip()]
        try:
            return cls(tuple(tuple(int(v) for v in r.replace(",", " ").split()) for r in rows))
        except ValueError as exc:
            if isinstance(exc, NotUnimodularError):
                raise
            raise ValueError(f"cannot parse matrix {text!r}: {exc}") from None

    @classmethod
    def identity(cls, n: int) -> "IntMatrix":
        return cls(tuple(tuple(int(i == j) for j in range(n)) for i in range(n)))

    @property
    def n(self) -> int:
        return len(self.entries)

    def det(self) -> int:
        return _bareiss_det([list(r) for r in self.entries])

    def __matmul__(self, other: "IntMatrix") -> "IntMatrix":
        n = self.n
        cols = list(zip(*other.entries))
        prod = tuple(
            tuple(sum(a * b for a, b in zip(row, col)) for col in cols) for row in self.entries
        )
        if any(abs(v) > EXACT_LIMIT for r in prod for v in r):
            raise WordOverflowError(f"matrix product entries exceed 2^53 (n={n})")
        return IntMatrix(prod)

    def inverse(self) -> "IntMatrix":
        n = self.n
        a = [[Fraction(v) for v in r] + [Fraction(int(i == j)) for j in range(n)]
             for i, r in enumerate(self.entries)]
        for c in range(n):
            p = next(i for i in range(c, n) if a[i][c] != 0)
            a[c], a[p] = a[p], a[c]
            piv = a[c][c]
            a[c] = [v / piv for v in a[c]]
            for i in range(n):
                if i != c and a[i][c] != 0:
                    f = a[i][c]
                    a[i] = [x - f * y for x, y in zip(a[i], a[c])]
        inv = tuple(tuple(r[n:]) for r in a)
        assert all(v.denominator == 1 for r in inv for v in r)
        return IntMatrix(tuple(tuple(int(v) for v in r) for r in inv))

    def to_array(self) -> np.ndarray:
        if any(abs(v) > EXACT_LIMIT for r in self.entries for v in r):
            raise WordOverflowError("matrix entries exceed 2^53")
        return np.array(self.entries, dtype=float)

    def apply(self, v: Sequence[int]) -> tuple[int, ...]:
        return tuple(sum(a * b for a, b in zip(row, v)) for row in self.entries)

    def format(self) -> str:
        return ";".join(",".join(str(v) for v in r) for r in self.entries)

    def __str__(self):
        return self.format()


def word_matrix(generators: Sequence[IntMatrix], word: Word) -> IntMatrix:
    """Exact product ``A_{g1}^{e1} ... A_{gk}^{ek}``."""
    if not generators:
        raise ValueError("no generators")
    inverses = {}
    out = IntMatrix.identity(generators[0].n)
    for g, e in word:
        if e > 0:
            m = generators[g]
        else:
            if g not in inverses:
                inverses[g] = generators[g].inverse()
            m = inverses[g]
        out = out @ m
    return out


def charpoly(A: IntMatrix) -> list[int]:
    """Exact characteristic polynomial coefficients, highest degree first (Faddeev-LeVerrier)."""
    n = A.n
    a = [list(r) for r in A.entries]
    coeffs = [1]
    M = [[0] * n for _ in range(n)]
    c = 1
    for k in range(1, n + 1):
        # M <- A M + c I
        M = [[sum(a[i][t] * M[t][j] for t in range(n)) + (c if i == j else 0) for j in range(n)]
             for i in range(n)]
        tr = sum(sum(a[i][t] * M[t][i] for t in range(n)) for i in range(n))
        assert tr % k == 0
        c = -tr // k
        coeffs.append(c)
    return coeffs


def _ptrim(p: list[Fraction]) -> list[Fraction]:
    i = 0
    while i < len(p) and p[i] == 0:
        i += 1
    return p[i:]


def _psub(p: list[Fraction], q: list[Fraction]) -> list[Fraction]:
    m = max(len(p), len(q))
    p = [Fraction(0)] * (m - len(p)) + p
    q = [Fraction(0)] * (m - len(q)) + q
    return _ptrim([x - y for x, y in zip(p, q)])


def _pdivmod(num: list[Fraction], den: list[Fraction]):
    num = _ptrim(list(num))
    quot = [Fraction(0)] * max(1, len(num) - len(den) + 1)
    while len(num) >= len(den):
        f = num[0] / den[0]
        shift = len(num) - len(den)
        quot[len(quot) - 1 - shift] = f
        num = _psub(num, [f * y for y in den] + [Fraction(0)] * shift)
    return _ptrim(quot), num


def _pgcd(p: list[Fraction], q: list[Fraction]) -> list[Fraction]:
    p, q = _ptrim(p), _ptrim(q)
    while q:
        p, q = q, _pdivmod(p, q)[1]
    return [x / p[0] for x in p]


def _pderiv(p: list[Fraction]) -> list[Fraction]:
    d = len(p) - 1
    return _ptrim([c * (d - i) for i, c in enumerate(p[:-1])])


def squarefree_factors(coeffs: Sequence[int]) -> list[tuple[list[Fraction], int]]:
    """Yun's algorithm over Q: ``p = prod f_i^i`` with each ``f_i`` squarefree and monic."""
    f = _ptrim([Fraction(c) for c in coeffs])
    if len(f) <= 1:
        return []
    f = [x / f[0] for x in f]
    df = _pderiv(f)
    a = _pgcd(f, df)
    b = _pdivmod(f, a)[0]
    c = _pdivmod(df, a)[0]
    d = _psub(c, _pderiv(b))
    out, i = [], 1
    while len(b) > 1:
        a = _pgcd(b, d) if d else list(b)
        if len(a) > 1:
            out.append((a, i))
        b = _pdivmod(b, a)[0]
        c = _pdivmod(d, a)[0] if d else []
        d = _psub(c, _pderiv(b))
        i += 1
    return out


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    moduli: np.ndarray
    classes: list[str]  # "expanding" | "neutral" | "contracting"

    @property
    def neutral(self) -> np.ndarray:
        return np.array([c == "neutral" for c in self.classes])

    @property
    def dim_expanding(self) -> int:
        return sum(c == "expanding" for c in self.classes)

    def expanding_threshold(self) -> float:
        """A modulus strictly between the E and F parts, for eigenvalue sorting."""
        exp = self.moduli[[c == "expanding" for c in self.classes]]
        rest = self.moduli[[c != "expanding" for c in self.classes]]
        hi = exp.min() if exp.size else np.inf
        lo = max(1.0, rest.max()) if rest.size else 1.0
        return float(np.sqrt(lo * hi)) if np.isfinite(hi) else 2.0 * lo


def eigen_data(A: IntMatrix, tol_unit: float = DEFAULT_TOL_UNIT) -> SpectrumReport:
    """Eigenvalues of ``A`` with their moduli and a three-way classification.

    Roots are taken from the squarefree factors of the exact characteristic
    polynomial, so repeated eigenvalues (Jordan blocks of unipotent or
    parabolic words) do not smear across the neutral band.
    """
    try:
        ev = []
        for f, mult in squarefree_factors(charpoly(A)):
            r = np.roots([float(x) for x in f]) if len(f) > 1 else np.zeros(0)
            ev.extend(list(r) * mult)
        ev = np.array(ev, dtype=complex)
    except np.linalg.LinAlgError as exc:
        raise SpectralError(f"eigenvalue solver failed for matrix {A.format()}: {exc}") from exc
    if ev.size != A.n or not np.all(np.isfinite(ev)):
        raise SpectralError(f"eigenvalue solver failed for matrix {A.format()}: got {ev}")
    order = np.lexsort((ev.imag, ev.real, -np.abs(ev)))
    ev = ev[order]
    mod = np.abs(ev)
    classes = [
        "expanding" if m > 1 + tol_unit else "contracting" if m < 1 - tol_unit else "neutral"
        for m in mod
    ]
    return SpectrumReport(ev, mod, classes)


def is_hyperbolic(A: IntMatrix, tol_unit: float = DEFAULT_TOL_UNIT) -> bool:
    return not eigen_data(A, tol_unit).neutral.any()


@dataclass
class Splitting:
    """``R^n = E + F`` for a single matrix, with orthonormal bases of each part.

    ``restricted`` is the matrix of ``A`` on ``E`` in the coordinates of
    ``e_basis`` (so ``A @ e_basis == e_basis @ restricted``).
    """

    matrix: IntMatrix
    e_basis: np.ndarray  # (n, dim E)
    f_basis: np.ndarray  # (n, dim F)
    proj_e: np.ndarray  # (n, n)
    modulus_gap: float
    restricted: np.ndarray

    @property
    def dim_e(self) -> int:
        return self.e_basis.shape[1]

    @property
    def n(self) -> int:
        return self.proj_e.shape[0]

    def coords_e(self) -> np.ndarray:
        """Map ``x -> coordinates of proj_e x`` in ``e_basis``; shape (dim E, n)."""
        return self.e_basis.T @ self.proj_e

    def invariance_residual(self) -> float:
        A = self.matrix.to_array()
        res = 0.0
        proj_f = np.eye(self.n) - self.proj_e
        if self.dim_e:
            Av = A @ self.e_basis
            res = max(res, np.abs(Av - self.proj_e @ Av).max())
        if self.f_basis.shape[1]:
            Av = A @ self.f_basis
            res = max(res, np.abs(Av - proj_f @ Av).max())
        return float(res)


def _schur_basis(A: np.ndarray, select) -> np.ndarray:
    try:
        _, Z, sdim = linalg.schur(A, output="real", sort=select)
    except (linalg.LinAlgError, ValueError) as exc:
        raise SpectralError(f"ordered Schur decomposition failed for {A.tolist()}: {exc}") from exc
    return Z[:, :sdim]


def splitting(A: IntMatrix, tol_unit: float = DEFAULT_TOL_UNIT) -> Splitting:
    """Expanding/non-expanding splitting of ``A`` via ordered real Schur forms."""
    a = A.to_array()
    n = A.n
    rep = eigen_data(A, tol_unit)
    dim_e = rep.dim_expanding

    threshold = rep.expanding_threshold()

    def expanding(re, im):
        return abs(complex(re, im)) > threshold

    def other(re, im):
        return not expanding(re, im)

    e_basis = _schur_basis(a, expanding) if dim_e else np.zeros((n, 0))
    f_basis = _schur_basis(a, other) if dim_e < n else np.zeros((n, 0))
    if e_basis.shape[1] != dim_e or f_basis.shape[1] != n - dim_e:
        raise SpectralError(
            f"Schur reordering disagrees with eigenvalue count for {A.format()}: "
            f"dim E {e_basis.shape[1]} vs {dim_e}"
        )
    if dim_e == 0:
        proj = np.zeros((n, n))
        gap = float("inf")
        restricted = np.zeros((0, 0))
    else:
        B = np.hstack([e_basis, f_basis])
        sel = np.diag([1.0] * dim_e + [0.0] * (n - dim_e))
        proj = B @ sel @ np.linalg.inv(B)
        gap = float(rep.moduli[:dim_e].min())
        restricted = e_basis.T @ a @ e_basis
    return Splitting(A, e_basis, f_basis, proj, gap, restricted)


@dataclass
class InverseNorms:
    """``norms[i-1] = ||A^{-i}|_E||`` for ``i = 1..N`` and a certified tail bound."""

    norms: np.ndarray
    tail_bound: float

    def tail_after(self, N: int) -> float:
        return _tail_bound(np.concatenate([[1.0], self.norms]), N)


def _tail_bound(norms0: np.ndarray, N: int) -> float:
    """Bound ``sum_{i>N} ||R^{-i}||`` given ``norms0[i] = ||R^{-i}||`` for ``i <= N``.

    For any block length ``k <= N`` with ``q = ||R^{-k}|| < 1`` and
    ``M = max_{s<k} ||R^{-s}||``, submultiplicativity gives
    ``||R^{-(pk+s)}|| <= M q^p``; the resulting geometric sum is minimized over ``k``.
    """
    best = np.inf
    for k in range(1, N + 1):
        q = norms0[k]
        if q >= 1.0:
            continue
        M = max(1.0, float(norms0[:k].max()))
        p0 = (N + 1) // k
        c = (p0 + 1) * k - (N + 1)
        bound = M * (c * q**p0 + k * q ** (p0 + 1) / (1.0 - q))
        best = min(best, bound)
    return float(best)


def restricted_inverse_norms(S: Splitting, N: int) -> InverseNorms:
    if N < 1:
        raise ValueError("N must be >= 1")
    if S.dim_e == 0:
        return InverseNorms(np.zeros(0), 0.0)
    Rinv = np.linalg.inv(S.restricted)
    norms = np.empty(N)
    P = np.eye(S.dim_e)
    for i in range(N):
        P = Rinv @ P
        norms[i] = np.linalg.norm(P, 2)
    norms0 = np.concatenate([[1.0], norms])
    tail = _tail_bound(norms0, N)
    if not np.isfinite(tail):
        raise TailNotSummableError(
            f"no k <= {N} with ||A^-k|_E|| < 1 for {S.matrix.format()} "
            f"(modulus gap {S.modulus_gap:.3g})"
        )
    return InverseNorms(norms, tail)


def restricted_inverse_powers(S: Splitting, N: int) -> list[np.ndarray]:
    """``[R^{-1}, ..., R^{-N}]`` in E-coordinates."""
    Rinv = np.linalg.inv(S.restricted)
    out, P = [], np.eye(S.dim_e)
    for _ in range(N):
        P = Rinv @ P
        out.append(P)
    return out


@dataclass
class HyperbolicityCertificate:
    verified: bool
    max_word_len: int
    witness_words: list[Word] = field(default_factory=list)
    spanned_dim: int = 0
    n: int = 0

    @property
    def verdict(self) -> str:
        return "Verified" if self.verified else f"NotVerifiedUpTo({self.max_word_len})"

    def describe(self, names: Sequence[str]) -> str:
        ws = ", ".join(format_word(w, names) for w in self.witness_words) or "-"
        return f"{self.verdict}; spanned dim {self.spanned_dim}/{self.n}; witnesses: {ws}"


class _SpanAccumulator:
    def __init__(self, n: int, drop_tol: float = RANK_DROP_TOL):
        self.Q = np.zeros((n, 0))
        self.drop_tol = drop_tol

    @property
    def rank(self) -> int:
        return self.Q.shape[1]

    def add(self, vectors: np.ndarray) -> int:
        """Add columns of ``vectors``; return the rank increase."""
        if vectors.shape[1] == 0:
            return 0
        V = vectors / np.linalg.norm(vectors, axis=0)
        V = V - self.Q @ (self.Q.T @ V)
        V = V - self.Q @ (self.Q.T @ V)
        q, r, _ = linalg.qr(V, mode="economic", pivoting=True)
        keep = np.abs(np.diag(r)) > self.drop_tol
        new = q[:, keep]
        self.Q = np.hstack([self.Q, new])
        return new.shape[1]


def enumerate_word_matrices(generators: Sequence[IntMatrix], max_len: int):
    """Yield ``(word, A_word)`` for reduced words of length 1..max_len, breadth first."""
    inv = [g.inverse() for g in generators]
    level = {(): IntMatrix.identity(generators[0].n)}
    for length in range(1, max_len + 1):
        nxt = {}
        for w in reduced_words(len(generators), length):
            g, e = w[-1]
            m = level[w[:-1]] @ (generators[g] if e > 0 else inv[g])
            nxt[w] = m
            yield w, m
        level = nxt


def weak_hyperbolicity_certificate(
    generators: Sequence[IntMatrix], max_word_len: int, tol_unit: float = DEFAULT_TOL_UNIT
) -> HyperbolicityCertificate:
    """Certify that the expanding subspaces ``E(w)`` of short words span ``R^n``.

    Words are enumerated breadth first, lexicographically within a length
    (generators before inverses). A word is kept as a witness only when it
    raises the rank of the accumulated span. A negative answer only means the
    search up to ``max_word_len`` was inconclusive.
    """
    if max_word_len < 1:
        raise ValueError(f"word length must be >= 1, got {max_word_len}")
    n = generators[0].n
    if any(g.n != n for g in generators):
        raise ValueError("generators have different dimensions")
    acc = _SpanAccumulator(n)
    witnesses: list[Word] = []
    for w, m in enumerate_word_matrices(generators, max_word_len):
        if eigen_data(m, tol_unit).dim_expanding == 0:
            continue
        if acc.add(splitting(m, tol_unit).e_basis) > 0:
            witnesses.append(w)
            if acc.rank == n:
                return HyperbolicityCertificate(True, max_word_len, witnesses, n, n)
    return HyperbolicityCertificate(False, max_word_len, witnesses, acc.rank, n)


def first_hyperbolic_word(
    generators: Sequence[IntMatrix], max_word_len: int, tol_unit: float = DEFAULT_TOL_UNIT
) -> Word | None:
    for w, m in enumerate_word_matrices(generators, max_word_len):
        if is_hyperbolic(m, tol_unit):
            return w
    return None
