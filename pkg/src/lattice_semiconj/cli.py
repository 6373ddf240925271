"""Command-line runner.

Exit codes: 0 success, 2 not certified, 3 no semiconjugacy, 64 usage,
70 internal numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

from . import examples as ex
from .errors import NotUnimodularError, SemiconjError, SpecFormatError
from .scgf import atomic_write, read_scgf, write_scgf
from .semiconj import (
    DEFAULT_MAX_N,
    DEFAULT_TOL_TAIL,
    DEFAULT_WORD_LEN,
    BUDGET_HEADROOM,
    PsiLift,
    SemiconjugacyResult,
    error_budget,
    solve_full,
)
from .spectral import (
    DEFAULT_TOL_UNIT,
    IntMatrix,
    eigen_data,
    restricted_inverse_norms,
    splitting,
    weak_hyperbolicity_certificate,
    word_matrix,
)
from .specfile import format_action_spec, load_action_spec, parse_action_spec, write_action_spec
from .torusmap import INVERT_TOL, ActionSpec, grid_points
from .verify import (
    equivariance_residual,
    image_coverage,
    induced_h1,
    tau_analysis,
    tau_sample_points,
)

EXIT_OK = 0
EXIT_NOT_CERTIFIED = 2
EXIT_NO_SEMICONJ = 3
EXIT_USAGE = 64
EXIT_NUMERIC = 70

log = logging.getLogger("lattice_semiconj")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    res: int
    tol_tail: float = DEFAULT_TOL_TAIL
    tol_unit: float = DEFAULT_TOL_UNIT
    inverse_tol: float = INVERT_TOL
    max_n: int = DEFAULT_MAX_N
    word_len: int = DEFAULT_WORD_LEN
    out: str = "."
    seed: int = 0x5EED

    def __post_init__(self):
        if min(self.tol_tail, self.tol_unit, self.inverse_tol) <= 0:
            raise UsageError("tolerances must be > 0")
        if self.res < 2:
            raise UsageError("resolution must be >= 2")
        if self.word_len < 1:
            raise UsageError("word length must be >= 1")
        if self.max_n < 1:
            raise UsageError("max-n must be >= 1")


def default_res(n: int) -> int:
    return {2: 256, 3: 64}.get(n, 16)


def _config(args, n: int) -> RunConfig:
    return RunConfig(
        res=args.res or default_res(n),
        tol_tail=args.tol_tail,
        max_n=args.max_n,
        word_len=args.word_len,
        out=args.out,
        seed=args.seed,
    )


def _read_spec(path: str, res: int | None) -> ActionSpec:
    if path == "-":
        return parse_action_spec(sys.stdin.read(), Path.cwd(), res)
    return load_action_spec(path, res)


def _peek_n(path: str) -> int:
    """Dimension declared by a spec, read before the full parse needs a resolution."""
    if path == "-":
        text = sys.stdin.read()
        sys.stdin = _Replay(text)
    else:
        text = Path(path).read_text()
    for line in text.splitlines():
        k, _, v = line.partition("=")
        if k.strip() == "n" and v.strip():
            return int(v.split("#")[0])
        if k.strip() == "matrix":
            return len([r for r in v.split(";") if r.strip()])
    raise SpecFormatError("cannot determine dimension n")


class _Replay:
    def __init__(self, text):
        self.text = text

    def read(self):
        return self.text


def _parse_words(text: str | None, spec: ActionSpec):
    if not text:
        return None
    return [spec.word(w) for w in text.split(",") if w.strip()]


# -- subcommands -------------------------------------------------------------


def cmd_spectral(args) -> int:
    if args.matrix:
        A = IntMatrix.parse(args.matrix)
        label = A.format()
    else:
        if not (args.spec and args.word):
            raise UsageError("give -m MATRIX or --spec FILE --word WORD")
        spec = load_action_spec(args.spec, 2)
        w = spec.word(args.word)
        A = word_matrix(spec.matrices, w)
        label = f"{spec.format_word(w)} = {A.format()}"
    rep = eigen_data(A, args.tol_unit)
    S = splitting(A, args.tol_unit)
    print(f"matrix {label}")
    for lam, mod, cls in zip(rep.eigenvalues, rep.moduli, rep.classes):
        z = f"{lam.real:.12g}" if abs(lam.imag) < 1e-14 else f"{lam.real:.12g}{lam.imag:+.12g}j"
        print(f"  eigenvalue {z}  |.|={mod:.12g}  {cls}")
    print(f"dim E = {S.dim_e}, dim F = {S.n - S.dim_e}, hyperbolic = {not rep.neutral.any()}")
    if S.dim_e:
        norms = restricted_inverse_norms(S, args.terms)
        head = ", ".join(f"{v:.6g}" for v in norms.norms[:5])
        print(f"||A^-i|_E||, i=1..: {head}{', ...' if args.terms > 5 else ''}")
        print(f"tail bound after N={args.terms}: {norms.tail_bound:.6e}")
    return EXIT_OK


def cmd_certify(args) -> int:
    if args.word_len < 1:
        raise UsageError("word length L must be >= 1")
    spec = load_action_spec(args.spec, 2)
    t0 = time.perf_counter()
    cert = weak_hyperbolicity_certificate(spec.matrices, args.word_len, args.tol_unit)
    print(cert.describe(spec.names))
    for w in cert.witness_words:
        m = word_matrix(spec.matrices, w)
        print(f"  witness {spec.format_word(w)} = {m.format()}  dim E = {splitting(m).dim_e}")
    log.info("certificate in %.3fs", time.perf_counter() - t0)
    return EXIT_OK if cert.verified else EXIT_NOT_CERTIFIED


def _budget_lines(result: SemiconjugacyResult) -> list[str]:
    out = [f"budget = (1 + |A|) x (tail + {BUDGET_HEADROOM:g} x (interp(phi2) + max interp(delta)) "
           "+ inversion tol x word length)"]
    for nm, b in result.budgets.items():
        out.append(
            f"  {nm}: tail {b.tail:.3e} + interpolation {b.interpolation:.3e} "
            f"+ inversion {b.inversion:.3e} = {b.total:.3e}"
        )
    return out


def _diagnostics(spec: ActionSpec, psi, cfg: RunConfig, words) -> list[str]:
    lines = []
    probes = tau_sample_points((cfg.res,) * spec.n, cfg.seed)
    try:
        h1 = induced_h1(psi, probes)
        lines.append("induced map on H_1: " + "; ".join(",".join(str(v) for v in r) for r in h1))
    except SemiconjError as exc:
        lines.append(f"induced map on H_1: {exc.code}: {exc}")
    gens = [((i, 1),) for i in range(len(spec.names))]
    tau = tau_analysis(spec, psi, gens + [w for w in words if w not in gens], probes)
    lines.append("tau analysis:")
    lines += ["  " + ln for ln in tau.dump(spec.names).splitlines()]
    cov = image_coverage(psi, grid_points((min(cfg.res, 64),) * spec.n), 16 if spec.n <= 3 else 4)
    lines.append(f"image coverage (informational): {cov:.3f} of boxes hit")
    return lines


def _write_outputs(out: Path, result: SemiconjugacyResult, report: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_scgf(out / "phi2.scgf", result.phi2)
    atomic_write(out / "report.txt", report)
    atomic_write(out / "residuals.csv", result.residuals.to_csv())


def cmd_solve(args) -> int:
    n = _peek_n(args.spec)
    cfg = _config(args, n)
    spec = _read_spec(args.spec, cfg.res)
    words = _parse_words(args.words, spec)
    t0 = time.perf_counter()
    result = solve_full(
        spec, words, cfg.res, cfg.tol_tail, cfg.max_n, cfg.word_len, cfg.tol_unit
    )
    elapsed = time.perf_counter() - t0
    lines = [
        "semiconjugacy solve",
        "run config: " + ", ".join(f"{k}={v}" for k, v in asdict(cfg).items()),
        "model: M = T^n with f = identity, so alpha(g, .) is the displacement of generator g",
        "solve words: " + ", ".join(spec.format_word(w) for w in result.solve_words),
    ]
    for p in result.partials:
        lines.append(
            f"  {spec.format_word(p.word)}: dim E = {p.splitting.dim_e}, N = {p.N_used}, "
            f"sup|alpha| bound = {p.alpha_sup:.3e}, certified tail = {p.tail_bound:.3e}"
        )
    lines.append(f"assembly residual: {result.assembly_residual:.3e}")
    lines.append(f"sup |phi2| = {result.phi2.sup_norm():.3e}")
    lines += _budget_lines(result)
    lines.append("equivariance residuals:")
    lines += ["  " + ln for ln in result.residuals.to_csv().splitlines()]
    lines += _diagnostics(spec, result.psi_lift, cfg, result.solve_words)
    lines.append(f"verdict: {result.verdict}")
    lines.append(f"elapsed: {elapsed:.2f}s")
    report = "\n".join(lines) + "\n"
    _write_outputs(Path(cfg.out), result, report)
    print(report, end="")
    return EXIT_OK if result.ok else EXIT_NO_SEMICONJ


def cmd_verify(args) -> int:
    phi2 = read_scgf(args.psi)
    n = phi2.d
    cfg = _config(args, n)
    spec = _read_spec(args.spec, cfg.res)
    if phi2.m != spec.n or phi2.d != spec.n:
        raise UsageError(f"psi file is T^{phi2.d} -> R^{phi2.m}, spec has n = {spec.n}")
    psi = PsiLift(phi2)
    budgets = {
        nm: error_budget(spec, phi2, 0.0, cfg.word_len, g.matrix).total
        for nm, g in zip(spec.names, spec.generators)
    }
    report = equivariance_residual(spec, psi, phi2.points(), budgets)
    lines = ["equivariance residuals:"] + ["  " + ln for ln in report.to_csv().splitlines()]
    lines += _diagnostics(spec, psi, cfg, [])
    verdict = "OK" if report.all_pass else "NO_SEMICONJUGACY"
    lines.append(f"verdict: {verdict}")
    text = "\n".join(lines) + "\n"
    if args.out:
        out = Path(args.out)
        atomic_write(out / "verify_report.txt", text)
        atomic_write(out / "residuals.csv", report.to_csv())
    print(text, end="")
    return EXIT_OK if report.all_pass else EXIT_NO_SEMICONJ


def cmd_demo(args) -> int:
    res = args.res or default_res(args.n)
    cfg = RunConfig(res=res, out=args.out)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    eta = ex.BumpSpec.default(args.n, args.amp)
    if args.kind == "linear":
        spec = ex.standard_action(args.n, args.preset)
    elif args.kind == "conjugation":
        oracle = ex.conjugated_action(ex.standard_action(args.n, args.preset), eta, res)
        spec = oracle.spec
        write_scgf(out / "truth_phi2.scgf", oracle.ground_truth_phi2)
    elif args.kind == "twist":
        if args.n != 2:
            raise UsageError("the twist demo is defined on T^2 (Sanov generators)")
        spec = ex.sanov_twist(eta, res)
    else:
        raise UsageError(f"unknown demo {args.kind}")
    path = out / "action.spec"
    write_action_spec(spec, path)
    # stdout copy with absolute paths so it can be piped into `solve -`
    abs_paths = [
        None if g.delta is None else str((out / f"action_{nm}.scgf").resolve())
        for nm, g in zip(spec.names, spec.generators)
    ]
    sys.stdout.write(format_action_spec(spec, abs_paths))
    log.info("wrote %s", path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lattice-semiconj", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    def run_opts(sp):
        sp.add_argument("--res", type=int, default=None, help="grid samples per axis")
        sp.add_argument("--tol-tail", type=float, default=DEFAULT_TOL_TAIL)
        sp.add_argument("--max-n", type=int, default=DEFAULT_MAX_N)
        sp.add_argument("--words", default=None, help="comma-separated solve words, e.g. 'ab,BA'")
        sp.add_argument("--word-len", type=int, default=DEFAULT_WORD_LEN)
        sp.add_argument("--out", default=".")
        sp.add_argument("--seed", type=lambda s: int(s, 0), default=0x5EED)

    sp = sub.add_parser("spectral", help="spectrum and splitting of a matrix or word")
    sp.add_argument("-m", "--matrix")
    sp.add_argument("--spec")
    sp.add_argument("--word")
    sp.add_argument("--terms", type=int, default=20)
    sp.add_argument("--tol-unit", type=float, default=DEFAULT_TOL_UNIT)
    sp.set_defaults(fn=cmd_spectral)

    sp = sub.add_parser("certify", help="weak-hyperbolicity certificate")
    sp.add_argument("spec")
    sp.add_argument("-L", "--word-len", type=int, default=DEFAULT_WORD_LEN)
    sp.add_argument("--tol-unit", type=float, default=DEFAULT_TOL_UNIT)
    sp.set_defaults(fn=cmd_certify)

    sp = sub.add_parser("solve", help="compute phi2 and verify equivariance")
    sp.add_argument("spec", help="action spec file, or - for stdin")
    run_opts(sp)
    sp.set_defaults(fn=cmd_solve)

    sp = sub.add_parser("verify", help="check a phi2 grid file against an action")
    sp.add_argument("spec")
    sp.add_argument("psi", help="phi2 SCGF file (psi = id + phi2)")
    run_opts(sp)
    sp.set_defaults(fn=cmd_verify, out=None)

    sp = sub.add_parser("demo", help="write a canned action spec")
    sp.add_argument("kind", choices=["conjugation", "twist", "linear"])
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--preset", default=None)
    sp.add_argument("--amp", type=float, default=ex.DEFAULT_AMPLITUDE)
    sp.add_argument("--res", type=int, default=None)
    sp.add_argument("--out", default="demo_out")
    sp.set_defaults(fn=cmd_demo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if getattr(args, "preset", "x") is None:
        args.preset = "sl2_sanov" if args.n == 2 else "sln_elementary"
    try:
        return args.fn(args)
    except (UsageError, NotUnimodularError, SpecFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SemiconjError as exc:
        print(f"numerical failure [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
