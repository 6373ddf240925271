"""Plain-text action specs.

::

    [action]
    n = 2
    # optional: start from a linear preset (sl2_sanov | sln_elementary)
    preset = sl2_sanov
    # optional, diagnostics only; words separated by ';'
    relations = a b a^-1 b^-1

    [generator a]
    matrix = 1,2;0,1
    # either a grid file (relative to this file) ...
    delta = a.scgf
    # ... or one sinusoid per output component: amp,freqvec,phase;...
    # bump = 0.05,0 1,0; 0.05,1 0,0

A ``[generator x]`` section with the name of a preset generator replaces it.
"""

from __future__ import annotations

import configparser
import os
from pathlib import Path
from typing import Sequence

from .errors import SpecFormatError
from .examples import BumpSpec, BumpTerm, bump_field, standard_action
from .scgf import atomic_write, read_scgf, write_scgf
from .spectral import IntMatrix
from .torusmap import ActionSpec, TorusMap
from .words import format_word, parse_word


def parse_bump(text: str, n: int) -> BumpSpec:
    """``amp,f1 f2 ..,phase`` entries separated by ``;``; entry ``i`` feeds component ``i``.

    An entry may start with ``c:`` to name its output component explicitly.
    """
    terms = []
    for i, entry in enumerate(e for e in text.split(";") if e.strip()):
        entry = entry.strip()
        comp = i
        if ":" in entry:
            head, entry = entry.split(":", 1)
            comp = int(head)
        parts = [p.strip() for p in entry.split(",")]
        if len(parts) not in (2, 3):
            raise SpecFormatError(f"bump entry {entry!r} is not amp,freqvec[,phase]")
        try:
            freq = tuple(int(f) for f in parts[1].split())
            phase = float(parts[2]) if len(parts) == 3 else 0.0
            terms.append(BumpTerm(comp, float(parts[0]), freq, phase))
        except ValueError:
            raise SpecFormatError(f"bump entry {entry!r}: integer frequencies and real amp/phase expected") from None
    try:
        return BumpSpec(n, tuple(terms))
    except ValueError as exc:
        raise SpecFormatError(str(exc)) from None


def format_bump(b: BumpSpec) -> str:
    return "; ".join(
        f"{t.component}:{t.amplitude!r},{' '.join(str(f) for f in t.freq)},{t.phase!r}"
        for t in b.terms
    )


def parse_action_spec(text: str, base_dir: str | os.PathLike = ".", res=None) -> ActionSpec:
    """Parse spec text; ``res`` is required only when a generator uses ``bump``."""
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",),
                                   inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise SpecFormatError(f"cannot parse action spec: {exc}") from None
    if "action" not in cp:
        raise SpecFormatError("missing [action] section")
    act = cp["action"]
    n = int(act.get("n", "0"))
    names: list[str] = []
    gens: list[TorusMap] = []
    relations_text = act.get("relations", "")
    if "preset" in act:
        base = standard_action(n, act["preset"].strip())
        names, gens = list(base.names), list(base.generators)
        if not relations_text:
            relations_text = ";".join(format_word(w, names) for w in base.relations)
    base_dir = Path(base_dir)
    for sec in cp.sections():
        if not sec.startswith("generator"):
            if sec != "action":
                raise SpecFormatError(f"unknown section [{sec}]")
            continue
        name = sec[len("generator"):].strip()
        if not name:
            raise SpecFormatError("generator section needs a name: [generator a]")
        body = cp[sec]
        if "matrix" in body:
            A = IntMatrix.parse(body["matrix"])
        elif name in names:
            A = gens[names.index(name)].A
        else:
            raise SpecFormatError(f"generator {name} has no matrix")
        delta = None
        if "delta" in body and "bump" in body:
            raise SpecFormatError(f"generator {name}: give either delta or bump, not both")
        if "delta" in body:
            p = Path(body["delta"].strip())
            delta = read_scgf(p if p.is_absolute() else base_dir / p)
        elif "bump" in body:
            if res is None:
                raise SpecFormatError(f"generator {name} uses bump; a resolution is required")
            b = parse_bump(body["bump"], A.n)
            if not b.is_zero:
                delta = bump_field(b, A.n, res)
        T = TorusMap(A, delta)
        if name in names:
            gens[names.index(name)] = T
        else:
            names.append(name)
            gens.append(T)
    if not gens:
        raise SpecFormatError("no generators")
    n = n or gens[0].n
    try:
        relations = [parse_word(r, names) for r in relations_text.split(";") if r.strip()]
        return ActionSpec(n, names, gens, relations)
    except ValueError as exc:
        raise SpecFormatError(str(exc)) from None


def load_action_spec(path: str | os.PathLike, res=None) -> ActionSpec:
    path = Path(path)
    return parse_action_spec(path.read_text(), path.parent, res)


def format_action_spec(spec: ActionSpec, delta_paths: Sequence[str | None]) -> str:
    lines = ["[action]", f"n = {spec.n}"]
    if spec.relations:
        lines.append("relations = " + "; ".join(spec.format_word(w) for w in spec.relations))
    for nm, T, p in zip(spec.names, spec.generators, delta_paths):
        lines += ["", f"[generator {nm}]", f"matrix = {T.A.format()}"]
        if p is not None:
            lines.append(f"delta = {p}")
    return "\n".join(lines) + "\n"


def write_action_spec(spec: ActionSpec, path: str | os.PathLike) -> str:
    """Write ``path`` plus one ``<stem>_<name>.scgf`` per non-linear generator; return the text."""
    path = Path(path)
    rel = []
    for nm, T in zip(spec.names, spec.generators):
        if T.delta is None:
            rel.append(None)
            continue
        fname = f"{path.stem}_{nm}.scgf"
        write_scgf(path.parent / fname, T.delta)
        rel.append(fname)
    text = format_action_spec(spec, rel)
    atomic_write(path, text)
    return text
