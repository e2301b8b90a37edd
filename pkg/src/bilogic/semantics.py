"""Finite frames and models, satisfaction, validity, countermodel search.

Worlds form a set with distinguished elements e and pi, a preorder
dominated by pi, and a ternary relation R that is unital, commutative,
and associative.  Countermodels are drawn from frames generated by
preordered commutative monoids (R(w,u,v) iff w = u o v): raw ternary
relations are infeasible to enumerate, monoid tables are not.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterator

from .syntax import (
    And,
    AnySequent,
    Atom,
    Bottom,
    Bunch,
    EmptySequent,
    Formula,
    Imp,
    MultTop,
    Or,
    Sequent,
    Star,
    Top,
    Wand,
    compact,
    formula_str,
    sequent_atoms,
    sequent_formulas,
    subformulas,
)


class ModelError(ValueError):
    pass


class EnumerationBudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class Frame:
    worlds: tuple[str, ...]
    e: str
    pi: str
    leq: frozenset[tuple[str, str]]
    rel: frozenset[tuple[str, str, str]]  # R(w, u, v): w decomposes as u and v


def check_frame(f: Frame) -> tuple[bool, list[str]]:
    """Verify the frame conditions by finite enumeration."""
    bad: list[str] = []
    ws = set(f.worlds)
    if f.e not in ws or f.pi not in ws:
        bad.append("designated elements must be worlds")
        return False, bad
    for w in f.worlds:
        if (w, w) not in f.leq:
            bad.append(f"preorder not reflexive at {w}")
        if (w, f.pi) not in f.leq:
            bad.append(f"preorder not dominated by {f.pi} at {w}")
    for (a, b), (c, d) in itertools.product(f.leq, f.leq):
        if b == c and (a, d) not in f.leq:
            bad.append(f"preorder not transitive via {a} <= {b} <= {d}")
    for w in f.worlds:
        if (w, w, f.e) not in f.rel:
            bad.append(f"unitality fails at {w}")
    for (x, y, z) in f.rel:
        if (x, z, y) not in f.rel:
            bad.append(f"commutativity fails at R({x},{y},{z})")
    for (x, w, y) in f.rel:
        for (y2, u, v) in f.rel:
            if y2 != y:
                continue
            if not any((x, z, v) in f.rel and (z, w, u) in f.rel for z in f.worlds):
                bad.append(f"associativity fails at R({x},{w},{y}), R({y},{u},{v})")
    return not bad, bad


Interpretation = dict[str, frozenset[str]]


@dataclass
class Model:
    frame: Frame
    interp: Interpretation
    _memo: dict[tuple[str, Formula], bool] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for w in self.frame.worlds:
            self.interp.setdefault(w, frozenset())


def satisfies(m: Model, w: str, f: Formula) -> bool:
    """The satisfaction clauses, memoized per world and subformula."""
    key = (w, f)
    hit = m._memo.get(key)
    if hit is not None:
        return hit
    fr = m.frame
    if isinstance(f, Atom):
        out = f.name in m.interp.get(w, frozenset())
    elif isinstance(f, Top):
        out = True
    elif isinstance(f, MultTop):
        out = (fr.e, w) in fr.leq
    elif isinstance(f, Bottom):
        out = w == fr.pi
    elif isinstance(f, And):
        out = satisfies(m, w, f.left) and satisfies(m, w, f.right)
    elif isinstance(f, Or):
        out = satisfies(m, w, f.left) or satisfies(m, w, f.right)
    elif isinstance(f, Imp):
        out = all(satisfies(m, v, f.right)
                  for v in fr.worlds
                  if (w, v) in fr.leq and satisfies(m, v, f.left))
    elif isinstance(f, Star):
        out = any(satisfies(m, u, f.left) and satisfies(m, v, f.right)
                  for (x, u, v) in fr.rel if x == w)
    elif isinstance(f, Wand):
        out = all(satisfies(m, v, f.right)
                  for (v, x, u) in fr.rel
                  if x == w and satisfies(m, u, f.left))
    else:
        raise ModelError(f"no clause for {f!r}")
    m._memo[key] = out
    return out


def satisfies_bunch(m: Model, w: str, g: Bunch) -> bool:
    return satisfies(m, w, compact(g))


def closure(fs: set[Formula]) -> set[Formula]:
    out: set[Formula] = set()
    for f in fs:
        out |= subformulas(f)
    return out


def check_model(m: Model, fs: set[Formula]) -> tuple[bool, list[str]]:
    """Persistence and pi-absurdity over the subformula closure of fs."""
    bad: list[str] = []
    for f in sorted(closure(fs), key=formula_str):
        for (w, u) in m.frame.leq:
            if satisfies(m, w, f) and not satisfies(m, u, f):
                bad.append(f"persistence fails: {w} |= {formula_str(f)} but not {u}")
        if not satisfies(m, m.frame.pi, f):
            bad.append(f"pi-absurdity fails at {formula_str(f)}")
    return not bad, bad


def valid_in(m: Model, s: AnySequent) -> bool:
    """Validity of the sequent in one model, at every world."""
    if isinstance(s, EmptySequent):
        return True
    return all(satisfies(m, w, s.extract)
               for w in m.frame.worlds
               if satisfies_bunch(m, w, s.context))


def refuting_world(m: Model, s: Sequent) -> str | None:
    for w in m.frame.worlds:
        if satisfies_bunch(m, w, s.context) and not satisfies(m, w, s.extract):
            return w
    return None


# ---------------------------------------------------------------------------
# Preordered commutative monoids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PCM:
    elements: tuple[str, ...]
    unit: str
    top: str
    product: tuple[tuple[str, ...], ...]  # table indexed by element position
    leq: frozenset[tuple[str, str]]

    def index(self, x: str) -> int:
        return self.elements.index(x)

    def mul(self, x: str, y: str) -> str:
        return self.product[self.index(x)][self.index(y)]


def check_pcm(m: PCM) -> tuple[bool, list[str]]:
    bad = []
    es = m.elements
    for x in es:
        if m.mul(x, m.unit) != x or m.mul(m.unit, x) != x:
            bad.append(f"unit law fails at {x}")
        if (x, x) not in m.leq:
            bad.append(f"preorder not reflexive at {x}")
        if (x, m.top) not in m.leq:
            bad.append(f"preorder not dominated at {x}")
    for x, y in itertools.product(es, es):
        if m.mul(x, y) != m.mul(y, x):
            bad.append(f"commutativity fails at {x},{y}")
    for x, y, z in itertools.product(es, es, es):
        if m.mul(m.mul(x, y), z) != m.mul(x, m.mul(y, z)):
            bad.append(f"associativity fails at {x},{y},{z}")
    for (a, b), (c, d) in itertools.product(m.leq, m.leq):
        if b == c and (a, d) not in m.leq:
            bad.append("preorder not transitive")
    return not bad, bad


def is_bifunctorial(m: PCM) -> bool:
    for (u, u2) in m.leq:
        for (v, v2) in m.leq:
            if (m.mul(u, v), m.mul(u2, v2)) not in m.leq:
                return False
    return True


def pcm_to_frame(m: PCM) -> Frame:
    ok, bad = check_pcm(m)
    if not ok:
        raise ModelError("; ".join(bad))
    rel = frozenset((m.mul(u, v), u, v)
                    for u, v in itertools.product(m.elements, m.elements))
    return Frame(m.elements, m.unit, m.top, m.leq, rel)


# ---------------------------------------------------------------------------
# Countermodel enumeration
# ---------------------------------------------------------------------------

MAX_SIZE_CAP = 4


def _upsets(worlds: tuple[str, ...], leq: frozenset, pi: str) -> list[frozenset[str]]:
    out = []
    for bits in range(1 << len(worlds)):
        s = frozenset(w for k, w in enumerate(worlds) if bits >> k & 1)
        if pi not in s:
            continue
        if all(v in s for w in s for (w2, v) in leq if w2 == w):
            out.append(s)
    return sorted(out, key=lambda s: (len(s), sorted(s)))


def _preorders(worlds: tuple[str, ...], pi: str) -> Iterator[frozenset]:
    """Preorders with pi strictly on top, in a canonical order."""
    base = {(w, w) for w in worlds} | {(w, pi) for w in worlds}
    others = [w for w in worlds if w != pi]
    free = [(a, b) for a in others for b in others if a != b]
    for bits in range(1 << len(free)):
        extra = {free[k] for k in range(len(free)) if bits >> k & 1}
        rel = base | extra
        if all((a, d) in rel for (a, b) in rel for (c, d) in rel if b == c):
            yield frozenset(rel)


def _products(worlds: tuple[str, ...], e: str, pi: str) -> Iterator[dict]:
    """Commutative, associative tables with unit e and absorbing pi."""
    mids = [w for w in worlds if w not in (e, pi)]
    pairs = [(a, b) for i, a in enumerate(mids) for b in mids[i:]]
    for values in itertools.product(worlds, repeat=len(pairs)):
        table: dict[tuple[str, str], str] = {}
        for w in worlds:
            table[(w, e)] = table[(e, w)] = w
            table[(w, pi)] = table[(pi, w)] = pi
        for (a, b), v in zip(pairs, values):
            table[(a, b)] = table[(b, a)] = v
        if all(table[(table[(x, y)], z)] == table[(x, table[(y, z)])]
               for x in worlds for y in worlds for z in worlds):
            yield table


def enumerate_pcms(max_size: int) -> Iterator[PCM]:
    """All canonical PCMs of each size, bifunctorial ones only."""
    for n in range(1, max_size + 1):
        worlds = tuple(f"w{i}" for i in range(n))
        e = worlds[0]
        pi = worlds[-1]
        for table in _products(worlds, e, pi):
            rows = tuple(tuple(table[(a, b)] for b in worlds) for a in worlds)
            for leq in _preorders(worlds, pi):
                pcm = PCM(worlds, e, pi, rows, leq)
                if is_bifunctorial(pcm):
                    yield pcm


def enumerate_models(atoms: list[str], max_size: int,
                     check_formulas: set[Formula] | None = None) -> Iterator[Model]:
    """Models over PCM-generated frames with persistent interpretations.

    When check_formulas is given, only models passing check_model on their
    subformula closure are produced.
    """
    atoms = sorted(atoms)
    for pcm in enumerate_pcms(max_size):
        frame = pcm_to_frame(pcm)
        ups = _upsets(frame.worlds, frame.leq, frame.pi)
        for choice in itertools.product(ups, repeat=len(atoms)):
            interp = {w: frozenset(a for a, s in zip(atoms, choice) if w in s)
                      for w in frame.worlds}
            model = Model(frame, interp)
            if check_formulas is not None:
                ok, _ = check_model(model, check_formulas)
                if not ok:
                    continue
            yield model


@dataclass
class Countermodel:
    model: Model
    world: str


def countermodel(s: Sequent, max_size: int = MAX_SIZE_CAP) -> Countermodel | None:
    """First refuting model in the canonical enumeration, or None."""
    if max_size > MAX_SIZE_CAP:
        raise EnumerationBudgetExceeded(
            f"max size {max_size} exceeds the configured cap {MAX_SIZE_CAP}")
    atoms = sorted(sequent_atoms(s)) or ["p"]
    fs = sequent_formulas(s)
    for model in enumerate_models(atoms, max_size, check_formulas=fs):
        w = refuting_world(model, s)
        if w is not None:
            return Countermodel(model, w)
    return None


# ---------------------------------------------------------------------------
# Model files
# ---------------------------------------------------------------------------

def model_to_dict(m: Model) -> dict:
    f = m.frame
    return {
        "worlds": list(f.worlds),
        "e": f.e,
        "pi": f.pi,
        "leq": sorted([a, b] for a, b in f.leq),
        "R": sorted([w, u, v] for w, u, v in f.rel),
        "interp": {w: sorted(m.interp.get(w, frozenset())) for w in f.worlds},
    }


def model_from_dict(d: dict) -> Model:
    worlds = tuple(d["worlds"])
    leq = frozenset((a, b) for a, b in d["leq"])
    if "R" in d:
        rel = frozenset((w, u, v) for w, u, v in d["R"])
    elif "product" in d:
        table = d["product"]
        rel = frozenset((table[u][v], u, v) for u in table for v in table[u])
    else:
        raise ModelError("model file needs an R relation or a product table")
    frame = Frame(worlds, d["e"], d["pi"], leq, rel)
    ok, bad = check_frame(frame)
    if not ok:
        raise ModelError("; ".join(bad))
    interp = {w: frozenset(v) for w, v in d.get("interp", {}).items()}
    return Model(frame, interp)


def save_model(m: Model, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(m), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_model(path: str) -> Model:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
