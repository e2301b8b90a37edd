"""The two-sorted meta-logic: terms, the frame/satisfaction theory,
meta-sequents, derivation checking, resolutions, packing and unpacking.

World terms are variables plus the constants e and pi; formula terms are
object formulas that may contain formula variables.  The theory consists
of five frame sentences and twelve satisfaction-clause directions: the
truth clause keeps only its producing direction, the falsity clause only
its decomposing one (the other is subsumed by absurdity), and there is
no clause for atoms or for the multiplicative top.

Derivations are trees of meta-sequents labelled by rules of the
multiple-conclusioned intuitionistic system; the classical extensions
(multi-conclusion implication/universal right, contraction) check only
under the `classical` flag.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass

from .syntax import (
    And,
    AnySequent,
    Bottom,
    Bunch,
    Comma,
    EmptySequent,
    Formula,
    Imp,
    Leaf,
    AddUnit,
    MultUnit,
    MultTop,
    Or,
    Semi,
    Star,
    Top,
    Wand,
    compact,
    formula_str,
    parse_formula,
)


class MetaError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WVar:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class WConst:
    name: str  # "e" or "pi"

    def __str__(self) -> str:
        return self.name


E = WConst("e")
PI = WConst("pi")
WTerm = WVar | WConst


@dataclass(frozen=True)
class FVar(Formula):
    """A formula variable; only appears inside schematic theory sentences."""

    var: str


def fvars_of(f: Formula) -> set[str]:
    if isinstance(f, FVar):
        return {f.var}
    if isinstance(f, (And, Or, Imp, Star, Wand)):
        return fvars_of(f.left) | fvars_of(f.right)
    return set()


def fsubst(f: Formula, name: str, value: Formula) -> Formula:
    if isinstance(f, FVar):
        return value if f.var == name else f
    if isinstance(f, (And, Or, Imp, Star, Wand)):
        return type(f)(fsubst(f.left, name, value), fsubst(f.right, name, value))
    return f


# ---------------------------------------------------------------------------
# Meta-formulas
# ---------------------------------------------------------------------------

class MetaFormula:
    __slots__ = ()

    def __str__(self) -> str:
        return meta_str(self)


@dataclass(frozen=True)
class Sat(MetaFormula):
    world: WTerm
    formula: Formula


@dataclass(frozen=True)
class RAtom(MetaFormula):
    x: WTerm
    y: WTerm
    z: WTerm


@dataclass(frozen=True)
class LeqAtom(MetaFormula):
    x: WTerm
    y: WTerm


@dataclass(frozen=True)
class EqAtom(MetaFormula):
    x: WTerm
    y: WTerm


@dataclass(frozen=True)
class Amp(MetaFormula):
    left: MetaFormula
    right: MetaFormula


@dataclass(frozen=True)
class Par(MetaFormula):
    left: MetaFormula
    right: MetaFormula


@dataclass(frozen=True)
class MImp(MetaFormula):
    left: MetaFormula
    right: MetaFormula


@dataclass(frozen=True)
class ForallW(MetaFormula):
    var: str
    body: MetaFormula


@dataclass(frozen=True)
class ExistsW(MetaFormula):
    var: str
    body: MetaFormula


@dataclass(frozen=True)
class ForallF(MetaFormula):
    var: str
    body: MetaFormula


@dataclass(frozen=True)
class ExistsF(MetaFormula):
    var: str
    body: MetaFormula


@dataclass(frozen=True)
class Verum(MetaFormula):
    pass


@dataclass(frozen=True)
class Falsum(MetaFormula):
    pass


VERUM = Verum()
FALSUM = Falsum()

_QUANTS = (ForallW, ExistsW, ForallF, ExistsF)
_WORLD_QUANTS = (ForallW, ExistsW)


def is_assertion(phi: MetaFormula) -> bool:
    return isinstance(phi, Sat)


def is_meta_atom(phi: MetaFormula) -> bool:
    return isinstance(phi, (Sat, RAtom, LeqAtom, EqAtom))


def free_wvars(phi: MetaFormula) -> set[str]:
    if isinstance(phi, Sat):
        return {phi.world.name} if isinstance(phi.world, WVar) else set()
    if isinstance(phi, RAtom):
        return {t.name for t in (phi.x, phi.y, phi.z) if isinstance(t, WVar)}
    if isinstance(phi, (LeqAtom, EqAtom)):
        return {t.name for t in (phi.x, phi.y) if isinstance(t, WVar)}
    if isinstance(phi, (Amp, Par, MImp)):
        return free_wvars(phi.left) | free_wvars(phi.right)
    if isinstance(phi, _WORLD_QUANTS):
        return free_wvars(phi.body) - {phi.var}
    if isinstance(phi, (ForallF, ExistsF)):
        return free_wvars(phi.body)
    return set()


def free_fvars(phi: MetaFormula) -> set[str]:
    if isinstance(phi, Sat):
        return fvars_of(phi.formula)
    if isinstance(phi, (Amp, Par, MImp)):
        return free_fvars(phi.left) | free_fvars(phi.right)
    if isinstance(phi, (ForallF, ExistsF)):
        return free_fvars(phi.body) - {phi.var}
    if isinstance(phi, _WORLD_QUANTS):
        return free_fvars(phi.body)
    return set()


def wsubst(phi: MetaFormula, name: str, term: WTerm) -> MetaFormula:
    """Capture-avoiding substitution of a world term for a free variable."""

    def st(t: WTerm) -> WTerm:
        return term if isinstance(t, WVar) and t.name == name else t

    if isinstance(phi, Sat):
        return Sat(st(phi.world), phi.formula)
    if isinstance(phi, RAtom):
        return RAtom(st(phi.x), st(phi.y), st(phi.z))
    if isinstance(phi, LeqAtom):
        return LeqAtom(st(phi.x), st(phi.y))
    if isinstance(phi, EqAtom):
        return EqAtom(st(phi.x), st(phi.y))
    if isinstance(phi, (Amp, Par, MImp)):
        return type(phi)(wsubst(phi.left, name, term), wsubst(phi.right, name, term))
    if isinstance(phi, _WORLD_QUANTS):
        if phi.var == name or name not in free_wvars(phi.body):
            return phi
        if isinstance(term, WVar) and phi.var == term.name:
            fresh = phi.var + "'"
            avoid = free_wvars(phi.body) | {term.name, name}
            while fresh in avoid:
                fresh += "'"
            renamed = wsubst(phi.body, phi.var, WVar(fresh))
            return type(phi)(fresh, wsubst(renamed, name, term))
        return type(phi)(phi.var, wsubst(phi.body, name, term))
    if isinstance(phi, (ForallF, ExistsF)):
        return type(phi)(phi.var, wsubst(phi.body, name, term))
    return phi


def fsubst_meta(phi: MetaFormula, name: str, value: Formula) -> MetaFormula:
    if isinstance(phi, Sat):
        return Sat(phi.world, fsubst(phi.formula, name, value))
    if isinstance(phi, (Amp, Par, MImp)):
        return type(phi)(fsubst_meta(phi.left, name, value), fsubst_meta(phi.right, name, value))
    if isinstance(phi, (ForallF, ExistsF)):
        if phi.var == name:
            return phi
        return type(phi)(phi.var, fsubst_meta(phi.body, name, value))
    if isinstance(phi, _WORLD_QUANTS):
        return type(phi)(phi.var, fsubst_meta(phi.body, name, value))
    return phi


def meta_str(phi: MetaFormula) -> str:
    """Textual form: sat(w, F), R(x,y,z), x <= y, x = y, &, |, =>,
    forall w. / exists w. for worlds, forall $f. / exists $f. for formulas,
    [] for meta-verum and # for meta-falsum."""
    if isinstance(phi, Sat):
        return f"sat({phi.world}, {_pattern_str(phi.formula)})"
    if isinstance(phi, RAtom):
        return f"R({phi.x},{phi.y},{phi.z})"
    if isinstance(phi, LeqAtom):
        return f"{phi.x} <= {phi.y}"
    if isinstance(phi, EqAtom):
        return f"{phi.x} = {phi.y}"
    if isinstance(phi, Amp):
        return f"({meta_str(phi.left)} & {meta_str(phi.right)})"
    if isinstance(phi, Par):
        return f"({meta_str(phi.left)} | {meta_str(phi.right)})"
    if isinstance(phi, MImp):
        return f"({meta_str(phi.left)} => {meta_str(phi.right)})"
    if isinstance(phi, ForallW):
        return f"forall {phi.var}. {meta_str(phi.body)}"
    if isinstance(phi, ExistsW):
        return f"exists {phi.var}. {meta_str(phi.body)}"
    if isinstance(phi, ForallF):
        return f"forall ${phi.var}. {meta_str(phi.body)}"
    if isinstance(phi, ExistsF):
        return f"exists ${phi.var}. {meta_str(phi.body)}"
    if isinstance(phi, Verum):
        return "[]"
    return "#"


def _pattern_str(f: Formula) -> str:
    if isinstance(f, FVar):
        return f"${f.var}"
    if isinstance(f, (And, Or, Imp, Star, Wand)):
        op = {And: "/\\", Or: "\\/", Imp: "->", Star: "*", Wand: "-*"}[type(f)]
        return f"({_pattern_str(f.left)} {op} {_pattern_str(f.right)})"
    return formula_str(f)


# ---------------------------------------------------------------------------
# Meta-sequents
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetaSequent:
    context: tuple[MetaFormula, ...]
    extract: tuple[MetaFormula, ...]

    def __str__(self) -> str:
        lhs = ", ".join(meta_str(p) for p in self.context)
        rhs = ", ".join(meta_str(p) for p in self.extract)
        return f"{lhs} |- {rhs}"


@dataclass(frozen=True)
class EmptyMetaSequent:
    def __str__(self) -> str:
        return "|-"


EMPTY_META = EmptyMetaSequent()
AnyMetaSequent = MetaSequent | EmptyMetaSequent


def world_independent(a: set[MetaFormula] | list[MetaFormula],
                      b: set[MetaFormula] | list[MetaFormula]) -> bool:
    """No free world-variable of one side occurs in the other."""
    va: set[str] = set()
    vb: set[str] = set()
    for phi in a:
        va |= free_wvars(phi)
    for phi in b:
        vb |= free_wvars(phi)
    return not (va & vb)


# ---------------------------------------------------------------------------
# The theory
# ---------------------------------------------------------------------------

_PHI = FVar("phi")
_PSI = FVar("psi")


def _w(n: str) -> WVar:
    return WVar(n)


def _close_w(names: list[str], body: MetaFormula) -> MetaFormula:
    for n in reversed(names):
        body = ForallW(n, body)
    return body


def _close_f(names: list[str], body: MetaFormula) -> MetaFormula:
    for n in reversed(names):
        body = ForallF(n, body)
    return body


def frame_sentences() -> list[MetaFormula]:
    x, y, z, w, u, v = map(_w, "x y z w u v".split())
    unitality = _close_w(["x"], RAtom(x, x, E))
    commutativity = _close_w(
        ["x", "y", "z"],
        Amp(MImp(RAtom(x, y, z), RAtom(x, z, y)),
            MImp(RAtom(x, z, y), RAtom(x, y, z))))
    persistence = _close_f(["phi"], _close_w(
        ["w", "u"],
        MImp(LeqAtom(w, u), MImp(Sat(w, _PHI), Sat(u, _PHI)))))
    associativity = _close_w(
        ["x", "w", "y", "u", "v"],
        MImp(Amp(RAtom(x, w, y), RAtom(y, u, v)),
             ExistsW("z", Amp(RAtom(x, z, v), RAtom(z, w, u)))))
    absurdity = _close_f(["phi"], _close_w(
        ["w"], MImp(EqAtom(w, PI), Sat(w, _PHI))))
    return [unitality, commutativity, persistence, associativity, absurdity]


@dataclass(frozen=True)
class Clause:
    """One direction of a satisfaction clause: head and body patterns with
    their quantifier prefix; `produces` tells whether the head is the
    satisfaction assertion (producing direction) or the body is."""

    name: str
    direction: str  # "dec" decomposes the assertion, "prod" produces it
    fvars: tuple[str, ...]
    wvar: str
    head: MetaFormula
    body: MetaFormula

    def sentence(self) -> MetaFormula:
        return _close_f(list(self.fvars), _close_w([self.wvar], MImp(self.head, self.body)))

    def instantiate(self, fbind: dict[str, Formula], world: WTerm) -> tuple[MetaFormula, MetaFormula]:
        head, body = self.head, self.body
        for n, f in fbind.items():
            head = fsubst_meta(head, n, f)
            body = fsubst_meta(body, n, f)
        return wsubst(head, self.wvar, world), wsubst(body, self.wvar, world)


def _mk_clauses() -> list[Clause]:
    x = _w("x")
    both = ("phi", "psi")
    sat = Sat(x, _PHI)
    out = []

    def bi(name: str, fv, assertion: MetaFormula, expansion: MetaFormula):
        out.append(Clause(name, "dec", fv, "x", assertion, expansion))
        out.append(Clause(name, "prod", fv, "x", expansion, assertion))

    out.append(Clause("top", "prod", (), "x", VERUM, Sat(x, Top())))
    out.append(Clause("bot", "dec", (), "x", Sat(x, Bottom()), EqAtom(x, PI)))
    bi("and", both, Sat(x, And(_PHI, _PSI)), Amp(Sat(x, _PHI), Sat(x, _PSI)))
    bi("or", both, Sat(x, Or(_PHI, _PSI)), Par(Sat(x, _PHI), Sat(x, _PSI)))
    bi("imp", both, Sat(x, Imp(_PHI, _PSI)),
       ForallW("u", MImp(LeqAtom(x, _w("u")),
                         MImp(Sat(_w("u"), _PHI), Sat(_w("u"), _PSI)))))
    bi("star", both, Sat(x, Star(_PHI, _PSI)),
       ExistsW("u", ExistsW("v", Amp(Amp(RAtom(x, _w("u"), _w("v")),
                                         Sat(_w("u"), _PHI)),
                                     Sat(_w("v"), _PSI)))))
    bi("wand", both, Sat(x, Wand(_PHI, _PSI)),
       ForallW("u", ForallW("v", MImp(RAtom(_w("v"), x, _w("u")),
                                      MImp(Sat(_w("u"), _PHI), Sat(_w("v"), _PSI))))))
    return out


CLAUSES: list[Clause] = _mk_clauses()


def clause(name: str, direction: str) -> Clause:
    for c in CLAUSES:
        if c.name == name and c.direction == direction:
            return c
    raise MetaError(f"no {direction} direction for the {name} clause")


def satisfaction_sentences() -> list[MetaFormula]:
    return [c.sentence() for c in CLAUSES]


def sigma_bi() -> list[MetaFormula]:
    """The fixed theory: frame sentences plus the clause directions."""
    return frame_sentences() + satisfaction_sentences()


def frame_extras() -> list[MetaFormula]:
    """Frame facts the certification fragments additionally draw on:
    reflexivity of the preorder (used silently even by pen-and-paper
    resolutions on implications), bifunctoriality, and the two
    multiplicative-top directions.  They hold in every frame the model
    checker accepts and in every monoid-generated frame."""
    x, u, uu, v, vv, w, ww = map(_w, "x u uu v vv w ww".split())
    reflexivity = _close_w(["x"], LeqAtom(x, x))
    bifunctoriality = _close_w(
        ["u", "uu", "v", "vv", "w", "ww"],
        MImp(Amp(Amp(Amp(LeqAtom(u, uu), LeqAtom(v, vv)), RAtom(w, u, v)),
                 RAtom(ww, uu, vv)),
             LeqAtom(w, ww)))
    topstar_prod = _close_w(["x"], MImp(LeqAtom(E, x), Sat(x, MultTop())))
    topstar_dec = _close_w(["x"], MImp(Sat(x, MultTop()), LeqAtom(E, x)))
    return [reflexivity, bifunctoriality, topstar_prod, topstar_dec]


def certification_theory() -> list[MetaFormula]:
    return sigma_bi() + frame_extras()


def embed(s: AnySequent, world: str | WTerm, theory: list[MetaFormula] | None = None) -> MetaSequent:
    """The basic validity sequent for a BI sequent at a generic world."""
    if isinstance(s, EmptySequent):
        raise MetaError("the empty sequent has no validity embedding")
    w = WVar(world) if isinstance(world, str) else world
    th = sigma_bi() if theory is None else theory
    return MetaSequent(tuple(th) + (Sat(w, compact(s.context)),), (Sat(w, s.extract),))


# ---------------------------------------------------------------------------
# The derivation system
# ---------------------------------------------------------------------------

class DljRule(enum.Enum):
    WL = "wL"
    WR = "wR"
    EL = "eL"
    ER = "eR"
    AMP_L = "ampL"
    AMP_R = "ampR"
    PAR_L = "parL"
    PAR_R = "parR"
    IMP_L = "impL"
    IMP_R = "impR"
    FORALL_L = "forallL"
    FORALL_R = "forallR"
    EXISTS_L = "existsL"
    EXISTS_R = "existsR"
    ID = "id"
    VERUM_R = "verumR"
    # classical extensions, admissible over validity sequents
    FORALL_K = "forallK"
    IMP_K = "impK"
    CONTR_L = "cL"
    CONTR_R = "cR"


CLASSICAL_RULES = {DljRule.FORALL_K, DljRule.IMP_K, DljRule.CONTR_L, DljRule.CONTR_R}


@dataclass(frozen=True, eq=False)
class MetaDerivation:
    sequent: AnyMetaSequent
    rule: DljRule | None  # None marks the closing box or an open leaf
    payload: object = None
    children: tuple["MetaDerivation", ...] = ()

    def is_box(self) -> bool:
        return isinstance(self.sequent, EmptyMetaSequent) and self.rule is None

    def is_open(self) -> bool:
        return self.rule is None and not isinstance(self.sequent, EmptyMetaSequent)

    def size(self) -> int:
        total = 0
        stack = [self]
        while stack:
            node = stack.pop()
            total += 1
            stack.extend(node.children)
        return total

    def open_leaves(self) -> list["MetaDerivation"]:
        out = []
        stack = [self]
        while stack:
            node = stack.pop()
            if node.is_open():
                out.append(node)
            stack.extend(reversed(node.children))
        return list(reversed(out))


META_BOX = MetaDerivation(EMPTY_META, None)


class DljMismatch(MetaError):
    pass


def _subst_any(body: MetaFormula, var: str, term, world_sort: bool) -> MetaFormula:
    if world_sort:
        if not isinstance(term, (WVar, WConst)):
            raise DljMismatch("world quantifier needs a world term")
        return wsubst(body, var, term)
    if not isinstance(term, Formula):
        raise DljMismatch("formula quantifier needs a formula term")
    return fsubst_meta(body, var, term)


def _eigen_ok(name: str, seq_parts: list[MetaFormula], world_sort: bool) -> bool:
    for phi in seq_parts:
        used = free_wvars(phi) if world_sort else free_fvars(phi)
        if name in used:
            return False
    return True


def dlj_premisses(seq: AnyMetaSequent, rule: DljRule, payload=None) -> list[AnyMetaSequent]:
    """Premisses of one rule application; raises DljMismatch on schema
    violations.  Shared by the checker and every fragment builder."""
    if isinstance(seq, EmptyMetaSequent):
        raise DljMismatch("no rule applies to the box")
    ctx, ext = list(seq.context), list(seq.extract)

    def ms(c, e):
        return MetaSequent(tuple(c), tuple(e))

    if rule is DljRule.ID:
        if len(ctx) == 1 and len(ext) == 1 and ctx[0] == ext[0]:
            return [EMPTY_META]
        raise DljMismatch("id wants a single matching formula on each side")
    if rule is DljRule.VERUM_R:
        if len(ctx) == 1 and ext == [VERUM]:
            return [EMPTY_META]
        raise DljMismatch("verum axiom wants one context formula and the verum extract")
    if rule is DljRule.WL:
        if not ctx:
            raise DljMismatch("weakening wants a context head")
        return [ms(ctx[1:], ext)]
    if rule is DljRule.WR:
        if not ext:
            raise DljMismatch("weakening wants an extract")
        return [ms(ctx, ext[:-1])]
    if rule is DljRule.EL:
        i = payload
        if not isinstance(i, int) or not 0 <= i < len(ctx) - 1:
            raise DljMismatch("exchange index out of range")
        ctx[i], ctx[i + 1] = ctx[i + 1], ctx[i]
        return [ms(ctx, ext)]
    if rule is DljRule.ER:
        i = payload
        if not isinstance(i, int) or not 0 <= i < len(ext) - 1:
            raise DljMismatch("exchange index out of range")
        ext[i], ext[i + 1] = ext[i + 1], ext[i]
        return [ms(ctx, ext)]
    if rule is DljRule.AMP_L:
        if not ctx or not isinstance(ctx[0], Amp):
            raise DljMismatch("conjunction-left wants a conjunction head")
        return [ms([ctx[0].left, ctx[0].right] + ctx[1:], ext)]
    if rule is DljRule.AMP_R:
        if not ext or not isinstance(ext[-1], Amp):
            raise DljMismatch("conjunction-right wants a conjunction extract")
        phi = ext[-1]
        return [ms(ctx, [phi.left] + ext[:-1]), ms(ctx, [phi.right] + ext[:-1])]
    if rule is DljRule.PAR_L:
        if not ctx or not isinstance(ctx[0], Par):
            raise DljMismatch("disjunction-left wants a disjunction head")
        return [ms([ctx[0].left] + ctx[1:], ext), ms([ctx[0].right] + ctx[1:], ext)]
    if rule is DljRule.PAR_R:
        if not ext or not isinstance(ext[-1], Par):
            raise DljMismatch("disjunction-right wants a disjunction extract")
        return [ms(ctx, ext[:-1] + [ext[-1].left, ext[-1].right])]
    if rule is DljRule.IMP_R:
        if len(ext) != 1 or not isinstance(ext[0], MImp):
            raise DljMismatch("implication-right is single-conclusioned")
        return [ms([ext[0].left] + ctx, [ext[0].right])]
    if rule is DljRule.IMP_K:
        if not ext or not isinstance(ext[-1], MImp):
            raise DljMismatch("classical implication-right wants an implication extract")
        return [ms([ext[-1].left] + ctx, ext[:-1] + [ext[-1].right])]
    if rule is DljRule.IMP_L:
        if not ctx or not isinstance(ctx[0], MImp):
            raise DljMismatch("implication-left wants an implication head")
        return [ms(ctx[1:], ext + [ctx[0].left]), ms([ctx[0].right] + ctx[1:], ext)]
    if rule is DljRule.FORALL_L:
        if not ctx or not isinstance(ctx[0], (ForallW, ForallF)):
            raise DljMismatch("universal-left wants a universal head")
        q = ctx[0]
        return [ms([_subst_any(q.body, q.var, payload, isinstance(q, ForallW))] + ctx[1:], ext)]
    if rule is DljRule.FORALL_R:
        if len(ext) != 1 or not isinstance(ext[0], (ForallW, ForallF)):
            raise DljMismatch("universal-right is single-conclusioned")
        q = ext[0]
        name = payload
        world_sort = isinstance(q, ForallW)
        if not isinstance(name, str) or not _eigen_ok(name, ctx + ext, world_sort):
            raise DljMismatch("eigenvariable not fresh")
        term = WVar(name) if world_sort else FVar(name)
        return [ms(ctx, [_subst_any(q.body, q.var, term, world_sort)])]
    if rule is DljRule.FORALL_K:
        if not ext or not isinstance(ext[-1], (ForallW, ForallF)):
            raise DljMismatch("classical universal-right wants a universal extract")
        q = ext[-1]
        name = payload
        world_sort = isinstance(q, ForallW)
        if not isinstance(name, str) or not _eigen_ok(name, ctx + ext, world_sort):
            raise DljMismatch("eigenvariable not fresh")
        term = WVar(name) if world_sort else FVar(name)
        return [ms(ctx, ext[:-1] + [_subst_any(q.body, q.var, term, world_sort)])]
    if rule is DljRule.EXISTS_L:
        if not ctx or not isinstance(ctx[0], (ExistsW, ExistsF)):
            raise DljMismatch("existential-left wants an existential head")
        q = ctx[0]
        name = payload
        world_sort = isinstance(q, ExistsW)
        if not isinstance(name, str) or not _eigen_ok(name, ctx + ext, world_sort):
            raise DljMismatch("eigenvariable not fresh")
        term = WVar(name) if world_sort else FVar(name)
        return [ms([_subst_any(q.body, q.var, term, world_sort)] + ctx[1:], ext)]
    if rule is DljRule.EXISTS_R:
        if not ext or not isinstance(ext[-1], (ExistsW, ExistsF)):
            raise DljMismatch("existential-right wants an existential extract")
        q = ext[-1]
        return [ms(ctx, ext[:-1] + [_subst_any(q.body, q.var, payload, isinstance(q, ExistsW))])]
    if rule is DljRule.CONTR_L:
        if not ctx:
            raise DljMismatch("contraction wants a context head")
        return [ms([ctx[0]] + ctx, ext)]
    if rule is DljRule.CONTR_R:
        if not ext:
            raise DljMismatch("contraction wants an extract")
        return [ms(ctx, ext + [ext[-1]])]
    raise DljMismatch(f"unknown rule {rule}")


@dataclass(frozen=True)
class DljCheck:
    ok: bool
    path: tuple[int, ...] = ()
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


def check_dlj(d: MetaDerivation, classical: bool = False, allow_open: bool = False) -> DljCheck:
    """Validate every node against the rule schemas, iteratively."""
    stack: list[tuple[MetaDerivation, tuple[int, ...]]] = [(d, ())]
    while stack:
        node, path = stack.pop()
        if node.is_box():
            continue
        if node.rule is None:
            if allow_open:
                continue
            return DljCheck(False, path, "open leaf")
        if node.rule in CLASSICAL_RULES and not classical:
            return DljCheck(False, path, f"{node.rule.value} needs the classical flag")
        try:
            want = dlj_premisses(node.sequent, node.rule, node.payload)
        except DljMismatch as exc:
            return DljCheck(False, path, f"{node.rule.value}: {exc}")
        if len(want) != len(node.children):
            return DljCheck(False, path, f"{node.rule.value}: arity mismatch")
        for i, (child, w) in enumerate(zip(node.children, want)):
            if child.sequent != w:
                return DljCheck(False, path + (i,),
                                f"premiss mismatch under {node.rule.value}: want {w}, have {child.sequent}")
            stack.append((child, path + (i,)))
    return DljCheck(True)


def world_conservative(d: MetaDerivation) -> bool:
    """Instantiating world-variables of universal-left / existential-right
    steps must already occur in the conclusion."""
    stack = [d]
    while stack:
        node = stack.pop()
        if node.rule in (DljRule.FORALL_L, DljRule.EXISTS_R) and isinstance(node.payload, WVar):
            used: set[str] = set()
            if isinstance(node.sequent, MetaSequent):
                for phi in node.sequent.context + node.sequent.extract:
                    used |= free_wvars(phi)
            if node.payload.name not in used:
                return False
        stack.extend(node.children)
    return True


# ---------------------------------------------------------------------------
# Derivation building
# ---------------------------------------------------------------------------

class Cursor:
    """Builds a derivation along one spine, validating every step through
    the shared schema engine; side premisses are supplied as completed
    (possibly open-leaved) derivations."""

    def __init__(self, root: MetaSequent):
        self.seq: AnyMetaSequent = root
        self._trail: list[tuple] = []
        self._used_names: set[str] = set()
        if isinstance(root, MetaSequent):
            for phi in root.context + root.extract:
                self._used_names |= free_wvars(phi)

    @property
    def ctx(self) -> tuple[MetaFormula, ...]:
        assert isinstance(self.seq, MetaSequent)
        return self.seq.context

    @property
    def ext(self) -> tuple[MetaFormula, ...]:
        assert isinstance(self.seq, MetaSequent)
        return self.seq.extract

    def fresh_w(self, hint: str = "w") -> str:
        i = 0
        while f"{hint}{i}" in self._used_names:
            i += 1
        name = f"{hint}{i}"
        self._used_names.add(name)
        return name

    def preview(self, rule: DljRule, payload=None) -> list[AnyMetaSequent]:
        return dlj_premisses(self.seq, rule, payload)

    def step(self, rule: DljRule, payload=None, pick: int = 0,
             sides: dict[int, MetaDerivation] | None = None) -> None:
        prems = dlj_premisses(self.seq, rule, payload)
        self._trail.append((self.seq, rule, payload, tuple(prems), pick, dict(sides or {})))
        self.seq = prems[pick]
        if isinstance(self.seq, MetaSequent):
            for phi in self.seq.context + self.seq.extract:
                self._used_names |= free_wvars(phi)

    def finish(self, tail: MetaDerivation | None = None) -> MetaDerivation:
        d = tail if tail is not None else MetaDerivation(self.seq, None)
        if d.sequent != self.seq:
            raise MetaError(f"tail proves {d.sequent}, spine reached {self.seq}")
        for seq, rule, payload, prems, pick, sides in reversed(self._trail):
            children = []
            for i, p in enumerate(prems):
                if i == pick:
                    children.append(d)
                else:
                    sub = sides[i]
                    if sub.sequent != p:
                        raise MetaError(f"side branch proves {sub.sequent}, wants {p}")
                    children.append(sub)
            d = MetaDerivation(seq, rule, payload, tuple(children))
        return d

    # -- context juggling ---------------------------------------------------

    def ctx_index(self, phi: MetaFormula, skip: int = 0) -> int:
        hits = [i for i, p in enumerate(self.ctx) if p == phi]
        if len(hits) <= skip:
            raise MetaError(f"formula not in context: {meta_str(phi)}")
        return hits[skip]

    def to_front(self, i: int) -> None:
        for k in range(i - 1, -1, -1):
            self.step(DljRule.EL, k)

    def wl_at(self, i: int) -> None:
        self.to_front(i)
        self.step(DljRule.WL)

    def wl_formula(self, phi: MetaFormula) -> None:
        self.wl_at(self.ctx_index(phi))

    def ctx_to_back(self, i: int) -> None:
        for k in range(i, len(self.ctx) - 1):
            self.step(DljRule.EL, k)

    def pull(self, i: int) -> None:
        """Duplicate ctx[i] to the front, restoring the original layout."""
        self.to_front(i)
        self.step(DljRule.CONTR_L)
        for k in range(1, i + 1):
            self.step(DljRule.EL, k)


def derive_close(seq: MetaSequent, target: MetaFormula | None = None) -> MetaDerivation:
    """Close a sequent whose context and extract share a formula: weaken
    and exchange everything else away, then use the identity axiom."""
    if target is None:
        for c in seq.context:
            if c in seq.extract:
                target = c
                break
    if target is None or target not in seq.context or target not in seq.extract:
        raise MetaError(f"no matching pair to close: {seq}")
    cur = Cursor(seq)
    # strip the extract down to one copy of the target
    while len(cur.ext) > 1:
        if cur.ext[-1] != target:
            cur.step(DljRule.WR)
        else:
            cur.step(DljRule.ER, len(cur.ext) - 2)
            cur.step(DljRule.WR)
    if cur.ext[0] != target:
        raise MetaError("lost the closing formula")
    # strip the context down to one copy
    removed_one = False
    while len(cur.ctx) > 1:
        if cur.ctx[0] == target and not any(p == target for p in cur.ctx[1:]):
            cur.step(DljRule.EL, 0)
        cur.step(DljRule.WL)
    cur.step(DljRule.ID)
    return cur.finish(META_BOX)


def derive_verum(seq: MetaSequent) -> MetaDerivation:
    """Close a sequent whose extract contains the meta-verum."""
    if VERUM not in seq.extract:
        raise MetaError("no verum to close on")
    cur = Cursor(seq)
    while len(cur.ext) > 1:
        if cur.ext[-1] != VERUM or all(p != VERUM for p in cur.ext[:-1]):
            if cur.ext[-1] == VERUM:
                cur.step(DljRule.ER, len(cur.ext) - 2)
            cur.step(DljRule.WR)
        else:
            cur.step(DljRule.WR)
    while len(cur.ctx) > 1:
        cur.step(DljRule.WL)
    cur.step(DljRule.VERUM_R)
    return cur.finish(META_BOX)


def derive_conj(seq: MetaSequent, j: int | None = None) -> MetaDerivation:
    """Prove the extract formula at index j (default: last): a conjunction
    tree whose atoms are already in the context; verum conjuncts close by
    the verum axiom."""
    if j is None:
        j = len(seq.extract) - 1
    phi = seq.extract[j]
    if isinstance(phi, Amp):
        cur = Cursor(seq)
        for k in range(j, len(cur.ext) - 1):
            cur.step(DljRule.ER, k)
        prems = cur.preview(DljRule.AMP_R)
        tail = MetaDerivation(cur.seq, DljRule.AMP_R, None,
                              (derive_conj(prems[0], 0), derive_conj(prems[1], 0)))
        return cur.finish(tail)
    if phi == VERUM:
        return derive_verum(seq)
    return derive_close(seq, phi)


def use_sentence(cur: Cursor, sentence: MetaFormula, bindings: list,
                 select: int | None = None, discharge: int = 0) -> None:
    """Instantiate a theory sentence from the context (conserving it) and
    discharge leading implication antecedents from context atoms.

    `select` picks a conjunct when the matrix is a biconditional pair;
    `discharge` is how many antecedents close against the context, leaving
    the final consequent at the front of the context."""
    cur.pull(cur.ctx_index(sentence))
    binds = list(bindings)
    while isinstance(cur.ctx[0], (ForallW, ForallF)):
        cur.step(DljRule.FORALL_L, binds.pop(0))
    if binds:
        raise MetaError("too many bindings for the sentence")
    leftover = None
    if select is not None:
        cur.step(DljRule.AMP_L)
        if select == 1:
            cur.step(DljRule.EL, 0)
        leftover = cur.ctx[1]
    for _ in range(discharge):
        head = cur.ctx[0]
        if not isinstance(head, MImp):
            raise MetaError("nothing to discharge")
        prems = cur.preview(DljRule.IMP_L)
        cur.step(DljRule.IMP_L, pick=1, sides={0: derive_conj(prems[0])})
    if leftover is not None:
        cur.wl_at(cur.ctx_index(leftover, skip=1) if cur.ctx[0] == leftover else cur.ctx_index(leftover))


# ---------------------------------------------------------------------------
# Resolutions
# ---------------------------------------------------------------------------

@dataclass
class Resolution:
    sequent: MetaSequent
    derivation: MetaDerivation  # one open leaf per continuation


def resolve(ms: MetaSequent, name: str, direction: str,
            fbind: dict[str, Formula], world: WTerm) -> Resolution:
    """A closed resolution step: instantiate a satisfaction clause whose
    head matches an assertion of the sequent and replace it by the body."""
    c = clause(name, "dec" if direction == "left" else "prod")
    sentence = c.sentence()
    if sentence not in ms.context:
        raise MetaError("the clause sentence is not in the theory context")
    ante, cons = c.instantiate(fbind, world)  # the instance is ante => cons
    bindings = [fbind[n] for n in c.fvars] + [world]
    cur = Cursor(ms)
    if direction == "left":
        # decomposing: ante is the assertion, matched in the context
        if ante not in ms.context:
            raise MetaError(f"head {meta_str(ante)} matches no context assertion")
        cur.pull(cur.ctx_index(sentence))
        for b in bindings:
            cur.step(DljRule.FORALL_L, b)
        prems = cur.preview(DljRule.IMP_L)
        cur.step(DljRule.IMP_L, pick=1, sides={0: derive_close(prems[0])})
        cur.wl_formula(ante)
        return Resolution(cur.seq, cur.finish())
    if direction == "right":
        # producing: cons is the assertion, matched in the extract
        if cons not in ms.extract:
            raise MetaError(f"head {meta_str(cons)} matches no extract assertion")
        cur.pull(cur.ctx_index(sentence))
        for b in bindings:
            cur.step(DljRule.FORALL_L, b)
        prems = cur.preview(DljRule.IMP_L)
        cur.step(DljRule.IMP_L, pick=0, sides={1: derive_close(prems[1])})
        # the replaced head leaves the extract
        j = list(cur.ext).index(cons)
        for k in range(j, len(cur.ext) - 1):
            cur.step(DljRule.ER, k)
        cur.step(DljRule.WR)
        return Resolution(cur.seq, cur.finish())
    raise MetaError("direction must be left or right")


# ---------------------------------------------------------------------------
# Unpacking and packing
# ---------------------------------------------------------------------------

@dataclass
class UnpackResult:
    sequent: MetaSequent
    derivation: MetaDerivation  # single open leaf at the unpacked sequent


def unpack(ms: MetaSequent) -> UnpackResult:
    """Eagerly decompose conjunction/star assertions in the context with
    fresh eigenworlds for the existentials."""
    cur = Cursor(ms)
    and_s = clause("and", "dec").sentence()
    star_s = clause("star", "dec").sentence()
    while True:
        hit = None
        for i, phi in enumerate(cur.ctx):
            if isinstance(phi, Sat) and isinstance(phi.formula, (And, Star)) \
                    and not fvars_of(phi.formula):
                hit = (i, phi)
                break
        if hit is None:
            break
        _, phi = hit
        f = phi.formula
        if isinstance(f, And):
            use_sentence(cur, and_s, [f.left, f.right, phi.world], discharge=1)
            cur.step(DljRule.AMP_L)
        else:
            assert isinstance(f, Star)
            use_sentence(cur, star_s, [f.left, f.right, phi.world], discharge=1)
            cur.step(DljRule.EXISTS_L, cur.fresh_w())
            cur.step(DljRule.EXISTS_L, cur.fresh_w())
            cur.step(DljRule.AMP_L)
            cur.step(DljRule.AMP_L)
        cur.wl_formula(phi)
    return UnpackResult(cur.seq, cur.finish())


def pack(ms: MetaSequent, shape: Bunch) -> MetaSequent:
    """Inverse of unpacking: reassemble the atoms of the context into the
    single assertion dictated by the bunch shape."""
    if len(ms.extract) != 1 or not isinstance(ms.extract[0], Sat):
        raise MetaError("packing wants a single assertion extract")
    root = ms.extract[0].world
    atoms = [phi for phi in ms.context if is_meta_atom(phi)]
    rest = tuple(phi for phi in ms.context if not is_meta_atom(phi))

    def consume(pool: tuple, phi: MetaFormula) -> tuple | None:
        lst = list(pool)
        if phi in lst:
            lst.remove(phi)
            return tuple(lst)
        return None

    def match_formula(pool: tuple, w: WTerm, f: Formula) -> list[tuple]:
        if isinstance(f, And):
            out = []
            for p1 in match_formula(pool, w, f.left):
                out.extend(match_formula(p1, w, f.right))
            return out
        if isinstance(f, Star):
            out = []
            for atom in pool:
                if isinstance(atom, RAtom) and atom.x == w:
                    p1 = consume(pool, atom)
                    for p2 in match_formula(p1, atom.y, f.left):
                        out.extend(match_formula(p2, atom.z, f.right))
            return out
        p = consume(pool, Sat(w, f))
        return [p] if p is not None else []

    def match_bunch(pool: tuple, w: WTerm, b: Bunch) -> list[tuple]:
        if isinstance(b, Leaf):
            return match_formula(pool, w, b.formula)
        if isinstance(b, AddUnit):
            p = consume(pool, Sat(w, Top()))
            return [p] if p is not None else []
        if isinstance(b, MultUnit):
            p = consume(pool, Sat(w, MultTop()))
            return [p] if p is not None else []
        if isinstance(b, Semi):
            out = []
            for p1 in match_bunch(pool, w, b.left):
                out.extend(match_bunch(p1, w, b.right))
            return out
        assert isinstance(b, Comma)
        out = []
        for atom in pool:
            if isinstance(atom, RAtom) and atom.x == w:
                p1 = consume(pool, atom)
                for p2 in match_bunch(p1, atom.y, b.left):
                    out.extend(match_bunch(p2, atom.z, b.right))
        return out

    for leftover in match_bunch(tuple(atoms), root, shape):
        if not leftover:
            return MetaSequent(rest + (Sat(root, compact(shape)),), ms.extract)
    raise MetaError("the atoms do not match the unpacking of the shape")


# ---------------------------------------------------------------------------
# Serialization (.bideriv.json)
# ---------------------------------------------------------------------------

def _wterm_to_json(t: WTerm) -> dict:
    if isinstance(t, WConst):
        return {"const": t.name}
    return {"wvar": t.name}


def _wterm_from_json(d: dict) -> WTerm:
    if "const" in d:
        return E if d["const"] == "e" else PI
    return WVar(d["wvar"])


def _formula_to_json(f: Formula):
    if isinstance(f, FVar):
        return {"fvar": f.var}
    if isinstance(f, (And, Or, Imp, Star, Wand)):
        tag = {And: "and", Or: "or", Imp: "imp", Star: "star", Wand: "wand"}[type(f)]
        return {tag: [_formula_to_json(f.left), _formula_to_json(f.right)]}
    return {"formula": formula_str(f)}


def _formula_from_json(d) -> Formula:
    if "fvar" in d:
        return FVar(d["fvar"])
    if "formula" in d:
        return parse_formula(d["formula"])
    (tag, args), = d.items()
    cls = {"and": And, "or": Or, "imp": Imp, "star": Star, "wand": Wand}[tag]
    return cls(_formula_from_json(args[0]), _formula_from_json(args[1]))


def meta_formula_to_json(phi: MetaFormula):
    if isinstance(phi, Sat):
        return {"sat": [_wterm_to_json(phi.world), _formula_to_json(phi.formula)]}
    if isinstance(phi, RAtom):
        return {"R": [_wterm_to_json(t) for t in (phi.x, phi.y, phi.z)]}
    if isinstance(phi, LeqAtom):
        return {"leq": [_wterm_to_json(phi.x), _wterm_to_json(phi.y)]}
    if isinstance(phi, EqAtom):
        return {"eq": [_wterm_to_json(phi.x), _wterm_to_json(phi.y)]}
    if isinstance(phi, (Amp, Par, MImp)):
        tag = {Amp: "amp", Par: "par", MImp: "mimp"}[type(phi)]
        return {tag: [meta_formula_to_json(phi.left), meta_formula_to_json(phi.right)]}
    if isinstance(phi, _QUANTS):
        tag = {ForallW: "forallW", ExistsW: "existsW",
               ForallF: "forallF", ExistsF: "existsF"}[type(phi)]
        return {tag: [phi.var, meta_formula_to_json(phi.body)]}
    if isinstance(phi, Verum):
        return "verum"
    return "falsum"


def meta_formula_from_json(d) -> MetaFormula:
    if d == "verum":
        return VERUM
    if d == "falsum":
        return FALSUM
    (tag, args), = d.items()
    if tag == "sat":
        return Sat(_wterm_from_json(args[0]), _formula_from_json(args[1]))
    if tag == "R":
        return RAtom(*(_wterm_from_json(a) for a in args))
    if tag == "leq":
        return LeqAtom(_wterm_from_json(args[0]), _wterm_from_json(args[1]))
    if tag == "eq":
        return EqAtom(_wterm_from_json(args[0]), _wterm_from_json(args[1]))
    if tag in ("amp", "par", "mimp"):
        cls = {"amp": Amp, "par": Par, "mimp": MImp}[tag]
        return cls(meta_formula_from_json(args[0]), meta_formula_from_json(args[1]))
    cls = {"forallW": ForallW, "existsW": ExistsW, "forallF": ForallF, "existsF": ExistsF}[tag]
    return cls(args[0], meta_formula_from_json(args[1]))


def meta_sequent_to_json(seq: AnyMetaSequent):
    if isinstance(seq, EmptyMetaSequent):
        return "box"
    return {"context": [meta_formula_to_json(p) for p in seq.context],
            "extract": [meta_formula_to_json(p) for p in seq.extract]}


def meta_sequent_from_json(d) -> AnyMetaSequent:
    if d == "box":
        return EMPTY_META
    return MetaSequent(tuple(meta_formula_from_json(p) for p in d["context"]),
                       tuple(meta_formula_from_json(p) for p in d["extract"]))


def _payload_to_json(p):
    if p is None:
        return None
    if isinstance(p, int):
        return {"index": p}
    if isinstance(p, str):
        return {"eigen": p}
    if isinstance(p, (WVar, WConst)):
        return {"world": _wterm_to_json(p)}
    if isinstance(p, Formula):
        return {"fterm": _formula_to_json(p)}
    raise MetaError(f"unserializable payload {p!r}")


def _payload_from_json(d):
    if d is None:
        return None
    if "index" in d:
        return d["index"]
    if "eigen" in d:
        return d["eigen"]
    if "world" in d:
        return _wterm_from_json(d["world"])
    return _formula_from_json(d["fterm"])


def derivation_to_dict(d: MetaDerivation) -> dict:
    out: dict = {"sequent": meta_sequent_to_json(d.sequent)}
    if d.rule is None:
        out["rule"] = "box" if d.is_box() else "open"
        return out
    out["rule"] = d.rule.value
    out["payload"] = _payload_to_json(d.payload)
    # children serialized iteratively to keep deep spines cheap
    out["children"] = [derivation_to_dict(c) for c in d.children]
    return out


def derivation_from_dict(d: dict) -> MetaDerivation:
    if d["rule"] == "box":
        return META_BOX
    seq = meta_sequent_from_json(d["sequent"])
    if d["rule"] == "open":
        return MetaDerivation(seq, None)
    rule = DljRule(d["rule"])
    children = tuple(derivation_from_dict(c) for c in d.get("children", []))
    return MetaDerivation(seq, rule, _payload_from_json(d.get("payload")), children)


def save_derivation(d: MetaDerivation, path: str) -> None:
    import sys

    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 4 * d.size() + 1000))
    try:
        with open(path, "w") as fh:
            json.dump(derivation_to_dict(d), fh)
            fh.write("\n")
    finally:
        sys.setrecursionlimit(old)


def load_derivation(path: str) -> MetaDerivation:
    import sys

    with open(path) as fh:
        data = json.load(fh)
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 100000))
    try:
        return derivation_from_dict(data)
    finally:
        sys.setrecursionlimit(old)
