"""The sequent calculus: rule schemas, instance enumeration, proof checking.

Rules are read reductively (conclusion to premisses).  Schemas built over
n-ary context lists (identity, weakening, the implication left rules, the
star right rule) match against *sections*: the maximal flattening of one
context-former at a position.  A rule instance's parameters pin down the
match completely, so `apply` is a pure function from (instance, sequent)
to the premiss list, and exchange never needs to be interleaved with a
logical step just to expose its shape.

Structural-rule conventions:
  * MultTopL1 drops a multiplicative unit from a comma section and
    MultTopL2 introduces one;
  * MultTopL3 swaps a multiplicative-top leaf for the unit, and MultTopR
    is the axiom closing the unit sequent, so the compacting tautology of
    the multiplicative unit is derivable like every other bunch's;
  * bottom closes branches through the axiom form BotAx during search;
    the formula-parametric BotL remains checkable.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

from .syntax import (
    ADD_UNIT,
    BOTTOM,
    MULT_UNIT,
    AddUnit,
    And,
    AnySequent,
    Bottom,
    Bunch,
    BunchPath,
    Comma,
    EmptySequent,
    EMPTY_SEQUENT,
    Formula,
    Imp,
    Leaf,
    MultTop,
    MultUnit,
    Or,
    Semi,
    Sequent,
    Star,
    Top,
    Wand,
    compact,
    formula_str,
    parse_formula,
    parse_sequent,
    replace,
    section,
    section_prune,
    sequent_str,
    subbunch,
    subbunch_positions,
    subformulas,
    sequent_formulas,
)


class RuleId(enum.Enum):
    AND_L = "AndL"
    AND_R = "AndR"
    STAR_L = "StarL"
    STAR_R = "StarR"
    OR_L = "OrL"
    OR_R1 = "OrR1"
    OR_R2 = "OrR2"
    IMP_L = "ImpL"
    IMP_R = "ImpR"
    WAND_L = "WandL"
    WAND_R = "WandR"
    MULT_TOP_L1 = "MultTopL1"
    MULT_TOP_L2 = "MultTopL2"
    MULT_TOP_L3 = "MultTopL3"
    MULT_TOP_R = "MultTopR"
    TOP_L = "TopL"
    TOP_R = "TopR"
    BOT_L = "BotL"
    BOT_AX = "BotAx"
    ID = "Id"
    COMM = "Comm"
    ASSO = "Asso"
    ASSO_INV = "AssoInv"
    E1 = "E1"
    E2 = "E2"
    C = "C"
    W = "W"
    CUT = "Cut"
    TAUT = "Taut"
    W_STAR_R = "WStarR"


class RuleNotApplicable(ValueError):
    pass


@dataclass(frozen=True)
class RuleInstance:
    rule: RuleId
    position: BunchPath = ()
    params: tuple = ()

    def __str__(self) -> str:
        pos = "".join(self.position) or "eps"
        if not self.params:
            return f"{self.rule.value}@{pos}"
        return f"{self.rule.value}@{pos}{list(self.params)}"


@dataclass(frozen=True)
class Proof:
    """Rooted finite tree; leaves are exactly the empty sequent."""

    sequent: AnySequent
    rule: RuleInstance | None  # None marks the empty-sequent leaf or a hole
    children: tuple[Proof, ...] = ()

    def is_box(self) -> bool:
        return isinstance(self.sequent, EmptySequent) and self.rule is None

    def is_hole(self) -> bool:
        return self.rule is None and not isinstance(self.sequent, EmptySequent)

    def size(self) -> int:
        return 1 + sum(c.size() for c in self.children)


BOX = Proof(EMPTY_SEQUENT, None, ())


def axiom_node(s: Sequent, inst: RuleInstance) -> Proof:
    return Proof(s, inst, (BOX,))


# ---------------------------------------------------------------------------
# Applying a rule instance
# ---------------------------------------------------------------------------

def _need(cond: bool, msg: str):
    if not cond:
        raise RuleNotApplicable(msg)


def _semi_elems(b: Bunch) -> list[Bunch]:
    return section(b, Semi)


def _comma_elems(b: Bunch) -> list[Bunch]:
    return section(b, Comma)


def _prune_or_unit(b: Bunch, former: type, keep: set[int]) -> Bunch:
    pruned = section_prune(b, former, keep)
    if pruned is None:
        return ADD_UNIT if former is Semi else MULT_UNIT
    return pruned


def apply(inst: RuleInstance, s: AnySequent) -> tuple[AnySequent, ...]:
    """Premisses of the instance at `s`; the empty tuple encodes the box."""
    _need(isinstance(s, Sequent), "no rule applies to the empty sequent")
    assert isinstance(s, Sequent)
    ctx, ext = s.context, s.extract
    r = inst.rule
    try:
        node = subbunch(ctx, inst.position)
    except KeyError as exc:
        raise RuleNotApplicable(str(exc)) from None

    def repl(new: Bunch) -> Sequent:
        return Sequent(replace(ctx, inst.position, new), ext)

    if r is RuleId.AND_L:
        _need(isinstance(node, Leaf) and isinstance(node.formula, And), "AndL wants a conjunction leaf")
        f = node.formula
        return (repl(Semi(Leaf(f.left), Leaf(f.right))),)

    if r is RuleId.STAR_L:
        _need(isinstance(node, Leaf) and isinstance(node.formula, Star), "StarL wants a star leaf")
        f = node.formula
        return (repl(Comma(Leaf(f.left), Leaf(f.right))),)

    if r is RuleId.OR_L:
        _need(isinstance(node, Leaf) and isinstance(node.formula, Or), "OrL wants a disjunction leaf")
        f = node.formula
        return (repl(Leaf(f.left)), repl(Leaf(f.right)))

    if r is RuleId.MULT_TOP_L3:
        _need(isinstance(node, Leaf) and isinstance(node.formula, MultTop), "MultTopL3 wants a mult-top leaf")
        return (repl(MULT_UNIT),)

    if r is RuleId.BOT_AX:
        _need(isinstance(node, Leaf) and isinstance(node.formula, Bottom), "BotAx wants a falsity leaf")
        return ()

    if r is RuleId.BOT_L:
        _need(isinstance(node, Leaf) and isinstance(node.formula, Bottom), "BotL wants a falsity leaf")
        _need(len(inst.params) == 1 and isinstance(inst.params[0], Formula), "BotL needs a formula parameter")
        return (repl(Leaf(inst.params[0])),)

    if r is RuleId.AND_R:
        _need(isinstance(ext, And), "AndR wants a conjunction extract")
        return (Sequent(ctx, ext.left), Sequent(ctx, ext.right))

    if r in (RuleId.OR_R1, RuleId.OR_R2):
        _need(isinstance(ext, Or), "OrR wants a disjunction extract")
        return (Sequent(ctx, ext.left if r is RuleId.OR_R1 else ext.right),)

    if r is RuleId.IMP_R:
        _need(isinstance(ext, Imp), "ImpR wants an implication extract")
        return (Sequent(Semi(ctx, Leaf(ext.left)), ext.right),)

    if r is RuleId.WAND_R:
        _need(isinstance(ext, Wand), "WandR wants a wand extract")
        return (Sequent(Comma(ctx, Leaf(ext.left)), ext.right),)

    if r is RuleId.TOP_R:
        _need(isinstance(ext, Top), "TopR wants a truth extract")
        return ()

    if r is RuleId.MULT_TOP_R:
        _need(isinstance(ctx, MultUnit) and isinstance(ext, MultTop), "MultTopR wants the unit sequent")
        return ()

    if r in (RuleId.ID, RuleId.TAUT):
        _need(not inst.position, "Id applies at the root")
        elems = _semi_elems(ctx)
        _need(len(inst.params) == 1, "Id needs a section index")
        (i,) = inst.params
        _need(0 <= i < len(elems), "Id index out of range")
        _need(isinstance(elems[i], Leaf) and elems[i].formula == ext, "Id wants the extract in the section")
        return ()

    if r in (RuleId.STAR_R, RuleId.W_STAR_R):
        _need(not inst.position, "StarR applies at the root")
        _need(isinstance(ext, Star), "StarR wants a star extract")
        _need(len(inst.params) == 2, "StarR needs a part index and a split")
        i, mask = inst.params
        elems = _semi_elems(ctx)
        _need(0 <= i < len(elems), "StarR part index out of range")
        parts = _comma_elems(elems[i])
        keep1 = set(mask)
        _need(keep1 <= set(range(len(parts))), "StarR split out of range")
        keep2 = set(range(len(parts))) - keep1
        d1 = _prune_or_unit(elems[i], Comma, keep1)
        d2 = _prune_or_unit(elems[i], Comma, keep2)
        return (Sequent(d1, ext.left), Sequent(d2, ext.right))

    if r is RuleId.IMP_L:
        elems = _semi_elems(node)
        _need(len(inst.params) in (2, 3), "ImpL needs an index, a split, and an optional keep flag")
        i, mask = inst.params[0], inst.params[1]
        keep = inst.params[2] if len(inst.params) == 3 else False
        _need(0 <= i < len(elems), "ImpL index out of range")
        imp = elems[i]
        _need(isinstance(imp, Leaf) and isinstance(imp.formula, Imp), "ImpL wants an implication in the section")
        others = [j for j in range(len(elems)) if j != i]
        delta = set(mask)
        _need(delta <= set(others), "ImpL split out of range")
        # keep retains the split in the second premiss (plain weakening
        # separates the two readings; both are enumerated)
        rest = set(others) if keep else set(others) - delta
        left = _prune_or_unit(node, Semi, delta)
        kept = section_prune(node, Semi, rest)
        new = Leaf(imp.formula.right) if kept is None else Semi(kept, Leaf(imp.formula.right))
        return (Sequent(left, imp.formula.left), repl(new))

    if r is RuleId.WAND_L:
        elems = _comma_elems(node)
        _need(len(inst.params) == 2, "WandL needs an index and a split")
        i, mask = inst.params
        _need(0 <= i < len(elems), "WandL index out of range")
        wand = elems[i]
        _need(isinstance(wand, Leaf) and isinstance(wand.formula, Wand), "WandL wants a wand in the section")
        others = [j for j in range(len(elems)) if j != i]
        delta2 = set(mask)
        _need(delta2 <= set(others), "WandL split out of range")
        rest = set(others) - delta2
        left = _prune_or_unit(node, Comma, delta2)
        kept = section_prune(node, Comma, rest)
        new = Leaf(wand.formula.right) if kept is None else Comma(kept, Leaf(wand.formula.right))
        return (Sequent(left, wand.formula.left), repl(new))

    if r is RuleId.MULT_TOP_L1:
        elems = _comma_elems(node)
        _need(len(elems) > 1, "MultTopL1 wants a comma section")
        _need(len(inst.params) == 1, "MultTopL1 needs a unit index")
        (i,) = inst.params
        _need(0 <= i < len(elems) and isinstance(elems[i], MultUnit), "MultTopL1 wants a unit element")
        keep = set(range(len(elems))) - {i}
        return (repl(_prune_or_unit(node, Comma, keep)),)

    if r is RuleId.MULT_TOP_L2:
        return (repl(Comma(node, MULT_UNIT)),)

    if r is RuleId.TOP_L:
        return (repl(Semi(node, ADD_UNIT)),)

    if r is RuleId.W:
        elems = _semi_elems(node)
        _need(len(inst.params) == 1, "W needs a deletion mask")
        (mask,) = inst.params
        drop = set(mask)
        _need(drop and drop <= set(range(len(elems))), "W mask out of range")
        keep = set(range(len(elems))) - drop
        return (repl(_prune_or_unit(node, Semi, keep)),)

    if r is RuleId.C:
        return (repl(Semi(node, node)),)

    if r is RuleId.COMM:
        _need(isinstance(node, Comma), "Comm wants a comma node")
        return (repl(Comma(node.right, node.left)),)

    if r is RuleId.E1:
        _need(isinstance(node, Semi), "E1 wants a semi node")
        return (repl(Semi(node.right, node.left)),)

    if r is RuleId.ASSO:
        _need(isinstance(node, Comma) and isinstance(node.right, Comma), "Asso wants a right-nested comma")
        a, bc = node.left, node.right
        return (repl(Comma(Comma(a, bc.left), bc.right)),)

    if r is RuleId.ASSO_INV:
        _need(isinstance(node, Comma) and isinstance(node.left, Comma), "AssoInv wants a left-nested comma")
        ab, c = node.left, node.right
        return (repl(Comma(ab.left, Comma(ab.right, c))),)

    if r is RuleId.E2:
        _need(isinstance(node, Semi) and isinstance(node.right, Semi), "E2 wants a right-nested semi")
        a, bc = node.left, node.right
        return (repl(Semi(Semi(a, bc.left), bc.right)),)

    if r is RuleId.CUT:
        _need(len(inst.params) == 1 and isinstance(inst.params[0], Formula), "Cut needs a cut formula")
        phi = inst.params[0]
        return (Sequent(node, phi), repl(Leaf(phi)))

    raise RuleNotApplicable(f"unknown rule {r}")


# ---------------------------------------------------------------------------
# Instance enumeration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SearchPolicy:
    """Knobs for the reductive engine; the defaults drive bounded search.

    `full_structural` lifts the growth guards (unit introduction anywhere,
    unguarded contraction); checking never depends on it.
    """

    depth: int = 8
    include_cut: bool = False
    loop_check: bool = True
    rule_order: tuple[RuleId, ...] = ()
    node_cap: int = 10 ** 6
    full_structural: bool = False

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be positive")


DEFAULT_POLICY = SearchPolicy()

DEFAULT_RULE_ORDER: tuple[RuleId, ...] = (
    RuleId.ID, RuleId.TOP_R, RuleId.MULT_TOP_R, RuleId.BOT_AX,
    RuleId.AND_R, RuleId.OR_R1, RuleId.OR_R2, RuleId.IMP_R, RuleId.WAND_R,
    RuleId.STAR_R,
    RuleId.AND_L, RuleId.OR_L, RuleId.STAR_L, RuleId.MULT_TOP_L3,
    RuleId.IMP_L, RuleId.WAND_L,
    RuleId.MULT_TOP_L1, RuleId.W, RuleId.C,
    RuleId.TOP_L, RuleId.MULT_TOP_L2,
    RuleId.E1, RuleId.E2, RuleId.COMM, RuleId.ASSO, RuleId.ASSO_INV,
    RuleId.CUT,
)


def _has_twin(ctx: Bunch, path: BunchPath, node: Bunch) -> bool:
    # an identical additive sibling means the copy is already there
    if not path:
        return False
    parent = subbunch(ctx, path[:-1])
    if not isinstance(parent, Semi):
        return False
    sib = parent.right if path[-1] == "L" else parent.left
    return sib == node


def _section_roots(ctx: Bunch, former: type) -> list[tuple[BunchPath, Bunch]]:
    out = []

    def walk(node: Bunch, path: BunchPath, parent_same: bool) -> None:
        if not parent_same:
            out.append((path, node))
        if isinstance(node, (Semi, Comma)):
            same = isinstance(node, former)
            walk(node.left, path + ("L",), same)
            walk(node.right, path + ("R",), same)

    walk(ctx, (), False)
    return out


def _masks(indices: list[int]) -> list[tuple[int, ...]]:
    out = []
    for bits in range(1 << len(indices)):
        out.append(tuple(indices[k] for k in range(len(indices)) if bits >> k & 1))
    return out


def instances(s: AnySequent, policy: SearchPolicy = DEFAULT_POLICY) -> list[RuleInstance]:
    """All enumerable instances applicable to `s`, in a fixed order."""
    if isinstance(s, EmptySequent):
        return []
    ctx, ext = s.context, s.extract
    positions = subbunch_positions(ctx)
    by_rule: dict[RuleId, list[RuleInstance]] = {}

    def add(rule: RuleId, position: BunchPath = (), params: tuple = ()):
        by_rule.setdefault(rule, []).append(RuleInstance(rule, position, params))

    # axioms
    for i, e in enumerate(_semi_elems(ctx)):
        if isinstance(e, Leaf) and e.formula == ext:
            add(RuleId.ID, (), (i,))
    if isinstance(ext, Top):
        add(RuleId.TOP_R)
    if isinstance(ctx, MultUnit) and isinstance(ext, MultTop):
        add(RuleId.MULT_TOP_R)
    for path, node in positions:
        if isinstance(node, Leaf) and isinstance(node.formula, Bottom):
            add(RuleId.BOT_AX, path)

    # right rules
    if isinstance(ext, And):
        add(RuleId.AND_R)
    if isinstance(ext, Or):
        add(RuleId.OR_R1)
        add(RuleId.OR_R2)
    if isinstance(ext, Imp):
        add(RuleId.IMP_R)
    if isinstance(ext, Wand):
        add(RuleId.WAND_R)
    if isinstance(ext, Star):
        elems = _semi_elems(ctx)
        for i, e in enumerate(elems):
            parts = _comma_elems(e)
            for mask in _masks(list(range(len(parts)))):
                add(RuleId.STAR_R, (), (i, mask))

    # left logical rules
    for path, node in positions:
        if isinstance(node, Leaf):
            f = node.formula
            if isinstance(f, And):
                add(RuleId.AND_L, path)
            elif isinstance(f, Or):
                add(RuleId.OR_L, path)
            elif isinstance(f, Star):
                add(RuleId.STAR_L, path)
            elif isinstance(f, MultTop):
                add(RuleId.MULT_TOP_L3, path)
    for path, node in _section_roots(ctx, Semi):
        elems = _semi_elems(node)
        for i, e in enumerate(elems):
            if isinstance(e, Leaf) and isinstance(e.formula, Imp):
                others = [j for j in range(len(elems)) if j != i]
                for mask in _masks(others):
                    add(RuleId.IMP_L, path, (i, mask))
                    if mask:
                        add(RuleId.IMP_L, path, (i, mask, True))
    for path, node in _section_roots(ctx, Comma):
        elems = _comma_elems(node)
        for i, e in enumerate(elems):
            if isinstance(e, Leaf) and isinstance(e.formula, Wand):
                others = [j for j in range(len(elems)) if j != i]
                for mask in _masks(others):
                    add(RuleId.WAND_L, path, (i, mask))

    # shrinking structural rules are always searched
    for path, node in _section_roots(ctx, Comma):
        elems = _comma_elems(node)
        if len(elems) > 1:
            for i, e in enumerate(elems):
                if isinstance(e, MultUnit):
                    add(RuleId.MULT_TOP_L1, path, (i,))
    for path, node in _section_roots(ctx, Semi):
        elems = _semi_elems(node)
        if len(elems) > 1:
            for i in range(len(elems)):
                add(RuleId.W, path, ((i,),))

    # contraction: duplicate an implication leaf that has no twin yet
    for path, node in positions:
        if isinstance(node, (AddUnit, MultUnit)):
            continue
        if policy.full_structural:
            add(RuleId.C, path)
        elif (isinstance(node, Leaf) and isinstance(node.formula, (Imp, Wand))
              and not _has_twin(ctx, path, node)):
            add(RuleId.C, path)

    # growing and permuting rules stay checkable but are searched only on demand
    if policy.full_structural:
        for path, node in positions:
            add(RuleId.TOP_L, path)
            add(RuleId.MULT_TOP_L2, path)
            if isinstance(node, Semi):
                add(RuleId.E1, path)
                if isinstance(node.right, Semi):
                    add(RuleId.E2, path)
            if isinstance(node, Comma):
                add(RuleId.COMM, path)
                if isinstance(node.right, Comma):
                    add(RuleId.ASSO, path)
                if isinstance(node.left, Comma):
                    add(RuleId.ASSO_INV, path)
    if policy.include_cut:
        cut_formulas = sorted({g for f in sequent_formulas(s) for g in subformulas(f)},
                              key=formula_str)
        for path, _ in positions:
            for phi in cut_formulas:
                add(RuleId.CUT, path, (phi,))

    order = policy.rule_order or DEFAULT_RULE_ORDER
    out: list[RuleInstance] = []
    seen: set[RuleInstance] = set()
    for rule in order:
        for inst in by_rule.get(rule, []):
            if inst not in seen:
                seen.add(inst)
                out.append(inst)
    return out


# ---------------------------------------------------------------------------
# Proof checking
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CheckResult:
    ok: bool
    path: tuple[int, ...] = ()
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


def check_proof(t: Proof) -> CheckResult:
    """Accepts exactly the trees the proof definition admits."""

    def walk(node: Proof, path: tuple[int, ...]) -> CheckResult:
        if node.is_box():
            return CheckResult(True)
        if node.rule is None:
            return CheckResult(False, path, "open hole in proof")
        if isinstance(node.sequent, EmptySequent):
            return CheckResult(False, path, "rule applied to the empty sequent")
        try:
            premisses = apply(node.rule, node.sequent)
        except RuleNotApplicable as exc:
            return CheckResult(False, path, f"{node.rule}: {exc}")
        if not premisses:
            if len(node.children) != 1 or not node.children[0].is_box():
                return CheckResult(False, path, "axiom node must close with the empty sequent")
            return CheckResult(True)
        if len(node.children) != len(premisses):
            return CheckResult(False, path, f"expected {len(premisses)} premisses, found {len(node.children)}")
        for i, (child, want) in enumerate(zip(node.children, premisses)):
            if child.sequent != want:
                return CheckResult(False, path + (i,),
                                   f"premiss mismatch: want {sequent_str(want)}, have {sequent_str(child.sequent)}")
            sub = walk(child, path + (i,))
            if not sub.ok:
                return sub
        return CheckResult(True)

    return walk(t, ())


# ---------------------------------------------------------------------------
# Tautology proofs and admissible-rule demonstrations
# ---------------------------------------------------------------------------

def taut_proof(g: Bunch) -> Proof:
    """A checkable proof that any bunch entails its own compacting."""
    goal = compact(g)
    if isinstance(g, Leaf):
        return axiom_node(Sequent(g, goal), RuleInstance(RuleId.ID, (), (0,)))
    if isinstance(g, AddUnit):
        return axiom_node(Sequent(g, goal), RuleInstance(RuleId.TOP_R))
    if isinstance(g, MultUnit):
        return axiom_node(Sequent(g, goal), RuleInstance(RuleId.MULT_TOP_R))
    if isinstance(g, Semi):
        elems = _semi_elems(g)
        nl = len(_semi_elems(g.left))

        def keep_side(lo: int, hi: int, sub: Bunch, sub_goal: Formula) -> Proof:
            drop = tuple(j for j in range(len(elems)) if not lo <= j < hi)
            inst = RuleInstance(RuleId.W, (), (drop,))
            return Proof(Sequent(g, sub_goal), inst, (taut_proof(sub),))

        assert isinstance(goal, And)
        left = keep_side(0, nl, g.left, goal.left)
        right = keep_side(nl, len(elems), g.right, goal.right)
        return Proof(Sequent(g, goal), RuleInstance(RuleId.AND_R), (left, right))
    assert isinstance(g, Comma) and isinstance(goal, Star)
    parts = _comma_elems(g)
    nl = len(_comma_elems(g.left))
    inst = RuleInstance(RuleId.STAR_R, (), (0, tuple(range(nl))))
    return Proof(Sequent(g, goal), inst, (taut_proof(g.left), taut_proof(g.right)))


def fill_holes(t: Proof, fillers: list[Proof]) -> Proof:
    """Replace open holes, left to right, by the supplied subproofs."""
    queue = list(fillers)

    def walk(node: Proof) -> Proof:
        if node.is_hole():
            if not queue:
                raise ValueError("not enough subproofs to fill the template")
            sub = queue.pop(0)
            if sub.sequent != node.sequent:
                raise ValueError(f"filler proves {sub.sequent}, hole wants {node.sequent}")
            return sub
        return Proof(node.sequent, node.rule, tuple(walk(c) for c in node.children))

    out = walk(t)
    if queue:
        raise ValueError("too many subproofs for the template")
    return out


def admissible_demo(name: str, **kw) -> Proof:
    """Expand a derived rule into a primitive-rule fragment.

    taut-rule(gamma, phi): closes (gamma ; phi |- phi) by weakening then Id.
    wstar(gamma, d1, d2, phi, psi): reduces (gamma ; (d1 , d2) |- phi * psi)
        to open holes (d1 |- phi) and (d2 |- psi) by weakening then StarR.
    botfromcut(context, position, chi, phi): the cut derivation replacing a
        falsity leaf, with an open hole for the second cut premiss.
    """
    if name == "taut-rule":
        gamma: Bunch = kw["gamma"]
        phi: Formula = kw["phi"]
        root = Sequent(Semi(gamma, Leaf(phi)), phi)
        elems = _semi_elems(root.context)
        drop = tuple(range(len(elems) - 1))
        w = RuleInstance(RuleId.W, (), (drop,))
        leaf = axiom_node(Sequent(Leaf(phi), phi), RuleInstance(RuleId.ID, (), (0,)))
        return Proof(root, w, (leaf,))
    if name == "wstar":
        gamma, d1, d2 = kw["gamma"], kw["d1"], kw["d2"]
        phi, psi = kw["phi"], kw["psi"]
        root = Sequent(Semi(gamma, Comma(d1, d2)), Star(phi, psi))
        elems = _semi_elems(root.context)
        drop = tuple(range(len(elems) - 1))
        w = RuleInstance(RuleId.W, (), (drop,))
        mid = Sequent(Comma(d1, d2), Star(phi, psi))
        nl = len(_comma_elems(d1))
        star = RuleInstance(RuleId.STAR_R, (), (0, tuple(range(nl))))
        holes = (Proof(Sequent(d1, phi), None), Proof(Sequent(d2, psi), None))
        return Proof(root, w, (Proof(mid, star, holes),))
    if name == "botfromcut":
        context: Bunch = kw["context"]
        position: BunchPath = kw["position"]
        chi: Formula = kw["chi"]
        phi: Formula = kw["phi"]
        node = subbunch(context, position)
        if not (isinstance(node, Leaf) and isinstance(node.formula, Bottom)):
            raise ValueError("botfromcut wants a falsity leaf at the position")
        root = Sequent(context, chi)
        cut = RuleInstance(RuleId.CUT, position, (phi,))
        bot = RuleInstance(RuleId.BOT_L, (), (phi,))
        left = Proof(Sequent(Leaf(BOTTOM), phi), bot,
                     (axiom_node(Sequent(Leaf(phi), phi), RuleInstance(RuleId.ID, (), (0,))),))
        hole = Proof(Sequent(replace(context, position, Leaf(phi)), chi), None)
        return Proof(root, cut, (left, hole))
    raise ValueError(f"unknown derived rule {name!r}")


# ---------------------------------------------------------------------------
# Serialization (.biproof.json)
# ---------------------------------------------------------------------------

def _params_to_json(rule: RuleId, params: tuple) -> list:
    out = []
    for p in params:
        if isinstance(p, Formula):
            out.append({"formula": formula_str(p)})
        elif isinstance(p, tuple):
            out.append(list(p))
        else:
            out.append(p)
    return out


def _params_from_json(rule: RuleId, params: list) -> tuple:
    out = []
    for p in params:
        if isinstance(p, dict) and "formula" in p:
            out.append(parse_formula(p["formula"]))
        elif isinstance(p, list):
            out.append(tuple(p))
        else:
            out.append(p)
    return tuple(out)


def proof_to_dict(t: Proof) -> dict:
    if t.is_box():
        return {"rule": "box"}
    d: dict = {"sequent": sequent_str(t.sequent)}
    if t.rule is None:
        d["rule"] = "open"
        return d
    d["rule"] = t.rule.rule.value
    d["position"] = "".join(t.rule.position)
    d["params"] = _params_to_json(t.rule.rule, t.rule.params)
    d["children"] = [proof_to_dict(c) for c in t.children]
    return d


def proof_from_dict(d: dict) -> Proof:
    if d.get("rule") == "box":
        return BOX
    seq = parse_sequent(d["sequent"])
    if d.get("rule") == "open":
        return Proof(seq, None)
    rule = RuleId(d["rule"])
    inst = RuleInstance(rule, tuple(d.get("position", "")), _params_from_json(rule, d.get("params", [])))
    children = tuple(proof_from_dict(c) for c in d.get("children", []))
    return Proof(seq, inst, children)


def save_proof(t: Proof, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(proof_to_dict(t), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_proof(path: str) -> Proof:
    with open(path) as fh:
        return proof_from_dict(json.load(fh))
