"""Certification of validity-calculus steps in the meta-logic.

Every rule application on a validity-sequent state expands into a
derivation fragment over the frame/satisfaction theory: the fragment's
root is the embedding of the conclusion and its open leaves are the
embeddings of the premisses, so the fragments of a whole proof
concatenate into one closed derivation.

Fragments draw on the certification theory (the clause directions plus
reflexivity, bifunctoriality, and the multiplicative-top directions) and
use the contraction rules to conserve clauses, so they check under the
classical flag.
"""

from __future__ import annotations

from dataclasses import dataclass

from .calculus import RuleId, RuleInstance, apply as rule_apply
from .metalogic import (
    Cursor,
    DljRule,
    E,
    MetaDerivation,
    MetaError,
    MetaSequent,
    RAtom,
    Sat,
    WTerm,
    WVar,
    certification_theory,
    clause,
    derive_close,
    derive_conj,
    embed,
    frame_extras,
    frame_sentences,
    is_meta_atom,
    use_sentence,
)
from .syntax import (
    And,
    Bottom,
    Bunch,
    BunchPath,
    Comma,
    Formula,
    Imp,
    Leaf,
    MultTop,
    Or,
    Semi,
    Sequent,
    Star,
    Top,
    Wand,
    compact,
    section,
    section_prune,
    subbunch,
)

CERT_THEORY = tuple(certification_theory())

_FRAMES = frame_sentences()
S_UNIT = _FRAMES[0]
S_COMM = _FRAMES[1]
S_PERS = _FRAMES[2]
S_ASSOC = _FRAMES[3]
S_ABSURD = _FRAMES[4]
_EXTRAS = frame_extras()
S_REFL = _EXTRAS[0]
S_BIFUN = _EXTRAS[1]
S_TSTAR_PROD = _EXTRAS[2]
S_TSTAR_DEC = _EXTRAS[3]

S_AND_DEC = clause("and", "dec").sentence()
S_AND_PROD = clause("and", "prod").sentence()
S_OR_DEC = clause("or", "dec").sentence()
S_OR_PROD = clause("or", "prod").sentence()
S_IMP_DEC = clause("imp", "dec").sentence()
S_IMP_PROD = clause("imp", "prod").sentence()
S_STAR_DEC = clause("star", "dec").sentence()
S_STAR_PROD = clause("star", "prod").sentence()
S_WAND_DEC = clause("wand", "dec").sentence()
S_WAND_PROD = clause("wand", "prod").sentence()
S_TOP_PROD = clause("top", "prod").sentence()
S_BOT_DEC = clause("bot", "dec").sentence()


def embed_cert(s: Sequent, world: WTerm) -> MetaSequent:
    return embed(s, world, theory=list(CERT_THEORY))


class CertifyError(MetaError):
    pass


def discharge(cur: Cursor, n: int = 1) -> None:
    """Close `n` leading implication antecedents against the context."""
    for _ in range(n):
        prems = cur.preview(DljRule.IMP_L)
        cur.step(DljRule.IMP_L, pick=1, sides={0: derive_conj(prems[0])})


# ---------------------------------------------------------------------------
# Primitive conversions on context assertions
# ---------------------------------------------------------------------------

def decompose_and(cur: Cursor, w: WTerm, a: Formula, b: Formula) -> None:
    use_sentence(cur, S_AND_DEC, [a, b, w], discharge=1)
    cur.step(DljRule.AMP_L)
    cur.wl_formula(Sat(w, And(a, b)))


def compose_and(cur: Cursor, w: WTerm, a: Formula, b: Formula) -> None:
    use_sentence(cur, S_AND_PROD, [a, b, w], discharge=1)
    cur.wl_formula(Sat(w, a))
    cur.wl_formula(Sat(w, b))


def decompose_star(cur: Cursor, w: WTerm, a: Formula, b: Formula) -> tuple[WVar, WVar]:
    use_sentence(cur, S_STAR_DEC, [a, b, w], discharge=1)
    u = WVar(cur.fresh_w())
    cur.step(DljRule.EXISTS_L, u.name)
    v = WVar(cur.fresh_w())
    cur.step(DljRule.EXISTS_L, v.name)
    cur.step(DljRule.AMP_L)
    cur.step(DljRule.AMP_L)
    cur.wl_formula(Sat(w, Star(a, b)))
    return u, v


def compose_star(cur: Cursor, w: WTerm, u: WTerm, v: WTerm, a: Formula, b: Formula) -> None:
    """From R(w,u,v), u |= a, v |= b produce w |= a * b, consuming all three."""
    use_sentence(cur, S_STAR_PROD, [a, b, w])
    prems = cur.preview(DljRule.IMP_L)
    side = Cursor(prems[0])
    side.step(DljRule.EXISTS_R, u)
    side.step(DljRule.EXISTS_R, v)
    side_done = side.finish(derive_conj(side.seq))
    cur.step(DljRule.IMP_L, pick=1, sides={0: side_done})
    cur.wl_formula(RAtom(w, u, v))
    cur.wl_formula(Sat(u, a))
    cur.wl_formula(Sat(v, b))


def top_create(cur: Cursor, w: WTerm) -> None:
    use_sentence(cur, S_TOP_PROD, [w], discharge=1)


def topstar_create_at_e(cur: Cursor) -> None:
    use_sentence(cur, S_REFL, [E])
    use_sentence(cur, S_TSTAR_PROD, [E], discharge=1)
    from .metalogic import LeqAtom

    cur.wl_formula(LeqAtom(E, E))


def use_comm(cur: Cursor, x: WTerm, y: WTerm, z: WTerm) -> None:
    """From R(x,y,z) also obtain R(x,z,y)."""
    use_sentence(cur, S_COMM, [x, y, z], select=0, discharge=1)


def use_assoc(cur: Cursor, x: WTerm, w: WTerm, y: WTerm, u: WTerm, v: WTerm) -> WVar:
    """From R(x,w,y) and R(y,u,v) obtain a fresh z with R(x,z,v), R(z,w,u)."""
    use_sentence(cur, S_ASSOC, [x, w, y, u, v], discharge=1)
    z = WVar(cur.fresh_w())
    cur.step(DljRule.EXISTS_L, z.name)
    cur.step(DljRule.AMP_L)
    return z


def unit_elim(cur: Cursor, pw: WTerm, kw: WTerm, tw: WTerm, kept: Formula) -> None:
    """From R(pw,kw,tw), tw |= mult-top, kw |= kept obtain pw |= kept."""
    from .metalogic import LeqAtom

    use_sentence(cur, S_TSTAR_DEC, [tw], discharge=1)      # e <= tw
    use_sentence(cur, S_REFL, [kw])                         # kw <= kw
    use_sentence(cur, S_UNIT, [kw])                         # R(kw,kw,e)
    use_sentence(cur, S_BIFUN, [kw, kw, E, tw, kw, pw], discharge=1)  # kw <= pw
    use_sentence(cur, S_PERS, [kept, kw, pw], discharge=2)  # pw |= kept
    for junk in (LeqAtom(E, tw), LeqAtom(kw, kw), RAtom(kw, kw, E),
                 LeqAtom(kw, pw), RAtom(pw, kw, tw), Sat(tw, MultTop()), Sat(kw, kept)):
        cur.wl_formula(junk)


def unit_intro(cur: Cursor, w: WTerm, f: Formula) -> None:
    """From w |= f obtain w |= f * mult-top via the unit world."""
    use_sentence(cur, S_UNIT, [w])  # R(w,w,e)
    topstar_create_at_e(cur)
    compose_star(cur, w, w, E, f, MultTop())


# ---------------------------------------------------------------------------
# Path descent and repacking
# ---------------------------------------------------------------------------

@dataclass
class Frame:
    former: str  # "semi" | "comma"
    side: str
    parent_world: WTerm
    my_world: WTerm
    sib_world: WTerm
    sib_formula: Formula


def descend(cur: Cursor, w: WTerm, b: Bunch, path: BunchPath) -> tuple[WTerm, Bunch, list[Frame]]:
    """Unpack the root assertion along a path only, leaving siblings packed."""
    frames: list[Frame] = []
    node = b
    world = w
    for step in path:
        if isinstance(node, Semi):
            decompose_and(cur, world, compact(node.left), compact(node.right))
            sib = node.right if step == "L" else node.left
            frames.append(Frame("semi", step, world, world, world, compact(sib)))
            node = node.left if step == "L" else node.right
        elif isinstance(node, Comma):
            u, v = decompose_star(cur, world, compact(node.left), compact(node.right))
            sib = node.right if step == "L" else node.left
            mine, sibw = (u, v) if step == "L" else (v, u)
            frames.append(Frame("comma", step, world, mine, sibw, compact(sib)))
            node = node.left if step == "L" else node.right
            world = mine
        else:
            raise CertifyError("path descends into a leaf")
    return world, node, frames


def repack(cur: Cursor, frames: list[Frame], world: WTerm, f: Formula) -> Formula:
    for fr in reversed(frames):
        if fr.former == "semi":
            if fr.side == "L":
                compose_and(cur, fr.parent_world, f, fr.sib_formula)
                f = And(f, fr.sib_formula)
            else:
                compose_and(cur, fr.parent_world, fr.sib_formula, f)
                f = And(fr.sib_formula, f)
        else:
            if fr.side == "L":
                compose_star(cur, fr.parent_world, fr.my_world, fr.sib_world, f, fr.sib_formula)
                f = Star(f, fr.sib_formula)
            else:
                compose_star(cur, fr.parent_world, fr.sib_world, fr.my_world, fr.sib_formula, f)
                f = Star(fr.sib_formula, f)
            world = fr.parent_world
    return f


# ---------------------------------------------------------------------------
# Additive and multiplicative section machinery
# ---------------------------------------------------------------------------

def decompose_semi_tree(cur: Cursor, w: WTerm, tree: Bunch) -> None:
    if isinstance(tree, Semi):
        decompose_and(cur, w, compact(tree.left), compact(tree.right))
        decompose_semi_tree(cur, w, tree.left)
        decompose_semi_tree(cur, w, tree.right)


def compose_semi_tree(cur: Cursor, w: WTerm, tree: Bunch) -> Formula:
    if isinstance(tree, Semi):
        a = compose_semi_tree(cur, w, tree.left)
        b = compose_semi_tree(cur, w, tree.right)
        compose_and(cur, w, a, b)
        return And(a, b)
    return compact(tree)


@dataclass
class Group:
    world: WTerm
    tags: frozenset[int]
    formula: Formula | None  # leaf part formula; None on internal nodes
    left: "Group | None" = None
    right: "Group | None" = None


def decompose_comma_tree(cur: Cursor, w: WTerm, tree: Bunch, counter: list[int]) -> Group:
    if isinstance(tree, Comma):
        u, v = decompose_star(cur, w, compact(tree.left), compact(tree.right))
        gl = decompose_comma_tree(cur, u, tree.left, counter)
        gr = decompose_comma_tree(cur, v, tree.right, counter)
        return Group(w, gl.tags | gr.tags, None, gl, gr)
    tag = counter[0]
    counter[0] += 1
    return Group(w, frozenset({tag}), compact(tree))


@dataclass
class TagTree:
    tags: frozenset[int]
    left: "TagTree | None" = None
    right: "TagTree | None" = None


def pruned_tag_tree(tree: Bunch, keep: set[int], counter: list[int]) -> TagTree | None:
    if isinstance(tree, Comma):
        l = pruned_tag_tree(tree.left, keep, counter)
        r = pruned_tag_tree(tree.right, keep, counter)
        if l is None:
            return r
        if r is None:
            return l
        return TagTree(l.tags | r.tags, l, r)
    tag = counter[0]
    counter[0] += 1
    return TagTree(frozenset({tag})) if tag in keep else None


def split_group(cur: Cursor, g: Group, ts: frozenset[int]) -> tuple[Group, Group]:
    """Restructure so that R(g.world, u, v) holds with u composed exactly of
    the parts tagged `ts`; uses commutativity and associativity only."""
    assert g.left is not None and g.right is not None
    L, R_ = g.left, g.right
    if L.tags == ts:
        return L, R_
    if R_.tags == ts:
        use_comm(cur, g.world, L.world, R_.world)
        return R_, L
    if ts < L.tags:
        a, bb = split_group(cur, L, ts)
        use_comm(cur, g.world, L.world, R_.world)       # R(g, R, L)
        use_comm(cur, L.world, a.world, bb.world)       # R(L, b, a)
        z = use_assoc(cur, g.world, R_.world, L.world, bb.world, a.world)
        use_comm(cur, g.world, z, a.world)              # R(g, a, z)
        use_comm(cur, z, R_.world, bb.world)            # R(z, b, R)
        return a, Group(z, bb.tags | R_.tags, None, bb, R_)
    if ts < R_.tags:
        a, bb = split_group(cur, R_, ts)
        use_comm(cur, R_.world, a.world, bb.world)      # R(R, b, a)
        z = use_assoc(cur, g.world, L.world, R_.world, bb.world, a.world)
        use_comm(cur, g.world, z, a.world)              # R(g, a, z)
        return a, Group(z, L.tags | bb.tags, None, L, bb)
    # the target straddles both children
    tsl, tsr = ts & L.tags, ts & R_.tags
    if tsl == L.tags:
        a2, b2 = split_group(cur, R_, tsr)
        z = use_assoc(cur, g.world, L.world, R_.world, a2.world, b2.world)
        # R(g, z, b2) and R(z, L, a2)
        return Group(z, L.tags | a2.tags, None, L, a2), b2
    if tsr == R_.tags:
        a1, b1 = split_group(cur, L, tsl)
        use_comm(cur, g.world, L.world, R_.world)       # R(g, R, L)
        z = use_assoc(cur, g.world, R_.world, L.world, a1.world, b1.world)
        # R(g, z, b1) and R(z, R, a1)
        use_comm(cur, z, R_.world, a1.world)            # R(z, a1, R)
        return Group(z, a1.tags | R_.tags, None, a1, R_), b1
    a1, b1 = split_group(cur, L, tsl)
    a2, b2 = split_group(cur, R_, tsr)
    use_comm(cur, g.world, L.world, R_.world)           # R(g, R, L)
    use_comm(cur, L.world, a1.world, b1.world)          # R(L, b1, a1)
    z1 = use_assoc(cur, g.world, R_.world, L.world, b1.world, a1.world)
    use_comm(cur, g.world, z1, a1.world)                # R(g, a1, z1)
    use_comm(cur, z1, R_.world, b1.world)               # R(z1, b1, R)
    use_comm(cur, R_.world, a2.world, b2.world)         # R(R, b2, a2)
    z2 = use_assoc(cur, z1, b1.world, R_.world, b2.world, a2.world)
    use_comm(cur, z1, z2, a2.world)                     # R(z1, a2, z2)
    m = use_assoc(cur, g.world, a1.world, z1, a2.world, z2)
    # R(g, m, z2) and R(m, a1, a2) now hold
    left = Group(m, a1.tags | a2.tags, None, a1, a2)
    right = Group(z2, b1.tags | b2.tags, None, b1, b2)
    return left, right


def regroup(cur: Cursor, g: Group, tt: TagTree) -> Group:
    if tt.left is None:
        if g.tags != tt.tags:
            raise CertifyError("leaf grouping mismatch")
        return g
    if g.left is not None and g.left.tags == tt.left.tags:
        gl, gr = g.left, g.right
    else:
        gl, gr = split_group(cur, g, tt.left.tags)
    gl = regroup(cur, gl, tt.left)
    gr = regroup(cur, gr, tt.right)
    return Group(g.world, g.tags, None, gl, gr)


def compose_group(cur: Cursor, g: Group) -> Formula:
    if g.formula is not None:
        return g.formula
    a = compose_group(cur, g.left)
    b = compose_group(cur, g.right)
    compose_star(cur, g.world, g.left.world, g.right.world, a, b)
    return Star(a, b)


# ---------------------------------------------------------------------------
# Interfaces
# ---------------------------------------------------------------------------

def strip_extract_to(cur: Cursor, target: MetaSequent) -> None:
    want = target.extract[0]
    while len(cur.ext) > 1:
        if cur.ext[-1] != want:
            cur.step(DljRule.WR)
        else:
            cur.step(DljRule.ER, len(cur.ext) - 2)
            cur.step(DljRule.WR)
    if cur.ext[0] != want:
        raise CertifyError(f"extract mismatch: want {want}, have {cur.ext[0]}")


def to_interface(cur: Cursor, target: MetaSequent) -> None:
    """Weaken and reorder the working sequent into the premiss embedding."""
    strip_extract_to(cur, target)
    assertion = target.context[-1]
    while True:
        extra = None
        seen_keep = False
        for i, phi in enumerate(cur.ctx):
            if not is_meta_atom(phi):
                continue
            if phi == assertion and not seen_keep:
                seen_keep = True
                continue
            extra = i
            break
        if extra is None:
            break
        cur.wl_at(extra)
    cur.ctx_to_back(cur.ctx_index(assertion))
    if cur.seq != target:
        raise CertifyError(f"interface mismatch:\n  want {target}\n  have {cur.seq}")


def interface_branch(seq: MetaSequent, target: MetaSequent,
                     prep=None) -> MetaDerivation:
    cur = Cursor(seq)
    if prep is not None:
        prep(cur)
    to_interface(cur, target)
    return cur.finish()


# ---------------------------------------------------------------------------
# Per-rule certificates
# ---------------------------------------------------------------------------

@dataclass
class CertStep:
    derivation: MetaDerivation | None  # None when the embeddings coincide
    interfaces: list[MetaSequent]


IDENTITY_RULES = {RuleId.AND_L, RuleId.STAR_L, RuleId.MULT_TOP_L3}


def _comma_frames(frames: list[Frame]) -> list[Frame]:
    return [f for f in frames if f.former == "comma"]


def _need_r(cur: Cursor, v: WTerm, x: WTerm, u: WTerm) -> None:
    """Ensure R(v,x,u) is in the context, commuting an R(v,u,x) if needed."""
    if RAtom(v, x, u) in cur.ctx:
        return
    if RAtom(v, u, x) in cur.ctx:
        use_comm(cur, v, u, x)
        return
    raise CertifyError(f"no decomposition atom for R({v},{x},{u})")


def certify_instance(inst: RuleInstance, s: Sequent, world: WTerm) -> CertStep:
    """The derivation fragment for one rule application at a state."""
    premisses = [p for p in rule_apply(inst, s)]
    root = embed_cert(s, world)
    rule = inst.rule

    if rule in IDENTITY_RULES:
        target = embed_cert(premisses[0], world)
        if target != root:
            raise CertifyError("identity certificate with distinct embeddings")
        return CertStep(None, [target])

    cur = Cursor(root)
    w = world
    ctx, ext = s.context, s.extract

    if rule in (RuleId.ID, RuleId.TAUT):
        decompose_semi_tree(cur, w, ctx)
        return CertStep(cur.finish(derive_close(cur.seq)), [])

    if rule is RuleId.TOP_R:
        top_create(cur, w)
        return CertStep(cur.finish(derive_close(cur.seq)), [])

    if rule is RuleId.MULT_TOP_R:
        return CertStep(derive_close(root), [])

    if rule is RuleId.BOT_AX:
        x, node, frames = descend(cur, w, ctx, inst.position)
        commas = _comma_frames(frames)
        phi: Formula = ext
        for fr in commas:
            phi = Wand(fr.sib_formula, phi)
        use_sentence(cur, S_BOT_DEC, [x], discharge=1)        # x = pi
        use_sentence(cur, S_ABSURD, [phi, x], discharge=1)    # x |= phi
        cur.wl_formula(Sat(x, Bottom()))
        cw: WTerm = x
        f = phi
        for fr in reversed(commas):
            assert isinstance(f, Wand)
            _need_r(cur, fr.parent_world, cw, fr.sib_world)
            use_sentence(cur, S_WAND_DEC, [f.left, f.right, cw], discharge=1)
            cur.step(DljRule.FORALL_L, fr.sib_world)
            cur.step(DljRule.FORALL_L, fr.parent_world)
            discharge(cur, 2)
            cw = fr.parent_world
            f = f.right
        return CertStep(cur.finish(derive_close(cur.seq)), [])

    if rule is RuleId.AND_R:
        assert isinstance(ext, And)
        use_sentence(cur, S_AND_PROD, [ext.left, ext.right, w])
        prems = cur.preview(DljRule.IMP_L)
        cur.step(DljRule.IMP_L, pick=0, sides={1: derive_close(prems[1])})
        targets = [embed_cert(p, w) for p in premisses]
        bprems = cur.preview(DljRule.AMP_R)
        left = interface_branch(bprems[0], targets[0])
        right = interface_branch(bprems[1], targets[1])
        tail = MetaDerivation(cur.seq, DljRule.AMP_R, None, (left, right))
        return CertStep(cur.finish(tail), targets)

    if rule in (RuleId.OR_R1, RuleId.OR_R2):
        assert isinstance(ext, Or)
        use_sentence(cur, S_OR_PROD, [ext.left, ext.right, w])
        prems = cur.preview(DljRule.IMP_L)
        cur.step(DljRule.IMP_L, pick=0, sides={1: derive_close(prems[1])})
        cur.step(DljRule.ER, 0)
        cur.step(DljRule.WR)
        cur.step(DljRule.PAR_R)
        target = embed_cert(premisses[0], w)
        to_interface(cur, target)
        return CertStep(cur.finish(), [target])

    if rule is RuleId.IMP_R:
        assert isinstance(ext, Imp)
        use_sentence(cur, S_IMP_PROD, [ext.left, ext.right, w])
        prems = cur.preview(DljRule.IMP_L)
        cur.step(DljRule.IMP_L, pick=0, sides={1: derive_close(prems[1])})
        cur.step(DljRule.ER, 0)
        cur.step(DljRule.WR)
        u0 = WVar(cur.fresh_w())
        cur.step(DljRule.FORALL_R, u0.name)
        cur.step(DljRule.IMP_R)
        cur.step(DljRule.IMP_R)
        use_sentence(cur, S_PERS, [compact(ctx), w, u0], discharge=2)
        compose_and(cur, u0, compact(ctx), ext.left)
        target = embed_cert(premisses[0], u0)
        to_interface(cur, target)
        return CertStep(cur.finish(), [target])

    if rule is RuleId.WAND_R:
        assert isinstance(ext, Wand)
        use_sentence(cur, S_WAND_PROD, [ext.left, ext.right, w])
        prems = cur.preview(DljRule.IMP_L)
        cur.step(DljRule.IMP_L, pick=0, sides={1: derive_close(prems[1])})
        cur.step(DljRule.ER, 0)
        cur.step(DljRule.WR)
        u0 = WVar(cur.fresh_w())
        cur.step(DljRule.FORALL_R, u0.name)
        v0 = WVar(cur.fresh_w())
        cur.step(DljRule.FORALL_R, v0.name)
        cur.step(DljRule.IMP_R)
        cur.step(DljRule.IMP_R)
        compose_star(cur, v0, w, u0, compact(ctx), ext.left)
        target = embed_cert(premisses[0], v0)
        to_interface(cur, target)
        return CertStep(cur.finish(), [target])

    if rule in (RuleId.STAR_R, RuleId.W_STAR_R):
        assert isinstance(ext, Star)
        i, mask = inst.params[0], inst.params[1]
        elems = section(ctx, Semi)
        decompose_semi_tree(cur, w, ctx)
        sel = elems[i]
        parts = section(sel, Comma)
        keep1 = set(mask)
        keep2 = set(range(len(parts))) - keep1
        if not keep1 or not keep2:
            use_sentence(cur, S_UNIT, [w])  # R(w,w,e)
            topstar_create_at_e(cur)
            if not keep1:
                use_comm(cur, w, w, E)      # R(w,e,w)
                uw: WTerm = E
                vw: WTerm = w
            else:
                uw, vw = w, E
        else:
            g = decompose_comma_tree(cur, w, sel, [0])
            t1 = pruned_tag_tree(sel, keep1, [0])
            t2 = pruned_tag_tree(sel, keep2, [0])
            g1, g2 = split_group(cur, g, t1.tags)
            g1 = regroup(cur, g1, t1)
            g2 = regroup(cur, g2, t2)
            compose_group(cur, g1)
            compose_group(cur, g2)
            uw, vw = g1.world, g2.world
        use_sentence(cur, S_STAR_PROD, [ext.left, ext.right, w])
        prems = cur.preview(DljRule.IMP_L)
        cur.step(DljRule.IMP_L, pick=0, sides={1: derive_close(prems[1])})
        cur.step(DljRule.ER, 0)
        cur.step(DljRule.WR)
        cur.step(DljRule.EXISTS_R, uw)
        cur.step(DljRule.EXISTS_R, vw)
        targets = [embed_cert(p, uw) for p in premisses[:1]] + \
                  [embed_cert(p, vw) for p in premisses[1:]]
        p1 = cur.preview(DljRule.AMP_R)
        inner = Cursor(p1[0])
        p2 = inner.preview(DljRule.AMP_R)
        r_branch = derive_close(p2[0])
        left_leaf = interface_branch(p2[1], targets[0])
        inner_d = inner.finish(MetaDerivation(inner.seq, DljRule.AMP_R, None, (r_branch, left_leaf)))
        right_leaf = interface_branch(p1[1], targets[1])
        tail = MetaDerivation(cur.seq, DljRule.AMP_R, None, (inner_d, right_leaf))
        return CertStep(cur.finish(tail), targets)

    # context rules descend to the position first
    node = subbunch(ctx, inst.position)
    x, node, frames = descend(cur, w, ctx, inst.position)

    def finish_single(newf: Formula) -> CertStep:
        repack(cur, frames, x, newf)
        target = embed_cert(premisses[-1], w)
        to_interface(cur, target)
        return CertStep(cur.finish(), [target])

    if rule is RuleId.OR_L:
        assert isinstance(node, Leaf) and isinstance(node.formula, Or)
        f = node.formula
        use_sentence(cur, S_OR_DEC, [f.left, f.right, x], discharge=1)
        cur.wl_formula(Sat(x, f))
        targets = [embed_cert(p, w) for p in premisses]
        bprems = cur.preview(DljRule.PAR_L)

        def pack_branch(seq: MetaSequent, newf: Formula, target: MetaSequent) -> MetaDerivation:
            c2 = Cursor(seq)
            repack(c2, frames, x, newf)
            to_interface(c2, target)
            return c2.finish()

        left = pack_branch(bprems[0], f.left, targets[0])
        right = pack_branch(bprems[1], f.right, targets[1])
        tail = MetaDerivation(cur.seq, DljRule.PAR_L, None, (left, right))
        return CertStep(cur.finish(tail), targets)

    if rule is RuleId.IMP_L:
        i, mask = inst.params[0], inst.params[1]
        keep = inst.params[2] if len(inst.params) == 3 else False
        elems = section(node, Semi)
        imp = elems[i]
        assert isinstance(imp, Leaf) and isinstance(imp.formula, Imp)
        a, b = imp.formula.left, imp.formula.right
        decompose_semi_tree(cur, x, node)
        use_sentence(cur, S_REFL, [x])
        use_sentence(cur, S_IMP_DEC, [a, b, x], discharge=1)
        cur.step(DljRule.FORALL_L, x)
        discharge(cur, 1)  # x <= x
        # the context implication is now at the front
        delta = set(mask)
        d_tree = section_prune(node, Semi, delta)
        target1 = embed_cert(premisses[0], x)

        def prep_delta(c2: Cursor) -> None:
            if d_tree is None:
                top_create(c2, x)
            else:
                compose_semi_tree(c2, x, d_tree)

        prems = cur.preview(DljRule.IMP_L)
        left = interface_branch(prems[0], target1, prep=prep_delta)
        cur.step(DljRule.IMP_L, pick=1, sides={0: left})
        rest = set(j for j in range(len(elems)) if j != i) if keep else \
            set(j for j in range(len(elems)) if j != i) - delta
        kept = section_prune(node, Semi, rest)
        if kept is None:
            newf: Formula = b
        else:
            kf = compose_semi_tree(cur, x, kept)
            compose_and(cur, x, kf, b)
            newf = And(kf, b)
        repack(cur, frames, x, newf)
        target2 = embed_cert(premisses[1], w)
        to_interface(cur, target2)
        return CertStep(cur.finish(), [target1, target2])

    if rule is RuleId.WAND_L:
        i, mask = inst.params[0], inst.params[1]
        elems = section(node, Comma)
        wand = elems[i]
        assert isinstance(wand, Leaf) and isinstance(wand.formula, Wand)
        a, b = wand.formula.left, wand.formula.right
        delta2 = set(mask)
        rest = set(j for j in range(len(elems)) if j != i) - delta2
        restg: Group | None = None
        d2w: WTerm | None = None
        if len(elems) == 1:
            mw: WTerm = x
            anchor: WTerm = x
        else:
            g = decompose_comma_tree(cur, x, node, [0])
            # target grouping: rest , (delta2 , wand), empty parts dropped
            target_tree = pruned_tag_tree(node, {i}, [0])
            if delta2:
                d2t = pruned_tag_tree(node, delta2, [0])
                target_tree = TagTree(d2t.tags | target_tree.tags, d2t, target_tree)
            if rest:
                rt = pruned_tag_tree(node, rest, [0])
                target_tree = TagTree(rt.tags | target_tree.tags, rt, target_tree)
            g = regroup(cur, g, target_tree)
            inner = g.right if rest else g
            restg = g.left if rest else None
            if delta2:
                d2g = inner.left
                compose_group(cur, d2g)
                d2w = d2g.world
                mw = inner.right.world
                anchor = inner.world
            else:
                mw = inner.world
                anchor = mw
            if restg is not None:
                compose_group(cur, restg)
        if d2w is None:
            use_sentence(cur, S_UNIT, [mw])  # R(mw,mw,e)
            arg_world: WTerm = E
        else:
            _need_r(cur, anchor, mw, d2w)
            arg_world = d2w
        use_sentence(cur, S_WAND_DEC, [a, b, mw], discharge=1)
        cur.step(DljRule.FORALL_L, arg_world)
        cur.step(DljRule.FORALL_L, anchor)
        discharge(cur, 1)
        target1 = embed_cert(premisses[0], arg_world)

        def prep_arg(c2: Cursor) -> None:
            if d2w is None:
                topstar_create_at_e(c2)

        prems = cur.preview(DljRule.IMP_L)
        left = interface_branch(prems[0], target1, prep=prep_arg)
        cur.step(DljRule.IMP_L, pick=1, sides={0: left})
        # anchor |= b now; rebuild the replaced piece
        if restg is None:
            newf: Formula = b
        else:
            rf = compact(section_prune(node, Comma, rest))
            compose_star(cur, x, restg.world, anchor, rf, b)
            newf = Star(rf, b)
        repack(cur, frames, x, newf)
        target2 = embed_cert(premisses[1], w)
        to_interface(cur, target2)
        return CertStep(cur.finish(), [target1, target2])

    if rule is RuleId.W:
        (mask,) = inst.params
        drop = set(mask)
        elems = section(node, Semi)
        keep_idx = set(range(len(elems))) - drop
        decompose_semi_tree(cur, x, node)
        kept = section_prune(node, Semi, keep_idx)
        if kept is None:
            top_create(cur, x)
            return finish_single(Top())
        return finish_single(compose_semi_tree(cur, x, kept))

    if rule is RuleId.C:
        f = compact(node)
        cur.to_front(cur.ctx_index(Sat(x, f)))
        cur.step(DljRule.CONTR_L)
        compose_and(cur, x, f, f)
        return finish_single(And(f, f))

    if rule is RuleId.TOP_L:
        top_create(cur, x)
        f = compact(node)
        compose_and(cur, x, f, Top())
        return finish_single(And(f, Top()))

    if rule is RuleId.MULT_TOP_L2:
        f = compact(node)
        unit_intro(cur, x, f)
        return finish_single(Star(f, MultTop()))

    if rule is RuleId.MULT_TOP_L1:
        (uidx,) = inst.params
        elems = section(node, Comma)
        keep_idx = set(range(len(elems))) - {uidx}
        g = decompose_comma_tree(cur, x, node, [0])
        tt = pruned_tag_tree(node, keep_idx, [0])
        unit_tt = pruned_tag_tree(node, {uidx}, [0])
        target_tree = TagTree(tt.tags | unit_tt.tags, tt, unit_tt)
        g = regroup(cur, g, target_tree)
        kept_f = compose_group(cur, g.left)
        unit_elim(cur, x, g.left.world, g.right.world, kept_f)
        return finish_single(kept_f)

    if rule is RuleId.E1:
        assert isinstance(node, Semi)
        a, b = compact(node.left), compact(node.right)
        decompose_and(cur, x, a, b)
        compose_and(cur, x, b, a)
        return finish_single(And(b, a))

    if rule is RuleId.E2:
        assert isinstance(node, Semi) and isinstance(node.right, Semi)
        a = compact(node.left)
        b = compact(node.right.left)
        c = compact(node.right.right)
        decompose_and(cur, x, a, And(b, c))
        decompose_and(cur, x, b, c)
        compose_and(cur, x, a, b)
        compose_and(cur, x, And(a, b), c)
        return finish_single(And(And(a, b), c))

    if rule is RuleId.COMM:
        assert isinstance(node, Comma)
        a, b = compact(node.left), compact(node.right)
        u, v = decompose_star(cur, x, a, b)
        use_comm(cur, x, u, v)
        compose_star(cur, x, v, u, b, a)
        return finish_single(Star(b, a))

    if rule is RuleId.ASSO:
        assert isinstance(node, Comma) and isinstance(node.right, Comma)
        a = compact(node.left)
        b = compact(node.right.left)
        c = compact(node.right.right)
        aw, yw = decompose_star(cur, x, a, Star(b, c))
        bw, cw = decompose_star(cur, yw, b, c)
        z = use_assoc(cur, x, aw, yw, bw, cw)  # R(x,z,cw), R(z,aw,bw)
        compose_star(cur, z, aw, bw, a, b)
        compose_star(cur, x, z, cw, Star(a, b), c)
        return finish_single(Star(Star(a, b), c))

    if rule is RuleId.ASSO_INV:
        assert isinstance(node, Comma) and isinstance(node.left, Comma)
        a = compact(node.left.left)
        b = compact(node.left.right)
        c = compact(node.right)
        mw, cw = decompose_star(cur, x, Star(a, b), c)
        aw, bw = decompose_star(cur, mw, a, b)
        use_comm(cur, x, mw, cw)                      # R(x, cw, mw)
        z = use_assoc(cur, x, cw, mw, aw, bw)         # R(x,z,bw), R(z,cw,aw)
        use_comm(cur, x, z, bw)                        # R(x, bw, z)
        n = use_assoc(cur, x, bw, z, cw, aw)          # R(x,n,aw), R(n,bw,cw)
        use_comm(cur, x, n, aw)                        # R(x, aw, n)
        compose_star(cur, n, bw, cw, b, c)
        compose_star(cur, x, aw, n, a, Star(b, c))
        return finish_single(Star(a, Star(b, c)))

    raise CertifyError(f"no certificate for {rule.value}")
